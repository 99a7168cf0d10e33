fn main() {
    std::process::exit(cadsig::cli::run());
}
