//! Subcommand implementations.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{build_solid, estimate_normals, export_obj, normalize_to_unit_box, read_ply};
use crate::lang::{program_to_stream, CadProgram, TokenStream};
use crate::metrics::{evaluate_pairs, EvalPair};
use crate::net::{Model, ModelConfig};
use crate::pipeline::{autocomplete, decode, feature_matrix, train, Sampling, TrainConfig};
use crate::synth::{generate_sample, read_dataset, write_dataset, GeneratorConfig};
use crate::tensor::Array;

use super::manifest::RunManifest;
use super::{CliError, Command};

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::GenData {
            config,
            out,
            count,
            seed,
            points,
        } => gen_data(config, out, count, seed, points),
        Command::Train {
            data,
            model_preset,
            out,
            epochs,
            batch_size,
            seed,
            resume,
        } => run_train(data, model_preset, out, epochs, batch_size, seed, resume),
        Command::Infer {
            ckpt,
            cloud,
            hybrid_k,
            out,
            seed,
            eval_points,
        } => infer(ckpt, cloud, hybrid_k, out, seed, eval_points),
        Command::Autocomplete {
            ckpt,
            cloud,
            prefix,
            interactive,
            out,
            k,
            seed,
            eval_points,
        } => run_autocomplete(ckpt, cloud, prefix, interactive, out, k, seed, eval_points),
        Command::Eval {
            pred_dir,
            gt_dir,
            out,
            eval_points,
            seed,
        } => eval(pred_dir, gt_dir, out, eval_points, seed),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text).map_err(io_err(path))
}

fn gen_data(
    config: Option<PathBuf>,
    out: PathBuf,
    count: Option<usize>,
    seed: u64,
    points: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg: GeneratorConfig = match &config {
        Some(path) => read_json(path)?,
        None => GeneratorConfig::default(),
    };
    cfg.seed = seed;
    if let Some(n) = points {
        cfg.n_points = n;
    }
    if let Some(total) = count {
        if total == 0 {
            return Err(CliError::Validation(
                "--count must be at least 1".to_string(),
            ));
        }
        cfg.splits = scale_splits(cfg.splits, total);
    }
    let total = cfg.total_samples();
    let samples: Vec<_> = (0..total)
        .into_par_iter()
        .map(|i| generate_sample(&cfg, i))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    write_dataset(&samples, &cfg, &out).map_err(|e| CliError::Io(e.to_string()))?;
    RunManifest::new(
        "gen-data",
        serde_json::to_value(&cfg).expect("config serializes"),
        seed,
        &[],
        &[&out],
    )
    .write(&out)?;
    println!(
        "wrote {total} samples ({} train / {} val / {} test) to {}",
        cfg.splits.0,
        cfg.splits.1,
        cfg.splits.2,
        out.display()
    );
    Ok(())
}

fn scale_splits(base: (usize, usize, usize), total: usize) -> (usize, usize, usize) {
    let sum = (base.0 + base.1 + base.2).max(1);
    let val = (base.1 * total) / sum;
    let test = (base.2 * total) / sum;
    let train = total - val - test;
    (train, val, test)
}

pub(crate) fn preset(name: &str) -> Result<ModelConfig, CliError> {
    match name {
        "tiny" => Ok(ModelConfig::tiny()),
        "desk" => Ok(ModelConfig::desk()),
        "full" => Ok(ModelConfig::full()),
        other => Err(CliError::Validation(format!(
            "unknown model preset {other:?}; expected tiny, desk, or full"
        ))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainState {
    completed_epochs: usize,
    steps: u64,
    config_hash: String,
}

fn run_train(
    data: PathBuf,
    model_preset: String,
    out: PathBuf,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    seed: u64,
    resume: bool,
) -> Result<(), CliError> {
    let (manifest, samples) = read_dataset(&data).map_err(|e| CliError::Io(e.to_string()))?;
    let train_set: Vec<_> = samples
        .into_iter()
        .filter(|s| s.split == crate::synth::Split::Train)
        .collect();
    if train_set.is_empty() {
        return Err(CliError::Validation(format!(
            "dataset {} has no train split",
            data.display()
        )));
    }
    let mut mcfg = preset(&model_preset)?;
    mcfg.n_points = manifest.config.n_points;
    mcfg.seed = seed;

    let mut tcfg = TrainConfig {
        seed,
        ..Default::default()
    };
    if let Some(e) = epochs {
        tcfg.epochs = e;
    }
    if let Some(b) = batch_size {
        tcfg.batch_size = b;
    }

    let state_path = out.join("state.json");
    let ckpt_path = out.join("checkpoints").join("latest.ckpt");
    let mut model;
    if resume {
        let state: TrainState = read_json(&state_path)?;
        model = Model::<f32>::load(&ckpt_path).map_err(|e| CliError::Io(e.to_string()))?;
        if model.cfg.content_hash() != mcfg.content_hash() {
            return Err(CliError::Validation(format!(
                "resume refused: checkpoint config hash {} does not match requested preset hash {}",
                model.cfg.content_hash(),
                mcfg.content_hash()
            )));
        }
        tcfg.start_epoch = state.completed_epochs;
        tcfg.start_step = state.steps;
        if tcfg.start_epoch >= tcfg.epochs {
            return Err(CliError::Validation(format!(
                "nothing to resume: {} epochs already completed",
                state.completed_epochs
            )));
        }
    } else {
        model = Model::<f32>::init(&mcfg);
    }

    std::fs::create_dir_all(out.join("eval")).map_err(io_err(&out))?;
    RunManifest::new(
        "train",
        serde_json::json!({"model": mcfg, "train": tcfg, "data_config_hash": manifest.config_hash}),
        seed,
        &[&data],
        &[&out],
    )
    .write(&out)?;
    write_json(
        &out.join("config.json"),
        &serde_json::json!({"model": mcfg, "train": tcfg}),
    )?;

    let stats = train(&mut model, &train_set, &tcfg, Some(&out))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_json(
        &state_path,
        &TrainState {
            completed_epochs: tcfg.epochs,
            steps: stats.steps,
            config_hash: model.cfg.content_hash(),
        },
    )?;
    println!(
        "trained {} steps; final loss {:.4}, teacher-forced accuracy {:.3}",
        stats.steps, stats.final_loss, stats.final_accuracy
    );
    Ok(())
}

/// Load a cloud, estimate normals when the file has none, and normalize.
fn load_cloud(path: &Path) -> Result<Array<f64>, CliError> {
    let (points, normals) = read_ply(path).map_err(|e| CliError::Io(e.to_string()))?;
    if points.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: cloud has no points",
            path.display()
        )));
    }
    let points = normalize_to_unit_box(&points).map_err(|e| CliError::Validation(e.to_string()))?;
    let normals = match normals {
        Some(n) => n,
        None => estimate_normals(&points).map_err(|e| CliError::Validation(e.to_string()))?,
    };
    Ok(feature_matrix(&points, &normals))
}

#[derive(Debug, Serialize)]
struct CandidateSummary {
    rank: usize,
    valid: bool,
    cd_to_input: f64,
    tokens: usize,
    diag: String,
}

#[derive(Debug, Serialize)]
struct DecodeSummary {
    selected: usize,
    all_invalid: bool,
    candidates: Vec<CandidateSummary>,
}

fn infer(
    ckpt: PathBuf,
    cloud: PathBuf,
    hybrid_k: usize,
    out: PathBuf,
    seed: u64,
    eval_points: usize,
) -> Result<(), CliError> {
    if hybrid_k == 0 {
        return Err(CliError::Validation(
            "--hybrid-k must be at least 1".to_string(),
        ));
    }
    let model = Model::<f32>::load(&ckpt).map_err(|e| CliError::Io(e.to_string()))?;
    let feats = load_cloud(&cloud)?;
    let prefix = crate::lang::stream_from_tokens(vec![crate::lang::Token2D::new(
        crate::lang::CLS,
        crate::lang::PAD,
    )]);
    let result = decode(
        &model,
        &feats,
        &prefix,
        Sampling::Hybrid(hybrid_k),
        eval_points,
        seed,
    )
    .map_err(|e| CliError::Internal(e.to_string()))?;

    let cand_dir = out.join("candidates");
    std::fs::create_dir_all(&cand_dir).map_err(io_err(&cand_dir))?;
    for (i, c) in result.candidates.iter().enumerate() {
        write_json(&cand_dir.join(format!("cand_{i}.program.json")), &c.program)?;
    }
    let summary = DecodeSummary {
        selected: result.selected,
        all_invalid: result.all_invalid,
        candidates: result
            .candidates
            .iter()
            .enumerate()
            .map(|(rank, c)| CandidateSummary {
                rank,
                valid: c.valid,
                cd_to_input: c.cd_to_input,
                tokens: c.stream.true_len(),
                diag: c.diag.clone(),
            })
            .collect(),
    };
    write_json(&out.join("result.json"), &summary)?;

    let selected = result.selected_candidate();
    if let Some(program) = &selected.program {
        if selected.valid {
            if let Ok(solid) = build_solid(program) {
                let (v, f) = export_obj(&solid, &out.join("selected.obj"))
                    .map_err(|e| CliError::Io(e.to_string()))?;
                println!("selected.obj: {v} vertices, {f} triangles");
            }
        }
    }
    RunManifest::new(
        "infer",
        serde_json::json!({"hybrid_k": hybrid_k, "eval_points": eval_points}),
        seed,
        &[&ckpt, &cloud],
        &[&out],
    )
    .write(&out)?;
    println!(
        "decoded {} candidates; selected {} (cd x1e3 = {:.3}, all_invalid = {})",
        result.candidates.len(),
        result.selected,
        selected.cd_to_input * 1e3,
        result.all_invalid
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_autocomplete(
    ckpt: PathBuf,
    cloud: PathBuf,
    prefix: Option<PathBuf>,
    interactive: bool,
    out: PathBuf,
    k: usize,
    seed: u64,
    eval_points: usize,
) -> Result<(), CliError> {
    let model = Model::<f32>::load(&ckpt).map_err(|e| CliError::Io(e.to_string()))?;
    let feats = load_cloud(&cloud)?;
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;

    if interactive {
        if prefix.is_some() {
            return Err(CliError::Validation(
                "--prefix and --interactive are mutually exclusive".to_string(),
            ));
        }
        let stdin = std::io::stdin();
        let stdout = std::io::stdout();
        let (stream, completed) = super::repl::interactive_session(
            &model,
            &feats,
            k,
            eval_points,
            seed,
            &mut stdin.lock(),
            &mut stdout.lock(),
        )
        .map_err(|e| CliError::Internal(e.to_string()))?;
        let program = crate::lang::stream_to_program(&stream).ok();
        write_json(&out.join("session.program.json"), &program)?;
        crate::lang::write_stream(&stream, &out.join("session.tokens"))
            .map_err(|e| CliError::Io(e.to_string()))?;
        println!(
            "session saved ({} tokens, completed = {completed})",
            stream.true_len()
        );
    } else {
        let prefix_path = prefix.ok_or_else(|| {
            CliError::Validation("batch mode requires --prefix <program.json>".to_string())
        })?;
        let prefix_program: CadProgram = read_json(&prefix_path)?;
        if prefix_program.steps.len() != 1 {
            return Err(CliError::Validation(format!(
                "prefix program must contain exactly the first step, found {}",
                prefix_program.steps.len()
            )));
        }
        let full =
            program_to_stream(&prefix_program).map_err(|e| CliError::Validation(e.to_string()))?;
        // Drop the trailing end token to leave the stream at a boundary.
        let given_tokens: Vec<_> = full.tokens[..full.true_len() - 1].to_vec();
        let given: TokenStream = crate::lang::stream_from_tokens(given_tokens);
        let result = autocomplete(
            &model,
            &feats,
            &given,
            Sampling::Hybrid(k),
            eval_points,
            seed,
        )
        .map_err(|e| CliError::Internal(e.to_string()))?;
        let sel = result.decode.selected_candidate();
        write_json(&out.join("completed.program.json"), &sel.program)?;
        write_json(
            &out.join("result.json"),
            &serde_json::json!({
                "cd_pred_gt": result.cd_pred_gt,
                "cd_in_gt": result.cd_in_gt,
                "cd_ratio": result.ratio,
                "all_invalid": result.decode.all_invalid,
            }),
        )?;
        match result.ratio {
            Some(r) => println!(
                "completion CD x1e3 {:.3} / prefix CD x1e3 {:.3} -> ratio {r:.3}",
                result.cd_pred_gt * 1e3,
                result.cd_in_gt * 1e3
            ),
            None if !result.cd_in_gt.is_finite() => {
                println!("prefix failed to reconstruct; CD ratio undefined")
            }
            None => println!("no valid completion candidate; CD ratio undefined"),
        }
    }
    RunManifest::new(
        "autocomplete",
        serde_json::json!({"k": k, "interactive": interactive, "eval_points": eval_points}),
        seed,
        &[&ckpt, &cloud],
        &[&out],
    )
    .write(&out)?;
    Ok(())
}

fn eval(
    pred_dir: PathBuf,
    gt_dir: PathBuf,
    out: PathBuf,
    eval_points: usize,
    seed: u64,
) -> Result<(), CliError> {
    let (manifest, samples) = read_dataset(&gt_dir).map_err(|e| CliError::Io(e.to_string()))?;
    let mut missing = Vec::new();
    let mut pairs = Vec::new();
    for s in &samples {
        let path = pred_dir.join(format!("{}.program.json", s.id));
        if !path.exists() {
            missing.push(s.id.clone());
            continue;
        }
        let pred: Option<CadProgram> = read_json(&path)?;
        pairs.push(EvalPair {
            id: s.id.clone(),
            gt: s.program.clone(),
            pred,
            cd_ratio: None,
        });
    }
    if !missing.is_empty() {
        return Err(CliError::Validation(format!(
            "prediction files missing for ids: {}",
            missing.join(", ")
        )));
    }
    let report = evaluate_pairs(&pairs, eval_points, seed)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    write_json(&out, &report)?;
    print!("{}", report.to_table());
    let _ = manifest;
    Ok(())
}
