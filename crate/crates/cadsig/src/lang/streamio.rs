//! Flat binary token-stream format.
//!
//! Layout: magic `CSG1`, version `u8`, `true_len` as `u16` little-endian,
//! then `true_len` pairs of little-endian `u16` token components. Flags and
//! step indices are re-derived on load with the lenient tracker.

use std::io::{Read, Write};
use std::path::Path;

use super::{stream_from_tokens, LangError, Token2D, TokenStream, MAX_TOKENS, NUM_MAX};

const MAGIC: &[u8; 4] = b"CSG1";
const VERSION: u8 = 1;

/// Write a stream to `path` in the binary format.
pub fn write_stream(stream: &TokenStream, path: &Path) -> Result<(), LangError> {
    let mut buf = Vec::with_capacity(7 + stream.true_len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    let n = stream.true_len();
    if n > MAX_TOKENS {
        return Err(LangError::Capacity(format!(
            "stream length {n} exceeds {MAX_TOKENS}"
        )));
    }
    buf.extend_from_slice(&(n as u16).to_le_bytes());
    for t in &stream.tokens {
        buf.extend_from_slice(&t.a.to_le_bytes());
        buf.extend_from_slice(&t.b.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| LangError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(&buf)
        .map_err(|e| LangError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Read a stream written by [`write_stream`].
pub fn read_stream(path: &Path) -> Result<TokenStream, LangError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| LangError::Io(format!("{}: {e}", path.display())))?;
    if bytes.len() < 7 || &bytes[0..4] != MAGIC {
        return Err(LangError::Io(format!(
            "{}: not a CSG1 token stream",
            path.display()
        )));
    }
    if bytes[4] != VERSION {
        return Err(LangError::Io(format!(
            "{}: unsupported stream version {}",
            path.display(),
            bytes[4]
        )));
    }
    let n = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
    if n > MAX_TOKENS || bytes.len() != 7 + 4 * n {
        return Err(LangError::Io(format!(
            "{}: corrupt stream (declared {n} tokens, {} payload bytes)",
            path.display(),
            bytes.len() - 7
        )));
    }
    let mut tokens = Vec::with_capacity(n);
    for i in 0..n {
        let o = 7 + 4 * i;
        let a = u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let b = u16::from_le_bytes([bytes[o + 2], bytes[o + 3]]);
        if a > NUM_MAX || b > NUM_MAX {
            return Err(LangError::Io(format!(
                "{}: token {i} out of vocabulary ({a}, {b})",
                path.display()
            )));
        }
        tokens.push(Token2D::new(a, b));
    }
    Ok(stream_from_tokens(tokens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{fixtures, program_to_stream};

    #[test]
    fn round_trip_preserves_tokens_and_classification() {
        let stream = program_to_stream(&fixtures::single_step_program()).unwrap();
        let dir = std::env::temp_dir().join("cadsig-streamio-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("square.tokens");
        write_stream(&stream, &path).unwrap();
        let back = read_stream(&path).unwrap();
        assert_eq!(back, stream);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let dir = std::env::temp_dir().join("cadsig-streamio-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.tokens");
        std::fs::write(&path, b"NOPE\x01\x00\x00").unwrap();
        assert!(matches!(read_stream(&path), Err(LangError::Io(_))));
        std::fs::write(&path, b"CSG1\x07\x00\x00").unwrap();
        let err = read_stream(&path).unwrap_err();
        assert!(err.to_string().contains("version"));
    }
}
