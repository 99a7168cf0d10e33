//! Golden fixture corpus: curated inputs with frozen expected outputs.
//!
//! Each fixture is a directory under `fixtures/` holding an
//! `expected.json` plus optional `program.json` and `stream.tokens`
//! inputs. Fixtures are immutable once published — behavior changes get
//! new fixtures.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::evaluate_program;
use crate::lang::{program_to_stream, read_stream, stream_to_program, CadProgram, TokenStream};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown fixture {0:?}")]
    Unknown(String),
    #[error("fixture {0}: {1}")]
    Malformed(String, String),
}

/// Membership probe against the evaluated solid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipProbe {
    pub p: [f64; 3],
    pub inside: bool,
}

/// Frozen expectations of one fixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expected {
    pub name: String,
    /// Where the expectation comes from: "hand-enumerated", "analytic", or
    /// "oracle:<description>".
    pub source: String,
    /// Exact token pairs `program.json` must serialize to.
    #[serde(default)]
    pub tokens: Option<Vec<(u16, u16)>>,
    /// Require stream -> program -> stream identity.
    #[serde(default)]
    pub round_trip: bool,
    /// Expected geometric validity of the evaluated program.
    #[serde(default)]
    pub expect_valid: Option<bool>,
    /// Substring the invalidity diagnosis must contain.
    #[serde(default)]
    pub diag_contains: Option<String>,
    #[serde(default)]
    pub membership: Vec<MembershipProbe>,
    /// Chamfer bound (raw, unscaled) against the analytic unit cube.
    #[serde(default)]
    pub cd_to_analytic_cube_max: Option<f64>,
}

/// Outcome of one fixture run.
#[derive(Debug, Clone)]
pub struct FixtureReport {
    pub name: String,
    pub passed: bool,
    /// One line per check, prefixed `ok:` or `FAIL:`.
    pub details: Vec<String>,
}

/// Repository fixture directory.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Registered fixture names, sorted.
pub fn all_fixture_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixture_dir())
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter(|e| e.path().is_dir())
                .filter_map(|e| e.file_name().into_string().ok())
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

/// Run one fixture by name, comparing actual behavior against the frozen
/// expectations with per-kind tolerances (exact for tokens, 1e-6 for
/// geometry).
pub fn run_fixture(name: &str) -> Result<FixtureReport, CorpusError> {
    let dir = fixture_dir().join(name);
    if !dir.is_dir() {
        return Err(CorpusError::Unknown(name.to_string()));
    }
    let mal = |m: String| CorpusError::Malformed(name.to_string(), m);
    let expected: Expected = {
        let text = std::fs::read_to_string(dir.join("expected.json"))
            .map_err(|e| mal(format!("expected.json: {e}")))?;
        serde_json::from_str(&text).map_err(|e| mal(format!("expected.json: {e}")))?
    };

    let mut details = Vec::new();
    let mut check = |ok: bool, what: String| {
        details.push(format!("{}: {what}", if ok { "ok" } else { "FAIL" }));
        ok
    };
    let mut passed = true;

    let program: Option<CadProgram> = match std::fs::read_to_string(dir.join("program.json")) {
        Ok(text) => {
            Some(serde_json::from_str(&text).map_err(|e| mal(format!("program.json: {e}")))?)
        }
        Err(_) => None,
    };
    let stream_file: Option<TokenStream> = if dir.join("stream.tokens").exists() {
        Some(read_stream(&dir.join("stream.tokens")).map_err(|e| mal(e.to_string()))?)
    } else {
        None
    };

    // Token comparison: the program must serialize to exactly the frozen
    // stream.
    let mut stream: Option<TokenStream> = stream_file;
    if let Some(prog) = &program {
        match program_to_stream(prog) {
            Ok(s) => {
                if let Some(tokens) = &expected.tokens {
                    let actual: Vec<(u16, u16)> = s.tokens.iter().map(|t| (t.a, t.b)).collect();
                    passed &= check(
                        actual == *tokens,
                        format!("token stream matches ({} tokens)", tokens.len()),
                    );
                }
                if let Some(existing) = &stream {
                    passed &= check(
                        existing.tokens == s.tokens,
                        "stream.tokens agrees with program.json serialization".to_string(),
                    );
                }
                stream = Some(s);
            }
            Err(e) => {
                passed &= check(false, format!("program serializes: {e}"));
            }
        }
    }

    if expected.round_trip {
        match &stream {
            Some(s) => match stream_to_program(s) {
                Ok(parsed) => {
                    let ok = match &program {
                        Some(p) => parsed == *p,
                        None => true,
                    };
                    passed &= check(ok, "stream parses back to the program".to_string());
                }
                Err(e) => {
                    passed &= check(false, format!("stream parses: {e}"));
                }
            },
            None => {
                passed &= check(false, "round_trip requested without a stream".to_string());
            }
        }
    }

    // Geometric expectations run on the parsed stream when present
    // (prediction-style fixtures), else on the program.
    let eval_target: Option<CadProgram> = match (&stream, &program) {
        (Some(s), _) => stream_to_program(s).ok(),
        (None, Some(p)) => Some(p.clone()),
        _ => None,
    };
    if expected.expect_valid.is_some()
        || !expected.membership.is_empty()
        || expected.cd_to_analytic_cube_max.is_some()
        || expected.diag_contains.is_some()
    {
        match eval_target {
            Some(prog) => {
                let sample = evaluate_program(&prog, 2048, 0xf1f0);
                if let Some(valid) = expected.expect_valid {
                    passed &= check(
                        sample.valid == valid,
                        format!("validity = {valid} (diag: {:?})", sample.diag),
                    );
                }
                if let Some(substr) = &expected.diag_contains {
                    passed &= check(
                        sample.diag.contains(substr),
                        format!("diagnosis contains {substr:?} (got {:?})", sample.diag),
                    );
                }
                for probe in &expected.membership {
                    let got = sample.membership(&probe.p);
                    passed &= check(
                        got == probe.inside,
                        format!("membership{:?} = {}", probe.p, probe.inside),
                    );
                }
                if let Some(max_cd) = expected.cd_to_analytic_cube_max {
                    let cd = cd_to_analytic_cube(&sample.positions());
                    passed &= check(
                        cd <= max_cd + 1e-6,
                        format!("CD to analytic cube {cd:.6} <= {max_cd}"),
                    );
                }
            }
            None => {
                let why = "geometric checks requested but no evaluable program".to_string();
                passed &= check(false, why);
            }
        }
    }

    Ok(FixtureReport {
        name: name.to_string(),
        passed,
        details,
    })
}

/// Analytic unit-cube surface oracle: a regular grid on all six faces.
fn cd_to_analytic_cube(points: &[[f64; 3]]) -> f64 {
    let g = 24;
    let mut cube = Vec::with_capacity(6 * g * g);
    for i in 0..g {
        for j in 0..g {
            let u = (0.5 + i as f64) / g as f64;
            let v = (0.5 + j as f64) / g as f64;
            cube.push([u, v, 0.0]);
            cube.push([u, v, 1.0]);
            cube.push([u, 0.0, v]);
            cube.push([u, 1.0, v]);
            cube.push([0.0, u, v]);
            cube.push([1.0, u, v]);
        }
    }
    crate::metrics::chamfer(points, &cube).unwrap_or(f64::INFINITY)
}
