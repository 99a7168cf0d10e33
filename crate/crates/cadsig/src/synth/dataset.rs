//! Dataset directory persistence.
//!
//! Layout: `manifest.json` (version, config, config hash, per-sample id /
//! split / curve count) plus `samples/<id>.program.json` and
//! `samples/<id>.cloud.ply` with normals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{read_ply, write_ply};
use crate::lang::CadProgram;

use super::{DatasetSample, GeneratorConfig, Split, SynthError};

pub const MANIFEST_VERSION: &str = "v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub curve_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: GeneratorConfig,
    pub config_hash: String,
    pub samples: Vec<ManifestEntry>,
}

/// Write samples plus manifest under `dir`.
pub fn write_dataset(
    samples: &[DatasetSample],
    cfg: &GeneratorConfig,
    dir: &Path,
) -> Result<(), SynthError> {
    let werr = |e: String| SynthError::Write(e);
    let sample_dir = dir.join("samples");
    std::fs::create_dir_all(&sample_dir)
        .map_err(|e| werr(format!("{}: {e}", sample_dir.display())))?;
    for s in samples {
        let pj = sample_dir.join(format!("{}.program.json", s.id));
        let json = serde_json::to_string_pretty(&s.program)
            .map_err(|e| werr(format!("{}: {e}", pj.display())))?;
        std::fs::write(&pj, json).map_err(|e| werr(format!("{}: {e}", pj.display())))?;
        let cp = sample_dir.join(format!("{}.cloud.ply", s.id));
        write_ply(&cp, &s.points, Some(&s.normals))
            .map_err(|e| werr(format!("{}: {e}", cp.display())))?;
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION.to_string(),
        config: cfg.clone(),
        config_hash: cfg.content_hash(),
        samples: samples
            .iter()
            .map(|s| ManifestEntry {
                id: s.id.clone(),
                split: s.split,
                curve_count: s.curve_count,
            })
            .collect(),
    };
    let mp = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| werr(format!("{}: {e}", mp.display())))?;
    std::fs::write(&mp, json).map_err(|e| werr(format!("{}: {e}", mp.display())))?;
    Ok(())
}

/// Read a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<(Manifest, Vec<DatasetSample>), SynthError> {
    let lerr = |e: String| SynthError::Load(e);
    let mp = dir.join("manifest.json");
    let text = std::fs::read_to_string(&mp).map_err(|e| lerr(format!("{}: {e}", mp.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| lerr(format!("{}: {e}", mp.display())))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(SynthError::ManifestVersion {
            found: manifest.version,
            expected: MANIFEST_VERSION.to_string(),
        });
    }
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let pj = dir
            .join("samples")
            .join(format!("{}.program.json", entry.id));
        let text =
            std::fs::read_to_string(&pj).map_err(|e| lerr(format!("{}: {e}", pj.display())))?;
        let program: CadProgram =
            serde_json::from_str(&text).map_err(|e| lerr(format!("{}: {e}", pj.display())))?;
        let cp = dir.join("samples").join(format!("{}.cloud.ply", entry.id));
        let (points, normals) =
            read_ply(&cp).map_err(|e| lerr(format!("{}: {e}", cp.display())))?;
        let normals =
            normals.ok_or_else(|| lerr(format!("{}: cloud is missing normals", cp.display())))?;
        samples.push(DatasetSample {
            id: entry.id.clone(),
            program,
            points,
            normals,
            curve_count: entry.curve_count,
            split: entry.split,
        });
    }
    Ok((manifest, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_sample;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("cadsig-dataset-test").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn round_trip_identity_modulo_f32_cloud() {
        let cfg = GeneratorConfig {
            splits: (3, 1, 1),
            n_points: 128,
            ..Default::default()
        };
        let samples: Vec<_> = (0..5).map(|i| generate_sample(&cfg, i).unwrap()).collect();
        let dir = tmp("roundtrip");
        write_dataset(&samples, &cfg, &dir).unwrap();
        let (manifest, back) = read_dataset(&dir).unwrap();
        assert_eq!(manifest.config_hash, cfg.content_hash());
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.split, b.split);
            assert_eq!(a.program, b.program);
            assert_eq!(a.curve_count, b.curve_count);
            assert_eq!(a.points.len(), b.points.len());
            // Clouds persist as f32.
            for (p, q) in a.points.iter().zip(&b.points) {
                for k in 0..3 {
                    assert!((p[k] - q[k]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn missing_file_is_named() {
        let cfg = GeneratorConfig {
            splits: (1, 0, 0),
            n_points: 64,
            ..Default::default()
        };
        let samples = vec![generate_sample(&cfg, 0).unwrap()];
        let dir = tmp("missing");
        write_dataset(&samples, &cfg, &dir).unwrap();
        let victim = dir.join("samples").join("s00000.cloud.ply");
        std::fs::remove_file(&victim).unwrap();
        let err = read_dataset(&dir).unwrap_err();
        assert!(err.to_string().contains("s00000.cloud.ply"), "{err}");
    }

    #[test]
    fn unknown_manifest_version_rejected() {
        let cfg = GeneratorConfig {
            splits: (1, 0, 0),
            n_points: 64,
            ..Default::default()
        };
        let samples = vec![generate_sample(&cfg, 0).unwrap()];
        let dir = tmp("version");
        write_dataset(&samples, &cfg, &dir).unwrap();
        let mp = dir.join("manifest.json");
        let text = std::fs::read_to_string(&mp)
            .unwrap()
            .replace("\"v1\"", "\"v9\"");
        std::fs::write(&mp, text).unwrap();
        assert!(matches!(
            read_dataset(&dir),
            Err(SynthError::ManifestVersion { .. })
        ));
    }
}
