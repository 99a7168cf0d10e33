//! Procedural generation of valid sketch-and-extrude programs with paired
//! point clouds, plus dataset persistence.

mod dataset;
mod generate;
mod shapes;

pub use dataset::{read_dataset, write_dataset, Manifest, MANIFEST_VERSION};
pub use generate::{generate_sample, DEFAULT_REJECTION_BUDGET};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::CadProgram;

/// Which split a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One generated sample: a quantized program and the cloud sampled from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub id: String,
    pub program: CadProgram,
    pub points: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub curve_count: usize,
    pub split: Split,
}

/// Relative weights of the sketch shape library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeWeights {
    pub rectangle: f64,
    pub ngon: f64,
    pub circle: f64,
    pub slot: f64,
}

impl Default for ShapeWeights {
    fn default() -> Self {
        Self {
            rectangle: 0.40,
            ngon: 0.20,
            circle: 0.25,
            slot: 0.15,
        }
    }
}

/// Generator configuration. Every continuous parameter is drawn directly on
/// the 8-bit quantization grid, so quantization is lossless by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Steps per program are drawn from `1..=max_steps`.
    pub max_steps: usize,
    /// Faces per sketch are drawn from this inclusive range (capped at 2).
    pub face_range: (usize, usize),
    /// Probability of adding a circular hole loop to a rectangle face.
    pub hole_prob: f64,
    pub shape_weights: ShapeWeights,
    /// Probability of a non-identity sketch-plane rotation.
    pub rotated_plane_prob: f64,
    /// Sketch scale range (values land on the quantization grid).
    pub sigma_range: (f64, f64),
    /// Forward extrusion distance range.
    pub d_plus_range: (f64, f64),
    /// Probability that `d_minus` is non-zero; when drawn it stays at or
    /// below `0.1 * d_plus` so sketch-plane caps remain inside the
    /// margin-enlarged instance slab.
    pub d_minus_prob: f64,
    /// Boundary points sampled per cloud.
    pub n_points: usize,
    /// Split sizes: (train, val, test). Sample index determines the split.
    pub splits: (usize, usize, usize),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_steps: 3,
            face_range: (1, 2),
            hole_prob: 0.25,
            shape_weights: ShapeWeights::default(),
            rotated_plane_prob: 0.35,
            sigma_range: (0.20, 0.45),
            d_plus_range: (0.10, 0.40),
            d_minus_prob: 0.15,
            n_points: 1024,
            splits: (2000, 200, 200),
        }
    }
}

impl GeneratorConfig {
    pub fn with_points(mut self, n: usize) -> Self {
        self.n_points = n;
        self
    }

    pub fn total_samples(&self) -> usize {
        self.splits.0 + self.splits.1 + self.splits.2
    }

    pub fn split_of(&self, index: usize) -> Split {
        if index < self.splits.0 {
            Split::Train
        } else if index < self.splits.0 + self.splits.1 {
            Split::Val
        } else {
            Split::Test
        }
    }

    /// Stable hash of the serialized config, recorded in manifests.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Mix a base seed with a sample index into an independent stream seed.
pub(crate) fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Stable ascending permutation by curve count (curriculum ordering).
pub fn curriculum_order(samples: &[DatasetSample]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by_key(|&i| samples[i].curve_count);
    order
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("sample {index}: rejection budget of {budget} attempts exhausted")]
    Budget { index: usize, budget: usize },
    #[error("dataset load: {0}")]
    Load(String),
    #[error("dataset write: {0}")]
    Write(String),
    #[error("unknown manifest version {found:?}, expected {expected:?}")]
    ManifestVersion { found: String, expected: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(curves: usize, idx: usize) -> DatasetSample {
        DatasetSample {
            id: format!("s{idx}"),
            program: CadProgram { steps: vec![] },
            points: vec![],
            normals: vec![],
            curve_count: curves,
            split: Split::Train,
        }
    }

    #[test]
    fn curriculum_sorts_ascending() {
        let samples = vec![sample(5, 0), sample(3, 1), sample(9, 2)];
        assert_eq!(curriculum_order(&samples), vec![1, 0, 2]);
    }

    #[test]
    fn curriculum_is_stable_and_idempotent() {
        let samples = vec![sample(4, 0), sample(4, 1), sample(2, 2), sample(4, 3)];
        let order = curriculum_order(&samples);
        assert_eq!(order, vec![2, 0, 1, 3]);
        let reordered: Vec<DatasetSample> = order.iter().map(|&i| samples[i].clone()).collect();
        assert_eq!(curriculum_order(&reordered), vec![0, 1, 2, 3]);
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = GeneratorConfig::default();
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        b.max_steps = 5;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn split_assignment_follows_counts() {
        let cfg = GeneratorConfig {
            splits: (2, 1, 1),
            ..Default::default()
        };
        assert_eq!(cfg.split_of(0), Split::Train);
        assert_eq!(cfg.split_of(1), Split::Train);
        assert_eq!(cfg.split_of(2), Split::Val);
        assert_eq!(cfg.split_of(3), Split::Test);
    }
}
