//! Evaluation metric suite: Chamfer distance, invalidity ratio,
//! Hungarian-matched per-curve F1, extrusion F1, and quartiles.

mod assignment;
mod chamfer;
mod f1;
mod report;

pub use assignment::{hungarian, match_entity_list, matching_cost, EntityBbox, MatchedPair};
pub use chamfer::chamfer;
pub use f1::{
    curve_confusion, extrusion_counts, invalidity_ratio, quartiles, ConfusionCounts,
    CurveConfusion, Prf, Quartiles,
};
pub use report::{evaluate_pairs, EvalPair, EvalReport, TypePrf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty point set in Chamfer distance")]
    EmptyCloud,
    #[error("empty sample set")]
    EmptySet,
    #[error("{0}")]
    Invalid(String),
}
