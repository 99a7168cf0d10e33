//! Confusion accounting for curves and extrusions, invalidity ratio, and
//! quartiles.

use std::collections::HashMap;

use crate::lang::{CurveKind, Sketch};

use super::assignment::match_entity_list;
use super::MetricsError;

/// Precision / recall / F1 triple.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            recall,
            precision,
            f1,
        }
    }
}

/// Micro counts for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn merge(&mut self, o: &ConfusionCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }

    pub fn prf(&self) -> Prf {
        Prf::from_counts(self.tp, self.fp, self.fn_)
    }
}

/// Per-curve-type confusion over matched pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveConfusion {
    pub per_type: HashMap<CurveKind, ConfusionCounts>,
}

impl CurveConfusion {
    pub fn merge(&mut self, o: &CurveConfusion) {
        for (k, c) in &o.per_type {
            self.per_type.entry(*k).or_default().merge(c);
        }
    }

    pub fn of(&self, kind: CurveKind) -> ConfusionCounts {
        self.per_type.get(&kind).copied().unwrap_or_default()
    }

    fn record(&mut self, gt: Option<CurveKind>, pred: Option<CurveKind>) {
        match (gt, pred) {
            (Some(g), Some(p)) if g == p => {
                self.per_type.entry(g).or_default().tp += 1;
            }
            (Some(g), Some(p)) => {
                self.per_type.entry(g).or_default().fn_ += 1;
                self.per_type.entry(p).or_default().fp += 1;
            }
            (Some(g), None) => {
                self.per_type.entry(g).or_default().fn_ += 1;
            }
            (None, Some(p)) => {
                self.per_type.entry(p).or_default().fp += 1;
            }
            (None, None) => {}
        }
    }
}

/// Match loops per step-aligned sketch pair, then curves inside matched
/// loops, and accumulate the per-type confusion. A padding slot on either
/// side counts against the real side's class.
pub fn curve_confusion(gt: &[Option<&Sketch>], pred: &[Option<&Sketch>]) -> CurveConfusion {
    let n_max = gt.len().max(pred.len());
    let mut confusion = CurveConfusion::default();
    let empty = Vec::new();
    for i in 0..n_max {
        let g_loops: Vec<crate::lang::Loop> = match gt.get(i).copied().flatten() {
            Some(s) => s.faces.iter().flat_map(|f| f.loops.clone()).collect(),
            None => empty.clone(),
        };
        let p_loops: Vec<crate::lang::Loop> = match pred.get(i).copied().flatten() {
            Some(s) => s.faces.iter().flat_map(|f| f.loops.clone()).collect(),
            None => empty.clone(),
        };
        for (gl, pl) in match_entity_list(&g_loops, &p_loops) {
            let g_curves: &[crate::lang::Curve] = gl.map_or(&[], |k| g_loops[k].curves.as_slice());
            let p_curves: &[crate::lang::Curve] = pl.map_or(&[], |k| p_loops[k].curves.as_slice());
            for (gc, pc) in match_entity_list(g_curves, p_curves) {
                confusion.record(
                    gc.map(|k| g_curves[k].kind()),
                    pc.map(|k| p_curves[k].kind()),
                );
            }
        }
    }
    confusion
}

/// Per-sample extrusion counting: `TP = min(gt, pred)`, the excess on
/// either side is FP/FN.
pub fn extrusion_counts(gt_count: usize, pred_count: usize) -> ConfusionCounts {
    ConfusionCounts {
        tp: gt_count.min(pred_count),
        fp: pred_count.saturating_sub(gt_count),
        fn_: gt_count.saturating_sub(pred_count),
    }
}

/// Percentage of invalid samples.
pub fn invalidity_ratio(valids: &[bool]) -> Result<f64, MetricsError> {
    if valids.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let invalid = valids.iter().filter(|v| !**v).count();
    Ok(100.0 * invalid as f64 / valids.len() as f64)
}

/// Linear-interpolation quartiles.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

pub fn quartiles(values: &[f64]) -> Result<Quartiles, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let at = |p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < sorted.len() {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        }
    };
    Ok(Quartiles {
        q1: at(0.25),
        q2: at(0.5),
        q3: at(0.75),
    })
}
