//! Whole-set evaluation report.

use serde::{Deserialize, Serialize};

use crate::geom::{evaluate_program, normalize_to_unit_box};
use crate::lang::{CadProgram, CurveKind};

use super::f1::{curve_confusion, extrusion_counts, invalidity_ratio, quartiles, CurveConfusion};
use super::{chamfer, MetricsError, Prf, Quartiles};

/// One evaluated sample: the ground-truth program and the predicted one
/// (absent when the predicted stream failed to parse).
#[derive(Debug, Clone)]
pub struct EvalPair {
    pub id: String,
    pub gt: CadProgram,
    pub pred: Option<CadProgram>,
    /// Optional completion-over-input CD ratio from an auto-completion run.
    pub cd_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypePrf {
    pub line: Prf,
    pub arc: Prf,
    pub circle: Prf,
}

/// Evaluation-report JSON. Chamfer distances are stored in the
/// thousandths convention (raw CD times 1000).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub n_valid: usize,
    pub ir_percent: f64,
    /// Mean CD over valid samples, times 1000.
    pub mean_cd: f64,
    /// Median CD over valid samples, times 1000.
    pub median_cd: f64,
    pub curves: TypePrf,
    pub extrusion: Prf,
    pub cd_ratio_quartiles: Option<Quartiles>,
}

/// Reconstruct, measure, and aggregate a full set of prediction pairs.
///
/// Validity is geometric: a prediction counts invalid when it is missing
/// (parse failure) or when its reconstruction reports invalid. CD is
/// aggregated over valid samples only; clouds are re-sampled from both
/// programs at `n_eval_points` and normalized to the unit box before the
/// distance.
pub fn evaluate_pairs(
    pairs: &[EvalPair],
    n_eval_points: usize,
    seed: u64,
) -> Result<EvalReport, MetricsError> {
    use rayon::prelude::*;
    if pairs.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    struct PerSample {
        valid: bool,
        cd: Option<f64>,
        confusion: CurveConfusion,
        extrusion: super::ConfusionCounts,
        cd_ratio: Option<f64>,
    }
    let per: Vec<PerSample> = pairs
        .par_iter()
        .map(|pair| {
            let pred_steps = pair.pred.as_ref().map_or(0, |p| p.steps.len());
            let extrusion = extrusion_counts(pair.gt.steps.len(), pred_steps);
            let gt_sketches: Vec<Option<&crate::lang::Sketch>> =
                pair.gt.steps.iter().map(|s| Some(&s.sketch)).collect();
            let pred_sketches: Vec<Option<&crate::lang::Sketch>> = pair
                .pred
                .as_ref()
                .map(|p| p.steps.iter().map(|s| Some(&s.sketch)).collect())
                .unwrap_or_default();
            let confusion = curve_confusion(&gt_sketches, &pred_sketches);

            // Both sides draw with the same seed: a perfect prediction
            // reproduces the ground-truth sample set exactly and scores a
            // Chamfer distance of zero.
            let mut valid = false;
            let mut cd = None;
            if let Some(pred) = &pair.pred {
                let pred_sample = evaluate_program(pred, n_eval_points, seed);
                if pred_sample.valid {
                    let gt_sample = evaluate_program(&pair.gt, n_eval_points, seed);
                    if gt_sample.valid {
                        let p = normalize_to_unit_box(&pred_sample.positions());
                        let g = normalize_to_unit_box(&gt_sample.positions());
                        if let (Ok(p), Ok(g)) = (p, g) {
                            if let Ok(d) = chamfer(&p, &g) {
                                valid = true;
                                cd = Some(d);
                            }
                        }
                    }
                }
            }
            PerSample {
                valid,
                cd,
                confusion,
                extrusion,
                cd_ratio: pair.cd_ratio,
            }
        })
        .collect();

    let valids: Vec<bool> = per.iter().map(|p| p.valid).collect();
    let ir_percent = invalidity_ratio(&valids)?;
    let cds: Vec<f64> = per.iter().filter_map(|p| p.cd).collect();
    let (mean_cd, median_cd) = if cds.is_empty() {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let mean = cds.iter().sum::<f64>() / cds.len() as f64;
        let median = quartiles(&cds)?.q2;
        (mean * 1e3, median * 1e3)
    };
    let mut confusion = CurveConfusion::default();
    let mut ext = super::ConfusionCounts::default();
    for p in &per {
        confusion.merge(&p.confusion);
        ext.merge(&p.extrusion);
    }
    let ratios: Vec<f64> = per.iter().filter_map(|p| p.cd_ratio).collect();
    let cd_ratio_quartiles = if ratios.is_empty() {
        None
    } else {
        Some(quartiles(&ratios)?)
    };
    Ok(EvalReport {
        n_samples: pairs.len(),
        n_valid: valids.iter().filter(|v| **v).count(),
        ir_percent,
        mean_cd,
        median_cd,
        curves: TypePrf {
            line: confusion.of(CurveKind::Line).prf(),
            arc: confusion.of(CurveKind::Arc).prf(),
            circle: confusion.of(CurveKind::Circle).prf(),
        },
        extrusion: ext.prf(),
        cd_ratio_quartiles,
    })
}

impl EvalReport {
    /// Render the headline numbers as an aligned text table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "samples {}  valid {}  IR {:.2}%\n",
            self.n_samples, self.n_valid, self.ir_percent
        ));
        s.push_str(&format!(
            "CD x1e3: mean {:.3}  median {:.3}\n",
            self.mean_cd, self.median_cd
        ));
        s.push_str("type      recall  precision  f1\n");
        for (name, prf) in [
            ("line", &self.curves.line),
            ("arc", &self.curves.arc),
            ("circle", &self.curves.circle),
            ("extrude", &self.extrusion),
        ] {
            s.push_str(&format!(
                "{name:<9} {:>6.3} {:>9.3} {:>6.3}\n",
                prf.recall, prf.precision, prf.f1
            ));
        }
        if let Some(q) = &self.cd_ratio_quartiles {
            s.push_str(&format!(
                "CD ratio quartiles: Q1 {:.3}  Q2 {:.3}  Q3 {:.3}\n",
                q.q1, q.q2, q.q3
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::fixtures::single_step_program;

    #[test]
    fn perfect_predictions_score_perfectly() {
        let prog = single_step_program();
        let pairs: Vec<EvalPair> = (0..3)
            .map(|i| EvalPair {
                id: format!("s{i}"),
                gt: prog.clone(),
                pred: Some(prog.clone()),
                cd_ratio: None,
            })
            .collect();
        let report = evaluate_pairs(&pairs, 512, 11).unwrap();
        assert_eq!(report.ir_percent, 0.0);
        assert_eq!(report.curves.line.f1, 1.0);
        assert_eq!(report.extrusion.f1, 1.0);
        assert_eq!(report.median_cd, 0.0);
        assert_eq!(report.mean_cd, 0.0);
        assert!(report.cd_ratio_quartiles.is_none());
    }

    #[test]
    fn missing_predictions_are_invalid() {
        let prog = single_step_program();
        let pairs = vec![
            EvalPair {
                id: "a".into(),
                gt: prog.clone(),
                pred: Some(prog.clone()),
                cd_ratio: Some(1.0),
            },
            EvalPair {
                id: "b".into(),
                gt: prog,
                pred: None,
                cd_ratio: None,
            },
        ];
        let report = evaluate_pairs(&pairs, 256, 1).unwrap();
        assert_eq!(report.ir_percent, 50.0);
        assert_eq!(report.n_valid, 1);
        // The missing prediction contributes one extrusion false negative.
        assert!(report.extrusion.recall < 1.0);
        assert!(report.cd_ratio_quartiles.is_some());
        let table = report.to_table();
        assert!(table.contains("IR 50.00%"));
    }
}
