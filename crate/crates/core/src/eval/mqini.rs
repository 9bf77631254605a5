use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::qini::{qini_curve_with, qini_score, QiniCurve, TieMode};
use crate::datagen::Dataset;
use crate::exec::Exec;
use crate::model::UpliftModel;
use crate::numkit::{seeded_rng, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmQini {
    pub arm: usize,
    pub curve: QiniCurve,
    pub qini: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiniReport {
    pub control: usize,
    /// Non-control arms in increasing index order.
    pub arms: Vec<ArmQini>,
    /// Mean of the per-arm scores.
    pub mqini: f64,
}

#[derive(Serialize)]
struct ArmSummary {
    arm: usize,
    qini: f64,
}

#[derive(Serialize)]
struct Summary {
    arms: Vec<ArmSummary>,
    mqini: f64,
}

impl QiniReport {
    pub fn from_arms(control: usize, arms: Vec<ArmQini>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::Metric("no treatment arms to score".into()));
        }
        let mqini = arms.iter().map(|a| a.qini).sum::<f64>() / arms.len() as f64;
        Ok(QiniReport { control, arms, mqini })
    }

    /// `{"arms":[{"arm":..,"qini":..}],"mqini":..}`
    pub fn summary_json(&self) -> String {
        let s = Summary {
            arms: self
                .arms
                .iter()
                .map(|a| ArmSummary {
                    arm: a.arm,
                    qini: a.qini,
                })
                .collect(),
            mqini: self.mqini,
        };
        serde_json::to_string_pretty(&s).expect("plain numbers serialize")
    }

    pub fn arm(&self, arm: usize) -> Option<&ArmQini> {
        self.arms.iter().find(|a| a.arm == arm)
    }
}

/// Scores each non-control arm `i` on the rows assigned to `i` or `control`,
/// ranking by `preds[:, i] − preds[:, control]`.
pub fn mqini_from_predictions(
    preds: &Matrix,
    t: &[usize],
    y: &[u8],
    control: usize,
    ties: TieMode,
    exec: Exec,
) -> Result<QiniReport> {
    let (n, m) = preds.shape();
    if t.len() != n || y.len() != n {
        return Err(Error::shape(
            "mqini",
            format!("{n} treatments and outcomes"),
            format!("{} and {}", t.len(), y.len()),
        ));
    }
    if control >= m {
        return Err(Error::Metric(format!(
            "control arm {control} out of range for {m} arms"
        )));
    }
    let mut counts = vec![0usize; m];
    for &k in t {
        if k >= m {
            return Err(Error::Metric(format!("treatment {k} out of range for {m} arms")));
        }
        counts[k] += 1;
    }
    if let Some(k) = (0..m).find(|&k| counts[k] == 0) {
        return Err(Error::Metric(format!("arm {k} has no rows in the test data")));
    }
    let targets: Vec<usize> = (0..m).filter(|&k| k != control).collect();
    let arms = exec.map_slice(&targets, |&arm| -> Result<ArmQini> {
        let rows: Vec<usize> = (0..n).filter(|&i| t[i] == arm || t[i] == control).collect();
        let scores: Vec<f64> = rows.iter().map(|&i| preds[(i, arm)] - preds[(i, control)]).collect();
        let ys: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
        let treated: Vec<bool> = rows.iter().map(|&i| t[i] == arm).collect();
        let curve = qini_curve_with(&scores, &ys, &treated, ties)?;
        let qini = qini_score(&curve);
        Ok(ArmQini { arm, curve, qini })
    });
    QiniReport::from_arms(control, arms.into_iter().collect::<Result<_>>()?)
}

/// mQini of a trained model on a test split.
pub fn mqini(model: &UpliftModel, test: &Dataset, control: usize) -> Result<QiniReport> {
    let preds = model.predict_all(&test.x)?;
    mqini_from_predictions(&preds, &test.t, &test.y, control, TieMode::Stable, Exec::default())
}

/// Permutes prediction rows so scores carry no information about the rows
/// they are paired with.
pub fn shuffle_rows(preds: &Matrix, seed: u64) -> Matrix {
    let mut order: Vec<usize> = (0..preds.rows()).collect();
    order.shuffle(&mut seeded_rng(seed));
    preds.select_rows(&order)
}

/// mQini of row-shuffled predictions, one value per seed.
pub fn null_mqini(
    preds: &Matrix,
    t: &[usize],
    y: &[u8],
    control: usize,
    seeds: &[u64],
    exec: Exec,
) -> Result<Vec<f64>> {
    exec.map_slice(seeds, |&s| {
        let shuffled = shuffle_rows(preds, s);
        mqini_from_predictions(&shuffled, t, y, control, TieMode::Stable, Exec::Sequential).map(|r| r.mqini)
    })
    .into_iter()
    .collect()
}
