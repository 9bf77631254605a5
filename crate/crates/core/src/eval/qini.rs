use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numkit::seeded_rng;
use crate::{Error, Result};

/// How rows with equal scores are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieMode {
    /// Original row order.
    #[default]
    Stable,
    /// Random order drawn from the given seed.
    Shuffled(u64),
}

/// Incremental-gain curve for one treated/control comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiniCurve {
    /// `(k/N', v(k))` for `k = 0..=N'`; starts at `(0, 0)`.
    pub points: Vec<(f64, f64)>,
    pub n_treated: usize,
    pub n_control: usize,
}

impl QiniCurve {
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `v(N')`: total incremental responders at full targeting.
    pub fn final_value(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }

    /// `fraction,value` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,value\n");
        for (f, v) in &self.points {
            out.push_str(&format!("{f},{v}\n"));
        }
        out
    }
}

pub fn qini_curve(scores: &[f64], y: &[u8], is_treated: &[bool]) -> Result<QiniCurve> {
    qini_curve_with(scores, y, is_treated, TieMode::Stable)
}

/// Sorts rows by descending score and accumulates
/// `v(k) = Y_T(k) − Y_C(k)·N_T(k)/N_C(k)` over prefixes, with
/// `v(k) = Y_T(k)` until the first control row is seen.
pub fn qini_curve_with(scores: &[f64], y: &[u8], is_treated: &[bool], ties: TieMode) -> Result<QiniCurve> {
    let n = scores.len();
    if y.len() != n || is_treated.len() != n {
        return Err(Error::shape(
            "qini_curve",
            format!("{n} outcomes and flags"),
            format!("{} and {}", y.len(), is_treated.len()),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN uplift score".into()));
    }
    let n_treated = is_treated.iter().filter(|&&t| t).count();
    let n_control = n - n_treated;
    if n_treated == 0 || n_control == 0 {
        return Err(Error::Metric(format!(
            "need both treated and control rows, got {n_treated} treated and {n_control} control"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    match ties {
        TieMode::Stable => order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a])),
        TieMode::Shuffled(seed) => {
            let mut rng = seeded_rng(seed);
            let keys: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(keys[a].cmp(&keys[b])));
        }
    }

    let mut points = Vec::with_capacity(n + 1);
    points.push((0.0, 0.0));
    let (mut nt, mut nc, mut yt, mut yc) = (0.0, 0.0, 0.0, 0.0);
    for (k, &i) in order.iter().enumerate() {
        let yi = f64::from(y[i]);
        if is_treated[i] {
            nt += 1.0;
            yt += yi;
        } else {
            nc += 1.0;
            yc += yi;
        }
        let v = if nc == 0.0 { yt } else { yt - yc * nt / nc };
        points.push(((k + 1) as f64 / n as f64, v));
    }
    Ok(QiniCurve {
        points,
        n_treated,
        n_control,
    })
}

/// Area between the curve and the random-targeting diagonal,
/// `Σ_k [v(k) − (k/N')·v(N')] / (N_T·N_C)`.
///
/// Dividing by `N_T·N_C` makes the score independent of population size
/// and equal to the plain `(1/N')` sum for a two-by-two population.
pub fn qini_score(curve: &QiniCurve) -> f64 {
    let n = curve.len();
    if n == 0 {
        return 0.0;
    }
    let last = curve.final_value();
    let area: f64 = curve.points[1..]
        .iter()
        .enumerate()
        .map(|(k, &(_, v))| v - (k + 1) as f64 / n as f64 * last)
        .sum();
    area / (curve.n_treated as f64 * curve.n_control as f64)
}
