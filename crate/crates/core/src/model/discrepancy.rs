//! Distribution discrepancies between representation groups.

use log::warn;

use super::spec::{DiscKind, Pairing};
use crate::exec::Exec;
use crate::heads::group_rows;
use crate::numkit::{flops, Matrix};
use crate::{Error, Result};

/// A discrepancy value with its gradient with respect to both samples.
#[derive(Debug, Clone)]
pub struct DiscValue {
    pub value: f64,
    pub grad_a: Matrix,
    pub grad_b: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmdEstimator {
    /// Off-diagonal within-sample sums.
    Unbiased,
    /// V-statistic, diagonal terms included.
    Biased,
}

/// Pooled samples above this size pick the bandwidth from a strided
/// subsample of this many points.
pub const MEDIAN_SAMPLE_CAP: usize = 2048;

/// Squared MMD with an RBF kernel, unbiased estimator, median-heuristic bandwidth.
pub fn mmd_rbf(a: &Matrix, b: &Matrix) -> Result<DiscValue> {
    mmd_rbf_with(Exec::default(), MmdEstimator::Unbiased, a, b)
}

/// Squared MMD with `k(x, y) = exp(−‖x − y‖² / 2σ²)`.
///
/// `σ` is the median pairwise distance of the pooled sample (1 if that is
/// zero). The returned gradient includes the dependence of `σ` on the
/// points that define the median.
pub fn mmd_rbf_with(exec: Exec, estimator: MmdEstimator, a: &Matrix, b: &Matrix) -> Result<DiscValue> {
    let (n, k) = (a.rows(), b.rows());
    if n < 2 || k < 2 {
        return Err(Error::Contract(format!(
            "mmd needs at least 2 rows per sample, got {n} and {k}"
        )));
    }
    if a.cols() != b.cols() {
        return Err(Error::shape("mmd_rbf", a.cols(), b.cols()));
    }
    let h = a.cols();
    let pooled = Matrix::from_vec(n + k, h, [a.data(), b.data()].concat())?;
    let total = n + k;

    let median = median_pair(exec, &pooled);
    let sigma = match median {
        Some(ref m) if m.dist > 0.0 => m.dist,
        _ => 1.0,
    };
    let inv_two_s2 = 1.0 / (2.0 * sigma * sigma);
    let (nf, kf) = (n as f64, k as f64);
    let (w_aa, w_bb) = match estimator {
        MmdEstimator::Unbiased => (1.0 / (nf * (nf - 1.0)), 1.0 / (kf * (kf - 1.0))),
        MmdEstimator::Biased => (1.0 / (nf * nf), 1.0 / (kf * kf)),
    };
    let w_ab = -1.0 / (nf * kf);
    let weight = |i: usize, j: usize| match (i < n, j < n) {
        (true, true) => w_aa,
        (false, false) => w_bb,
        _ => w_ab,
    };

    // Per pooled row: (value part, dL/dσ part, gradient row).
    let rows = exec.map_range(total, |i| {
        let zi = pooled.row(i);
        let mut val = 0.0;
        let mut dsig = 0.0;
        let mut grad = vec![0.0; h];
        for j in 0..total {
            if j == i {
                if estimator == MmdEstimator::Biased {
                    val += weight(i, i);
                }
                continue;
            }
            let zj = pooled.row(j);
            let d2: f64 = zi.iter().zip(zj).map(|(x, y)| (x - y) * (x - y)).sum();
            let kv = (-d2 * inv_two_s2).exp();
            let w = weight(i, j);
            val += w * kv;
            dsig += w * kv * d2;
            // both ordered pairs (i, j) and (j, i) depend on z_i
            let c = -2.0 * w * kv / (sigma * sigma);
            for ((g, x), y) in grad.iter_mut().zip(zi).zip(zj) {
                *g += c * (x - y);
            }
        }
        (val, dsig, grad)
    });
    flops::add((total * total * (3 * h + 8)) as u64);

    let mut value = 0.0;
    let mut dsigma = 0.0;
    let mut grad = Matrix::zeros(total, h);
    for (i, (v, ds, g)) in rows.into_iter().enumerate() {
        value += v;
        dsigma += ds;
        grad.row_mut(i).copy_from_slice(&g);
    }
    dsigma /= sigma * sigma * sigma;

    if let Some(m) = median.filter(|m| m.dist > 0.0) {
        let share = 1.0 / m.pairs.len() as f64;
        for &(p, q, d) in &m.pairs {
            if d == 0.0 {
                continue;
            }
            let coef = dsigma * share / d;
            for c in 0..h {
                let diff = pooled[(p, c)] - pooled[(q, c)];
                grad[(p, c)] += coef * diff;
                grad[(q, c)] -= coef * diff;
            }
        }
    }

    Ok(DiscValue {
        value,
        grad_a: grad.select_rows(&(0..n).collect::<Vec<_>>()),
        grad_b: grad.select_rows(&(n..total).collect::<Vec<_>>()),
    })
}

struct Median {
    dist: f64,
    /// The one or two pairs (pooled indices and their distance) averaged into `dist`.
    pairs: Vec<(usize, usize, f64)>,
}

fn median_pair(exec: Exec, pooled: &Matrix) -> Option<Median> {
    let total = pooled.rows();
    let points: Vec<usize> = if total > MEDIAN_SAMPLE_CAP {
        (0..MEDIAN_SAMPLE_CAP).map(|i| i * total / MEDIAN_SAMPLE_CAP).collect()
    } else {
        (0..total).collect()
    };
    let s = points.len();
    let mut pairs: Vec<(f64, u32, u32)> = exec
        .map_range(s, |a| {
            let za = pooled.row(points[a]);
            ((a + 1)..s)
                .map(|b| {
                    let zb = pooled.row(points[b]);
                    let d2: f64 = za.iter().zip(zb).map(|(x, y)| (x - y) * (x - y)).sum();
                    (d2, a as u32, b as u32)
                })
                .collect::<Vec<_>>()
        })
        .concat();
    if pairs.is_empty() {
        return None;
    }
    let cmp = |x: &(f64, u32, u32), y: &(f64, u32, u32)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2));
    let len = pairs.len();
    let hi = len / 2;
    let (_, &mut upper, _) = pairs.select_nth_unstable_by(hi, cmp);
    let pick = |p: (f64, u32, u32)| (points[p.1 as usize], points[p.2 as usize], p.0.sqrt());
    let chosen = if len % 2 == 1 {
        vec![pick(upper)]
    } else {
        // the largest element below `hi` is the lower middle
        let lower = *pairs[..hi].iter().max_by(|x, y| cmp(x, y)).expect("hi >= 1");
        vec![pick(lower), pick(upper)]
    };
    let dist = chosen.iter().map(|c| c.2).sum::<f64>() / chosen.len() as f64;
    Some(Median { dist, pairs: chosen })
}

/// Mean over feature columns of the exact 1-D W1 distance between equal-size samples.
pub fn wasserstein_1d(a: &Matrix, b: &Matrix) -> Result<DiscValue> {
    if a.rows() != b.rows() {
        return Err(Error::Contract(format!(
            "wasserstein_1d needs equal sample counts, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    if a.cols() != b.cols() {
        return Err(Error::shape("wasserstein_1d", a.cols(), b.cols()));
    }
    let (n, h) = (a.rows(), a.cols());
    if n == 0 || h == 0 {
        return Err(Error::Contract("wasserstein_1d on an empty sample".into()));
    }
    let scale = 1.0 / (n * h) as f64;
    let mut value = 0.0;
    let mut grad_a = Matrix::zeros(n, h);
    let mut grad_b = Matrix::zeros(n, h);
    for c in 0..h {
        let ia = argsort_column(a, c);
        let ib = argsort_column(b, c);
        for (&p, &q) in ia.iter().zip(&ib) {
            let diff = a[(p, c)] - b[(q, c)];
            value += diff.abs();
            let s = if diff > 0.0 {
                scale
            } else if diff < 0.0 {
                -scale
            } else {
                0.0
            };
            grad_a[(p, c)] = s;
            grad_b[(q, c)] = -s;
        }
    }
    flops::add((3 * n * h) as u64);
    Ok(DiscValue {
        value: value * scale,
        grad_a,
        grad_b,
    })
}

fn argsort_column(m: &Matrix, c: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m.rows()).collect();
    idx.sort_by(|&i, &j| m[(i, c)].total_cmp(&m[(j, c)]).then(i.cmp(&j)));
    idx
}

fn pair_value(kind: DiscKind, a: &Matrix, b: &Matrix) -> Result<DiscValue> {
    match kind {
        DiscKind::Mmd => mmd_rbf(a, b),
        DiscKind::Wass => wasserstein_1d(a, b),
        DiscKind::None => Ok(DiscValue {
            value: 0.0,
            grad_a: Matrix::zeros(a.rows(), a.cols()),
            grad_b: Matrix::zeros(b.rows(), b.cols()),
        }),
    }
}

/// Evenly strided subset of `rows` of size `len`.
fn stride(rows: &[usize], len: usize) -> Vec<usize> {
    (0..len).map(|i| rows[i * rows.len() / len]).collect()
}

/// Average pairwise discrepancy between the treatment groups present in `phi`.
///
/// Groups with fewer than 2 rows are skipped. For the Wasserstein distance the
/// larger group of a pair is strided down to the size of the smaller one.
/// Returns the value and its gradient with respect to every row of `phi`.
pub fn discrepancy_multi(
    phi: &Matrix,
    t: &[usize],
    arms: usize,
    kind: DiscKind,
    pairing: Pairing,
) -> Result<(f64, Matrix)> {
    if phi.rows() != t.len() {
        return Err(Error::shape("discrepancy_multi", phi.rows(), t.len()));
    }
    if let Some(&bad) = t.iter().find(|&&k| k >= arms) {
        return Err(Error::Contract(format!(
            "treatment index {bad} out of range for {arms} arms"
        )));
    }
    let mut grad = Matrix::zeros(phi.rows(), phi.cols());
    if kind == DiscKind::None {
        return Ok((0.0, grad));
    }
    let groups = group_rows(t, arms);
    let usable: Vec<usize> = (0..arms).filter(|&k| groups[k].len() >= 2).collect();
    let pairs: Vec<(usize, usize)> = match pairing {
        Pairing::AllPairs => usable
            .iter()
            .enumerate()
            .flat_map(|(i, &p)| usable[i + 1..].iter().map(move |&q| (p, q)))
            .collect(),
        Pairing::ControlVsEach => {
            if usable.first() == Some(&0) {
                usable[1..].iter().map(|&q| (0, q)).collect()
            } else {
                Vec::new()
            }
        }
    };
    if pairs.is_empty() {
        warn!(
            "discrepancy skipped: {} usable treatment groups in batch of {}",
            usable.len(),
            t.len()
        );
        return Ok((0.0, grad));
    }
    let share = 1.0 / pairs.len() as f64;
    let mut total = 0.0;
    for (p, q) in pairs {
        let (mut rp, mut rq) = (groups[p].clone(), groups[q].clone());
        if kind == DiscKind::Wass && rp.len() != rq.len() {
            let len = rp.len().min(rq.len());
            rp = stride(&rp, len);
            rq = stride(&rq, len);
        }
        let d = pair_value(kind, &phi.select_rows(&rp), &phi.select_rows(&rq))?;
        total += share * d.value;
        for (r, &i) in rp.iter().enumerate() {
            for (g, v) in grad.row_mut(i).iter_mut().zip(d.grad_a.row(r)) {
                *g += share * v;
            }
        }
        for (r, &i) in rq.iter().enumerate() {
            for (g, v) in grad.row_mut(i).iter_mut().zip(d.grad_b.row(r)) {
                *g += share * v;
            }
        }
    }
    Ok((total, grad))
}
