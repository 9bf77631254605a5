use crate::numkit::flops;

/// `[P_0(t), …, P_p(t)]` via the three-term recurrence
/// `(k+1) P_{k+1} = (2k+1) t P_k − k P_{k−1}`.
pub fn legendre_eval(p: usize, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; p + 1];
    legendre_eval_into(t, &mut out);
    out
}

/// Fills `out` with `P_0(t) … P_{out.len()−1}(t)`.
pub fn legendre_eval_into(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * t * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
    flops::add(5 * out.len().saturating_sub(2) as u64);
}
