use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{legendre_eval_into, treatment_to_scalar};
use crate::numkit::{flops, Activation, DenseNet, Matrix, NetGrads, Tape};
use crate::{Error, Result};

/// Which adaptation family a head belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Fa,
    Sa,
    Ofa,
}

impl HeadKind {
    pub fn label(self) -> &'static str {
        match self {
            HeadKind::Fa => "FA",
            HeadKind::Sa => "SA",
            HeadKind::Ofa => "OFA",
        }
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fa" => Ok(HeadKind::Fa),
            "sa" => Ok(HeadKind::Sa),
            "ofa" => Ok(HeadKind::Ofa),
            other => Err(Error::Config(format!("unknown head kind {other:?}"))),
        }
    }
}

/// A treatment head with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Head {
    Fa { net: DenseNet, arms: usize },
    Sa { branches: Vec<DenseNet> },
    Ofa { net: DenseNet, degree: usize, arms: usize },
}

/// Forward record needed by [`Head::backward`].
#[derive(Debug, Clone)]
pub enum HeadTape {
    Fa(Tape),
    /// Per branch: the rows routed through it and the branch tape.
    Sa(Vec<Option<(Vec<usize>, Tape)>>),
    Ofa {
        tape: Tape,
        basis: Matrix,
    },
}

/// Gradients of every head net, in [`Head::nets`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub nets: Vec<NetGrads>,
}

impl Head {
    /// Builds a head over an `input_dim`-wide representation. `hidden` lists
    /// the hidden widths of the head net (of each branch, for SA). `degree`
    /// is only used by OFA and defaults to `arms − 1`.
    pub fn new<R: Rng + ?Sized>(
        kind: HeadKind,
        input_dim: usize,
        arms: usize,
        hidden: &[usize],
        degree: Option<usize>,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if arms < 2 {
            return Err(Error::Config(format!("need at least 2 arms, got {arms}")));
        }
        let dims = |inp: usize, out: usize| -> Vec<usize> {
            std::iter::once(inp)
                .chain(hidden.iter().copied())
                .chain(std::iter::once(out))
                .collect()
        };
        Ok(match kind {
            HeadKind::Fa => Head::Fa {
                net: DenseNet::new(&dims(input_dim + arms, 1), activation, Activation::Identity, rng)?,
                arms,
            },
            HeadKind::Sa => Head::Sa {
                branches: (0..arms)
                    .map(|_| DenseNet::new(&dims(input_dim, 1), activation, Activation::Identity, rng))
                    .collect::<Result<_>>()?,
            },
            HeadKind::Ofa => {
                let degree = degree.unwrap_or(arms - 1);
                Head::Ofa {
                    net: DenseNet::new(&dims(input_dim, degree + 1), activation, Activation::Identity, rng)?,
                    degree,
                    arms,
                }
            }
        })
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Fa { .. } => HeadKind::Fa,
            Head::Sa { .. } => HeadKind::Sa,
            Head::Ofa { .. } => HeadKind::Ofa,
        }
    }

    pub fn arms(&self) -> usize {
        match self {
            Head::Fa { arms, .. } | Head::Ofa { arms, .. } => *arms,
            Head::Sa { branches } => branches.len(),
        }
    }

    /// Width of the representation this head consumes.
    pub fn input_dim(&self) -> usize {
        match self {
            Head::Fa { net, arms } => net.in_dim() - arms,
            Head::Sa { branches } => branches[0].in_dim(),
            Head::Ofa { net, .. } => net.in_dim(),
        }
    }

    pub fn nets(&self) -> Vec<&DenseNet> {
        match self {
            Head::Fa { net, .. } | Head::Ofa { net, .. } => vec![net],
            Head::Sa { branches } => branches.iter().collect(),
        }
    }

    pub fn nets_mut(&mut self) -> Vec<&mut DenseNet> {
        match self {
            Head::Fa { net, .. } | Head::Ofa { net, .. } => vec![net],
            Head::Sa { branches } => branches.iter_mut().collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.nets().iter().map(|n| n.param_count()).sum()
    }

    pub fn zero_grads(&self) -> HeadGrads {
        HeadGrads {
            nets: self.nets().iter().map(|n| n.zero_grads()).collect(),
        }
    }

    fn check(&self, phi: &Matrix, t: &[usize]) -> Result<()> {
        if phi.cols() != self.input_dim() {
            return Err(Error::shape("Head::forward (φ width)", self.input_dim(), phi.cols()));
        }
        if phi.rows() != t.len() {
            return Err(Error::shape("Head::forward (treatments per row)", phi.rows(), t.len()));
        }
        let m = self.arms();
        if let Some(&bad) = t.iter().find(|&&k| k >= m) {
            return Err(Error::Contract(format!(
                "treatment index {bad} out of range for {m} arms"
            )));
        }
        Ok(())
    }

    /// One logit per row of `phi`, row `i` evaluated under treatment `t[i]`.
    pub fn forward(&self, phi: &Matrix, t: &[usize]) -> Result<(Vec<f64>, HeadTape)> {
        self.check(phi, t)?;
        match self {
            Head::Fa { net, arms } => {
                let input = phi.hcat(&one_hot(t, *arms))?;
                let (out, tape) = net.forward(&input)?;
                Ok((out.into_vec(), HeadTape::Fa(tape)))
            }
            Head::Sa { branches } => {
                let mut logits = vec![0.0; t.len()];
                let mut tapes = Vec::with_capacity(branches.len());
                for (k, groups) in group_rows(t, branches.len()).into_iter().enumerate() {
                    if groups.is_empty() {
                        tapes.push(None);
                        continue;
                    }
                    let (out, tape) = branches[k].forward(&phi.select_rows(&groups))?;
                    for (&i, &v) in groups.iter().zip(out.data()) {
                        logits[i] = v;
                    }
                    tapes.push(Some((groups, tape)));
                }
                Ok((logits, HeadTape::Sa(tapes)))
            }
            Head::Ofa { net, degree, arms } => {
                let (coefs, tape) = net.forward(phi)?;
                let basis = legendre_basis(t, *degree, *arms)?;
                let logits = row_dots(&coefs, &basis);
                Ok((logits, HeadTape::Ofa { tape, basis }))
            }
        }
    }

    /// Parameter gradients and `∂L/∂φ` given `∂L/∂logit` per row.
    pub fn backward(&self, tape: &HeadTape, dlogits: &[f64]) -> Result<(HeadGrads, Matrix)> {
        match (self, tape) {
            (Head::Fa { net, arms }, HeadTape::Fa(tape)) => {
                let g = column(dlogits);
                let (grads, dx) = net.backward(tape, &g)?;
                let h = net.in_dim() - arms;
                Ok((HeadGrads { nets: vec![grads] }, dx.select_cols(0, h)))
            }
            (Head::Sa { branches }, HeadTape::Sa(tapes)) => {
                let n = dlogits.len();
                let mut dphi = Matrix::zeros(n, branches[0].in_dim());
                let mut nets = Vec::with_capacity(branches.len());
                for (branch, entry) in branches.iter().zip(tapes) {
                    match entry {
                        None => nets.push(branch.zero_grads()),
                        Some((rows, tape)) => {
                            if rows.iter().any(|&i| i >= n) {
                                return Err(Error::Contract("head tape does not match gradient length".into()));
                            }
                            let g = column(&rows.iter().map(|&i| dlogits[i]).collect::<Vec<_>>());
                            let (grads, dx) = branch.backward(tape, &g)?;
                            for (r, &i) in rows.iter().enumerate() {
                                dphi.row_mut(i).copy_from_slice(dx.row(r));
                            }
                            nets.push(grads);
                        }
                    }
                }
                Ok((HeadGrads { nets }, dphi))
            }
            (Head::Ofa { net, .. }, HeadTape::Ofa { tape, basis }) => {
                if basis.rows() != dlogits.len() {
                    return Err(Error::Contract("head tape does not match gradient length".into()));
                }
                let mut dcoef = basis.clone();
                for (i, &g) in dlogits.iter().enumerate() {
                    dcoef.row_mut(i).iter_mut().for_each(|v| *v *= g);
                }
                let (grads, dphi) = net.backward(tape, &dcoef)?;
                Ok((HeadGrads { nets: vec![grads] }, dphi))
            }
            _ => Err(Error::Contract("head tape belongs to a different head kind".into())),
        }
    }

    /// Logits of every row under every arm: an `N × m` matrix.
    pub fn predict_logits_all(&self, phi: &Matrix) -> Result<Matrix> {
        if phi.cols() != self.input_dim() {
            return Err(Error::shape("Head::predict_logits_all", self.input_dim(), phi.cols()));
        }
        let n = phi.rows();
        let m = self.arms();
        let mut out = Matrix::zeros(n, m);
        match self {
            Head::Fa { net, arms } => {
                for k in 0..m {
                    let input = phi.hcat(&one_hot(&vec![k; n], *arms))?;
                    let col = net.predict(&input)?;
                    for i in 0..n {
                        out[(i, k)] = col[(i, 0)];
                    }
                }
            }
            Head::Sa { branches } => {
                for (k, branch) in branches.iter().enumerate() {
                    let col = branch.predict(phi)?;
                    for i in 0..n {
                        out[(i, k)] = col[(i, 0)];
                    }
                }
            }
            Head::Ofa { net, degree, arms } => {
                let coefs = net.predict(phi)?;
                let mut basis = vec![0.0; degree + 1];
                for k in 0..m {
                    legendre_eval_into(treatment_to_scalar(k, *arms)?, &mut basis);
                    for i in 0..n {
                        out[(i, k)] = dot(coefs.row(i), &basis);
                    }
                }
                flops::add(2 * (n * m * (degree + 1)) as u64);
            }
        }
        Ok(out)
    }
}

fn one_hot(t: &[usize], m: usize) -> Matrix {
    let mut out = Matrix::zeros(t.len(), m);
    for (i, &k) in t.iter().enumerate() {
        out[(i, k)] = 1.0;
    }
    out
}

fn column(v: &[f64]) -> Matrix {
    Matrix::from_vec(v.len(), 1, v.to_vec()).expect("column length")
}

pub(crate) fn group_rows(t: &[usize], m: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); m];
    for (i, &k) in t.iter().enumerate() {
        groups[k].push(i);
    }
    groups
}

fn legendre_basis(t: &[usize], degree: usize, arms: usize) -> Result<Matrix> {
    let mut basis = Matrix::zeros(t.len(), degree + 1);
    for (i, &k) in t.iter().enumerate() {
        legendre_eval_into(treatment_to_scalar(k, arms)?, basis.row_mut(i));
    }
    Ok(basis)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn row_dots(a: &Matrix, b: &Matrix) -> Vec<f64> {
    flops::add(2 * a.data().len() as u64);
    (0..a.rows()).map(|i| dot(a.row(i), b.row(i))).collect()
}
