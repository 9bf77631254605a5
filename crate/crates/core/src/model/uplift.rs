use serde::{Deserialize, Serialize};

use super::discrepancy::discrepancy_multi;
use super::loss::{bce_loss, sigmoid};
use super::spec::{Backbone, DiscKind, ModelSpec};
use crate::heads::{Head, HeadGrads};
use crate::numkit::{seeded_rng, Activation, DenseNet, Matrix, NetGrads};
use crate::{Error, Result};

/// A mini-batch: covariates, observed treatment and binary outcome per row.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: &'a Matrix,
    pub t: &'a [usize],
    pub y: &'a [f64],
}

/// Loss components; `total = λ1·bce + λ2·disc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub bce: f64,
    pub disc: f64,
    pub total: f64,
}

/// Gradients for every model parameter, in [`UpliftModel::param_slices`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub repr: Option<NetGrads>,
    pub head: HeadGrads,
}

impl ModelGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.repr.iter().flat_map(|g| g.slices()).collect();
        out.extend(self.head.nets.iter().flat_map(|g| g.slices()));
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

/// Backbone + treatment head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftModel {
    spec: ModelSpec,
    d: usize,
    m: usize,
    repr: Option<DenseNet>,
    head: Head,
}

impl UpliftModel {
    /// Builds a model for `d` covariates and `m` arms; deterministic in `spec.seed`.
    pub fn build(spec: &ModelSpec, d: usize, m: usize) -> Result<Self> {
        spec.validate()?;
        if d == 0 {
            return Err(Error::Config("need at least one covariate".into()));
        }
        if m < 2 {
            return Err(Error::Config(format!("need at least 2 arms, got {m}")));
        }
        let mut rng = seeded_rng(spec.seed);
        let (repr, head_in) = if spec.backbone == Backbone::Slearner {
            (None, d)
        } else {
            let dims: Vec<usize> = std::iter::once(d).chain(spec.repr_hidden.iter().copied()).collect();
            let net = DenseNet::new(&dims, spec.activation, spec.activation, &mut rng)?;
            let w = net.out_dim();
            let head_in = if spec.backbone == Backbone::Drcfr { 2 * w / 3 } else { w };
            (Some(net), head_in)
        };
        let head = Head::new(
            spec.head,
            head_in,
            m,
            &spec.head_hidden,
            spec.degree,
            spec.activation,
            &mut rng,
        )?;
        Ok(UpliftModel {
            spec: spec.clone(),
            d,
            m,
            repr,
            head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn covariates(&self) -> usize {
        self.d
    }

    pub fn arms(&self) -> usize {
        self.m
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn representation(&self) -> Option<&DenseNet> {
        self.repr.as_ref()
    }

    pub fn param_count(&self) -> usize {
        self.repr.as_ref().map_or(0, |r| r.param_count()) + self.head.param_count()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.repr.iter().flat_map(|r| r.param_slices()).collect();
        out.extend(self.head.nets().into_iter().flat_map(|n| n.param_slices()));
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.repr.iter_mut().flat_map(|r| r.param_slices_mut()).collect();
        out.extend(self.head.nets_mut().into_iter().flat_map(|n| n.param_slices_mut()));
        out
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_flat_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::shape("set_flat_params", self.param_count(), theta.len()));
        }
        let mut off = 0;
        for s in self.param_slices_mut() {
            let n = s.len();
            s.copy_from_slice(&theta[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Width of one DR-CFR block.
    fn block(&self) -> usize {
        self.repr.as_ref().map_or(0, |r| r.out_dim() / 3)
    }

    fn head_input(&self, phi: &Matrix) -> Matrix {
        match self.spec.backbone {
            Backbone::Drcfr => phi.select_cols(self.block(), phi.cols()),
            _ => phi.clone(),
        }
    }

    /// Column range of φ that the balancing term sees.
    fn balanced_cols(&self, width: usize) -> (usize, usize) {
        match self.spec.backbone {
            Backbone::Drcfr => (self.block(), 2 * self.block()),
            _ => (0, width),
        }
    }

    fn check_x(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.d {
            return Err(Error::shape("UpliftModel (covariates)", self.d, x.cols()));
        }
        Ok(())
    }

    /// Loss components and gradients for one batch.
    pub fn total_loss(&self, batch: Batch<'_>) -> Result<(LossParts, ModelGrads)> {
        self.check_x(batch.x)?;
        let n = batch.x.rows();
        if n == 0 {
            return Err(Error::Contract("empty batch".into()));
        }
        if batch.t.len() != n || batch.y.len() != n {
            return Err(Error::shape(
                "UpliftModel::total_loss",
                format!("{n} treatments and outcomes"),
                format!("{} and {}", batch.t.len(), batch.y.len()),
            ));
        }
        let (lambda1, lambda2) = (self.spec.lambda1, self.spec.lambda2);

        let (phi, repr_tape) = match &self.repr {
            Some(net) => {
                let (phi, tape) = net.forward(batch.x)?;
                (phi, Some(tape))
            }
            None => (batch.x.clone(), None),
        };
        let head_in = self.head_input(&phi);
        let (logits, head_tape) = self.head.forward(&head_in, batch.t)?;
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let (bce, mut dlogits) = bce_loss(&probs, batch.y)?;
        dlogits.iter_mut().for_each(|g| *g *= lambda1);
        let (head_grads, dhead_in) = self.head.backward(&head_tape, &dlogits)?;

        let (c0, c1) = self.balanced_cols(phi.cols());
        let (disc, ddisc) = if self.spec.disc == DiscKind::None || self.repr.is_none() {
            (0.0, None)
        } else {
            let block = phi.select_cols(c0, c1);
            let (v, g) = discrepancy_multi(&block, batch.t, self.m, self.spec.disc, self.spec.pairing)?;
            (v, Some(g))
        };

        let repr_grads = match (&self.repr, &repr_tape) {
            (Some(net), Some(tape)) => {
                let mut dphi = Matrix::zeros(phi.rows(), phi.cols());
                let off = phi.cols() - head_in.cols();
                for i in 0..n {
                    dphi.row_mut(i)[off..].copy_from_slice(dhead_in.row(i));
                }
                if let Some(g) = ddisc.filter(|_| lambda2 != 0.0) {
                    for i in 0..n {
                        for (d, v) in dphi.row_mut(i)[c0..c1].iter_mut().zip(g.row(i)) {
                            *d += lambda2 * v;
                        }
                    }
                }
                Some(net.backward(tape, &dphi)?.0)
            }
            _ => None,
        };

        let parts = LossParts {
            bce,
            disc,
            total: lambda1 * bce + lambda2 * disc,
        };
        Ok((
            parts,
            ModelGrads {
                repr: repr_grads,
                head: head_grads,
            },
        ))
    }

    /// Loss components only, skipping the backward pass.
    pub fn evaluate_loss(&self, batch: Batch<'_>) -> Result<LossParts> {
        self.check_x(batch.x)?;
        let phi = match &self.repr {
            Some(net) => net.predict(batch.x)?,
            None => batch.x.clone(),
        };
        let (logits, _) = self.head.forward(&self.head_input(&phi), batch.t)?;
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let (bce, _) = bce_loss(&probs, batch.y)?;
        let disc = if self.spec.disc == DiscKind::None || self.repr.is_none() {
            0.0
        } else {
            let (c0, c1) = self.balanced_cols(phi.cols());
            discrepancy_multi(
                &phi.select_cols(c0, c1),
                batch.t,
                self.m,
                self.spec.disc,
                self.spec.pairing,
            )?
            .0
        };
        Ok(LossParts {
            bce,
            disc,
            total: self.spec.lambda1 * bce + self.spec.lambda2 * disc,
        })
    }

    /// Response probability of every row under every arm (`N × m`). Rows are
    /// independent Bernoulli probabilities, not a distribution over arms.
    pub fn predict_all(&self, x: &Matrix) -> Result<Matrix> {
        self.check_x(x)?;
        let phi = match &self.repr {
            Some(net) => net.predict(x)?,
            None => x.clone(),
        };
        let mut out = self.head.predict_logits_all(&self.head_input(&phi))?;
        out.data_mut().iter_mut().for_each(|z| *z = sigmoid(*z));
        Ok(out)
    }

    pub fn activation(&self) -> Activation {
        self.spec.activation
    }
}
