//! Feed-forward networks with a recorded tape for exact backpropagation.
//!
//! A layer computes `a = act(x·W + b)` with `W` stored as `in × out`.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{flops, init, Matrix};
use crate::{Error, Result};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn next_net_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Elu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative at pre-activation `z`, given the activation value `a = apply(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One affine layer followed by an element-wise activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }
}

/// Per-layer forward record. Only valid for the net (and parameter version)
/// that produced it.
#[derive(Debug, Clone)]
pub struct Tape {
    net_id: u64,
    version: u64,
    /// `acts[0]` is the batch, `acts[k + 1]` is the output of layer `k`.
    acts: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("tape always holds the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.acts[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every parameter of a [`DenseNet`], in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<LayerGrad>,
}

impl NetGrads {
    /// Flat views in the same order as [`DenseNet::param_slices`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn add_assign(&mut self, other: &NetGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|&v| v == 0.0))
    }
}

/// A stack of [`Dense`] layers.
///
/// Clones get a fresh identity, so tapes never transfer between copies.
#[derive(Debug, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Dense>,
    #[serde(skip, default = "next_net_id")]
    id: u64,
    #[serde(skip)]
    version: u64,
}

impl Clone for DenseNet {
    fn clone(&self) -> Self {
        DenseNet {
            layers: self.layers.clone(),
            id: next_net_id(),
            version: 0,
        }
    }
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl DenseNet {
    /// Builds a net with layer widths `dims` (input first). Hidden layers use
    /// `hidden`, the last layer uses `output`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(format!(
                "a net needs at least input and output widths, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Config(format!("zero layer width in {dims:?}")));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|k| Dense {
                weight: init::init_params_with(dims[k], dims[k + 1], rng),
                bias: init::init_bias(dims[k + 1]),
                activation: if k + 1 == n { output } else { hidden },
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a net needs at least one layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::shape("DenseNet layer bias", l.out_dim(), l.bias.len()));
            }
            if let Some(next) = layers.get(k + 1) {
                if next.in_dim() != l.out_dim() {
                    return Err(Error::shape(
                        "DenseNet layer chain",
                        format!("layer {} input {}", k + 1, l.out_dim()),
                        next.in_dim(),
                    ));
                }
            }
        }
        Ok(DenseNet {
            layers,
            id: next_net_id(),
            version: 0,
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable layer access; invalidates outstanding tapes.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version += 1;
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    /// Mutable flat views of all parameters; invalidates outstanding tapes.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn zero_grads(&self) -> NetGrads {
        NetGrads {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.in_dim() {
            return Err(Error::shape("DenseNet::forward", self.in_dim(), batch.cols()));
        }
        Ok(())
    }

    fn layer_forward(layer: &Dense, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let mut z = x.matmul(&layer.weight)?;
        z.add_row_vector(&layer.bias)?;
        let act = layer.activation;
        let mut a = z.clone();
        a.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        flops::add(a.data().len() as u64);
        Ok((z, a))
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, Tape)> {
        self.check_input(batch)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(batch.clone());
        for layer in &self.layers {
            let (z, a) = Self::layer_forward(layer, acts.last().unwrap())?;
            pre.push(z);
            acts.push(a);
        }
        let tape = Tape {
            net_id: self.id,
            version: self.version,
            acts,
            pre,
        };
        Ok((tape.output().clone(), tape))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = Self::layer_forward(layer, &x)?.1;
        }
        Ok(x)
    }

    /// Returns parameter gradients and the gradient with respect to the input batch.
    pub fn backward(&self, tape: &Tape, output_grad: &Matrix) -> Result<(NetGrads, Matrix)> {
        if tape.net_id != self.id || tape.version != self.version {
            return Err(Error::Contract(
                "tape was recorded by a different net or before a parameter update".into(),
            ));
        }
        if output_grad.shape() != tape.output().shape() {
            return Err(Error::shape(
                "DenseNet::backward",
                format!("{:?}", tape.output().shape()),
                format!("{:?}", output_grad.shape()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = output_grad.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let z = &tape.pre[k];
            let a = &tape.acts[k + 1];
            if layer.activation != Activation::Identity {
                for ((gv, &zv), &av) in g.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                    *gv *= layer.activation.derivative(zv, av);
                }
                flops::add(2 * g.data().len() as u64);
            }
            let weight = tape.acts[k].t_matmul(&g)?;
            let bias = g.col_sums();
            let g_in = g.matmul_t(&layer.weight)?;
            grads.push(LayerGrad { weight, bias });
            g = g_in;
        }
        grads.reverse();
        Ok((NetGrads { layers: grads }, g))
    }
}
