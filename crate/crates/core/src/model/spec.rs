use serde::{Deserialize, Serialize};

use crate::heads::HeadKind;
use crate::numkit::Activation;
use crate::{Error, Result};

/// Representation network family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    /// No representation: the head sees the raw covariates.
    Slearner,
    /// Shared trunk followed by a treatment-concatenating net.
    Bnn,
    /// Shared trunk with per-treatment or coefficient heads. With a
    /// balancing term this is CFRNet, without it TARNet.
    TarnetCfrnet,
    /// Trunk whose output splits into instrumental, confounding and
    /// adjustment blocks; the head sees confounding + adjustment and the
    /// balancing term sees confounding only.
    Drcfr,
}

impl std::str::FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "slearner" => Ok(Backbone::Slearner),
            "bnn" => Ok(Backbone::Bnn),
            "tarnet" | "cfrnet" | "tarnet_cfrnet" => Ok(Backbone::TarnetCfrnet),
            "drcfr" | "dr_cfr" => Ok(Backbone::Drcfr),
            other => Err(Error::Config(format!("unknown backbone {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscKind {
    None,
    Mmd,
    Wass,
}

impl std::str::FromStr for DiscKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(DiscKind::None),
            "mmd" => Ok(DiscKind::Mmd),
            "wass" | "wasserstein" => Ok(DiscKind::Wass),
            other => Err(Error::Config(format!("unknown discrepancy {other:?}"))),
        }
    }
}

/// Which treatment-group pairs enter the balancing term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    #[default]
    AllPairs,
    ControlVsEach,
}

/// Width presets sized to a parameter budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 8 covariates, 5 arms, roughly 90k parameters.
    Synthetic,
    /// 47 covariates, 5 arms, roughly 145k parameters.
    RealScale,
}

/// Everything needed to build an [`UpliftModel`](super::UpliftModel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub backbone: Backbone,
    pub head: HeadKind,
    pub disc: DiscKind,
    #[serde(default)]
    pub pairing: Pairing,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Representation layer widths after the input; the last one is the
    /// width of φ. Empty for the S-learner.
    pub repr_hidden: Vec<usize>,
    /// Hidden widths of the head net (of every branch, for SA).
    pub head_hidden: Vec<usize>,
    /// OFA polynomial degree; `None` means `arms − 1`.
    pub degree: Option<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl ModelSpec {
    /// Spec with [`Preset::Synthetic`] widths and default loss weights.
    pub fn new(backbone: Backbone, head: HeadKind, disc: DiscKind) -> Self {
        Self::preset(backbone, head, disc, Preset::Synthetic)
    }

    pub fn preset(backbone: Backbone, head: HeadKind, disc: DiscKind, preset: Preset) -> Self {
        use Backbone::*;
        use HeadKind::*;
        let (repr, head_w): (&[usize], &[usize]) = match (preset, backbone, head) {
            (Preset::Synthetic, Slearner, _) => (&[], &[208, 208, 208]),
            (Preset::Synthetic, Bnn, _) => (&[128, 128], &[208, 208]),
            (Preset::Synthetic, TarnetCfrnet, Sa) => (&[128, 128], &[72, 72]),
            (Preset::Synthetic, TarnetCfrnet, _) => (&[128, 128], &[208, 208]),
            (Preset::Synthetic, Drcfr, Sa) => (&[128, 192], &[64, 64]),
            (Preset::Synthetic, Drcfr, _) => (&[128, 192], &[192, 192]),
            (Preset::RealScale, Slearner, _) => (&[], &[256, 256, 256]),
            (Preset::RealScale, Bnn, _) => (&[160, 160], &[256, 256]),
            (Preset::RealScale, TarnetCfrnet, Sa) => (&[160, 160], &[88, 88]),
            (Preset::RealScale, TarnetCfrnet, _) => (&[160, 160], &[256, 256]),
            (Preset::RealScale, Drcfr, Sa) => (&[160, 240], &[80, 80]),
            (Preset::RealScale, Drcfr, _) => (&[160, 240], &[240, 240]),
        };
        ModelSpec {
            backbone,
            head,
            disc,
            pairing: Pairing::AllPairs,
            lambda1: 1.0,
            lambda2: 0.1,
            repr_hidden: repr.to_vec(),
            head_hidden: head_w.to_vec(),
            degree: None,
            activation: Activation::Elu,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_lambda2(mut self, lambda2: f64) -> Self {
        self.lambda2 = lambda2;
        self
    }

    pub fn with_widths(mut self, repr_hidden: &[usize], head_hidden: &[usize]) -> Self {
        self.repr_hidden = repr_hidden.to_vec();
        self.head_hidden = head_hidden.to_vec();
        self
    }

    /// Table label, e.g. `TARNet+OFA` or `CFRNet+SA+WASS`.
    pub fn label(&self) -> String {
        let backbone = match (self.backbone, self.disc) {
            (Backbone::Slearner, _) => "Slearner",
            (Backbone::Bnn, _) => "BNN",
            (Backbone::TarnetCfrnet, DiscKind::None) => "TARNet",
            (Backbone::TarnetCfrnet, _) => "CFRNet",
            (Backbone::Drcfr, _) => "DR-CFR",
        };
        let mut s = format!("{backbone}+{}", self.head.label());
        match self.disc {
            DiscKind::None => {}
            DiscKind::Mmd => s.push_str("+MMD"),
            DiscKind::Wass => s.push_str("+WASS"),
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 > 0.0 && self.lambda1.is_finite()) {
            return Err(Error::Config(format!("lambda1 must be positive, got {}", self.lambda1)));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::Config(format!(
                "lambda2 must be non-negative, got {}",
                self.lambda2
            )));
        }
        match (self.backbone, self.head) {
            (Backbone::Slearner | Backbone::Bnn, HeadKind::Fa) => {}
            (Backbone::TarnetCfrnet | Backbone::Drcfr, HeadKind::Sa | HeadKind::Ofa) => {}
            (b, h) => {
                return Err(Error::Config(format!(
                    "backbone {b:?} cannot be combined with head {h:?}"
                )))
            }
        }
        if self.backbone == Backbone::Slearner {
            if !self.repr_hidden.is_empty() {
                return Err(Error::Config("the S-learner has no representation layers".into()));
            }
            if self.disc != DiscKind::None {
                return Err(Error::Config("the S-learner has no representation to balance".into()));
            }
        } else if self.repr_hidden.is_empty() {
            return Err(Error::Config(format!(
                "{:?} needs representation layers",
                self.backbone
            )));
        }
        if self.backbone == Backbone::Drcfr {
            let w = *self.repr_hidden.last().unwrap();
            if !w.is_multiple_of(3) {
                return Err(Error::Config(format!(
                    "DR-CFR representation width {w} is not divisible into three blocks"
                )));
            }
        }
        if self.head != HeadKind::Ofa && self.degree.is_some() {
            return Err(Error::Config("polynomial degree only applies to the OFA head".into()));
        }
        Ok(())
    }
}
