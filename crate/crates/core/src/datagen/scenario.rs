//! Synthetic data-generating processes.
//!
//! Every scenario draws its weight vectors once per seed from `N(0, 1/d)`
//! and maps arm `k` to `u = 2k/(m−1) − 1`.
//!
//! Monotone response (rct, rct_noise, obs, mix):
//! `μ = σ(w₀·x + (0.4 + 0.6 σ(w₁·x))(u + 1) − 0.8)`
//!
//! Non-monotone response (rct_nm):
//! `μ = σ(w₀·x + (w₁·x) sin(πu) + 0.8 σ(w₂·x) u² − 0.5)`
//!
//! With an instrument, the last covariate is dropped from the outcome
//! weights and drives assignment; without one it only enters the outcome.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::heads::treatment_to_scalar;
use crate::model::sigmoid;
use crate::numkit::{seeded_rng, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Rct,
    RctNoise,
    RctNm,
    Obs,
    Mix,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rct" => Ok(ScenarioKind::Rct),
            "rct_noise" => Ok(ScenarioKind::RctNoise),
            "rct_nm" => Ok(ScenarioKind::RctNm),
            "obs" => Ok(ScenarioKind::Obs),
            "mix" => Ok(ScenarioKind::Mix),
            other => Err(Error::Config(format!("unknown scenario kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeForm {
    Monotone,
    NonMonotone,
}

/// How a row's treatment is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Uniform over arms, perturbed per row by a Dirichlet draw.
    Randomized,
    /// Softmax over arms driven by the covariates.
    Observational,
    /// Exactly uniform.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub with_iv: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub m: usize,
    /// Probability of flipping a training outcome (rct_noise only).
    pub noise_rate: f64,
    pub seed: u64,
    /// Strength of covariate-driven assignment.
    pub gamma: f64,
    /// Dirichlet parameter per arm for randomized assignment.
    pub dirichlet_concentration: f64,
    /// Per-arm assignment coefficients; `None` means evenly spaced on `[-1, 1]`.
    #[serde(default)]
    pub arm_coefs: Option<Vec<f64>>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, with_iv: bool, seed: u64) -> Self {
        ScenarioSpec {
            kind,
            with_iv,
            n_train: 10_000,
            n_test: 10_000,
            d: 8,
            m: 5,
            noise_rate: 0.1,
            seed,
            gamma: 1.5,
            dirichlet_concentration: 100.0,
            arm_coefs: None,
        }
    }

    pub fn with_sizes(mut self, n_train: usize, n_test: usize) -> Self {
        self.n_train = n_train;
        self.n_test = n_test;
        self
    }

    /// Human-readable column label, e.g. `OBS w/ IV`.
    pub fn label(&self) -> String {
        let base = match self.kind {
            ScenarioKind::Rct => "RCT",
            ScenarioKind::RctNoise => "RCT-Noise",
            ScenarioKind::RctNm => "RCT-NM",
            ScenarioKind::Obs => "OBS",
            ScenarioKind::Mix => "MIX",
        };
        match (self.kind, self.with_iv) {
            (ScenarioKind::Obs | ScenarioKind::Mix, true) => format!("{base} w/ IV"),
            (ScenarioKind::Obs | ScenarioKind::Mix, false) => format!("{base} w/o IV"),
            (_, true) => format!("{base} w/ IV"),
            (_, false) => base.to_string(),
        }
    }

    /// File-name friendly label, e.g. `obs_iv`.
    pub fn slug(&self) -> String {
        let base = match self.kind {
            ScenarioKind::Rct => "rct",
            ScenarioKind::RctNoise => "rct_noise",
            ScenarioKind::RctNm => "rct_nm",
            ScenarioKind::Obs => "obs",
            ScenarioKind::Mix => "mix",
        };
        match (self.kind, self.with_iv) {
            (ScenarioKind::Obs | ScenarioKind::Mix, true) => format!("{base}_iv"),
            (ScenarioKind::Obs | ScenarioKind::Mix, false) => format!("{base}_noiv"),
            (_, true) => format!("{base}_iv"),
            (_, false) => base.to_string(),
        }
    }

    pub fn outcome_form(&self) -> OutcomeForm {
        match self.kind {
            ScenarioKind::RctNm => OutcomeForm::NonMonotone,
            _ => OutcomeForm::Monotone,
        }
    }

    fn arm_coefs(&self) -> Result<Vec<f64>> {
        match &self.arm_coefs {
            Some(c) if c.len() == self.m => Ok(c.clone()),
            Some(c) => Err(Error::Config(format!(
                "{} arm coefficients for {} arms",
                c.len(),
                self.m
            ))),
            None => (0..self.m).map(|k| treatment_to_scalar(k, self.m)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config("need at least 2 covariates".into()));
        }
        if self.m < 2 {
            return Err(Error::Config("need at least 2 arms".into()));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::Config(format!("noise rate {} not in [0, 1)", self.noise_rate)));
        }
        if self.dirichlet_concentration.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Config("Dirichlet concentration must be positive".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::Config("gamma must be finite".into()));
        }
        self.arm_coefs()?;
        Ok(())
    }
}

/// Training-row assignment mechanisms for a scenario: mix puts `⌈n/2⌉`
/// randomized rows first, then `⌊n/2⌋` observational rows.
pub fn assignment_plan(kind: ScenarioKind, n: usize) -> Vec<Assignment> {
    match kind {
        ScenarioKind::Rct | ScenarioKind::RctNoise | ScenarioKind::RctNm => vec![Assignment::Randomized; n],
        ScenarioKind::Obs => vec![Assignment::Observational; n],
        ScenarioKind::Mix => {
            let rct = n.div_ceil(2);
            let mut plan = vec![Assignment::Randomized; rct];
            plan.resize(n, Assignment::Observational);
            plan
        }
    }
}

/// A scenario with its weight vectors drawn.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    w0: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    wp: Vec<f64>,
    coefs: Vec<f64>,
}

const WEIGHT_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Scenario {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.d;
        let mut rng = stream_rng(spec.seed, WEIGHT_STREAM);
        let scale = 1.0 / (d as f64).sqrt();
        let mut draw = || -> Vec<f64> { (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect() };
        let (mut w0, mut w1, mut w2, mut wp) = (draw(), draw(), draw(), draw());
        let iv = d - 1;
        if spec.with_iv {
            w0[iv] = 0.0;
            w1[iv] = 0.0;
            w2[iv] = 0.0;
        } else {
            wp[iv] = 0.0;
        }
        Ok(Scenario {
            spec: spec.clone(),
            w0,
            w1,
            w2,
            wp,
            coefs: spec.arm_coefs()?,
        })
    }

    /// True probability of `y = 1` for covariates `x` under arm `k`.
    pub fn response_prob(&self, x: &[f64], k: usize) -> f64 {
        let u = 2.0 * k as f64 / (self.spec.m - 1) as f64 - 1.0;
        let base = dot(&self.w0, x);
        let z = match self.spec.outcome_form() {
            OutcomeForm::Monotone => base + (0.4 + 0.6 * sigmoid(dot(&self.w1, x))) * (u + 1.0) - 0.8,
            OutcomeForm::NonMonotone => {
                base + dot(&self.w1, x) * (std::f64::consts::PI * u).sin() + 0.8 * sigmoid(dot(&self.w2, x)) * u * u
                    - 0.5
            }
        };
        sigmoid(z)
    }

    /// Assignment score `s(x) = w_p · x`.
    pub fn selection_score(&self, x: &[f64]) -> f64 {
        dot(&self.wp, x)
    }

    /// Assignment probabilities over the arms for one row.
    pub fn propensity<R: Rng + ?Sized>(&self, x: &[f64], how: Assignment, rng: &mut R) -> Vec<f64> {
        let m = self.spec.m;
        match how {
            Assignment::Uniform => vec![1.0 / m as f64; m],
            Assignment::Randomized => {
                let gamma = Gamma::new(self.spec.dirichlet_concentration, 1.0).expect("validated concentration");
                let draws: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
                let total: f64 = draws.iter().sum();
                draws.into_iter().map(|g| g / total).collect()
            }
            Assignment::Observational => {
                let s = self.selection_score(x);
                let logits: Vec<f64> = self.coefs.iter().map(|c| self.spec.gamma * s * c).collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = e.iter().sum();
                e.into_iter().map(|v| v / total).collect()
            }
        }
    }

    /// Draws `plan.len()` rows. The truth matrix is attached when `with_truth`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        plan: &[Assignment],
        flip_rate: f64,
        with_truth: bool,
        rng: &mut R,
    ) -> Result<Dataset> {
        let (n, d, m) = (plan.len(), self.spec.d, self.spec.m);
        let mut x = Matrix::zeros(n, d);
        let mut t = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut truth = with_truth.then(|| Matrix::zeros(n, m));
        for (i, &how) in plan.iter().enumerate() {
            for v in x.row_mut(i) {
                *v = rng.sample(StandardNormal);
            }
            let xi = x.row(i);
            let probs = self.propensity(xi, how, rng);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut arm = m - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    arm = k;
                    break;
                }
            }
            let mu = self.response_prob(xi, arm);
            let mut outcome = u8::from(rng.gen::<f64>() < mu);
            // always drawn so noisy and clean splits share every other draw
            let flip: f64 = rng.gen();
            if flip < flip_rate {
                outcome = 1 - outcome;
            }
            if let Some(tr) = truth.as_mut() {
                for k in 0..m {
                    tr[(i, k)] = self.response_prob(xi, k);
                }
            }
            t.push(arm);
            y.push(outcome);
        }
        Dataset::new(x, t, y, truth, m)
    }

    pub fn train_split(&self) -> Result<Dataset> {
        let spec = &self.spec;
        let flip = if spec.kind == ScenarioKind::RctNoise {
            spec.noise_rate
        } else {
            0.0
        };
        let plan = assignment_plan(spec.kind, spec.n_train);
        self.sample(&plan, flip, false, &mut stream_rng(spec.seed, TRAIN_STREAM))
    }

    /// Noise-free, uniformly randomized split with the truth matrix.
    pub fn test_split(&self) -> Result<Dataset> {
        let plan = vec![Assignment::Uniform; self.spec.n_test];
        self.sample(&plan, 0.0, true, &mut stream_rng(self.spec.seed, TEST_STREAM))
    }
}

/// Train and test splits for a scenario; deterministic in the spec.
pub fn generate(spec: &ScenarioSpec) -> Result<(Dataset, Dataset)> {
    let sc = Scenario::new(spec)?;
    Ok((sc.train_split()?, sc.test_split()?))
}
