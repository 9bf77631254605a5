use crate::numkit::Matrix;
use crate::{Error, Result};

/// Covariates, observed treatment and binary outcome per row, plus the true
/// response probability under every arm when it is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub t: Vec<usize>,
    pub y: Vec<u8>,
    /// `N × arms` matrix of `μ(x_i, k)`.
    pub truth: Option<Matrix>,
    pub arms: usize,
}

impl Dataset {
    pub fn new(x: Matrix, t: Vec<usize>, y: Vec<u8>, truth: Option<Matrix>, arms: usize) -> Result<Self> {
        let ds = Dataset { x, t, y, truth, arms };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn covariates(&self) -> usize {
        self.x.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.t.len() != n || self.y.len() != n {
            return Err(Error::shape(
                "Dataset",
                format!("{n} treatments and outcomes"),
                format!("{} and {}", self.t.len(), self.y.len()),
            ));
        }
        if self.arms < 2 {
            return Err(Error::Config(format!("need at least 2 arms, got {}", self.arms)));
        }
        if let Some(i) = self.t.iter().position(|&k| k >= self.arms) {
            return Err(Error::Parse {
                row: i + 1,
                msg: format!("treatment {} out of range for {} arms", self.t[i], self.arms),
            });
        }
        if let Some(i) = self.y.iter().position(|&v| v > 1) {
            return Err(Error::Parse {
                row: i + 1,
                msg: format!("outcome {} is not binary", self.y[i]),
            });
        }
        if let Some(truth) = &self.truth {
            if truth.shape() != (n, self.arms) {
                return Err(Error::shape(
                    "Dataset truth",
                    format!("({n}, {})", self.arms),
                    format!("{:?}", truth.shape()),
                ));
            }
            if let Some(p) = truth.data().iter().position(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::Parse {
                    row: p / self.arms + 1,
                    msg: "truth probability outside (0, 1)".into(),
                });
            }
        }
        Ok(())
    }

    /// Outcomes as `f64` for loss computations.
    pub fn y_f64(&self) -> Vec<f64> {
        self.y.iter().map(|&v| v as f64).collect()
    }

    /// Rows `idx` as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            t: idx.iter().map(|&i| self.t[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            truth: self.truth.as_ref().map(|m| m.select_rows(idx)),
            arms: self.arms,
        }
    }

    pub fn arm_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.arms];
        for &k in &self.t {
            c[k] += 1;
        }
        c
    }
}
