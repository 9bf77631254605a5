use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A treatment arm together with its position on the Legendre domain.
///
/// Index 0 is the control arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreatmentCode {
    pub index: usize,
    pub scaled: f64,
}

impl TreatmentCode {
    pub fn new(index: usize, m: usize) -> Result<Self> {
        Ok(TreatmentCode {
            index,
            scaled: treatment_to_scalar(index, m)?,
        })
    }
}

/// Maps arm `index` of `m` onto an evenly spaced grid over `[-1, 1]`.
pub fn treatment_to_scalar(index: usize, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Contract(format!("need at least 2 arms, got {m}")));
    }
    if index >= m {
        return Err(Error::Contract(format!(
            "treatment index {index} out of range for {m} arms"
        )));
    }
    Ok(2.0 * index as f64 / (m - 1) as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        assert_eq!(treatment_to_scalar(0, 5).unwrap(), -1.0);
        assert_eq!(treatment_to_scalar(4, 5).unwrap(), 1.0);
        assert_eq!(treatment_to_scalar(2, 5).unwrap(), 0.0);
        assert_eq!(treatment_to_scalar(1, 2).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range() {
        assert!(treatment_to_scalar(5, 5).is_err());
        assert!(treatment_to_scalar(0, 1).is_err());
    }

    #[test]
    fn code_carries_scaled_value() {
        let c = TreatmentCode::new(3, 5).unwrap();
        assert_eq!(c.scaled, 0.5);
    }
}
