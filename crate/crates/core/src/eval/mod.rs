//! Qini curves and the mean Qini score over treatment arms.

mod mqini;
mod qini;

pub use mqini::{mqini, mqini_from_predictions, null_mqini, shuffle_rows, ArmQini, QiniReport};
pub use qini::{qini_curve, qini_curve_with, qini_score, QiniCurve, TieMode};
