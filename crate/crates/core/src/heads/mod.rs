//! Treatment adaptation heads.
//!
//! All heads map a hidden representation `φ` (N×h) plus one treatment index
//! per row to one logit per row:
//!
//! - [`HeadKind::Fa`]: a single net over `concat(φ, onehot(t))`.
//! - [`HeadKind::Sa`]: one branch net per treatment arm, row `i` is routed
//!   through branch `t_i` only.
//! - [`HeadKind::Ofa`]: a coefficient net emits `p + 1` values `a_j(φ)` and
//!   the logit is `Σ_j a_j(φ) · P_j(u)` with `P_j` the Legendre polynomials
//!   and `u ∈ [-1, 1]` the scaled treatment.

mod head;
mod legendre;
mod treatment;

pub(crate) use head::group_rows;
pub use head::{Head, HeadGrads, HeadKind, HeadTape};
pub use legendre::{legendre_eval, legendre_eval_into};
pub use treatment::{treatment_to_scalar, TreatmentCode};
