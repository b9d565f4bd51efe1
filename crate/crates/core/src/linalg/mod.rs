//! Dense complex linear algebra: Hermitian operators, states, boxes and
//! channels in the Choi picture.

mod channel;
mod decomp;
mod operator;
mod state;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub use channel::{Channel, TP_TOL, apply};
pub(crate) use channel::raw_choi_apply;
pub(crate) use decomp::raw_partial_trace;
pub use decomp::{
    DEFAULT_DEGENERACY_TOL, DEFAULT_RANK_TOL, Eigh, Keep, MatrixFunction, eigenspace_projectors, eigh, matrix_fn,
    partial_trace, pinch, rank, support_projector, support_split,
};
pub use operator::HermitianOperator;
pub use state::{PSD_TOL, State, StateBox, TRACE_TOL};
