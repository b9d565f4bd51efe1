//! Seeded instance generators and independent classical oracles.

mod classical;
mod random;

pub use classical::{MAX_TYPE_CLASSES, classical_box_error_exact, classical_box_error_probs, classical_dmin_eps_exact};
pub use random::{InstanceStream, Seed, random_channel, random_state};
