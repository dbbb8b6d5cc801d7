//! Sentence order reconstruction from pairwise precedence constraints.
//!
//! A document's sentences are shuffled, an oracle (gold truth, seeded noise or
//! an external classifier's prediction file) answers "does `i` precede `j`?"
//! for pairs of shuffled sentences, and a sorter turns those answers into a
//! predicted order. The [`metrics`] module scores predicted orders and the
//! [`harness`] module wires the stages together as file-in/file-out commands.

pub mod error;
pub mod harness;
pub mod human;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod ordering;

pub use error::{Error, Result};
pub use model::{Document, Permutation, ShuffledDocument};
pub use oracle::{MissingPolicy, OracleKind, PairOracle};
pub use ordering::{ConstraintGraph, OrderingResult};
