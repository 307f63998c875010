//! Symbolic message-passing processes: composition, realization, weak
//! bisimulation, compositional certificates and state-graph simplification.

pub mod algebra;
pub mod bisim;
pub mod modelfmt;
pub mod certificate;
pub mod error;
pub mod examples;
pub mod operators;
pub mod process;
pub mod semantics;
pub mod simplify;
pub mod symbolic;

pub use error::{Error, Result};
pub use operators::{AtomicOp, Kind, Operator};
pub use process::{Process, Transition};
pub use semantics::{realize, Action, RealizationLts, RealizeOptions};
pub use symbolic::{Domain, Formula, Name, Term, Valuation, Value};
