//! Command-level performance model of a GPU + HBM system with near-bank
//! processing-in-memory, with kernel generators for five primitives, an
//! analytical GPU baseline, and the scheduling/offload passes that close
//! the gap between them.

pub mod amenability;
pub mod baseline;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod opt;
pub mod sysmodel;
pub mod trace;
pub mod timing;

pub use error::{Error, Result};
pub use sysmodel::{DerivedParams, SystemConfig};
pub use timing::{simulate, TimingReport};
pub use trace::{CommandKind, CommandStream, PimCommand, Scope};
