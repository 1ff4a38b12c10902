//! Canonical ordered BDD/ADD engine with exact rational terminals.

mod dot;
mod manager;
mod ops;
mod view;

pub use manager::{DdError, DdResult, Diagram, Manager, Value, VarId, VarKind, TERMINAL_LEVEL};
pub use view::{ParentEdge, PathRecord, SamplingView, ViewNode};
