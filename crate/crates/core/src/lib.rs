//! Core models for rhetorical-strategy-aware rational speech act listeners.

pub mod dist;
pub mod error;
pub mod rsa;
pub mod rsa2;
pub mod rsc;
pub mod qud;
pub mod data;
pub mod eval;
pub mod learn;
pub mod llm;
pub mod parallel;
pub mod provider;

pub use dist::{Categorical, ConditionalTable, DistError, LabelSpace, SpaceKind, SpaceRef};
pub use error::{ModelError, ModelResult};
