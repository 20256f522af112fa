//! Interface stubs and compositional verification.
//!
//! A component is closed with a chaotic environment and its interface
//! behaviour is summarised as an automaton over interface letters whose
//! states are the last `h` letters seen. Stubs replace components in a
//! system design; violations found on the composition are replayed on the
//! unstubbed system to tell real ones from abstraction artifacts.

mod compose;
mod format;
mod learn;
mod stub;

pub use compose::*;
pub use learn::*;
pub use stub::*;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::explorer::ExploreError;
use crate::kernel::{KernelConfig, KernelError};
use crate::scl::ElabError;

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_H: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrationError {
    #[error(transparent)]
    Elab(#[from] ElabError),
    #[error("no instance named `{0}`")]
    UnknownInstance(String),
    #[error("stub for `{instance}` is stale: {detail}")]
    Stale { instance: String, detail: String },
    #[error("stub file: {0}")]
    Format(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("more than {cap} states explored")]
    StateCap { cap: usize },
    #[error("cancelled")]
    Cancelled,
    #[error("{0}")]
    Invalid(String),
}

/// Limits for learning, consistency checking and replay.
#[derive(Clone, Debug)]
pub struct LearnConfig {
    pub kernel: KernelConfig,
    pub state_cap: usize,
    /// Polled between state expansions.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig { kernel: KernelConfig::default(), state_cap: 5_000_000, cancel: None }
    }
}

impl LearnConfig {
    pub(crate) fn poll(&self, explored: usize) -> Result<(), IntegrationError> {
        if self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(IntegrationError::Cancelled);
        }
        if explored > self.state_cap {
            return Err(IntegrationError::StateCap { cap: self.state_cap });
        }
        Ok(())
    }
}
