//! Kernel-integral message passing on the frame bundle.

mod config;
mod engine;
mod mace;
mod update;

#[cfg(test)]
mod tests;

pub use config::{MessageConfig, ProductMode, MAX_ORDER, MAX_OUTPUTS};
pub use engine::{atomic_basis, higher_order_message, higher_order_message_at, pairwise_message, MessageResult};
pub use mace::{band_limit_sweep, character_power, expand_kernel, mace_reference_message, KernelExpansion};
pub use update::{readout, update, GatedUpdate, LinearUpdate, UpdateMode};
