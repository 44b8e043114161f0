//! Commit-issue dataset construction, state-information extraction, staged
//! training orchestration, generation metrics and grounding analysis.

pub mod par;
pub mod schema;
pub mod metrics;
pub mod curator;
pub mod extraction;
pub mod pipeline;
pub mod miner;
pub mod analysis;
