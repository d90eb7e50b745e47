//! Stale-profile matching and inference for basic-block execution profiles.
//!
//! The pipeline takes an execution profile collected on an older revision of a
//! binary and a control-flow graph of the current revision, pairs functions and
//! basic blocks across the two via a hierarchy of content hashes, and then
//! completes the partial counts into an exact, flow-conservative profile with a
//! minimum-cost flow solver. Quality of the result is measured against fresh
//! ground truth with edge-overlap and tsp-score metrics, and a simulator
//! generates synthetic binaries, profiles, and code drift for evaluation.

pub mod cfg;
pub mod hashing;
pub mod inference;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod profile;
pub mod rng;
pub mod sim;

pub use cfg::{BasicBlock, BinaryCfg, FunctionCfg, InstrKind, Instruction};
pub use hashing::BlendedHash;
pub use inference::{FlowFunction, InferenceParams};
pub use matching::{BlockMatch, FunctionMatch, InitialCounts, MatchLevel};
pub use metrics::MetricsReport;
pub use profile::{BlockProfile, FunctionProfile, ProfileFile, SuccessorRecord};
