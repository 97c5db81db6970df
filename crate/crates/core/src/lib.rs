//! Core library for evaluating stochastic seeding strategies on collections
//! of directed networks: exact seed-set probabilities, reweighting estimators
//! of contrasts between strategies, randomization and bootstrap inference,
//! effective-sample-size diagnostics, optimized designs, and a contagion
//! simulation engine.

pub mod alias;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod inference;
pub mod logprob;
pub mod numeric;
pub mod rngstream;
pub mod simulation;
pub mod strategies;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{DirectedGraph, NodeId, Village, VillageCollection};
pub use logprob::LogProb;
pub use strategies::SeedSet;
