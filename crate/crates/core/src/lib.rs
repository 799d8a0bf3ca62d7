//! Determinism and faithfulness assurance harness for tool-using agents.

pub mod agents;
pub mod benchmark;
pub mod canonical;
pub mod determinism;
pub mod faithfulness;
pub mod model;
pub mod seeding;
pub mod stats;
pub mod store;
pub mod stress;
pub mod report;
pub mod runner;
