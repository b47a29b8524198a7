//! Toolkit for LLM-driven indoor layout generation.

pub mod geometry;
pub mod scene;
pub mod dataset;
pub mod jsonl;
pub mod prompt;
pub mod gateway;
pub mod eval;
pub mod forge;
pub mod session;
