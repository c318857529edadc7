//! Toolkit for short-text classification experiments: a Higher Criticism
//! word-count classifier, LLM-backed dataset generation, prompt templates,
//! a provider-agnostic LLM gateway, and the evaluation harness that turns
//! prediction logs into error, agreement, stability, and ranking reports.

pub mod annotate;
pub mod config;
pub mod corpus;
pub mod datagen;
pub mod eval;
pub mod gateway;
pub mod hc;
pub mod prompts;
pub mod synth;
pub mod text_features;
