//! Tools for studying the gap between language modeling and the latent
//! reasoning it verbalizes.
//!
//! The crate has two halves. [`scm`] and [`gap`] model thoughts as discrete
//! structural causal models verbalized by token sequences and compute, by
//! exact enumeration, the shortcut distribution a next-token predictor fits
//! on conclusion-first text and the KL lower bound under imperfect
//! understanding. [`bench`], [`prompt`], [`eval`] and [`metrics`] build
//! benchmark files, render prompt interventions, run them against chat
//! endpoints and score the results.

pub mod bench;
pub mod eval;
pub mod gap;
pub mod metrics;
pub mod prompt;
pub mod scm;
