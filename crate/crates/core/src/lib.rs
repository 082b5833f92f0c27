//! A Prolog exercise lab: a reader with beginner-oriented diagnostics, a
//! tracing interpreter with resource limits, a sandbox for untrusted
//! programs, randomized differential testing against reference solutions,
//! a staged grader, a learner model and an HTTP service around them.

pub mod bundle;
pub mod cli;
pub mod engine;
pub mod grader;
pub mod reader;
pub mod sandbox;
pub mod service;
pub mod term;
pub mod testgen;
pub mod tutor;
