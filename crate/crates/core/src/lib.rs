//! Core of an agent-driven optimization loop for recommendation models.
//!
//! An offline agent proposes configuration diffs, lints them and scores them
//! with cheap proxy tools (a small trainer and a SQL-subset engine over
//! interaction logs). An online agent moves survivors through a five-phase
//! trial lifecycle against a simulated production environment and writes
//! every outcome back to an experiment journal, which conditions the next
//! round of proposals.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, providers that
//! talk to the network, worker pools and the HTTP service live in the
//! `autorec` companion crate.
#![no_std]

#[cfg(test)]
#[macro_use]
extern crate std;
extern crate alloc;

pub mod ablation;
pub mod config;
pub mod journal;
pub mod math;
pub mod offline;
pub mod online;
pub mod persona;
pub mod proposer;
pub mod query;
pub mod score;
pub mod sim;
pub mod space;
pub mod table;
pub mod tools;
pub mod trainer;
