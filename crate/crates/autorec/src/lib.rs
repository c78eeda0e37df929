//! Host-side companion to `autorec-core`: durable state, environment
//! registry, external providers, parallel execution, the HTTP service and
//! the command-line interface.

pub mod api;
pub mod artifact;
pub mod cli;
pub mod exec;
pub mod providers;
pub mod registry;
pub mod server;
pub mod store;
