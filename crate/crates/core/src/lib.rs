//! Reason-based moral agents for a bridge grid world.

pub mod env;
pub mod policy;
pub mod reason;
pub mod embedding;
pub mod exec;
pub mod judge;
pub mod agent;
pub mod eval;
pub mod pipeline;
