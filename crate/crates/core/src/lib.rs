pub mod baselines;
pub mod cli;
pub mod combinatorics;
pub mod equal_cache;
pub mod error;
pub mod incremental;
pub mod plan;
pub mod simulator;
pub mod unequal;
