//! Optimal annuitization and retirement under Gompertz mortality with
//! endogenous labor supply.

pub mod closed_form;
pub mod market;
pub mod mortality;
pub mod numerics;
pub mod policy;
pub mod oracle_fd;
pub mod montecarlo;
