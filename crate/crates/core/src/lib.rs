//! Joint power and subcarrier allocation for downlink multi-carrier NOMA.

pub mod baselines;
pub mod config;
pub mod dp;
pub mod instance;
pub mod lddp;
pub mod oracle;
pub mod rate;
pub mod sc;
pub mod scheduler;
pub mod scheme;
pub mod sweep;
pub mod verify;
