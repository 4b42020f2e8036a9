//! Capacity regions of state-dependent multiple-access channels with
//! cooperating encoders, plus a Monte-Carlo simulator of the binning code
//! that achieves the one-way region.

pub mod binsim;
pub mod cli;
pub mod macmodel;
pub mod optimizer;
pub mod probcore;
pub mod rateregion;
