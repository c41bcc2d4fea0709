//! Incoherent Kraus decompositions of qubit and qutrit channels.
//!
//! The crate reduces canonical incoherent (IO) and strictly incoherent (SIO)
//! Kraus sets to fewer operators with certified channel equality, and samples
//! the region of qutrit Bloch vectors reachable from two-dimensional sections.

pub mod channel;
pub mod densemath;
pub mod bloch;
pub mod reduction;
pub mod sampler;
pub mod cli;
