//! Hybrid SAT solving with p-bit guidance.
//!
//! A CNF formula is encoded as a quadratic Ising model, annealed with
//! stochastic p-bit replicas, and the literals on which the best replicas
//! agree are handed to a CDCL solver as temporary assumptions. A failed or
//! over-budget guided attempt is retried once with fewer assumptions and then
//! replaced by an unrestricted solve, so answers always come from CDCL.

pub mod cdcl;
pub mod consensus;
pub mod dimacs;
pub mod formula;
pub mod ising;
pub mod pbit;
pub mod bench;
pub mod gate;
pub mod hybrid;
pub mod stats;
