//! Forced cubic Hamiltonian cycle (FCHC) toolkit.
//!
//! The crate bundles four layers that check each other:
//!
//! * a classical branch-and-reduce solver for FCHC on multigraphs of maximum
//!   degree three ([`eppstein`]), with instrumentation for the recursion-tree
//!   counting bounds it is supposed to obey;
//! * a reversible register machine ([`revcore`]) plus succinct trit-string
//!   set encodings and their reversible operations ([`encoding`]), and the
//!   set-generation recursion built on top of them ([`setgen`]);
//! * a non-recursive solver pipeline compiled to reversible programs
//!   ([`qsim`]), searched classically over its decision string, with a query
//!   cost model in place of amplitude amplification;
//! * the crossover scheduler and its analytic layer ([`hybrid`]): Lambert-W
//!   threshold inversion, recurrence exponents, space-model calibration.

pub mod cascade;
pub mod encoding;
pub mod eppstein;
pub mod fixtures;
pub mod gadgets;
pub mod graph;
pub mod hybrid;
pub mod qsim;
pub mod revcore;
pub mod setgen;
pub mod verify;
