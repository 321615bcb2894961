//! Cost transparency for Infrastructure-from-Code programs.
//!
//! The pipeline parses a program ([`syntax`]), extracts a directed cost
//! graph ([`extract`], [`graph`]), binds it to a vendor pricing catalog
//! ([`pricing`]) and estimates per-invocation and monthly costs
//! ([`estimate`]).

pub mod assumptions;
pub mod estimate;
pub mod extract;
#[doc(hidden)]
pub mod fuzzing;
pub mod graph;
pub mod num;
pub mod pipeline;
pub mod pricing;
pub mod scalar;
pub mod sim;
pub mod syntax;
pub mod testkit;
