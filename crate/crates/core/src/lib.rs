//! Sampling-based distance functions used as nonsmooth control barrier
//! functions, with a QP safety filter and an omnidirectional robot simulator.

// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod distance;
pub mod dynamics;
pub mod geometry;
pub mod safety_filter;
pub mod scenarios;
pub mod spatial;
pub mod tracking;
