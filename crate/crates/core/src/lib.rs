//! Hyperbolic geometry, hyperbolic K-Means and hyperbolic contrastive losses
//! for generalized category discovery experiments.
// negated comparisons below deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod datagen;
pub mod geometry;
pub mod losses;
pub mod metrics;
