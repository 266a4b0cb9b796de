//! Robustness analysis of feedback loops closed through asynchronous
//! sample-and-hold links.
//!
//! The composition of a sampler, a hold, a second sampler and a second hold
//! is modelled as a time-varying delay. Its effect on the loop is captured by
//! a perturbation `Delta` whose gain and passivity bounds define a family of
//! static multipliers, and stability and L2-gain certificates follow from
//! frequency-domain inequalities on the nominal continuous-time loop.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod events;
pub mod iqc;
pub mod linalg;
pub mod lti;
pub mod signals;
pub mod sim;
pub mod system;

pub use error::{Error, Result};
