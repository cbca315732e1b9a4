//! Numerical differential geometry on compact embedded manifolds: flows of
//! vector fields, connections on vector bundles, parallel transport, and the
//! tools that check the two descriptions of a connection against each other.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod correspondence;
pub mod error;
pub mod flows;
pub mod manifold;
mod ode;
pub mod registry;
pub mod transport;

pub use error::{GeoError, Result};
