//! Discrete-time simulator and analysis toolkit for MaxWeight scheduling on
//! a generalized switch.
//!
//! A switch serves N traffic flows; each slot the scheduler picks one of K
//! service decisions, which realizes a random service vector, and continuous
//! random work arrives. The crate provides:
//!
//! - [`geometry`]: the rate region's facets, the normal cone at a maximal
//!   boundary load point, and the projections (ray, cone, orthogonal
//!   subspace, cone-boundary distance) the analysis is built on;
//! - [`arrivals`]: tilted-uniform arrival families with densities bounded
//!   above and below, solvable for any target mean vector;
//! - [`switch`]: the MaxWeight state machine with wasted-service accounting
//!   and reproducible seeded streams;
//! - [`differential`]: the limiting queue-differential Markov chain on the
//!   subspace orthogonal to the normal cone;
//! - [`estimators`]: stationary estimation (burn-in, thinning, batch means),
//!   projected two-sample distances, service-gap probabilities, drift
//!   tables, and related diagnostics.

pub mod arrivals;
pub mod differential;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod switch;
