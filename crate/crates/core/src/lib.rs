//! Bayesian inference for partially identified binary-regression models.
//!
//! The library splits posterior computation into two stages. Stage 1 fits a
//! probit sum-of-trees model to the point-identified probability function
//! `phi(x) = Pr(Y = 1 | x)` and records posterior draws of `phi` on a fixed
//! grid of design points ([`bart`]). Stage 2 layers informative truncated
//! priors over the unidentified components (a surveillance probability
//! `theta(x)` and a global bound `c`) and reconstructs the partially
//! identified target `p(x) = phi(x) / theta(x)` ([`modular`]). Because stage 2
//! touches the data only through the stored `phi` draws, sensitivity analysis
//! over many prior settings replays stage 2 without ever refitting stage 1.
//!
//! Two applications are built on that core: a partially observed bivariate
//! probit comparator with simulation designs and a Gibbs sampler
//! ([`biprobit`]), and a principal-strata instrumental-variables analysis
//! with modular direct-effect priors ([`strata`]).

// The samplers walk several parallel arrays by index; iterator zips would
// obscure the draw-order contract.
#![allow(clippy::needless_range_loop)]

pub mod bart;
pub mod biprobit;
pub mod dataset;
pub mod dist;
pub mod drawfile;
pub mod error;
pub mod modular;
pub mod rng;
pub mod strata;
pub mod util;

pub use error::{Error, Result};
pub use rng::RngStream;
