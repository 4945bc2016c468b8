//! Reward inference from action-free demonstrations.
//!
//! A utility network is trained to rank frames of expert trajectories by
//! their temporal order (a Bradley-Terry pairwise model). Its sigmoid gives a
//! progress likelihood `p(s)`. During policy learning an expert-vs-policy
//! classifier `D(s)` estimates the density ratio `d_expert / d_policy`, and
//! the agent is trained on
//!
//! ```text
//! r(s) = log p(s) + alpha * (log D(s) - log(1 - D(s)))
//! ```
//!
//! The crate contains the numerical kernel ([`numkit`]), 2D environments and
//! scripted experts ([`demos`]), the ranking model ([`ranking`]), the
//! discriminator ([`discrim`]), reward composition and baselines
//! ([`reward`]), an off-policy actor-critic agent ([`agent`]) and the
//! experiment loop with its command-line front end ([`harness`]).

pub mod agent;
pub mod demos;
pub mod discrim;
pub mod error;
pub mod harness;
pub mod numkit;
pub mod ranking;
pub mod reward;

pub use error::{Error, Result};
