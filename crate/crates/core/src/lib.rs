//! Mean-field jump processes in a random environment and their diffusive
//! limit.
//!
//! Each of `N` particles carries a fixed disorder variable `U_j`. The
//! aggregate state jumps by `U_J / sqrt N` at rate `N f(X)` and otherwise
//! follows `dX = b(X) dt`. As `N` grows the state approaches the diffusion
//! `dX = [b + W f] dt + sigma sqrt(f) dB` driven by a Gaussian environment
//! `W`. The crate simulates both sides exactly or by Euler–Maruyama, couples
//! the environments, and measures the distance between them.

pub mod config;
pub mod coupling;
pub mod environment;
pub mod error;
pub mod harness;
pub mod limit;
pub mod metrics;
pub mod model;
pub mod operators;
pub mod par;
pub mod pdmp;
pub mod rng;
pub mod stats;

pub use config::{parse_config, parse_config_with_overrides, ExperimentConfig};
pub use coupling::{couple, k_tail_profile, CoupledEnvironment, CouplerKind, KTailProfile};
pub use environment::{sample_environment, DisorderLaw, EnvironmentDraw};
pub use error::{Error, Result};
pub use harness::{run_verify, ExperimentReport};
pub use limit::{simulate_annealed, simulate_limit_given_w, DiffusionPath};
pub use model::{Drift, InitialLaw, ModelSpec, Rate};
pub use operators::{gen_limit_apply, gen_pdmp_apply, generator_gap_bound, TestFunction};
pub use pdmp::{simulate_pdmp, PdmpPath};
