//! Simulation-driven falsification engine for closed-loop autonomous systems.
//!
//! The pieces fit together as a loop: a [`samplers::Sampler`] proposes values
//! for the external parameters of a [`scenario::ScenarioProgram`], the program
//! is sampled into a [`scenario::FeatureVector`], an episode is simulated (in
//! process through [`refsim`] or over the wire through [`simbridge`]), the
//! resulting trace is scored by [`monitor::robustness`], and [`engine`]
//! records the row and feeds the robustness back to the sampler.

pub mod engine;
pub mod lex;
pub mod monitor;
pub mod refsim;
pub mod samplers;
pub mod scenario;
pub mod simbridge;
pub mod value;

pub use value::Value;
