//! Trust-weighted resilient consensus.
//!
//! Legitimate agents run a linear averaging protocol whose weights come from
//! stochastic trust observations of every link. Accumulated trust scores
//! decide, per step, which neighbors an agent listens to; malicious agents
//! are eventually excluded regardless of how many there are. The crate
//! simulates the protocol under concrete attacks and evaluates the
//! closed-form guarantees that go with it (misclassification tails,
//! deviation from the nominal consensus value, convergence rate).

pub mod attacks;
pub mod bounds;
pub mod config;
pub mod engine;
mod error;
pub mod harness;
pub mod matrix;
pub mod rng;
pub mod spectral;
pub mod topology;
pub mod trust;
pub mod weights;

pub use attacks::{AttackModel, Attacker, DriftParams};
pub use bounds::{BoundParams, BoundReport, GLegitVariant};
pub use engine::{run, SimulationConfig, SimulationTrace, StepRecord, StopReason};
pub use error::{Error, Result};
pub use harness::{Scenario, SummaryRow, SweepSpec};
pub use matrix::DenseMatrix;
pub use spectral::PerronData;
pub use topology::{paper_topology, AgentId, Topology, PAPER_INITIAL_VALUES};
pub use trust::{AlphaDistribution, ClassificationSnapshot, EdgeClass, TrustParams, TrustState};
pub use weights::{IdealMatrix, WeightMatrix};
