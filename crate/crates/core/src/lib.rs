//! Secrecy sum-rate maximization for a two-user multi-antenna broadcast
//! channel overheard by one eavesdropper, using cooperative rate-splitting.
//!
//! The transmitter splits the user messages into a shared common stream and
//! two private streams. During the first time slot the base station
//! broadcasts; during the second, the stronger user relays the decoded
//! common stream to the weaker one while the eavesdropper keeps listening.
//! Precoders and the time-slot split are optimized jointly by successive
//! convex approximation: the nonconvex secrecy program is decomposed into
//! four sign-pattern cases, each case is linearized around the current
//! iterate into a smooth convex subproblem, and the subproblems are solved
//! by an internal log-barrier interior-point method.
//!
//! Module map:
//! - [`channel`]: channel realizations, ordering, JSON (de)serialization.
//! - [`rates`]: exact SINR / rate / secrecy-sum-rate evaluation (the ground
//!   truth every optimizer output is scored against).
//! - [`surrogate`]: the five first-order bounds used by the convexification.
//! - [`program`]: typed convex constraint blocks and assembled programs.
//! - [`cases`]: per-case subproblem assembly and feasibility audits.
//! - [`solver`]: the log-barrier interior-point solver.
//! - [`sca`]: the outer successive-convex-approximation loop.
//! - [`schemes`]: MU-LP, NRS and C-NOMA baselines as restrictions of CRS.
//! - [`mc`]: the Monte-Carlo benchmark engine behind the CLI.

pub mod channel;
pub mod cases;
pub mod cx;
pub mod error;
pub mod mc;
pub mod program;
pub mod rates;
pub mod sca;
pub mod schemes;
pub mod solver;
pub mod surrogate;

pub use cases::{CaseId, ScaIterate};
pub use channel::{ChannelSet, ChannelStats, PowerBudget};

pub use error::{Error, Result};
pub use sca::{CaseSolution, ScaConfig, Solution};
pub use schemes::SchemeId;
pub use rates::{PrecoderDesign, RateBundle, SinrBundle};


pub use solver::{SolverConfig, SolverResult, SolverStatus};
