//! Stein variational distributionally robust sampling MPC.
//!
//! The crate is layered bottom-up: [`geometry`] and [`contact`] feed the
//! planar [`dynamics`], [`env`] defines the two benchmark tasks and their
//! costs, [`svgd`] transports parameter particles, and [`control`] wraps it
//! all into sampling MPC controllers and the receding-horizon episode loop.

pub mod contact;
pub mod control;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod geometry;
pub mod params;
pub mod pool;
pub mod record;
pub mod rng;
pub mod svgd;

pub use control::{run_episode, ControllerKind, Settings, TrialRecord};
pub use dynamics::{rollout, step, BodyState, ControlInput, Trajectory};
pub use env::{make_pusht_env, make_tray_env, rollout_cost, trajectory_cost, EnvSpec};
pub use error::{Error, Result};
pub use params::{ParamPrior, PhysParams};
pub use pool::WorkPool;
