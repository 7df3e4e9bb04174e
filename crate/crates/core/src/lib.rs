//! Demonstration capture and feature-trace reward learning for serial manipulators.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: URDF parsing into a validated kinematic tree.
//! - [`kinematics`]: forward kinematics, position Jacobian, damped-least-squares IK.
//! - [`scene`]: table/laptop/human environment, obstacle point clouds, ground-truth features.
//! - [`capture`]: trajectories, the periodic recorder, torque estimation, demonstration files.
//! - [`learning`]: state encoding, feature networks, confidence, IRL weight updates, planning.
//! - [`bus`]: topic pub/sub hub over newline-delimited JSON (TCP) and websockets.
//! - [`harness`]: scripted demonstrator and the feature-learning experiments.

pub mod assets;
pub mod bus;
pub mod capture;
pub mod cli;
pub mod harness;
pub mod kinematics;
pub mod learning;
pub mod model;
pub mod scene;

pub use kinematics::{Configuration, IkParams, IkSolution};
pub use model::{parse_urdf, RobotModel, Transform};
