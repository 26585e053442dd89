//! Decentralized and centralized motion planning for teams of car-like
//! robots sharing a workspace with circular obstacles.

pub mod eccr;
pub mod error;
pub mod geometry;
pub mod heuristics;
pub mod hybrid_astar;
pub mod io;
pub mod pbcr;
pub mod primitives;
pub mod reeds_shepp;
pub mod render;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
pub use geometry::{RobotShape, State, Workspace};
