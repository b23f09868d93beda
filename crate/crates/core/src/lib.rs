//! Solver and verification toolkit for the KWC grain-boundary model, with
//! boundary values that evolve by their own gradient flow.
//!
//! The orientation order `η` follows an Allen–Cahn type equation and the
//! orientation angle `θ` a weighted total-variation flow; both carry their own
//! evolution on the boundary. Time stepping is by minimizing movements with a
//! relaxed norm `f_δ(ω) = √(δ² + |ω|²) − δ`.

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod initial;
mod linalg;
pub mod mesh;
pub mod model;
pub mod scheme;

pub use energy::{eval_free_energy, EnergyBreakdown, EnergyMode, FieldPair};
pub use error::{Error, Result};
pub use linalg::LinearSolver;
pub use mesh::{build_mesh, Geometry, Mesh, MeshSpec};
pub use model::{ModelParams, ScalarFn};
pub use scheme::{run_scheme, State, SolverOptions, Trajectory};
