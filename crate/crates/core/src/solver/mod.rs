//! Linear algebra and Newton iterations shared by every model.

pub mod band;
pub mod newton;

pub use band::{BandCholesky, BandLu, BandMatrix, SolvePath, Triplets, banded_solve, banded_solve_with_path};
pub use newton::{NewtonConfig, Objective, ResidualSystem, SolveReport, newton_minimize, newton_root};
