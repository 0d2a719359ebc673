//! Numerical construction and verification of bounded holomorphic Legendrian curves
//! of the unit disk into SL(2,C) and C^3, with their flat and affine fronts.

pub mod contact;
pub mod fronts;
pub mod geometry;
pub mod holo;
pub mod keylemma;
pub mod labyrinth;
pub mod runge;

pub use contact::{LegendrianCurve, Mat2, PolarGrid, SL2Value};
pub use holo::{HoloFunction, HoloPair, NormBounds};
pub use labyrinth::{LabyrinthSpec, Region, RegionTag};
pub use runge::{RungeCertificate, RungeOptions};
pub use fronts::{FrontMesh, FrontTarget};
pub use keylemma::{IterationParams, IterationReport, SweepOptions};
