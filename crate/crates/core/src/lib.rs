pub mod bifurcation;
pub mod equilibria;
pub mod error;
pub mod extinction;
pub mod geometry;
pub mod integrator;
pub mod io;
pub mod model;
mod roots;
