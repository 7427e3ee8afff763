//! Weak-coupling bound states of `T(i∇) + λV` for kinetic symbols that
//! vanish on a hypersurface `S`.
//!
//! The crate discretises the surface operator `V_S` on `L²(S)`, the
//! Birman–Schwinger operator on a momentum grid graded toward `S`, and
//! the second-order operator `W_S`, and checks the small-coupling laws
//! relating them.

pub mod asymptotics;
pub mod bs_solver;
pub mod error;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod potentials;
pub mod quadrature;
pub mod surface_ops;
pub mod symbols;

pub use asymptotics::{SweepOptions, SweepReport, SweepRow};
pub use bs_solver::{f_inverse, f_of_e, g_of_e, BsContext, Probe, SignMode, SolveRecord};
pub use error::{Error, Result};
pub use potentials::{GaussianTerm, HypothesisReport, Potential, RadialTable};
pub use symbols::{
    build_momentum_grid, build_surface_quadrature, GridSpec, KineticSymbol, MomentumGrid, RadialProfile,
    SurfaceQuadrature,
};
pub use surface_ops::{assemble_vs, assemble_ws, SurfaceMatrix, SurfaceOperatorSet, WsResult};
