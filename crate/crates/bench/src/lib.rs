//! Fixtures shared by the criterion benches in `benches/`.

use degenspec::{BsContext, GridSpec, KineticSymbol, Potential, Result};

/// bcs (μ = 1, r = 1) in two dimensions with a unit Gaussian, at the given
/// angular resolution.
pub fn bcs2d(angular: usize, e_min: f64, lambda: f64) -> Result<BsContext> {
    let sym = KineticSymbol::bcs(2, 1.0, 1.0)?;
    let spec = GridSpec { e_min, angular, ..GridSpec::default() };
    BsContext::build(sym, Potential::gaussian(1.0, 1.0)?, &spec, lambda)
}

/// The same problem in three dimensions.
pub fn bcs3d(angular: usize, e_min: f64, lambda: f64) -> Result<BsContext> {
    let sym = KineticSymbol::bcs(3, 1.0, 1.0)?;
    let spec = GridSpec { e_min, angular, ..GridSpec::default() };
    BsContext::build(sym, Potential::gaussian(1.0, 1.0)?, &spec, lambda)
}
