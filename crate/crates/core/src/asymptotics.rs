//! Small-coupling sweeps and the checks built on them.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bs_solver::{g_of_e, BsContext, Probe, SolveRecord};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, loglog_fit, LinearFit};
use crate::linalg::expand_channel_vector;
use crate::potentials::{GaussianTerm, Potential};
use crate::quadrature::{integrate_adaptive, unit_sphere_area};
use crate::surface_ops::{
    apply_fs_adjoint_many, assemble_vs, eigenspace_groups, node_values, position_grid, surface_eigenvalues,
    PositionGrid, SurfaceOperatorSet,
};
use crate::symbols::{build_surface_quadrature, KineticSymbol, MomentumGrid, Side};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    NoBoundState,
    Resolution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub index: usize,
    pub status: RowStatus,
    pub e: f64,
    pub lambda_f: f64,
    /// `1 / |a_S^i|`.
    pub target: f64,
    /// `λ f(e) - 1/|a_S^i|`.
    pub first_order_residual: f64,
    /// `f(e) + 1/(λ a_S^i)`, the first-order counterpart of
    /// `second_order_residual`.
    pub first_order_f_residual: f64,
    pub b: Option<f64>,
    /// `f(e) + 1/(λ b_S^i(λ))`.
    pub second_order_residual: Option<f64>,
    pub eigenvector_distance: Option<f64>,
    pub solve_residual: f64,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    /// `λ f(e) |a_S^i|`, which tends to 1.
    pub fn normalized(&self) -> f64 {
        self.lambda_f / self.target
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGates {
    /// Extrapolated `λ f(e) |a_S^i|` within 2 % of 1.
    pub first_order_limit: Option<bool>,
    /// `|λ f |a| - 1|` shrinks at every step toward smaller λ.
    pub first_order_monotone: Option<bool>,
    /// `|f + 1/(λb)| <= |f + 1/(λa)| / 2` at the smallest λ.
    pub second_order_improves: Option<bool>,
    /// `|f + 1/(λb)|` shrinks over the last three λ.
    pub second_order_tail: Option<bool>,
    pub eigenvector_monotone: Option<bool>,
}

impl SweepGates {
    pub fn all(&self) -> [(&'static str, Option<bool>); 5] {
        [
            ("first_order_limit", self.first_order_limit),
            ("first_order_monotone", self.first_order_monotone),
            ("second_order_improves", self.second_order_improves),
            ("second_order_tail", self.second_order_tail),
            ("eigenvector_monotone", self.eigenvector_monotone),
        ]
    }

    pub fn passes(&self) -> bool {
        self.all().iter().all(|(_, g)| g.unwrap_or(true))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub index: usize,
    pub a_s: f64,
    pub rows: Vec<SweepRow>,
    /// Linear fit of `1/(λ f(e))` in λ; its intercept estimates `|a_S^i|`.
    pub inverse_fit: Option<LinearFit>,
    /// `|a_S^i| / intercept`, the extrapolated `λ f |a_S^i|`.
    pub extrapolated: Option<f64>,
    /// Slope of `ln e` against `ln λ`.
    pub e_exponent: Option<LinearFit>,
    /// `(u_i, W_S u_i)` when the second-order operator was assembled.
    pub ws_form: Option<f64>,
    pub gates: SweepGates,
}

impl SweepReport {
    pub fn ok_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.is_ok())
    }

    pub fn all_rows_ok(&self) -> bool {
        self.rows.iter().all(|r| r.is_ok())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub second_order: bool,
    pub eigenvectors: bool,
    /// `e` sequence for the `W_S` extrapolation.
    pub e_sequence: Vec<f64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { second_order: false, eigenvectors: false, e_sequence: crate::surface_ops::default_e_sequence() }
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::param("the coupling list is empty"));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::param("couplings must be positive"));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("couplings must be strictly decreasing"));
    }
    Ok(())
}

fn solve_row(ctx: &BsContext, lambda: f64, index: usize, a: f64) -> Result<(SweepRow, Option<SolveRecord>)> {
    let c = ctx.with_lambda(lambda)?;
    let target = 1.0 / a.abs();
    let failed = |status| SweepRow {
        lambda,
        index,
        status,
        e: f64::NAN,
        lambda_f: f64::NAN,
        target,
        first_order_residual: f64::NAN,
        first_order_f_residual: f64::NAN,
        b: None,
        second_order_residual: None,
        eigenvector_distance: None,
        solve_residual: f64::NAN,
    };
    match c.solve_e(index, None) {
        Ok(rec) => {
            let f = rec.f_of_e;
            let row = SweepRow {
                lambda,
                index,
                status: RowStatus::Ok,
                e: rec.e,
                lambda_f: lambda * f,
                target,
                first_order_residual: lambda * f - target,
                first_order_f_residual: f + 1.0 / (lambda * a),
                b: None,
                second_order_residual: None,
                eigenvector_distance: None,
                solve_residual: rec.residual,
            };
            Ok((row, Some(rec)))
        }
        Err(Error::NoBoundState { .. }) => Ok((failed(RowStatus::NoBoundState), None)),
        Err(Error::Resolution(msg)) => {
            log::warn!("lambda = {lambda}: {msg}");
            Ok((failed(RowStatus::Resolution), None))
        }
        Err(e) => Err(e),
    }
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Solves every coupling and records `λ f(e_i)` against `1/|a_S^i|`.
///
/// Points solve in parallel; rows keep the order of `lambdas`.
pub fn sweep(ctx: &BsContext, lambdas: &[f64], index: usize, opts: &SweepOptions) -> Result<SweepReport> {
    check_lambdas(lambdas)?;
    let a = ctx.a_s(index)?;
    if !(a < 0.0) {
        return Err(Error::NoBoundState { lambda: lambdas[0], index });
    }
    // warm the shared caches before fanning out
    ctx.grid_kernel();
    ctx.surface_eigenvalues();
    let solved: Vec<(SweepRow, Option<SolveRecord>)> =
        lambdas.par_iter().map(|&l| solve_row(ctx, l, index, a)).collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = solved.iter().map(|(r, _)| r.clone()).collect();

    let mut ws_form = None;
    if opts.second_order {
        let set = SurfaceOperatorSet::new(ctx.surface_quadrature().clone(), &ctx.potential, index)?.with_ws(
            &ctx.potential,
            &ctx.sym,
            &opts.e_sequence,
            &ctx.grid,
        )?;
        let (group, proj) = set.projected_ws(index - 1)?;
        ws_form = Some(proj[(index - 1 - group.start, index - 1 - group.start)]);
        for row in rows.iter_mut().filter(|r| r.is_ok()) {
            let b = set.assemble_bs_surface(row.lambda)?[index - 1].value;
            row.b = Some(b);
            row.second_order_residual = Some(row.lambda_f / row.lambda + 1.0 / (row.lambda * b));
        }
    }
    if opts.eigenvectors {
        let target = SurfaceTarget::new(ctx, index)?;
        let distances: Vec<Option<f64>> = solved
            .par_iter()
            .map(|(_, rec)| match rec {
                Some(rec) => eigenvector_distance(&ctx.with_lambda(rec.lambda)?, rec, &target).map(Some),
                None => Ok(None),
            })
            .collect::<Result<_>>()?;
        for (row, d) in rows.iter_mut().zip(distances) {
            row.eigenvector_distance = d;
        }
    }
    Ok(assemble_report(index, a, rows, ws_form, opts))
}

fn assemble_report(index: usize, a: f64, rows: Vec<SweepRow>, ws_form: Option<f64>, opts: &SweepOptions) -> SweepReport {
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let lam: Vec<f64> = ok.iter().map(|r| r.lambda).collect();
    let inverse_fit = if ok.len() >= 2 {
        linear_fit(&lam, &ok.iter().map(|r| 1.0 / r.lambda_f).collect::<Vec<_>>()).ok()
    } else {
        None
    };
    let extrapolated = inverse_fit.map(|fit| a.abs() / fit.intercept);
    let e_exponent = if ok.len() >= 2 { loglog_fit(&lam, &ok.iter().map(|r| r.e).collect::<Vec<_>>()).ok() } else { None };

    let mut gates = SweepGates::default();
    if !ok.is_empty() {
        gates.first_order_limit = Some(extrapolated.is_some_and(|x| (x - 1.0).abs() <= 0.02));
        let dev: Vec<f64> = ok.iter().map(|r| (r.normalized() - 1.0).abs()).collect();
        gates.first_order_monotone = Some(ok.len() == rows.len() && strictly_decreasing(&dev));
    }
    if opts.second_order {
        if let Some(last) = ok.last() {
            let s = last.second_order_residual.unwrap_or(f64::NAN).abs();
            gates.second_order_improves = Some(s <= 0.5 * last.first_order_f_residual.abs());
        }
        let tail: Vec<f64> =
            ok.iter().rev().take(3).rev().filter_map(|r| r.second_order_residual.map(f64::abs)).collect();
        gates.second_order_tail = Some(tail.len() == 3 && strictly_decreasing(&tail));
    }
    if opts.eigenvectors {
        let d: Vec<f64> = ok.iter().filter_map(|r| r.eigenvector_distance).collect();
        gates.eigenvector_monotone = Some(d.len() == ok.len() && !d.is_empty() && strictly_decreasing(&d));
    }
    SweepReport { index, a_s: a, rows, inverse_fit, extrapolated, e_exponent, ws_form, gates }
}

pub fn first_order_sweep(ctx: &BsContext, lambdas: &[f64], index: usize) -> Result<SweepReport> {
    sweep(ctx, lambdas, index, &SweepOptions::default())
}

/// First-order sweep plus `b_S^i(λ)` from `V_S - λ W_S`; refused for `r >= 2`.
pub fn second_order_sweep(ctx: &BsContext, lambdas: &[f64], index: usize, e_sequence: &[f64]) -> Result<SweepReport> {
    if ctx.sym.r >= 2.0 {
        return Err(Error::Unsupported(format!("second-order sweeps need r < 2 (r = {})", ctx.sym.r)));
    }
    sweep(ctx, lambdas, index, &SweepOptions { second_order: true, eigenvectors: false, e_sequence: e_sequence.to_vec() })
}

/// `|V|^{1/2} F_S* u` over the eigenspace of `a_S^i`, orthonormalised on a
/// position grid.
pub struct SurfaceTarget {
    pub grid: PositionGrid,
    sqrt_v: Vec<f64>,
    basis: Vec<Vec<Complex64>>,
}

impl SurfaceTarget {
    pub fn new(ctx: &BsContext, index: usize) -> Result<Self> {
        let quad = ctx.surface_quadrature();
        let vals = ctx.surface_eigenvalues();
        let group = eigenspace_groups(vals, 1e-8)
            .into_iter()
            .find(|g| g.contains(&(index - 1)))
            .ok_or_else(|| Error::param(format!("eigen index {index} out of range")))?;
        let set = SurfaceOperatorSet::new(quad.clone(), &ctx.potential, group.end)?;
        let radius = 6.0 * ctx.potential.support_radius();
        let dim = ctx.sym.dim;
        let grid = position_grid(dim, radius, 48, if dim == 2 { 96 } else { 24 });
        let sqrt_v: Vec<f64> = grid
            .points
            .iter()
            .map(|x| ctx.potential.value(dim, (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()).abs().sqrt())
            .collect();
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for k in group {
            let u = node_values(quad, &set.eigs_vs[k].vector);
            let mut v: Vec<Complex64> =
                apply_fs_adjoint_many(quad, &u, &grid.points).into_iter().zip(&sqrt_v).map(|(z, s)| z * s).collect();
            for q in &basis {
                let c = inner(&grid.weights, q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            let n = inner(&grid.weights, &v, &v).re.sqrt();
            if n > 1e-12 {
                v.iter_mut().for_each(|x| *x /= n);
                basis.push(v);
            }
        }
        Ok(SurfaceTarget { grid, sqrt_v, basis })
    }

    /// Normalised distance of `f` from the span, in `[0, 1]`.
    pub fn distance(&self, f: &[Complex64]) -> f64 {
        let n2 = inner(&self.grid.weights, f, f).re;
        let proj: f64 = self.basis.iter().map(|q| inner(&self.grid.weights, q, f).norm_sqr()).sum();
        (1.0 - proj / n2).max(0.0).sqrt()
    }
}

fn inner(w: &[f64], a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x.conj() * y * w).sum()
}

/// Distance between `|V|^{1/2} ψ_λ` and the lifted surface eigenspace,
/// with `ψ_λ = (T+e)^{-1} |V|^{1/2} φ_λ` rebuilt from the grid eigenvector.
pub fn eigenvector_distance(ctx: &BsContext, rec: &SolveRecord, target: &SurfaceTarget) -> Result<f64> {
    let mode = ctx.bs_eigenvector(rec)?;
    let layout = &ctx.grid.layout;
    let y = expand_channel_vector(&mode.ring_vector, mode.channel, mode.parity, layout.azimuths);
    let coef: Vec<f64> = ctx
        .grid
        .weights()
        .iter()
        .zip(ctx.grid.excess_per_node())
        .zip(&y)
        .map(|((w, t), y)| w.sqrt() * y / (t + rec.e).sqrt())
        .collect();
    let pts = ctx.grid.points();
    let psi: Vec<Complex64> = target
        .grid
        .points
        .par_iter()
        .zip(&target.sqrt_v)
        .map(|(x, s)| {
            let z: Complex64 = pts
                .iter()
                .zip(&coef)
                .map(|(p, c)| Complex64::from_polar(*c, x[0] * p[0] + x[1] * p[1] + x[2] * p[2]))
                .sum();
            z * s
        })
        .collect();
    Ok(target.distance(&psi))
}

/// Distances for each coupling, in order.
pub fn eigenvector_convergence(ctx: &BsContext, lambdas: &[f64], index: usize) -> Result<Vec<f64>> {
    check_lambdas(lambdas)?;
    let target = SurfaceTarget::new(ctx, index)?;
    lambdas
        .iter()
        .map(|&l| {
            let c = ctx.with_lambda(l)?;
            let rec = c.solve_e(index, None)?;
            eigenvector_distance(&c, &rec, &target)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub lambda: f64,
    /// Negative direct eigenvalues with `|value| >= e_min`.
    pub direct_count: usize,
    /// Negative `a_S^i` whose first-order `e` lies above `e_min`.
    pub surface_count: usize,
    pub passes: bool,
}

pub fn counting_check(ctx: &BsContext) -> Result<CountingReport> {
    let e_min = ctx.grid.spec.e_min;
    let mut surface_count = 0;
    if ctx.lambda > 0.0 {
        for i in 1..=ctx.resolved_surface_count() {
            if ctx.first_order_prediction(i)? >= e_min {
                surface_count += 1;
            }
        }
    }
    let direct_count =
        ctx.direct_spectrum(surface_count + 16)?.iter().filter(|&&v| v < 0.0 && -v >= e_min).count();
    Ok(CountingReport { lambda: ctx.lambda, direct_count, surface_count, passes: direct_count >= surface_count })
}

/// Resolved negative eigenvalue count of `V_S` at each surface resolution.
pub fn surface_count_growth(sym: &KineticSymbol, v: &Potential, resolutions: &[usize]) -> Result<Vec<(usize, usize)>> {
    resolutions
        .iter()
        .map(|&res| {
            let quad = build_surface_quadrature(sym, 0.0, res)?;
            let vals = surface_eigenvalues(&assemble_vs(&quad, v)?)?;
            let scale = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            Ok((res, vals.iter().filter(|&&a| a < -crate::bs_solver::RESOLVED_FRACTION * scale).count()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCaseEntry {
    pub index: usize,
    pub a: f64,
    /// `(u, W_S u)`.
    pub ws_form: f64,
    pub positive: bool,
}

/// `(u_i, W_S u_i)` for every `|a_S^i| < tol`; positive in exact
/// arithmetic, which makes `(u, B_S u) < 0`.
pub fn kernel_case_check(set: &SurfaceOperatorSet, tol: f64) -> Result<Vec<KernelCaseEntry>> {
    let ws = set.ws()?;
    Ok(set
        .eigs_vs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.value.abs() < tol)
        .map(|(k, p)| {
            let form = ws.form(&p.vector, &p.vector);
            KernelCaseEntry { index: k + 1, a: p.value, ws_form: form, positive: form > 0.0 }
        })
        .collect())
}

/// Attractive Gaussian plus a narrower repulsive one whose amplitude is
/// tuned so the lowest `V_S` eigenvalue sits at zero.
pub fn engineered_kernel_potential(sym: &KineticSymbol, resolution: usize) -> Result<Potential> {
    let quad = build_surface_quadrature(sym, 0.0, resolution)?;
    let mix = |b: f64| Potential::GaussianMixture {
        terms: vec![GaussianTerm { amplitude: 1.0, width: 1.0 }, GaussianTerm { amplitude: -b, width: 0.5 }],
    };
    let lowest = |b: f64| -> Result<f64> { Ok(surface_eigenvalues(&assemble_vs(&quad, &mix(b))?)?[0]) };
    let (mut lo, mut hi) = (0.0, 1.0);
    while lowest(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Unsupported("no zero crossing of the lowest surface eigenvalue".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lowest(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mix(hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeDiagnostics {
    pub r: f64,
    pub e_values: Vec<f64>,
    pub bounds: Vec<f64>,
    /// `(max - min) / max` of the probe bounds.
    pub variation: f64,
    /// Slope of `ln bound` against `ln g(e)`, for `r >= 2`.
    pub growth_exponent: Option<f64>,
    /// Probe-wise `M_e` Cauchy residuals, for `r < 2`.
    pub cauchy: Vec<f64>,
}

impl MeDiagnostics {
    pub fn bounded(&self) -> bool {
        self.variation <= 0.2
    }

    pub fn cauchy_decreasing(&self) -> bool {
        !self.cauchy.is_empty() && strictly_decreasing(&self.cauchy)
    }

    pub fn growth_matches(&self) -> bool {
        self.growth_exponent.is_some_and(|x| (x - 1.0).abs() <= 0.2)
    }
}

/// Probe lower bounds on `||M_e||` over a decreasing `e` list.
pub fn me_diagnostics(ctx: &BsContext, e_values: &[f64], probes: &[Probe]) -> Result<MeDiagnostics> {
    let r = ctx.sym.r;
    let bounds = e_values.iter().map(|&e| ctx.me_norm_probe(e, probes).map(|b| b.bound)).collect::<Result<Vec<_>>>()?;
    let max = bounds.iter().copied().fold(0.0, f64::max);
    let min = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = if max > 0.0 { (max - min) / max } else { 0.0 };
    let growth_exponent = if r >= 2.0 && bounds.iter().all(|&b| b > 0.0) {
        let g = e_values.iter().map(|&e| g_of_e(e, r)).collect::<Result<Vec<_>>>()?;
        Some(loglog_fit(&g, &bounds)?.slope)
    } else {
        None
    };
    let cauchy = if r < 2.0 { ctx.m0_limit_residuals(e_values, probes)? } else { Vec::new() };
    Ok(MeDiagnostics { r, e_values: e_values.to_vec(), bounds, variation, growth_exponent, cauchy })
}

/// Relative mismatch between the grid's co-area shell sum of `h` and a
/// direct radial integral over `Ω_τ`.
pub fn coarea_residual<F: Fn(f64) -> f64 + Copy>(sym: &KineticSymbol, grid: &MomentumGrid, h: F) -> Result<f64> {
    let tau = sym.tau;
    let outer = sym
        .profile
        .level_radius(Side::Outer, tau)
        .ok_or_else(|| Error::param("outer level sphere at t = τ does not exist"))?;
    let inner = sym.profile.level_radius(Side::Inner, tau).unwrap_or(0.0);
    let area = unit_sphere_area(sym.dim);
    let s = sym.surface_radius();
    let radial = |rho: f64| area * rho.powi(sym.dim as i32 - 1) * h(rho);
    let direct = integrate_adaptive(radial, inner, s, 1e-13) + integrate_adaptive(radial, s, outer, 1e-13);
    let shells = grid.integrate_shells(h);
    Ok((shells - direct).abs() / direct.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::GridSpec;

    fn ctx() -> BsContext {
        let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
        let spec = GridSpec { e_min: 1e-3, angular: 8, disk_nodes: 8, outer_nodes: 6, ..GridSpec::default() };
        BsContext::build(sym, Potential::gaussian(1.0, 1.0).unwrap(), &spec, 0.8).unwrap()
    }

    #[test]
    fn rejects_bad_coupling_lists() {
        let c = ctx();
        assert!(first_order_sweep(&c, &[], 1).is_err());
        assert!(first_order_sweep(&c, &[0.5, 0.7], 1).is_err());
        assert!(first_order_sweep(&c, &[0.5, -0.1], 1).is_err());
    }

    #[test]
    fn row_matches_a_hand_solve_bit_for_bit() {
        let c = ctx();
        let rep = first_order_sweep(&c, &[0.8], 1).unwrap();
        let rec = c.solve_e(1, None).unwrap();
        assert_eq!(rep.rows[0].e.to_bits(), rec.e.to_bits());
        assert_eq!(rep.rows[0].lambda_f.to_bits(), (0.8 * rec.f_of_e).to_bits());
    }

    #[test]
    fn too_weak_couplings_become_status_rows() {
        let c = ctx();
        let rep = first_order_sweep(&c, &[0.8, 0.05], 1).unwrap();
        assert!(rep.rows[0].is_ok());
        assert_eq!(rep.rows[1].status, RowStatus::Resolution);
        assert_eq!(rep.gates.first_order_monotone, Some(false));
    }

    #[test]
    fn second_order_is_refused_for_r_two() {
        let sym = KineticSymbol::roton(2, 1.0, 0.5, 0.2).unwrap();
        let spec = GridSpec { e_min: 1e-3, angular: 8, ..GridSpec::default() };
        let c = BsContext::build(sym, Potential::gaussian(1.0, 1.0).unwrap(), &spec, 0.1).unwrap();
        assert!(matches!(second_order_sweep(&c, &[0.1], 1, &[1e-2, 5e-3, 2e-3]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_potential_counts_are_zero() {
        let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
        let spec = GridSpec { e_min: 1e-3, angular: 8, ..GridSpec::default() };
        let c = BsContext::build(sym, Potential::zero(), &spec, 0.5).unwrap();
        let rep = counting_check(&c).unwrap();
        assert_eq!((rep.direct_count, rep.surface_count), (0, 0));
    }

    #[test]
    fn no_near_kernel_gives_empty_report() {
        let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
        let spec = GridSpec { e_min: 1e-3, angular: 8, ..GridSpec::default() };
        let grid = crate::symbols::build_momentum_grid(&sym, &spec).unwrap();
        let v = Potential::gaussian(1.0, 0.3).unwrap();
        let quad = build_surface_quadrature(&sym, 0.0, 8).unwrap();
        let set = SurfaceOperatorSet::new(quad, &v, 3).unwrap().with_ws(&v, &sym, &[1e-2, 5e-3, 2.5e-3], &grid).unwrap();
        assert!(kernel_case_check(&set, 1e-10).unwrap().is_empty());
    }

    #[test]
    fn distance_is_a_normalised_quantity() {
        let c = ctx();
        let d = eigenvector_convergence(&c, &[0.8, 0.6], 1).unwrap();
        assert!(d.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
