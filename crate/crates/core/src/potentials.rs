//! Potentials with known radial Fourier transforms, unitary convention
//! `V^(p) = (2π)^{-n/2} ∫ e^{-ix·p} V(x) dx`.
//!
//! Sign convention: a term with amplitude `A > 0` is attractive,
//! `V = -A exp(-|x|^2 / (2 w^2))`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{bessel_j0, composite_gauss_legendre, gamma_half_integer, unit_sphere_area};
use crate::symbols::KineticSymbol;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianTerm {
    pub amplitude: f64,
    pub width: f64,
}

impl GaussianTerm {
    fn value(&self, r: f64) -> f64 {
        -self.amplitude * (-r * r / (2.0 * self.width * self.width)).exp()
    }

    fn fourier(&self, dim: usize, rho: f64) -> f64 {
        let w = self.width;
        -self.amplitude * w.powi(dim as i32) * (-w * w * rho * rho / 2.0).exp()
    }
}

/// Radial table of a real Fourier transform, linearly interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialTable {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return Err(Error::param("table needs at least two (radius, value) rows"));
        }
        if radii[0] < 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("table radii must be non-negative and strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("table values must be finite"));
        }
        Ok(RadialTable { radii, values })
    }

    /// Reads `p_radius,re_vhat[,im_vhat]`. A real radial potential has a
    /// real transform, so non-zero imaginary parts are rejected.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let with_im = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["p_radius", "re_vhat"] => false,
            ["p_radius", "re_vhat", "im_vhat"] => true,
            other => {
                return Err(Error::param(format!(
                    "table header must be p_radius,re_vhat[,im_vhat]; got {}",
                    other.join(",")
                )))
            }
        };
        let (mut radii, mut values) = (Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::param(format!("row {}: column {} is not a number", row + 2, k + 1)))
            };
            radii.push(num(0)?);
            values.push(num(1)?);
            if with_im && num(2)?.abs() > 1e-12 * (1.0 + values.last().unwrap().abs()) {
                return Err(Error::Unsupported(format!(
                    "row {}: complex transform values; only real radial potentials are supported",
                    row + 2
                )));
            }
        }
        Self::new(radii, values)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn eval(&self, rho: f64) -> Result<f64> {
        let (lo, hi) = (self.radii[0], *self.radii.last().unwrap());
        if !(rho >= lo && rho <= hi) {
            return Err(Error::OutOfRange { radius: rho, min: lo, max: hi });
        }
        let k = self.radii.partition_point(|&r| r <= rho).clamp(1, self.radii.len() - 1);
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let s = (rho - r0) / (r1 - r0);
        Ok(self.values[k - 1] * (1.0 - s) + self.values[k] * s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    Gaussian { amplitude: f64, width: f64 },
    /// Sum of Gaussians of either sign.
    GaussianMixture { terms: Vec<GaussianTerm> },
    Tabulated { table: RadialTable },
}

impl Potential {
    pub fn gaussian(amplitude: f64, width: f64) -> Result<Self> {
        let p = Potential::Gaussian { amplitude, width };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        Potential::Gaussian { amplitude: 0.0, width: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |t: &GaussianTerm| {
            if !(t.width > 0.0 && t.width.is_finite() && t.amplitude.is_finite()) {
                Err(Error::param(format!("gaussian needs finite amplitude and width > 0, got {t:?}")))
            } else {
                Ok(())
            }
        };
        match self {
            Potential::Gaussian { amplitude, width } => {
                check(&GaussianTerm { amplitude: *amplitude, width: *width })
            }
            Potential::GaussianMixture { terms } if terms.is_empty() => {
                Err(Error::param("gaussian mixture needs at least one term"))
            }
            Potential::GaussianMixture { terms } => terms.iter().try_for_each(check),
            Potential::Tabulated { .. } => Ok(()),
        }
    }

    fn terms(&self) -> Option<Vec<GaussianTerm>> {
        match self {
            Potential::Gaussian { amplitude, width } => {
                Some(vec![GaussianTerm { amplitude: *amplitude, width: *width }])
            }
            Potential::GaussianMixture { terms } => Some(terms.clone()),
            Potential::Tabulated { .. } => None,
        }
    }

    /// `(A, w)` when the potential is a single Gaussian.
    pub fn single_gaussian(&self) -> Option<GaussianTerm> {
        match self.terms()?.as_slice() {
            [t] => Some(*t),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Tabulated { table } => table.values.iter().all(|&v| v == 0.0),
            _ => self.terms().unwrap().iter().all(|t| t.amplitude == 0.0),
        }
    }

    /// `V = c V_old`.
    pub fn scaled(&self, c: f64) -> Potential {
        match self {
            Potential::Gaussian { amplitude, width } => Potential::Gaussian { amplitude: c * amplitude, width: *width },
            Potential::GaussianMixture { terms } => Potential::GaussianMixture {
                terms: terms.iter().map(|t| GaussianTerm { amplitude: c * t.amplitude, width: t.width }).collect(),
            },
            Potential::Tabulated { table } => Potential::Tabulated {
                table: RadialTable { radii: table.radii.clone(), values: table.values.iter().map(|v| c * v).collect() },
            },
        }
    }

    /// Radial Fourier transform `V^(|p|)` (real for real radial `V`).
    pub fn fourier_radial(&self, dim: usize, rho: f64) -> Result<f64> {
        match self {
            Potential::Tabulated { table } => table.eval(rho),
            _ => Ok(self.terms().unwrap().iter().map(|t| t.fourier(dim, rho)).sum()),
        }
    }

    pub fn fourier(&self, dim: usize, p: &[f64]) -> Result<Complex64> {
        let rho = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(Complex64::new(self.fourier_radial(dim, rho)?, 0.0))
    }

    /// Nyström kernel `(2π)^{-n/2} V^(p - q)` as a function of `|p - q|^2`.
    ///
    /// Tabulated transforms are clamped to zero beyond the table; callers
    /// that need the range check use [`Potential::check_kernel_range`].
    pub fn kernel(&self, dim: usize) -> impl Fn(f64) -> f64 + Sync + '_ {
        let norm = (2.0 * PI).powf(-(dim as f64) / 2.0);
        move |d2: f64| norm * self.fourier_radial(dim, d2.sqrt()).unwrap_or(0.0)
    }

    /// Errors unless every difference up to `max_distance` is tabulated.
    pub fn check_kernel_range(&self, max_distance: f64) -> Result<()> {
        if let Potential::Tabulated { table } = self {
            table.eval(0.0)?;
            table.eval(max_distance)?;
        }
        Ok(())
    }

    /// Position-space value at radius `r`.
    pub fn value(&self, dim: usize, r: f64) -> f64 {
        match self {
            Potential::Tabulated { table } => hankel_inverse(table, dim, r),
            _ => self.terms().unwrap().iter().map(|t| t.value(r)).sum(),
        }
    }

    /// Radius beyond which `V` is negligible for position-space work.
    pub fn support_radius(&self) -> f64 {
        match self {
            Potential::Tabulated { table } => {
                let h = table.radii.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                (PI / h).min(50.0)
            }
            _ => 9.0 * self.terms().unwrap().iter().map(|t| t.width).fold(0.0, f64::max),
        }
    }

    /// Whether `V` keeps one sign everywhere (checked on samples for
    /// mixtures and tables).
    pub fn sign_definite(&self, dim: usize) -> bool {
        if let Some(terms) = self.terms() {
            if terms.iter().all(|t| t.amplitude >= 0.0) || terms.iter().all(|t| t.amplitude <= 0.0) {
                return true;
            }
        }
        let xs = self.radial_samples();
        let vals: Vec<f64> = xs.iter().map(|&x| self.value(dim, x)).collect();
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-10 * scale;
        vals.iter().all(|&v| v <= tol) || vals.iter().all(|&v| v >= -tol)
    }

    /// `V <= 0` everywhere.
    pub fn is_attractive(&self, dim: usize) -> bool {
        if let Some(terms) = self.terms() {
            if terms.iter().all(|t| t.amplitude >= 0.0) {
                return true;
            }
        }
        self.sign_definite(dim) && self.value(dim, 0.0) <= 0.0
    }

    fn radial_samples(&self) -> Vec<f64> {
        let r = self.support_radius();
        (0..400).map(|k| r * k as f64 / 400.0).collect()
    }
}

/// Inverse radial transform of a piecewise-linear table.
fn hankel_inverse(table: &RadialTable, dim: usize, r: f64) -> f64 {
    let (p, w) = composite_gauss_legendre(&table.radii, 8);
    p.iter()
        .zip(&w)
        .map(|(&rho, &wt)| {
            let v = table.eval(rho).unwrap_or(0.0);
            match dim {
                2 => wt * v * bessel_j0(rho * r) * rho,
                _ => {
                    let x = rho * r;
                    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                    wt * v * sinc * rho * rho * unit_sphere_area(dim) * (2.0 * PI).powf(-(dim as f64) / 2.0)
                }
            }
        })
        .sum()
}

/// Integrability data demanded of `V` by the weak-coupling theorem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub l1_norm: f64,
    /// `(q, ||V||_q)` for the extra integrability exponent, if one is needed.
    pub extra_norm: Option<(f64, f64)>,
    pub kappa: u32,
    pub moment: f64,
    /// The `ε` used when `n = s`.
    pub epsilon: f64,
    pub passes: bool,
}

/// Moment exponent: 1 for radial symbols in two dimensions, 0 for radial
/// symbols otherwise, 2 for non-radial symbols.
pub fn kappa_for(dim: usize, radial: bool) -> u32 {
    match (radial, dim) {
        (false, _) => 2,
        (true, 2) => 1,
        (true, _) => 0,
    }
}

pub const EXTRA_NORM_EPSILON: f64 = 0.1;

pub fn hypothesis_report(v: &Potential, sym: &KineticSymbol) -> HypothesisReport {
    hypothesis_report_with(v, sym.dim, sym.growth.s, true)
}

pub fn hypothesis_report_with(v: &Potential, dim: usize, s: f64, radial: bool) -> HypothesisReport {
    let kappa = kappa_for(dim, radial);
    let n = dim as f64;
    let q_extra = if n > s + 1e-12 {
        Some(n / s)
    } else if (n - s).abs() <= 1e-12 {
        Some(1.0 + EXTRA_NORM_EPSILON)
    } else {
        None
    };
    let (l1, extra, moment) = match v.single_gaussian() {
        Some(t) => {
            let a = t.amplitude.abs();
            let w = t.width;
            let lq = |q: f64| a * (2.0 * PI * w * w / q).powf(n / (2.0 * q));
            let l1 = lq(1.0);
            let sigma2 = 2.0 * w * w;
            let k = kappa as f64;
            let ez = (2.0 * sigma2).powf(k / 2.0) * gamma_half_integer((n + k) / 2.0) / gamma_half_integer(n / 2.0);
            (l1, q_extra.map(|q| (q, lq(q))), l1 * l1 * ez)
        }
        None => {
            let prof = RadialProfileSamples::new(v, dim);
            (prof.lq(1.0), q_extra.map(|q| (q, prof.lq(q))), prof.moment(kappa))
        }
    };
    let finite = l1.is_finite() && moment.is_finite() && extra.map_or(true, |(_, x)| x.is_finite());
    HypothesisReport { l1_norm: l1, extra_norm: extra, kappa, moment, epsilon: EXTRA_NORM_EPSILON, passes: finite }
}

/// `|V|` on a radial Gauss-Legendre grid, for the numeric norms.
pub(crate) struct RadialProfileSamples {
    dim: usize,
    r: Vec<f64>,
    w: Vec<f64>,
    abs_v: Vec<f64>,
}

impl RadialProfileSamples {
    pub(crate) fn new(v: &Potential, dim: usize) -> Self {
        let rmax = v.support_radius();
        let panels = 60;
        let breaks: Vec<f64> = (0..=panels).map(|k| rmax * k as f64 / panels as f64).collect();
        let (r, w) = composite_gauss_legendre(&breaks, 8);
        let abs_v = r.iter().map(|&x| v.value(dim, x).abs()).collect();
        RadialProfileSamples { dim, r, w, abs_v }
    }

    fn radial_integral<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let area = unit_sphere_area(self.dim);
        self.r
            .iter()
            .zip(&self.w)
            .zip(&self.abs_v)
            .map(|((&r, &w), &v)| area * w * r.powi(self.dim as i32 - 1) * f(r, v))
            .sum()
    }

    pub(crate) fn lq(&self, q: f64) -> f64 {
        self.radial_integral(|_, v| v.powf(q)).powf(1.0 / q)
    }

    pub(crate) fn moment(&self, kappa: u32) -> f64 {
        let l1 = self.lq(1.0);
        match kappa {
            0 => l1 * l1,
            // the cross term x·y integrates to zero for radial V
            2 => 2.0 * l1 * self.radial_integral(|r, v| v * r * r),
            _ => self.moment_kappa1(),
        }
    }

    /// `∬ |V(x)| |x - y| |V(y)|` via the angular average of `|x - y|`.
    fn moment_kappa1(&self) -> f64 {
        let (th, tw) = composite_gauss_legendre(&(0..=32).map(|k| PI * k as f64 / 32.0).collect::<Vec<_>>(), 8);
        let mean_dist = |a: f64, b: f64| -> f64 {
            match self.dim {
                2 => th
                    .iter()
                    .zip(&tw)
                    .map(|(&t, &w)| w * (a * a + b * b - 2.0 * a * b * t.cos()).max(0.0).sqrt())
                    .sum::<f64>()
                    / PI,
                _ => th
                    .iter()
                    .zip(&tw)
                    .map(|(&t, &w)| w * t.sin() * (a * a + b * b - 2.0 * a * b * t.cos()).max(0.0).sqrt())
                    .sum::<f64>()
                    / 2.0,
            }
        };
        let area = unit_sphere_area(self.dim);
        let m = self.dim as i32 - 1;
        let mut total = 0.0;
        for i in 0..self.r.len() {
            let wi = area * self.w[i] * self.r[i].powi(m) * self.abs_v[i];
            for j in 0..self.r.len() {
                let wj = area * self.w[j] * self.r[j].powi(m) * self.abs_v[j];
                total += wi * wj * mean_dist(self.r[i], self.r[j]);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;

    #[test]
    fn gaussian_transform_examples() {
        let g = Potential::gaussian(1.0, 1.0).unwrap();
        assert!((g.fourier_radial(3, 0.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((g.fourier_radial(3, 2f64.sqrt()).unwrap() + (-1.0f64).exp()).abs() < 1e-15);
        let g2 = Potential::gaussian(2.0, 0.5).unwrap();
        assert!((g2.fourier_radial(2, 0.0).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_transform_matches_numeric_hankel_transform() {
        // 2-D radial transform: V^(p) = ∫ V(r) J0(p r) r dr
        let g = Potential::gaussian(1.3, 0.8).unwrap();
        for p in [0.0, 0.4, 1.1, 2.5] {
            let num = integrate_adaptive(|r| g.value(2, r) * bessel_j0(p * r) * r, 0.0, 12.0, 1e-13);
            assert!((num - g.fourier_radial(2, p).unwrap()).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn table_interpolates_and_checks_range() {
        let t = RadialTable::new(vec![0.0, 1.0, 2.0], vec![-1.0, -0.5, 0.0]).unwrap();
        assert_eq!(t.eval(0.5).unwrap(), -0.75);
        assert_eq!(t.eval(2.0).unwrap(), 0.0);
        assert!(matches!(t.eval(2.5), Err(Error::OutOfRange { .. })));
        let csv = "p_radius,re_vhat,im_vhat\n0,1,0\n1,2,0.5\n";
        assert!(matches!(RadialTable::from_csv_reader(csv.as_bytes()), Err(Error::Unsupported(_))));
        assert!(RadialTable::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn tabulated_gaussian_inverts_to_position_profile() {
        let g = Potential::gaussian(1.0, 1.0).unwrap();
        for dim in [2, 3] {
            let radii: Vec<f64> = (0..=800).map(|k| 10.0 * k as f64 / 800.0).collect();
            let values = radii.iter().map(|&p| g.fourier_radial(dim, p).unwrap()).collect();
            let tab = Potential::Tabulated { table: RadialTable::new(radii, values).unwrap() };
            for r in [0.0, 0.7, 1.5] {
                assert!((tab.value(dim, r) - g.value(dim, r)).abs() < 1e-3, "dim {dim} r {r}");
            }
            assert!(tab.is_attractive(dim));
        }
    }

    #[test]
    fn l1_norm_example() {
        let sym = KineticSymbol::bcs(3, 1.0, 1.0).unwrap();
        let rep = hypothesis_report(&Potential::gaussian(1.0, 1.0).unwrap(), &sym);
        assert!((rep.l1_norm - (2.0 * PI).powf(1.5)).abs() < 1e-12);
        assert_eq!(rep.kappa, 0);
        assert!(rep.passes);
    }

    #[test]
    fn closed_forms_match_numeric_norms() {
        let t = GaussianTerm { amplitude: 1.7, width: 0.9 };
        // a two-term mixture of identical Gaussians forces the numeric path
        let half = GaussianTerm { amplitude: 0.85, width: 0.9 };
        let mix = Potential::GaussianMixture { terms: vec![half, half] };
        let single = Potential::Gaussian { amplitude: t.amplitude, width: t.width };
        for (dim, s) in [(2usize, 2.0), (3, 2.0), (2, 1.0)] {
            for radial in [true, false] {
                let a = hypothesis_report_with(&single, dim, s, radial);
                let b = hypothesis_report_with(&mix, dim, s, radial);
                assert_eq!(a.kappa, b.kappa);
                assert!((a.l1_norm - b.l1_norm).abs() < 1e-9 * a.l1_norm);
                assert!((a.moment - b.moment).abs() < 1e-5 * a.moment, "{dim} {radial}: {} {}", a.moment, b.moment);
                match (a.extra_norm, b.extra_norm) {
                    (Some((qa, xa)), Some((qb, xb))) => {
                        assert_eq!(qa, qb);
                        assert!((xa - xb).abs() < 1e-9 * xa);
                    }
                    (None, None) => {}
                    other => panic!("{other:?}"),
                }
            }
        }
    }

    #[test]
    fn kappa_and_extra_norm_selection() {
        let g = Potential::gaussian(1.0, 1.0).unwrap();
        let bcs2 = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
        let rep = hypothesis_report(&g, &bcs2);
        assert_eq!(rep.kappa, 1);
        assert_eq!(rep.extra_norm.unwrap().0, 1.0 + EXTRA_NORM_EPSILON);
        let bcs3 = KineticSymbol::bcs(3, 1.0, 1.0).unwrap();
        assert_eq!(hypothesis_report(&g, &bcs3).extra_norm.unwrap().0, 1.5);
        let steep = KineticSymbol::bcs(3, 1.0, 2.0).unwrap();
        assert!(hypothesis_report(&g, &steep).extra_norm.is_none());
        assert_eq!(kappa_for(3, false), 2);
    }

    #[test]
    fn zero_potential_report() {
        let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
        let rep = hypothesis_report(&Potential::zero(), &sym);
        assert_eq!(rep.l1_norm, 0.0);
        assert_eq!(rep.moment, 0.0);
        assert!(rep.passes);
    }

    #[test]
    fn mixture_sign() {
        let mix = Potential::GaussianMixture {
            terms: vec![GaussianTerm { amplitude: 1.0, width: 1.0 }, GaussianTerm { amplitude: -3.0, width: 0.3 }],
        };
        assert!(!mix.sign_definite(2));
        assert!(!mix.is_attractive(2));
    }
}
