//! One-dimensional quadrature rules shared by the surface, grid and
//! diagnostic code.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| half * v).collect(),
    )
}

/// Composite Gauss-Legendre rule over the given breakpoints.
pub fn composite_gauss_legendre(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(order * breaks.len());
    let mut ws = Vec::with_capacity(order * breaks.len());
    for pair in breaks.windows(2) {
        let (x, w) = gauss_legendre_on(order, pair[0], pair[1]);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

/// Adaptive Gauss-Legendre integration on a finite interval.
///
/// Each panel is accepted when the 10- and 20-point rules agree to
/// `tol` relative to the running magnitude; otherwise it is bisected.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (x10, w10) = gauss_legendre(10);
    let (x20, w20) = gauss_legendre(20);
    let rule = |lo: f64, hi: f64, x: &[f64], w: &[f64]| {
        let h = 0.5 * (hi - lo);
        let m = 0.5 * (hi + lo);
        h * x.iter().zip(w).map(|(&t, &wt)| wt * f(m + h * t)).sum::<f64>()
    };
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let mut scale = rule(a, b, &x20, &w20).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = rule(lo, hi, &x10, &w10);
        let fine = rule(lo, hi, &x20, &w20);
        scale = scale.max(fine.abs());
        if (fine - coarse).abs() <= tol * scale.max(f64::MIN_POSITIVE) || depth >= 48 {
            total += fine;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    total
}

/// Adaptive integration over [a, inf) via the map x = a + s / (1 - s).
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    integrate_adaptive(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let d = 1.0 - s;
            f(a + s / d) / (d * d)
        },
        0.0,
        1.0,
        tol,
    )
}

/// Bessel function J_0 from its periodic integral representation.
///
/// The trapezoid rule is spectrally accurate for periodic integrands, so
/// a node count a little above |z| gives full double precision.
pub fn bessel_j0(z: f64) -> f64 {
    let n = (z.abs() as usize + 40).max(48);
    let h = PI / n as f64;
    let mut sum = 0.0;
    for k in 0..n {
        let th = (k as f64 + 0.5) * h;
        sum += (z * th.sin()).cos();
    }
    sum / n as f64
}

/// Gamma function at positive integer or half-integer arguments.
pub fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!(
        (2.0 * x - twice).abs() < 1e-12 && twice >= 1.0,
        "gamma_half_integer needs x in {{1/2, 1, 3/2, ...}}"
    );
    let mut v = if twice as i64 % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut k = if twice as i64 % 2 == 0 { 1.0 } else { 0.5 };
    while k < x - 1e-12 {
        v *= k;
        k += 1.0;
    }
    v
}

/// Surface measure of the unit sphere S^{n-1} in R^n.
pub fn unit_sphere_area(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    2.0 * PI.powf(h) / gamma_half_integer(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for order in [1usize, 2, 5, 8, 17, 40] {
            let (x, w) = gauss_legendre(order);
            for deg in 0..(2 * order) {
                let num: f64 = x.iter().zip(&w).map(|(&t, &v)| v * t.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "order {order} deg {deg}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let e = 1e-6;
        let v = integrate_adaptive(|t| 1.0 / (t + e), 0.0, 1.0, 1e-12);
        let exact = ((1.0 + e) / e).ln();
        assert!((v - exact).abs() / exact < 1e-10);
        let g = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1e-12);
        assert!((g - PI.sqrt() / 2.0).abs() < 1e-11);
    }

    #[test]
    fn bessel_and_gamma_reference_values() {
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(10.0) - (-0.245_935_764_451_348_3)).abs() < 1e-14);
        assert!((gamma_half_integer(0.5) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer(4.0) - 6.0).abs() < 1e-13);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
