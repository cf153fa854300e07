//! Adaptive Gauss–Kronrod quadrature with substitution helpers for
//! integrable endpoint singularities and semi-infinite ranges.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

// 15-point Kronrod abscissae on [-1, 1] (positive half; symmetric).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];
// Kronrod weights matching XGK.
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
// Embedded 7-point Gauss weights (for XGK indices 1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (f1, f2) = if i == 7 {
            let fc = f(c);
            (fc, 0.0)
        } else {
            (f(c - h * x), f(c + h * x))
        };
        let fsum = if i == 7 { f1 } else { f1 + f2 };
        kronrod += wk * fsum;
        if i % 2 == 1 || i == 7 {
            gauss += WG[i / 2] * fsum;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h.abs())
}

#[derive(Debug)]
struct Segment {
    err: f64,
    val: f64,
    a: f64,
    b: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Quad {
    pub value: f64,
    pub abs_error: f64,
    pub segments: usize,
}

/// Integrates `f` over `[a, b]`, subdividing the worst segment until the
/// estimated error meets `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    integrate_with_limit(f, a, b, rel_tol, abs_tol, 4000)
}

pub fn integrate_with_limit<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, abs_error: 0.0, segments: 1 });
    }
    let (val, err) = gk15(&f, a, b);
    if !val.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand between {a} and {b}"
        )));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { err, val, a, b });
    let mut total_val = val;
    let mut total_err = err;
    let mut count = 1usize;
    while total_err > abs_tol.max(rel_tol * total_val.abs()) {
        if count >= max_segments {
            return Err(Error::Numerical(format!(
                "quadrature did not converge: {count} segments, value {total_val:.6e}, \
                 error {total_err:.3e}, target {:.3e}",
                abs_tol.max(rel_tol * total_val.abs())
            )));
        }
        let worst = heap.pop().expect("heap nonempty while error above target");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval at floating-point resolution; accept its estimate
            total_err = total_err.min(abs_tol.max(rel_tol * total_val.abs()));
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite integrand between {} and {}",
                worst.a, worst.b
            )));
        }
        total_val += v1 + v2 - worst.val;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment { err: e1, val: v1, a: worst.a, b: mid });
        heap.push(Segment { err: e2, val: v2, a: mid, b: worst.b });
        count += 1;
    }
    Ok(Quad { value: total_val, abs_error: total_err, segments: count })
}

/// Integrates `g(s) * (s - a)^(-p)` over `[a, b]` for `p < 1` by the
/// substitution `w = (s - a)^(1 - p)`, which removes the singularity.
pub fn integrate_power_lower<F: Fn(f64) -> f64>(
    g: F,
    a: f64,
    b: f64,
    p: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    debug_assert!(p < 1.0);
    let q = 1.0 - p;
    let w_max = (b - a).powf(q);
    integrate(
        |w| g(a + w.powf(1.0 / q)) / q,
        0.0,
        w_max,
        rel_tol,
        abs_tol,
    )
}

/// Integrates `g(s) * (b - s)^(-p)` over `[a, b]` for `p < 1`.
pub fn integrate_power_upper<F: Fn(f64) -> f64>(
    g: F,
    a: f64,
    b: f64,
    p: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    debug_assert!(p < 1.0);
    let q = 1.0 - p;
    let w_max = (b - a).powf(q);
    integrate(
        |w| g(b - w.powf(1.0 / q)) / q,
        0.0,
        w_max,
        rel_tol,
        abs_tol,
    )
}

/// Integrates `f` over `[a, ∞)` via `s = a + t/(1-t)`. The integrand must
/// decay fast enough for the transformed endpoint to be integrable.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    integrate(
        |t| {
            let om = 1.0 - t;
            f(a + t / om) / (om * om)
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

/// Fixed-order Gauss–Legendre rule on [-1, 1]; returns (nodes, weights).
/// Supports the small orders used by the angular quadratures.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on Legendre polynomials, good to ~1e-15.
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12, 0.0).unwrap();
        assert_relative_eq!(q.value, 8.0, max_relative = 1e-13);
    }

    #[test]
    fn oscillatory_integrand() {
        let q = integrate(|x| (10.0 * x).sin(), 0.0, std::f64::consts::PI, 1e-12, 1e-14).unwrap();
        // ∫ sin(10x) dx over [0, π] = (1 - cos(10π))/10 = 0
        assert!(q.value.abs() < 1e-12, "value {}", q.value);
    }

    #[test]
    fn endpoint_singularity_lower() {
        // ∫_0^1 s^{-1/2} ds = 2
        let q = integrate_power_lower(|_| 1.0, 0.0, 1.0, 0.5, 1e-12, 0.0).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-12);
        // beta integrand: ∫_0^1 s^{-1/2} (1+s)^{-1} ds = π/2
        let q = integrate_power_lower(|s| 1.0 / (1.0 + s), 0.0, 1.0, 0.5, 1e-12, 0.0).unwrap();
        assert_relative_eq!(q.value, std::f64::consts::PI / 2.0, max_relative = 1e-11);
    }

    #[test]
    fn endpoint_singularity_upper() {
        // ∫_0^1 (1-s)^{-1/3} ds = 3/2
        let q = integrate_power_upper(|_| 1.0, 0.0, 1.0, 1.0 / 3.0, 1e-12, 0.0).unwrap();
        assert_relative_eq!(q.value, 1.5, max_relative = 1e-12);
    }

    #[test]
    fn semi_infinite_tail() {
        // ∫_1^∞ s^{-2} ds = 1
        let q = integrate_to_inf(|s| 1.0 / (s * s), 1.0, 1e-12, 0.0).unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn divergent_integrand_errors() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10, 0.0);
        assert!(r.is_err());
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(8);
        // exact for degree <= 15: ∫_{-1}^{1} x^14 dx = 2/15
        let s: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(14)).sum();
        assert_relative_eq!(s, 2.0 / 15.0, max_relative = 1e-12);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
    }
}
