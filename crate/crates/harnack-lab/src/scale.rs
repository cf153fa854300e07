//! Radial scaling functions `g` comparable to a Green function: doubling and
//! decay validation, continuity regularization, and monotone inversion.

use crate::error::{Error, Result};
use serde::Serialize;
use std::sync::Arc;

/// Relative tolerance of [`GreenScale::invert`].
pub const INVERT_REL_TOL: f64 = 1e-12;
const INVERT_MAX_ITER: usize = 200;

/// Default number of log-spaced radii used by grid checks.
pub const DEFAULT_GRID: usize = 256;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A strictly positive decreasing radial scale `g` on `(0, r0)` together with
/// its comparison constants: doubling `g(r/2) <= c_d * g(r)`, upper decay
/// `g(r) <= eta0 * g(alpha0 * r)`, and the kernel comparison factor `c`.
#[derive(Clone)]
pub struct GreenScale {
    eval: Evaluator,
    /// Upper radius of validity; `f64::INFINITY` when unbounded.
    pub r0: f64,
    /// Doubling constant, > 1.
    pub c_d: f64,
    /// Decay ratio in (0, 1).
    pub alpha0: f64,
    /// Decay factor in (0, 1).
    pub eta0: f64,
    /// Kernel comparison constant, >= 1.
    pub c: f64,
    continuous: bool,
}

impl std::fmt::Debug for GreenScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenScale")
            .field("r0", &self.r0)
            .field("c_d", &self.c_d)
            .field("alpha0", &self.alpha0)
            .field("eta0", &self.eta0)
            .field("c", &self.c)
            .field("continuous", &self.continuous)
            .finish()
    }
}

/// Which invariant a grid check found violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScaleInvariant {
    Decreasing,
    Doubling,
    Decay,
    BlowUp,
}

/// One violated (invariant, radius) instance.
#[derive(Clone, Debug, Serialize)]
pub struct ScaleViolation {
    pub invariant: ScaleInvariant,
    pub radius: f64,
    pub detail: String,
}

/// Outcome of [`GreenScale::verify`]; empty means all invariants hold on the grid.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<ScaleViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl GreenScale {
    /// Builds a scale from an arbitrary evaluator. `continuous` declares
    /// whether the evaluator is continuous on `(0, r0)`.
    pub fn from_fn<F>(eval: F, r0: f64, c_d: f64, alpha0: f64, eta0: f64, c: f64, continuous: bool) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(c_d > 1.0) {
            return Err(Error::InvalidInput(format!("doubling constant must exceed 1, got {c_d}")));
        }
        if !(alpha0 > 0.0 && alpha0 < 1.0) {
            return Err(Error::InvalidInput(format!("decay ratio must lie in (0,1), got {alpha0}")));
        }
        if !(eta0 > 0.0 && eta0 < 1.0) {
            return Err(Error::InvalidInput(format!("decay factor must lie in (0,1), got {eta0}")));
        }
        if !(c >= 1.0) {
            return Err(Error::InvalidInput(format!("comparison constant must be >= 1, got {c}")));
        }
        if !(r0 > 0.0) {
            return Err(Error::InvalidInput(format!("upper radius must be positive, got {r0}")));
        }
        Ok(GreenScale { eval: Arc::new(eval), r0, c_d, alpha0, eta0, c, continuous })
    }

    /// Power law `g(r) = amplitude * r^(-p)` with its sharp constants
    /// `c_d = 2^p`, `eta0 = 2^(-p)`, `alpha0 = 1/2`.
    pub fn power_law(p: f64, amplitude: f64) -> Result<Self> {
        if !(p > 0.0) {
            return Err(Error::InvalidInput(format!("power-law exponent must be positive, got {p}")));
        }
        if !(amplitude > 0.0) {
            return Err(Error::InvalidInput(format!("amplitude must be positive, got {amplitude}")));
        }
        Self::from_fn(
            move |r| amplitude * r.powf(-p),
            f64::INFINITY,
            2f64.powf(p),
            0.5,
            2f64.powf(-p),
            1.0,
            true,
        )
    }

    /// Loads a tabulated scale from two-column text (radius, value): strictly
    /// increasing radii, strictly positive non-increasing values. The scale
    /// interpolates linearly between samples and is clamped outside them;
    /// `r0` is the last tabulated radius.
    pub fn from_table_str(text: &str, c_d: f64, alpha0: f64, eta0: f64, c: f64) -> Result<Self> {
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let r: f64 = parts
                .next()
                .ok_or(Error::Parse { line, message: "missing radius column".into() })?
                .parse()
                .map_err(|e| Error::Parse { line, message: format!("bad radius: {e}") })?;
            let v: f64 = parts
                .next()
                .ok_or(Error::Parse { line, message: "missing value column".into() })?
                .parse()
                .map_err(|e| Error::Parse { line, message: format!("bad value: {e}") })?;
            if parts.next().is_some() {
                return Err(Error::Parse { line, message: "expected exactly two columns".into() });
            }
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Parse { line, message: format!("radius must be positive and finite, got {r}") });
            }
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parse { line, message: format!("value must be positive and finite, got {v}") });
            }
            if let Some(&prev) = radii.last() {
                if r <= prev {
                    return Err(Error::Parse { line, message: format!("radii must be strictly increasing ({r} after {prev})") });
                }
            }
            if let Some(&prev) = values.last() {
                if v > prev {
                    return Err(Error::Parse { line, message: format!("values must be decreasing ({v} after {prev})") });
                }
            }
            radii.push(r);
            values.push(v);
        }
        if radii.len() < 2 {
            return Err(Error::InvalidInput("tabulated scale needs at least two samples".into()));
        }
        let r_last = *radii.last().unwrap();
        let eval = move |r: f64| -> f64 {
            match radii.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
                Ok(i) => values[i],
                Err(0) => values[0],
                Err(i) if i == radii.len() => *values.last().unwrap(),
                Err(i) => {
                    let t = (r - radii[i - 1]) / (radii[i] - radii[i - 1]);
                    values[i - 1] + t * (values[i] - values[i - 1])
                }
            }
        };
        Self::from_fn(eval, r_last, c_d, alpha0, eta0, c, true)
    }

    /// Loads a tabulated scale from a file; see [`GreenScale::from_table_str`].
    pub fn from_table_file(path: &std::path::Path, c_d: f64, alpha0: f64, eta0: f64, c: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scale file {}: {e}", path.display())))?;
        Self::from_table_str(&text, c_d, alpha0, eta0, c)
    }

    /// Evaluates `g(r)`; callers must keep `r` in `(0, r0)`.
    pub fn g(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    fn checked_g(&self, r: f64) -> Result<f64> {
        let v = self.g(r);
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "scale must be finite and positive at positive radii; g({r}) = {v}"
            )));
        }
        Ok(v)
    }

    /// Default verification grid: log-spaced radii inside `(0, r0)`.
    pub fn default_grid(&self) -> Vec<f64> {
        let hi = if self.r0.is_finite() { self.r0 * (1.0 - 1e-9) } else { 1e3 };
        let lo = if self.r0.is_finite() { self.r0 * 2f64.powi(-40) } else { 1e-6 };
        log_grid(lo, hi, DEFAULT_GRID)
    }

    /// Checks the four scale invariants on the given grid, returning one
    /// entry per violated (invariant, radius) instance.
    pub fn verify(&self, grid: &[f64]) -> Result<ValidationReport> {
        if grid.is_empty() {
            return Err(Error::InvalidInput("verification grid must be nonempty".into()));
        }
        let mut sorted = grid.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &r in &sorted {
            if !(r > 0.0 && r < self.r0) {
                return Err(Error::InvalidInput(format!(
                    "grid radius {r} outside (0, {})", self.r0
                )));
            }
        }
        let mut report = ValidationReport::default();
        let mut prev: Option<(f64, f64)> = None;
        for &r in &sorted {
            let v = self.checked_g(r)?;
            if let Some((rp, vp)) = prev {
                if vp < v {
                    report.violations.push(ScaleViolation {
                        invariant: ScaleInvariant::Decreasing,
                        radius: r,
                        detail: format!("g({rp}) = {vp} < g({r}) = {v}"),
                    });
                }
            }
            prev = Some((r, v));
            let half = self.checked_g(r / 2.0)?;
            if half > self.c_d * v * (1.0 + 1e-12) {
                report.violations.push(ScaleViolation {
                    invariant: ScaleInvariant::Doubling,
                    radius: r,
                    detail: format!("g(r/2) = {half} > c_d * g(r) = {}", self.c_d * v),
                });
            }
            let shrunk = self.checked_g(self.alpha0 * r)?;
            if v > self.eta0 * shrunk * (1.0 + 1e-12) {
                report.violations.push(ScaleViolation {
                    invariant: ScaleInvariant::Decay,
                    radius: r,
                    detail: format!("g(r) = {v} > eta0 * g(alpha0 r) = {}", self.eta0 * shrunk),
                });
            }
        }
        // Blow-up at 0: walk the decay chain down from the largest sampled
        // radius; each step must gain a factor 1/eta0, which forces
        // g -> infinity along alpha0-geometric radii.
        let r_top = *sorted.last().unwrap();
        let r_min = sorted[0];
        let mut r_chain = r_top;
        let mut bound = self.checked_g(r_top)?;
        while r_chain * self.alpha0 >= r_min.min(r_top * self.alpha0.powi(30)) && r_chain * self.alpha0 > 0.0 {
            r_chain *= self.alpha0;
            bound /= self.eta0;
            let v = self.checked_g(r_chain)?;
            if v < bound * (1.0 - 1e-12) {
                report.violations.push(ScaleViolation {
                    invariant: ScaleInvariant::BlowUp,
                    radius: r_chain,
                    detail: format!("g({r_chain}) = {v} below the decay-chain bound {bound}"),
                });
            }
            if r_chain < r_min {
                break;
            }
        }
        Ok(report)
    }

    /// Smallest `m >= 1` with `eta0^m <= eta`, returned as `alpha = alpha0^m`;
    /// guarantees `g(r) <= eta * g(alpha * r)` on `(0, r0)`.
    pub fn decay_alpha(&self, eta: f64) -> Result<f64> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidInput(format!("eta must lie in (0,1), got {eta}")));
        }
        let mut m = 1u32;
        let mut pow = self.eta0;
        while pow > eta {
            m += 1;
            pow *= self.eta0;
            if m > 4000 {
                return Err(Error::Numerical("decay_alpha did not terminate".into()));
            }
        }
        Ok(self.alpha0.powi(m as i32))
    }

    /// Continuity regularization: equals `g` on the dyadic grid `{2^n}`
    /// (or `{2^-n * r0}` when `r0` is finite), affine in between. The result
    /// is pinched between `g / c_d` and `c_d * g`.
    pub fn regularize(&self) -> GreenScale {
        let inner = self.eval.clone();
        let r0 = self.r0;
        let eval = move |r: f64| -> f64 {
            let (lo, hi) = if r0.is_finite() {
                // grid {2^-n * r0}: bracket r by consecutive grid points
                let n = (r0 / r).log2().ceil().max(1.0);
                let lo = r0 * 2f64.powf(-n);
                (lo, (lo * 2.0).min(r0 * (1.0 - 1e-12)))
            } else {
                let n = r.log2().floor();
                let lo = 2f64.powf(n);
                (lo, lo * 2.0)
            };
            if hi <= lo {
                return inner(lo);
            }
            let glo = inner(lo);
            let ghi = inner(hi);
            let t = ((r - lo) / (hi - lo)).clamp(0.0, 1.0);
            glo + t * (ghi - glo)
        };
        GreenScale {
            eval: Arc::new(eval),
            r0: self.r0,
            c_d: self.c_d,
            alpha0: self.alpha0,
            eta0: self.eta0,
            c: self.c,
            continuous: true,
        }
    }

    /// Solves `g(r) = v` by monotone bisection to relative tolerance
    /// [`INVERT_REL_TOL`] on the value. Requires a continuous scale.
    pub fn invert(&self, v: f64) -> Result<f64> {
        if !self.continuous {
            return Err(Error::InvalidInput(
                "invert requires a continuous scale; call regularize() first".into(),
            ));
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("target value must be positive and finite, got {v}")));
        }
        // bracket v by geometric expansion
        let mut lo = if self.r0.is_finite() { self.r0 * 0.25 } else { 1.0 };
        let mut hi = lo;
        let r_cap = if self.r0.is_finite() { self.r0 * (1.0 - 1e-12) } else { f64::MAX / 4.0 };
        let mut g_lo = self.checked_g(lo)?;
        let mut g_hi = g_lo;
        let mut steps = 0;
        while g_lo < v {
            lo /= 2.0;
            g_lo = self.checked_g(lo)?;
            steps += 1;
            if steps > 2100 || lo < f64::MIN_POSITIVE * 1e3 {
                return Err(Error::OutOfRange { what: "scale value", value: v, lo: g_hi, hi: g_lo });
            }
        }
        steps = 0;
        while g_hi > v {
            if hi >= r_cap {
                return Err(Error::OutOfRange { what: "scale value", value: v, lo: g_hi, hi: g_lo });
            }
            hi = (hi * 2.0).min(r_cap);
            g_hi = self.checked_g(hi)?;
            steps += 1;
            if steps > 2100 {
                return Err(Error::OutOfRange { what: "scale value", value: v, lo: g_hi, hi: g_lo });
            }
        }
        // monotone bisection on [lo, hi] with g(lo) >= v >= g(hi)
        let mut best = lo;
        let mut best_err = (g_lo - v).abs();
        for _ in 0..INVERT_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            let gm = self.checked_g(mid)?;
            let err = (gm - v).abs();
            if err < best_err {
                best = mid;
                best_err = err;
            }
            if err <= INVERT_REL_TOL * v {
                return Ok(mid);
            }
            if gm > v {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= f64::EPSILON * hi {
                break;
            }
        }
        if best_err <= 1e-9 * v {
            return Ok(best);
        }
        Err(Error::Numerical(format!(
            "bisection stalled solving g(r) = {v}: best residual {best_err:.3e}"
        )))
    }

    /// Measured doubling ratio `sup g(r/2) / g(r)` over a grid.
    pub fn measured_doubling(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&r| self.g(r / 2.0) / self.g(r))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `n` log-spaced radii in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let l0 = lo.ln();
    let l1 = hi.ln();
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dyadic_grid() -> Vec<f64> {
        (1..=20).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn power_law_passes_verification() {
        // g(r) = r^-2 with sharp constants: ratios are exactly 4 and 1/4
        let s = GreenScale::power_law(2.0, 1.0).unwrap();
        assert_eq!(s.c_d, 4.0);
        assert_eq!(s.eta0, 0.25);
        let report = s.verify(&dyadic_grid()).unwrap();
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn newtonian_scale_passes_verification() {
        // g(r) = r^-1 with c_d = 2, eta0 = 1/2
        let s = GreenScale::power_law(1.0, 1.0).unwrap();
        assert_eq!(s.c_d, 2.0);
        let report = s.verify(&log_grid(1e-8, 1e2, 128)).unwrap();
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn constant_scale_fails_decay_everywhere() {
        let s = GreenScale::from_fn(|_| 1.0, f64::INFINITY, 1.5, 0.5, 0.5, 1.0, true).unwrap();
        let grid = dyadic_grid();
        let report = s.verify(&grid).unwrap();
        let decay_count = report
            .violations
            .iter()
            .filter(|v| v.invariant == ScaleInvariant::Decay)
            .count();
        assert_eq!(decay_count, grid.len(), "decay must fail at every grid radius");
        // the blow-up chain must fail too: a constant never exceeds any bound
        assert!(report.violations.iter().any(|v| v.invariant == ScaleInvariant::BlowUp));
    }

    #[test]
    fn non_finite_value_is_rejected() {
        let s = GreenScale::from_fn(
            |r| if r < 0.5 { f64::INFINITY } else { 1.0 / r },
            f64::INFINITY,
            2.0,
            0.5,
            0.5,
            1.0,
            true,
        )
        .unwrap();
        assert!(s.verify(&dyadic_grid()).is_err());
    }

    #[test]
    fn decay_alpha_examples() {
        let s = GreenScale::power_law(2.0, 1.0).unwrap(); // eta0 = 1/4, alpha0 = 1/2
        // eta = 1/32: (1/4)^3 = 1/64 <= 1/32 < 1/16 = (1/4)^2 -> m = 3
        assert_eq!(s.decay_alpha(1.0 / 32.0).unwrap(), 0.125);
        // eta = eta0 -> m = 1 -> alpha0
        assert_eq!(s.decay_alpha(0.25).unwrap(), 0.5);
        let s1 = GreenScale::power_law(1.0, 1.0).unwrap(); // eta0 = 1/2
        // eta = 0.1: 2^-4 = 0.0625 <= 0.1 < 0.125 -> m = 4
        assert_eq!(s1.decay_alpha(0.1).unwrap(), 1.0 / 16.0);
    }

    #[test]
    fn decay_alpha_guarantee_holds_on_grid() {
        let s = GreenScale::power_law(1.5, 3.0).unwrap();
        let eta = 0.07;
        let alpha = s.decay_alpha(eta).unwrap();
        for &r in &log_grid(1e-6, 1e3, 64) {
            assert!(s.g(r) <= eta * s.g(alpha * r) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn regularize_agrees_on_dyadic_points() {
        let s = GreenScale::power_law(2.0, 1.0).unwrap();
        let reg = s.regularize();
        for n in -18..=18 {
            let r = 2f64.powi(n);
            assert_relative_eq!(reg.g(r), 4f64.powi(-n), max_relative = 1e-13);
        }
    }

    #[test]
    fn regularize_step_function_interpolates() {
        // g = 1 on (0, 1], 1/4 on (1, inf): regularized value at 1.5 is 0.625
        let s = GreenScale::from_fn(
            |r| if r <= 1.0 { 1.0 } else { 0.25 },
            f64::INFINITY,
            4.0,
            0.5,
            0.9,
            1.0,
            false,
        )
        .unwrap();
        let reg = s.regularize();
        assert_relative_eq!(reg.g(1.5), 0.625, max_relative = 1e-13);
        // and inversion recovers 1.5 from 0.625
        let r = reg.invert(0.625).unwrap();
        assert_relative_eq!(r, 1.5, max_relative = 1e-9);
    }

    #[test]
    fn regularize_sandwich_on_random_radii() {
        let s = GreenScale::power_law(2.0, 1.0).unwrap();
        let reg = s.regularize();
        // deterministic pseudo-random radii over several octaves
        for k in 0..1000 {
            let r = 2f64.powf(-10.0 + 20.0 * crate::geom::golden_seq(k + 1));
            let g = s.g(r);
            let gr = reg.g(r);
            assert!(gr <= s.c_d * g * (1.0 + 1e-12), "upper sandwich failed at {r}");
            assert!(gr >= g / s.c_d * (1.0 - 1e-12), "lower sandwich failed at {r}");
        }
    }

    #[test]
    fn regularize_is_idempotent() {
        let s = GreenScale::power_law(2.0, 1.0).unwrap();
        let r1 = s.regularize();
        let r2 = r1.regularize();
        for k in 0..300 {
            let r = 2f64.powf(-8.0 + 16.0 * crate::geom::golden_seq(k + 1));
            assert_relative_eq!(r1.g(r), r2.g(r), max_relative = 1e-13);
        }
    }

    #[test]
    fn invert_power_law_closed_form() {
        let s = GreenScale::power_law(2.0, 1.0).unwrap();
        let r = s.invert(4.0).unwrap();
        assert_relative_eq!(r, 0.5, max_relative = 1e-11);
    }

    #[test]
    fn invert_round_trip() {
        let s = GreenScale::power_law(1.3, 0.7).unwrap();
        for k in 0..40 {
            let r_star = 10f64.powf(-4.0 + 8.0 * k as f64 / 39.0);
            let r = s.invert(s.g(r_star)).unwrap();
            assert_relative_eq!(r, r_star, max_relative = 1e-10);
        }
    }

    #[test]
    fn invert_out_of_range_reports_interval() {
        let table = "0.5 4.0\n1.0 1.0\n2.0 0.25\n";
        let s = GreenScale::from_table_str(table, 4.0, 0.5, 0.25, 1.0).unwrap();
        // table is clamped to [0.25, 4.0]; 100 is unattainable
        match s.invert(100.0) {
            Err(Error::OutOfRange { .. }) => {}
            other => panic!("expected out-of-range, got {other:?}"),
        }
    }

    #[test]
    fn table_parse_errors_carry_line_numbers() {
        let bad = "0.5 4.0\n0.4 5.0\n";
        match GreenScale::from_table_str(bad, 4.0, 0.5, 0.25, 1.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad2 = "0.5 4.0\n1.0 x\n";
        match GreenScale::from_table_str(bad2, 4.0, 0.5, 0.25, 1.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn measured_doubling_matches_exponent() {
        for p in [0.5, 1.0, 2.0, 2.5] {
            let s = GreenScale::power_law(p, 1.0).unwrap();
            let grid = log_grid(1e-5, 1e3, 64);
            assert_relative_eq!(s.measured_doubling(&grid), 2f64.powf(p), max_relative = 1e-12);
        }
    }
}
