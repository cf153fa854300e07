//! Exact positive harmonic functions for the ball (Poisson integrals of
//! nonnegative boundary data, and extreme kernel functions with an exterior
//! pole), the mean-value consistency check, and the Harnack-ratio
//! verification over function families.

use crate::error::{Error, Result};
use crate::exec;
use crate::exitlaw::ExitSampler;
use crate::geom::{ball_cloud, dist, norm, sub, Ball, Point};
use crate::model::{bgr_constant, chord, sphere_chord_integral, ModelKind, ProcessModel};
use crate::montecarlo::{substream, EstimateWithError};
use crate::quad;
use serde::Serialize;

/// Angular restriction of a cell: points whose angle to `axis` has cosine
/// in `[t0, t1]` (for d = 1 the cosine is the sign of the offset).
#[derive(Clone, Debug, Serialize)]
pub struct Sector {
    pub axis: Point,
    pub t0: f64,
    pub t1: f64,
}

/// A radial(-angular) cell in the complement of the ball.
#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub s0: f64,
    /// Outer radius; may be infinite.
    pub s1: f64,
    pub sector: Option<Sector>,
}

/// Nonnegative bounded boundary data on the ball complement.
#[derive(Clone, Debug, Serialize)]
pub enum BoundaryData {
    Constant(f64),
    /// Finite mixture of indicator cells with nonnegative coefficients.
    Cells(Vec<(Cell, f64)>),
    /// Extreme harmonic function: the exit density with a fixed exterior
    /// pole (vanishing almost everywhere outside the ball).
    Pole(Point),
}

/// A positive function harmonic inside `ball`, represented by its boundary
/// data; inside the ball, evaluation integrates the exact exit density
/// against the data (relative quadrature tolerance 1e-7).
#[derive(Clone, Debug)]
pub struct HarmonicFunction {
    pub model: ProcessModel,
    pub ball: Ball,
    pub data: BoundaryData,
}

const EVAL_REL_TOL: f64 = 1e-7;

impl HarmonicFunction {
    pub fn new(model: &ProcessModel, ball: Ball, data: BoundaryData) -> Result<Self> {
        if model.kind() != ModelKind::Stable {
            return Err(Error::Config(
                "harmonic-function machinery is built on the stable ball kernels".into(),
            ));
        }
        if model.dim() != ball.dim() {
            return Err(Error::InvalidInput("ball dimension must match the model".into()));
        }
        match &data {
            BoundaryData::Constant(v) => {
                if !(*v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidInput("constant data must be finite and >= 0".into()));
                }
            }
            BoundaryData::Cells(cells) => {
                for (cell, w) in cells {
                    if !(*w >= 0.0) || !w.is_finite() {
                        return Err(Error::InvalidInput("cell weights must be finite and >= 0".into()));
                    }
                    if !(cell.s1 > cell.s0) {
                        return Err(Error::InvalidInput(format!(
                            "cell needs s1 > s0, got [{}, {}]",
                            cell.s0, cell.s1
                        )));
                    }
                    if let Some(sec) = &cell.sector {
                        if sec.axis.len() != ball.dim() {
                            return Err(Error::InvalidInput("sector axis dimension mismatch".into()));
                        }
                        if !(sec.t0 < sec.t1 && sec.t0 >= -1.0 && sec.t1 <= 1.0) {
                            return Err(Error::InvalidInput(format!(
                                "sector needs -1 <= t0 < t1 <= 1, got [{}, {}]",
                                sec.t0, sec.t1
                            )));
                        }
                    }
                }
            }
            BoundaryData::Pole(z) => {
                if dist(z, &ball.center) <= ball.radius {
                    return Err(Error::InvalidInput("pole must lie strictly outside the ball".into()));
                }
            }
        }
        Ok(HarmonicFunction { model: model.clone(), ball, data })
    }

    /// Boundary value at a point outside the ball.
    fn boundary_value(&self, z: &[f64]) -> f64 {
        match &self.data {
            BoundaryData::Constant(v) => *v,
            BoundaryData::Cells(cells) => {
                let s = dist(z, &self.ball.center);
                let mut acc = 0.0;
                for (cell, w) in cells {
                    if s < cell.s0 || s > cell.s1 {
                        continue;
                    }
                    let inside_sector = match &cell.sector {
                        None => true,
                        Some(sec) => {
                            let offset = sub(z, &self.ball.center);
                            let t = dotn(&offset, &sec.axis) / (s * norm(&sec.axis)).max(1e-300);
                            t >= sec.t0 && t <= sec.t1
                        }
                    };
                    if inside_sector {
                        acc += w;
                    }
                }
                acc
            }
            // the pole carries the mass; almost every point sees zero
            BoundaryData::Pole(_) => 0.0,
        }
    }

    /// Evaluates the harmonic function anywhere: boundary data outside the
    /// ball, Poisson integral of the data inside.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let rho = dist(x, &self.ball.center);
        if rho >= self.ball.radius {
            return Ok(self.boundary_value(x));
        }
        match &self.data {
            BoundaryData::Pole(z) => self.model.poisson_kernel(&self.ball, x, z),
            BoundaryData::Constant(v) => Ok(*v
                * self.cell_integral(
                    x,
                    &Cell { s0: self.ball.radius, s1: f64::INFINITY, sector: None },
                )?),
            BoundaryData::Cells(cells) => {
                let mut acc = 0.0;
                for (cell, w) in cells {
                    if *w > 0.0 {
                        acc += w * self.cell_integral(x, cell)?;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Exit probability into one cell: radial quadrature of the marginal
    /// (the sphere singularity desingularized, the far field mapped through
    /// u = 1/s), with the angular factor reduced per dimension.
    fn cell_integral(&self, x: &[f64], cell: &Cell) -> Result<f64> {
        let r = self.ball.radius;
        let rho = dist(x, &self.ball.center);
        let d = self.model.dim();
        let alpha = self.model.alpha();
        let c_bgr = bgr_constant(d, alpha);
        let s0 = cell.s0.max(r);
        let s1 = cell.s1;
        if s1 <= s0 {
            return Ok(0.0);
        }
        let radial =
            move |s: f64| c_bgr * ((r * r - rho * rho) / (s * s - r * r)).powf(alpha / 2.0);
        let angular: Box<dyn Fn(f64) -> f64> = match &cell.sector {
            None => Box::new(move |s: f64| sphere_chord_integral(d, rho, s)),
            Some(sec) => self.sector_angular_integral(x, sec)?,
        };
        let integrand = move |s: f64| radial(s) * angular(s);
        let mid = 2.0 * r.max(s0);
        let mut total = 0.0;
        if s0 < mid.min(s1) {
            // head with the (s - r)^(-alpha/2) singularity extracted
            let hi = mid.min(s1);
            let f = |s: f64| integrand(s) * (s - r).powf(alpha / 2.0);
            total += quad::integrate_power_lower(&f, r, hi, alpha / 2.0, EVAL_REL_TOL, 0.0)?.value;
            if s0 > r {
                total -=
                    quad::integrate_power_lower(&f, r, s0, alpha / 2.0, EVAL_REL_TOL, 0.0)?.value;
            }
        }
        if s1 > mid {
            let u_hi = 1.0 / mid.max(s0);
            if s1.is_finite() {
                let g = |u: f64| {
                    let s = 1.0 / u;
                    integrand(s) / (u * u)
                };
                total += quad::integrate(g, 1.0 / s1, u_hi, EVAL_REL_TOL, 1e-16)?.value;
            } else {
                // integrand ~ u^(alpha - 1) near u = 0
                let h = |u: f64| {
                    if u <= 0.0 {
                        return 0.0;
                    }
                    let s = 1.0 / u;
                    integrand(s) / (u * u) * u.powf(1.0 - alpha)
                };
                total +=
                    quad::integrate_power_lower(h, 0.0, u_hi, 1.0 - alpha, EVAL_REL_TOL, 1e-16)?
                        .value;
            }
        }
        if !total.is_finite() {
            return Err(Error::Numerical("cell quadrature produced a non-finite value".into()));
        }
        Ok(total)
    }

    /// Angular integral over a sector at landing radius `s`, for d <= 3.
    fn sector_angular_integral(
        &self,
        x: &[f64],
        sec: &Sector,
    ) -> Result<Box<dyn Fn(f64) -> f64>> {
        let d = self.model.dim();
        let rho = dist(x, &self.ball.center);
        let offset = sub(x, &self.ball.center);
        let axis_n = norm(&sec.axis);
        if axis_n <= 0.0 {
            return Err(Error::InvalidInput("sector axis must be nonzero".into()));
        }
        match d {
            1 => {
                let axis_sign = sec.axis[0].signum();
                let (t0, t1) = (sec.t0, sec.t1);
                let signed_x = offset[0];
                Ok(Box::new(move |s: f64| {
                    let mut acc = 0.0;
                    for side in [1.0f64, -1.0] {
                        let cosv = side * axis_sign;
                        if cosv >= t0 && cosv <= t1 {
                            acc += 1.0 / (s - side * signed_x).abs();
                        }
                    }
                    acc
                }))
            }
            2 => {
                let psi_x = offset[1].atan2(offset[0]);
                let psi_a = sec.axis[1].atan2(sec.axis[0]);
                let phi1 = sec.t1.clamp(-1.0, 1.0).acos();
                let phi2 = sec.t0.clamp(-1.0, 1.0).acos();
                let rel = psi_x - psi_a;
                Ok(Box::new(move |s: f64| {
                    let kern = |chi: f64| chord(rho, s, (chi - rel).cos()).powi(-2);
                    let mut acc = 0.0;
                    for (a, b) in [(phi1, phi2), (-phi2, -phi1)] {
                        if b > a + 1e-15 {
                            acc += quad::integrate(kern, a, b, 1e-9, 1e-15)
                                .map(|q| q.value)
                                .unwrap_or(f64::NAN);
                        }
                    }
                    acc * s
                }))
            }
            3 => {
                let axis: Vec<f64> = sec.axis.iter().map(|v| v / axis_n).collect();
                let cos_xa = if rho > 1e-300 {
                    (dotn(&offset, &axis) / rho).clamp(-1.0, 1.0)
                } else {
                    1.0
                };
                let sin_xa = (1.0 - cos_xa * cos_xa).max(0.0).sqrt();
                let (t0, t1) = (sec.t0, sec.t1);
                let (nodes, weights) = quad::gauss_legendre(32);
                Ok(Box::new(move |s: f64| {
                    let mut acc = 0.0;
                    for (&xt, &wt) in nodes.iter().zip(&weights) {
                        let tau = 0.5 * (t1 - t0) * xt + 0.5 * (t0 + t1);
                        let st = (1.0 - tau * tau).max(0.0).sqrt();
                        let m = 48;
                        let mut inner = 0.0;
                        for k in 0..m {
                            let psi = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                            let cos_xz = cos_xa * tau + sin_xa * st * psi.cos();
                            inner += chord(rho, s, cos_xz).powi(-3);
                        }
                        inner *= 2.0 * std::f64::consts::PI / m as f64;
                        acc += wt * inner;
                    }
                    acc * 0.5 * (t1 - t0) * s * s
                }))
            }
            d => Err(Error::Config(format!(
                "sector cells are implemented for d <= 3, got d = {d}"
            ))),
        }
    }
}

fn dotn(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean-value consistency result.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeanValueCheck {
    pub value_at_x: f64,
    pub mc: EstimateWithError,
    /// (MC mean - h(x)) / stderr.
    pub standardized_residual: f64,
}

/// Compares `h(x)` against the Monte-Carlo average of `h` over exits from
/// `inner` (which must be strictly inside the harmonicity ball).
///
/// Not meaningful for pole data: the point mass at the pole is invisible to
/// sampling, so the estimator would be biased low by the direct-jump term.
pub fn mean_value_check(
    h: &HarmonicFunction,
    inner: &Ball,
    x: &[f64],
    n: u64,
    seed: u64,
) -> Result<MeanValueCheck> {
    let margin = dist(&inner.center, &h.ball.center) + inner.radius;
    if margin >= h.ball.radius * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "inner ball must be strictly inside the harmonicity ball ({margin} >= {})",
            h.ball.radius
        )));
    }
    if !inner.contains(x) {
        return Err(Error::Domain("x must lie inside the inner ball".into()));
    }
    let value_at_x = h.evaluate(x)?;
    let sampler = ExitSampler::new(&h.model)?;
    let cache = InteriorCache::build(h)?;
    let acc = exec::accumulate_indexed(n, exec::DEFAULT_BATCH, |i, acc| {
        let z = sampler
            .sample(inner, x, &mut substream(seed, i))
            .expect("x inside inner");
        let hv = match &cache {
            Some(table) => table.eval(h, &z),
            None => h.evaluate(&z).expect("landing point evaluation"),
        };
        acc.add(hv);
    });
    let mc = EstimateWithError { mean: acc.mean(), stderr: acc.stderr(), n: acc.n, seed };
    let standardized_residual = (mc.mean - value_at_x) / mc.stderr.max(1e-300);
    Ok(MeanValueCheck { value_at_x, mc, standardized_residual })
}

/// Interpolation table over the interior for data whose interior profile is
/// one-dimensional (any data in d = 1, radial data in d >= 2); keeps
/// Monte-Carlo sweeps off the quadrature path.
struct InteriorCache {
    xs: Vec<f64>,
    values: Vec<f64>,
    one_dimensional: bool,
}

const CACHE_POINTS: usize = 1536;

impl InteriorCache {
    fn build(h: &HarmonicFunction) -> Result<Option<InteriorCache>> {
        if matches!(h.data, BoundaryData::Pole(_)) {
            return Ok(None);
        }
        let d = h.model.dim();
        if d == 1 {
            let r = h.ball.radius;
            let c = h.ball.center[0];
            let xs: Vec<f64> = (0..CACHE_POINTS)
                .map(|k| c - r + 2.0 * r * (k as f64 + 0.5) / CACHE_POINTS as f64)
                .collect();
            let values: Result<Vec<f64>> = xs.iter().map(|&x| h.evaluate(&[x])).collect();
            return Ok(Some(InteriorCache { xs, values: values?, one_dimensional: true }));
        }
        let radial_data = match &h.data {
            BoundaryData::Constant(_) => true,
            BoundaryData::Cells(cells) => cells.iter().all(|(c, _)| c.sector.is_none()),
            BoundaryData::Pole(_) => false,
        };
        if !radial_data {
            return Ok(None);
        }
        let r = h.ball.radius;
        let xs: Vec<f64> = (0..CACHE_POINTS)
            .map(|k| r * (k as f64 + 0.5) / CACHE_POINTS as f64)
            .collect();
        let values: Result<Vec<f64>> = xs
            .iter()
            .map(|&rho| {
                let mut p = h.ball.center.clone();
                p[0] += rho;
                h.evaluate(&p)
            })
            .collect();
        Ok(Some(InteriorCache { xs, values: values?, one_dimensional: false }))
    }

    fn eval(&self, h: &HarmonicFunction, z: &[f64]) -> f64 {
        let rho = dist(z, &h.ball.center);
        if rho >= h.ball.radius {
            return h.boundary_value(z);
        }
        let coord = if self.one_dimensional { z[0] } else { rho };
        let idx = self.xs.partition_point(|&p| p < coord);
        if idx == 0 {
            return self.values[0];
        }
        if idx >= self.xs.len() {
            return *self.values.last().unwrap();
        }
        let t = (coord - self.xs[idx - 1]) / (self.xs[idx] - self.xs[idx - 1]);
        self.values[idx - 1] * (1.0 - t) + self.values[idx] * t
    }
}

/// Per-function outcome of a Harnack-ratio sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioRow {
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
}

/// Result of the scale-invariant Harnack verification.
#[derive(Clone, Debug, Serialize)]
pub struct HarnackRatioReport {
    pub max_ratio: f64,
    pub attaining: usize,
    pub pass: bool,
    pub bound: f64,
    pub rows: Vec<RatioRow>,
    /// Indices of functions excluded as numerically vanishing on the grid.
    pub excluded: Vec<usize>,
}

/// Computes sup/inf of every family member over a deterministic grid of
/// `B(x0, alpha^2 R)` (plus its center) and checks the largest ratio
/// against the bound K.
pub fn harnack_ratio(
    model: &ProcessModel,
    x0: &[f64],
    big_r: f64,
    constants: &crate::constants::HarnackConstants,
    family: &[HarmonicFunction],
    grid_n: usize,
) -> Result<HarnackRatioReport> {
    if family.is_empty() {
        return Err(Error::InvalidInput("family must be nonempty".into()));
    }
    for (i, h) in family.iter().enumerate() {
        let needed = dist(&h.ball.center, x0) + 1.05 * big_r;
        if h.ball.radius < needed * (1.0 - 1e-12) {
            return Err(Error::InvalidInput(format!(
                "family member {i} is not harmonic on a neighborhood of the closed ball \
                 (needs radius >= {needed}, has {})",
                h.ball.radius
            )));
        }
        if h.model.dim() != model.dim() {
            return Err(Error::InvalidInput("family dimension mismatch".into()));
        }
    }
    let inner = Ball::new(x0.to_vec(), constants.alpha * constants.alpha * big_r)?;
    let mut grid = ball_cloud(&inner, grid_n);
    grid.push(x0.to_vec());
    let rows: Vec<Result<RatioRow>> = exec::map_items(family, |h| {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for p in &grid {
            let v = h.evaluate(p)?;
            sup = sup.max(v);
            inf = inf.min(v);
        }
        Ok(RatioRow { sup, inf, ratio: sup / inf })
    });
    let mut max_ratio = 0.0f64;
    let mut attaining = 0usize;
    let mut excluded = Vec::new();
    let mut out_rows = Vec::with_capacity(family.len());
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        if row.inf < 1e-300 {
            excluded.push(i);
            out_rows.push(row);
            continue;
        }
        if row.ratio > max_ratio {
            max_ratio = row.ratio;
            attaining = i;
        }
        out_rows.push(row);
    }
    if out_rows.len() == excluded.len() {
        return Err(Error::Numerical("every family member vanished on the grid".into()));
    }
    Ok(HarnackRatioReport {
        max_ratio,
        attaining,
        pass: max_ratio <= constants.k,
        bound: constants.k,
        rows: out_rows,
        excluded,
    })
}

/// Family of extreme harmonic functions on `B(x0, r_prime)`: exit-density
/// kernels with poles sweeping a deterministic radial-angular grid outside
/// the harmonicity ball.
pub fn extreme_family(
    model: &ProcessModel,
    x0: &[f64],
    r_prime: f64,
    n: usize,
) -> Result<Vec<HarmonicFunction>> {
    let d = model.dim();
    let radii = [1.01, 1.05, 1.2, 1.6, 2.5, 5.0, 12.0, 40.0];
    let per_ring = n.div_ceil(radii.len());
    let mut out = Vec::with_capacity(n);
    'outer: for (ring, fac) in radii.iter().enumerate() {
        for k in 0..per_ring {
            if out.len() == n {
                break 'outer;
            }
            let dir = crate::geom::low_discrepancy_direction(d, k + ring, per_ring.max(2));
            let pole = crate::geom::add_scaled(x0, &dir, r_prime * fac);
            out.push(HarmonicFunction::new(
                model,
                Ball::new(x0.to_vec(), r_prime)?,
                BoundaryData::Pole(pole),
            )?);
        }
    }
    Ok(out)
}

/// Largest inner-ball ratio over a sweep of extreme functions: an empirical
/// lower bound for the sharp Harnack constant of the geometry.
pub fn empirical_harnack_constant(
    model: &ProcessModel,
    x0: &[f64],
    big_r: f64,
    constants: &crate::constants::HarnackConstants,
    n_extreme: usize,
) -> Result<f64> {
    let family = extreme_family(model, x0, 1.05 * big_r, n_extreme)?;
    let report = harnack_ratio(model, x0, big_r, constants, &family, 512)?;
    Ok(report.max_ratio)
}

/// Outcome of the global two-sided bound for diffusions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiffusionCheck {
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// For Brownian motion, `v = G(., z_far)` is harmonic near the closed ball
/// `B(x0, R)` once `z_far` is outside `B(x0, 2R)`; its sup/inf over
/// `B(x0, R/2)` must stay below `(c c_D)^2`.
pub fn diffusion_global_check(
    model: &ProcessModel,
    x0: &[f64],
    big_r: f64,
    z_far: &[f64],
) -> Result<DiffusionCheck> {
    if model.kind() != ModelKind::Brownian {
        return Err(Error::Config("the global two-sided bound targets the Brownian model".into()));
    }
    if dist(z_far, x0) <= 2.0 * big_r {
        return Err(Error::Domain(format!(
            "z_far must lie outside B(x0, 2R): |z - x0| = {}",
            dist(z_far, x0)
        )));
    }
    let scale = model.green_scale()?;
    let half = Ball::new(x0.to_vec(), big_r / 2.0)?;
    let mut grid = ball_cloud(&half, 2048);
    grid.push(x0.to_vec());
    // the extremes sit where the axis through z_far meets the sphere
    let dz = dist(z_far, x0);
    let dir: Point = z_far.iter().zip(x0).map(|(z, c)| (z - c) / dz).collect();
    let edge = 0.5 * big_r * (1.0 - 1e-12);
    grid.push(crate::geom::add_scaled(x0, &dir, edge));
    grid.push(crate::geom::add_scaled(x0, &dir, -edge));
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for p in &grid {
        let v = model.green(p, z_far)?;
        sup = sup.max(v);
        inf = inf.min(v);
    }
    let bound = (scale.c * scale.c_d).powi(2);
    let ratio = sup / inf;
    Ok(DiffusionCheck { ratio, bound, pass: ratio <= bound })
}
