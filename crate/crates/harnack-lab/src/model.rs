//! Concrete isotropic process models on R^d: Green function, ball exit
//! density, ball Green function, and Lévy density, all in closed form up to
//! one-dimensional quadrature.

use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{dist, Ball, Point};
use crate::quad;
use crate::scale::GreenScale;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Brownian,
    Stable,
    Tabulated,
}

/// An isotropic model process on R^d.
///
/// `Stable` carries the index `alpha` in (0, 2); its Green function and the
/// derived radial scale exist only in the transient case `d > alpha`, while
/// the ball kernels (exit density, ball Green function) exist for every
/// admissible index.
#[derive(Clone, Debug)]
pub struct ProcessModel {
    kind: ModelKind,
    d: usize,
    alpha: f64,
    scale: Option<GreenScale>,
    /// Riesz/Newtonian kernel amplitude, when the Green function exists.
    amplitude: Option<f64>,
}

impl ProcessModel {
    pub fn brownian(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidInput(format!(
                "Brownian model needs d >= 3 for a Green function, got d = {d}"
            )));
        }
        let amp = newtonian_amplitude(d);
        let scale = GreenScale::from_fn(
            move |r| amp * r.powi(2 - d as i32),
            f64::INFINITY,
            2f64.powi(d as i32 - 2),
            0.5,
            2f64.powi(-(d as i32 - 2)),
            1.0,
            true,
        )?;
        Ok(ProcessModel { kind: ModelKind::Brownian, d, alpha: 2.0, scale: Some(scale), amplitude: Some(amp) })
    }

    pub fn stable(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidInput(format!(
                "stability index must lie in (0, 2), got {alpha}"
            )));
        }
        let (scale, amplitude) = if (d as f64) > alpha {
            let amp = riesz_amplitude(d, alpha);
            let p = d as f64 - alpha;
            let scale = GreenScale::from_fn(
                move |r| amp * r.powf(-p),
                f64::INFINITY,
                2f64.powf(p),
                0.5,
                2f64.powf(-p),
                1.0,
                true,
            )?;
            (Some(scale), Some(amp))
        } else {
            (None, None)
        };
        Ok(ProcessModel { kind: ModelKind::Stable, d, alpha, scale, amplitude })
    }

    /// Model with a user-supplied radial scale; the Green function is taken
    /// to be exactly `g(|x - y|)`.
    pub fn tabulated(d: usize, scale: GreenScale) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        Ok(ProcessModel { kind: ModelKind::Tabulated, d, alpha: f64::NAN, scale: Some(scale), amplitude: None })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Whether the model has a Green function on all of R^d.
    pub fn is_transient(&self) -> bool {
        self.scale.is_some()
    }

    pub fn has_jumps(&self) -> bool {
        !matches!(self.kind, ModelKind::Brownian)
    }

    /// The radial scale with `G = g(|x-y|)` exactly (comparison constant 1).
    pub fn green_scale(&self) -> Result<&GreenScale> {
        self.scale.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "no Green function: stable model with d = {} <= alpha = {} is recurrent",
                self.d, self.alpha
            ))
        })
    }

    /// Kernel amplitude A with `G(x, y) = A |x - y|^(alpha - d)`.
    pub fn kernel_amplitude(&self) -> Result<f64> {
        self.amplitude.ok_or_else(|| match self.kind {
            ModelKind::Tabulated => Error::Config("tabulated models have no closed-form kernel amplitude".into()),
            _ => Error::Config(format!(
                "no Green function: stable model with d = {} <= alpha = {} is recurrent",
                self.d, self.alpha
            )),
        })
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, model has {}",
                x.len(),
                self.d
            )));
        }
        Ok(())
    }

    /// Green function; +inf on the diagonal.
    pub fn green(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let scale = self.green_scale()?;
        let r = dist(x, y);
        if r == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(scale.g(r))
    }

    /// Exit density of the ball for the stable model at interior point `x`
    /// and exterior point `z` (Blumenthal–Getoor–Ray kernel).
    pub fn poisson_kernel(&self, ball: &Ball, x: &[f64], z: &[f64]) -> Result<f64> {
        if self.kind != ModelKind::Stable {
            return Err(Error::Config(
                "the ball exit density is available for stable models only".into(),
            ));
        }
        self.check_dim(x)?;
        self.check_dim(z)?;
        self.check_dim(&ball.center)?;
        let r = ball.radius;
        let rho_x = dist(x, &ball.center);
        let rho_z = dist(z, &ball.center);
        if rho_x >= r {
            return Err(Error::Domain(format!(
                "x must lie strictly inside the ball: |x - c| = {rho_x}, r = {r}"
            )));
        }
        if rho_z <= r {
            return Err(Error::Domain(format!(
                "z must lie strictly outside the ball: |z - c| = {rho_z}, r = {r}"
            )));
        }
        let c = bgr_constant(self.d, self.alpha);
        let ratio = (r * r - rho_x * rho_x) / (rho_z * rho_z - r * r);
        Ok(c * ratio.powf(self.alpha / 2.0) * dist(x, z).powi(-(self.d as i32)))
    }

    /// Green function of the ball for the stable model, by quadrature of the
    /// one-dimensional integral representation (relative tolerance 1e-8).
    /// Zero when either argument is outside the ball.
    pub fn ball_green(&self, ball: &Ball, x: &[f64], y: &[f64]) -> Result<f64> {
        if self.kind != ModelKind::Stable {
            return Err(Error::Config(
                "the ball Green function is available for stable models only".into(),
            ));
        }
        self.check_dim(x)?;
        self.check_dim(y)?;
        let r = ball.radius;
        let rho_x = dist(x, &ball.center);
        let rho_y = dist(y, &ball.center);
        if rho_x >= r || rho_y >= r {
            return Ok(0.0);
        }
        let dxy = dist(x, y);
        if dxy == 0.0 {
            // finite only when points are non-polar (alpha > d)
            return Ok(if self.alpha > self.d as f64 { self.ball_green_diagonal(ball, x)? } else { f64::INFINITY });
        }
        let w = (r * r - rho_x * rho_x) * (r * r - rho_y * rho_y) / (r * r * dxy * dxy);
        let pre = ball_green_prefactor(self.d, self.alpha);
        let integral = bgr_integral(w, self.d, self.alpha)?;
        Ok(pre * dxy.powf(self.alpha - self.d as f64) * integral)
    }

    fn ball_green_diagonal(&self, ball: &Ball, x: &[f64]) -> Result<f64> {
        // alpha > d (necessarily d = 1): G_B(x,x) = lim, via the integral's
        // w^((alpha-d)/2) growth. Compute with a slight offset as a guard.
        let mut y = x.to_vec();
        y[0] += ball.radius * 1e-9;
        self.ball_green(ball, x, &y)
    }

    /// Lévy density `n(x, z) = A_nu |x - z|^(-d - alpha)`.
    pub fn levy_density(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if self.kind != ModelKind::Stable {
            return Err(Error::Config("only stable models have a Lévy density".into()));
        }
        self.check_dim(x)?;
        self.check_dim(z)?;
        let r = dist(x, z);
        if r == 0.0 {
            return Err(Error::Domain("Lévy density needs x != z".into()));
        }
        Ok(levy_amplitude(self.d, self.alpha) * r.powf(-(self.d as f64) - self.alpha))
    }

    /// Doubling-comparison constant of the radial Lévy profile: the sup of
    /// the two-sided ratio n0(r)/n0(s) over r < s <= 2r on a log grid, which
    /// equals `2^(d + alpha)` for the stable power law.
    pub fn weak_decreasing_constant(&self) -> Result<f64> {
        if self.kind != ModelKind::Stable {
            return Err(Error::Config("only stable models have a Lévy density".into()));
        }
        let a = levy_amplitude(self.d, self.alpha);
        let n0 = |t: f64| a * t.powf(-(self.d as f64) - self.alpha);
        let mut sup: f64 = 0.0;
        for i in 0..64 {
            let r = 10f64.powf(-3.0 + 6.0 * i as f64 / 63.0);
            for j in 1..=32 {
                let s = r * (1.0 + j as f64 / 32.0); // includes the s = 2r endpoint
                let q = (n0(r) / n0(s)).max(n0(s) / n0(r));
                sup = sup.max(q);
            }
        }
        Ok(sup)
    }

    /// Samples `n_triples` point triples in `region` and returns the largest
    /// value of `min(G(x,z), G(y,z)) / G(x,y)` — a lower bound for the
    /// triangle-comparison constant of the kernel.
    pub fn triangle_constant(&self, n_triples: u64, region: &Ball, seed: u64) -> Result<f64> {
        if n_triples == 0 {
            return Err(Error::InvalidInput("need at least one triple".into()));
        }
        self.check_dim(&region.center)?;
        let scale = self.green_scale()?;
        let d = self.d;
        let maxima = exec::map_batches(n_triples, exec::DEFAULT_BATCH, |range| {
            let mut best: f64 = 0.0;
            for i in range {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                let x = sample_in_ball(region, d, &mut rng);
                let y = sample_in_ball(region, d, &mut rng);
                let z = sample_in_ball(region, d, &mut rng);
                let dxy = dist(&x, &y);
                if dxy == 0.0 {
                    continue;
                }
                let gxz = dist(&x, &z);
                let gyz = dist(&y, &z);
                let m = if gxz == 0.0 {
                    if gyz == 0.0 { continue; } else { scale.g(gyz) }
                } else if gyz == 0.0 {
                    scale.g(gxz)
                } else {
                    scale.g(gxz).min(scale.g(gyz))
                };
                best = best.max(m / scale.g(dxy));
            }
            best
        });
        Ok(maxima.into_iter().fold(0.0, f64::max))
    }
}

fn sample_in_ball(ball: &Ball, d: usize, rng: &mut ChaCha8Rng) -> Point {
    use rand::Rng;
    let u: f64 = rng.random();
    let radius = ball.radius * u.powf(1.0 / d as f64);
    let dir = crate::exitlaw::uniform_direction(d, rng);
    crate::geom::add_scaled(&ball.center, &dir, radius)
}

/// Riesz kernel amplitude `A(d, alpha) = Gamma((d-alpha)/2) /
/// (2^alpha pi^(d/2) Gamma(alpha/2))`, valid for `d > alpha`.
pub fn riesz_amplitude(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    (ln_gamma((df - alpha) / 2.0)
        - alpha * 2f64.ln()
        - df / 2.0 * PI.ln()
        - ln_gamma(alpha / 2.0))
    .exp()
}

/// Newtonian kernel amplitude `Gamma(d/2 - 1) / (4 pi^(d/2))` for `d >= 3`.
pub fn newtonian_amplitude(d: usize) -> f64 {
    let df = d as f64;
    (ln_gamma(df / 2.0 - 1.0) - (4.0f64).ln() - df / 2.0 * PI.ln()).exp()
}

/// Exit-density constant `C(d, alpha) = Gamma(d/2) pi^(-d/2 - 1) sin(pi alpha / 2)`.
pub fn bgr_constant(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    (ln_gamma(df / 2.0) - (df / 2.0 + 1.0) * PI.ln()).exp() * (PI * alpha / 2.0).sin()
}

/// Ball Green function prefactor `Gamma(d/2) / (2^alpha pi^(d/2) Gamma(alpha/2)^2)`.
pub fn ball_green_prefactor(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    (ln_gamma(df / 2.0) - alpha * 2f64.ln() - df / 2.0 * PI.ln() - 2.0 * ln_gamma(alpha / 2.0)).exp()
}

/// Lévy density amplitude `alpha 2^(alpha-1) Gamma((d+alpha)/2) /
/// (pi^(d/2) Gamma(1 - alpha/2))`.
pub fn levy_amplitude(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    alpha
        * (ln_gamma((df + alpha) / 2.0) + (alpha - 1.0) * 2f64.ln()
            - df / 2.0 * PI.ln()
            - ln_gamma(1.0 - alpha / 2.0))
        .exp()
}

/// `I(w) = ∫_0^w t^(alpha/2 - 1) (1 + t)^(-d/2) dt`, split at 1 with the
/// singular head desingularized and the tail mapped through `t = e^u`.
pub fn bgr_integral(w: f64, d: usize, alpha: f64) -> Result<f64> {
    if w <= 0.0 {
        return Ok(0.0);
    }
    let df = d as f64;
    let head_end = w.min(1.0);
    let head = quad::integrate_power_lower(
        |t| (1.0 + t).powf(-df / 2.0),
        0.0,
        head_end,
        1.0 - alpha / 2.0,
        1e-10,
        0.0,
    )?
    .value;
    if w <= 1.0 {
        return Ok(head);
    }
    let tail = quad::integrate(
        |u| (alpha / 2.0 * u).exp() * (1.0 + u.exp()).powf(-df / 2.0),
        0.0,
        w.ln(),
        1e-10,
        0.0,
    )?
    .value;
    Ok(head + tail)
}

/// Complete integral `I(∞) = B(alpha/2, (d - alpha)/2)` for `d > alpha`.
pub fn bgr_integral_complete(d: usize, alpha: f64) -> f64 {
    let a = alpha / 2.0;
    let b = (d as f64 - alpha) / 2.0;
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Rotationally reduced distance `|x - z|` when `|x - c| = rho`,
/// `|z - c| = s`, and the enclosed angle has cosine `t`.
pub fn chord(rho: f64, s: f64, t: f64) -> f64 {
    (rho * rho + s * s - 2.0 * rho * s * t).max(0.0).sqrt()
}

/// Integral of `|x - z|^(-d)` over the sphere of radius `s` (surface measure)
/// seen from a point at distance `rho != s` from the center; closed form for
/// d <= 3, Gauss–Legendre in the polar angle otherwise.
pub fn sphere_chord_integral(d: usize, rho: f64, s: f64) -> f64 {
    match d {
        1 => {
            // counting measure on {-s, +s}
            1.0 / (s - rho).abs() + 1.0 / (s + rho)
        }
        2 => 2.0 * PI * s / (s * s - rho * rho).abs(),
        3 => 4.0 * PI * s * s / (s * (s * s - rho * rho).abs()),
        _ => {
            let (nodes, weights) = quad::gauss_legendre(64);
            let area = crate::geom::unit_sphere_area(d - 1);
            let mut acc = 0.0;
            for (&t, &wt) in nodes.iter().zip(&weights) {
                let c = chord(rho, s, t);
                acc += wt * (1.0 - t * t).powf((d as f64 - 3.0) / 2.0) * c.powi(-(d as i32));
            }
            acc * area * s.powi(d as i32 - 1)
        }
    }
}
