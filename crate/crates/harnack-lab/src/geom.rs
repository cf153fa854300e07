//! Balls, point arithmetic, and deterministic low-discrepancy point sets.

use crate::error::{Error, Result};
use serde::Serialize;

pub type Point = Vec<f64>;

/// Euclidean ball `B(center, radius)` in R^d (an interval when d = 1).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("ball center must be finite".into()));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) < self.radius
    }

    /// Signed distance from `x` to the sphere: positive inside, negative outside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.radius - dist(&self.center, x)
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], dir: &[f64], t: f64) -> Point {
    a.iter().zip(dir).map(|(x, u)| x + t * u).collect()
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => {
            let hd = d as f64 / 2.0;
            PI.powf(hd) / statrs::function::gamma::gamma(hd + 1.0)
        }
    }
}

/// Surface area of the unit sphere S^{d-1} (counting measure of {-1, 1} when d = 1).
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

const GOLDEN_RATIO: f64 = 1.618033988749894848;

/// k-th point of the golden-ratio sequence in [0, 1).
pub fn golden_seq(k: usize) -> f64 {
    (k as f64 * (GOLDEN_RATIO - 1.0)).fract()
}

/// Deterministic quasi-uniform unit direction number `k` in R^d (d <= 3 uses
/// golden-angle constructions; higher d falls back to a lattice on angles).
pub fn low_discrepancy_direction(d: usize, k: usize, n: usize) -> Point {
    use std::f64::consts::PI;
    match d {
        1 => vec![if k % 2 == 0 { 1.0 } else { -1.0 }],
        2 => {
            let theta = 2.0 * PI * golden_seq(k.wrapping_add(1));
            vec![theta.cos(), theta.sin()]
        }
        3 => {
            // Fibonacci sphere
            let t = if n > 1 {
                -1.0 + 2.0 * (k as f64 + 0.5) / n as f64
            } else {
                2.0 * golden_seq(k.wrapping_add(1)) - 1.0
            };
            let phi = 2.0 * PI * golden_seq(k.wrapping_add(1));
            let s = (1.0 - t * t).max(0.0).sqrt();
            vec![s * phi.cos(), s * phi.sin(), t]
        }
        _ => {
            let mut v: Point = (0..d)
                .map(|j| (2.0 * PI * golden_seq((k + 1) * (j + 2))).sin())
                .collect();
            let nv = norm(&v).max(1e-300);
            for x in &mut v {
                *x /= nv;
            }
            v
        }
    }
}

/// Quasi-uniform cloud filling a ball: equal-volume radial shells with
/// low-discrepancy angular placement, plus a deterministic shell twist.
pub fn ball_cloud(ball: &Ball, n: usize) -> Vec<Point> {
    let d = ball.dim();
    if n == 0 {
        return Vec::new();
    }
    if d == 1 {
        // midpoint grid on the interval
        return (0..n)
            .map(|k| {
                let t = -1.0 + (2.0 * k as f64 + 1.0) / n as f64;
                vec![ball.center[0] + ball.radius * t]
            })
            .collect();
    }
    // shell count balancing radial gaps against within-shell spacing; the
    // LP convergence studies favored few thick shells with many angles
    let n_shells = match d {
        2 => (((n as f64).sqrt() / 6.0).round() as usize).max(1),
        _ => ((n as f64 / 32.0).powf(1.0 / 3.0).round() as usize).max(1),
    };
    let base = n / n_shells;
    let rem = n % n_shells;
    let mut points = Vec::with_capacity(n);
    let mut k_global = 0usize;
    for s in 0..n_shells {
        // outer shells absorb the remainder (they carry more surface)
        let count = base + usize::from(s >= n_shells - rem);
        // representative radius at the shell's volumetric midpoint
        let frac = (s as f64 + 0.5) / n_shells as f64;
        let r = ball.radius * frac.powf(1.0 / d as f64);
        for j in 0..count {
            let mut dir = low_discrepancy_direction(d, j, count);
            if d == 2 {
                let twist = 2.0 * std::f64::consts::PI * golden_seq(s + 1);
                let (c, si) = (twist.cos(), twist.sin());
                dir = vec![dir[0] * c - dir[1] * si, dir[0] * si + dir[1] * c];
            } else if d == 3 {
                let twist = 2.0 * std::f64::consts::PI * golden_seq(s + 1);
                let (c, si) = (twist.cos(), twist.sin());
                dir = vec![dir[0] * c - dir[1] * si, dir[0] * si + dir[1] * c, dir[2]];
            }
            points.push(add_scaled(&ball.center, &dir, r));
            k_global += 1;
        }
    }
    debug_assert_eq!(k_global, n);
    points
}

/// Typical nearest-neighbour spacing of an n-point cloud in the ball.
pub fn cloud_spacing(ball: &Ball, n: usize) -> f64 {
    let d = ball.dim();
    let vol = unit_ball_volume(d) * ball.radius.powi(d as i32);
    (vol / n.max(1) as f64).powf(1.0 / d as f64)
}
