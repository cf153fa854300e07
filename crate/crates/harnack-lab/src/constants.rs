//! The constant pipeline: from the scale comparison constants (c, c_D), the
//! ball-capacity constant c0, and the jump-comparison constant c_J to the
//! decay ratio alpha, the auxiliary constants (eta, beta, gamma, kappa), the
//! integer exponents (j0, m0, m1), the scale-invariant Harnack bound K, and
//! the radii sequence r_j with its summability check.

use crate::error::{Error, Result};
use crate::scale::GreenScale;
use serde::Serialize;

/// Input constants recorded for provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantInputs {
    pub c: f64,
    pub c_d: f64,
    pub c0: f64,
    pub c_j: f64,
    pub alpha0: f64,
    pub eta0: f64,
    pub r0: f64,
    pub r1: f64,
}

/// The assembled constant record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarnackConstants {
    /// eta = (2 c^3 c_D^2)^-1.
    pub eta: f64,
    /// Decay ratio in (0, 1/4): largest power of alpha0 below 1/4 with
    /// g(r) <= c c_D^-1 eta g(alpha r) on the verification grid.
    pub alpha: f64,
    /// beta = eta / (6 c0).
    pub beta: f64,
    /// gamma = min(1/6, beta / c_J).
    pub gamma: f64,
    /// kappa = 3 beta gamma.
    pub kappa: f64,
    /// Smallest integer with (1 + beta)^j0 > c_D.
    pub j0: u64,
    /// Smallest integer with 2^m0 > 2 j0.
    pub m0: u32,
    /// Smallest integer with 2^m1 alpha^2 > 1.
    pub m1: u32,
    /// K = kappa^-1 c_D^(m0 + m1).
    pub k: f64,
    pub inputs: ConstantInputs,
}

/// Builds the full constant record from a validated scale.
pub fn build_constants(scale: &GreenScale, c0: f64, c_j: f64, r1: f64) -> Result<HarnackConstants> {
    if !(c0 >= 1.0) {
        return Err(Error::InvalidInput(format!("c0 must be >= 1, got {c0}")));
    }
    if !(c_j > 0.0) {
        return Err(Error::InvalidInput(format!("c_J must be positive, got {c_j}")));
    }
    if !(r1 > 0.0) {
        return Err(Error::InvalidInput(format!("r1 must be positive, got {r1}")));
    }
    let c = scale.c;
    let c_d = scale.c_d;
    let eta = 1.0 / (2.0 * c * c * c * c_d * c_d);
    let alpha = choose_alpha(scale, eta)?;
    let beta = eta / (6.0 * c0);
    let gamma = (1.0 / 6.0f64).min(beta / c_j);
    let kappa = 3.0 * beta * gamma;
    let j0 = smallest_j0(beta, c_d);
    let m0 = smallest_m0(j0);
    let m1 = smallest_m1(alpha);
    let k = c_d.powi((m0 + m1) as i32) / kappa;
    let record = HarnackConstants {
        eta,
        alpha,
        beta,
        gamma,
        kappa,
        j0,
        m0,
        m1,
        k,
        inputs: ConstantInputs {
            c,
            c_d,
            c0,
            c_j,
            alpha0: scale.alpha0,
            eta0: scale.eta0,
            r0: scale.r0,
            r1,
        },
    };
    debug_assert!(record.k > 1.0);
    Ok(record)
}

/// Largest alpha0^m < 1/4 with `g(r) <= c c_D^-1 eta g(alpha r)` across the
/// default verification grid, searching at most 60 halvings.
fn choose_alpha(scale: &GreenScale, eta: f64) -> Result<f64> {
    let factor = scale.c / scale.c_d * eta;
    let grid = scale.default_grid();
    let mut m = 1u32;
    let mut alpha = scale.alpha0;
    while alpha >= 0.25 {
        m += 1;
        alpha = scale.alpha0.powi(m as i32);
    }
    while m <= 60 {
        let ok = grid
            .iter()
            .all(|&r| scale.g(r) <= factor * scale.g(alpha * r) * (1.0 + 1e-12));
        if ok {
            return Ok(alpha);
        }
        m += 1;
        alpha = scale.alpha0.powi(m as i32);
    }
    Err(Error::Numerical(
        "no admissible decay ratio within 60 halvings: the scale decays too slowly \
         for the required comparison factor"
            .into(),
    ))
}

fn smallest_j0(beta: f64, c_d: f64) -> u64 {
    // integer search upward from just below the log estimate; powi keeps the
    // strict-inequality boundary honest where log rounding could lie
    let est = (c_d.ln() / beta.ln_1p()).floor() as i64 - 2;
    let mut j = est.max(1) as u64;
    while (1.0 + beta).powi(j as i32) <= c_d {
        j += 1;
    }
    while j > 1 && (1.0 + beta).powi(j as i32 - 1) > c_d {
        j -= 1;
    }
    j
}

fn smallest_m0(j0: u64) -> u32 {
    let mut m0 = 1u32;
    while (1u128 << m0) <= 2 * j0 as u128 {
        m0 += 1;
    }
    m0
}

fn smallest_m1(alpha: f64) -> u32 {
    let mut m1 = 1u32;
    while 2f64.powi(m1 as i32) * alpha * alpha <= 1.0 {
        m1 += 1;
    }
    m1
}

/// Radii solving `g(r_j) = c_D^m0 (1 + beta)^(j-1) g(alpha^4 R)` for
/// j = 1..=j_max; strictly decreasing.
pub fn radii_sequence(
    scale: &GreenScale,
    constants: &HarnackConstants,
    big_r: f64,
    j_max: u64,
) -> Result<Vec<f64>> {
    if !(big_r > 0.0 && big_r < scale.r0.min(constants.inputs.r1)) {
        return Err(Error::InvalidInput(format!(
            "R = {big_r} must lie in (0, min(r0, r1) = {})",
            scale.r0.min(constants.inputs.r1)
        )));
    }
    if j_max == 0 {
        return Err(Error::InvalidInput("j_max must be >= 1".into()));
    }
    let a4r = constants.alpha.powi(4) * big_r;
    let base = constants.inputs.c_d.powi(constants.m0 as i32) * scale.g(a4r);
    let mut out = Vec::with_capacity(j_max as usize);
    let mut prev = f64::INFINITY;
    for j in 1..=j_max {
        let target = base * (1.0 + constants.beta).powi(j as i32 - 1);
        let r_j = scale.invert(target).map_err(|e| match e {
            Error::OutOfRange { value, lo, hi, .. } => Error::OutOfRange {
                what: "radius target (choose a smaller R or a wider tabulation range)",
                value,
                lo,
                hi,
            },
            other => other,
        })?;
        if r_j >= prev {
            return Err(Error::Numerical(format!(
                "radii sequence not strictly decreasing at j = {j}"
            )));
        }
        prev = r_j;
        out.push(r_j);
    }
    Ok(out)
}

/// Result of the radii-summability check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SumCheck {
    /// Partial sum of r_j for j <= j_max.
    pub sum: f64,
    /// Analytic tail envelope covering every block beyond the partial sum.
    pub tail_bound: f64,
    /// The bound alpha^4 R that the total must stay below.
    pub bound: f64,
    pub pass: bool,
}

/// Verifies that the radii sum (partial sum plus the analytic block
/// envelope) stays below `alpha^4 R`.
pub fn check_sum_rj(
    scale: &GreenScale,
    constants: &HarnackConstants,
    big_r: f64,
    j_max: u64,
) -> Result<SumCheck> {
    let radii = radii_sequence(scale, constants, big_r, j_max)?;
    let sum: f64 = radii.iter().sum();
    let a4r = constants.alpha.powi(4) * big_r;
    // blocks of length j0: block m covers j in (m j0, (m+1) j0], each radius
    // there below 2^-(m0+m) alpha^4 R; the envelope starts at the first block
    // not fully covered by the partial sum (conservative when j_max is not a
    // multiple of j0: the partial block is counted in both terms)
    let m_star = j_max / constants.j0;
    let tail_bound =
        constants.j0 as f64 * 2f64.powi(1 - constants.m0 as i32 - m_star as i32) * a4r;
    let total = sum + tail_bound;
    Ok(SumCheck { sum, tail_bound, bound: a4r, pass: total < a4r })
}
