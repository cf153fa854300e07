//! The acceptance matrix: every quantitative claim the toolkit commits to,
//! runnable as a single report. Each criterion pins its tolerances in code;
//! the CLI `report` subcommand and the acceptance test suite both dispatch
//! through [`run_criterion`].

use crate::capacity::{ball_capacity, ball_capacity_raw, capacity_bounds, compute_cg};
use crate::constants::{build_constants, check_sum_rj, radii_sequence, HarnackConstants};
use crate::error::Result;
use crate::geom::{add_scaled, low_discrepancy_direction, Ball};
use crate::harnack::{
    diffusion_global_check, extreme_family, harnack_ratio, mean_value_check, BoundaryData, Cell,
    HarmonicFunction, Sector,
};
use crate::model::ProcessModel;
use crate::montecarlo::{
    hitting_probability, iterated_balayage_check, jump_comparison_at_radius,
    jump_comparison_constant, jump_comparison_mc_cells, JumpComparison, WosConfig,
};
use crate::scale::GreenScale;
use serde::Serialize;
use std::fmt::Write as _;
use std::time::Instant;

pub const CRITERIA_COUNT: usize = 11;

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
    pub runtime_seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:02} [{}] {} — {} ({:.1}s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.details,
            self.runtime_seconds
        )
    }
}

/// Runs one criterion (1-based id).
pub fn run_criterion(id: usize) -> CriterionResult {
    let t0 = Instant::now();
    let (name, outcome) = match id {
        1 => ("scale checks", criterion_scales()),
        2 => ("capacity sandwich and scaling", criterion_capacity()),
        3 => ("Brownian hitting oracle", criterion_brownian_hitting()),
        4 => ("capacity hitting lower bound", criterion_hitting_bound()),
        5 => ("radii summability", criterion_radii_sum()),
        6 => ("constant pipeline", criterion_constants()),
        7 => ("jump comparison", criterion_jump()),
        8 => ("scale-invariant Harnack ratios", criterion_harnack()),
        9 => ("diffusion two-sided bound", criterion_diffusion()),
        10 => ("iterated exit consistency", criterion_itbal()),
        11 => ("harmonicity residuals", criterion_mean_value()),
        _ => panic!("criterion id must be 1..={CRITERIA_COUNT}"),
    };
    let runtime = t0.elapsed().as_secs_f64();
    match outcome {
        Ok((pass, details)) => {
            CriterionResult { id, name, pass, details, runtime_seconds: runtime }
        }
        Err(e) => CriterionResult {
            id,
            name,
            pass: false,
            details: format!("error: {e}"),
            runtime_seconds: runtime,
        },
    }
}

/// Runs the full matrix in order.
pub fn run_all() -> Vec<CriterionResult> {
    (1..=CRITERIA_COUNT).map(run_criterion).collect()
}

type Outcome = Result<(bool, String)>;

/// The canonical constants record (stable d=3 alpha=1 scale, c0=3, c_J=16)
/// used wherever a record is required for a model without its own pipeline.
pub fn canonical_constants() -> Result<HarnackConstants> {
    let scale = GreenScale::power_law(2.0, 1.0)?;
    build_constants(&scale, 3.0, 16.0, f64::INFINITY)
}

fn criterion_scales() -> Outcome {
    let t0 = Instant::now();
    // the d = alpha stable model has no Green scale (its derived scale would
    // be constant with doubling ratio 1); the d=1 entry runs at alpha = 0.5
    // and the rejection of (1, 1) is asserted explicitly
    let mut checked = Vec::new();
    for (d, alpha) in [(1usize, 0.5f64), (2, 1.0), (3, 1.0), (3, 1.5)] {
        let m = ProcessModel::stable(d, alpha)?;
        let s = m.green_scale()?;
        let expect_cd = 2f64.powf(d as f64 - alpha);
        if (s.c_d - expect_cd).abs() > 1e-12 {
            return Ok((false, format!("stable({d},{alpha}): c_D {} != {expect_cd}", s.c_d)));
        }
        let report = s.verify(&s.default_grid())?;
        if !report.is_valid() {
            return Ok((
                false,
                format!("stable({d},{alpha}): {} violations", report.violations.len()),
            ));
        }
        checked.push(format!("stable({d},{alpha})"));
    }
    let b = ProcessModel::brownian(3)?;
    let bs = b.green_scale()?;
    if (bs.c_d - 2.0).abs() > 1e-12 {
        return Ok((false, format!("brownian(3): c_D {} != 2", bs.c_d)));
    }
    if !bs.verify(&bs.default_grid())?.is_valid() {
        return Ok((false, "brownian(3) scale violations".into()));
    }
    checked.push("brownian(3)".into());
    let rejected = ProcessModel::stable(1, 1.0)?.green_scale().is_err();
    let runtime = t0.elapsed().as_secs_f64();
    let pass = rejected && runtime < 1.0;
    Ok((
        pass,
        format!(
            "{} scales valid, d = alpha rejected: {rejected}, runtime {runtime:.3}s < 1s",
            checked.len()
        ),
    ))
}

fn criterion_capacity() -> Outcome {
    let t0 = Instant::now();
    let m = ProcessModel::stable(3, 1.0)?;
    let scale = m.green_scale()?;
    let c0 = 3.0;
    let mut details = String::new();
    let mut pass = true;
    for r in [0.5f64, 1.0, 2.0] {
        let bc = ball_capacity(&m, &Ball::new(vec![0.0; 3], r)?, 512)?;
        let (lo, hi) = capacity_bounds(scale, c0, r);
        let ok = bc.result.capacity >= lo
            && bc.result.capacity <= hi * (1.0 + bc.slack)
            && bc.result.duality_gap <= 1e-6;
        pass &= ok;
        let _ = write!(
            details,
            "r={r}: cap {:.4} in [{lo:.4}, {:.4}] gap {:.1e}; ",
            bc.result.capacity,
            hi * (1.0 + bc.slack),
            bc.result.duality_gap
        );
    }
    // matched per-volume density scaling pair, with the 4096-point run
    let c_small = ball_capacity_raw(&m, &Ball::new(vec![0.0; 3], 1.0)?, 512)?;
    let c_big = ball_capacity_raw(&m, &Ball::new(vec![0.0; 3], 2.0)?, 4096)?;
    let ratio = c_big.capacity / c_small.capacity;
    let scaling_ok = (ratio - 4.0).abs() / 4.0 <= 0.02;
    pass &= scaling_ok;
    let runtime = t0.elapsed().as_secs_f64();
    pass &= runtime < 60.0;
    let _ = write!(details, "scaling ratio {ratio:.4} (target 4 ± 2%), runtime {runtime:.1}s < 60s");
    Ok((pass, details))
}

fn criterion_brownian_hitting() -> Outcome {
    let t0 = Instant::now();
    let m = ProcessModel::brownian(3)?;
    let domain = Ball::new(vec![0.0; 3], 4.0)?;
    let target = Ball::new(vec![0.0; 3], 1.0)?;
    let n = 100_000u64;
    let mut pass = true;
    let mut worst_sigma: f64 = 0.0;
    let mut max_censor: f64 = 0.0;
    for (i, rho) in [1.25f64, 1.5, 2.0, 2.5, 3.0].iter().enumerate() {
        let exact = (1.0 / rho - 0.25) / 0.75;
        let cfg = WosConfig { seed: 1000 + i as u64, ..WosConfig::default() };
        let est = hitting_probability(&m, &[target.clone()], &domain, &[*rho, 0.0, 0.0], &cfg, n)?;
        let sigmas = (est.estimate.mean - exact).abs() / est.estimate.stderr.max(1e-12);
        worst_sigma = worst_sigma.max(sigmas);
        max_censor = max_censor.max(est.censored_fraction);
        pass &= sigmas <= 3.0 && est.censored_fraction < 0.01;
    }
    let runtime = t0.elapsed().as_secs_f64();
    pass &= runtime < 30.0;
    Ok((
        pass,
        format!(
            "5 geometries at n=1e5: worst deviation {worst_sigma:.2}σ <= 3σ, censoring \
             {max_censor:.4} < 1%, runtime {runtime:.1}s < 30s"
        ),
    ))
}

fn criterion_hitting_bound() -> Outcome {
    // 3x3 sweep of (target radius, start position) for the small-target
    // hitting estimate against eta g(a r) cap(A)
    let m = ProcessModel::stable(3, 1.0)?;
    let scale = m.green_scale()?;
    let eta = 1.0 / 32.0;
    let a_prop = 0.125; // g((1-2a)r) <= eta g(a r) for the r^-2 scale
    let r = 1.0;
    let domain = Ball::new(vec![0.0; 3], r)?;
    let n = 20_000u64;
    let mut violations = 0usize;
    let mut lines = Vec::new();
    for (ti, s) in [0.06f64, 0.12, 0.24].iter().enumerate() {
        let target = Ball::new(vec![0.0; 3], *s)?;
        let cap = ball_capacity_raw(&m, &target, 256)?.capacity;
        let bound = eta * scale.g(a_prop * r) * cap;
        for (xi, rho) in [0.08f64, 0.16, 0.24].iter().enumerate() {
            let cfg = WosConfig { seed: 4000 + (ti * 3 + xi) as u64, ..WosConfig::default() };
            let est =
                hitting_probability(&m, &[target.clone()], &domain, &[*rho, 0.0, 0.0], &cfg, n)?;
            if est.estimate.mean < bound - 3.0 * est.estimate.stderr {
                violations += 1;
                lines.push(format!(
                    "s={s} |x|={rho}: {} < {bound:.4}",
                    est.estimate.mean
                ));
            }
        }
    }
    Ok((
        violations == 0,
        if violations == 0 {
            "9/9 cells respect the capacity lower bound (eta = 1/32)".into()
        } else {
            format!("{violations} violations: {}", lines.join("; "))
        },
    ))
}

fn criterion_radii_sum() -> Outcome {
    let scale = GreenScale::power_law(2.0, 1.0)?;
    let k = canonical_constants()?;
    let check = check_sum_rj(&scale, &k, 1.0, 10 * k.j0)?;
    let a4r = k.alpha.powi(4);
    let ratio = (check.sum + check.tail_bound) / a4r;
    let three_sig_figs = (ratio - 0.563).abs() <= 5e-4;
    let r1 = radii_sequence(&scale, &k, 1.0, 1)?[0];
    let r1_exact = a4r * 2f64.powi(-(k.m0 as i32));
    let r1_ok = (r1 - r1_exact).abs() / r1_exact <= 1e-12;
    let pass = check.pass && three_sig_figs && r1_ok;
    Ok((
        pass,
        format!(
            "sum+tail = {ratio:.4}·α⁴R < α⁴R (pass {}), 3 s.f. 0.563: {three_sig_figs}, \
             r_1 = α⁴R·2^-11 to 1e-12: {r1_ok}",
            check.pass
        ),
    ))
}

fn criterion_constants() -> Outcome {
    let k = canonical_constants()?;
    // independent straight-line re-derivation (same arithmetic as the
    // committed re-derivation test, inlined here for the report)
    let (c, cd, c0, cj) = (1.0f64, 4.0f64, 3.0f64, 16.0f64);
    let eta = 1.0 / (2.0 * c * c * c * cd * cd);
    let mut alpha = 0.5f64;
    while alpha >= 0.25 || alpha * alpha > c / cd * eta {
        alpha *= 0.5;
    }
    let beta = eta / (6.0 * c0);
    let gamma = (1.0f64 / 6.0).min(beta / cj);
    let kappa = 3.0 * beta * gamma;
    let mut j0 = 1u64;
    while (1.0 + beta).powi(j0 as i32) <= cd {
        j0 += 1;
    }
    let mut m0 = 1u32;
    while (1u64 << m0) as f64 <= 2.0 * j0 as f64 {
        m0 += 1;
    }
    let mut m1 = 1u32;
    while 2f64.powi(m1 as i32) * alpha * alpha <= 1.0 {
        m1 += 1;
    }
    let k_rederived = cd.powi((m0 + m1) as i32) / kappa;
    let bitwise = k.eta.to_bits() == eta.to_bits()
        && k.alpha.to_bits() == alpha.to_bits()
        && k.beta.to_bits() == beta.to_bits()
        && k.gamma.to_bits() == gamma.to_bits()
        && k.kappa.to_bits() == kappa.to_bits()
        && k.j0 == j0
        && k.m0 == m0
        && k.m1 == m1
        && k.k.to_bits() == k_rederived.to_bits();
    let expected = (eta, alpha, beta, gamma) == (1.0 / 32.0, 1.0 / 16.0, 1.0 / 576.0, 1.0 / 9216.0)
        && (j0, m0, m1) == (800, 11, 9)
        && (k_rederived - 1769472.0 * 4f64.powi(20)).abs() / k_rederived < 1e-12;
    Ok((
        bitwise && expected,
        format!(
            "record (η=1/32, α=1/16, β=1/576, γ=1/9216, κ=1/1769472, j0=800, m0=11, m1=9, \
             K={:.6e}) bit-identical to the re-derivation: {bitwise}",
            k.k
        ),
    ))
}

fn criterion_jump() -> Outcome {
    let m = ProcessModel::stable(1, 1.0)?;
    let a = 1.0 / 16.0;
    let res = match jump_comparison_constant(&m, a, 32, 64)? {
        JumpComparison::Stable(r) => r,
        JumpComparison::DiffusionTrivial { .. } => {
            return Ok((false, "unexpected diffusion-trivial outcome".into()))
        }
    };
    let finite_ge_one = res.c_j.is_finite() && res.c_j >= 1.0;
    let stable_refine = res.refinement_delta <= 1e-3;
    let s1 = match jump_comparison_at_radius(&m, a, 1.0, 24, 48)? {
        JumpComparison::Stable(r) => r.sup_ratio,
        _ => unreachable!(),
    };
    let s10 = match jump_comparison_at_radius(&m, a, 10.0, 24, 48)? {
        JumpComparison::Stable(r) => r.sup_ratio,
        _ => unreachable!(),
    };
    let r_indep = (s1 - s10).abs() / s1 <= 1e-8;
    let cells = jump_comparison_mc_cells(&m, a, &res.attaining_y.clone(), 100_000, 77, 8)?;
    let mc_ok = cells.iter().all(|c| c.ok);
    let pass = finite_ge_one && stable_refine && r_indep && mc_ok;
    Ok((
        pass,
        format!(
            "c_J = {} (raw sup {:.5}), refinement delta {:.2e} <= 1e-3, radius-independent \
             to {:.1e}, {} MC cells within 4σ",
            res.c_j,
            res.sup_ratio,
            res.refinement_delta,
            ((s1 - s10) / s1).abs(),
            cells.len()
        ),
    ))
}

fn criterion_harnack() -> Outcome {
    let t0 = Instant::now();
    let mut pass = true;
    let mut details = String::new();
    // d=1 Cauchy carries no Green scale; it runs under the canonical record
    // (matching the worked example); d=2 runs its own pipeline
    let cases: Vec<(ProcessModel, HarnackConstants)> = vec![
        (ProcessModel::stable(1, 1.0)?, canonical_constants()?),
        (ProcessModel::stable(2, 1.0)?, {
            let m2 = ProcessModel::stable(2, 1.0)?;
            let scale = m2.green_scale()?;
            let grid: Vec<f64> = (1..=8).map(|k| 0.25 * k as f64).collect();
            let cg = compute_cg(scale, 2, &grid)?;
            let c0 = scale.c * cg;
            let cj = m2.weak_decreasing_constant()?;
            build_constants(scale, c0, cj, f64::INFINITY)?
        }),
    ];
    for (model, constants) in &cases {
        let d = model.dim();
        let mut ratios = Vec::new();
        for big_r in [0.1f64, 1.0, 10.0] {
            let family = extreme_family(model, &vec![0.0; d], 1.05 * big_r, 200)?;
            let report = harnack_ratio(model, &vec![0.0; d], big_r, constants, &family, 4096)?;
            pass &= report.pass && report.excluded.is_empty();
            ratios.push(report.max_ratio);
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        let spread = (max - min) / min;
        pass &= spread < 1e-6;
        let _ = write!(
            details,
            "d={d}: max ratio {:.6} <= K = {:.3e}, spread across R {:.1e}; ",
            max, constants.k, spread
        );
    }
    let runtime = t0.elapsed().as_secs_f64();
    pass &= runtime < 300.0;
    let _ = write!(details, "runtime {runtime:.1}s < 300s");
    Ok((pass, details))
}

fn criterion_diffusion() -> Outcome {
    let m = ProcessModel::brownian(3)?;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let fac = 2.0005 + 0.45 * k as f64;
        let dir = low_discrepancy_direction(3, k, 20);
        let z = add_scaled(&[0.0; 3], &dir, fac);
        let check = diffusion_global_check(&m, &[0.0; 3], 1.0, &z)?;
        worst = worst.max(check.ratio);
        if !check.pass {
            return Ok((false, format!("placement {k}: ratio {} > 4", check.ratio)));
        }
    }
    Ok((true, format!("20 placements, worst ratio {worst:.4} <= (c c_D)² = 4")))
}

fn criterion_itbal() -> Outcome {
    let m = ProcessModel::stable(1, 1.0)?;
    let rep = iterated_balayage_check(&m, &[0.0], 1.0, 2.0, 100_000, 4242, 12)?;
    Ok((
        rep.pass && rep.cells_within_bars,
        format!(
            "chi-square {:.2} < critical {:.2} (1%), cells within 4σ: {}",
            rep.statistic, rep.critical_value, rep.cells_within_bars
        ),
    ))
}

fn criterion_mean_value() -> Outcome {
    let n = 20_000u64;
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for (d, alpha) in [(1usize, 1.0f64), (2, 1.0), (3, 1.0)] {
        let m = ProcessModel::stable(d, alpha)?;
        let data = if d == 1 {
            BoundaryData::Cells(vec![(
                Cell {
                    s0: 1.0,
                    s1: f64::INFINITY,
                    sector: Some(Sector { axis: vec![1.0], t0: 0.5, t1: 1.0 }),
                },
                1.0,
            )])
        } else {
            BoundaryData::Cells(vec![(Cell { s0: 1.2, s1: 4.0, sector: None }, 1.0)])
        };
        let h = HarmonicFunction::new(&m, Ball::new(vec![0.0; d], 1.0)?, data)?;
        for (gi, inner_r) in [0.6f64, 0.35, 0.2].iter().enumerate() {
            let inner = Ball::new(vec![0.0; d], *inner_r)?;
            for (pi, frac) in [0.0f64, 0.4, 0.8].iter().enumerate() {
                let mut x = vec![0.0; d];
                x[0] = frac * inner_r;
                let seed = 7000 + (d * 100 + gi * 10 + pi) as u64;
                let check = mean_value_check(&h, &inner, &x, n, seed)?;
                worst = worst.max(check.standardized_residual.abs());
                count += 1;
                if check.standardized_residual.abs() > 4.0 {
                    return Ok((
                        false,
                        format!(
                            "d={d} inner={inner_r} x0={frac}: residual {:.2}",
                            check.standardized_residual
                        ),
                    ));
                }
            }
        }
    }
    Ok((true, format!("{count} cells, worst standardized residual {worst:.2} within ±4")))
}
