//! Dense packing linear program
//!
//! ```text
//! maximize  1ᵀμ   subject to   A μ <= 1,  μ >= 0,
//! ```
//!
//! solved by a Mehrotra predictor–corrector interior point method on the
//! primal/dual pair (dual: minimize 1ᵀλ, Aᵀλ >= 1, λ >= 0). The normal
//! equations `(A D Aᵀ + E) dλ = rhs` are formed by dense matrix products and
//! factored by Cholesky. Every returned solution carries an explicit
//! weak-duality certificate computed directly from the matrix: the primal
//! iterate rounded to feasibility and the dual iterate rounded to coverage,
//! whose objective gap bounds the distance to optimality.

use crate::error::{Error, Result};
use crate::exec;
use faer::linalg::matmul::triangular::{matmul as tri_matmul, BlockStructure};
use faer::Accum;
use faer::prelude::*;
use faer::{ColRef, Mat, Side};

#[derive(Clone, Debug)]
pub struct LpSolution {
    /// Feasible primal weights (length = number of columns).
    pub weights: Vec<f64>,
    /// Primal objective Σ μ_i.
    pub objective: f64,
    /// Certified relative duality gap (dual - primal) / primal.
    pub duality_gap: f64,
    /// max_j (Aμ - 1)_+ after feasibility rounding.
    pub constraint_residual: f64,
}

/// Row-major dense m x n matrix of kernel values; entries may be +inf on
/// coincident point pairs (those columns are forced to zero weight).
pub struct PackingProblem<'a> {
    pub entries: &'a [f64],
    pub m: usize,
    pub n: usize,
}

const GAP_TOL: f64 = 1e-6;
const IPM_GAP: f64 = 5e-8;
const IPM_FEAS: f64 = 1e-9;
const MAX_ITER: usize = 120;

pub fn solve_packing(p: &PackingProblem) -> Result<LpSolution> {
    assert_eq!(p.entries.len(), p.m * p.n);
    let (m, n) = (p.m, p.n);
    let at = |j: usize, i: usize| p.entries[j * n + i];

    // columns carrying an infinite entry are forced to zero weight
    let mut admissible = Vec::with_capacity(n);
    for i in 0..n {
        let mut ok = true;
        for j in 0..m {
            let v = at(j, i);
            if !v.is_finite() {
                ok = false;
                break;
            }
            if v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "kernel matrix must be nonnegative; entry ({j}, {i}) = {v}"
                )));
            }
        }
        if ok {
            admissible.push(i);
        }
    }
    if admissible.is_empty() {
        return Ok(LpSolution {
            weights: vec![0.0; n],
            objective: 0.0,
            duality_gap: 0.0,
            constraint_residual: 0.0,
        });
    }
    for &i in &admissible {
        if (0..m).all(|j| at(j, i) == 0.0) {
            return Err(Error::Numerical(format!(
                "unbounded program: column {i} has an identically zero potential"
            )));
        }
    }

    // reduced matrix over admissible columns, as both a slice and a faer Mat
    let nr = admissible.len();
    let mut reduced = vec![0.0f64; m * nr];
    exec::fill_rows(&mut reduced, nr, |j, row| {
        for (k, &i) in admissible.iter().enumerate() {
            row[k] = at(j, i);
        }
    });
    let (mu_r, lam) = ipm(&reduced, m, nr)?;

    // map back and certify against the full matrix
    let mut weights = vec![0.0; n];
    for (k, &i) in admissible.iter().enumerate() {
        weights[i] = mu_r[k].max(0.0);
    }
    certify(p, weights, &lam)
}

/// Rounds the iterates to exact feasibility and produces the certificate.
fn certify(p: &PackingProblem, mut weights: Vec<f64>, lam: &[f64]) -> Result<LpSolution> {
    let potentials = mat_vec(p, &weights);
    let t = potentials.iter().cloned().fold(1.0f64, f64::max);
    for w in weights.iter_mut() {
        *w /= t;
    }
    let primal: f64 = weights.iter().sum();
    let constraint_residual = potentials
        .iter()
        .map(|&q| (q / t - 1.0).max(0.0))
        .fold(0.0f64, f64::max);

    let lam_pos: Vec<f64> = lam.iter().map(|&v| v.max(0.0)).collect();
    let cover = mat_t_vec(p, &lam_pos);
    // only columns that can carry weight constrain the dual
    let mut s_min = f64::INFINITY;
    for (i, &c) in cover.iter().enumerate() {
        let finite_col = (0..p.m).all(|j| p.entries[j * p.n + i].is_finite());
        if finite_col {
            s_min = s_min.min(c);
        }
    }
    if !(s_min > 0.0) || !s_min.is_finite() {
        return Err(Error::Numerical("packing LP: dual iterate does not cover the columns".into()));
    }
    let dual: f64 = lam_pos.iter().sum::<f64>() / s_min;
    let duality_gap = ((dual - primal) / primal.max(1e-300)).max(0.0);
    if duality_gap > GAP_TOL {
        return Err(Error::Numerical(format!(
            "packing LP certificate too weak: relative duality gap {duality_gap:.3e} (target {GAP_TOL:.0e})"
        )));
    }
    Ok(LpSolution { weights, objective: primal, duality_gap, constraint_residual })
}

fn mat_vec(p: &PackingProblem, x: &[f64]) -> Vec<f64> {
    let n = p.n;
    let rows: Vec<usize> = (0..p.m).collect();
    exec::map_items(&rows, |&j| {
        let row = &p.entries[j * n..(j + 1) * n];
        let mut acc = 0.0;
        for (a, w) in row.iter().zip(x) {
            if *w != 0.0 && a.is_finite() {
                acc += a * w;
            }
        }
        acc
    })
}

fn mat_t_vec(p: &PackingProblem, y: &[f64]) -> Vec<f64> {
    let n = p.n;
    let cols: Vec<usize> = (0..n).collect();
    exec::map_items(&cols, |&i| {
        let mut acc = 0.0;
        for j in 0..p.m {
            let l = y[j];
            if l != 0.0 {
                let a = p.entries[j * n + i];
                if a.is_finite() {
                    acc += a * l;
                }
            }
        }
        acc
    })
}

/// Mehrotra predictor–corrector on  max 1ᵀμ: Aμ + w = 1, μ,w >= 0.
/// Returns the (near-optimal) primal weights and dual row prices.
fn ipm(entries: &[f64], m: usize, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = Mat::from_fn(m, n, |j, i| entries[j * n + i]);

    // interior start
    let row_sums: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| a[(j, i)]).sum())
        .collect();
    let max_row = row_sums.iter().cloned().fold(f64::MIN, f64::max).max(1e-300);
    let mut mu = vec![0.5 / max_row; n];
    let mut w: Vec<f64> = (0..m).map(|j| 1.0 - 0.5 * row_sums[j] / max_row).collect();
    let col_sums: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|j| a[(j, i)]).sum())
        .collect();
    let min_col = col_sums.iter().cloned().fold(f64::MAX, f64::min).max(1e-300);
    let lam0 = 2.0 / min_col;
    let mut lam = vec![lam0; m];
    let mut z: Vec<f64> = (0..n).map(|i| (lam0 * col_sums[i] - 1.0).max(0.5)).collect();

    let nm = (n + m) as f64;
    for iter in 0..MAX_ITER {
        // residuals
        let amu = mv(&a, &mu);
        let atl = mtv(&a, &lam);
        let rp: Vec<f64> = (0..m).map(|j| 1.0 - amu[j] - w[j]).collect();
        let rd: Vec<f64> = (0..n).map(|i| 1.0 - atl[i] + z[i]).collect();
        let gap: f64 = dot(&mu, &z) + dot(&lam, &w);
        let nu = gap / nm;
        let obj: f64 = mu.iter().sum();
        let rp_norm = inf_norm(&rp);
        let rd_norm = inf_norm(&rd);
        if gap / (1.0 + obj.abs()) < IPM_GAP && rp_norm < IPM_FEAS && rd_norm < IPM_FEAS {
            return Ok((mu, lam));
        }
        if iter == MAX_ITER - 1 {
            break;
        }

        // normal matrix M = A D Aᵀ + E (lower triangle only)
        let d: Vec<f64> = (0..n).map(|i| mu[i] / z[i]).collect();
        let e: Vec<f64> = (0..m).map(|j| w[j] / lam[j]).collect();
        let mut b = a.clone();
        for (i, di) in d.iter().enumerate() {
            let s = di.sqrt();
            for v in b.col_as_slice_mut(i) {
                *v *= s;
            }
        }
        let mut big_m = Mat::<f64>::zeros(m, m);
        tri_matmul(
            big_m.as_mut(),
            BlockStructure::TriangularLower,
            Accum::Replace,
            b.as_ref(),
            BlockStructure::Rectangular,
            b.transpose(),
            BlockStructure::Rectangular,
            1.0,
            faer::get_global_parallelism(),
        );
        for j in 0..m {
            big_m[(j, j)] += e[j];
        }
        let llt = match big_m.llt(Side::Lower) {
            Ok(f) => f,
            Err(_) => {
                let bump = 1e-12 * (0..m).map(|j| big_m[(j, j)]).sum::<f64>() / m as f64;
                for j in 0..m {
                    big_m[(j, j)] += bump.max(1e-300);
                }
                big_m
                    .llt(Side::Lower)
                    .map_err(|_| Error::Numerical("packing LP: normal matrix not positive definite".into()))?
            }
        };

        // predictor (affine): t1 = -mu z, t2 = -lam w
        let t1: Vec<f64> = (0..n).map(|i| -mu[i] * z[i]).collect();
        let t2: Vec<f64> = (0..m).map(|j| -lam[j] * w[j]).collect();
        let (dl_a, dm_a, dz_a, dw_a) = newton(&a, &llt, &d, &mu, &z, &lam, &w, &rp, &rd, &t1, &t2);
        let ap_aff = step_len(&mu, &dm_a).min(step_len(&w, &dw_a));
        let ad_aff = step_len(&lam, &dl_a).min(step_len(&z, &dz_a));
        let mut gap_aff = 0.0;
        for i in 0..n {
            gap_aff += (mu[i] + ap_aff * dm_a[i]) * (z[i] + ad_aff * dz_a[i]);
        }
        for j in 0..m {
            gap_aff += (lam[j] + ad_aff * dl_a[j]) * (w[j] + ap_aff * dw_a[j]);
        }
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // corrector
        let target = sigma * nu;
        let t1c: Vec<f64> = (0..n).map(|i| target - mu[i] * z[i] - dm_a[i] * dz_a[i]).collect();
        let t2c: Vec<f64> = (0..m).map(|j| target - lam[j] * w[j] - dl_a[j] * dw_a[j]).collect();
        let (dl, dm, dz, dw) = newton(&a, &llt, &d, &mu, &z, &lam, &w, &rp, &rd, &t1c, &t2c);

        let tau = 1.0 - (0.1f64).min(10.0 * nu);
        let ap = (tau * step_len(&mu, &dm).min(step_len(&w, &dw))).min(1.0);
        let ad = (tau * step_len(&lam, &dl).min(step_len(&z, &dz))).min(1.0);
        for i in 0..n {
            mu[i] += ap * dm[i];
            z[i] += ad * dz[i];
        }
        for j in 0..m {
            w[j] += ap * dw[j];
            lam[j] += ad * dl[j];
        }
    }
    Err(Error::Numerical(format!(
        "packing LP interior point did not converge within {MAX_ITER} iterations"
    )))
}

/// Solves one Newton system given the factored normal matrix.
#[allow(clippy::too_many_arguments)]
fn newton(
    a: &Mat<f64>,
    llt: &faer::linalg::solvers::Llt<f64>,
    d: &[f64],
    mu: &[f64],
    z: &[f64],
    lam: &[f64],
    w: &[f64],
    rp: &[f64],
    rd: &[f64],
    t1: &[f64],
    t2: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    // rhs = A (D rd + t1/z) + t2/lam - rp
    let inner: Vec<f64> = (0..n).map(|i| d[i] * rd[i] + t1[i] / z[i]).collect();
    let a_inner = mv(a, &inner);
    let rhs = Mat::from_fn(m, 1, |j, _| a_inner[j] + t2[j] / lam[j] - rp[j]);
    let dl_mat = llt.solve(&rhs);
    let dl: Vec<f64> = (0..m).map(|j| dl_mat[(j, 0)]).collect();
    let at_dl = mtv(a, &dl);
    let dm: Vec<f64> = (0..n).map(|i| d[i] * (rd[i] - at_dl[i]) + t1[i] / z[i]).collect();
    let dz: Vec<f64> = (0..n).map(|i| (t1[i] - z[i] * dm[i]) / mu[i]).collect();
    let dw: Vec<f64> = (0..m).map(|j| (t2[j] - w[j] * dl[j]) / lam[j]).collect();
    (dl, dm, dz, dw)
}

fn mv(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let y = a * ColRef::from_slice(x);
    y.iter().copied().collect()
}

fn mtv(a: &Mat<f64>, y: &[f64]) -> Vec<f64> {
    let x = a.transpose() * ColRef::from_slice(y);
    x.iter().copied().collect()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Largest step in [0, 1e30] keeping `x + alpha dx >= 0`.
fn step_len(x: &[f64], dx: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xi, di) in x.iter().zip(dx) {
        if *di < 0.0 {
            alpha = alpha.min(-xi / di);
        }
    }
    alpha.min(1e30)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_dense(entries: Vec<f64>, m: usize, n: usize) -> Result<LpSolution> {
        solve_packing(&PackingProblem { entries: &entries, m, n })
    }

    #[test]
    fn two_by_two_symmetric() {
        // max μ1+μ2 s.t. 2μ1+μ2<=1, μ1+2μ2<=1: optimum (1/3, 1/3), value 2/3
        let sol = solve_dense(vec![2.0, 1.0, 1.0, 2.0], 2, 2).unwrap();
        assert!((sol.objective - 2.0 / 3.0).abs() < 1e-7);
        assert!(sol.duality_gap <= 1e-6);
        assert!(sol.constraint_residual <= 1e-12);
    }

    #[test]
    fn asymmetric_square() {
        // max μ1+μ2 s.t. 2μ1+μ2<=1, μ1+10μ2<=1: vertex (9/19, 1/19), value 10/19
        let sol = solve_dense(vec![2.0, 1.0, 1.0, 10.0], 2, 2).unwrap();
        assert!((sol.objective - 10.0 / 19.0).abs() < 1e-7, "{}", sol.objective);
    }

    #[test]
    fn dominated_atom_gets_zero() {
        // three atoms, the middle one dominated: LP must zero it out
        #[rustfmt::skip]
        let entries = vec![
            10.0, 10.0, 1.0,
            10.0, 10.0, 1.111,
            1.0,  1.111, 10.0,
        ];
        let sol = solve_dense(entries, 3, 3).unwrap();
        // optimum solves rows {2,3} with x2 = 0: value (8.889 + 9) / 98.889
        let expect = (8.889 + 9.0) / 98.889;
        assert!((sol.objective - expect).abs() < 1e-6, "{} vs {expect}", sol.objective);
        // interior-point solutions are ε-optimal, not vertices; the dominated
        // atom is small at the gap scale rather than exactly zero
        assert!(sol.weights[1] < 1e-4, "w1 = {}", sol.weights[1]);
        assert!(sol.duality_gap <= 1e-6);
    }

    #[test]
    fn rectangular_more_rows() {
        // extra redundant constraint row must not disturb the optimum
        let sol = solve_dense(vec![2.0, 1.0, 1.0, 2.0, 1.0, 1.0], 3, 2).unwrap();
        assert!((sol.objective - 2.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn infinite_diagonal_forces_zero() {
        let sol = solve_dense(vec![f64::INFINITY], 1, 1).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.weights, vec![0.0]);
    }

    #[test]
    fn zero_column_is_unbounded() {
        let r = solve_dense(vec![1.0, 0.0, 1.0, 0.0], 2, 2);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn oscillatory_kernel_instance() {
        // 1d singular-kernel collocation with midpoint-offset test points;
        // the optimum is a genuinely non-paired vertex
        let n = 64;
        let pts: Vec<f64> = (0..n)
            .map(|i| -1.0 + (2.0 * i as f64 + 1.0) / n as f64)
            .collect();
        let delta = 1.0 / n as f64;
        let mut entries = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let d = (pts[j] + delta - pts[i]).abs().max(1e-12);
                entries[j * n + i] = 1.0 / d.sqrt();
            }
        }
        let sol = solve_dense(entries, n, n).unwrap();
        assert!(sol.objective > 0.0);
        assert!(sol.duality_gap <= 1e-6, "gap {}", sol.duality_gap);
        assert!(sol.constraint_residual <= 1e-10);
    }
}
