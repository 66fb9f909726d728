//! Dense convex-QP solver: a primal-dual interior-point method with
//! Mehrotra's predictor-corrector steps, plus a brute-force grid oracle for
//! cross-checking small problems.
//!
//! The problem form is the one [`crate::objective::assemble_qp`] emits:
//! minimise `f' Q f + a' f + constant` subject to `G f <= h` only —
//! equalities arrive as opposing inequality pairs. Such pairs leave no
//! room for strictly positive slacks on both rows, which starves a
//! barrier method of its interior, so the solver peels them off (using
//! the row tags, cross-checked numerically) and carries them as true
//! equalities `A f = b` with a free multiplier; the surviving rows keep
//! strictly positive slack and dual vectors from an infeasible start.
//!
//! Each step eliminates the slack and dual blocks and solves the normal
//! equations
//!
//! ```text
//! [ 2 Q + G' diag(lambda/s) G + delta I   A' ] [df]   [rhs]
//! [ A                                     0  ] [dn] = [-r_eq]
//! ```
//!
//! by a Cholesky factorisation of the top-left block and a Schur
//! complement over the (small) equality block, raising the tiny
//! regularisation `delta` only if the factorisation stalls. Convergence
//! is declared on the *raw* Karush-Kuhn-Tucker residuals of the returned
//! `(f, lambda)` pair in the original all-inequality form — the
//! certificate a caller can recheck — not on internal step sizes. The
//! equality multiplier maps back onto the pair rows as
//! `(max(n, 0), max(-n, 0))`, which preserves those residuals exactly.
//!
//! Infeasibility is diagnosed rather than assumed: when the main iteration
//! fails, a phase-1 problem (minimise the uniform constraint relaxation
//! `t` subject to `G f - t 1 <= h`, `-t <= 1`) decides whether any
//! feasible point exists at all.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::objective::{Qp, RowKind};
use crate::{Error, Result};

/// Fraction of the distance to the positivity boundary a step may take.
const STEP_DAMPING: f64 = 0.995;

/// Smallest and largest diagonal regularisation tried before giving up on
/// a factorisation, relative to the matrix scale.
const REG_MIN: f64 = 1e-12;
const REG_MAX: f64 = 1e-2;

/// Cap on `lambda_i / s_i` when forming the normal matrix; beyond this the
/// constraint is numerically active and a larger weight only poisons the
/// factorisation.
const SCALING_CAP: f64 = 1e16;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Every raw KKT residual must fall to this level. Absolute.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Raw optimality residuals of a primal-dual pair, all measured on the
/// original data (no internal slack variables involved):
///
/// * `stationarity`: `|| 2 Q f + a + G' lambda ||_inf`
/// * `primal`: worst constraint violation `max_i (G f - h)_i`, floored at 0
/// * `complementarity`: `max_i | lambda_i (G f - h)_i |`
/// * `dual`: `max(0, -min_i lambda_i)`
#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
    pub dual: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.complementarity)
            .max(self.dual)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max().is_finite() && self.max() <= tol
    }
}

/// A solved program: primal flows, one dual per constraint row, and the
/// residual certificate they were accepted under.
#[derive(Debug, Clone)]
pub struct Solution {
    pub f: Vec<f64>,
    pub duals: Vec<f64>,
    /// Objective value including the constant term.
    pub objective: f64,
    pub iterations: usize,
    pub residuals: KktResiduals,
}

/// Recomputes the KKT residuals of a candidate pair from scratch.
pub fn kkt_residuals(qp: &Qp, f: &[f64], duals: &[f64]) -> Result<KktResiduals> {
    if f.len() != qp.vars() {
        return Err(Error::DimensionMismatch {
            expected: qp.vars(),
            got: f.len(),
        });
    }
    if duals.len() != qp.constraints() {
        return Err(Error::DimensionMismatch {
            expected: qp.constraints(),
            got: duals.len(),
        });
    }
    let fv = DVector::from_column_slice(f);
    let lv = DVector::from_column_slice(duals);
    Ok(raw_residuals(&qp.q, &qp.a, &qp.g, &qp.h, &fv, &lv))
}

/// Largest constraint violation of `f`, negative when strictly interior.
pub fn max_violation(qp: &Qp, f: &[f64]) -> Result<f64> {
    if f.len() != qp.vars() {
        return Err(Error::DimensionMismatch {
            expected: qp.vars(),
            got: f.len(),
        });
    }
    let fv = DVector::from_column_slice(f);
    let gf = &qp.g * &fv;
    Ok((0..qp.constraints())
        .map(|i| gf[i] - qp.h[i])
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Finds rows tagged as the two halves of a demand equality and verifies
/// that they really are exact numeric opposites before trusting the tag.
/// Returns `(upper, lower)` row-index pairs.
fn equality_pairs(qp: &Qp) -> Vec<(usize, usize)> {
    let mut lower_of = std::collections::HashMap::new();
    for (i, kind) in qp.rows.iter().enumerate() {
        if let RowKind::DemandLower(v) = kind {
            lower_of.insert(*v, i);
        }
    }
    let mut pairs = Vec::new();
    for (u, kind) in qp.rows.iter().enumerate() {
        let RowKind::DemandUpper(v) = kind else {
            continue;
        };
        let Some(&l) = lower_of.get(v) else {
            continue;
        };
        let opposite = qp.h[l] == -qp.h[u] && (0..qp.vars()).all(|j| qp.g[(l, j)] == -qp.g[(u, j)]);
        if opposite {
            pairs.push((u, l));
        }
    }
    pairs
}

/// Solves the program. On failure to converge, runs the phase-1 diagnosis
/// so that a hopeless constraint system reports [`Error::Infeasible`]
/// instead of a vague non-convergence.
pub fn solve_qp(qp: &Qp, opts: &SolverOptions) -> Result<Solution> {
    let pairs = equality_pairs(qp);
    match interior_point(&qp.q, &qp.a, &qp.g, &qp.h, &pairs, opts) {
        Ok(raw) => Ok(Solution {
            objective: crate::objective::objective_value(qp, raw.f.as_slice())?,
            f: raw.f.data.into(),
            duals: raw.duals.data.into(),
            iterations: raw.iterations,
            residuals: raw.residuals,
        }),
        Err(err @ Error::NoConvergence { .. }) => {
            let h_norm = qp.h.amax();
            let slack = phase1_relaxation(&qp.g, &qp.h, opts)?;
            let infeasibility_floor = (100.0 * opts.tol).max(1e-6 * (1.0 + h_norm));
            if slack > infeasibility_floor {
                Err(Error::Infeasible(format!(
                    "every flow violates some constraint by at least {slack:.6e}"
                )))
            } else {
                Err(err)
            }
        }
        Err(err) => Err(err),
    }
}

struct RawSolution {
    f: DVector<f64>,
    duals: DVector<f64>,
    iterations: usize,
    residuals: KktResiduals,
}

/// Minimum uniform relaxation `t` that makes `G f <= h + t` satisfiable.
/// Near zero means the original system is feasible.
fn phase1_relaxation(g: &DMatrix<f64>, h: &DVector<f64>, opts: &SolverOptions) -> Result<f64> {
    let n = g.ncols();
    let mc = g.nrows();
    // Variables (f, t): minimise t subject to G f - t <= h and -t <= 1.
    let q = DMatrix::zeros(n + 1, n + 1);
    let mut a = DVector::zeros(n + 1);
    a[n] = 1.0;
    let mut g1 = DMatrix::zeros(mc + 1, n + 1);
    g1.view_mut((0, 0), (mc, n)).copy_from(g);
    for i in 0..mc {
        g1[(i, n)] = -1.0;
    }
    g1[(mc, n)] = -1.0;
    let mut h1 = DVector::zeros(mc + 1);
    h1.rows_mut(0, mc).copy_from(h);
    h1[mc] = 1.0;

    let phase_opts = SolverOptions {
        // The relaxation value is all that matters; solve it loosely but
        // long enough that big systems settle.
        tol: opts.tol.max(1e-8),
        max_iter: opts.max_iter.max(100),
    };
    // The relaxation column breaks any opposing pairs, so no equality
    // handling is needed here: the relaxed system has a strict interior.
    let raw = interior_point(&q, &a, &g1, &h1, &[], &phase_opts)?;
    Ok(raw.f[n])
}

/// The Mehrotra predictor-corrector loop on explicit matrices. `pairs`
/// lists `(upper, lower)` row indices that are exact opposites of each
/// other; those rows are carried as equalities with a free multiplier and
/// every other row keeps a positive slack.
fn interior_point(
    q: &DMatrix<f64>,
    a: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    pairs: &[(usize, usize)],
    opts: &SolverOptions,
) -> Result<RawSolution> {
    let n = q.nrows();
    let mc = g.nrows();

    if n == 0 {
        // Nothing to optimise; the system is feasible iff h is
        // non-negative.
        let worst = -h.min().min(0.0);
        if worst > opts.tol {
            return Err(Error::Infeasible(format!(
                "constant constraint row violated by {worst:.6e}"
            )));
        }
        return Ok(RawSolution {
            f: DVector::zeros(0),
            duals: DVector::zeros(mc),
            iterations: 0,
            residuals: KktResiduals {
                stationarity: 0.0,
                primal: worst.max(0.0),
                complementarity: 0.0,
                dual: 0.0,
            },
        });
    }
    if mc == 0 {
        return Err(Error::Domain(
            "constraint system is empty; the program is unbounded or trivial".into(),
        ));
    }

    // Split the rows: pair uppers become equality rows, everything else
    // stays an inequality.
    let mut in_pair = vec![false; mc];
    for &(u, l) in pairs {
        in_pair[u] = true;
        in_pair[l] = true;
    }
    let ineq_rows: Vec<usize> = (0..mc).filter(|&i| !in_pair[i]).collect();
    let p = pairs.len();
    let mi = ineq_rows.len();

    let a_eq = DMatrix::from_fn(p, n, |k, j| g[(pairs[k].0, j)]);
    let b_eq = DVector::from_fn(p, |k, _| h[pairs[k].0]);
    let g_i = DMatrix::from_fn(mi, n, |t, j| g[(ineq_rows[t], j)]);
    let h_i = DVector::from_fn(mi, |t, _| h[ineq_rows[t]]);

    // Sparse row patterns of the inequality block speed up the
    // normal-matrix assembly; the non-negativity rows are single entries
    // and the delivery rows touch only the paths into one node.
    let patterns: Vec<Vec<(usize, f64)>> = (0..mi)
        .map(|t| {
            (0..n)
                .filter(|&j| g_i[(t, j)] != 0.0)
                .map(|j| (j, g_i[(t, j)]))
                .collect()
        })
        .collect();

    let mut f = DVector::zeros(n);
    let mut s = DVector::from_fn(mi, |t, _| h_i[t].max(1.0));
    let mut lambda = DVector::from_element(mi, 1.0);
    let mut nu = DVector::zeros(p);

    // Duals for the original all-inequality system: the equality
    // multiplier splits over its pair by sign, which changes nothing in
    // `G' duals` and keeps both entries non-negative.
    let full_duals = |lambda: &DVector<f64>, nu: &DVector<f64>| {
        let mut full = DVector::zeros(mc);
        for (t, &row) in ineq_rows.iter().enumerate() {
            full[row] = lambda[t];
        }
        for (k, &(u, l)) in pairs.iter().enumerate() {
            full[u] = nu[k].max(0.0);
            full[l] = (-nu[k]).max(0.0);
        }
        full
    };

    let two_q = q * 2.0;
    let scale = two_q.amax().max(1.0);

    let mut residuals = KktResiduals {
        stationarity: f64::INFINITY,
        primal: f64::INFINITY,
        complementarity: f64::INFINITY,
        dual: f64::INFINITY,
    };

    for iter in 0..opts.max_iter {
        let duals = full_duals(&lambda, &nu);
        residuals = raw_residuals(q, a, g, h, &f, &duals);
        log::debug!(
            "iter {iter}: stationarity {:.3e} primal {:.3e} complementarity {:.3e}",
            residuals.stationarity,
            residuals.primal,
            residuals.complementarity
        );
        if residuals.within(opts.tol) {
            return Ok(RawSolution {
                f,
                duals,
                iterations: iter,
                residuals,
            });
        }
        let dual_scale = lambda
            .iter()
            .chain(nu.iter())
            .fold(0.0f64, |acc, &x| acc.max(x.abs()));
        if !residuals.max().is_finite() || dual_scale > 1e14 {
            // Diverging duals: almost always an infeasible system; let the
            // caller run the phase-1 diagnosis.
            break;
        }

        // Equality duals fold into the gradient, so the inequality-block
        // algebra below is unchanged by their presence.
        let grad = &two_q * &f + a + a_eq.transpose() * &nu;
        let r_p = &g_i * &f + &s - &h_i;
        let r_eq = &a_eq * &f - &b_eq;

        // Normal matrix M = 2Q + G' diag(lambda/s) G, assembled from the
        // row patterns.
        let mut m = two_q.clone();
        for (t, pat) in patterns.iter().enumerate() {
            let d = (lambda[t] / s[t]).min(SCALING_CAP);
            for &(j, vj) in pat {
                for &(k, vk) in pat {
                    m[(j, k)] += d * vj * vk;
                }
            }
        }

        let no_convergence = || Error::NoConvergence {
            iterations: iter,
            residual: residuals.max(),
        };
        let chol = factor_with_regularisation(&m, scale).ok_or_else(no_convergence)?;

        // Schur complement over the equality block, reusing the same
        // factorisation for both solves of this iteration.
        let x_eq = chol.solve(&a_eq.transpose());
        let chol_eq = if p > 0 {
            let w = &a_eq * &x_eq;
            Some(factor_with_regularisation(&w, w.amax().max(1.0)).ok_or_else(no_convergence)?)
        } else {
            None
        };
        let solve_kkt = |rhs: &DVector<f64>| {
            let y = chol.solve(rhs);
            match &chol_eq {
                Some(w) => {
                    let dn = w.solve(&(&a_eq * &y + &r_eq));
                    (y - &x_eq * &dn, dn)
                }
                None => (y, DVector::zeros(0)),
            }
        };

        // Predictor: pure Newton step toward complementarity zero.
        let rhs_aff = build_rhs(&grad, &g_i, &s, &lambda, &r_p, None);
        let (df_aff, _) = solve_kkt(&rhs_aff);
        let ds_aff = -&r_p - &g_i * &df_aff;
        let dl_aff = DVector::from_fn(mi, |t, _| {
            (-lambda[t] * s[t] - lambda[t] * ds_aff[t]) / s[t]
        });

        let alpha_p_aff = boundary_step(&s, &ds_aff);
        let alpha_d_aff = boundary_step(&lambda, &dl_aff);
        let mu = if mi > 0 {
            s.dot(&lambda) / mi as f64
        } else {
            0.0
        };
        let mu_aff = if mi > 0 {
            (&s + &ds_aff * alpha_p_aff.min(1.0)).dot(&(&lambda + &dl_aff * alpha_d_aff.min(1.0)))
                / mi as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 {
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // Corrector: recentre and compensate the predictor's second-order
        // complementarity error.
        let target = DVector::from_fn(mi, |t, _| sigma * mu - ds_aff[t] * dl_aff[t]);
        let rhs = build_rhs(&grad, &g_i, &s, &lambda, &r_p, Some(&target));
        let (df, dn) = solve_kkt(&rhs);
        let ds = -&r_p - &g_i * &df;
        let dl = DVector::from_fn(mi, |t, _| {
            (target[t] - lambda[t] * s[t] - lambda[t] * ds[t]) / s[t]
        });

        let alpha_p = (STEP_DAMPING * boundary_step(&s, &ds)).min(1.0);
        let alpha_d = (STEP_DAMPING * boundary_step(&lambda, &dl)).min(1.0);

        f += &df * alpha_p;
        s += &ds * alpha_p;
        lambda += &dl * alpha_d;
        nu += &dn * alpha_d;
        // Keep the state strictly positive against rounding.
        for x in s.iter_mut() {
            *x = x.max(1e-300);
        }
        for x in lambda.iter_mut() {
            *x = x.max(1e-300);
        }
    }

    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: residuals.max(),
    })
}

/// Right-hand side of the normal equations. `target` is the desired
/// complementarity vector (`None` for the pure predictor, i.e. zero).
fn build_rhs(
    grad: &DVector<f64>,
    g: &DMatrix<f64>,
    s: &DVector<f64>,
    lambda: &DVector<f64>,
    r_p: &DVector<f64>,
    target: Option<&DVector<f64>>,
) -> DVector<f64> {
    let mc = s.len();
    let w = DVector::from_fn(mc, |i, _| {
        let v = target.map_or(0.0, |t| t[i]);
        (v + lambda[i] * r_p[i]) / s[i]
    });
    -grad - g.transpose() * w
}

/// Cholesky of `m + delta I`, raising `delta` geometrically until the
/// factorisation succeeds or the regularisation ceiling is hit.
fn factor_with_regularisation(
    m: &DMatrix<f64>,
    scale: f64,
) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let mut delta = REG_MIN * scale;
    while delta <= REG_MAX * scale {
        let mut reg = m.clone();
        for j in 0..reg.nrows() {
            reg[(j, j)] += delta;
        }
        if let Some(chol) = Cholesky::new(reg) {
            return Some(chol);
        }
        delta *= 100.0;
    }
    None
}

/// Largest step in `[0, 1]`-ish keeping `x + alpha dx` non-negative;
/// unbounded directions get 1.
fn boundary_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    let mut alpha = 1.0f64;
    for i in 0..x.len() {
        if dx[i] < 0.0 {
            alpha = alpha.min(-x[i] / dx[i]);
        }
    }
    alpha
}

fn raw_residuals(
    q: &DMatrix<f64>,
    a: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    f: &DVector<f64>,
    lambda: &DVector<f64>,
) -> KktResiduals {
    let grad = q * f * 2.0 + a + g.transpose() * lambda;
    let gf = g * f;
    let mut primal = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..h.len() {
        let viol = gf[i] - h[i];
        primal = primal.max(viol);
        comp = comp.max((lambda[i] * viol).abs());
    }
    KktResiduals {
        stationarity: grad.amax(),
        primal: primal.max(0.0),
        complementarity: comp,
        dual: (-lambda.min()).max(0.0),
    }
}

/// Exhaustive search over a regular grid; the reference answer for small
/// programs.
///
/// Supports at most four variables. The search box is `[0, ub_j]` per
/// variable, where `ub_j` comes from constraint rows with all-non-negative
/// coefficients (for our programs: the per-node delivery rows). Returns
/// the best feasible grid point and its objective value.
pub fn grid_solve(qp: &Qp, resolution: usize) -> Result<(Vec<f64>, f64)> {
    let n = qp.vars();
    if n == 0 || n > 4 {
        return Err(Error::OracleDimension { limit: 4, got: n });
    }
    if resolution < 2 {
        return Err(Error::Domain(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }

    let mc = qp.constraints();
    let mut upper = vec![f64::INFINITY; n];
    for i in 0..mc {
        if (0..n).any(|j| qp.g[(i, j)] < 0.0) {
            continue;
        }
        for (j, ub) in upper.iter_mut().enumerate() {
            if qp.g[(i, j)] > 0.0 {
                *ub = ub.min(qp.h[i] / qp.g[(i, j)]);
            }
        }
    }
    for (j, ub) in upper.iter().enumerate() {
        if !ub.is_finite() {
            return Err(Error::Domain(format!(
                "variable {j} has no all-non-negative bounding row; the grid box is unbounded"
            )));
        }
        if *ub < 0.0 {
            return Err(Error::Infeasible(format!(
                "variable {j} is forced below zero by an all-non-negative row"
            )));
        }
    }

    let feas_tol = 1e-9 * (1.0 + qp.h.amax());
    let steps: Vec<f64> = upper
        .iter()
        .map(|ub| ub / (resolution - 1) as f64)
        .collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut f = vec![0.0; n];
    let mut idx = vec![0usize; n];
    loop {
        for (j, fj) in f.iter_mut().enumerate() {
            *fj = steps[j] * idx[j] as f64;
        }
        let feasible = (0..mc).all(|i| {
            let gf: f64 = f.iter().enumerate().map(|(j, fj)| qp.g[(i, j)] * fj).sum();
            gf <= qp.h[i] + feas_tol
        });
        if feasible {
            let mut j_val = qp.constant;
            for r in 0..n {
                j_val += qp.a[r] * f[r];
                for c in 0..n {
                    j_val += f[r] * qp.q[(r, c)] * f[c];
                }
            }
            if best.as_ref().is_none_or(|(_, b)| j_val < *b) {
                best = Some((f.clone(), j_val));
            }
        }

        // Odometer increment over the grid indices.
        let mut carry = 0;
        loop {
            idx[carry] += 1;
            if idx[carry] < resolution {
                break;
            }
            idx[carry] = 0;
            carry += 1;
            if carry == n {
                return best.ok_or_else(|| {
                    Error::Infeasible("no grid point satisfies the constraints".into())
                });
            }
        }
    }
}
