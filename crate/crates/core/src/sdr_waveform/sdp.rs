//! First-order solver for the lifted program
//! `min tr(C X)  s.t.  diag(X) = 1, tr(D X) ≤ ζ, X ⪰ 0`
//! over Hermitian `X`, by ADMM between the affine/half-space constraints and
//! the PSD cone.

use crate::error::{input, Result};
use crate::linalg::{c, fro2, hermitian_eigen, inner, symmetrize, CMat};

use super::HomogenizedBqp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// PSD, unit-diagonal, similarity-feasible matrix.
    pub x_star: CMat,
    /// `tr(Q_obj X⋆)`.
    pub objective_value: f64,
    /// Certified lower bound on the relaxation optimum (weak duality).
    pub dual_bound: f64,
    pub solver_status: SdpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Over-relaxation factor of the ADMM splitting.
const RELAXATION: f64 = 1.6;
/// Iterations between duality-gap checks once the residuals are small.
const GAP_CHECK_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest accepted lifted dimension `N_t·T + 1`.
    pub max_dim: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 50_000, max_dim: 256 }
    }
}

/// Projection onto the PSD cone.
pub fn project_psd(m: &CMat) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    let keep = values.iter().take_while(|&&v| v > 0.0).count();
    if keep == 0 {
        return CMat::zeros(n, n);
    }
    let mut scaled = vectors.columns(0, keep).into_owned();
    for (j, v) in values.iter().take(keep).enumerate() {
        scaled.column_mut(j).scale_mut(*v);
    }
    symmetrize(&(scaled * vectors.columns(0, keep).adjoint()))
}

/// Projection onto `{X : diag(X) = 1, ⟨D, X⟩ ≤ ζ}` for Hermitian `X`.
struct AffineProjector {
    d: CMat,
    d_diag: Vec<f64>,
    zeta: f64,
    denom: f64,
}

impl AffineProjector {
    fn new(d: &CMat, zeta: f64) -> Self {
        let d_diag: Vec<f64> = (0..d.nrows()).map(|i| d[(i, i)].re).collect();
        let denom = d_diag.iter().map(|x| x * x).sum::<f64>() - fro2(d);
        Self { d: d.clone(), d_diag, zeta, denom }
    }

    fn project(&self, y: &CMat) -> CMat {
        let mut x = y.clone();
        for i in 0..x.nrows() {
            x[(i, i)] = c(1.0, 0.0);
        }
        if inner(&self.d, &x) <= self.zeta || self.denom.abs() < 1e-300 {
            return x;
        }
        // diag = 1 and ⟨D, X⟩ = ζ: X = Y − Σ λ_i E_ii − μ D
        let y_diag_sum: f64 = self.d_diag.iter().enumerate().map(|(i, di)| di * (y[(i, i)].re - 1.0)).sum();
        let mu = (self.zeta - inner(&self.d, y) + y_diag_sum) / self.denom;
        let mut x = y - &self.d * c(mu, 0.0);
        for i in 0..x.nrows() {
            x[(i, i)] = c(1.0, 0.0);
        }
        x
    }
}

pub fn solve_sdp(p: &HomogenizedBqp, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    solve_sdp_with(p, &SdpOptions { tol, max_iter, ..SdpOptions::default() })
}

pub fn solve_sdp_with(p: &HomogenizedBqp, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = p.q_obj.nrows();
    if n > opts.max_dim {
        return Err(input(format!(
            "lifted dimension {n} exceeds the configured cap {}; raise max_dim for full-size runs",
            opts.max_dim
        )));
    }
    if p.q_sc.shape() != (n, n) {
        return Err(input("objective and similarity matrices differ in size"));
    }
    let scale = fro2(&p.q_obj).sqrt().max(1e-300);
    let cost = &p.q_obj * c(1.0 / scale, 0.0);
    let affine = AffineProjector::new(&p.q_sc, p.zeta);

    let mut z = feasible_anchor(p);
    let mut u = CMat::zeros(n, n);
    // cost has unit norm and X has norm about n
    let mut rho = 1.0 / n as f64;
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let mut last_check = 0;
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut bound = f64::NEG_INFINITY;
    let mut best: Option<(f64, CMat)> = None;
    let mut x = z.clone();

    while iterations < opts.max_iter {
        iterations += 1;
        x = affine.project(&(&z - &u - &cost * c(1.0 / rho, 0.0)));
        let relaxed = &x * c(RELAXATION, 0.0) + &z * c(1.0 - RELAXATION, 0.0);
        let z_old = z;
        z = project_psd(&(&relaxed + &u));
        u += &relaxed - &z;
        r_norm = fro2(&(&x - &z)).sqrt();
        s_norm = rho * fro2(&(&z - &z_old)).sqrt();
        if iterations - last_check >= GAP_CHECK_EVERY {
            last_check = iterations;
            bound = bound.max(dual_bound(p, &u, rho * scale));
            if let Some(cand) = best_feasible(&x, &z, p) {
                let value = inner(&p.q_obj, &cand);
                if best.as_ref().is_none_or(|(v, _)| value < *v) {
                    best = Some((value, cand));
                }
            }
            if let Some((value, _)) = &best {
                if value - bound <= opts.tol * value.abs().max(1.0) {
                    status = SdpStatus::Converged;
                    break;
                }
            }
        }
        if iterations % 10 == 0 {
            if r_norm > 10.0 * s_norm {
                rho *= 2.0;
                u *= c(0.5, 0.0);
            } else if s_norm > 10.0 * r_norm {
                rho *= 0.5;
                u *= c(2.0, 0.0);
            }
        }
    }
    bound = bound.max(dual_bound(p, &u, rho * scale));
    if let Some(cand) = best_feasible(&x, &z, p) {
        let value = inner(&p.q_obj, &cand);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, cand));
        }
    }

    let Some((objective_value, x_star)) = best else {
        return Ok(SdpSolution {
            objective_value: inner(&p.q_obj, &z),
            dual_bound: bound,
            x_star: z,
            solver_status: SdpStatus::Infeasible,
            iterations,
            primal_residual: r_norm,
            dual_residual: s_norm,
        });
    };
    Ok(SdpSolution {
        objective_value,
        dual_bound: bound,
        x_star,
        solver_status: status,
        iterations,
        primal_residual: r_norm,
        dual_residual: s_norm,
    })
}

/// Feasible point with the smaller objective among the polished PSD iterate
/// `z` and the affine iterate `x` shifted into the PSD cone.
fn best_feasible(x: &CMat, z: &CMat, p: &HomogenizedBqp) -> Option<CMat> {
    let (values, _) = hermitian_eigen(x);
    let low = values.last().copied().unwrap_or(0.0);
    let shifted = if low < 0.0 {
        let n = x.nrows();
        (x - CMat::identity(n, n) * c(low, 0.0)) * c(1.0 / (1.0 - low), 0.0)
    } else {
        x.clone()
    };
    [polish(z, p), polish(&shifted, p)]
        .into_iter()
        .flatten()
        .min_by(|a, b| inner(&p.q_obj, a).total_cmp(&inner(&p.q_obj, b)))
}

/// Lower bound on the SDP optimum from the scaled ADMM dual `u`
/// (`y_scale = ρ · cost scale`).
///
/// `S = −y_scale·u` approximates the dual slack `Q_obj − Diag(y) + μ Q_sc`.
/// `μ ≥ 0` is fitted on the off-diagonal entries and `y` read off the
/// diagonal; lowering every `y_i` by the smallest eigenvalue of the resulting
/// slack makes the pair dual feasible, so `Σ y − μ ζ` bounds the optimum.
fn dual_bound(p: &HomogenizedBqp, u: &CMat, y_scale: f64) -> f64 {
    let n = p.q_obj.nrows();
    let slack = u * c(-y_scale, 0.0);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            if i != j {
                let d = p.q_sc[(i, j)];
                num += ((slack[(i, j)] - p.q_obj[(i, j)]) * d.conj()).re;
                den += d.norm_sqr();
            }
        }
    }
    let mu = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    let mut s = &p.q_obj + &p.q_sc * c(mu, 0.0);
    let y: Vec<f64> = (0..n).map(|i| s[(i, i)].re - slack[(i, i)].re).collect();
    for (i, yi) in y.iter().enumerate() {
        s[(i, i)] -= c(*yi, 0.0);
    }
    let (values, _) = hermitian_eigen(&symmetrize(&s));
    let shift = values.last().copied().unwrap_or(0.0).min(0.0);
    y.iter().map(|yi| yi + shift).sum::<f64>() - mu * p.zeta
}

/// Lifted reference point `[x0; 1][x0; 1]ᴴ`, which is always feasible.
fn feasible_anchor(p: &HomogenizedBqp) -> CMat {
    let n = p.q_sc.nrows();
    // the last column of Q_sc is [−x0; ‖x0‖²]
    let mut v = p.q_sc.column(n - 1).into_owned();
    for i in 0..n - 1 {
        v[i] = -v[i];
    }
    v[n - 1] = c(1.0, 0.0);
    &v * v.adjoint()
}

/// Maps a PSD iterate to an exactly unit-diagonal, similarity-feasible point:
/// rescale to unit diagonal, then blend with the feasible anchor if the
/// similarity constraint is still violated.
fn polish(z: &CMat, p: &HomogenizedBqp) -> Option<CMat> {
    let n = z.nrows();
    let d: Vec<f64> = (0..n).map(|i| z[(i, i)].re).collect();
    if d.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mut x = CMat::from_fn(n, n, |i, j| z[(i, j)] / (d[i] * d[j]).sqrt());
    for i in 0..n {
        x[(i, i)] = c(1.0, 0.0);
    }
    let x = symmetrize(&x);
    let lhs = inner(&p.q_sc, &x);
    if lhs <= p.zeta {
        return Some(x);
    }
    let anchor = feasible_anchor(p);
    let base = inner(&p.q_sc, &anchor);
    if base > p.zeta {
        return None;
    }
    let lambda = (lhs - p.zeta) / (lhs - base);
    let mut blended = &x * c(1.0 - lambda, 0.0) + anchor * c(lambda, 0.0);
    for i in 0..n {
        blended[(i, i)] = c(1.0, 0.0);
    }
    Some(blended)
}
