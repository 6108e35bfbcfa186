//! Riemannian conjugate gradient on the scaled complex oblique manifold
//! `{F : every row of F has norm √(P/N_t)}`, used for the per-UE precoder
//! subproblem `min ρ‖AᴴH_k F − I‖² + (1−ρ)‖F − F0‖²`.
//!
//! Inner products are `Re tr(Xᴴ Y)`. Tangency at `F` means every row `z_n`
//! of `Z` satisfies `Re⟨f_n, z_n⟩ = 0`; transport is tangent projection and
//! retraction is row renormalization.

use crate::error::{dims, input, Error, Result};
use crate::linalg::{c, fro2, inner, normalize_rows, CMat};

/// A feasible precoder: all rows have norm `row_norm`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliquePoint {
    pub f: CMat,
    pub row_norm: f64,
}

impl ObliquePoint {
    /// Wraps `f`, checking every row norm to 1e-9.
    pub fn new(f: CMat, row_norm: f64) -> Result<Self> {
        let worst = row_norm_defect(&f, row_norm);
        if worst > 1e-9 {
            return Err(input(format!("row norms deviate from {row_norm} by {worst:e}")));
        }
        Ok(Self { f, row_norm })
    }

    /// Nearest feasible point (row renormalization).
    pub fn project(f: &CMat, row_norm: f64) -> Result<Self> {
        Ok(Self { f: normalize_rows(f, row_norm)?, row_norm })
    }
}

/// Largest `|‖f_n‖ − target|` over rows.
pub fn row_norm_defect(f: &CMat, target: f64) -> f64 {
    f.row_iter()
        .map(|row| (row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - target).abs())
        .fold(0.0, f64::max)
}

/// Tangent vector at some base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub z: CMat,
}

/// Largest `|Re⟨f_n, z_n⟩|` over rows; zero for a tangent vector.
pub fn tangency_defect(f: &CMat, z: &CMat) -> f64 {
    f.row_iter()
        .zip(z.row_iter())
        .map(|(fr, zr)| fr.iter().zip(zr.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// Stacked least-squares form `‖C F − D‖²` of the weighted precoder objective,
/// with `C = [√ρ AᴴH ; √(1−ρ) I]` and `D = [√ρ I ; √(1−ρ) F0]`.
#[derive(Debug, Clone)]
pub struct StackedLs {
    pub c: CMat,
    pub d: CMat,
}

impl StackedLs {
    pub fn objective(&self, f: &CMat) -> f64 {
        fro2(&(&self.c * f - &self.d))
    }
}

pub fn build_stacked_ls(a: &CMat, h: &CMat, f0: &CMat, rho: f64) -> Result<StackedLs> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(input(format!("rho must lie in [0, 1], got {rho}")));
    }
    let (n_a, m) = a.shape();
    let n_t = h.ncols();
    if h.nrows() != n_a || f0.shape() != (n_t, m) {
        return Err(dims(format!(
            "A is {n_a}x{m}, H is {}x{n_t}, F0 is {}x{}",
            h.nrows(),
            f0.nrows(),
            f0.ncols()
        )));
    }
    let w1 = c(rho.sqrt(), 0.0);
    let w2 = c((1.0 - rho).sqrt(), 0.0);
    let mut cm = CMat::zeros(m + n_t, n_t);
    cm.rows_mut(0, m).copy_from(&(a.adjoint() * h * w1));
    cm.rows_mut(m, n_t).copy_from(&(CMat::identity(n_t, n_t) * w2));
    let mut dm = CMat::zeros(m + n_t, m);
    dm.rows_mut(0, m).copy_from(&(CMat::identity(m, m) * w1));
    dm.rows_mut(m, n_t).copy_from(&(f0 * w2));
    Ok(StackedLs { c: cm, d: dm })
}

/// Euclidean gradient `2 Cᴴ (C F − D)`.
pub fn euclidean_gradient(ls: &StackedLs, f: &CMat) -> CMat {
    ls.c.adjoint() * (&ls.c * f - &ls.d) * c(2.0, 0.0)
}

/// Row-wise orthogonal projection onto the tangent space at `f`:
/// `z_n = g_n − (Re⟨f_n, g_n⟩ / ‖f_n‖²) f_n`.
pub fn tangent_project(f: &ObliquePoint, g: &CMat) -> TangentVector {
    let mut z = g.clone();
    for (n, mut row) in z.row_iter_mut().enumerate() {
        let fr = f.f.row(n);
        let num: f64 = fr.iter().zip(row.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
        let den: f64 = fr.iter().map(|a| a.norm_sqr()).sum();
        let coef = c(num / den, 0.0);
        for (zj, fj) in row.iter_mut().zip(fr.iter()) {
            *zj -= coef * fj;
        }
    }
    TangentVector { z }
}

/// Retraction by row renormalization of `F + Z`.
pub fn retract(f: &ObliquePoint, z: &TangentVector) -> Result<ObliquePoint> {
    ObliquePoint::project(&(&f.f + &z.z), f.row_norm)
}

/// Vector transport by projection onto the tangent space at `to`.
pub fn transport(_from: &ObliquePoint, to: &ObliquePoint, mu: &TangentVector) -> TangentVector {
    tangent_project(to, &mu.z)
}

pub fn riemannian_gradient(ls: &StackedLs, f: &ObliquePoint) -> TangentVector {
    tangent_project(f, &euclidean_gradient(ls, &f.f))
}

/// Line-search settings.
///
/// With `quadratic_start` the first trial step is the exact minimizer of the
/// ambient quadratic along the search direction, `−⟨grad, μ⟩ / (2‖Cμ‖²)`;
/// otherwise it is `initial_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Armijo {
    pub quadratic_start: bool,
    pub initial_step: f64,
    pub backtrack: f64,
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Self { quadratic_start: true, initial_step: 1.0, backtrack: 0.5, c1: 1e-4, max_backtracks: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcgStatus {
    Converged,
    MaxIter,
    /// Neither the CG direction nor steepest descent gave sufficient decrease.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct RcgState {
    pub iterate: ObliquePoint,
    pub direction: TangentVector,
    pub step: f64,
    pub pr_coeff: f64,
    pub grad_norm: f64,
    pub objective_trace: Vec<f64>,
    /// Accepted step sizes, one per iteration.
    pub steps: Vec<f64>,
    /// `Re⟨grad, μ⟩` at each accepted iteration.
    pub slopes: Vec<f64>,
    pub iterations: usize,
    /// Iterations where the CG direction was replaced by steepest descent.
    pub steepest_fallbacks: usize,
    pub status: RcgStatus,
}

fn line_search(
    ls: &StackedLs,
    x: &ObliquePoint,
    fx: f64,
    mu: &TangentVector,
    slope: f64,
    armijo: &Armijo,
) -> Result<Option<(ObliquePoint, f64, f64)>> {
    let mut step = armijo.initial_step;
    if armijo.quadratic_start {
        let curvature = fro2(&(&ls.c * &mu.z));
        if curvature > 0.0 {
            step = -slope / (2.0 * curvature);
        }
    }
    for _ in 0..=armijo.max_backtracks {
        let cand = retract(x, &TangentVector { z: &mu.z * c(step, 0.0) })?;
        let fc = ls.objective(&cand.f);
        if fc <= fx + armijo.c1 * step * slope {
            return Ok(Some((cand, fc, step)));
        }
        step *= armijo.backtrack;
    }
    Ok(None)
}

/// Minimizes `‖C F − D‖²` over the oblique manifold from `init`.
pub fn rcg_solve(ls: &StackedLs, init: &ObliquePoint, eps: f64, max_iter: usize) -> Result<(ObliquePoint, RcgState)> {
    rcg_solve_with(ls, init, eps, max_iter, &Armijo::default())
}

pub fn rcg_solve_with(
    ls: &StackedLs,
    init: &ObliquePoint,
    eps: f64,
    max_iter: usize,
    armijo: &Armijo,
) -> Result<(ObliquePoint, RcgState)> {
    if ls.c.ncols() != init.f.nrows() || ls.d.ncols() != init.f.ncols() {
        return Err(dims("initial precoder does not match the stacked system"));
    }
    if row_norm_defect(&init.f, init.row_norm) > 1e-9 {
        return Err(input("initial precoder is not on the manifold"));
    }
    let mut x = init.clone();
    let mut fx = ls.objective(&x.f);
    let mut g = riemannian_gradient(ls, &x);
    let mut gn2 = fro2(&g.z);
    let mut state = RcgState {
        iterate: x.clone(),
        direction: TangentVector { z: -&g.z },
        step: 0.0,
        pr_coeff: 0.0,
        grad_norm: gn2.sqrt(),
        objective_trace: vec![fx],
        steps: Vec::new(),
        slopes: Vec::new(),
        iterations: 0,
        steepest_fallbacks: 0,
        status: RcgStatus::MaxIter,
    };
    if gn2.sqrt() < eps {
        state.status = RcgStatus::Converged;
        return Ok((x, state));
    }
    let mut mu = TangentVector { z: -&g.z };
    let mut prev: Option<(ObliquePoint, TangentVector, f64)> = None;

    while state.iterations < max_iter {
        if let Some((px, pg, pgn2)) = &prev {
            let pg_t = transport(px, &x, pg);
            let alpha = (inner(&g.z, &(&g.z - &pg_t.z)) / pgn2).max(0.0);
            let mu_t = transport(px, &x, &mu);
            mu = TangentVector { z: &mu_t.z * c(alpha, 0.0) - &g.z };
            state.pr_coeff = alpha;
        }
        let mut slope = inner(&g.z, &mu.z);
        if slope >= 0.0 {
            mu = TangentVector { z: -&g.z };
            slope = -gn2;
            state.steepest_fallbacks += 1;
        }
        let mut accepted = line_search(ls, &x, fx, &mu, slope, armijo)?;
        if accepted.is_none() && slope != -gn2 {
            mu = TangentVector { z: -&g.z };
            slope = -gn2;
            state.steepest_fallbacks += 1;
            accepted = line_search(ls, &x, fx, &mu, slope, armijo)?;
        }
        let Some((next, fnext, step)) = accepted else {
            state.status = RcgStatus::LineSearchFailed;
            break;
        };
        prev = Some((x, g, gn2));
        x = next;
        fx = fnext;
        g = riemannian_gradient(ls, &x);
        gn2 = fro2(&g.z);
        state.iterations += 1;
        state.step = step;
        state.steps.push(step);
        state.slopes.push(slope);
        state.objective_trace.push(fx);
        if gn2.sqrt() < eps {
            state.status = RcgStatus::Converged;
            break;
        }
    }
    if !x.f.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numeric("RCG iterate became non-finite".into()));
    }
    state.iterate = x.clone();
    state.direction = mu;
    state.grad_norm = gn2.sqrt();
    Ok((x, state))
}
