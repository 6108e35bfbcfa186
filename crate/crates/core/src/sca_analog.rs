//! Analog combiner design by successive convex approximation over the phase
//! vector. `U_rf(i, j) = exp(jθ[j·N_a + i])` keeps every entry unit-modulus.

use std::f64::consts::TAU;

use crate::digital_combiner::ReceiveMoments;
use crate::error::{dims, input, Result};
use crate::linalg::{c, hermitian_eigen, CMat, J};
use crate::model::ChannelSet;

/// Phase vector of length `N_a · N_rf`, stored in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogPhases {
    pub theta: Vec<f64>,
}

impl AnalogPhases {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta: theta.into_iter().map(wrap).collect() }
    }
}

/// Unit-modulus analog combiner (`N_a × N_rf`).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogCombiner {
    pub u_rf: CMat,
}

fn wrap(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn phases_to_matrix(theta: &AnalogPhases, n_a: usize, n_rf: usize) -> Result<AnalogCombiner> {
    if theta.theta.len() != n_a * n_rf {
        return Err(input(format!(
            "{} phases for a {n_a}x{n_rf} combiner",
            theta.theta.len()
        )));
    }
    Ok(AnalogCombiner {
        u_rf: CMat::from_iterator(n_a, n_rf, theta.theta.iter().map(|&t| c(t.cos(), t.sin()))),
    })
}

/// Phases of the entries of `U`, column-major.
pub fn matrix_to_phases(u: &CMat) -> AnalogPhases {
    AnalogPhases::new(u.iter().map(|z| z.arg()).collect())
}

fn check_shapes(u_rf: &CMat, u_bb: &CMat, moments: &ReceiveMoments) -> Result<()> {
    if u_rf.ncols() != u_bb.nrows() || u_bb.ncols() != moments.b.ncols() || u_rf.nrows() != moments.r.nrows() {
        return Err(dims(format!(
            "U_rf is {:?}, U_bb is {:?}, receive statistics are {:?}",
            u_rf.shape(),
            u_bb.shape(),
            moments.b.shape()
        )));
    }
    Ok(())
}

/// `tr(Aᴴ R A) − 2 Re tr(Aᴴ B) + K·M` with `A = U_rf U_bb`.
fn objective_from_moments(u_rf: &CMat, u_bb: &CMat, moments: &ReceiveMoments, k: usize) -> f64 {
    let a = u_rf * u_bb;
    let quad = a.dotc(&(&moments.r * &a)).re;
    let lin = a.dotc(&moments.b).re;
    quad - 2.0 * lin + (k * u_bb.ncols()) as f64
}

/// `F_r = R U_rf U_bb U_bbᴴ − B U_bbᴴ` and `γ = −vec(2 Re[j U_rf* ∘ F_r])`.
fn gradient_from_moments(u_rf: &CMat, u_bb: &CMat, moments: &ReceiveMoments) -> Vec<f64> {
    let f_r = &moments.r * u_rf * u_bb * u_bb.adjoint() - &moments.b * u_bb.adjoint();
    u_rf.iter()
        .zip(f_r.iter())
        .map(|(u, f)| -2.0 * (J * u.conj() * f).re)
        .collect()
}

/// Aggregation MSE as a function of the analog phases.
pub fn analog_objective(
    theta: &AnalogPhases,
    u_bb: &CMat,
    channels: &ChannelSet,
    precoders: &[CMat],
    sigma2: f64,
) -> Result<f64> {
    let moments = ReceiveMoments::new(channels, precoders, sigma2)?;
    let u_rf = phases_to_matrix(theta, moments.r.nrows(), u_bb.nrows())?.u_rf;
    check_shapes(&u_rf, u_bb, &moments)?;
    Ok(objective_from_moments(&u_rf, u_bb, &moments, channels.len()))
}

/// Gradient of [`analog_objective`] with respect to the phases.
pub fn sca_gradient(
    theta: &AnalogPhases,
    u_bb: &CMat,
    channels: &ChannelSet,
    precoders: &[CMat],
    sigma2: f64,
) -> Result<Vec<f64>> {
    let moments = ReceiveMoments::new(channels, precoders, sigma2)?;
    let u_rf = phases_to_matrix(theta, moments.r.nrows(), u_bb.nrows())?.u_rf;
    check_shapes(&u_rf, u_bb, &moments)?;
    Ok(gradient_from_moments(&u_rf, u_bb, &moments))
}

/// Minimizer of the proximal surrogate: `θ ← mod(θ − γ/(2τ), 2π)`.
pub fn sca_update(theta_r: &AnalogPhases, gamma: &[f64], tau: f64) -> AnalogPhases {
    AnalogPhases {
        theta: theta_r
            .theta
            .iter()
            .zip(gamma)
            .map(|(t, g)| wrap(t - g / (2.0 * tau)))
            .collect(),
    }
}

/// Warm start: entry phases of the `N_rf` dominant left singular vectors of
/// `Σ_k H_k`. Columns beyond the rank come from the remaining eigenvectors of
/// `(Σ H_k)(Σ H_k)ᴴ`.
pub fn warm_start_phases(channels: &ChannelSet, n_rf: usize) -> Result<AnalogPhases> {
    let first = channels.h.first().ok_or_else(|| dims("no channels"))?;
    if n_rf > first.nrows() {
        return Err(input(format!("N_rf = {n_rf} exceeds N_a = {}", first.nrows())));
    }
    let mut sum = CMat::zeros(first.nrows(), first.ncols());
    for h in &channels.h {
        sum += h;
    }
    let (_, vectors) = hermitian_eigen(&(&sum * sum.adjoint()));
    Ok(matrix_to_phases(&vectors.columns(0, n_rf).into_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaStatus {
    Converged,
    MaxIter,
    /// No τ in the backtracking range produced a non-increasing objective.
    NoDescent,
}

#[derive(Debug, Clone)]
pub struct ScaState {
    pub theta: AnalogPhases,
    /// Last computed gradient γ.
    pub grad: Vec<f64>,
    pub objective_trace: Vec<f64>,
    /// τ actually used by the last accepted update.
    pub tau_effective: f64,
    pub iterations: usize,
    pub status: ScaStatus,
}

/// Doublings of τ tried before an update is rejected.
pub const TAU_DOUBLINGS: usize = 20;

#[allow(clippy::too_many_arguments)]
pub fn sca_solve(
    theta_init: &AnalogPhases,
    u_bb: &CMat,
    channels: &ChannelSet,
    precoders: &[CMat],
    sigma2: f64,
    tau: f64,
    eps: f64,
    max_iter: usize,
) -> Result<(AnalogPhases, ScaState)> {
    if !(tau > 0.0) {
        return Err(input(format!("tau must be positive, got {tau}")));
    }
    let moments = ReceiveMoments::new(channels, precoders, sigma2)?;
    let (n_a, n_rf) = (moments.r.nrows(), u_bb.nrows());
    let k = channels.len();
    let mut theta = AnalogPhases::new(theta_init.theta.clone());
    let mut u_rf = phases_to_matrix(&theta, n_a, n_rf)?.u_rf;
    check_shapes(&u_rf, u_bb, &moments)?;
    let mut f = objective_from_moments(&u_rf, u_bb, &moments, k);
    let mut state = ScaState {
        theta: theta.clone(),
        grad: Vec::new(),
        objective_trace: vec![f],
        tau_effective: tau,
        iterations: 0,
        status: ScaStatus::MaxIter,
    };
    while state.iterations < max_iter {
        let gamma = gradient_from_moments(&u_rf, u_bb, &moments);
        let mut tau_eff = tau;
        let mut accepted = None;
        for _ in 0..=TAU_DOUBLINGS {
            let cand = sca_update(&theta, &gamma, tau_eff);
            let cand_u = phases_to_matrix(&cand, n_a, n_rf)?.u_rf;
            let fc = objective_from_moments(&cand_u, u_bb, &moments, k);
            if fc <= f {
                accepted = Some((cand, cand_u, fc));
                break;
            }
            tau_eff *= 2.0;
        }
        state.grad = gamma;
        let Some((cand, cand_u, fc)) = accepted else {
            state.status = ScaStatus::NoDescent;
            break;
        };
        let change = (f - fc).abs();
        theta = cand;
        u_rf = cand_u;
        f = fc;
        state.iterations += 1;
        state.tau_effective = tau_eff;
        state.objective_trace.push(f);
        if change <= eps {
            state.status = ScaStatus::Converged;
            break;
        }
    }
    state.theta = theta.clone();
    Ok((theta, state))
}
