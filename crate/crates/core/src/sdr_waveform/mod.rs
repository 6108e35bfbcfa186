//! Constant-modulus, similarity-constrained waveform design by semidefinite
//! relaxation.
//!
//! Per UE: vectorize `‖AᴴH_k X − S_k‖²` into `‖E b − s‖²` over unit-modulus
//! `b`, homogenize with an auxiliary unit entry, solve the lifted SDP without
//! the rank-one constraint, and recover waveforms by Gaussian randomization.
//! The reference is normalized to unit modulus (`x0 = vec(X0)/√(P/N_t)`) so
//! the tolerance becomes `ζ N_t / P`.

mod sdp;

pub use sdp::{project_psd, solve_sdp, solve_sdp_with, SdpOptions, SdpSolution, SdpStatus};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{dims, input, Error, Result};
use crate::linalg::{c, fro2, hermitian_eigen, unvec, vec_of, CMat, CVec};
use crate::model::{complex_gaussian, ChannelSet, SymbolFrame, SystemConfig};

#[derive(Debug, Clone)]
pub struct VectorizedLs {
    /// `(I_T ⊗ AᴴH_k) √(P/N_t)`.
    pub e: CMat,
    pub s: CVec,
    /// Unit-modulus reference.
    pub x0: CVec,
    pub zeta_scaled: f64,
    pub amplitude: f64,
    pub n_t: usize,
    pub frame_len: usize,
}

impl VectorizedLs {
    pub fn objective(&self, b: &CVec) -> f64 {
        (&self.e * b - &self.s).norm_squared()
    }

    pub fn similarity(&self, b: &CVec) -> f64 {
        (b - &self.x0).norm_squared()
    }

    pub fn to_waveform(&self, b: &CVec) -> CMat {
        unvec(b, self.n_t, self.frame_len) * c(self.amplitude, 0.0)
    }
}

pub fn vectorize_problem(a: &CMat, h: &CMat, s_k: &CMat, x0: &CMat, cfg: &SystemConfig) -> Result<VectorizedLs> {
    let (n_t, t) = x0.shape();
    let m = a.ncols();
    if h.shape() != (a.nrows(), n_t) || s_k.shape() != (m, t) {
        return Err(dims(format!(
            "A is {:?}, H is {:?}, S is {:?}, X0 is {:?}",
            a.shape(),
            h.shape(),
            s_k.shape(),
            x0.shape()
        )));
    }
    if n_t != cfg.n_t {
        return Err(dims(format!("reference has {n_t} antennas, config has {}", cfg.n_t)));
    }
    let amplitude = cfg.amplitude();
    let g = a.adjoint() * h * c(amplitude, 0.0);
    let mut e = CMat::zeros(m * t, n_t * t);
    for blk in 0..t {
        e.view_mut((blk * m, blk * n_t), (m, n_t)).copy_from(&g);
    }
    Ok(VectorizedLs {
        e,
        s: vec_of(s_k),
        x0: vec_of(x0) / c(amplitude, 0.0),
        zeta_scaled: cfg.zeta / (amplitude * amplitude),
        amplitude,
        n_t,
        frame_len: t,
    })
}

/// Homogeneous quadratic program in `x = [b; t]`:
/// `min xᴴ Q_obj x  s.t.  xᴴ Q_sc x ≤ ζ, |x_n| = 1`.
#[derive(Debug, Clone)]
pub struct HomogenizedBqp {
    pub q_obj: CMat,
    pub q_sc: CMat,
    pub zeta: f64,
}

pub fn homogenize(v: &VectorizedLs) -> HomogenizedBqp {
    let (rows, n) = v.e.shape();
    let mut es = CMat::zeros(rows, n + 1);
    es.columns_mut(0, n).copy_from(&v.e);
    es.set_column(n, &(-&v.s));
    let mut ix = CMat::zeros(n, n + 1);
    ix.columns_mut(0, n).fill_with_identity();
    ix.set_column(n, &(-&v.x0));
    HomogenizedBqp {
        q_obj: es.adjoint() * &es,
        q_sc: ix.adjoint() * &ix,
        zeta: v.zeta_scaled,
    }
}

/// Quadratic form `xᴴ Q x` (real part).
pub fn quadratic_form(q: &CMat, x: &CVec) -> f64 {
    x.dotc(&(q * x)).re
}

/// Lifts `b` to `[b; 1]`.
pub fn lift(b: &CVec) -> CVec {
    let n = b.len();
    CVec::from_fn(n + 1, |i, _| if i < n { b[i] } else { c(1.0, 0.0) })
}

/// Draws `x̂ = U Σ^{1/2} z` (eigenvalues below 1e-12 of the largest are dropped), `z ~ CN(0, I)`, and maps each draw to a
/// unit-modulus candidate `exp(j arg(x̂_i / x̂_last))`. Draws whose last entry
/// vanishes are discarded.
pub fn gaussian_randomization(sol: &SdpSolution, n_samples: usize, rng_seed: u64) -> Vec<CVec> {
    let n = sol.x_star.nrows();
    let (values, vectors) = hermitian_eigen(&sol.x_star);
    let floor = 1e-12 * values.first().copied().unwrap_or(0.0).max(0.0);
    let mut factor = vectors;
    for (j, v) in values.iter().enumerate() {
        factor.column_mut(j).scale_mut(if *v > floor { v.sqrt() } else { 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let z = complex_gaussian(&mut rng, n, 1);
        let x = &factor * z.column(0);
        let last = x[n - 1];
        if last.norm() == 0.0 || !last.re.is_finite() || !last.im.is_finite() {
            continue;
        }
        out.push(CVec::from_fn(n - 1, |i, _| {
            let phase = (x[i] / last).arg();
            c(phase.cos(), phase.sin())
        }));
    }
    out
}

#[derive(Debug, Clone)]
pub struct RecoveryReport {
    /// `‖E b − s‖²` of the chosen candidate (equals `‖AᴴH_k X_k − S_k‖²`).
    pub objective: f64,
    /// `‖X_k − X0‖²` in original units.
    pub similarity: f64,
    pub candidates: usize,
    pub feasible: usize,
    /// Whether the reference itself was the best feasible candidate.
    pub chose_reference: bool,
}

#[derive(Debug, Clone)]
pub struct Waveform {
    pub x: CMat,
}

/// Keeps the similarity-feasible candidates (plus the reference) and returns
/// the one with the smallest objective, rescaled to `√(P/N_t)` modulus.
pub fn recover_waveform(candidates: &[CVec], v: &VectorizedLs, cfg: &SystemConfig) -> Result<(Waveform, RecoveryReport)> {
    if candidates.is_empty() {
        return Err(input("no randomization candidates"));
    }
    let x0_wave = v.to_waveform(&v.x0);
    let mut best: Option<(f64, f64, usize)> = None;
    let mut feasible = 0;
    let pool: Vec<&CVec> = candidates.iter().chain(std::iter::once(&v.x0)).collect();
    for (idx, b) in pool.iter().enumerate() {
        if b.len() != v.x0.len() {
            return Err(dims(format!("candidate has {} entries, expected {}", b.len(), v.x0.len())));
        }
        let sim = fro2(&(v.to_waveform(b) - &x0_wave));
        if sim > cfg.zeta {
            continue;
        }
        feasible += 1;
        let obj = v.objective(b);
        if best.is_none_or(|(o, _, _)| obj < o) {
            best = Some((obj, sim, idx));
        }
    }
    let (objective, similarity, idx) =
        best.ok_or_else(|| Error::Infeasible("no candidate meets the similarity tolerance; raise n_samples or zeta".into()))?;
    Ok((
        Waveform { x: v.to_waveform(pool[idx]) },
        RecoveryReport {
            objective,
            similarity,
            candidates: pool.len(),
            feasible,
            chose_reference: idx == pool.len() - 1,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformOptions {
    pub n_samples: usize,
    pub sdp: SdpOptions,
    pub seed: u64,
}

impl Default for WaveformOptions {
    fn default() -> Self {
        Self { n_samples: 200, sdp: SdpOptions::default(), seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct WaveformDesign {
    pub waveform: Waveform,
    pub report: RecoveryReport,
    pub sdp_objective: f64,
    pub sdp_status: SdpStatus,
}

/// Full relax-and-randomize pipeline for one UE.
pub fn design_single(
    a: &CMat,
    h: &CMat,
    s_k: &CMat,
    x0: &CMat,
    cfg: &SystemConfig,
    opts: &WaveformOptions,
) -> Result<WaveformDesign> {
    let v = vectorize_problem(a, h, s_k, x0, cfg)?;
    let p = homogenize(&v);
    let sol = solve_sdp_with(&p, &opts.sdp)?;
    let candidates = gaussian_randomization(&sol, opts.n_samples, opts.seed);
    let pool = if candidates.is_empty() { vec![v.x0.clone()] } else { candidates };
    let (waveform, report) = recover_waveform(&pool, &v, cfg)?;
    Ok(WaveformDesign {
        waveform,
        report,
        sdp_objective: sol.objective_value,
        sdp_status: sol.solver_status,
    })
}

/// Designs every UE's waveform for a fixed receive combiner `A`. UE `k` uses
/// randomization seed `opts.seed + k`.
pub fn design_waveforms(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    a: &CMat,
    symbols: &SymbolFrame,
    x0: &CMat,
    opts: &WaveformOptions,
) -> Result<Vec<WaveformDesign>> {
    if symbols.s.len() != channels.len() {
        return Err(dims(format!("{} frames for {} UEs", symbols.s.len(), channels.len())));
    }
    channels
        .h
        .par_iter()
        .zip(symbols.s.par_iter())
        .enumerate()
        .map(|(k, (h, s))| {
            let o = WaveformOptions { seed: opts.seed.wrapping_add(k as u64), ..*opts };
            design_single(a, h, s, x0, cfg, &o)
        })
        .collect()
}

/// `Σ_k ‖AᴴH_k X_k − S_k‖² + σ² ‖A‖²`.
pub fn waveform_objective(
    channels: &ChannelSet,
    a: &CMat,
    waveforms: &[CMat],
    symbols: &SymbolFrame,
    sigma2: f64,
) -> Result<f64> {
    if waveforms.len() != channels.len() || symbols.s.len() != channels.len() {
        return Err(dims("waveform, symbol and channel counts differ"));
    }
    let ah = a.adjoint();
    let mut total = sigma2 * fro2(a);
    for ((h, x), s) in channels.h.iter().zip(waveforms).zip(&symbols.s) {
        total += fro2(&(&ah * h * x - s));
    }
    Ok(total)
}
