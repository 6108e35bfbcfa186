//! System model: configuration, random channels and symbols, steering
//! vectors, beampatterns, the LFM reference waveform and the aggregation MSE.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dims, input, Result};
use crate::linalg::{c, fro2, hermitian_defect, CMat, CVec};

/// Scalar problem parameters shared by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Number of UEs (K).
    pub num_ues: usize,
    /// Transmit antennas per UE.
    pub n_t: usize,
    /// AP antennas.
    pub n_a: usize,
    /// AP RF chains.
    pub n_rf: usize,
    /// Functions aggregated per frame (M).
    pub m: usize,
    /// Frame length in symbols.
    pub frame_len: usize,
    /// Total transmit power per UE.
    pub power: f64,
    pub snr_db: f64,
    /// Antenna spacing over wavelength.
    pub delta: f64,
    /// Weight on the aggregation MSE versus precoder similarity.
    pub rho: f64,
    /// Waveform similarity tolerance ‖X − X0‖²_F ≤ zeta.
    pub zeta: f64,
    /// Proximal coefficient of the analog-phase SCA.
    pub tau: f64,
    pub eps_rcg: f64,
    pub eps_sca: f64,
    pub eps_ao: f64,
    pub max_iter_rcg: usize,
    pub max_iter_sca: usize,
    pub max_iter_ao: usize,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl SystemConfig {
    /// Small instance used for tests and the acceptance runs.
    pub fn desk() -> Self {
        Self {
            num_ues: 2,
            n_t: 4,
            n_a: 16,
            n_rf: 8,
            m: 4,
            frame_len: 8,
            power: 1.0,
            snr_db: 4.0,
            delta: 0.5,
            rho: 0.03,
            zeta: 3.2,
            tau: 1.2,
            eps_rcg: 1e-6,
            eps_sca: 1e-8,
            eps_ao: 1e-4,
            max_iter_rcg: 500,
            max_iter_sca: 500,
            max_iter_ao: 20,
            seed: 1,
        }
    }

    /// Full-size setting of the numerical study (64 AP antennas, 5 UEs).
    pub fn full_size() -> Self {
        Self {
            num_ues: 5,
            n_t: 16,
            n_a: 64,
            n_rf: 16,
            m: 16,
            frame_len: 50,
            zeta: 20.0,
            ..Self::desk()
        }
    }

    /// Noise variance `P · 10^(−snr_db/10)`.
    pub fn sigma2(&self) -> f64 {
        self.power * 10f64.powf(-self.snr_db / 10.0)
    }

    /// Per-antenna amplitude `√(P/N_t)`.
    pub fn amplitude(&self) -> f64 {
        (self.power / self.n_t as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ues == 0 || self.n_t == 0 || self.frame_len == 0 {
            return Err(input("num_ues, n_t and frame_len must be positive"));
        }
        if self.m == 0 || self.m > self.n_t {
            return Err(input(format!("need 1 ≤ M ≤ N_t, got M={} N_t={}", self.m, self.n_t)));
        }
        if self.m > self.n_rf || self.n_rf > self.n_a {
            return Err(input(format!(
                "need M ≤ N_rf ≤ N_a, got M={} N_rf={} N_a={}",
                self.m, self.n_rf, self.n_a
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(input(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.power > 0.0) || !(self.sigma2() > 0.0) {
            return Err(input("power and noise variance must be positive"));
        }
        if !(self.zeta >= 0.0) {
            return Err(input("zeta must be nonnegative"));
        }
        if !(self.tau > 0.0) {
            return Err(input("tau must be positive"));
        }
        if !(self.delta > 0.0) {
            return Err(input("delta must be positive"));
        }
        Ok(())
    }
}

/// Parameters of the LFM reference chirp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LfmParams {
    pub f0: f64,
    pub delta_f: f64,
    pub slope_k: f64,
    pub bandwidth: f64,
    pub pulse_width: f64,
    pub sample_rate: f64,
}

impl LfmParams {
    /// Chirp with slope `B / T_p` and per-antenna offset `Δf = B`, at baseband.
    pub fn from_bandwidth(bandwidth: f64, pulse_width: f64, sample_rate: f64) -> Self {
        Self {
            f0: 0.0,
            delta_f: bandwidth,
            slope_k: bandwidth / pulse_width,
            bandwidth,
            pulse_width,
            sample_rate,
        }
    }
}

impl Default for LfmParams {
    fn default() -> Self {
        Self::from_bandwidth(1e6, 12.5e-6, 4e6)
    }
}

/// Per-UE channel matrices, each `N_a × N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<CMat>,
}

impl ChannelSet {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Per-UE data frames, each `M × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub s: Vec<CMat>,
}

/// Constant-modulus reference waveform, `N_t × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceWaveform {
    pub x0: CMat,
}

/// Steering vectors stacked column-wise for a set of azimuths.
#[derive(Debug, Clone)]
pub struct SteeringGrid {
    pub angles: Vec<f64>,
    pub vectors: CMat,
}

impl SteeringGrid {
    pub fn new(angles: Vec<f64>, n_t: usize, delta: f64) -> Result<Self> {
        let mut vectors = CMat::zeros(n_t, angles.len());
        for (j, &theta) in angles.iter().enumerate() {
            vectors.set_column(j, &steering_vector(theta, n_t, delta)?);
        }
        Ok(Self { angles, vectors })
    }

    /// `points` angles evenly spaced over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, points: usize, n_t: usize, delta: f64) -> Result<Self> {
        if points < 2 {
            return Err(input("a uniform grid needs at least two points"));
        }
        let step = (hi - lo) / (points - 1) as f64;
        Self::new((0..points).map(|i| lo + step * i as f64).collect(), n_t, delta)
    }
}

/// ULA steering vector with entries `exp(j2π(n−1)Δ sin θ)`.
pub fn steering_vector(theta: f64, n_t: usize, delta: f64) -> Result<CVec> {
    if !theta.is_finite() {
        return Err(input(format!("steering angle must be finite, got {theta}")));
    }
    if n_t == 0 || !(delta > 0.0) {
        return Err(input("steering vector needs n_t ≥ 1 and delta > 0"));
    }
    let phase = 2.0 * PI * delta * theta.sin();
    Ok(CVec::from_fn(n_t, |n, _| {
        let (s, co) = (phase * n as f64).sin_cos();
        c(co, s)
    }))
}

/// Transmit power `α(θ)ᴴ R α(θ)` on every grid angle; negative round-off is clamped to 0.
pub fn beampattern(r: &CMat, grid: &SteeringGrid) -> Result<Vec<f64>> {
    if r.nrows() != r.ncols() || r.nrows() != grid.vectors.nrows() {
        return Err(dims(format!(
            "covariance is {}x{}, grid vectors have length {}",
            r.nrows(),
            r.ncols(),
            grid.vectors.nrows()
        )));
    }
    let scale = r.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if hermitian_defect(r) > 1e-10 * scale {
        return Err(input("beampattern covariance is not Hermitian"));
    }
    let ra = r * &grid.vectors;
    Ok((0..grid.angles.len())
        .map(|j| grid.vectors.column(j).dotc(&ra.column(j)).re.max(0.0))
        .collect())
}

/// Time-averaged sample covariance `(1/T) X Xᴴ`.
pub fn sample_covariance(x: &CMat) -> CMat {
    (x * x.adjoint()) / c(x.ncols() as f64, 0.0)
}

/// LFM reference with entry `(n, t)` equal to
/// `√(P/N_t) exp(j2π(f0 + (n−1)Δf)τ) exp(jπkτ²)`, `τ = (t−1)/f_s`.
pub fn lfm_reference(cfg: &SystemConfig, lfm: &LfmParams) -> Result<ReferenceWaveform> {
    if !(lfm.sample_rate > 0.0) {
        return Err(input(format!("sample rate must be positive, got {}", lfm.sample_rate)));
    }
    if cfg.frame_len == 0 || cfg.n_t == 0 {
        return Err(input("reference waveform needs n_t ≥ 1 and frame_len ≥ 1"));
    }
    let amp = cfg.amplitude();
    let x0 = CMat::from_fn(cfg.n_t, cfg.frame_len, |n, t| {
        let tau = t as f64 / lfm.sample_rate;
        let phase = 2.0 * PI * (lfm.f0 + n as f64 * lfm.delta_f) * tau + PI * lfm.slope_k * tau * tau;
        let (s, co) = phase.sin_cos();
        c(amp * co, amp * s)
    });
    Ok(ReferenceWaveform { x0 })
}

pub(crate) fn complex_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(scale * re, scale * im)
    })
}

/// i.i.d. CN(0, 1) channels, one `N_a × N_t` matrix per UE.
pub fn rayleigh_channels(cfg: &SystemConfig, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelSet {
        h: (0..cfg.num_ues).map(|_| complex_gaussian(&mut rng, cfg.n_a, cfg.n_t)).collect(),
    }
}

/// i.i.d. CN(0, 1) data frames, one `M × T` matrix per UE.
pub fn random_symbols(cfg: &SystemConfig, seed: u64) -> SymbolFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SymbolFrame {
        s: (0..cfg.num_ues).map(|_| complex_gaussian(&mut rng, cfg.m, cfg.frame_len)).collect(),
    }
}

/// Aggregation MSE for an arbitrary receive combiner `A` (`N_a × M`):
/// `Σ_k ‖Aᴴ H_k F_k − I‖² + σ² ‖A‖²`.
pub fn combiner_mse(channels: &ChannelSet, precoders: &[CMat], a: &CMat, sigma2: f64) -> Result<f64> {
    if channels.len() != precoders.len() {
        return Err(dims(format!(
            "{} channels but {} precoders",
            channels.len(),
            precoders.len()
        )));
    }
    let m = a.ncols();
    let ah = a.adjoint();
    let mut total = sigma2 * fro2(a);
    for (k, (h, f)) in channels.h.iter().zip(precoders).enumerate() {
        if h.nrows() != a.nrows() || h.ncols() != f.nrows() || f.ncols() != m {
            return Err(dims(format!(
                "UE {k}: H is {}x{}, F is {}x{}, A is {}x{}",
                h.nrows(),
                h.ncols(),
                f.nrows(),
                f.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        let mut g = &ah * h * f;
        for i in 0..m {
            g[(i, i)] -= c(1.0, 0.0);
        }
        total += fro2(&g);
    }
    Ok(total)
}

/// Aggregation MSE of the hybrid combiner `A = U_rf U_bb`.
pub fn aggregation_mse(
    channels: &ChannelSet,
    precoders: &[CMat],
    u_rf: &CMat,
    u_bb: &CMat,
    sigma2: f64,
) -> Result<f64> {
    if u_rf.ncols() != u_bb.nrows() {
        return Err(dims(format!(
            "U_rf has {} columns but U_bb has {} rows",
            u_rf.ncols(),
            u_bb.nrows()
        )));
    }
    combiner_mse(channels, precoders, &(u_rf * u_bb), sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn steering_at_broadside_is_all_ones() {
        let a = steering_vector(0.0, 4, 0.5).unwrap();
        for z in a.iter() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_at_endfire_alternates() {
        let a = steering_vector(PI / 2.0, 2, 0.5).unwrap();
        assert!((a[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_norm_and_errors() {
        let a = steering_vector(0.3, 8, 0.5).unwrap();
        assert!(close(a.norm_squared(), 8.0, 1e-12));
        assert!(steering_vector(f64::NAN, 4, 0.5).is_err());
        assert!(steering_vector(0.1, 4, 0.0).is_err());
    }

    #[test]
    fn beampattern_identity_and_rank_one() {
        let grid = SteeringGrid::uniform(-1.2, 1.2, 9, 4, 0.5).unwrap();
        for p in beampattern(&identity(4), &grid).unwrap() {
            assert!(close(p, 4.0, 1e-12));
        }
        let theta0 = 0.4;
        let a = steering_vector(theta0, 4, 0.5).unwrap();
        let r = &a * a.adjoint();
        let g0 = SteeringGrid::new(vec![theta0], 4, 0.5).unwrap();
        assert!(close(beampattern(&r, &g0).unwrap()[0], 16.0, 1e-12));
    }

    #[test]
    fn beampattern_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = complex_gaussian(&mut rng, 5, 5);
        let r = &g * g.adjoint();
        let grid = SteeringGrid::uniform(-1.5, 1.5, 32, 5, 0.5).unwrap();
        let fast = beampattern(&r, &grid).unwrap();
        for (j, &theta) in grid.angles.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for p in 0..5 {
                for q in 0..5 {
                    let ap = c(0.0, 2.0 * PI * 0.5 * p as f64 * theta.sin()).exp();
                    let aq = c(0.0, 2.0 * PI * 0.5 * q as f64 * theta.sin()).exp();
                    acc += ap.conj() * r[(p, q)] * aq;
                }
            }
            assert!(close(fast[j], acc.re, 1e-10 * acc.re.max(1.0)));
        }
    }

    #[test]
    fn beampattern_rejects_non_hermitian() {
        let mut r = identity(3);
        r[(0, 1)] = c(1.0, 0.0);
        let grid = SteeringGrid::uniform(-1.0, 1.0, 4, 3, 0.5).unwrap();
        assert!(beampattern(&r, &grid).is_err());
    }

    #[test]
    fn lfm_reference_phase_and_modulus() {
        let cfg = SystemConfig { n_t: 4, frame_len: 8, ..SystemConfig::desk() };
        let lfm = LfmParams::default();
        let x0 = lfm_reference(&cfg, &lfm).unwrap().x0;
        let amp = 0.5;
        assert!((x0[(0, 0)] - c(amp, 0.0)).norm() < 1e-15);
        for z in x0.iter() {
            assert!(close(z.norm(), amp, 1e-12));
        }
        // antenna 1, sample 3 with f0 = 0: only the chirp term remains
        let tau = 2.0 / 4e6;
        let want = PI * (1e6 / 12.5e-6) * tau * tau;
        let got = x0[(0, 2)].arg();
        assert!(close(got, want, 1e-12), "{got} vs {want}");
        let bad = LfmParams { sample_rate: 0.0, ..lfm };
        assert!(lfm_reference(&cfg, &bad).is_err());
    }

    #[test]
    fn channels_shape_determinism_and_statistics() {
        let cfg = SystemConfig { num_ues: 3, n_a: 8, n_t: 4, ..SystemConfig::desk() };
        let a = rayleigh_channels(&cfg, 11);
        assert_eq!(a, rayleigh_channels(&cfg, 11));
        assert_eq!(a.len(), 3);
        assert!(a.h.iter().all(|h| h.shape() == (8, 4)));

        let big = SystemConfig { num_ues: 1, n_a: 250, n_t: 400, ..SystemConfig::desk() };
        let h = &rayleigh_channels(&big, 3).h[0];
        let n = h.len() as f64;
        let mean = h.iter().sum::<num_complex::Complex64>() / n;
        let var = h.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        assert!(mean.norm() <= 0.02, "mean {mean}");
        assert!((0.97..=1.03).contains(&var), "var {var}");
    }

    #[test]
    fn mse_with_perfect_equalization_is_noise_only() {
        // K = 1, N_a = N_t = M = 3, F = I, A = H^{-H} so Aᴴ H F = I.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = complex_gaussian(&mut rng, 3, 3);
        let a = h.clone().try_inverse().unwrap().adjoint();
        let channels = ChannelSet { h: vec![h] };
        let f = vec![identity(3)];
        let sigma2 = 0.7;
        let u_rf = a.clone();
        let u_bb = identity(3);
        let mse = aggregation_mse(&channels, &f, &u_rf, &u_bb, sigma2).unwrap();
        assert!(close(mse, sigma2 * fro2(&a), 1e-9));
        assert!(aggregation_mse(&channels, &f, &u_rf, &u_bb, 0.0).unwrap().abs() < 1e-18);
    }

    #[test]
    fn mse_rejects_bad_shapes() {
        let cfg = SystemConfig::desk();
        let ch = rayleigh_channels(&cfg, 1);
        let f = vec![identity(4); 2];
        assert!(aggregation_mse(&ch, &f, &CMat::zeros(16, 8), &CMat::zeros(7, 4), 1.0).is_err());
        assert!(aggregation_mse(&ch, &f[..1], &CMat::zeros(16, 8), &CMat::zeros(8, 4), 1.0).is_err());
    }

    #[test]
    fn mse_matches_monte_carlo_expectation() {
        let cfg = SystemConfig { num_ues: 2, n_t: 2, m: 2, n_a: 3, n_rf: 2, ..SystemConfig::desk() };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let channels = rayleigh_channels(&cfg, 4);
        let f: Vec<CMat> = (0..2).map(|_| complex_gaussian(&mut rng, 2, 2)).collect();
        let u_rf = complex_gaussian(&mut rng, 3, 2);
        let u_bb = complex_gaussian(&mut rng, 2, 2);
        let sigma2 = 0.5;
        let closed = aggregation_mse(&channels, &f, &u_rf, &u_bb, sigma2).unwrap();

        let a = &u_rf * &u_bb;
        let ah = a.adjoint();
        let draws = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let mut err = CVec::zeros(2);
            for (h, fk) in channels.h.iter().zip(&f) {
                let s = complex_gaussian(&mut rng, 2, 1).column(0).into_owned();
                err += &ah * h * fk * &s - &s;
            }
            let n = complex_gaussian(&mut rng, 3, 1).column(0) * c(sigma2.sqrt(), 0.0);
            err += &ah * n;
            let e = err.norm_squared();
            sum += e;
            sum_sq += e * e;
        }
        let mean = sum / draws as f64;
        let se = ((sum_sq / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((mean - closed).abs() <= 3.0 * se, "mc {mean} ± {se}, closed {closed}");
    }

    #[test]
    fn mse_invariant_to_rotation_between_analog_and_digital() {
        let cfg = SystemConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = rayleigh_channels(&cfg, 9);
        let f: Vec<CMat> = (0..2).map(|_| complex_gaussian(&mut rng, 4, 4)).collect();
        let u_rf = complex_gaussian(&mut rng, 16, 8);
        let u_bb = complex_gaussian(&mut rng, 8, 4);
        let g = complex_gaussian(&mut rng, 8, 8);
        let q = g.qr().q();
        let base = aggregation_mse(&ch, &f, &u_rf, &u_bb, 0.3).unwrap();
        let rot = aggregation_mse(&ch, &f, &(&u_rf * &q), &(q.adjoint() * &u_bb), 0.3).unwrap();
        assert!(close(base, rot, 1e-9 * base));
    }
}
