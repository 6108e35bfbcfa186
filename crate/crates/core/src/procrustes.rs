//! Desired transmit covariance and the benchmark precoder obtained from the
//! orthogonal Procrustes problem.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{dims, input, Error, Result};
use crate::linalg::{c, psd_sqrt, CMat};
use crate::model::{steering_vector, SystemConfig};

/// Mainlobe centers of the four-beam transmit pattern, measured from endfire.
pub const DEFAULT_DIRECTIONS_ENDFIRE: [f64; 4] = [0.22 * PI, 0.39 * PI, 0.61 * PI, 0.78 * PI];
pub const DEFAULT_MAINLOBE_DEG: f64 = 11.0;
/// Steering samples drawn across each mainlobe.
pub const MAINLOBE_SAMPLES: usize = 11;

/// Converts an angle measured from the array axis to the broadside angle used
/// by [`steering_vector`].
pub fn endfire_to_broadside(theta: f64) -> f64 {
    theta - PI / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmitMode {
    Omnidirectional,
    Directional,
}

#[derive(Debug, Clone)]
pub struct DesiredCovariance {
    pub r: CMat,
    pub mode: TransmitMode,
    /// Broadside mainlobe centers (radians).
    pub directions: Vec<f64>,
    /// Mainlobe width in degrees.
    pub mainlobe_width: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkBeamformer {
    pub f0: CMat,
}

/// Builds the desired transmit covariance with `tr(R) = P`.
///
/// Omnidirectional mode returns `(P/N_t) I`. Directional mode sums
/// `α(θ)α(θ)ᴴ` over [`MAINLOBE_SAMPLES`] evenly spaced angles inside each
/// mainlobe (broadside angles, `|θ| < π/2`) and rescales the trace to `P`.
pub fn desired_covariance(
    cfg: &SystemConfig,
    mode: TransmitMode,
    directions: &[f64],
    mainlobe_width: f64,
) -> Result<DesiredCovariance> {
    let n = cfg.n_t;
    let r = match mode {
        TransmitMode::Omnidirectional => CMat::identity(n, n) * c(cfg.power / n as f64, 0.0),
        TransmitMode::Directional => {
            if directions.is_empty() {
                return Err(input("directional covariance needs at least one direction"));
            }
            if let Some(bad) = directions.iter().find(|d| !(d.abs() < PI / 2.0)) {
                return Err(input(format!("direction {bad} outside (-π/2, π/2)")));
            }
            if !(mainlobe_width >= 0.0) {
                return Err(input("mainlobe width must be nonnegative"));
            }
            let half = mainlobe_width.to_radians() / 2.0;
            let mut acc = CMat::zeros(n, n);
            for &center in directions {
                for i in 0..MAINLOBE_SAMPLES {
                    let frac = i as f64 / (MAINLOBE_SAMPLES - 1) as f64;
                    let theta = center - half + 2.0 * half * frac;
                    let a = steering_vector(theta, n, cfg.delta)?;
                    acc += &a * a.adjoint();
                }
            }
            let trace = acc.trace().re;
            acc * c(cfg.power / trace, 0.0)
        }
    };
    Ok(DesiredCovariance {
        r,
        mode,
        directions: directions.to_vec(),
        mainlobe_width,
    })
}

/// Benchmark precoder `F0 = Q U I_{N_t×M} Vᴴ` with `R = QQᴴ` and
/// `Qᴴ Hᴴ A = U Σ Vᴴ`.
pub fn benchmark_beamformer(r: &DesiredCovariance, h: &CMat, a: &CMat) -> Result<BenchmarkBeamformer> {
    benchmark_from_factor(&psd_sqrt(&r.r), h, a)
}

/// Same as [`benchmark_beamformer`] with a caller-supplied factor `Q`.
pub fn benchmark_from_factor(q: &CMat, h: &CMat, a: &CMat) -> Result<BenchmarkBeamformer> {
    let n_t = q.nrows();
    if h.ncols() != n_t || h.nrows() != a.nrows() || q.ncols() != n_t {
        return Err(dims(format!(
            "Q is {}x{}, H is {}x{}, A is {}x{}",
            q.nrows(),
            q.ncols(),
            h.nrows(),
            h.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let m = a.ncols();
    if m > n_t {
        return Err(input(format!("need M ≤ N_t, got M={m} N_t={n_t}")));
    }
    let b = q.adjoint() * h.adjoint() * a;
    let svd = b
        .try_svd(true, true, 1e-14, 10_000)
        .ok_or_else(|| Error::Numeric("SVD of QᴴHᴴA did not converge".into()))?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numeric("SVD factors missing".into())),
    };
    // thin SVD: U is N_t × M, so U·I_{N_t×M} is U itself
    Ok(BenchmarkBeamformer { f0: q * u * v_t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro2, identity};
    use crate::model::{beampattern, complex_gaussian, SteeringGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n_t: usize) -> SystemConfig {
        SystemConfig { n_t, m: n_t, ..SystemConfig::desk() }
    }

    #[test]
    fn omnidirectional_is_scaled_identity() {
        let r = desired_covariance(&cfg(4), TransmitMode::Omnidirectional, &[], 0.0).unwrap();
        assert!(fro2(&(&r.r - identity(4) * c(0.25, 0.0))) < 1e-30);
    }

    #[test]
    fn zero_width_single_direction_is_rank_one() {
        let cfg = cfg(4);
        let theta = 0.3;
        let r = desired_covariance(&cfg, TransmitMode::Directional, &[theta], 0.0).unwrap();
        let a = steering_vector(theta, 4, 0.5).unwrap();
        let want = &a * a.adjoint() * c(1.0 / 4.0, 0.0);
        assert!(fro2(&(&r.r - want)) < 1e-24);
        assert!((r.r.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn directional_rejects_empty_and_out_of_range() {
        assert!(desired_covariance(&cfg(4), TransmitMode::Directional, &[], 11.0).is_err());
        assert!(desired_covariance(&cfg(4), TransmitMode::Directional, &[2.0], 11.0).is_err());
    }

    #[test]
    fn four_beam_pattern_peaks_at_centers() {
        let cfg = cfg(16);
        let dirs: Vec<f64> = DEFAULT_DIRECTIONS_ENDFIRE.iter().map(|&d| endfire_to_broadside(d)).collect();
        let r = desired_covariance(&cfg, TransmitMode::Directional, &dirs, DEFAULT_MAINLOBE_DEG).unwrap();
        assert!((r.r.trace().re - 1.0).abs() < 1e-9);
        let grid = SteeringGrid::uniform(-PI / 2.0, PI / 2.0, 181, 16, 0.5).unwrap();
        let p = beampattern(&r.r, &grid).unwrap();
        let mut peaks: Vec<(f64, f64)> = (1..180)
            .filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1])
            .map(|i| (p[i], grid.angles[i]))
            .collect();
        peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut top: Vec<f64> = peaks.iter().take(4).map(|p| p.1).collect();
        top.sort_by(f64::total_cmp);
        let step = PI / 180.0;
        for (got, want) in top.iter().zip(&dirs) {
            assert!((got - want).abs() <= step + 1e-12, "peak {got} vs {want}");
        }
    }

    #[test]
    fn engineered_identity_gives_f0_equal_q() {
        // Q = I, H = I, A = I  =>  QᴴHᴴA = I, U = V = I up to a shared unitary.
        let q = identity(3);
        let f0 = benchmark_from_factor(&q, &identity(3), &identity(3)).unwrap().f0;
        assert!(fro2(&(f0 - q)) < 1e-24);
    }

    #[test]
    fn square_case_reproduces_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = complex_gaussian(&mut rng, 4, 4);
        let r = DesiredCovariance {
            r: &g * g.adjoint(),
            mode: TransmitMode::Directional,
            directions: vec![],
            mainlobe_width: 0.0,
        };
        let h = complex_gaussian(&mut rng, 8, 4);
        let a = complex_gaussian(&mut rng, 8, 4);
        let f0 = benchmark_beamformer(&r, &h, &a).unwrap().f0;
        assert!(fro2(&(&f0 * f0.adjoint() - &r.r)).sqrt() < 1e-8);
    }

    #[test]
    fn scaling_r_scales_f0() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = complex_gaussian(&mut rng, 4, 3);
        let base = g.clone() * g.adjoint();
        let h = complex_gaussian(&mut rng, 6, 4);
        let a = complex_gaussian(&mut rng, 6, 2);
        let f1 = benchmark_from_factor(&psd_sqrt(&base), &h, &a).unwrap().f0;
        let f4 = benchmark_from_factor(&psd_sqrt(&(base * c(4.0, 0.0))), &h, &a).unwrap().f0;
        assert!(fro2(&(f4 - f1 * c(2.0, 0.0))).sqrt() < 1e-9);
    }

    #[test]
    fn thin_case_is_semi_unitary_rotation_of_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = complex_gaussian(&mut rng, 4, 4);
        let q = psd_sqrt(&(&g * g.adjoint()));
        let h = complex_gaussian(&mut rng, 8, 4);
        let a = complex_gaussian(&mut rng, 8, 2);
        let f0 = benchmark_from_factor(&q, &h, &a).unwrap().f0;
        let omega = q.clone().try_inverse().unwrap() * &f0;
        assert!(fro2(&(omega.adjoint() * &omega - identity(2))) < 1e-16);
    }
}
