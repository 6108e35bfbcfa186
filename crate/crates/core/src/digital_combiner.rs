//! Closed-form digital combiner and the fully-digital baseline receiver.

use crate::error::{dims, Error, Result};
use crate::linalg::{c, CMat};
use crate::model::ChannelSet;

/// Digital combiner `U_bb` (`N_rf × M`).
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalCombiner {
    pub u_bb: CMat,
}

/// Second-order receive statistics shared by the combiner updates:
/// `R = Σ_k H_k F_k F_kᴴ H_kᴴ + σ² I` and `B = Σ_k H_k F_k`.
#[derive(Debug, Clone)]
pub struct ReceiveMoments {
    pub r: CMat,
    pub b: CMat,
}

impl ReceiveMoments {
    pub fn new(channels: &ChannelSet, precoders: &[CMat], sigma2: f64) -> Result<Self> {
        let first = channels.h.first().ok_or_else(|| dims("no channels"))?;
        if precoders.len() != channels.len() {
            return Err(dims(format!(
                "{} channels but {} precoders",
                channels.len(),
                precoders.len()
            )));
        }
        let n_a = first.nrows();
        let m = precoders[0].ncols();
        let mut r = CMat::identity(n_a, n_a) * c(sigma2, 0.0);
        let mut b = CMat::zeros(n_a, m);
        for (k, (h, f)) in channels.h.iter().zip(precoders).enumerate() {
            if h.nrows() != n_a || h.ncols() != f.nrows() || f.ncols() != m {
                return Err(dims(format!("UE {k}: H is {:?}, F is {:?}", h.shape(), f.shape())));
            }
            let hf = h * f;
            r += &hf * hf.adjoint();
            b += hf;
        }
        Ok(Self { r, b })
    }
}

/// Solves `(U_rfᴴ R U_rf) U_bb = U_rfᴴ B` without forming the inverse.
pub fn lmmse_ubb(u_rf: &CMat, channels: &ChannelSet, precoders: &[CMat], sigma2: f64) -> Result<DigitalCombiner> {
    let moments = ReceiveMoments::new(channels, precoders, sigma2)?;
    lmmse_from_moments(u_rf, &moments)
}

pub fn lmmse_from_moments(u_rf: &CMat, moments: &ReceiveMoments) -> Result<DigitalCombiner> {
    if u_rf.nrows() != moments.r.nrows() {
        return Err(dims(format!(
            "U_rf has {} rows, AP has {} antennas",
            u_rf.nrows(),
            moments.r.nrows()
        )));
    }
    let singular = || {
        Error::Numeric(
            "combiner normal equations are singular (rank-deficient U_rf); use a positive noise variance \
             and a full-column-rank analog combiner"
                .into(),
        )
    };
    if !full_column_rank(u_rf) {
        return Err(singular());
    }
    let lhs = u_rf.adjoint() * &moments.r * u_rf;
    let rhs = u_rf.adjoint() * &moments.b;
    let spectrum = lhs.clone().symmetric_eigenvalues();
    let top = spectrum.iter().cloned().fold(0.0, f64::max);
    let bottom = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
    let u_bb = if top > 0.0 && bottom > 1e-12 * top {
        match lhs.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => lhs.lu().solve(&rhs).ok_or_else(singular)?,
        }
    } else {
        // noiseless with more RF chains than signal dimensions: the quadratic
        // is flat along the null space, take the minimum-norm minimizer
        lhs.pseudo_inverse(1e-12 * top.max(f64::MIN_POSITIVE))
            .map_err(|_| singular())?
            * rhs
    };
    if !u_bb.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(singular());
    }
    Ok(DigitalCombiner { u_bb })
}

fn full_column_rank(u: &CMat) -> bool {
    let gram = u.adjoint() * u;
    let spectrum = gram.symmetric_eigenvalues();
    let top = spectrum.iter().cloned().fold(0.0, f64::max);
    let bottom = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
    top > 0.0 && bottom > 1e-12 * top
}

/// MSE-optimal unrestricted receive combiner `A` (`N_a × M`), i.e. the
/// closed form with `U_rf = I`.
pub fn fully_digital_combiner(channels: &ChannelSet, precoders: &[CMat], sigma2: f64) -> Result<CMat> {
    let moments = ReceiveMoments::new(channels, precoders, sigma2)?;
    let n_a = moments.r.nrows();
    Ok(lmmse_from_moments(&CMat::identity(n_a, n_a), &moments)?.u_bb)
}
