//! Alternating optimization of the per-UE precoders, the analog combiner and
//! the digital combiner for the weighted objective
//! `ρ (Σ_k ‖U_bbᴴ U_rfᴴ H_k F_k − I‖² + σ² ‖A‖²) + (1 − ρ) Σ_k ‖F_k − F0_k‖²`.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::digital_combiner::{lmmse_ubb, DigitalCombiner};
use crate::error::{dims, Result};
use crate::linalg::{fro2, CMat};
use crate::model::{combiner_mse, ChannelSet, SystemConfig};
use crate::oblique_rcg::{build_stacked_ls, rcg_solve, ObliquePoint, RcgStatus};
use crate::procrustes::{benchmark_beamformer, DesiredCovariance};
use crate::sca_analog::{phases_to_matrix, sca_solve, warm_start_phases, AnalogPhases};

/// Receiver architecture at the AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    /// Unit-modulus analog network followed by an `N_rf × M` digital combiner.
    Hybrid,
    /// Unrestricted `N_a × M` combiner (analog stage is the identity).
    Digital,
}

/// Joint transmit/receive design.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridDesign {
    pub precoders: Vec<ObliquePoint>,
    /// `None` for a fully-digital receiver, where `U_rf = I`.
    pub analog: Option<AnalogPhases>,
    pub digital: DigitalCombiner,
}

impl HybridDesign {
    pub fn precoder_matrices(&self) -> Vec<CMat> {
        self.precoders.iter().map(|p| p.f.clone()).collect()
    }

    pub fn analog_matrix(&self, n_a: usize) -> Result<CMat> {
        match &self.analog {
            Some(theta) => Ok(phases_to_matrix(theta, n_a, self.digital.u_bb.nrows())?.u_rf),
            None => Ok(CMat::identity(n_a, n_a)),
        }
    }

    /// Overall receive combiner `A = U_rf U_bb`.
    pub fn combiner(&self, n_a: usize) -> Result<CMat> {
        let u_rf = self.analog_matrix(n_a)?;
        if u_rf.ncols() != self.digital.u_bb.nrows() {
            return Err(dims("analog and digital combiner sizes disagree"));
        }
        Ok(u_rf * &self.digital.u_bb)
    }
}

/// `Σ_k ‖F_k − F0_k‖²`; a single anchor is shared by every UE.
pub fn similarity_term(precoders: &[CMat], anchors: &[CMat]) -> Result<f64> {
    if anchors.len() != 1 && anchors.len() != precoders.len() {
        return Err(dims(format!("{} anchors for {} precoders", anchors.len(), precoders.len())));
    }
    let mut total = 0.0;
    for (k, f) in precoders.iter().enumerate() {
        let f0 = &anchors[if anchors.len() == 1 { 0 } else { k }];
        if f.shape() != f0.shape() {
            return Err(dims(format!("UE {k}: F is {:?}, F0 is {:?}", f.shape(), f0.shape())));
        }
        total += fro2(&(f - f0));
    }
    Ok(total)
}

pub fn weighted_objective(
    design: &HybridDesign,
    channels: &ChannelSet,
    anchors: &[CMat],
    rho: f64,
    sigma2: f64,
) -> Result<f64> {
    let n_a = channels.h.first().ok_or_else(|| dims("no channels"))?.nrows();
    let f = design.precoder_matrices();
    let mse = combiner_mse(channels, &f, &design.combiner(n_a)?, sigma2)?;
    Ok(rho * mse + (1.0 - rho) * similarity_term(&f, anchors)?)
}

/// Benchmark precoder of every UE for the current combiner `A`.
pub fn benchmark_anchors(r: &DesiredCovariance, channels: &ChannelSet, a: &CMat) -> Result<Vec<CMat>> {
    channels.h.iter().map(|h| Ok(benchmark_beamformer(r, h, a)?.f0)).collect()
}

/// Starting point of the alternation together with the precoder anchors.
///
/// The analog stage starts from [`warm_start_phases`]; a provisional digital
/// combiner matched to the square root of `R` gives the combiner used for the
/// benchmark precoders, which (row-normalized) become the initial precoders;
/// the digital combiner is then refreshed for them.
pub fn initial_design(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    r: &DesiredCovariance,
    receiver: Receiver,
) -> Result<(HybridDesign, Vec<CMat>)> {
    cfg.validate()?;
    let sigma2 = cfg.sigma2();
    let (analog, u_rf) = match receiver {
        Receiver::Hybrid => {
            let theta = warm_start_phases(channels, cfg.n_rf)?;
            let u = phases_to_matrix(&theta, cfg.n_a, cfg.n_rf)?.u_rf;
            (Some(theta), u)
        }
        Receiver::Digital => (None, CMat::identity(cfg.n_a, cfg.n_a)),
    };
    let root = crate::linalg::psd_sqrt(&r.r).columns(0, cfg.m).into_owned();
    let provisional = ObliquePoint::project(&root, cfg.amplitude())?.f;
    let f_pre = vec![provisional; channels.len()];
    let u_bb = lmmse_ubb(&u_rf, channels, &f_pre, sigma2)?;
    let anchors = benchmark_anchors(r, channels, &(&u_rf * &u_bb.u_bb))?;
    let precoders = anchors
        .iter()
        .map(|f0| ObliquePoint::project(f0, cfg.amplitude()))
        .collect::<Result<Vec<_>>>()?;
    let f: Vec<CMat> = precoders.iter().map(|p| p.f.clone()).collect();
    let digital = lmmse_ubb(&u_rf, channels, &f, sigma2)?;
    Ok((HybridDesign { precoders, analog, digital }, anchors))
}

/// Loop settings beyond the tolerances carried by [`SystemConfig`]. The
/// receiver architecture follows from the design: no analog phases means a
/// fully-digital receiver and the analog step is skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoOptions {
    /// Stop once the weighted objective changes by less than `eps_ao`;
    /// when false the loop always runs `max_iter_ao` passes.
    pub stop_on_small_change: bool,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self { stop_on_small_change: true }
    }
}

/// Metrics after one outer pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AoIteration {
    pub weighted: f64,
    pub mse: f64,
    pub similarity: f64,
    pub precoder_time: Duration,
    pub analog_time: Duration,
    pub digital_time: Duration,
    pub rcg_iterations: Vec<usize>,
    pub rcg_status: Vec<RcgStatus>,
    pub sca_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace {
    pub initial_weighted: f64,
    pub iterations: Vec<AoIteration>,
    pub converged: bool,
}

impl AoTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// Weighted objective: initial value followed by one entry per pass.
    pub fn objective_series(&self) -> Vec<f64> {
        std::iter::once(self.initial_weighted)
            .chain(self.iterations.iter().map(|it| it.weighted))
            .collect()
    }
}

/// Runs the alternation from `init` with fixed precoder anchors.
pub fn ao_solve(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    anchors: &[CMat],
    init: &HybridDesign,
    opts: &AoOptions,
) -> Result<(HybridDesign, AoTrace)> {
    ao_solve_observed(cfg, channels, anchors, init, opts, |_, _| {})
}

/// [`ao_solve`] that hands every intermediate design to `observe` after the
/// pass that produced it (1-based pass index).
pub fn ao_solve_observed(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    anchors: &[CMat],
    init: &HybridDesign,
    opts: &AoOptions,
    mut observe: impl FnMut(usize, &HybridDesign),
) -> Result<(HybridDesign, AoTrace)> {
    cfg.validate()?;
    if channels.len() != init.precoders.len() {
        return Err(dims(format!(
            "{} channels but {} precoders",
            channels.len(),
            init.precoders.len()
        )));
    }
    if anchors.len() != 1 && anchors.len() != channels.len() {
        return Err(dims(format!("{} anchors for {} UEs", anchors.len(), channels.len())));
    }
    let sigma2 = cfg.sigma2();
    let mut design = init.clone();
    let mut prev = weighted_objective(&design, channels, anchors, cfg.rho, sigma2)?;
    let mut trace = AoTrace { initial_weighted: prev, iterations: Vec::new(), converged: false };

    for _ in 0..cfg.max_iter_ao {
        let clock = Instant::now();
        let a = design.combiner(cfg.n_a)?;
        let solved: Vec<(ObliquePoint, usize, RcgStatus)> = design
            .precoders
            .par_iter()
            .enumerate()
            .map(|(k, current)| {
                let f0 = &anchors[if anchors.len() == 1 { 0 } else { k }];
                let ls = build_stacked_ls(&a, &channels.h[k], f0, cfg.rho)?;
                let (f, st) = rcg_solve(&ls, current, cfg.eps_rcg, cfg.max_iter_rcg)?;
                Ok((f, st.iterations, st.status))
            })
            .collect::<Result<_>>()?;
        let rcg_iterations = solved.iter().map(|s| s.1).collect();
        let rcg_status = solved.iter().map(|s| s.2).collect();
        design.precoders = solved.into_iter().map(|s| s.0).collect();
        let precoder_time = clock.elapsed();

        let f = design.precoder_matrices();
        let clock = Instant::now();
        let mut sca_iterations = 0;
        if let Some(theta) = &design.analog {
            let (next, st) = sca_solve(
                theta,
                &design.digital.u_bb,
                channels,
                &f,
                sigma2,
                cfg.tau,
                cfg.eps_sca,
                cfg.max_iter_sca,
            )?;
            sca_iterations = st.iterations;
            design.analog = Some(next);
        }
        let analog_time = clock.elapsed();

        let clock = Instant::now();
        design.digital = lmmse_ubb(&design.analog_matrix(cfg.n_a)?, channels, &f, sigma2)?;
        let digital_time = clock.elapsed();

        let mse = combiner_mse(channels, &f, &design.combiner(cfg.n_a)?, sigma2)?;
        let similarity = similarity_term(&f, anchors)?;
        let weighted = cfg.rho * mse + (1.0 - cfg.rho) * similarity;
        trace.iterations.push(AoIteration {
            weighted,
            mse,
            similarity,
            precoder_time,
            analog_time,
            digital_time,
            rcg_iterations,
            rcg_status,
            sca_iterations,
        });
        observe(trace.len(), &design);
        let change = (prev - weighted).abs();
        prev = weighted;
        if opts.stop_on_small_change && change < cfg.eps_ao {
            trace.converged = true;
            break;
        }
    }
    Ok((design, trace))
}
