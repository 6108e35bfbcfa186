//! Self-audit of a result file: every stored metric is recomputed from the
//! saved design and regenerated channels.

use std::path::Path;

use isac_hbf::ao_driver::{HybridDesign, Receiver};
use isac_hbf::model::{combiner_mse, rayleigh_channels};
use isac_hbf::oblique_rcg::row_norm_defect;
use isac_hbf::SystemConfig;

use crate::error::{format_error, HarnessError};
use crate::record::{read_designs, read_results, sidecar, FileHeader};

/// Largest accepted gap between a stored and a recomputed metric.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub trial: usize,
    pub value: Option<f64>,
    pub receiver: Receiver,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub header: FileHeader,
    pub checked: usize,
    pub failed_trials: usize,
    pub max_error: f64,
    pub mismatches: Vec<Mismatch>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn audit(path: &Path) -> Result<AuditReport, HarnessError> {
    let (header, records) = read_results(path)?;
    let designs = read_designs(&sidecar(path, "designs.jsonl"))?;
    let sc = &header.scenario;
    let mut report =
        AuditReport { header: header.clone(), checked: 0, failed_trials: 0, max_error: 0.0, mismatches: Vec::new() };
    let mut stored = designs.iter();
    for rec in &records {
        let Some(m) = rec.metrics() else {
            report.failed_trials += 1;
            continue;
        };
        let d = stored.next().ok_or_else(|| format_error("design file has fewer entries than ok records"))?;
        if d.trial != rec.trial || d.receiver != rec.receiver || d.value.map(f64::to_bits) != rec.value.map(f64::to_bits)
        {
            return Err(format_error(format!("design for trial {} is out of order", rec.trial)));
        }
        let mut issues = Vec::new();
        let mut flag = |detail: String| issues.push(detail);
        let cfg = match (sc.sweep.parameter, rec.value) {
            (Some(p), Some(v)) => p.apply(&sc.base, v)?,
            (None, None) => sc.base.clone(),
            _ => return Err(format_error("sweep value does not match the scenario")),
        };
        if rec.seed != cfg.seed.wrapping_add(rec.trial as u64) {
            flag(format!("seed {} is not base seed + trial", rec.seed));
        }
        let design = match d.to_design() {
            Ok(x) => Some(x),
            Err(e) => {
                flag(format!("stored design rejected: {e}"));
                None
            }
        };
        if let Some(design) = design {
            check_design(&design, &cfg, rec.seed, m.nmse, &mut flag, &mut report.max_error)?;
            report.checked += 1;
        }
        report.mismatches.extend(issues.into_iter().map(|detail| Mismatch {
            trial: rec.trial,
            value: rec.value,
            receiver: rec.receiver,
            detail,
        }));
    }
    if stored.next().is_some() {
        return Err(format_error("design file has more entries than ok records"));
    }
    Ok(report)
}

fn check_design(
    design: &HybridDesign,
    cfg: &SystemConfig,
    seed: u64,
    nmse: f64,
    flag: &mut impl FnMut(String),
    max_error: &mut f64,
) -> Result<(), HarnessError> {
    for (k, p) in design.precoders.iter().enumerate() {
        let defect = row_norm_defect(&p.f, cfg.amplitude());
        if defect > AUDIT_TOL {
            flag(format!("UE {k} row norm defect {defect:e}"));
        }
    }
    let channels = rayleigh_channels(cfg, seed);
    let mse = combiner_mse(&channels, &design.precoder_matrices(), &design.combiner(cfg.n_a)?, cfg.sigma2())?;
    let recomputed = mse / cfg.m as f64;
    let err = (recomputed - nmse).abs();
    *max_error = max_error.max(err);
    if !(err <= AUDIT_TOL) {
        flag(format!("normalized MSE {nmse} recomputes to {recomputed}"));
    }
    if !(nmse >= 0.0) {
        flag(format!("normalized MSE {nmse} is negative"));
    }
    Ok(())
}
