//! Seeded trial execution and scenario runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use isac_hbf::ao_driver::{ao_solve, initial_design, AoOptions, HybridDesign, Receiver};
use isac_hbf::model::{combiner_mse, lfm_reference, random_symbols, rayleigh_channels, SteeringGrid};
use isac_hbf::procrustes::desired_covariance;
use isac_hbf::sdr_waveform::{design_waveforms, waveform_objective, WaveformOptions};
use isac_hbf::{CMat, SystemConfig};
use rayon::prelude::*;

use crate::error::{invalid, HarnessError};
use crate::export::{export_beampattern, export_waveform};
use crate::record::{
    header_line, num, sidecar, write_designs, write_results, FileHeader, StoredDesign, TrialMetrics, TrialRecord,
    WaveformMetrics,
};
use crate::scenario::{Scenario, ScenarioName};

/// Offset between the channel and symbol streams of one trial.
pub const SYMBOL_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Everything a trial produced besides its metrics.
#[derive(Debug, Clone)]
pub struct TrialArtifacts {
    pub design: HybridDesign,
    pub anchors: Vec<CMat>,
    pub waveforms: Vec<CMat>,
    pub reference: Option<CMat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: Option<f64>,
    pub receiver: Receiver,
    pub trials: usize,
    pub failed: usize,
    pub mean_nmse: f64,
    pub stderr_nmse: f64,
    pub mean_similarity: f64,
    pub stderr_similarity: f64,
    pub mean_weighted: f64,
    pub mean_iterations: f64,
    pub converged: usize,
    pub mean_waveform_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

fn solve_trial(
    sc: &Scenario,
    cfg: &SystemConfig,
    seed: u64,
    receiver: Receiver,
) -> Result<(TrialMetrics, TrialArtifacts), HarnessError> {
    let channels = rayleigh_channels(cfg, seed);
    let r = desired_covariance(cfg, sc.transmit_mode, &sc.directions, sc.mainlobe_deg)?;
    let (init, anchors) = initial_design(cfg, &channels, &r, receiver)?;
    let (design, trace) = ao_solve(cfg, &channels, &anchors, &init, &AoOptions::default())?;
    let f = design.precoder_matrices();
    let a = design.combiner(cfg.n_a)?;
    let sigma2 = cfg.sigma2();
    let mse = combiner_mse(&channels, &f, &a, sigma2)?;
    let last = trace.iterations.last().ok_or_else(|| invalid("max_iter_ao must be at least 1"))?;

    let (waveform, waveforms, reference) = if sc.name == ScenarioName::Waveform {
        let symbols = random_symbols(cfg, seed ^ SYMBOL_STREAM);
        let x0 = lfm_reference(cfg, &sc.lfm)?.x0;
        let opts = WaveformOptions { seed, ..WaveformOptions::default() };
        let designs = design_waveforms(cfg, &channels, &a, &symbols, &x0, &opts)?;
        let xs: Vec<CMat> = designs.iter().map(|d| d.waveform.x.clone()).collect();
        let noise = sigma2 * a.norm_squared();
        let metrics = WaveformMetrics {
            objective: waveform_objective(&channels, &a, &xs, &symbols, sigma2)?,
            max_similarity: designs.iter().map(|d| d.report.similarity).fold(0.0, f64::max),
            sdp_bound: designs.iter().map(|d| d.sdp_objective).sum::<f64>() + noise,
        };
        (Some(metrics), xs, Some(x0))
    } else {
        (None, Vec::new(), None)
    };

    let metrics = TrialMetrics {
        nmse: mse / cfg.m as f64,
        mse,
        similarity: last.similarity,
        weighted: last.weighted,
        iterations: trace.len(),
        converged: trace.converged,
        trace: trace.objective_series(),
        waveform,
    };
    Ok((metrics, TrialArtifacts { design, anchors, waveforms, reference }))
}

/// Runs one trial; solver failures are captured in the record.
pub fn run_trial(
    sc: &Scenario,
    cfg: &SystemConfig,
    trial: usize,
    value: Option<f64>,
    receiver: Receiver,
) -> (TrialRecord, Option<TrialArtifacts>) {
    let seed = cfg.seed.wrapping_add(trial as u64);
    let clock = Instant::now();
    let (outcome, artifacts) = match solve_trial(sc, cfg, seed, receiver) {
        Ok((m, a)) => (Ok(m), Some(a)),
        Err(e) => (Err(e.to_string()), None),
    };
    let record = TrialRecord { trial, seed, value, receiver, outcome, wall_time: clock.elapsed() };
    (record, artifacts)
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error per (sweep value, receiver), failed trials excluded.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Option<f64>, Receiver)> = Vec::new();
    for r in records {
        let key = (r.value, r.receiver);
        if !keys.iter().any(|k| k.0.map(f64::to_bits) == key.0.map(f64::to_bits) && k.1 == key.1) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(value, receiver)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.value.map(f64::to_bits) == value.map(f64::to_bits) && r.receiver == receiver)
                .collect();
            let ok: Vec<&TrialMetrics> = group.iter().filter_map(|r| r.metrics()).collect();
            let pick = |f: fn(&TrialMetrics) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<_>>();
            let (mean_nmse, stderr_nmse) = mean_stderr(&pick(|m| m.nmse));
            let (mean_similarity, stderr_similarity) = mean_stderr(&pick(|m| m.similarity));
            let waveform: Vec<f64> = ok.iter().filter_map(|m| m.waveform.as_ref().map(|w| w.objective)).collect();
            SummaryRow {
                value,
                receiver,
                trials: group.len(),
                failed: group.len() - ok.len(),
                mean_nmse,
                stderr_nmse,
                mean_similarity,
                stderr_similarity,
                mean_weighted: mean_stderr(&pick(|m| m.weighted)).0,
                mean_iterations: mean_stderr(&pick(|m| m.iterations as f64)).0,
                converged: ok.iter().filter(|m| m.converged).count(),
                mean_waveform_objective: (!waveform.is_empty()).then(|| mean_stderr(&waveform).0),
            }
        })
        .collect()
}

fn write_summary(path: &Path, sc: &Scenario, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let mut buf = header_line(&FileHeader::new("summary", sc))?.into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "value",
            "receiver",
            "trials",
            "failed",
            "mean_nmse",
            "stderr_nmse",
            "mean_similarity",
            "stderr_similarity",
            "mean_weighted",
            "mean_iterations",
            "converged",
            "mean_waveform_objective",
        ])?;
        for r in rows {
            w.write_record([
                r.value.map(num).unwrap_or_default(),
                serde_json::to_value(r.receiver)?.as_str().unwrap_or_default().to_string(),
                r.trials.to_string(),
                r.failed.to_string(),
                num(r.mean_nmse),
                num(r.stderr_nmse),
                num(r.mean_similarity),
                num(r.stderr_similarity),
                num(r.mean_weighted),
                num(r.mean_iterations),
                r.converged.to_string(),
                r.mean_waveform_objective.map(num).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Runs every (sweep value, trial, receiver) combination with trial `i`
/// seeded by `base.seed + i`, at most `jobs` at a time (all cores when
/// `None`). Writes the result file at `out` plus `.summary.csv`,
/// `.designs.jsonl` and, for the figure scenarios, the exported curves.
/// Output bytes depend only on the scenario.
pub fn run_scenario(sc: &Scenario, out: &Path, jobs: Option<usize>) -> Result<RunOutput, HarnessError> {
    sc.validate()?;
    let points = sc.sweep.points(&sc.base)?;
    let receivers = sc.combiner_mode.receivers();
    let mut tasks = Vec::new();
    for (p, _) in points.iter().enumerate() {
        for trial in 0..sc.trials {
            for &receiver in &receivers {
                tasks.push((p, trial, receiver));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let results: Vec<(TrialRecord, Option<TrialArtifacts>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, trial, receiver)| {
                let (value, cfg) = &points[p];
                run_trial(sc, cfg, trial, *value, receiver)
            })
            .collect()
    });

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let records: Vec<TrialRecord> = results.iter().map(|(r, _)| r.clone()).collect();
    let designs: Vec<StoredDesign> = results
        .iter()
        .filter_map(|(r, a)| a.as_ref().map(|a| StoredDesign::new(r.trial, r.value, r.receiver, &a.design)))
        .collect();
    let summary = summarize(&records);

    let mut files = vec![out.to_path_buf(), sidecar(out, "summary.csv"), sidecar(out, "designs.jsonl")];
    write_results(&files[0], &FileHeader::new("results", sc), &records)?;
    write_summary(&files[1], sc, &summary)?;
    write_designs(&files[2], &designs)?;

    let first = |receiver: Receiver| {
        results
            .iter()
            .find(|(r, _)| r.trial == 0 && r.value == points[0].0 && r.receiver == receiver)
            .and_then(|(_, a)| a.as_ref())
    };
    let cfg0 = &points[0].1;
    match sc.name {
        ScenarioName::Beampattern => {
            let main = first(receivers[0]);
            let digital = if receivers.len() > 1 { first(Receiver::Digital) } else { None };
            if let Some(main) = main {
                let grid = SteeringGrid::uniform(
                    -std::f64::consts::FRAC_PI_2,
                    std::f64::consts::FRAC_PI_2,
                    sc.grid_points,
                    cfg0.n_t,
                    cfg0.delta,
                )?;
                let path = sidecar(out, "beampattern.csv");
                export_beampattern(&main.design, digital.map(|d| &d.design), &main.anchors, &grid, &path)?;
                files.push(path);
            }
        }
        ScenarioName::Waveform => {
            if let Some(a) = first(receivers[0]) {
                if let (Some(x), Some(x0)) = (a.waveforms.first(), a.reference.as_ref()) {
                    let path = sidecar(out, "waveform.csv");
                    export_waveform(x, x0, sc.antenna, &path)?;
                    files.push(path);
                }
            }
        }
        _ => {}
    }

    let failed = records.iter().filter(|r| r.outcome.is_err()).count();
    if failed * 10 > records.len() {
        return Err(HarnessError::TooManyFailures { failed, total: records.len() });
    }
    Ok(RunOutput { records, summary, files })
}
