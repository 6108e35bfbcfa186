//! Trial records and the on-disk formats: result CSV with a JSON header line,
//! summary CSV, and a JSONL sidecar holding every design for the audit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use isac_hbf::ao_driver::{HybridDesign, Receiver};
use isac_hbf::digital_combiner::DigitalCombiner;
use isac_hbf::oblique_rcg::ObliquePoint;
use isac_hbf::sca_analog::AnalogPhases;
use isac_hbf::CMat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{format_error, HarnessError};
use crate::scenario::Scenario;
use crate::FORMAT_VERSION;

pub const COLUMNS: [&str; 16] = [
    "trial",
    "seed",
    "value",
    "receiver",
    "status",
    "nmse",
    "mse",
    "similarity",
    "weighted",
    "iterations",
    "converged",
    "waveform_objective",
    "waveform_similarity",
    "sdp_bound",
    "trace",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformMetrics {
    /// `Σ_k ‖AᴴH_k X_k − S_k‖² + σ²‖A‖²` over the frame.
    pub objective: f64,
    /// Largest `‖X_k − X0‖²` over the UEs.
    pub max_similarity: f64,
    /// Sum of the per-UE SDP optimal values in original units.
    pub sdp_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    /// Aggregation MSE divided by `M`.
    pub nmse: f64,
    pub mse: f64,
    pub similarity: f64,
    pub weighted: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted objective before the first pass and after each pass.
    pub trace: Vec<f64>,
    pub waveform: Option<WaveformMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub value: Option<f64>,
    pub receiver: Receiver,
    pub outcome: Result<TrialMetrics, String>,
    /// Not written to disk so that result files stay reproducible.
    pub wall_time: Duration,
}

impl TrialRecord {
    pub fn metrics(&self) -> Option<&TrialMetrics> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHeader {
    pub format_version: u32,
    pub kind: String,
    pub scenario: Scenario,
}

impl FileHeader {
    pub fn new(kind: &str, scenario: &Scenario) -> Self {
        Self { format_version: FORMAT_VERSION, kind: kind.into(), scenario: scenario.clone() }
    }
}

/// `results.csv` → `results.<suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub(crate) fn num(x: f64) -> String {
    format!("{x}")
}

fn receiver_str(r: Receiver) -> &'static str {
    match r {
        Receiver::Hybrid => "hybrid",
        Receiver::Digital => "digital",
    }
}

fn parse_receiver(s: &str) -> Result<Receiver, HarnessError> {
    match s {
        "hybrid" => Ok(Receiver::Hybrid),
        "digital" => Ok(Receiver::Digital),
        other => Err(format_error(format!("unknown receiver `{other}`"))),
    }
}

pub(crate) fn header_line(header: &FileHeader) -> Result<String, HarnessError> {
    Ok(format!("# {}\n", serde_json::to_string(header)?))
}

fn record_fields(r: &TrialRecord) -> Vec<String> {
    let mut row = vec![
        r.trial.to_string(),
        r.seed.to_string(),
        r.value.map(num).unwrap_or_default(),
        receiver_str(r.receiver).to_string(),
    ];
    match &r.outcome {
        Ok(m) => {
            let (wo, ws, sb) = match &m.waveform {
                Some(w) => (num(w.objective), num(w.max_similarity), num(w.sdp_bound)),
                None => Default::default(),
            };
            row.extend([
                "ok".to_string(),
                num(m.nmse),
                num(m.mse),
                num(m.similarity),
                num(m.weighted),
                m.iterations.to_string(),
                m.converged.to_string(),
                wo,
                ws,
                sb,
                m.trace.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";"),
                String::new(),
            ]);
        }
        Err(e) => {
            row.push("failed".to_string());
            row.extend(std::iter::repeat_n(String::new(), 10));
            row.push(e.clone());
        }
    }
    row
}

pub fn write_results(path: &Path, header: &FileHeader, records: &[TrialRecord]) -> Result<(), HarnessError> {
    let mut buf = header_line(header)?.into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(COLUMNS)?;
        for r in records {
            w.write_record(record_fields(r))?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

fn split_header(text: &str) -> Result<(FileHeader, &str), HarnessError> {
    let (first, rest) = text.split_once('\n').ok_or_else(|| format_error("missing header line"))?;
    let json = first.strip_prefix("# ").ok_or_else(|| format_error("first line is not a `# {json}` header"))?;
    let header: FileHeader = serde_json::from_str(json)?;
    if header.format_version != FORMAT_VERSION {
        return Err(format_error(format!(
            "format_version {} is not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    Ok((header, rest))
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, HarnessError> {
    field.parse().map_err(|_| format_error(format!("bad {what} `{field}`")))
}

fn opt_f64(field: &str, what: &str) -> Result<Option<f64>, HarnessError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, what).map(Some)
    }
}

pub fn read_results(path: &Path) -> Result<(FileHeader, Vec<TrialRecord>), HarnessError> {
    let text = fs::read_to_string(path)?;
    let (header, body) = split_header(&text)?;
    if header.kind != "results" {
        return Err(format_error(format!("expected a results file, found `{}`", header.kind)));
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names != COLUMNS {
        return Err(format_error(format!("unexpected columns {names:?}")));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let outcome = match f(4) {
            "ok" => {
                let waveform = match opt_f64(f(11), "waveform objective")? {
                    Some(objective) => Some(WaveformMetrics {
                        objective,
                        max_similarity: parse(f(12), "waveform similarity")?,
                        sdp_bound: parse(f(13), "sdp bound")?,
                    }),
                    None => None,
                };
                let trace = if f(14).is_empty() {
                    Vec::new()
                } else {
                    f(14).split(';').map(|x| parse(x, "trace entry")).collect::<Result<_, _>>()?
                };
                Ok(TrialMetrics {
                    nmse: parse(f(5), "nmse")?,
                    mse: parse(f(6), "mse")?,
                    similarity: parse(f(7), "similarity")?,
                    weighted: parse(f(8), "weighted objective")?,
                    iterations: parse(f(9), "iteration count")?,
                    converged: parse(f(10), "converged flag")?,
                    trace,
                    waveform,
                })
            }
            "failed" => Err(f(15).to_string()),
            other => return Err(format_error(format!("unknown status `{other}`"))),
        };
        records.push(TrialRecord {
            trial: parse(f(0), "trial")?,
            seed: parse(f(1), "seed")?,
            value: opt_f64(f(2), "sweep value")?,
            receiver: parse_receiver(f(3))?,
            outcome,
            wall_time: Duration::ZERO,
        });
    }
    Ok((header, records))
}

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl StoredMatrix {
    pub fn from_matrix(m: &CMat) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat, HarnessError> {
        if self.re.len() != self.rows * self.cols || self.im.len() != self.re.len() {
            return Err(format_error("stored matrix has the wrong number of entries"));
        }
        Ok(CMat::from_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&re, &im)| Complex64::new(re, im)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDesign {
    pub trial: usize,
    pub value: Option<f64>,
    pub receiver: Receiver,
    pub row_norm: f64,
    pub precoders: Vec<StoredMatrix>,
    pub analog: Option<Vec<f64>>,
    pub u_bb: StoredMatrix,
}

impl StoredDesign {
    pub fn new(trial: usize, value: Option<f64>, receiver: Receiver, design: &HybridDesign) -> Self {
        Self {
            trial,
            value,
            receiver,
            row_norm: design.precoders.first().map_or(0.0, |p| p.row_norm),
            precoders: design.precoders.iter().map(|p| StoredMatrix::from_matrix(&p.f)).collect(),
            analog: design.analog.as_ref().map(|a| a.theta.clone()),
            u_bb: StoredMatrix::from_matrix(&design.digital.u_bb),
        }
    }

    /// Rebuilds the design; fails if a stored precoder is off the manifold.
    pub fn to_design(&self) -> Result<HybridDesign, HarnessError> {
        let precoders = self
            .precoders
            .iter()
            .map(|m| Ok(ObliquePoint::new(m.to_matrix()?, self.row_norm)?))
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(HybridDesign {
            precoders,
            analog: self.analog.clone().map(AnalogPhases::new),
            digital: DigitalCombiner { u_bb: self.u_bb.to_matrix()? },
        })
    }
}

pub fn write_designs(path: &Path, designs: &[StoredDesign]) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    for d in designs {
        serde_json::to_writer(&mut buf, d)?;
        buf.push(b'\n');
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_designs(path: &Path) -> Result<Vec<StoredDesign>, HarnessError> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
