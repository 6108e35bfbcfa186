//! Plot data for the beampattern and waveform figures.

use std::fs;
use std::path::Path;

use isac_hbf::ao_driver::HybridDesign;
use isac_hbf::model::{beampattern, SteeringGrid};
use isac_hbf::CMat;

use crate::error::{invalid, HarnessError};
use crate::record::num;

/// Floor applied before taking logarithms.
const DB_FLOOR: f64 = -300.0;

/// Mean transmit covariance `(1/K) Σ_k F_k F_kᴴ`.
pub fn mean_covariance(precoders: &[CMat]) -> Result<CMat, HarnessError> {
    let first = precoders.first().ok_or_else(|| invalid("no precoders"))?;
    let n = first.nrows();
    let mut acc = CMat::zeros(n, n);
    for f in precoders {
        if f.nrows() != n {
            return Err(invalid("precoders have different antenna counts"));
        }
        acc += f * f.adjoint();
    }
    Ok(acc / num_complex::Complex64::new(precoders.len() as f64, 0.0))
}

/// Beampattern in dB relative to its own peak.
pub fn beampattern_db(r: &CMat, grid: &SteeringGrid) -> Result<Vec<f64>, HarnessError> {
    let p = beampattern(r, grid)?;
    let peak = p.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(invalid("beampattern is identically zero"));
    }
    Ok(p.iter().map(|&x| if x > 0.0 { (10.0 * (x / peak).log10()).max(DB_FLOOR) } else { DB_FLOOR }).collect())
}

fn label(design: &HybridDesign) -> &'static str {
    if design.analog.is_some() {
        "hybrid_db"
    } else {
        "digital_db"
    }
}

/// Writes `theta_deg` followed by the normalized patterns of `design`, of
/// `other` when given, and of the ideal benchmark `(1/K) Σ F0_k F0_kᴴ`.
pub fn export_beampattern(
    design: &HybridDesign,
    other: Option<&HybridDesign>,
    anchors: &[CMat],
    grid: &SteeringGrid,
    out: &Path,
) -> Result<(), HarnessError> {
    let mut curves = vec![(label(design), beampattern_db(&mean_covariance(&design.precoder_matrices())?, grid)?)];
    if let Some(o) = other {
        if label(o) == curves[0].0 {
            return Err(invalid("both designs use the same receiver"));
        }
        curves.push((label(o), beampattern_db(&mean_covariance(&o.precoder_matrices())?, grid)?));
    }
    curves.push(("ideal_db", beampattern_db(&mean_covariance(anchors)?, grid)?));
    if label(design) == "digital_db" && curves.len() == 3 {
        curves.swap(0, 1);
    }

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut head = vec!["theta_deg"];
        head.extend(curves.iter().map(|c| c.0));
        w.write_record(&head)?;
        for (i, theta) in grid.angles.iter().enumerate() {
            let mut row = vec![num(theta.to_degrees())];
            row.extend(curves.iter().map(|c| num(c.1[i])));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    fs::write(out, buf)?;
    Ok(())
}

/// Writes one row per sample: real part, imaginary part and modulus of the
/// designed and reference waveforms on antenna `antenna`.
pub fn export_waveform(x: &CMat, x0: &CMat, antenna: usize, out: &Path) -> Result<(), HarnessError> {
    if x.shape() != x0.shape() {
        return Err(invalid(format!("designed waveform is {:?}, reference is {:?}", x.shape(), x0.shape())));
    }
    if antenna >= x.nrows() {
        return Err(invalid(format!("antenna {antenna} out of range for {} antennas", x.nrows())));
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["t", "designed_re", "designed_im", "designed_abs", "reference_re", "reference_im", "reference_abs"])?;
        for t in 0..x.ncols() {
            let (d, r) = (x[(antenna, t)], x0[(antenna, t)]);
            w.write_record([
                t.to_string(),
                num(d.re),
                num(d.im),
                num(d.norm()),
                num(r.re),
                num(r.im),
                num(r.norm()),
            ])?;
        }
        w.flush()?;
    }
    fs::write(out, buf)?;
    Ok(())
}
