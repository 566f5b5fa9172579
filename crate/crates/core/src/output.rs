//! CSV and JSON writers for sweep results.
//!
//! Reals go out in scientific notation with 17 significant digits so that
//! every value parses back to the same bits.

use std::io::Write;

use serde::Serialize;

use crate::cavity::TransmissionPoint;
use crate::scalar::Real;
use crate::sweep::{LabeledSpectrum, SurfaceResult};

pub const FORMAT_TAG: &str = "qdm-cavity/1";

pub fn fmt_real<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

/// Writes a header row and one row per record.
pub fn write_table<W: Write, T: Real>(
    out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<T>>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt_real))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per cell: first axis, second axis, signed value, mask flag.
pub fn write_surface_csv<W: Write, T: Real>(out: W, s: &SurfaceResult<T>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([s.axes[0].axis.as_str(), s.axes[1].axis.as_str(), "raw_value", "clipped", "status"])?;
    let rows = s.axes[0].points();
    let cols = s.axes[1].points();
    for (i, &x) in rows.iter().enumerate() {
        for (j, &y) in cols.iter().enumerate() {
            let k = s.index(i, j);
            let status = serde_json::to_value(s.status[k])
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            w.write_record([
                fmt_real(x),
                fmt_real(y),
                fmt_real(s.raw[k]),
                s.clipped_mask[k].to_string(),
                status,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum_csv<W: Write, T: Real>(out: W, points: &[TransmissionPoint<T>]) -> csv::Result<()> {
    write_table(
        out,
        &["Delta", "transmission"],
        points.iter().map(|p| vec![p.delta, p.transmission]),
    )
}

/// Long-format family: label, detuning, transmission.
pub fn write_family_csv<W: Write, T: Real>(out: W, family: &[LabeledSpectrum<T>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "Delta", "transmission"])?;
    for s in family {
        for p in &s.points {
            w.write_record([s.label.clone(), fmt_real(p.delta), fmt_real(p.transmission)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON wrapper carrying the input configuration next to the data.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a, C: Serialize, D: Serialize> {
    pub format: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub data: &'a D,
}

pub fn write_envelope<W: Write, C: Serialize, D: Serialize>(
    out: W,
    command: &str,
    config: &C,
    data: &D,
) -> serde_json::Result<()> {
    let env = Envelope { format: FORMAT_TAG, command, config, data };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &env)?;
    out.write_all(b"\n").map_err(serde_json::Error::io)
}
