use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qdm_cavity::cavity::{self, TransmissionPoint};
use qdm_cavity::output::{self, fmt_real};
use qdm_cavity::sweep::{self, Scenario};
use qdm_cavity::{dynamics, susceptibility, verify, Convention, GridSpec, QdmParams};
use serde::Serialize;

use crate::config::{Quantity, Resolved};
use crate::CliError;

type Outcome = Result<Vec<PathBuf>, CliError>;

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok((path, BufWriter::new(f)))
}

fn write_csv(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
) -> Result<PathBuf, CliError> {
    let (path, mut w) = create(dir, name)?;
    body(&mut w).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_json<D: Serialize>(cfg: &Resolved, name: &str, data: &D) -> Result<PathBuf, CliError> {
    let (path, mut w) = create(&cfg.out, name)?;
    output::write_envelope(&mut w, &cfg.command, cfg, data)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn require_canonical(cfg: &Resolved) -> Result<(), CliError> {
    if cfg.convention == Convention::Printed {
        return Err(CliError::Config(format!(
            "`{}` works in the canonical convention only",
            cfg.command
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SusceptibilitySummary {
    window_delta: Option<f64>,
    chi_at_window: Option<qdm_cavity::ComplexResponse>,
    dispersion_at_window: Option<qdm_cavity::DispersionReport>,
    points: usize,
}

pub fn susceptibility(cfg: &Resolved) -> Outcome {
    let p = cfg.qdm;
    cfg.delta_grid.validate().map_err(CliError::from_core)?;
    let grid = cfg.delta_grid.points();
    let rows = sweep::run_sweep_parallel(&grid, |&d| {
        let pr = susceptibility::chi_printed(&p, d)?;
        let ca = susceptibility::chi_canonical(&p, d)?;
        let slope = susceptibility::dispersion_exact(&p, d)?.exact;
        let mut row = vec![d, pr.chi_re, pr.chi_im, ca.chi_re, ca.chi_im, slope];
        if cfg.oracle {
            let o = dynamics::susceptibility_from_oracle(&p, d, cfg.oracle_g)?;
            row.extend([o.chi_re, o.chi_im]);
        }
        Ok(row)
    })
    .map_err(CliError::from_core)?;

    let mut header = vec![
        "Delta [Gamma10]",
        "chi_re_printed [K]",
        "chi_im_printed [K]",
        "chi_re_canonical [K]",
        "chi_im_canonical [K]",
        "dchi_re_dDelta [K/Gamma10]",
    ];
    if cfg.oracle {
        header.extend(["chi_re_oracle [K]", "chi_im_oracle [K]"]);
    }
    let csv = write_csv(&cfg.out, "susceptibility.csv", |w| output::write_table(w, &header, rows))?;

    let summary = if p.tunneling > 0.0 {
        let w = susceptibility::find_transparency_window(&p, susceptibility::default_window_half_width(&p))
            .map_err(CliError::from_core)?;
        SusceptibilitySummary {
            window_delta: Some(w),
            chi_at_window: Some(susceptibility::chi(&p, w, cfg.convention).map_err(CliError::from_core)?),
            dispersion_at_window: Some(susceptibility::dispersion_exact(&p, w).map_err(CliError::from_core)?),
            points: grid.len(),
        }
    } else {
        SusceptibilitySummary { window_delta: None, chi_at_window: None, dispersion_at_window: None, points: grid.len() }
    };
    Ok(vec![csv, write_json(cfg, "susceptibility.json", &summary)?])
}

/// Cavity quantities at the window. `omega_r` and `linewidth_formula` are
/// absent when the pulling coefficient sits at or beyond the pole `xi = -1`
/// (anomalous dispersion), with the reason in `formula_note`.
#[derive(Serialize)]
pub struct CavitySummary {
    pub window_delta: f64,
    pub xi: f64,
    pub omega_r: Option<f64>,
    pub kappa_at_window: f64,
    pub linewidth_formula: Option<f64>,
    pub formula_note: Option<String>,
    pub linewidth_measured: Option<f64>,
    pub linewidth_gap: Option<f64>,
    pub fwhm_note: Option<String>,
    pub transmission_peak: f64,
    pub empty_transmission_peak: f64,
    pub empty_linewidth: f64,
    pub free_spectral_range: f64,
    pub spectrum_peak: TransmissionPoint<f64>,
}

pub fn cavity(cfg: &Resolved) -> Outcome {
    require_canonical(cfg)?;
    let (cav, p) = (cfg.cavity, cfg.qdm);
    let core = |e| CliError::from_core(e);
    let window = cavity::reference_detuning(&p).map_err(core)?;
    let chi = susceptibility::chi_canonical(&p, window).map_err(core)?;
    let xi = cavity::pulling_coefficient(&cav, -susceptibility::dispersion_canonical(&p, window).map_err(core)?);
    let kappa = cavity::round_trip_absorption(&cav, chi.chi_im).map_err(core)?;
    let formula = cavity::pulled_resonance(&cav, xi)
        .and_then(|w| Ok((w, cavity::modified_linewidth(&cav, cav.empty_linewidth(), kappa, xi)?)));
    let (omega_r, linewidth, formula_note) = match formula {
        Ok((w, lw)) => (Some(w), Some(lw), None),
        Err(e @ qdm_cavity::Error::PoleAtMinusOne(_)) => (None, None, Some(e.to_string())),
        Err(e) => return Err(core(e)),
    };

    let fsr = cav.free_spectral_range();
    // pulled line in detuning coordinates: empty resonance at -omega_c, medium at the window
    let center = match linewidth {
        Some(_) => (-cav.omega_c + xi * window) / (1.0 + xi),
        None => -cav.omega_c,
    };
    let half = cfg
        .spectrum
        .half_width
        .unwrap_or_else(|| linewidth.map_or(fsr / 2.0, |lw| (10.0 * lw).min(fsr / 2.0)));
    if !(half > 0.0 && half.is_finite()) || cfg.spectrum.points < 3 {
        return Err(CliError::Config("spectrum needs half_width > 0 and at least 3 points".into()));
    }
    let grid = cavity::centered_grid(center, half, cfg.spectrum.points);
    let t = sweep::run_sweep_parallel(&grid, |&d| cavity::transmission_at(&cav, &p, d)).map_err(core)?;
    let spectrum: Vec<_> = grid
        .iter()
        .zip(t)
        .map(|(&delta, transmission)| TransmissionPoint { delta, transmission })
        .collect();
    let (_, top) = cavity::peak(&spectrum).map_err(core)?;
    let (measured, fwhm_note) = match cavity::measure_fwhm(&spectrum) {
        Ok(w) => (Some(w), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let r = cav.reflectivity;
    let summary = CavitySummary {
        window_delta: window,
        xi,
        omega_r,
        kappa_at_window: kappa,
        linewidth_formula: linewidth,
        formula_note,
        linewidth_measured: measured,
        linewidth_gap: measured.zip(linewidth).map(|(m, f)| (m - f).abs() / f),
        fwhm_note,
        transmission_peak: (1.0 - r) * (1.0 - r) * kappa / ((1.0 - r * kappa) * (1.0 - r * kappa)),
        empty_transmission_peak: cavity::airy_transmission(r, 1.0, 0.0),
        empty_linewidth: cav.empty_linewidth(),
        free_spectral_range: fsr,
        spectrum_peak: top,
    };
    let csv = write_csv(&cfg.out, "cavity_spectrum.csv", |w| output::write_spectrum_csv(w, &spectrum))?;
    Ok(vec![csv, write_json(cfg, "cavity.json", &summary)?])
}

#[derive(Serialize)]
struct PanelSummary {
    label: String,
    description: String,
    params: Option<QdmParams>,
    peak: TransmissionPoint<f64>,
    fwhm: Option<f64>,
    file: String,
}

pub fn fig2(cfg: &Resolved) -> Outcome {
    require_canonical(cfg)?;
    let f = cfg.fig2;
    let grid = sweep::stepped_grid(f.start, f.stop, f.step).map_err(CliError::from_core)?;
    let scenarios: Vec<Scenario<f64>> = sweep::standard_scenarios(&cfg.qdm);
    let family = sweep::figure2_family(&cfg.cavity, &scenarios, &grid).map_err(CliError::from_core)?;

    let mut files = Vec::new();
    let mut panels = Vec::new();
    for s in &family {
        let name = format!("fig2_{}.csv", s.label);
        files.push(write_csv(&cfg.out, &name, |w| output::write_spectrum_csv(w, &s.points))?);
        let (_, peak) = cavity::peak(&s.points).map_err(CliError::from_core)?;
        panels.push(PanelSummary {
            label: s.label.clone(),
            description: s.description.clone(),
            params: s.params,
            peak,
            fwhm: cavity::measure_fwhm(&s.points).ok(),
            file: name,
        });
    }
    files.push(write_json(cfg, "fig2.json", &panels)?);
    Ok(files)
}

pub fn fig3(cfg: &Resolved) -> Outcome {
    require_canonical(cfg)?;
    let f = &cfg.fig3;
    let surface = sweep::dispersion_surface(&f.tunneling, &f.linewidth_uev, &cfg.units, f.clip)
        .map_err(CliError::from_core)?;
    let csv = write_csv(&cfg.out, "fig3.csv", |w| output::write_surface_csv(w, &surface))?;
    Ok(vec![csv, write_json(cfg, "fig3.json", &surface)?])
}

/// Applies one sweep coordinate to the base point `(params, delta)`.
fn with_axis(p: QdmParams, delta: f64, axis: &str, v: f64) -> (QdmParams, f64) {
    match axis {
        "Delta" => (p, v),
        "Te" => (p.with_tunneling(v), delta),
        "omega12" => (p.with_omega12(v), delta),
        "Gamma20" => (QdmParams::with_linewidth(p.dephasing10, v / p.dephasing10, p.tunneling, p.omega12), delta),
        _ => unreachable!("axis names are checked when the config is resolved"),
    }
}

fn quantity(cfg: &Resolved, q: Quantity, p: &QdmParams, delta: f64) -> qdm_cavity::Result<f64> {
    Ok(match q {
        Quantity::ChiRePrinted => susceptibility::chi_printed(p, delta)?.chi_re,
        Quantity::ChiImPrinted => susceptibility::chi_printed(p, delta)?.chi_im,
        Quantity::ChiReCanonical => susceptibility::chi_canonical(p, delta)?.chi_re,
        Quantity::ChiImCanonical => susceptibility::chi_canonical(p, delta)?.chi_im,
        Quantity::Dispersion => susceptibility::dispersion_exact(p, delta)?.exact,
        Quantity::WindowDispersion => {
            let w = susceptibility::find_transparency_window(p, susceptibility::default_window_half_width(p))?;
            susceptibility::dispersion_exact(p, w)?.wrt_probe
        }
        Quantity::Transmission => cavity::transmission_at(&cfg.cavity, p, delta)?,
    })
}

pub fn sweep(cfg: &Resolved) -> Outcome {
    let spec = &cfg.sweep;
    let q = spec.quantity;
    if q == Quantity::Transmission {
        require_canonical(cfg)?;
    }
    let axes: Vec<&GridSpec> = [Some(&spec.x), spec.y.as_ref()].into_iter().flatten().collect();
    if q == Quantity::WindowDispersion && axes.iter().any(|g| g.axis == "Delta") {
        return Err(CliError::Config("window_dispersion cannot be swept over Delta".into()));
    }
    if axes.len() == 2 && axes[0].axis == axes[1].axis {
        return Err(CliError::Config("sweep axes must differ".into()));
    }
    let eval = |coords: &[f64]| {
        let (mut p, mut d) = (cfg.qdm, 0.0);
        for (g, &v) in axes.iter().zip(coords) {
            (p, d) = with_axis(p, d, &g.axis, v);
        }
        quantity(cfg, q, &p, d)
    };
    let rows: Vec<Vec<f64>> = match spec.y.as_ref() {
        None => sweep::sweep_1d(&spec.x, |x| Ok(vec![x, eval(&[x])?])).map(|v| v.into_iter().map(|(_, r)| r).collect()),
        Some(y) => sweep::sweep_2d(&spec.x, y, |a, b| Ok(vec![a, b, eval(&[a, b])?])),
    }
    .map_err(CliError::from_core)?;

    let qname = serde_json::to_value(q).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    let mut header: Vec<&str> = axes.iter().map(|g| g.axis.as_str()).collect();
    header.push(&qname);
    let csv = write_csv(&cfg.out, "sweep.csv", |w| output::write_table(w, &header, rows.clone()))?;
    let values: Vec<f64> = rows.iter().map(|r| r[r.len() - 1]).collect();
    Ok(vec![csv, write_json(cfg, "sweep.json", &values)?])
}

pub fn verify(cfg: &Resolved) -> Result<(Vec<PathBuf>, verify::VerifyReport), CliError> {
    let report = verify::run(&cfg.qdm, &cfg.verify);
    let path = write_json(cfg, "verify.json", &report)?;
    Ok((vec![path], report))
}

pub fn describe_check(c: &verify::CheckResult) -> String {
    format!(
        "[{}] {} measured={} tolerance={} ({})",
        if c.passed { "PASS" } else { "FAIL" },
        c.name,
        fmt_real(c.measured),
        fmt_real(c.tolerance),
        c.detail
    )
}
