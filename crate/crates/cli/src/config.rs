use std::path::{Path, PathBuf};

use qdm_cavity::dynamics::Eq1Variant;
use qdm_cavity::model;
use qdm_cavity::sweep::Spacing;
use qdm_cavity::verify::VerifySettings;
use qdm_cavity::{CavityParams, Convention, GridSpec, PhysicalPreset, QdmParams, UnitContext};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUT_ENV: &str = "QDM_CAVITY_OUT";
pub const DEFAULT_OUT: &str = "qdm-out";

/// Parameter file. Every section is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub preset: Option<String>,
    pub qdm: Option<QdmOverrides>,
    pub units: Option<UnitContext>,
    pub cavity: Option<CavitySpec>,
    pub delta_grid: Option<GridSpec>,
    pub spectrum: Option<SpectrumSpec>,
    pub fig2: Option<Fig2Spec>,
    pub fig3: Option<Fig3Spec>,
    pub sweep: Option<SweepSpec>,
    pub verify: Option<VerifySettings>,
    pub output: Option<PathBuf>,
    pub convention: Option<Convention>,
    pub eq1_variant: Option<Eq1Variant>,
    /// Adds steady-state oracle columns to the susceptibility table.
    pub oracle: Option<bool>,
    pub oracle_g: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QdmOverrides {
    pub gamma10_pop: Option<f64>,
    pub gamma20_pop: Option<f64>,
    #[serde(rename = "Gamma10")]
    pub dephasing10: Option<f64>,
    #[serde(rename = "Gamma20")]
    pub dephasing20: Option<f64>,
    #[serde(rename = "Gamma12")]
    pub dephasing12: Option<f64>,
    #[serde(rename = "Te")]
    pub tunneling: Option<f64>,
    pub omega12: Option<f64>,
}

impl QdmOverrides {
    fn apply(&self, mut p: QdmParams) -> QdmParams {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.decay10, self.gamma10_pop);
        set(&mut p.decay20, self.gamma20_pop);
        set(&mut p.dephasing10, self.dephasing10);
        set(&mut p.dephasing20, self.dephasing20);
        set(&mut p.dephasing12, self.dephasing12);
        set(&mut p.tunneling, self.tunneling);
        set(&mut p.omega12, self.omega12);
        p
    }
}

/// Cavity geometry; missing entries fall back to the standard microcavity.
#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySpec {
    #[serde(rename = "L")]
    pub round_trip_length: Option<f64>,
    #[serde(rename = "l")]
    pub sample_length: Option<f64>,
    #[serde(rename = "r")]
    pub reflectivity: Option<f64>,
    #[serde(rename = "K")]
    pub prefactor: Option<f64>,
    pub omega_c: Option<f64>,
    pub empty_linewidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSpec {
    pub points: usize,
    /// Defaults to ten formula linewidths, capped at half a free spectral
    /// range.
    pub half_width: Option<f64>,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self { points: 4001, half_width: None }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Spec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for Fig2Spec {
    fn default() -> Self {
        Self { start: -4.0, stop: 4.0, step: 4e-4 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3Spec {
    #[serde(rename = "Te")]
    pub tunneling: GridSpec,
    #[serde(rename = "Gamma10_ueV")]
    pub linewidth_uev: GridSpec,
    pub clip: f64,
}

impl Default for Fig3Spec {
    fn default() -> Self {
        Self {
            tunneling: GridSpec { axis: "Te".into(), start: 0.05, stop: 1.5, count: 61, spacing: Spacing::Linear },
            linewidth_uev: GridSpec {
                axis: "Gamma10_ueV".into(),
                start: 6.0,
                stop: 50.0,
                count: 45,
                spacing: Spacing::Linear,
            },
            clip: 7.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    ChiRePrinted,
    ChiImPrinted,
    ChiReCanonical,
    ChiImCanonical,
    /// Printed `d chi'/d Delta` at `Delta`.
    Dispersion,
    /// Probe-frequency slope at the located window.
    WindowDispersion,
    /// Loaded-cavity transmission at `Delta`.
    Transmission,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub quantity: Quantity,
    pub x: GridSpec,
    pub y: Option<GridSpec>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            quantity: Quantity::WindowDispersion,
            x: GridSpec { axis: "Te".into(), start: 0.05, stop: 1.5, count: 61, spacing: Spacing::Linear },
            y: None,
        }
    }
}

pub const SWEEP_AXES: [&str; 4] = ["Delta", "Te", "omega12", "Gamma20"];

/// Settings from the command line that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub convention: Option<Convention>,
    pub eq1_printed: bool,
}

/// Fully resolved run. `out` is kept out of the serialized echo so that the
/// written files do not depend on where they are written.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: String,
    pub preset: String,
    pub qdm: QdmParams,
    pub units: UnitContext,
    pub physical: PhysicalPreset,
    pub preset_prefactor: f64,
    pub cavity: CavityParams,
    pub delta_grid: GridSpec,
    pub spectrum: SpectrumSpec,
    pub fig2: Fig2Spec,
    pub fig3: Fig3Spec,
    pub sweep: SweepSpec,
    pub verify: VerifySettings,
    pub convention: Convention,
    pub eq1_variant: Eq1Variant,
    pub oracle: bool,
    pub oracle_g: f64,
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn resolve(command: &str, file: RunConfig, cli: Overrides) -> Result<Resolved, CliError> {
    if let Some(c) = &file.command {
        if c != command {
            return Err(CliError::Config(format!("config is for `{c}`, not `{command}`")));
        }
    }
    let preset_name = cli
        .preset
        .or(file.preset)
        .unwrap_or_else(|| model::PAPER_PRESET.to_string());
    let preset = model::preset(&preset_name).map_err(CliError::from_core_config)?;

    let qdm = file.qdm.unwrap_or_default().apply(preset.qdm);
    model::validate(&qdm).map_err(CliError::from_core_config)?;
    let units = file.units.unwrap_or(preset.units);
    units.validate().map_err(CliError::from_core_config)?;
    preset.physical.validate().map_err(CliError::from_core_config)?;

    let spec = file.cavity.unwrap_or_default();
    let base = CavityParams::figure2(&units);
    let mut cavity = CavityParams::from_lengths(
        &units,
        spec.round_trip_length.unwrap_or(base.round_trip_length),
        spec.sample_length.unwrap_or(base.sample_length),
        spec.reflectivity.unwrap_or(base.reflectivity),
        spec.prefactor.unwrap_or(base.prefactor),
    )
    .with_omega_c(spec.omega_c.unwrap_or(0.0));
    cavity.empty_linewidth = spec.empty_linewidth;
    cavity.validate().map_err(CliError::from_core_config)?;

    let delta_grid = file.delta_grid.unwrap_or(GridSpec {
        axis: "Delta".into(),
        start: -5.0,
        stop: 5.0,
        count: 2001,
        spacing: Spacing::Linear,
    });
    delta_grid.validate().map_err(CliError::from_core_config)?;

    let fig3 = file.fig3.unwrap_or_default();
    let sweep = file.sweep.unwrap_or_default();
    for g in [Some(&sweep.x), sweep.y.as_ref()].into_iter().flatten() {
        if !SWEEP_AXES.contains(&g.axis.as_str()) {
            return Err(CliError::Config(format!(
                "unknown sweep axis `{}` (expected one of {SWEEP_AXES:?})",
                g.axis
            )));
        }
    }

    let eq1_variant = if cli.eq1_printed {
        Eq1Variant::Printed
    } else {
        file.eq1_variant.unwrap_or_default()
    };
    let convention = cli.convention.or(file.convention).unwrap_or(Convention::Canonical);
    let oracle_g = file.oracle_g.unwrap_or(1e-5);
    if !(oracle_g > 0.0 && oracle_g.is_finite()) {
        return Err(CliError::Config("oracle_g must be > 0".into()));
    }
    let mut verify = file.verify.unwrap_or_default();
    verify.eq1_variant = eq1_variant;
    verify.kappa_convention = convention;

    let out = cli
        .out
        .or(file.output)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    Ok(Resolved {
        command: command.to_string(),
        preset: preset_name,
        qdm,
        units,
        physical: preset.physical,
        preset_prefactor: model::susceptibility_prefactor(&preset.physical, &units),
        cavity,
        delta_grid,
        spectrum: file.spectrum.unwrap_or_default(),
        fig2: file.fig2.unwrap_or_default(),
        fig3,
        sweep,
        verify,
        convention,
        eq1_variant,
        oracle: file.oracle.unwrap_or(false),
        oracle_g,
        out,
    })
}
