//! Parameter grids, the order-stable parallel map, the dispersion surface and
//! the transmission family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{self, CavityParams, TransmissionPoint};
use crate::error::{Error, Result};
use crate::model::{QdmParams, UnitContext};
use crate::scalar::Real;
use crate::susceptibility;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// One sampled axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec<T> {
    pub axis: String,
    pub start: T,
    pub stop: T,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl<T: Real> GridSpec<T> {
    pub fn new(axis: impl Into<String>, start: T, stop: T, count: usize, spacing: Spacing) -> Result<Self> {
        let grid = Self { axis: axis.into(), start, stop, count, spacing };
        grid.validate()?;
        Ok(grid)
    }

    pub fn linear(axis: impl Into<String>, start: T, stop: T, count: usize) -> Result<Self> {
        Self::new(axis, start, stop, count, Spacing::Linear)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bound"));
        }
        if self.start >= self.stop {
            return Err(Error::InvalidGrid("start must be below stop"));
        }
        if self.count < 2 {
            return Err(Error::InvalidGrid("count must be at least 2"));
        }
        if self.spacing == Spacing::Log && self.start <= T::zero() {
            return Err(Error::InvalidGrid("log spacing needs a positive start"));
        }
        Ok(())
    }

    /// Sample points. The last point is exactly `stop`.
    pub fn points(&self) -> Vec<T> {
        let n = self.count;
        let last = T::lit((n - 1) as f64);
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    return self.stop;
                }
                let f = T::lit(i as f64) / last;
                match self.spacing {
                    Spacing::Linear => self.start + f * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + f * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

/// Evaluates `eval` on every cell in parallel and returns the results in
/// input order.
///
/// Each result depends only on its own cell, so the output is bit-identical
/// to [`run_sweep_sequential`] whatever the schedule. On failure the error of
/// the lowest failing index is returned, wrapped in [`Error::CellFailed`].
pub fn run_sweep_parallel<C, R, F>(work: &[C], eval: F) -> Result<Vec<R>>
where
    C: Sync,
    R: Send,
    F: Fn(&C) -> Result<R> + Sync,
{
    let results: Vec<Result<R>> = work.par_iter().map(&eval).collect();
    gather(results)
}

pub fn run_sweep_sequential<C, R, F>(work: &[C], eval: F) -> Result<Vec<R>>
where
    F: Fn(&C) -> Result<R>,
{
    gather(work.iter().map(eval).collect())
}

fn gather<R>(results: Vec<Result<R>>) -> Result<Vec<R>> {
    let mut out = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => return Err(Error::CellFailed { index, source: Box::new(e) }),
        }
    }
    Ok(out)
}

/// `f` over one axis; returns `(x, f(x))` pairs.
pub fn sweep_1d<T, R, F>(grid: &GridSpec<T>, f: F) -> Result<Vec<(T, R)>>
where
    T: Real,
    R: Send,
    F: Fn(T) -> Result<R> + Sync,
{
    grid.validate()?;
    let xs = grid.points();
    let ys = run_sweep_parallel(&xs, |&x| f(x))?;
    Ok(xs.into_iter().zip(ys).collect())
}

/// `f` over the product of two axes, row-major (first axis slowest).
pub fn sweep_2d<T, R, F>(rows: &GridSpec<T>, cols: &GridSpec<T>, f: F) -> Result<Vec<R>>
where
    T: Real,
    R: Send,
    F: Fn(T, T) -> Result<R> + Sync,
{
    rows.validate()?;
    cols.validate()?;
    let cells = product(&rows.points(), &cols.points());
    run_sweep_parallel(&cells, |&(a, b)| f(a, b))
}

fn product<T: Copy>(a: &[T], b: &[T]) -> Vec<(T, T)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Clipped,
    NoTunneling,
}

/// Row-major surface over two axes.
///
/// `values` holds the plotted magnitude, `raw` the signed value it came from.
/// Cells are never dropped: clipped or undefined ones are flagged in
/// `clipped_mask` and `status` and keep their raw value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceResult<T> {
    pub axes: [GridSpec<T>; 2],
    pub values: Vec<T>,
    pub raw: Vec<T>,
    pub clip_threshold: Option<T>,
    pub clipped_mask: Vec<bool>,
    pub status: Vec<CellStatus>,
}

impl<T: Real> SurfaceResult<T> {
    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].count, self.axes[1].count)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.axes[1].count + col
    }

    pub fn value(&self, row: usize, col: usize) -> T {
        self.values[self.index(row, col)]
    }

    pub fn is_clipped(&self, row: usize, col: usize) -> bool {
        self.clipped_mask[self.index(row, col)]
    }

    pub fn clipped_count(&self) -> usize {
        self.clipped_mask.iter().filter(|&&m| m).count()
    }

    /// Row of the first axis point closest to `x`.
    pub fn nearest_row(&self, x: T) -> usize {
        nearest(&self.axes[0].points(), x)
    }
}

fn nearest<T: Real>(xs: &[T], x: T) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if (v - x).abs() < (xs[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Signed probe-frequency dispersion at the transparency window of a sample
/// with linewidth `gamma10_uev` and tunneling `te` (both in units of the
/// context linewidth), `Gamma20 = 1e-4 Gamma10`.
///
/// The result is expressed in the context units: the sample-scaled slope is
/// divided by `(Gamma10 / Gamma_ref)^2`, once for the susceptibility scale and
/// once for the frequency axis.
pub fn window_dispersion<T: Real>(te: T, gamma10_uev: T, ctx: &UnitContext<T>) -> Result<T> {
    let ratio = ctx.to_scaled(gamma10_uev);
    if !(ratio > T::zero()) {
        return Err(Error::ZeroScaleUnit(gamma10_uev.as_f64()));
    }
    let params = QdmParams::scaled(T::lit(1e-4), te / ratio, T::zero());
    let delta = susceptibility::find_transparency_window(
        &params,
        susceptibility::default_window_half_width(&params),
    )?;
    let d = susceptibility::dispersion_exact(&params, delta)?;
    Ok(d.wrt_probe / (ratio * ratio))
}

/// `|d chi'/d omega_p|` at the window over tunneling (rows, context units)
/// and linewidth (columns, μeV). Magnitudes above `clip` are masked.
pub fn dispersion_surface<T: Real>(
    te_grid: &GridSpec<T>,
    gamma10_grid_uev: &GridSpec<T>,
    ctx: &UnitContext<T>,
    clip: T,
) -> Result<SurfaceResult<T>> {
    te_grid.validate()?;
    gamma10_grid_uev.validate()?;
    ctx.validate()?;
    if !(clip > T::zero() && clip.is_finite()) {
        return Err(Error::InvalidGrid("clip must be positive"));
    }
    let cells = product(&te_grid.points(), &gamma10_grid_uev.points());
    let raw = run_sweep_parallel(&cells, |&(te, g)| match window_dispersion(te, g, ctx) {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoTunneling) => Ok(None),
        Err(e) => Err(e),
    })?;

    let mut surface = SurfaceResult {
        axes: [te_grid.clone(), gamma10_grid_uev.clone()],
        values: Vec::with_capacity(raw.len()),
        raw: Vec::with_capacity(raw.len()),
        clip_threshold: Some(clip),
        clipped_mask: Vec::with_capacity(raw.len()),
        status: Vec::with_capacity(raw.len()),
    };
    for v in raw {
        let (signed, status) = match v {
            None => (T::nan(), CellStatus::NoTunneling),
            Some(x) if x.abs() > clip => (x, CellStatus::Clipped),
            Some(x) => (x, CellStatus::Ok),
        };
        surface.raw.push(signed);
        surface.values.push(signed.abs());
        surface.clipped_mask.push(status != CellStatus::Ok);
        surface.status.push(status);
    }
    Ok(surface)
}

/// One curve of the transmission family. `params = None` is the empty
/// cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub label: String,
    pub params: Option<QdmParams<T>>,
}

impl<T: Real> Scenario<T> {
    pub fn empty(label: impl Into<String>) -> Self {
        Self { label: label.into(), params: None }
    }

    pub fn loaded(label: impl Into<String>, params: QdmParams<T>) -> Self {
        Self { label: label.into(), params: Some(params) }
    }

    pub fn describe(&self) -> String {
        match &self.params {
            None => "empty cavity".to_string(),
            Some(p) => format!("Te={}, omega12={}", p.tunneling.as_f64(), p.omega12.as_f64()),
        }
    }
}

/// The five standard curves built on `base`: (a) empty cavity, (b) `Te = 0`,
/// (c) `Te = 0.5`, (d) `Te = 0.5, omega12 = 0.2`, (e) `Te = 1`.
pub fn standard_scenarios<T: Real>(base: &QdmParams<T>) -> Vec<Scenario<T>> {
    let base = base.with_omega12(T::zero());
    let te = |x: f64| base.with_tunneling(T::lit(x));
    vec![
        Scenario::empty("a"),
        Scenario::loaded("b", te(0.0)),
        Scenario::loaded("c", te(0.5)),
        Scenario::loaded("d", te(0.5).with_omega12(T::lit(0.2))),
        Scenario::loaded("e", te(1.0)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSpectrum<T> {
    pub label: String,
    pub description: String,
    pub params: Option<QdmParams<T>>,
    pub points: Vec<TransmissionPoint<T>>,
}

/// Transmission spectra of `cav` for each scenario on a shared detuning grid.
pub fn figure2_family<T: Real>(
    cav: &CavityParams<T>,
    scenarios: &[Scenario<T>],
    grid: &[T],
) -> Result<Vec<LabeledSpectrum<T>>> {
    cav.validate()?;
    susceptibility::check_grid(grid)?;
    scenarios
        .iter()
        .map(|s| {
            let (c, p) = match &s.params {
                None => (cav.with_prefactor(T::zero()), QdmParams::paper()),
                Some(p) => (*cav, *p),
            };
            let values = run_sweep_parallel(grid, |&d| cavity::transmission_at(&c, &p, d))?;
            Ok(LabeledSpectrum {
                label: s.label.clone(),
                description: s.describe(),
                params: s.params,
                points: grid
                    .iter()
                    .zip(values)
                    .map(|(&delta, transmission)| TransmissionPoint { delta, transmission })
                    .collect(),
            })
        })
        .collect()
}

/// Uniform detuning grid `start, start + step, ...` up to `stop`, built from
/// integer multiples so that round values such as 0 and 0.2 land on it.
pub fn stepped_grid<T: Real>(start: T, stop: T, step: T) -> Result<Vec<T>> {
    if !(step > T::zero() && start < stop && step.is_finite()) {
        return Err(Error::InvalidGrid("need start < stop and a positive step"));
    }
    let n = ((stop - start) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    Ok((0..=n).map(|i| start + T::lit(i as f64) * step).collect())
}
