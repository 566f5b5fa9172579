//! Ring cavity loaded with the QDM sample: frequency pulling, round-trip
//! absorption, the modified linewidth and the full transmission spectrum.
//!
//! Frequencies are in units of `Gamma10`. The probe is addressed through its
//! detuning `Delta = omega01 - omega_p`, so the empty-cavity resonance sits at
//! `Delta = -omega_c` where `omega_c` is measured from `omega01`.
//!
//! The medium enters the round trip through `n = 1 + K chi / 2`: the
//! intensity survives with `kappa = exp(-k l K chi'')` and the phase picks up
//! `k l K chi' / 2`. With that phase the slope of the round-trip phase against
//! `omega_p` is `(2 pi / FSR) (1 + xi)`, so the pulling coefficient below and
//! the spectrum agree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QdmParams, UnitContext};
use crate::scalar::Real;
use crate::susceptibility::{self, check_grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams<T> {
    /// Round-trip length `L` (m).
    #[serde(rename = "L")]
    pub round_trip_length: T,
    /// Sample length `l` (m).
    #[serde(rename = "l")]
    pub sample_length: T,
    /// Intensity reflectivity `r` shared by both couplers.
    #[serde(rename = "r")]
    pub reflectivity: T,
    /// Empty-cavity resonance, measured from `omega01`.
    pub omega_c: T,
    /// Optical transition frequency, absolute.
    pub omega_01: T,
    /// Probe wavevector (1/m).
    #[serde(rename = "k")]
    pub wavevector: T,
    /// Susceptibility prefactor.
    #[serde(rename = "K")]
    pub prefactor: T,
    /// Overrides the linewidth derived from `r` and the free spectral range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empty_linewidth: Option<T>,
}

impl<T: Real> CavityParams<T> {
    pub fn from_lengths(
        units: &UnitContext<T>,
        round_trip_length: T,
        sample_length: T,
        reflectivity: T,
        prefactor: T,
    ) -> Self {
        Self {
            round_trip_length,
            sample_length,
            reflectivity,
            omega_c: T::zero(),
            omega_01: units.omega01_scaled(),
            wavevector: units.wavevector(),
            prefactor,
            empty_linewidth: None,
        }
    }

    /// Microcavity used for the five-panel detuning scan: `L = 150 um`,
    /// `l = 1.1 um`, `r = 0.99`, `K = 1`. Gives `xi ~ 2e3` at a `Te = 0.5`
    /// window and an empty linewidth of about `4 Gamma10`.
    pub fn figure2(units: &UnitContext<T>) -> Self {
        Self::from_lengths(units, T::lit(150e-6), T::lit(1.1e-6), T::lit(0.99), T::one())
    }

    pub fn with_omega_c(mut self, omega_c: T) -> Self {
        self.omega_c = omega_c;
        self
    }

    pub fn with_prefactor(mut self, prefactor: T) -> Self {
        self.prefactor = prefactor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.round_trip_length,
            self.sample_length,
            self.reflectivity,
            self.omega_c,
            self.omega_01,
            self.wavevector,
            self.prefactor,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cavity"));
        }
        if !(self.reflectivity > T::zero() && self.reflectivity < T::one()) {
            return Err(Error::InvalidCavity("reflectivity must lie in (0, 1)"));
        }
        if !(self.sample_length > T::zero() && self.sample_length <= self.round_trip_length) {
            return Err(Error::InvalidCavity("sample length must lie in (0, L]"));
        }
        if !(self.wavevector > T::zero() && self.omega_01 > T::zero()) {
            return Err(Error::InvalidCavity("wavevector and omega_01 must be > 0"));
        }
        if self.prefactor < T::zero() {
            return Err(Error::InvalidCavity("prefactor K must be >= 0"));
        }
        if let Some(w) = self.empty_linewidth {
            if !(w > T::zero() && w.is_finite()) {
                return Err(Error::InvalidCavity("empty_linewidth must be > 0"));
            }
        }
        Ok(())
    }

    /// Free spectral range (angular), `2 pi c / L`, using `c = omega01 / k`.
    pub fn free_spectral_range(&self) -> T {
        T::TAU() * self.omega_01 / (self.wavevector * self.round_trip_length)
    }

    /// `l / 2L`.
    pub fn length_ratio(&self) -> T {
        self.sample_length / (T::lit(2.0) * self.round_trip_length)
    }

    /// Airy-function FWHM of the empty cavity, `(1 - r) FSR / (pi sqrt r)`.
    pub fn airy_linewidth(&self) -> T {
        let r = self.reflectivity;
        (T::one() - r) * self.free_spectral_range() / (T::PI() * r.sqrt())
    }

    pub fn empty_linewidth(&self) -> T {
        self.empty_linewidth.unwrap_or_else(|| self.airy_linewidth())
    }

    /// `k l K`: optical depth per unit `chi''`.
    fn medium_depth(&self) -> T {
        self.wavevector * self.sample_length * self.prefactor
    }
}

/// `xi = omega01 (l / 2L) K d chi'/d omega_p`.
pub fn pulling_coefficient<T: Real>(cav: &CavityParams<T>, disp_wrt_probe: T) -> T {
    cav.omega_01 * cav.length_ratio() * cav.prefactor * disp_wrt_probe
}

/// `omega_c / (1 + xi) + xi omega01 / (1 + xi)`.
pub fn pulled_frequency<T: Real>(omega_c: T, omega_01: T, xi: T) -> Result<T> {
    if !(xi > -T::one()) {
        return Err(Error::PoleAtMinusOne(xi.as_f64()));
    }
    let one_plus = T::one() + xi;
    Ok(omega_c / one_plus + xi / one_plus * omega_01)
}

/// Pulled resonance of the loaded cavity, as an offset from `omega01`
/// (the same reference as `cav.omega_c`).
pub fn pulled_resonance<T: Real>(cav: &CavityParams<T>, xi: T) -> Result<T> {
    pulled_frequency(cav.omega_c, T::zero(), xi)
}

/// `kappa = exp(-k l K chi'')`; `chi''` must be absorption-positive.
pub fn round_trip_absorption<T: Real>(cav: &CavityParams<T>, chi_im_canonical: T) -> Result<T> {
    if chi_im_canonical < T::zero() {
        return Err(Error::ConventionViolation(chi_im_canonical.as_f64()));
    }
    Ok((-cav.medium_depth() * chi_im_canonical).exp())
}

/// `dw0 (1 - r kappa) / (sqrt(kappa) (1 - r)) / (1 + xi)`.
pub fn modified_linewidth<T: Real>(
    cav: &CavityParams<T>,
    empty_linewidth: T,
    kappa: T,
    xi: T,
) -> Result<T> {
    if !(xi > -T::one()) {
        return Err(Error::PoleAtMinusOne(xi.as_f64()));
    }
    if !(kappa > T::zero() && kappa <= T::one()) {
        return Err(Error::ZeroKappa(kappa.as_f64()));
    }
    let r = cav.reflectivity;
    let absorption = if kappa == T::one() {
        T::one()
    } else {
        (T::one() - r * kappa) / (kappa.sqrt() * (T::one() - r))
    };
    Ok(empty_linewidth * absorption / (T::one() + xi))
}

/// Linewidth ratio from the window dispersions alone: returns
/// `disp_a / disp_b`, which approximates `dw_b / dw_a` because the linewidth
/// is inversely proportional to the dispersion.
pub fn linewidth_ratio<T: Real>(disp_a: T, disp_b: T) -> Result<T> {
    if disp_b == T::zero() {
        return Err(Error::ZeroDispersion);
    }
    Ok(disp_a / disp_b)
}

/// Round-trip phase at detuning `delta` for a medium with real
/// susceptibility `chi_re`.
pub fn round_trip_phase<T: Real>(cav: &CavityParams<T>, delta: T, chi_re: T) -> T {
    // omega_p - omega_c = -delta - omega_c
    let detuning = -delta - cav.omega_c;
    T::TAU() * detuning / cav.free_spectral_range()
        + cav.medium_depth() * chi_re / T::lit(2.0)
}

/// Two-coupler ring Airy function,
/// `(1 - r)^2 kappa / [(1 - r kappa)^2 + 4 r kappa sin^2(phi / 2)]`.
pub fn airy_transmission<T: Real>(reflectivity: T, kappa: T, phase: T) -> T {
    let r = reflectivity;
    let one = T::one();
    let s = (phase / T::lit(2.0)).sin();
    let loss = one - r * kappa;
    (one - r) * (one - r) * kappa / (loss * loss + T::lit(4.0) * r * kappa * s * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionPoint<T> {
    pub delta: T,
    pub transmission: T,
}

/// Transmission of the loaded cavity over a strictly increasing grid of probe
/// detunings.
pub fn transmission_spectrum<T: Real>(
    cav: &CavityParams<T>,
    params: &QdmParams<T>,
    grid: &[T],
) -> Result<Vec<TransmissionPoint<T>>> {
    check_grid(grid)?;
    grid.iter()
        .map(|&delta| Ok(TransmissionPoint { delta, transmission: transmission_at(cav, params, delta)? }))
        .collect()
}

pub fn transmission_at<T: Real>(cav: &CavityParams<T>, params: &QdmParams<T>, delta: T) -> Result<T> {
    let (kappa, chi_re) = if cav.prefactor == T::zero() {
        (T::one(), T::zero())
    } else {
        let chi = susceptibility::chi_canonical(params, delta)?;
        (round_trip_absorption(cav, chi.chi_im)?, chi.chi_re)
    };
    Ok(airy_transmission(cav.reflectivity, kappa, round_trip_phase(cav, delta, chi_re)))
}

/// Location and height of the global maximum.
pub fn peak<T: Real>(spectrum: &[TransmissionPoint<T>]) -> Result<(usize, TransmissionPoint<T>)> {
    let (index, point) = spectrum
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.transmission
                .partial_cmp(&b.1.transmission)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or(Error::EmptyGrid)?;
    Ok((index, *point))
}

/// Full width at half maximum around the global peak, by linear
/// interpolation between the samples that straddle half height.
pub fn measure_fwhm<T: Real>(spectrum: &[TransmissionPoint<T>]) -> Result<T> {
    let (i, top) = peak(spectrum)?;
    if i == 0 || i + 1 == spectrum.len() {
        return Err(Error::PeakAtBoundary { index: i });
    }
    let half = top.transmission / T::lit(2.0);
    let crossing = |a: &TransmissionPoint<T>, b: &TransmissionPoint<T>| {
        let frac = (half - a.transmission) / (b.transmission - a.transmission);
        a.delta + frac * (b.delta - a.delta)
    };
    let left = (1..=i)
        .rev()
        .find(|&j| spectrum[j - 1].transmission < half)
        .map(|j| crossing(&spectrum[j - 1], &spectrum[j]))
        .ok_or(Error::NoHalfCrossing { side: "left" })?;
    let right = (i..spectrum.len() - 1)
        .find(|&j| spectrum[j + 1].transmission < half)
        .map(|j| crossing(&spectrum[j], &spectrum[j + 1]))
        .ok_or(Error::NoHalfCrossing { side: "right" })?;
    Ok(right - left)
}

/// Cavity quantities evaluated at the transparency window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityResponse<T> {
    /// Detuning the quantities below refer to.
    pub window_delta: T,
    pub xi: T,
    /// Pulled resonance, offset from `omega01`.
    pub omega_r: T,
    pub kappa: T,
    pub linewidth: T,
    /// On-resonance Airy maximum `(1 - r)^2 kappa / (1 - r kappa)^2`.
    pub transmission_peak: T,
}

/// Detuning at which the medium is most transparent: the window when there
/// is tunneling, the bare exciton line otherwise.
pub fn reference_detuning<T: Real>(params: &QdmParams<T>) -> Result<T> {
    if params.tunneling == T::zero() {
        return Ok(T::zero());
    }
    susceptibility::find_transparency_window(
        params,
        susceptibility::default_window_half_width(params),
    )
}

pub fn window_response<T: Real>(cav: &CavityParams<T>, params: &QdmParams<T>) -> Result<CavityResponse<T>> {
    let delta = reference_detuning(params)?;
    let chi = susceptibility::chi_canonical(params, delta)?;
    let slope = -susceptibility::dispersion_canonical(params, delta)?;
    let xi = pulling_coefficient(cav, slope);
    let kappa = round_trip_absorption(cav, chi.chi_im)?;
    let r = cav.reflectivity;
    let loss = T::one() - r * kappa;
    Ok(CavityResponse {
        window_delta: delta,
        xi,
        omega_r: pulled_resonance(cav, xi)?,
        kappa,
        linewidth: modified_linewidth(cav, cav.empty_linewidth(), kappa, xi)?,
        transmission_peak: (T::one() - r) * (T::one() - r) * kappa / (loss * loss),
    })
}

/// `n` evenly spaced points on `[center - half_width, center + half_width]`.
pub fn centered_grid<T: Real>(center: T, half_width: T, n: usize) -> Vec<T> {
    let denom = T::lit((n.max(2) - 1) as f64);
    (0..n)
        .map(|i| center - half_width + T::lit(2.0) * half_width * T::lit(i as f64) / denom)
        .collect()
}
