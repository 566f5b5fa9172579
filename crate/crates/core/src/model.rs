//! Domain types of the three-level quantum-dot-molecule model and the
//! conversion between physical units and the scaled units used internally.
//!
//! Every rate, detuning and frequency inside the crate is expressed in units
//! of the direct-exciton dephasing linewidth `Gamma10`. Physical quantities
//! (μeV, metres, cm⁻²) only appear at the boundary, through [`UnitContext`]
//! and [`PhysicalPreset`].

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// CODATA 2018 constants (SI).
pub mod constants {
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;
    pub const ANGSTROM: f64 = 1e-10;
    pub const MICRO_EV: f64 = 1e-6 * ELEMENTARY_CHARGE;
}

/// Name of the built-in parameter set for the (In,Ga)As/GaAs molecule.
pub const PAPER_PRESET: &str = "paper2010-qdm";

/// Rates and couplings of the QDM, all in units of `Gamma10`.
///
/// `decay*` are population (lifetime) decay rates, `dephasing*` are the
/// coherence linewidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QdmParams<T> {
    #[serde(rename = "gamma10_pop")]
    pub decay10: T,
    #[serde(rename = "gamma20_pop")]
    pub decay20: T,
    #[serde(rename = "Gamma10")]
    pub dephasing10: T,
    #[serde(rename = "Gamma20")]
    pub dephasing20: T,
    #[serde(rename = "Gamma12")]
    pub dephasing12: T,
    #[serde(rename = "Te")]
    pub tunneling: T,
    pub omega12: T,
}

impl<T: Real> QdmParams<T> {
    /// Builds a parameter set from the linewidth `gamma10` and the ratio
    /// `Gamma20 / Gamma10`.
    ///
    /// Decay is purely radiative: `gamma_pop = 2 Gamma` for both excited
    /// states and `Gamma12 = (gamma10_pop + gamma20_pop) / 2 = Gamma10 +
    /// Gamma20`. Any other pure-dephasing pattern must keep the generator
    /// completely positive, otherwise populations can leave `[0, 1]`.
    pub fn with_linewidth(gamma10: T, dephasing_ratio: T, tunneling: T, omega12: T) -> Self {
        let two = T::lit(2.0);
        let dephasing20 = dephasing_ratio * gamma10;
        let decay10 = two * gamma10;
        let decay20 = two * dephasing20;
        Self {
            decay10,
            decay20,
            dephasing10: gamma10,
            dephasing20,
            dephasing12: (decay10 + decay20) / two,
            tunneling,
            omega12,
        }
    }

    /// Scaled parameter set (`Gamma10 = 1`).
    pub fn scaled(dephasing20: T, tunneling: T, omega12: T) -> Self {
        Self::with_linewidth(T::one(), dephasing20, tunneling, omega12)
    }

    /// Scaled molecule of the built-in preset: `Gamma20 = 1e-4`, `Te = 0.01`,
    /// `omega12 = 0`.
    pub fn paper() -> Self {
        Self::scaled(T::lit(1e-4), T::lit(0.01), T::zero())
    }

    pub fn with_tunneling(mut self, tunneling: T) -> Self {
        self.tunneling = tunneling;
        self
    }

    pub fn with_omega12(mut self, omega12: T) -> Self {
        self.omega12 = omega12;
        self
    }

    /// `T_e^2 >= 100 Gamma10 Gamma20` and `Gamma20 <= 1e-3 Gamma10`: the
    /// region where the closed-form window dispersion approximation holds.
    pub fn in_approximation_region(&self) -> bool {
        let te2 = self.tunneling * self.tunneling;
        te2 >= T::lit(100.0) * self.dephasing10 * self.dephasing20
            && self.dephasing20 <= T::lit(1e-3) * self.dephasing10
    }

    pub fn cast<U: Real>(&self) -> QdmParams<U> {
        let c = |x: T| U::lit(x.as_f64());
        QdmParams {
            decay10: c(self.decay10),
            decay20: c(self.decay20),
            dephasing10: c(self.dephasing10),
            dephasing20: c(self.dephasing20),
            dephasing12: c(self.dephasing12),
            tunneling: c(self.tunneling),
            omega12: c(self.omega12),
        }
    }
}

impl QdmParams<f64> {
    pub fn from_json_str(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Parameters that passed [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams<T>(QdmParams<T>);

impl<T> ValidatedParams<T> {
    pub fn into_inner(self) -> QdmParams<T> {
        self.0
    }
}

impl<T> Deref for ValidatedParams<T> {
    type Target = QdmParams<T>;

    fn deref(&self) -> &QdmParams<T> {
        &self.0
    }
}

pub fn validate<T: Real>(params: &QdmParams<T>) -> Result<ValidatedParams<T>> {
    let fields = [
        ("gamma10_pop", params.decay10),
        ("gamma20_pop", params.decay20),
        ("Gamma10", params.dephasing10),
        ("Gamma20", params.dephasing20),
        ("Gamma12", params.dephasing12),
        ("Te", params.tunneling),
        ("omega12", params.omega12),
    ];
    for (name, value) in fields {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    if params.dephasing10 <= T::zero() {
        return Err(Error::ZeroScaleUnit(params.dephasing10.as_f64()));
    }
    // omega12 is a signed level spacing; everything else is a rate
    for (name, value) in &fields[..6] {
        if *value < T::zero() {
            return Err(Error::NegativeRate {
                field: name,
                value: value.as_f64(),
            });
        }
    }
    Ok(ValidatedParams(*params))
}

/// Weak probe driving the `|0> <-> |1>` transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeField<T> {
    /// Rabi frequency `g = -mu10 E_p / 2 hbar`.
    pub g: T,
    /// Detuning `Delta = omega01 - omega_p`.
    #[serde(rename = "Delta")]
    pub delta: T,
}

impl<T: Real> ProbeField<T> {
    pub fn new(g: T, delta: T) -> Result<Self> {
        if !(g.is_finite() && delta.is_finite()) {
            return Err(Error::NonFinite("probe"));
        }
        if g < T::zero() {
            return Err(Error::NegativeRabi(g.as_f64()));
        }
        Ok(Self { g, delta })
    }
}

/// Physical scale of the scaled unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitContext<T> {
    /// `hbar * Gamma10` in μeV.
    #[serde(rename = "hbar_Gamma10_ueV")]
    pub hbar_gamma10_uev: T,
    pub probe_wavelength_m: T,
}

impl<T: Real> UnitContext<T> {
    /// 6.6 μeV linewidth, 1.36 μm probe.
    pub fn paper() -> Self {
        Self {
            hbar_gamma10_uev: T::lit(6.6),
            probe_wavelength_m: T::lit(1.36e-6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar_gamma10_uev.is_finite() && self.hbar_gamma10_uev > T::zero()) {
            return Err(Error::InvalidUnits("hbar_Gamma10_ueV must be > 0"));
        }
        if !(self.probe_wavelength_m.is_finite() && self.probe_wavelength_m > T::zero()) {
            return Err(Error::InvalidUnits("probe_wavelength_m must be > 0"));
        }
        Ok(())
    }

    /// Energy in μeV to units of `Gamma10`.
    pub fn to_scaled(&self, energy_uev: T) -> T {
        energy_uev / self.hbar_gamma10_uev
    }

    pub fn from_scaled(&self, scaled: T) -> T {
        scaled * self.hbar_gamma10_uev
    }

    /// `Gamma10` as an angular frequency (rad/s).
    pub fn gamma10_rad_per_s(&self) -> T {
        self.hbar_gamma10_uev * T::lit(constants::MICRO_EV / constants::HBAR)
    }

    /// Probe wavevector `2 pi / lambda` (1/m).
    pub fn wavevector(&self) -> T {
        T::TAU() / self.probe_wavelength_m
    }

    /// Optical transition frequency `omega01 = 2 pi c / lambda` in units of
    /// `Gamma10`.
    pub fn omega01_scaled(&self) -> T {
        self.wavevector() * T::lit(constants::SPEED_OF_LIGHT) / self.gamma10_rad_per_s()
    }

    pub fn cast<U: Real>(&self) -> UnitContext<U> {
        UnitContext {
            hbar_gamma10_uev: U::lit(self.hbar_gamma10_uev.as_f64()),
            probe_wavelength_m: U::lit(self.probe_wavelength_m.as_f64()),
        }
    }
}

/// Material data needed to turn the scaled susceptibility into a physical one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalPreset<T> {
    pub surface_density_per_cm2: T,
    /// Converts the sheet density into a volume density. Defaults to 10 nm.
    pub layer_thickness_m: T,
    pub confinement_factor: T,
    /// `|mu10| / e` in Å.
    pub dipole_length_angstrom: T,
}

impl<T: Real> PhysicalPreset<T> {
    pub fn paper() -> Self {
        Self {
            surface_density_per_cm2: T::lit(4e10),
            layer_thickness_m: T::lit(10e-9),
            confinement_factor: T::lit(6e-3),
            dipole_length_angstrom: T::lit(21.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            (self.surface_density_per_cm2, "surface_density_per_cm2 must be > 0"),
            (self.layer_thickness_m, "layer_thickness_m must be > 0"),
            (self.confinement_factor, "confinement_factor must be > 0"),
            (self.dipole_length_angstrom, "dipole_length_angstrom must be > 0"),
        ];
        for (value, msg) in fields {
            if !(value.is_finite() && value > T::zero()) {
                return Err(Error::InvalidPreset(msg));
            }
        }
        Ok(())
    }
}

/// Dimensionless prefactor `K` of the scaled susceptibility:
/// `K = confinement * N_vol * |mu10|^2 / (eps0 * hbar * Gamma10)` with
/// `N_vol = surface density / layer thickness`.
pub fn susceptibility_prefactor<T: Real>(preset: &PhysicalPreset<T>, ctx: &UnitContext<T>) -> T {
    use constants::*;
    // cm^-2 -> m^-2
    let sheet = preset.surface_density_per_cm2 * T::lit(1e4);
    let n_vol = sheet / preset.layer_thickness_m;
    let dipole = preset.dipole_length_angstrom * T::lit(ELEMENTARY_CHARGE * ANGSTROM);
    let energy = ctx.hbar_gamma10_uev * T::lit(MICRO_EV);
    preset.confinement_factor * n_vol * dipole * dipole / (T::lit(VACUUM_PERMITTIVITY) * energy)
}

/// Everything a named preset pins down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPreset<T> {
    pub qdm: QdmParams<T>,
    pub units: UnitContext<T>,
    pub physical: PhysicalPreset<T>,
}

pub fn preset(name: &str) -> Result<ModelPreset<f64>> {
    match name {
        PAPER_PRESET => Ok(ModelPreset {
            qdm: QdmParams::paper(),
            units: UnitContext::paper(),
            physical: PhysicalPreset::paper(),
        }),
        other => Err(Error::UnknownPreset(other.to_owned())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> QdmParams<f64> {
        QdmParams {
            decay10: 0.0,
            decay20: 0.0,
            dephasing10: 1.0,
            dephasing20: 1e-4,
            dephasing12: 0.0,
            tunneling: 0.5,
            omega12: 0.0,
        }
    }

    #[test]
    fn validate_accepts_window_parameters() {
        let v = validate(&base()).unwrap();
        assert_eq!(*v, base());
        // idempotent
        assert_eq!(validate(&v).unwrap(), v);
    }

    #[test]
    fn validate_rejects_zero_scale() {
        let p = QdmParams { dephasing10: 0.0, ..base() };
        assert_eq!(validate(&p), Err(Error::ZeroScaleUnit(0.0)));
    }

    #[test]
    fn validate_rejects_negative_tunneling() {
        let p = QdmParams { tunneling: -0.1, ..base() };
        assert!(matches!(
            validate(&p),
            Err(Error::NegativeRate { field: "Te", .. })
        ));
    }

    #[test]
    fn negative_omega12_is_allowed() {
        let p = QdmParams { omega12: -3.0, ..base() };
        assert!(validate(&p).is_ok());
    }

    #[test]
    fn scaling_of_energies() {
        let ctx = UnitContext::<f64>::paper();
        assert_eq!(ctx.to_scaled(6.6), 1.0);
        assert_eq!(ctx.to_scaled(0.0), 0.0);
        assert_eq!(ctx.to_scaled(3.3), 0.5);
    }

    #[test]
    fn scaled_optical_frequency() {
        // omega01 = 2 pi c / 1.36 um = 1.3851e15 rad/s, Gamma10 = 6.6 ueV / hbar = 1.0027e10 1/s
        let w = UnitContext::<f64>::paper().omega01_scaled();
        let expected = (std::f64::consts::TAU * 299_792_458.0 / 1.36e-6)
            / (6.6e-6 * 1.602_176_634e-19 / 1.054_571_817e-34);
        assert!((w - expected).abs() / expected < 1e-14);
        assert!((w - 1.3813e5).abs() < 5.0);
    }

    #[test]
    fn prefactor_of_the_paper_preset() {
        // K recomputed by hand: 6e-3 * 4e22 m^-3 * (21 A * e)^2 / (eps0 * 6.6 ueV)
        let e: f64 = 1.602_176_634e-19;
        let mu = 21e-10 * e;
        let k_hand = 6e-3 * 4e22 * mu * mu / (8.854_187_8128e-12 * 6.6e-6 * e);
        let k: f64 = susceptibility_prefactor(&PhysicalPreset::paper(), &UnitContext::paper());
        assert!((k - k_hand).abs() / k_hand < 1e-12);
        assert!((k - 2.9).abs() < 0.05, "K = {k}");
    }

    #[test]
    fn prefactor_limits() {
        let ctx = UnitContext::<f64>::paper();
        let zero = PhysicalPreset { confinement_factor: 0.0, ..PhysicalPreset::paper() };
        assert_eq!(susceptibility_prefactor(&zero, &ctx), 0.0);
        let dense = PhysicalPreset {
            surface_density_per_cm2: 8e10,
            ..PhysicalPreset::paper()
        };
        let k1 = susceptibility_prefactor(&PhysicalPreset::paper(), &ctx);
        let k2 = susceptibility_prefactor(&dense, &ctx);
        assert!((k2 / k1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let ok = r#"{"gamma10_pop":1,"gamma20_pop":0.0002,"Gamma10":1,"Gamma20":0.0001,
                     "Gamma12":0.5001,"Te":0.5,"omega12":0}"#;
        let p = QdmParams::from_json_str(ok).unwrap();
        assert_eq!(p.tunneling, 0.5);
        let bad = r#"{"gamma10_pop":1,"gamma20_pop":0.0002,"Gamma10":1,"Gamma20":0.0001,
                      "Gamma12":0.5001,"Te":0.5,"omega12":0,"bias":3}"#;
        assert!(QdmParams::from_json_str(bad).is_err());
    }

    #[test]
    fn unknown_preset_name() {
        assert!(preset(PAPER_PRESET).is_ok());
        assert_eq!(
            preset("nope").unwrap_err(),
            Error::UnknownPreset("nope".into())
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scaling_round_trips(x in -1e6f64..1e6, scale in 1e-3f64..1e3) {
                let ctx = UnitContext { hbar_gamma10_uev: scale, probe_wavelength_m: 1e-6 };
                let back = ctx.to_scaled(ctx.from_scaled(x));
                prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1e-300));
            }

            #[test]
            fn prefactor_scales_with_density_and_thickness(
                f in 0.1f64..10.0,
            ) {
                let ctx = UnitContext::<f64>::paper();
                let p = PhysicalPreset::paper();
                let k = susceptibility_prefactor(&p, &ctx);
                let denser = PhysicalPreset { surface_density_per_cm2: p.surface_density_per_cm2 * f, ..p };
                let thicker = PhysicalPreset { layer_thickness_m: p.layer_thickness_m * f, ..p };
                let confined = PhysicalPreset { confinement_factor: p.confinement_factor * f, ..p };
                prop_assert!((susceptibility_prefactor(&denser, &ctx) / k - f).abs() < 1e-12 * f);
                prop_assert!((susceptibility_prefactor(&confined, &ctx) / k - f).abs() < 1e-12 * f);
                prop_assert!((susceptibility_prefactor(&thicker, &ctx) * f / k - 1.0).abs() < 1e-12);
            }
        }
    }
}
