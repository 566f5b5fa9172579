//! Closed-form weak-probe susceptibility of the tunnel-coupled molecule.
//!
//! Two sign conventions are carried side by side. `Printed` keeps the
//! published signs, which make `chi''` non-positive. `Canonical` is `-rho10/g`
//! of the first-order steady state: absorption is positive, and the real part
//! carries `+Delta Gamma20^2` where the printed numerator has
//! `-Delta Gamma20`. All cavity physics consumes `Canonical`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QdmParams;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Printed,
    Canonical,
}

/// `chi' + i chi''` tagged with the sign convention that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexResponse<T> {
    pub chi_re: T,
    pub chi_im: T,
    pub convention: Convention,
}

impl<T: Real> ComplexResponse<T> {
    pub fn as_complex(&self) -> Complex<T> {
        Complex::new(self.chi_re, self.chi_im)
    }

    pub fn norm(&self) -> T {
        self.chi_re.hypot(self.chi_im)
    }
}

/// Slope of the printed `chi'` at one detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport<T> {
    /// `d chi' / d Delta`.
    pub exact: T,
    /// `d chi' / d omega_p = -exact`, since `Delta = omega01 - omega_p`.
    pub wrt_probe: T,
    /// Window approximation, `None` without tunneling.
    pub approx_eq4: Option<T>,
    pub valid_region: bool,
}

/// Shared pieces of the response at one detuning.
///
/// `D = P^2 + Q^2` with `P = Gamma10 Gamma20 - Delta (Delta - omega12) + Te^2`
/// and `Q = Delta Gamma20 + (Delta - omega12) Gamma10`.
#[derive(Debug, Clone, Copy)]
struct Terms<T> {
    delta: T,
    /// `Delta - omega12`
    offset: T,
    p: T,
    q: T,
    denom: T,
}

impl<T: Real> Terms<T> {
    fn new(params: &QdmParams<T>, delta: T) -> Result<Self> {
        let g10 = params.dephasing10;
        let g20 = params.dephasing20;
        let te2 = params.tunneling * params.tunneling;
        let offset = delta - params.omega12;
        let p = g10 * g20 - delta * offset + te2;
        let q = delta * g20 + offset * g10;
        let denom = p * p + q * q;
        if !(denom > T::zero() && denom.is_finite()) {
            return Err(Error::DegenerateDenominator { delta: delta.as_f64() });
        }
        Ok(Self { delta, offset, p, q, denom })
    }

    /// `-Gamma10 (Delta - omega12)^2 - Gamma20 (Gamma10 Gamma20 + Te^2)`,
    /// the printed `chi''` numerator.
    fn absorption_numerator(&self, params: &QdmParams<T>) -> T {
        let g10 = params.dephasing10;
        let g20 = params.dephasing20;
        let te2 = params.tunneling * params.tunneling;
        -g10 * self.offset * self.offset - g20 * (g10 * g20 + te2)
    }

    /// `-(Delta - omega12) [Te^2 - Delta (Delta - omega12)]`, shared by both
    /// real parts.
    fn common_real_numerator(&self, params: &QdmParams<T>) -> T {
        let te2 = params.tunneling * params.tunneling;
        -self.offset * (te2 - self.delta * self.offset)
    }

    fn denom_derivative(&self, params: &QdmParams<T>) -> T {
        let two = T::lit(2.0);
        let dp = -(self.offset + self.delta);
        let dq = params.dephasing20 + params.dephasing10;
        two * (self.p * dp + self.q * dq)
    }
}

/// Susceptibility with the published signs.
pub fn chi_printed<T: Real>(params: &QdmParams<T>, delta: T) -> Result<ComplexResponse<T>> {
    let t = Terms::new(params, delta)?;
    let re = -delta * params.dephasing20 + t.common_real_numerator(params);
    Ok(ComplexResponse {
        chi_re: re / t.denom,
        chi_im: t.absorption_numerator(params) / t.denom,
        convention: Convention::Printed,
    })
}

/// Absorption-positive susceptibility, `-rho10 / g` at first order in `g`.
pub fn chi_canonical<T: Real>(params: &QdmParams<T>, delta: T) -> Result<ComplexResponse<T>> {
    let t = Terms::new(params, delta)?;
    let g20 = params.dephasing20;
    let re = delta * g20 * g20 + t.common_real_numerator(params);
    Ok(ComplexResponse {
        chi_re: re / t.denom,
        chi_im: -t.absorption_numerator(params) / t.denom,
        convention: Convention::Canonical,
    })
}

pub fn chi<T: Real>(
    params: &QdmParams<T>,
    delta: T,
    convention: Convention,
) -> Result<ComplexResponse<T>> {
    match convention {
        Convention::Printed => chi_printed(params, delta),
        Convention::Canonical => chi_canonical(params, delta),
    }
}

/// Analytic `d chi'/d Delta` of the printed real part, with the window
/// approximation alongside.
pub fn dispersion_exact<T: Real>(params: &QdmParams<T>, delta: T) -> Result<DispersionReport<T>> {
    let t = Terms::new(params, delta)?;
    let two = T::lit(2.0);
    let te2 = params.tunneling * params.tunneling;
    let g20 = params.dephasing20;
    let num = -delta * g20 + t.common_real_numerator(params);
    let dnum = -g20 - te2 + two * delta * t.offset + t.offset * t.offset;
    let exact = (dnum * t.denom - num * t.denom_derivative(params)) / (t.denom * t.denom);
    Ok(DispersionReport {
        exact,
        wrt_probe: -exact,
        approx_eq4: dispersion_approx(params).ok(),
        valid_region: params.in_approximation_region(),
    })
}

/// Analytic `d chi'/d Delta` of the canonical real part.
pub fn dispersion_canonical<T: Real>(params: &QdmParams<T>, delta: T) -> Result<T> {
    let t = Terms::new(params, delta)?;
    let two = T::lit(2.0);
    let te2 = params.tunneling * params.tunneling;
    let g20 = params.dephasing20;
    let num = delta * g20 * g20 + t.common_real_numerator(params);
    let dnum = g20 * g20 - te2 + two * delta * t.offset + t.offset * t.offset;
    Ok((dnum * t.denom - num * t.denom_derivative(params)) / (t.denom * t.denom))
}

/// Closed-form window dispersion for `Gamma20 << Gamma10`:
///
/// `[-Te^4 + Te^2 (Gamma20 - 2 Gamma10 Gamma20 + 2 Gamma20 omega12^2)] / (Te^3 + 2 Te Gamma10 Gamma20)^2`
pub fn dispersion_approx<T: Real>(params: &QdmParams<T>) -> Result<T> {
    let te = params.tunneling;
    if te == T::zero() {
        return Err(Error::ZeroTunneling);
    }
    let two = T::lit(2.0);
    let g10 = params.dephasing10;
    let g20 = params.dephasing20;
    let w = params.omega12;
    let te2 = te * te;
    let num = -te2 * te2 + te2 * (g20 - two * g10 * g20 + two * g20 * w * w);
    let den = te2 * te + two * te * g10 * g20;
    Ok(num / (den * den))
}

/// Search half-width that comfortably contains the transparency window,
/// whose width scales as `(Te^2 + Gamma10 Gamma20) / Gamma10`.
pub fn default_window_half_width<T: Real>(params: &QdmParams<T>) -> T {
    let te2 = params.tunneling * params.tunneling;
    let width = (te2 + params.dephasing10 * params.dephasing20) / params.dephasing10;
    T::lit(4.0) * width
}

const WINDOW_SCAN_POINTS: usize = 1001;

/// Detuning of the transparency window: the local minimum of `|chi''|`
/// nearest `omega12` on `[omega12 - w, omega12 + w]`.
///
/// `chi''` never vanishes for `Gamma20 > 0`, so the window is located by a
/// coarse scan followed by golden-section refinement.
pub fn find_transparency_window<T: Real>(params: &QdmParams<T>, half_width: T) -> Result<T> {
    if params.tunneling == T::zero() {
        return Err(Error::NoTunneling);
    }
    if params.dephasing20 == T::zero() {
        return Ok(params.omega12);
    }
    if !(half_width > T::zero() && half_width.is_finite()) {
        return Err(Error::InvalidGrid("window search half-width must be > 0"));
    }

    let absorption = |d: T| -> Result<T> { Ok(chi_printed(params, d)?.chi_im.abs()) };
    let center = params.omega12;
    let n = WINDOW_SCAN_POINTS;
    let step = T::lit(2.0) * half_width / T::lit((n - 1) as f64);
    let xs: Vec<T> = (0..n)
        .map(|i| center - half_width + step * T::lit(i as f64))
        .collect();
    let fs = xs.iter().map(|&x| absorption(x)).collect::<Result<Vec<_>>>()?;

    let best = (1..n - 1)
        .filter(|&i| fs[i] <= fs[i - 1] && fs[i] <= fs[i + 1])
        .min_by(|&a, &b| {
            let da = (xs[a] - center).abs();
            let db = (xs[b] - center).abs();
            da.partial_cmp(&db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(fs[a].partial_cmp(&fs[b]).unwrap_or(std::cmp::Ordering::Equal))
        })
        .ok_or(Error::WindowNotFound { half_width: half_width.as_f64() })?;

    let tol = T::lit(1e-9) * params.dephasing10;
    golden_section_min(absorption, xs[best - 1], xs[best + 1], tol)
}

fn golden_section_min<T: Real>(
    f: impl Fn(T) -> Result<T>,
    mut a: T,
    mut b: T,
    tol: T,
) -> Result<T> {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok((a + b) / T::lit(2.0))
}

/// One row of [`sweep_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint<T> {
    pub delta: T,
    pub printed: ComplexResponse<T>,
    pub canonical: ComplexResponse<T>,
    pub dispersion: DispersionReport<T>,
}

pub(crate) fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::StrictOrderViolated { index: i + 1 });
    }
    Ok(())
}

pub fn sweep_spectrum<T: Real>(params: &QdmParams<T>, grid: &[T]) -> Result<Vec<SpectrumPoint<T>>> {
    check_grid(grid)?;
    grid.iter()
        .map(|&delta| {
            Ok(SpectrumPoint {
                delta,
                printed: chi_printed(params, delta)?,
                canonical: chi_canonical(params, delta)?,
                dispersion: dispersion_exact(params, delta)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(te: f64, omega12: f64) -> QdmParams<f64> {
        QdmParams::scaled(1e-4, te, omega12)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    // Expected values below are hand substitutions into the printed formulas.

    #[test]
    fn printed_two_level_resonance() {
        let chi = chi_printed(&params(0.0, 0.0), 0.0).unwrap();
        assert_eq!(chi.chi_re, 0.0);
        assert!(close(chi.chi_im, -1.0, 1e-14));
    }

    #[test]
    fn printed_window_at_zero_spacing() {
        let chi = chi_printed(&params(0.5, 0.0), 0.0).unwrap();
        assert_eq!(chi.chi_re, 0.0);
        // -Gamma20 / (Gamma10 Gamma20 + Te^2)
        let expected = -1e-4 / (1e-4 + 0.25);
        assert!(close(chi.chi_im, expected, 1e-13));
        assert!((chi.chi_im + 3.9984e-4).abs() < 1e-8);
    }

    #[test]
    fn printed_window_shifted() {
        let chi = chi_printed(&params(0.5, 0.2), 0.2).unwrap();
        // numerator -Delta Gamma20 = -2e-5, D = (1e-4 + 0.25)^2 + (0.2e-4)^2
        let d = 0.2501f64.powi(2) + 2e-5f64.powi(2);
        assert!(close(chi.chi_re, -2e-5 / d, 1e-13));
        assert!(close(chi.chi_im, -1e-4 * 0.2501 / d, 1e-13));
        assert!((chi.chi_re + 3.198e-4).abs() < 1e-6);
        assert!((chi.chi_im + 3.998e-4).abs() < 1e-6);
    }

    #[test]
    fn canonical_flips_absorption_sign() {
        let chi = chi_canonical(&params(0.0, 0.0), 0.0).unwrap();
        assert_eq!(chi.chi_re, 0.0);
        assert!(close(chi.chi_im, 1.0, 1e-14));
    }

    #[test]
    fn canonical_real_part_differs_by_gamma20_term() {
        let p = params(0.5, 0.0);
        let c = chi_canonical(&p, 0.1).unwrap();
        let pr = chi_printed(&p, 0.1).unwrap();
        let d = 0.2401f64.powi(2) + 0.10001f64.powi(2);
        assert!(close(c.chi_re, (-0.1 * 0.24 + 0.1 * 1e-8) / d, 1e-12));
        assert!(close(pr.chi_re, (-0.1 * 0.24 - 0.1 * 1e-4) / d, 1e-12));
        assert!((c.chi_re + 0.35477).abs() < 1e-5);
        assert!((pr.chi_re + 0.35492).abs() < 1e-5);
        assert!(c.chi_im > 0.0);
    }

    #[test]
    fn response_vanishes_far_from_resonance() {
        let p = params(0.5, 0.3);
        for d in [1e4, -1e4] {
            let c = chi_canonical(&p, d).unwrap();
            assert!(c.chi_re.abs() < 1e-3 && c.chi_im.abs() < 1e-7);
        }
    }

    #[test]
    fn degenerate_denominator() {
        let p = QdmParams::scaled(0.0, 0.0, 0.3);
        assert!(matches!(
            chi_printed(&p, 0.3),
            Err(Error::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn exact_dispersion_at_the_window() {
        // -(Gamma20 + Te^2) / (Gamma10 Gamma20 + Te^2)^2 at Delta = omega12 = 0
        for (te, expected) in [(0.01, -5000.0), (0.5, -3.9984006396961), (1.0, -0.99990001)] {
            let r = dispersion_exact(&params(te, 0.0), 0.0).unwrap();
            let identity = -(1e-4 + te * te) / (1e-4 + te * te).powi(2);
            assert!(close(r.exact, identity, 1e-12));
            assert!(close(r.exact, expected, 1e-6), "{te}: {}", r.exact);
            assert_eq!(r.wrt_probe, -r.exact);
        }
    }

    #[test]
    fn approximation_values() {
        let a = dispersion_approx(&params(0.01, 0.0)).unwrap();
        assert!(close(a, -2e-8 / 9e-12, 1e-12));
        assert!((a + 2222.2).abs() < 0.1);
        let a3 = dispersion_approx(&params(0.3, 0.0)).unwrap();
        assert!((a3 + 11.074).abs() < 1e-3);
        let e3 = dispersion_exact(&params(0.3, 0.0), 0.0).unwrap().exact;
        assert!((e3 + 11.099).abs() < 1e-3);
        assert!(((a3 - e3) / e3).abs() < 3e-3);
        let a5 = dispersion_approx(&params(0.5, 0.0)).unwrap();
        assert!((a5 + 3.9952).abs() < 1e-4);
        assert_eq!(dispersion_approx(&params(0.0, 0.0)), Err(Error::ZeroTunneling));
    }

    #[test]
    fn validity_flag() {
        assert!(!dispersion_exact(&params(0.01, 0.0), 0.0).unwrap().valid_region);
        assert!(dispersion_exact(&params(0.3, 0.0), 0.0).unwrap().valid_region);
        let broad = QdmParams::scaled(1e-2, 1.0, 0.0);
        assert!(!dispersion_exact(&broad, 0.0).unwrap().valid_region);
    }

    #[test]
    fn window_locations() {
        let p = params(0.5, 0.0);
        let w = find_transparency_window(&p, default_window_half_width(&p)).unwrap();
        assert!(w.abs() < 1e-8, "{w}");
        let p = params(0.5, 0.2);
        let w = find_transparency_window(&p, default_window_half_width(&p)).unwrap();
        assert!((w - 0.2).abs() < 1e-3);
        assert!((w - 0.2).abs() <= 10.0 * 1e-4);
        assert_eq!(
            find_transparency_window(&params(0.0, 0.0), 1.0),
            Err(Error::NoTunneling)
        );
    }

    #[test]
    fn ideal_window_is_exact() {
        let p = QdmParams::scaled(0.0, 0.4, -0.7);
        assert_eq!(find_transparency_window(&p, 1.0).unwrap(), -0.7);
        assert_eq!(chi_canonical(&p, -0.7).unwrap().chi_im, 0.0);
    }

    #[test]
    fn spectrum_grid_contract() {
        let p = params(0.5, 0.0);
        let one = sweep_spectrum(&p, &[0.0]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].printed, chi_printed(&p, 0.0).unwrap());
        assert_eq!(sweep_spectrum(&p, &[]), Err(Error::EmptyGrid));
        assert_eq!(
            sweep_spectrum(&p, &[1.0, 0.0]),
            Err(Error::StrictOrderViolated { index: 1 })
        );
    }

    #[test]
    fn spectrum_reaches_transparency() {
        let p = params(0.5, 0.0);
        let grid: Vec<f64> = (0..1001).map(|i| -5.0 + 0.01 * i as f64).collect();
        let s = sweep_spectrum(&p, &grid).unwrap();
        let max_im = s.iter().map(|x| x.printed.chi_im).fold(f64::MIN, f64::max);
        // far tails go to zero too, so only bound it from below
        assert!(max_im >= -4e-4);
        let at_center = s[500].printed.chi_im;
        assert!(at_center >= -4e-4);
    }

    #[test]
    fn f32_smoke() {
        let p = QdmParams::<f32>::scaled(1e-4, 0.5, 0.0);
        let chi = chi_canonical(&p, 0.1f32).unwrap();
        assert!((chi.chi_re + 0.35477).abs() < 1e-4);
        let w = find_transparency_window(&p, default_window_half_width(&p)).unwrap();
        assert!(w.abs() < 1e-4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_params() -> impl Strategy<Value = QdmParams<f64>> {
            (-6.0f64..-0.5, 0.0f64..2.0, -2.0f64..2.0)
                .prop_map(|(lg20, te, w)| QdmParams::scaled(10f64.powf(lg20), te, w))
        }

        proptest! {
            #[test]
            fn sign_link(p in any_params(), d in -5.0f64..5.0) {
                let pr = chi_printed(&p, d).unwrap();
                let c = chi_canonical(&p, d).unwrap();
                prop_assert!(c.chi_im >= 0.0);
                prop_assert!(pr.chi_im <= 0.0);
                prop_assert!((c.chi_im + pr.chi_im).abs() <= 1e-14 * c.chi_im.abs());
            }

            #[test]
            fn real_parts_differ_by_bounded_term(p in any_params(), d in -5.0f64..5.0) {
                let pr = chi_printed(&p, d).unwrap();
                let c = chi_canonical(&p, d).unwrap();
                let t = Terms::new(&p, d).unwrap();
                let g20 = p.dephasing20;
                let bound = g20 * (1.0 + g20) * d.abs() / t.denom;
                prop_assert!((c.chi_re - pr.chi_re).abs() <= bound * (1.0 + 1e-9) + 1e-15);
            }

            // Central finite differences are the reference here.
            #[test]
            fn derivative_matches_finite_differences(
                lg20 in -4.0f64..-1.0, te in 0.1f64..2.0, w in -1.0f64..1.0, d in -3.0f64..3.0,
            ) {
                let p = QdmParams::scaled(10f64.powf(lg20), te, w);
                let h = 1e-6;
                let fd = (chi_printed(&p, d + h).unwrap().chi_re
                    - chi_printed(&p, d - h).unwrap().chi_re) / (2.0 * h);
                let exact = dispersion_exact(&p, d).unwrap().exact;
                prop_assume!(exact.abs() > 1e-3);
                prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "fd {} exact {}", fd, exact);

                let fdc = (chi_canonical(&p, d + h).unwrap().chi_re
                    - chi_canonical(&p, d - h).unwrap().chi_re) / (2.0 * h);
                let exact_c = dispersion_canonical(&p, d).unwrap();
                prop_assert!((fdc - exact_c).abs() <= 1e-5 * exact_c.abs().max(1e-3));
            }

            #[test]
            fn two_level_limit(d in 0.0f64..5.0, lg20 in -6.0f64..-1.0) {
                let p = QdmParams::scaled(10f64.powf(lg20), 0.0, 0.0);
                prop_assume!(d > 0.0);
                let plus = chi_canonical(&p, d).unwrap();
                let minus = chi_canonical(&p, -d).unwrap();
                prop_assert!((plus.chi_re + minus.chi_re).abs() <= 1e-14 * plus.chi_re.abs());
                prop_assert!((chi_canonical(&p, 0.0).unwrap().chi_im - 1.0).abs() < 1e-14);
            }

            #[test]
            fn large_tunneling_law(te in 1.0f64..100.0, lg20 in -6.0f64..-2.0) {
                let g20 = 10f64.powf(lg20);
                let p = QdmParams::scaled(g20, te, 0.0);
                let exact = dispersion_exact(&p, 0.0).unwrap().exact;
                let law = -1.0 / (te * te);
                prop_assert!(((exact - law) / law).abs() <= g20 / (te * te) * (1.0 + 1e-9) + 1e-13);
            }

            #[test]
            fn window_sits_next_to_omega12(
                lg20 in -6.0f64..-3.0, te in 0.1f64..1.5, w in -1.0f64..1.0,
            ) {
                let g20 = 10f64.powf(lg20);
                let p = QdmParams::scaled(g20, te, w);
                let star = find_transparency_window(&p, default_window_half_width(&p)).unwrap();
                prop_assert!((star - w).abs() <= 10.0 * g20, "{} vs {}", star, w);
            }
        }
    }
}
