//! Density-matrix dynamics of the driven three-level molecule.
//!
//! This module is the brute-force reference for the closed forms in
//! [`crate::susceptibility`]: it integrates the full equations of motion and
//! solves their algebraic steady state without any weak-field expansion.
//!
//! States are `|0>` (ground), `|1>` (direct exciton), `|2>` (indirect
//! exciton). In the rotating frame the Hamiltonian is
//!
//! ```text
//! H = diag(0, Delta, Delta - omega12) + g (|0><1| + |1><0|) + Te (|1><2| + |2><1|)
//! ```
//!
//! with population decay `|1>,|2> -> |0>` at `gamma10_pop`, `gamma20_pop` and
//! coherence damping `Gamma10`, `Gamma20`, `Gamma12`.
//!
//! Only the eight independent real components are ever integrated or solved
//! for: `rho11`, `rho22` and the real and imaginary parts of `rho10`, `rho20`,
//! `rho12`. `rho00 = 1 - rho11 - rho22`, and the upper triangle is filled in
//! by conjugation, so trace and Hermiticity hold by construction.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProbeField, QdmParams};
use crate::scalar::Real;
use crate::susceptibility::{ComplexResponse, Convention};

/// Number of independent real components of a unit-trace 3x3 Hermitian matrix.
pub const COMPONENTS: usize = 8;

pub type Components<T> = [T; COMPONENTS];
pub type Matrix3<T> = [[Complex<T>; 3]; 3];

/// Which form of the `rho10` equation to integrate.
///
/// The published `rho10` line couples the optical coherence to itself through
/// the tunneling (`-i Te rho10`). `Corrected` couples it to `rho20` instead,
/// which is what the Hamiltonian above produces and what reproduces the
/// susceptibility denominator. `Printed` exists so the discrepancy can be
/// demonstrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Eq1Variant {
    #[default]
    Corrected,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<T> {
    rho: Matrix3<T>,
}

/// Time derivative of a [`DensityMatrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityRate<T> {
    pub drho: Matrix3<T>,
}

impl<T: Real> DensityRate<T> {
    pub fn trace(&self) -> Complex<T> {
        self.drho[0][0] + self.drho[1][1] + self.drho[2][2]
    }

    /// Largest modulus over all nine elements.
    pub fn max_norm(&self) -> T {
        self.drho
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(T::zero(), T::max)
    }
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Real> DensityMatrix<T> {
    pub fn ground() -> Self {
        let mut rho = [[czero(); 3]; 3];
        rho[0][0] = Complex::new(T::one(), T::zero());
        Self { rho }
    }

    /// Pure population in level `j`.
    pub fn excited(j: usize) -> Self {
        let mut rho = [[czero(); 3]; 3];
        rho[j][j] = Complex::new(T::one(), T::zero());
        Self { rho }
    }

    /// Checks Hermiticity, unit trace and population bounds to within `1e-9`
    /// and stores the matrix rebuilt from its lower triangle.
    pub fn new(rho: Matrix3<T>) -> Result<Self> {
        let tol = T::lit(1e-9);
        for (j, row) in rho.iter().enumerate() {
            for (k, z) in row.iter().enumerate() {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite("density matrix"));
                }
                if (*z - rho[k][j].conj()).norm() > tol {
                    return Err(Error::InvalidEvolution("density matrix not Hermitian"));
                }
            }
        }
        let trace = rho[0][0] + rho[1][1] + rho[2][2];
        if (trace - Complex::new(T::one(), T::zero())).norm() > tol {
            return Err(Error::InvalidEvolution("density matrix trace differs from 1"));
        }
        if (0..3).any(|j| rho[j][j].re < -tol || rho[j][j].re > T::one() + tol) {
            return Err(Error::InvalidEvolution("population outside [0, 1]"));
        }
        let candidate = Self { rho };
        Ok(Self::from_components(&candidate.components()))
    }

    pub fn from_components(x: &Components<T>) -> Self {
        let rho11 = Complex::new(x[0], T::zero());
        let rho22 = Complex::new(x[1], T::zero());
        let rho00 = Complex::new(T::one() - x[0] - x[1], T::zero());
        let rho10 = Complex::new(x[2], x[3]);
        let rho20 = Complex::new(x[4], x[5]);
        let rho12 = Complex::new(x[6], x[7]);
        Self {
            rho: [
                [rho00, rho10.conj(), rho20.conj()],
                [rho10, rho11, rho12],
                [rho20, rho12.conj(), rho22],
            ],
        }
    }

    pub fn components(&self) -> Components<T> {
        let r = &self.rho;
        [
            r[1][1].re,
            r[2][2].re,
            r[1][0].re,
            r[1][0].im,
            r[2][0].re,
            r[2][0].im,
            r[1][2].re,
            r[1][2].im,
        ]
    }

    /// Element `rho_jk = <j| rho |k>`.
    pub fn get(&self, j: usize, k: usize) -> Complex<T> {
        self.rho[j][k]
    }

    pub fn population(&self, j: usize) -> T {
        self.rho[j][j].re
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.rho
    }

    pub fn trace(&self) -> Complex<T> {
        self.rho[0][0] + self.rho[1][1] + self.rho[2][2]
    }

    /// `max |rho_kj - conj(rho_jk)|`.
    pub fn hermiticity_error(&self) -> T {
        let mut worst = T::zero();
        for j in 0..3 {
            for k in 0..3 {
                worst = worst.max((self.rho[k][j] - self.rho[j][k].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.rho
            .iter()
            .flatten()
            .zip(other.rho.iter().flatten())
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }
}

fn hamiltonian<T: Real>(params: &QdmParams<T>, probe: &ProbeField<T>) -> Matrix3<T> {
    let re = |x: T| Complex::new(x, T::zero());
    let z = czero();
    let g = re(probe.g);
    let te = re(params.tunneling);
    [
        [z, g, z],
        [g, re(probe.delta), te],
        [z, te, re(probe.delta - params.omega12)],
    ]
}

/// Right-hand side of the equations of motion.
pub fn rhs<T: Real>(
    state: &DensityMatrix<T>,
    params: &QdmParams<T>,
    probe: &ProbeField<T>,
) -> DensityRate<T> {
    rhs_with(state, params, probe, Eq1Variant::Corrected)
}

pub fn rhs_with<T: Real>(
    state: &DensityMatrix<T>,
    params: &QdmParams<T>,
    probe: &ProbeField<T>,
    variant: Eq1Variant,
) -> DensityRate<T> {
    let h = hamiltonian(params, probe);
    let rho = &state.rho;
    let minus_i = Complex::new(T::zero(), -T::one());
    let mut d = [[czero(); 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            let mut comm = czero();
            for m in 0..3 {
                comm += h[j][m] * rho[m][k] - rho[j][m] * h[m][k];
            }
            d[j][k] = minus_i * comm;
        }
    }

    let pop_in = params.decay10 * rho[1][1].re + params.decay20 * rho[2][2].re;
    d[0][0] += Complex::new(pop_in, T::zero());
    d[1][1] -= rho[1][1] * params.decay10;
    d[2][2] -= rho[2][2] * params.decay20;
    for (a, b, rate) in [
        (1, 0, params.dephasing10),
        (2, 0, params.dephasing20),
        (1, 2, params.dephasing12),
    ] {
        d[a][b] -= rho[a][b] * rate;
        d[b][a] -= rho[b][a] * rate;
    }

    if variant == Eq1Variant::Printed {
        // -i Te rho20 replaced by -i Te rho10 in the rho10 line
        let shift = minus_i * params.tunneling * (rho[1][0] - rho[2][0]);
        d[1][0] += shift;
        d[0][1] = d[1][0].conj();
    }
    DensityRate { drho: d }
}

fn rhs_components<T: Real>(
    x: &Components<T>,
    params: &QdmParams<T>,
    probe: &ProbeField<T>,
    variant: Eq1Variant,
) -> Components<T> {
    let rate = rhs_with(&DensityMatrix::from_components(x), params, probe, variant);
    let d = &rate.drho;
    [
        d[1][1].re,
        d[2][2].re,
        d[1][0].re,
        d[1][0].im,
        d[2][0].re,
        d[2][0].im,
        d[1][2].re,
        d[1][2].im,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Method {
    #[default]
    Rk4Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig<T> {
    pub dt: T,
    pub t_end: T,
    #[serde(default)]
    pub method: Method,
}

impl<T: Real> EvolutionConfig<T> {
    pub fn new(dt: T, t_end: T) -> Self {
        Self { dt, t_end, method: Method::Rk4Fixed }
    }
}

/// Largest step accepted by [`evolve`]: `0.01 / max(1, |Delta|, Te, g)`.
pub fn stability_bound<T: Real>(params: &QdmParams<T>, probe: &ProbeField<T>) -> T {
    let scale = T::one()
        .max(probe.delta.abs())
        .max(params.tunneling)
        .max(probe.g);
    T::lit(0.01) / scale
}

pub fn evolve<T: Real>(
    state0: &DensityMatrix<T>,
    params: &QdmParams<T>,
    probe: &ProbeField<T>,
    cfg: &EvolutionConfig<T>,
) -> Result<DensityMatrix<T>> {
    evolve_observed(state0, params, probe, cfg, Eq1Variant::Corrected, |_, _| {})
}

/// Fixed-step RK4 integration, calling `observe(t, state)` after every step.
pub fn evolve_observed<T: Real>(
    state0: &DensityMatrix<T>,
    params: &QdmParams<T>,
    probe: &ProbeField<T>,
    cfg: &EvolutionConfig<T>,
    variant: Eq1Variant,
    mut observe: impl FnMut(T, &DensityMatrix<T>),
) -> Result<DensityMatrix<T>> {
    if !(cfg.dt > T::zero() && cfg.dt.is_finite()) {
        return Err(Error::InvalidEvolution("dt must be > 0"));
    }
    if !(cfg.t_end >= T::zero() && cfg.t_end.is_finite()) {
        return Err(Error::InvalidEvolution("t_end must be >= 0"));
    }
    let bound = stability_bound(params, probe);
    if cfg.dt > bound {
        return Err(Error::StepTooLarge {
            dt: cfg.dt.as_f64(),
            bound: bound.as_f64(),
        });
    }
    if cfg.t_end == T::zero() {
        return Ok(*state0);
    }

    let f = |x: &Components<T>| rhs_components(x, params, probe, variant);
    let steps = (cfg.t_end / cfg.dt).ceil().to_usize().unwrap_or(usize::MAX);
    let mut x = state0.components();
    let mut t = T::zero();
    for n in 0..steps {
        let h = if n + 1 == steps { cfg.t_end - t } else { cfg.dt };
        if h <= T::zero() {
            break;
        }
        x = rk4_step(&f, &x, h);
        t = if n + 1 == steps { cfg.t_end } else { t + h };
        observe(t, &DensityMatrix::from_components(&x));
    }
    Ok(DensityMatrix::from_components(&x))
}

fn rk4_step<T: Real>(
    f: &impl Fn(&Components<T>) -> Components<T>,
    x: &Components<T>,
    h: T,
) -> Components<T> {
    let half = h / T::lit(2.0);
    let shifted = |k: &Components<T>, s: T| -> Components<T> {
        std::array::from_fn(|i| x[i] + s * k[i])
    };
    let k1 = f(x);
    let k2 = f(&shifted(&k1, half));
    let k3 = f(&shifted(&k2, half));
    let k4 = f(&shifted(&k3, h));
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    std::array::from_fn(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
}

/// Algebraic steady state of the full (all orders in `g`) equations.
pub fn steady_state<T: Real>(params: &QdmParams<T>, probe: &ProbeField<T>) -> Result<DensityMatrix<T>> {
    steady_state_with(params, probe, Eq1Variant::Corrected)
}

pub fn steady_state_with<T: Real>(
    params: &QdmParams<T>,
    probe: &ProbeField<T>,
    variant: Eq1Variant,
) -> Result<DensityMatrix<T>> {
    // the right-hand side is affine in the components: f(x) = M x + b
    let f = |x: &Components<T>| rhs_components(x, params, probe, variant);
    let b = f(&[T::zero(); COMPONENTS]);
    let mut m = [[T::zero(); COMPONENTS]; COMPONENTS];
    for j in 0..COMPONENTS {
        let mut e = [T::zero(); COMPONENTS];
        e[j] = T::one();
        let col = f(&e);
        for i in 0..COMPONENTS {
            m[i][j] = col[i] - b[i];
        }
    }
    let rhs_vec: Components<T> = std::array::from_fn(|i| -b[i]);
    let mut x = solve_dense(m, rhs_vec)?;

    // one round of iterative refinement
    let r = f(&x);
    if r.iter().any(|v| *v != T::zero()) {
        let neg_r: Components<T> = std::array::from_fn(|i| -r[i]);
        let dx = solve_dense(m, neg_r)?;
        for i in 0..COMPONENTS {
            x[i] += dx[i];
        }
    }
    Ok(DensityMatrix::from_components(&x))
}

/// Gaussian elimination with partial pivoting.
fn solve_dense<T: Real, const N: usize>(mut a: [[T; N]; N], mut b: [T; N]) -> Result<[T; N]> {
    let scale = a
        .iter()
        .flatten()
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    let threshold = T::lit(1e-12) * scale.max(T::min_positive_value());
    for col in 0..N {
        let pivot_row = (col..N)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty pivot range");
        let pivot = a[pivot_row][col];
        if !(pivot.abs() > threshold) {
            return Err(Error::SingularSystem { pivot: pivot.abs().as_f64() });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..N {
            let factor = a[row][col] / pivot;
            if factor == T::zero() {
                continue;
            }
            for k in col..N {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = [T::zero(); N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for k in row + 1..N {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

fn first_order_factors<T: Real>(params: &QdmParams<T>, delta: T) -> (Complex<T>, Complex<T>) {
    let a = Complex::new(params.dephasing10, delta);
    let b = Complex::new(params.dephasing20, delta - params.omega12);
    (a, b)
}

/// `rho10 / g` in the weak-field limit: `-i B / (A B + Te^2)` with
/// `A = i Delta + Gamma10`, `B = i (Delta - omega12) + Gamma20`.
pub fn steady_state_first_order<T: Real>(params: &QdmParams<T>, delta: T) -> Result<Complex<T>> {
    let (a, b) = first_order_factors(params, delta);
    let te2 = params.tunneling * params.tunneling;
    let m = a * b + te2;
    if m.norm_sqr() == T::zero() {
        return Err(Error::DegenerateDenominator { delta: delta.as_f64() });
    }
    Ok(Complex::new(T::zero(), -T::one()) * b / m)
}

/// `|A B + Te^2|^2`, which should equal the printed susceptibility
/// denominator.
pub fn first_order_denominator<T: Real>(params: &QdmParams<T>, delta: T) -> T {
    let (a, b) = first_order_factors(params, delta);
    (a * b + params.tunneling * params.tunneling).norm_sqr()
}

/// `rho10 / g` at first order, obtained by solving the two linearised
/// coherence equations (`rho00 = 1`, `rho21 = 0`) of the chosen variant
/// directly rather than through the closed form.
pub fn first_order_elimination<T: Real>(
    params: &QdmParams<T>,
    delta: T,
    variant: Eq1Variant,
) -> Result<Complex<T>> {
    let (a, b) = first_order_factors(params, delta);
    let i = Complex::new(T::zero(), T::one());
    let te = Complex::new(params.tunneling, T::zero());
    // rows: rho10 line, rho20 line; unknowns (rho10, rho20); g = 1
    //   0 = -A rho10 - i - i Te rho20        (corrected)
    //   0 = -A rho10 - i - i Te rho10        (printed)
    //   0 = -B rho20 - i Te rho10
    let (m00, m01) = match variant {
        Eq1Variant::Corrected => (-a, -i * te),
        Eq1Variant::Printed => (-a - i * te, czero()),
    };
    let (m10, m11) = (-i * te, -b);
    let (r0, r1) = (i, czero());
    let det = m00 * m11 - m01 * m10;
    if det.norm_sqr() == T::zero() {
        return Err(Error::DegenerateDenominator { delta: delta.as_f64() });
    }
    Ok((r0 * m11 - m01 * r1) / det)
}

/// Denominator implied by a first-order `rho10/g`: `|-i B / (rho10/g)|^2`.
/// Equals the printed denominator only for the corrected equations.
pub fn implied_denominator<T: Real>(params: &QdmParams<T>, delta: T, variant: Eq1Variant) -> Result<T> {
    let rho10 = first_order_elimination(params, delta, variant)?;
    let (_, b) = first_order_factors(params, delta);
    Ok((Complex::new(T::zero(), -T::one()) * b / rho10).norm_sqr())
}

/// `-rho10 / g` from the full steady state at finite `g`. At `g = 0` the
/// first-order closed form is returned.
pub fn susceptibility_from_oracle<T: Real>(
    params: &QdmParams<T>,
    delta: T,
    g: T,
) -> Result<ComplexResponse<T>> {
    let chi = if g == T::zero() {
        -steady_state_first_order(params, delta)?
    } else {
        let probe = ProbeField::new(g, delta)?;
        -steady_state(params, &probe)?.get(1, 0) / g
    };
    Ok(ComplexResponse {
        chi_re: chi.re,
        chi_im: chi.im,
        convention: Convention::Canonical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::susceptibility::{chi_canonical, chi_printed};

    fn params(te: f64, omega12: f64) -> QdmParams<f64> {
        QdmParams::scaled(1e-4, te, omega12)
    }

    #[test]
    fn ground_state_is_stationary_without_drive() {
        let p = params(0.5, 0.2);
        let probe = ProbeField::new(0.0, 0.3).unwrap();
        let d = rhs(&DensityMatrix::ground(), &p, &probe);
        assert_eq!(d.max_norm(), 0.0);
    }

    #[test]
    fn pure_decay_line() {
        let p = params(0.0, 0.0);
        let probe = ProbeField::new(0.0, 0.0).unwrap();
        let d = rhs(&DensityMatrix::excited(1), &p, &probe);
        assert_eq!(d.drho[0][0].re, p.decay10);
        assert_eq!(d.drho[1][1].re, -p.decay10);
    }

    #[test]
    fn rhs_matches_written_equations() {
        // arbitrary valid state; compare each line of the equations of motion
        let x = [0.2, 0.1, 0.05, -0.03, 0.02, 0.04, -0.01, 0.06];
        let s = DensityMatrix::from_components(&x);
        let p = QdmParams {
            decay10: 0.9,
            decay20: 0.3,
            dephasing10: 1.0,
            dephasing20: 0.2,
            dephasing12: 0.7,
            tunneling: 0.4,
            omega12: 0.25,
        };
        let probe = ProbeField::new(0.3, -0.6).unwrap();
        let d = rhs(&s, &p, &probe).drho;
        let i = Complex::new(0.0, 1.0);
        let r = |j: usize, k: usize| s.get(j, k);
        let (g, te, delta, w) = (probe.g, p.tunneling, probe.delta, p.omega12);
        let d00 = r(1, 1) * p.decay10 + r(2, 2) * p.decay20 + i * g * (r(0, 1) - r(1, 0));
        let d11 = -r(1, 1) * p.decay10 + i * te * (r(1, 2) - r(2, 1)) + i * g * (r(1, 0) - r(0, 1));
        let d22 = -r(2, 2) * p.decay20 + i * te * (r(2, 1) - r(1, 2));
        let d10 = -(i * delta + p.dephasing10) * r(1, 0) - i * g * (r(0, 0) - r(1, 1)) - i * te * r(2, 0);
        let d20 = -(i * (delta - w) + p.dephasing20) * r(2, 0) + i * g * r(2, 1) - i * te * r(1, 0);
        let d12 = -(i * w + p.dephasing12) * r(1, 2) - i * te * (r(2, 2) - r(1, 1)) - i * g * r(0, 2);
        for (got, want) in [
            (d[0][0], d00),
            (d[1][1], d11),
            (d[2][2], d22),
            (d[1][0], d10),
            (d[2][0], d20),
            (d[1][2], d12),
        ] {
            assert!((got - want).norm() < 1e-15, "{got} vs {want}");
        }
        assert!(rhs(&s, &p, &probe).trace().norm() < 1e-15);
    }

    #[test]
    fn printed_variant_changes_only_the_optical_coherence() {
        let x = [0.2, 0.1, 0.05, -0.03, 0.02, 0.04, -0.01, 0.06];
        let s = DensityMatrix::from_components(&x);
        let p = params(0.4, 0.1);
        let probe = ProbeField::new(0.3, 0.2).unwrap();
        let a = rhs_with(&s, &p, &probe, Eq1Variant::Corrected).drho;
        let b = rhs_with(&s, &p, &probe, Eq1Variant::Printed).drho;
        let i = Complex::new(0.0, 1.0);
        let expected = a[1][0] + i * 0.4 * s.get(2, 0) - i * 0.4 * s.get(1, 0);
        assert!((b[1][0] - expected).norm() < 1e-15);
        assert_eq!(a[2][0], b[2][0]);
        assert_eq!(a[1][1], b[1][1]);
    }

    #[test]
    fn exponential_decay() {
        let p = params(0.0, 0.0);
        let probe = ProbeField::new(0.0, 0.0).unwrap();
        let cfg = EvolutionConfig::new(1e-3, 1.0);
        let s = evolve(&DensityMatrix::excited(1), &p, &probe, &cfg).unwrap();
        assert!((s.population(1) - (-2.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_duration_is_identity() {
        let s0 = DensityMatrix::from_components(&[0.2, 0.1, 0.05, -0.03, 0.02, 0.04, -0.01, 0.06]);
        let cfg = EvolutionConfig::new(1e-3, 0.0);
        let p = params(0.5, 0.0);
        let s = evolve(&s0, &p, &ProbeField::new(0.1, 0.0).unwrap(), &cfg).unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn step_bound_enforced() {
        let p = params(0.5, 0.0);
        let probe = ProbeField::new(1e-3, 5.0).unwrap();
        let cfg = EvolutionConfig::new(0.01, 1.0);
        assert!(matches!(
            evolve(&DensityMatrix::ground(), &p, &probe, &cfg),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn long_evolution_reaches_steady_state() {
        // Gamma20 = 0.1 keeps the slowest relaxation time ~ 1/(2 Gamma20) short
        let p = QdmParams::scaled(0.1, 0.5, 0.2);
        let probe = ProbeField::new(1e-3, 0.3).unwrap();
        let cfg = EvolutionConfig::new(0.01, 50.0 / p.dephasing20 * 4.0);
        let s = evolve(&DensityMatrix::ground(), &p, &probe, &cfg).unwrap();
        let ss = steady_state(&p, &probe).unwrap();
        assert!(s.max_abs_diff(&ss) < 1e-8, "{}", s.max_abs_diff(&ss));
    }

    #[test]
    fn steady_state_without_drive_is_ground() {
        let s = steady_state(&params(0.5, 0.0), &ProbeField::new(0.0, 0.4).unwrap()).unwrap();
        assert!(s.max_abs_diff(&DensityMatrix::ground()) < 1e-15);
    }

    #[test]
    fn two_level_weak_field() {
        let g = 1e-3;
        let s = steady_state(&params(0.0, 0.0), &ProbeField::new(g, 0.0).unwrap()).unwrap();
        let rho10 = s.get(1, 0);
        // -i g / Gamma10, saturation correction 4 g^2 / (gamma10 Gamma10)
        assert!((rho10 - Complex::new(0.0, -g)).norm() < 5e-6 * g);
        let exact = Complex::new(0.0, -g / (1.0 + 2.0 * g * g));
        assert!((rho10 - exact).norm() < 1e-15);
    }

    #[test]
    fn singular_without_relaxation() {
        let p = QdmParams {
            decay10: 0.0,
            decay20: 0.0,
            dephasing10: 0.0,
            dephasing20: 0.0,
            dephasing12: 0.0,
            tunneling: 0.5,
            omega12: 0.1,
        };
        let r = steady_state(&p, &ProbeField::new(0.1, 0.2).unwrap());
        assert!(matches!(r, Err(Error::SingularSystem { .. })), "{r:?}");
    }

    #[test]
    fn first_order_closed_forms() {
        let z = steady_state_first_order(&params(0.0, 0.0), 0.0).unwrap();
        assert!((z - Complex::new(0.0, -1.0)).norm() < 1e-15);
        let far = steady_state_first_order(&params(1e6, 0.3), 0.3).unwrap();
        assert!(far.norm() < 1e-15);
        for d in [-2.0, -0.3, 0.0, 0.7] {
            let p = params(0.6, 0.2);
            let closed = steady_state_first_order(&p, d).unwrap();
            let solved = first_order_elimination(&p, d, Eq1Variant::Corrected).unwrap();
            assert!((closed - solved).norm() <= 1e-14 * closed.norm());
        }
    }

    #[test]
    fn printed_rho10_line_breaks_the_denominator() {
        let p = params(0.5, 0.2);
        let d = 0.1;
        let printed_d = {
            let chi = chi_printed(&p, d).unwrap();
            // chi'' numerator / chi'' gives D back
            let num = -(d - 0.2f64).powi(2) - 1e-4 * (1e-4 + 0.25);
            num / chi.chi_im
        };
        let ok = implied_denominator(&p, d, Eq1Variant::Corrected).unwrap();
        let bad = implied_denominator(&p, d, Eq1Variant::Printed).unwrap();
        assert!((ok - printed_d).abs() <= 1e-12 * printed_d);
        assert!((bad - printed_d).abs() > 1e-2 * printed_d);
    }

    #[test]
    fn oracle_matches_closed_form_in_weak_field() {
        let p = params(0.5, 0.0);
        for i in 0..=100 {
            let d = -5.0 + 0.1 * i as f64;
            let c = chi_canonical(&p, d).unwrap();
            let o = susceptibility_from_oracle(&p, d, 1e-5).unwrap();
            assert!((o.as_complex() - c.as_complex()).norm() <= 1e-6 * c.norm(), "{d}");
        }
    }

    #[test]
    fn oracle_at_zero_field_uses_closed_form() {
        let p = params(0.5, 0.1);
        let o = susceptibility_from_oracle(&p, 0.05, 0.0).unwrap();
        let c = chi_canonical(&p, 0.05).unwrap();
        assert!((o.as_complex() - c.as_complex()).norm() <= 1e-14 * c.norm());
    }

    #[test]
    fn strong_field_saturates() {
        let p = params(0.5, 0.0);
        let worst = (0..=100)
            .map(|i| {
                let d = -5.0 + 0.1 * i as f64;
                let c = chi_canonical(&p, d).unwrap();
                let o = susceptibility_from_oracle(&p, d, 0.5).unwrap();
                (o.as_complex() - c.as_complex()).norm() / c.norm()
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-3);
    }

    #[test]
    fn weak_field_convergence_is_second_order() {
        let p = QdmParams::scaled(1e-2, 0.5, 0.1);
        let d = 0.4;
        let exact = steady_state_first_order(&p, d).unwrap();
        let err = |g: f64| {
            let s = steady_state(&p, &ProbeField::new(g, d).unwrap()).unwrap();
            (s.get(1, 0) / g - exact).norm()
        };
        let (e1, e2, e3) = (err(1e-2), err(1e-3), err(1e-4));
        let order_a = (e1 / e2).log10();
        let order_b = (e2 / e3).log10();
        assert!(order_a >= 1.9 && order_b >= 1.9, "{order_a} {order_b}");
    }

    #[test]
    fn new_rejects_non_hermitian() {
        let mut m = *DensityMatrix::<f64>::ground().matrix();
        m[1][0] = Complex::new(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        m[0][1] = Complex::new(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_params() -> impl Strategy<Value = QdmParams<f64>> {
            (-4.0f64..-0.5, 0.0f64..1.5, -1.0f64..1.0)
                .prop_map(|(lg20, te, w)| QdmParams::scaled(10f64.powf(lg20), te, w))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn denominator_identity(p in any_params(), d in -5.0f64..5.0) {
                let t_d = first_order_denominator(&p, d);
                // D from the printed closed form
                let g10 = p.dephasing10; let g20 = p.dephasing20; let te2 = p.tunneling.powi(2);
                let w = p.omega12;
                let printed = (g10 * g20 - d * d + d * w + te2).powi(2) + (d * g20 + (d - w) * g10).powi(2);
                prop_assert!((t_d - printed).abs() <= 1e-12 * printed);
            }

            #[test]
            fn steady_state_is_stationary(p in any_params(), d in -5.0f64..5.0, lg in -4.0f64..-0.5) {
                let probe = ProbeField::new(10f64.powf(lg), d).unwrap();
                let s = steady_state(&p, &probe).unwrap();
                prop_assert!(rhs(&s, &p, &probe).max_norm() <= 1e-10);
            }

            #[test]
            fn evolution_conserves_structure(
                p in any_params(), d in -3.0f64..3.0, g in 0.0f64..1.0,
            ) {
                let probe = ProbeField::new(g, d).unwrap();
                let cfg = EvolutionConfig::new(1e-3, 0.2);
                let mut worst_trace = 0.0f64;
                let mut worst_pop = 0.0f64;
                evolve_observed(&DensityMatrix::ground(), &p, &probe, &cfg, Eq1Variant::Corrected, |_, s| {
                    worst_trace = worst_trace.max((s.trace() - Complex::new(1.0, 0.0)).norm());
                    for j in 0..3 {
                        let pj = s.population(j);
                        worst_pop = worst_pop.max((-pj).max(pj - 1.0));
                    }
                    assert!(s.hermiticity_error() <= 1e-12);
                }).unwrap();
                prop_assert!(worst_trace <= 1e-9);
                prop_assert!(worst_pop <= 1e-9);
            }
        }
    }
}
