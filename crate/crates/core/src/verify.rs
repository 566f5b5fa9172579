//! End-to-end self checks with a machine-readable report.
//!
//! Every check compares a measured error against a fixed tolerance. Random
//! parameter sets come from a seeded ChaCha stream, so a report is a pure
//! function of its [`VerifySettings`].

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cavity::{self, CavityParams};
use crate::dynamics::{self, DensityMatrix, Eq1Variant, EvolutionConfig};
use crate::model::{ProbeField, QdmParams, UnitContext};
use crate::susceptibility::{self, Convention};

pub const ORACLE_TOL: f64 = 1e-6;
pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const POPULATION_TOL: f64 = 1e-9;
pub const STATIONARY_TOL: f64 = 1e-10;
pub const DERIVATIVE_TOL: f64 = 1e-6;
pub const WINDOW_TOL: f64 = 1e-2;
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub seed: u64,
    /// Probe Rabi frequency of the oracle comparison.
    pub oracle_g: f64,
    pub oracle_sets: usize,
    pub grid_points: usize,
    pub grid_half_width: f64,
    pub derivative_sets: usize,
    pub region_sets: usize,
    pub identity_draws: usize,
    pub conservation_sets: usize,
    pub steps: usize,
    pub dt: f64,
    pub eq1_variant: Eq1Variant,
    /// Convention of the `chi''` handed to the round-trip absorption.
    pub kappa_convention: Convention,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            seed: 0x5eed_0001,
            oracle_g: 1e-5,
            oracle_sets: 20,
            grid_points: 201,
            grid_half_width: 5.0,
            derivative_sets: 20,
            region_sets: 100,
            identity_draws: 100,
            conservation_sets: 4,
            steps: 1000,
            dt: 1e-3,
            eq1_variant: Eq1Variant::Corrected,
            kappa_convention: Convention::Canonical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    /// Passes when `measured <= tolerance` (NaN fails).
    pub fn at_most(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail,
        }
    }

    fn failed(name: &str, tolerance: f64, detail: String) -> Self {
        Self { name: name.to_string(), measured: f64::NAN, tolerance, passed: false, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

/// Scaled molecule with `Gamma20` log-uniform in `[1e-4, 1]`, `Te` in
/// `[0, 2]`, `omega12` in `[-1, 1]`.
pub fn random_params(rng: &mut ChaCha8Rng) -> QdmParams<f64> {
    let g20 = log_uniform(rng, 1e-4, 1.0);
    let te = rng.gen_range(0.0..2.0);
    let w = rng.gen_range(-1.0..1.0);
    QdmParams::scaled(g20, te, w)
}

/// Molecule inside the window-approximation region with `omega12 = 0`:
/// `Gamma20` log-uniform in `[1e-6, 1e-3]`, `Te` uniform in
/// `[10 sqrt(Gamma20), 2]`.
pub fn random_region_params(rng: &mut ChaCha8Rng) -> QdmParams<f64> {
    let g20 = log_uniform(rng, 1e-6, 1e-3);
    let te = rng.gen_range(10.0 * g20.sqrt()..2.0);
    QdmParams::scaled(g20, te, 0.0)
}

pub fn symmetric_grid(half_width: f64, n: usize) -> Vec<f64> {
    cavity::centered_grid(0.0, half_width, n)
}

/// `max |chi_oracle - chi_canonical| / |chi_canonical|` over the sets and
/// grid, with the oracle driven at Rabi frequency `g`.
pub fn oracle_error(sets: &[QdmParams<f64>], grid: &[f64], g: f64) -> crate::Result<(f64, String)> {
    let mut worst = (0.0, String::new());
    for p in sets {
        for &d in grid {
            let exact = susceptibility::chi_canonical(p, d)?.as_complex();
            let oracle = dynamics::susceptibility_from_oracle(p, d, g)?.as_complex();
            let err = (oracle - exact).norm() / exact.norm();
            if !(err <= worst.0) {
                worst = (err, format!("Gamma20={:e} Te={} omega12={} Delta={}", p.dephasing20, p.tunneling, p.omega12, d));
            }
        }
    }
    Ok(worst)
}

pub fn check_oracle(sets: &[QdmParams<f64>], grid: &[f64], g: f64, tol: f64) -> CheckResult {
    const NAME: &str = "oracle_equivalence";
    match oracle_error(sets, grid, g) {
        Ok((err, at)) => CheckResult::at_most(
            NAME,
            err,
            tol,
            format!("{} sets x {} points, g={g:e}; worst at {at}", sets.len(), grid.len()),
        ),
        Err(e) => CheckResult::failed(NAME, tol, e.to_string()),
    }
}

/// Worst deviations seen over a fixed-step evolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationStats {
    pub trace: f64,
    pub hermiticity: f64,
    /// Largest excursion of any population outside `[0, 1]`.
    pub population: f64,
}

impl ConservationStats {
    fn merge(&mut self, o: Self) {
        self.trace = self.trace.max(o.trace);
        self.hermiticity = self.hermiticity.max(o.hermiticity);
        self.population = self.population.max(o.population);
    }
}

pub fn conservation_stats(
    state0: &DensityMatrix<f64>,
    params: &QdmParams<f64>,
    probe: &ProbeField<f64>,
    dt: f64,
    steps: usize,
) -> crate::Result<ConservationStats> {
    let mut s = ConservationStats::default();
    let cfg = EvolutionConfig::new(dt, dt * steps as f64);
    dynamics::evolve_observed(state0, params, probe, &cfg, Eq1Variant::Corrected, |_, rho| {
        let pops = (0..3).map(|j| rho.population(j));
        s.merge(ConservationStats {
            trace: (rho.trace() - Complex::new(1.0, 0.0)).norm(),
            hermiticity: rho.hermiticity_error(),
            population: pops.map(|p| (-p).max(p - 1.0).max(0.0)).fold(0.0, f64::max),
        });
    })?;
    Ok(s)
}

/// Equal superposition `(|0> + |1> + i|2>) / sqrt 3` as a pure state.
pub fn superposition_state() -> DensityMatrix<f64> {
    let c = 1.0 / 3f64.sqrt();
    let v = [Complex::new(c, 0.0), Complex::new(c, 0.0), Complex::new(0.0, c)];
    let mut m = [[Complex::new(0.0, 0.0); 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            m[j][k] = v[j] * v[k].conj();
        }
    }
    DensityMatrix::new(m).expect("pure state is valid")
}

fn conservation_cases(base: &QdmParams<f64>, rng: &mut ChaCha8Rng, n: usize) -> Vec<(QdmParams<f64>, ProbeField<f64>)> {
    let mut cases = vec![(*base, ProbeField { g: 0.1, delta: 0.0 })];
    for _ in 0..n {
        let p = random_params(rng);
        let probe = ProbeField { g: rng.gen_range(0.01..1.0), delta: rng.gen_range(-5.0..5.0) };
        cases.push((p, probe));
    }
    cases
}

pub fn check_conservation(
    base: &QdmParams<f64>,
    rng: &mut ChaCha8Rng,
    n: usize,
    dt: f64,
    steps: usize,
) -> Vec<CheckResult> {
    let cases = conservation_cases(base, rng, n);
    let starts = [
        DensityMatrix::ground(),
        DensityMatrix::excited(1),
        DensityMatrix::excited(2),
        superposition_state(),
    ];
    let mut stats = ConservationStats::default();
    let mut stationary = 0.0f64;
    let mut failure = None;
    for (p, probe) in &cases {
        for s0 in &starts {
            match conservation_stats(s0, p, probe, dt, steps) {
                Ok(s) => stats.merge(s),
                Err(e) => failure = Some(e.to_string()),
            }
        }
        match dynamics::steady_state(p, probe) {
            Ok(ss) => stationary = stationary.max(dynamics::rhs(&ss, p, probe).max_norm()),
            Err(e) => failure = Some(e.to_string()),
        }
    }
    let detail = format!("{} cases x {} initial states, {steps} RK4 steps at dt={dt:e}", cases.len(), starts.len());
    if let Some(e) = failure {
        return vec![CheckResult::failed("conservation", TRACE_TOL, e)];
    }
    vec![
        CheckResult::at_most("trace_preservation", stats.trace, TRACE_TOL, detail.clone()),
        CheckResult::at_most("hermiticity", stats.hermiticity, HERMITIAN_TOL, detail.clone()),
        CheckResult::at_most("population_bounds", stats.population, POPULATION_TOL, detail),
        CheckResult::at_most(
            "steady_state_stationarity",
            stationary,
            STATIONARY_TOL,
            format!("max-norm of the rate at the algebraic steady state, {} cases", cases.len()),
        ),
    ]
}

/// Richardson-extrapolated central difference of the printed `chi'` against
/// the analytic slope, relative to the local slope scale `|chi| / w` with
/// `w = min(1, Gamma20 + Te^2)`.
pub fn derivative_error(sets: &[QdmParams<f64>], grid: &[f64]) -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for p in sets {
        let w = (p.dephasing20 + p.tunneling * p.tunneling).min(1.0);
        let h = 1e-3 * w;
        let re = |d: f64| susceptibility::chi_printed(p, d).map(|c| c.chi_re);
        for &d in grid {
            let c1 = (re(d + h)? - re(d - h)?) / (2.0 * h);
            let c2 = (re(d + h / 2.0)? - re(d - h / 2.0)?) / h;
            let fd = (4.0 * c2 - c1) / 3.0;
            let exact = susceptibility::dispersion_exact(p, d)?.exact;
            let scale = exact.abs() + susceptibility::chi_printed(p, d)?.norm() / w;
            worst = worst.max((fd - exact).abs() / scale);
        }
    }
    Ok(worst)
}

/// Relative gap between the window approximation and the exact slope at the
/// located window. Returns `(error, in_region)`.
pub fn window_gap(p: &QdmParams<f64>) -> crate::Result<(f64, bool)> {
    let w = susceptibility::find_transparency_window(p, susceptibility::default_window_half_width(p))?;
    let exact = susceptibility::dispersion_exact(p, w)?.exact;
    let approx = susceptibility::dispersion_approx(p)?;
    Ok((((approx - exact) / exact).abs(), p.in_approximation_region()))
}

pub fn check_window_reduction(rng: &mut ChaCha8Rng, n: usize) -> Vec<CheckResult> {
    let mut worst = 0.0f64;
    let mut outside = 0;
    for _ in 0..n {
        let p = random_region_params(rng);
        match window_gap(&p) {
            Ok((e, inside)) => {
                worst = worst.max(e);
                outside += usize::from(!inside);
            }
            Err(e) => return vec![CheckResult::failed("window_reduction", WINDOW_TOL, e.to_string())],
        }
    }
    let mut out = vec![CheckResult::at_most(
        "window_reduction",
        worst,
        WINDOW_TOL,
        format!("{n} sets inside the approximation region, omega12 = 0"),
    )];
    out.push(CheckResult::at_most(
        "window_region_sampling",
        outside as f64,
        0.0,
        "sampled sets falling outside the region".into(),
    ));
    let counter = QdmParams::paper();
    out.push(match window_gap(&counter) {
        Ok((e, inside)) => CheckResult {
            name: "window_counterexample_outside_region".into(),
            measured: e,
            tolerance: WINDOW_TOL,
            passed: !inside && e > WINDOW_TOL,
            detail: format!("Te=0.01, Gamma20=1e-4: gap {e:.3}, in region = {inside}"),
        },
        Err(e) => CheckResult::failed("window_counterexample_outside_region", WINDOW_TOL, e.to_string()),
    });
    out
}

/// Printed denominator `P^2 + Q^2`, written out independently of the
/// susceptibility module.
pub fn printed_denominator(p: &QdmParams<f64>, delta: f64) -> f64 {
    let (g10, g20, te) = (p.dephasing10, p.dephasing20, p.tunneling);
    let d = delta - p.omega12;
    let a = g10 * g20 - delta * d + te * te;
    let b = delta * g20 + d * g10;
    a * a + b * b
}

pub fn identity_error(rng: &mut ChaCha8Rng, draws: usize, variant: Eq1Variant) -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let g10 = rng.gen_range(0.5..2.0);
        let base = random_params(rng);
        let p = QdmParams::with_linewidth(g10, base.dephasing20, base.tunneling, base.omega12);
        let delta = rng.gen_range(-5.0..5.0);
        let d = printed_denominator(&p, delta);
        let implied = dynamics::implied_denominator(&p, delta, variant)?;
        worst = worst.max(((implied - d) / d).abs());
    }
    Ok(worst)
}

pub fn check_identity(rng: &mut ChaCha8Rng, draws: usize, variant: Eq1Variant) -> CheckResult {
    const NAME: &str = "denominator_identity";
    let label = match variant {
        Eq1Variant::Corrected => "corrected",
        Eq1Variant::Printed => "printed (-i Te rho10)",
    };
    match identity_error(rng, draws, variant) {
        Ok(e) => CheckResult::at_most(NAME, e, IDENTITY_TOL, format!("{draws} draws, {label} coherence equation")),
        Err(e) => CheckResult::failed(NAME, IDENTITY_TOL, e.to_string()),
    }
}

/// Feeds the window `chi''` of the chosen convention to the round-trip
/// absorption of the standard cavity.
pub fn check_kappa_convention(convention: Convention) -> CheckResult {
    const NAME: &str = "kappa_convention";
    let params = QdmParams::paper().with_tunneling(0.5);
    let cav = CavityParams::figure2(&UnitContext::paper());
    let run = || -> crate::Result<(f64, f64)> {
        let w = cavity::reference_detuning(&params)?;
        let chi = susceptibility::chi(&params, w, convention)?;
        Ok((chi.chi_im, cavity::round_trip_absorption(&cav, chi.chi_im)?))
    };
    match run() {
        Ok((im, kappa)) => CheckResult {
            name: NAME.into(),
            measured: im,
            tolerance: 0.0,
            passed: im >= 0.0 && kappa <= 1.0,
            detail: format!("chi''={im:e}, kappa={kappa}"),
        },
        Err(e) => CheckResult::failed(NAME, 0.0, e.to_string()),
    }
}

/// Runs every check against `base` and the seeded random sets.
pub fn run(base: &QdmParams<f64>, s: &VerifySettings) -> VerifyReport {
    let mut rng = rng(s.seed);
    let mut sets = vec![*base];
    sets.extend((1..s.oracle_sets.max(1)).map(|_| random_params(&mut rng)));
    let grid = symmetric_grid(s.grid_half_width, s.grid_points);

    let mut checks = vec![check_oracle(&sets, &grid, s.oracle_g, ORACLE_TOL)];
    checks.extend(check_conservation(base, &mut rng, s.conservation_sets, s.dt, s.steps));

    let mut dsets = vec![*base];
    dsets.extend((1..s.derivative_sets.max(1)).map(|_| random_params(&mut rng)));
    checks.push(match derivative_error(&dsets, &grid) {
        Ok(e) => CheckResult::at_most("derivative", e, DERIVATIVE_TOL, format!("{} sets x {} points", dsets.len(), grid.len())),
        Err(e) => CheckResult::failed("derivative", DERIVATIVE_TOL, e.to_string()),
    });
    checks.extend(check_window_reduction(&mut rng, s.region_sets));
    checks.push(check_identity(&mut rng, s.identity_draws, s.eq1_variant));
    checks.push(check_kappa_convention(s.kappa_convention));

    VerifyReport { passed: checks.iter().all(|c| c.passed), checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> VerifySettings {
        VerifySettings {
            oracle_sets: 3,
            grid_points: 21,
            derivative_sets: 3,
            region_sets: 10,
            identity_draws: 10,
            conservation_sets: 1,
            steps: 100,
            ..VerifySettings::default()
        }
    }

    #[test]
    fn default_report_passes() {
        let r = run(&QdmParams::paper(), &quick());
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(r.passed);
    }

    #[test]
    fn printed_equation_breaks_identity() {
        let s = VerifySettings { eq1_variant: Eq1Variant::Printed, ..quick() };
        let r = run(&QdmParams::paper(), &s);
        assert!(!r.passed);
        let bad: Vec<_> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(bad, ["denominator_identity"]);
    }

    #[test]
    fn printed_chi_is_rejected_by_kappa() {
        let c = check_kappa_convention(Convention::Printed);
        assert!(!c.passed);
        assert!(c.detail.contains("negative absorption"), "{}", c.detail);
        assert!(check_kappa_convention(Convention::Canonical).passed);
    }

    #[test]
    fn same_seed_same_report() {
        let a = run(&QdmParams::paper(), &quick());
        let b = run(&QdmParams::paper(), &quick());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn printed_denominator_matches_closed_form() {
        let p = QdmParams::paper().with_omega12(0.3);
        for d in [-1.0, 0.0, 0.2, 2.5] {
            let a = printed_denominator(&p, d);
            let b = dynamics::first_order_denominator(&p, d);
            assert!(((a - b) / a).abs() < 1e-12);
        }
    }
}
