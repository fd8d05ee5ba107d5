//! Registry of named, fully parameterized experiments.

use std::fmt;
use std::path::PathBuf;

use statrs::function::gamma::gamma;

use crate::diagnostics::{check_l1_decay, check_linf_nonincreasing, RunReport, RunSettings};
use crate::error::{config, domain, Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::model::{AdvectionSpec, DiffusionSpec, ProblemSpec, TimeFunction, VelocityField};
use crate::scalar::Scalar;
use crate::solver::{run, Integrator, SchemeConfig};

/// Initial data `u0`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDatum<T> {
    /// `A prod_i cos^2(pi x_i / 2)` on `|x_i| <= 1`, zero elsewhere.
    CanonicalBump { amplitude: T },
    /// Exact source solution of the pure porous-medium equation at time `t0 > 0`.
    Barenblatt { mass: T, t0: T, alpha: T },
    /// Snapshot in the field CSV layout.
    CustomCsv { path: PathBuf },
}

impl<T: Scalar> InitialDatum<T> {
    pub fn start_time(&self) -> T {
        match self {
            Self::Barenblatt { t0, .. } => *t0,
            _ => T::zero(),
        }
    }

    pub fn sample(&self, grid: &Grid<T>) -> Result<Field<T>> {
        let t0 = self.start_time();
        match self {
            Self::CanonicalBump { amplitude } => {
                let a = *amplitude;
                let dim = grid.dim();
                Ok(Field::from_fn(*grid, t0, |x| a * canonical_bump(x, dim)))
            }
            Self::Barenblatt { mass, t0, alpha } => {
                let profile = BarenblattProfile::new(*alpha, *mass, grid.dim())?;
                Ok(Field::from_fn(*grid, *t0, |x| profile.eval(x, *t0)))
            }
            Self::CustomCsv { path } => Field::load_csv(*grid, path),
        }
    }

    /// Half-width of a box centered at the origin containing the support, if known.
    pub fn support_radius(&self, dim: usize) -> Option<T> {
        match self {
            Self::CanonicalBump { .. } => Some(T::one()),
            Self::Barenblatt { mass, t0, alpha } => BarenblattProfile::new(*alpha, *mass, dim)
                .ok()
                .map(|p| p.support_radius(*t0)),
            Self::CustomCsv { .. } => None,
        }
    }
}

fn canonical_bump<T: Scalar>(x: [T; 2], dim: usize) -> T {
    let mut v = T::one();
    for &xi in x.iter().take(dim) {
        if xi.abs() > T::one() {
            return T::zero();
        }
        let c = (T::PI() * xi / T::lit(2.0)).cos();
        v = v * c * c;
    }
    v
}

/// Self-similar source solution of `u_t = div(u^alpha grad u)` with prescribed mass.
///
/// With `m = alpha + 1` it is `U(x, t/m)` where
/// `U(x,s) = s^-k (C - gamma |x|^2 s^(-2k/n))_+^(1/alpha)` solves `U_s = Lap U^m`,
/// `k = n / (n alpha + 2)` and `gamma = k alpha / (2 m n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarenblattProfile {
    alpha: f64,
    n: usize,
    k: f64,
    gamma: f64,
    c: f64,
}

impl BarenblattProfile {
    pub fn new<T: Scalar>(alpha: T, mass: T, n: usize) -> Result<Self> {
        let (alpha, mass) = (alpha.as_f64(), mass.as_f64());
        if !(alpha > 0.0) {
            return domain(format!("alpha must be positive, got {alpha}"));
        }
        if !(mass > 0.0) {
            return domain(format!("mass must be positive, got {mass}"));
        }
        if n != 1 && n != 2 {
            return domain(format!("dimension must be 1 or 2, got {n}"));
        }
        let nf = n as f64;
        let m = alpha + 1.0;
        let k = nf / (nf * alpha + 2.0);
        let gamma_c = k * alpha / (2.0 * m * nf);
        let p = 1.0 / alpha;
        // mass = C^(p + n/2) gamma^(-n/2) pi^(n/2) Gamma(p+1) / Gamma(p+1+n/2)
        let shape = std::f64::consts::PI.powf(nf / 2.0) * gamma(p + 1.0) / gamma(p + 1.0 + nf / 2.0);
        let c = (mass * gamma_c.powf(nf / 2.0) / shape).powf(1.0 / (p + nf / 2.0));
        Ok(Self {
            alpha,
            n,
            k,
            gamma: gamma_c,
            c,
        })
    }

    fn rescaled(&self, t: f64) -> f64 {
        t / (self.alpha + 1.0)
    }

    pub fn eval<T: Scalar>(&self, x: [T; 2], t: T) -> T {
        let s = self.rescaled(t.as_f64());
        let r2: f64 = x.iter().take(self.n).map(|v| v.as_f64() * v.as_f64()).sum();
        let base = self.c - self.gamma * r2 * s.powf(-2.0 * self.k / self.n as f64);
        if base <= 0.0 {
            return T::zero();
        }
        T::lit(s.powf(-self.k) * base.powf(1.0 / self.alpha))
    }

    pub fn support_radius<T: Scalar>(&self, t: T) -> T {
        let s = self.rescaled(t.as_f64());
        T::lit((self.c / self.gamma).sqrt() * s.powf(self.k / self.n as f64))
    }
}

/// Exact porous-medium source solution at `(x, t)`; `mass` fixes the free constant.
pub fn exact_barenblatt<T: Scalar>(x: [T; 2], t: T, alpha: T, mass: T, n: usize) -> Result<T> {
    if !(t > T::zero()) {
        return domain(format!("time must be positive, got {t}"));
    }
    Ok(BarenblattProfile::new(alpha, mass, n)?.eval(x, t))
}

/// Qualitative checks a scenario run must satisfy.
#[derive(Clone, Debug, PartialEq)]
pub enum Expectation<T> {
    L1Decay,
    NoBlowUp,
    NoBoundaryContamination,
    /// Peak `||u||_inf` over the run at least `factor` times the initial one.
    LinfGrowthFactor(T),
    /// `||u||_inf` non-increasing per output interval within this relative slack.
    LinfNonIncreasing(T),
    /// `||u||_inf` strictly decreasing between consecutive outputs.
    LinfDecay,
    /// Final discrete L1 distance to the exact source solution at most this value.
    BarenblattL1Error(T),
}

impl<T: Scalar> fmt::Display for Expectation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::L1Decay => f.write_str("l1_decay"),
            Self::NoBlowUp => f.write_str("no_blow_up"),
            Self::NoBoundaryContamination => f.write_str("no_boundary_contamination"),
            Self::LinfGrowthFactor(x) => write!(f, "linf_growth_factor >= {}", x.as_f64()),
            Self::LinfNonIncreasing(x) => write!(f, "linf_nonincreasing (rel {:e})", x.as_f64()),
            Self::LinfDecay => f.write_str("linf_decay"),
            Self::BarenblattL1Error(x) => write!(f, "barenblatt_l1_error <= {:e}", x.as_f64()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Named experiment: grid, problem, schedule, scheme settings, and expectations.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T> {
    pub name: String,
    pub description: String,
    pub grid: Grid<T>,
    pub problem: ProblemSpec<T>,
    pub horizon: T,
    pub output_interval: T,
    pub scheme: SchemeConfig<T>,
    pub expectations: Vec<Expectation<T>>,
}

/// Everything a scenario run produces.
#[derive(Clone, Debug)]
pub struct Outcome<T> {
    pub report: RunReport<T>,
    pub initial: Field<T>,
    pub last: Field<T>,
    pub expectations: Vec<ExpectationResult>,
}

impl<T: Scalar> Outcome<T> {
    pub fn expectations_pass(&self) -> bool {
        self.expectations.iter().all(|e| e.pass)
    }
}

/// Registered scenarios with one-line descriptions.
pub const REGISTRY: &[(&str, &str)] = &[
    (
        "fig1",
        "2D growth: alpha = kappa = 1, b = -|x|^2 x / (1e-4 + |x|^4/4), cos^2 bump",
    ),
    ("fig1_deep", "fig1 with eps = 1e-10 (stronger focusing)"),
    (
        "fig2",
        "2D growth: alpha = 2, kappa = 1, anisotropic focusing field with eps = 1e-4",
    ),
    (
        "barenblatt1d",
        "1D porous medium, alpha = 1, exact source solution from t = 0.1",
    ),
    (
        "pure_diffusion_2d",
        "2D porous medium, alpha = 1, zero advection with kappa = 1, cos^2 bump",
    ),
    ("rotation_smoke", "2D divergence-free rotation b = (-x2, x1), kappa = 1"),
    ("gflux_smoke", "2D x-independent flux g = (1, 1/2) |u| u"),
];

pub fn list_scenarios() -> &'static [(&'static str, &'static str)] {
    REGISTRY
}

/// Constants frozen from one-time reference runs.
pub mod reference {
    /// Lower bound on the peak `||u||_inf` growth asserted for the growth scenarios.
    pub const GROWTH_FLOOR: f64 = 5.0;
    /// Relative tolerance of coarse-grid growth against the fine-grid reference.
    pub const GROWTH_TOLERANCE: f64 = 0.2;
    /// Peak growth of `fig1` on 512^2 over `FIG1_HORIZON` (still rising slowly at the horizon).
    pub const FIG1_GROWTH: f64 = 8.049;
    /// Peak growth of `fig2` on 512^2, attained near t = 0.05 and decaying after.
    pub const FIG2_GROWTH: f64 = 4.157;
    pub const FIG1_HORIZON: f64 = 1.5;
    pub const FIG2_HORIZON: f64 = 0.25;
    pub const FIG2_OUTPUT_INTERVAL: f64 = 0.01;
    pub const BARENBLATT_T0: f64 = 0.1;
    /// Horizon of `barenblatt1d`, measured from `BARENBLATT_T0`.
    pub const BARENBLATT_HORIZON: f64 = 0.9;
    /// Final L1 error allowed per unit cell width.
    pub const BARENBLATT_ERROR_PER_H: f64 = 0.05;

    /// Growth a 128^2 run must reach given the fine-grid reference value.
    pub fn growth_threshold(reference: f64) -> f64 {
        GROWTH_FLOOR.max((1.0 - GROWTH_TOLERANCE) * reference)
    }
}

struct Base<T> {
    dim: usize,
    half_width: T,
    cells: usize,
    advection: AdvectionSpec<T>,
    alpha: T,
    initial: InitialDatum<T>,
    horizon: T,
    output_interval: T,
    expectations: Vec<Expectation<T>>,
}

fn base<T: Scalar>(name: &str) -> Result<(Base<T>, &'static str)> {
    let lit = T::lit;
    let bump = InitialDatum::CanonicalBump { amplitude: T::one() };
    let standard = vec![
        Expectation::NoBlowUp,
        Expectation::NoBoundaryContamination,
        Expectation::L1Decay,
    ];
    let growth = |factor: f64| {
        let mut e = standard.clone();
        e.push(Expectation::LinfGrowthFactor(lit(factor)));
        e
    };
    let two_d = |advection, alpha: f64, horizon: f64, output: f64, expectations| Base {
        dim: 2,
        half_width: lit(4.0),
        cells: 128,
        advection,
        alpha: lit(alpha),
        initial: bump.clone(),
        horizon: lit(horizon),
        output_interval: lit(output),
        expectations,
    };
    let desc = REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, d)| *d)
        .ok_or_else(|| Error::Config(format!("unknown scenario {name:?}")))?;
    let b = match name {
        "fig1" => two_d(
            AdvectionSpec::power_law(VelocityField::Fig1 { eps: lit(1e-4) }, T::one()),
            1.0,
            reference::FIG1_HORIZON,
            0.05,
            growth(reference::growth_threshold(reference::FIG1_GROWTH)),
        ),
        "fig1_deep" => two_d(
            AdvectionSpec::power_law(VelocityField::Fig1 { eps: lit(1e-10) }, T::one()),
            1.0,
            reference::FIG1_HORIZON,
            0.05,
            growth(reference::GROWTH_FLOOR),
        ),
        "fig2" => two_d(
            AdvectionSpec::power_law(VelocityField::Fig2 { eps: lit(1e-4) }, T::one()),
            2.0,
            reference::FIG2_HORIZON,
            reference::FIG2_OUTPUT_INTERVAL,
            growth(reference::growth_threshold(reference::FIG2_GROWTH)),
        ),
        "pure_diffusion_2d" => {
            let mut e = standard.clone();
            e.push(Expectation::LinfDecay);
            // Zero velocity with kappa = alpha, so that a = 0 in the estimate audit.
            two_d(
                AdvectionSpec::power_law(VelocityField::Zero, T::one()),
                1.0,
                1.0,
                0.05,
                e,
            )
        }
        "rotation_smoke" => {
            let mut e = standard.clone();
            e.push(Expectation::LinfNonIncreasing(lit(1e-8)));
            two_d(
                AdvectionSpec::power_law(VelocityField::Rotation, T::one()),
                1.0,
                1.0,
                0.05,
                e,
            )
        }
        "gflux_smoke" => {
            let mut e = standard.clone();
            e.push(Expectation::LinfNonIncreasing(lit(1e-8)));
            two_d(
                AdvectionSpec::none().with_g([T::one(), lit(0.5)], T::one()),
                1.0,
                0.5,
                0.05,
                e,
            )
        }
        "barenblatt1d" => {
            let mut e = standard.clone();
            e.push(Expectation::BarenblattL1Error(lit(reference::BARENBLATT_ERROR_PER_H
                * 6.0
                / 128.0)));
            Base {
                dim: 1,
                half_width: lit(3.0),
                cells: 128,
                advection: AdvectionSpec::none(),
                alpha: T::one(),
                initial: InitialDatum::Barenblatt {
                    mass: T::one(),
                    t0: lit(reference::BARENBLATT_T0),
                    alpha: T::one(),
                },
                horizon: lit(reference::BARENBLATT_HORIZON),
                output_interval: lit(0.05),
                expectations: e,
            }
        }
        _ => return config(format!("scenario {name:?} has no definition")),
    };
    Ok((b, desc))
}

/// Keys accepted by [`build`].
pub const OVERRIDE_KEYS: &[&str] = &[
    "cells",
    "horizon",
    "output_interval",
    "eps",
    "amplitude",
    "mass",
    "cfl_adv",
    "cfl_diff",
    "integrator",
    "guard",
];

/// Builds a registered scenario, applying `key=value` overrides.
pub fn build<T: Scalar>(name: &str, overrides: &[(String, String)]) -> Result<Scenario<T>> {
    let (mut b, desc) = base::<T>(name)?;
    let mut scheme = SchemeConfig::<T>::default();
    let num = |key: &str, v: &str| -> Result<f64> {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("override {key}={v:?} is not a number")))
    };
    for (key, value) in overrides {
        match key.as_str() {
            "cells" => {
                let c = value
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("cells={value:?} is not a count")))?;
                b.cells = c;
                if let Some(Expectation::BarenblattL1Error(bound)) = b
                    .expectations
                    .iter_mut()
                    .find(|e| matches!(e, Expectation::BarenblattL1Error(_)))
                {
                    *bound =
                        T::lit(reference::BARENBLATT_ERROR_PER_H) * (b.half_width + b.half_width) / T::lit(c as f64);
                }
            }
            "horizon" => b.horizon = T::lit(num(key, value)?),
            "output_interval" => b.output_interval = T::lit(num(key, value)?),
            "eps" => {
                let eps = T::lit(num(key, value)?);
                if !(eps > T::zero()) {
                    return config("eps must be positive");
                }
                match &mut b.advection.kind {
                    crate::model::AdvectionKind::PowerLaw(p) => match &mut p.velocity {
                        VelocityField::Fig1 { eps: e } | VelocityField::Fig2 { eps: e } => *e = eps,
                        _ => return config(format!("scenario {name:?} has no eps parameter")),
                    },
                    _ => return config(format!("scenario {name:?} has no eps parameter")),
                }
            }
            "amplitude" => match &mut b.initial {
                InitialDatum::CanonicalBump { amplitude } => *amplitude = T::lit(num(key, value)?),
                _ => return config(format!("scenario {name:?} has no amplitude parameter")),
            },
            "mass" => match &mut b.initial {
                InitialDatum::Barenblatt { mass, .. } => *mass = T::lit(num(key, value)?),
                _ => return config(format!("scenario {name:?} has no mass parameter")),
            },
            "cfl_adv" => scheme.cfl_adv = T::lit(num(key, value)?),
            "cfl_diff" => scheme.cfl_diff = T::lit(num(key, value)?),
            "guard" => scheme.boundary_guard = T::lit(num(key, value)?),
            "integrator" => {
                scheme.integrator = match value.trim() {
                    "euler" => Integrator::Euler,
                    "heun" => Integrator::Heun,
                    other => return config(format!("unknown integrator {other:?}")),
                }
            }
            other => {
                return config(format!(
                    "unknown override key {other:?}; valid keys: {}",
                    OVERRIDE_KEYS.join(", ")
                ))
            }
        }
    }
    scheme.validate()?;
    let grid = Grid::cube(b.dim, -b.half_width, b.half_width, b.cells)?;
    let problem = ProblemSpec {
        advection: b.advection,
        diffusion: DiffusionSpec::new(b.alpha, TimeFunction::Constant(T::one())),
        initial: b.initial,
        dim: b.dim,
    };
    problem.validate()?;
    let s = Scenario {
        name: name.to_string(),
        description: desc.to_string(),
        grid,
        problem,
        horizon: b.horizon,
        output_interval: b.output_interval,
        scheme,
        expectations: b.expectations,
    };
    if !(s.horizon >= T::zero()) || !(s.output_interval > T::zero()) {
        return config("horizon must be >= 0 and output_interval > 0");
    }
    Ok(s)
}

impl<T: Scalar> Scenario<T> {
    /// True when the scenario carries an exact-solution oracle.
    pub fn has_exact_solution(&self) -> bool {
        matches!(self.problem.initial, InitialDatum::Barenblatt { .. })
            && self.problem.advection == AdvectionSpec::none()
    }

    /// Exact solution at `(x, t)` when available.
    pub fn exact(&self, x: [T; 2], t: T) -> Option<T> {
        match &self.problem.initial {
            InitialDatum::Barenblatt { mass, alpha, .. } if self.has_exact_solution() => {
                exact_barenblatt(x, t, *alpha, *mass, self.problem.dim).ok()
            }
            _ => None,
        }
    }

    /// Discrete L1 distance between `field` and the exact solution at the field's time.
    pub fn exact_l1_error(&self, field: &Field<T>) -> Option<T> {
        if !self.has_exact_solution() {
            return None;
        }
        let g = field.grid();
        let t = field.time();
        let mut err = T::zero();
        for (i, &u) in field.values().iter().enumerate() {
            err = err + (u - self.exact(g.center(i), t)?).abs();
        }
        Some(err * g.cell_volume())
    }

    pub fn settings(&self, exponents: Vec<T>) -> RunSettings<T> {
        RunSettings::new(self.horizon, self.output_interval).with_exponents(exponents)
    }

    /// Runs the scenario and evaluates its expectations.
    pub fn run(&self, exponents: Vec<T>, mut observer: impl FnMut(&Field<T>, &RunReport<T>)) -> Result<Outcome<T>> {
        let mut initial = None;
        let mut last = None;
        let report = run(
            &self.problem,
            self.grid,
            &self.scheme,
            &self.settings(exponents),
            |f, r| {
                if initial.is_none() {
                    initial = Some(f.clone());
                }
                last = Some(f.clone());
                observer(f, r);
            },
        )?;
        let initial = initial.ok_or_else(|| Error::Domain("run produced no snapshot".into()))?;
        let last = last.unwrap_or_else(|| initial.clone());
        let expectations = self
            .expectations
            .iter()
            .map(|e| self.evaluate(e, &report, &last))
            .collect();
        Ok(Outcome {
            report,
            initial,
            last,
            expectations,
        })
    }

    pub fn evaluate(&self, e: &Expectation<T>, report: &RunReport<T>, last: &Field<T>) -> ExpectationResult {
        let name = e.to_string();
        let (pass, detail) = match e {
            Expectation::NoBlowUp => match report.flags.blow_up {
                None => (true, "no non-finite values".to_string()),
                Some((t, _, cell)) => (false, format!("blow-up after t = {t} in cell {cell}")),
            },
            Expectation::NoBoundaryContamination => (
                !report.flags.boundary_contaminated,
                format!("{} guard violations", report.guard_violations),
            ),
            Expectation::L1Decay => match check_l1_decay(report) {
                Ok(c) => (
                    c.pass,
                    format!(
                        "worst increment {:e} at output {}",
                        c.worst_increment.as_f64(),
                        c.worst_index
                    ),
                ),
                Err(_) => (true, "single output time".to_string()),
            },
            Expectation::LinfNonIncreasing(rel) => match check_linf_nonincreasing(report, *rel) {
                Ok(c) => (
                    c.pass,
                    format!(
                        "worst increment {:e} at output {}",
                        c.worst_increment.as_f64(),
                        c.worst_index
                    ),
                ),
                Err(_) => (true, "single output time".to_string()),
            },
            Expectation::LinfDecay => {
                let s = report.linf_series();
                let pass = s.windows(2).all(|w| w[1] < w[0]);
                (pass, format!("{} outputs", s.len()))
            }
            Expectation::LinfGrowthFactor(min) => {
                let s = report.linf_series();
                let u0 = s.first().copied().unwrap_or(T::zero());
                let peak = s.iter().fold(T::zero(), |m, &v| m.max(v));
                let factor = if u0 > T::zero() { peak / u0 } else { T::zero() };
                let pass = factor >= *min || (report.times.len() < 2 && report.flags.blow_up.is_none());
                (pass, format!("peak growth {:.4}", factor.as_f64()))
            }
            Expectation::BarenblattL1Error(max) => match self.exact_l1_error(last) {
                Some(err) => (err <= *max, format!("L1 error {:e}", err.as_f64())),
                None => (false, "no exact solution".to_string()),
            },
        };
        ExpectationResult { name, pass, detail }
    }
}
