//! Continuous problem data: advective fluxes, diffusion parameters, and
//! sample-based checkers for the structural conditions on them.

use std::fmt;

use crate::error::{config, domain, Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;
use crate::scenarios::InitialDatum;

/// Built-in velocity fields `b(x, t)`. Every entry is time independent.
#[derive(Clone, Debug, PartialEq)]
pub enum VelocityField<T> {
    /// `b = -|x|^2 x / (eps + |x|^4 / 4)`.
    Fig1 {
        eps: T,
    },
    /// `b1 = -(4/25) x1 / [(16+x1^2)^2 (eps+x2^2)]`, `b2 = -(4/25) x2 / [(16+x1^2) (eps+x2^2)^2]`.
    Fig2 {
        eps: T,
    },
    /// `b1 = -1e-5 x1 / [(4+x1^2)^2 (1e-10+x2^2)]`, `b2 = -1e-5 x2 / [(4+x1^2) (1e-10+x2^2)^2]`.
    Fig2b,
    /// `b = -x`.
    Linear,
    /// `b = x`.
    Expanding,
    /// `b = (-x2, x1)`.
    Rotation,
    Constant([T; 2]),
    Zero,
}

impl<T: Scalar> VelocityField<T> {
    /// Parses a catalog identifier such as `fig1_eps:1e-4`, `linear` or `constant:1,0`.
    pub fn parse(name: &str) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (name.trim(), None),
        };
        let number = |s: &str| -> Result<T> {
            s.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::Config(format!("bad number {s:?} in velocity field {name:?}")))
        };
        let eps = |default: f64| -> Result<T> {
            let e = arg.map(number).transpose()?.unwrap_or(T::lit(default));
            if !(e > T::zero()) {
                return config(format!("eps must be positive in {name:?}"));
            }
            Ok(e)
        };
        let no_arg = |v: Self| -> Result<Self> {
            match arg {
                None => Ok(v),
                Some(_) => config(format!("velocity field {head:?} takes no parameter")),
            }
        };
        match head {
            "fig1" | "fig1_eps" => Ok(Self::Fig1 { eps: eps(1e-4)? }),
            "fig2" | "fig2_eps" => Ok(Self::Fig2 { eps: eps(1e-4)? }),
            "fig2b" => no_arg(Self::Fig2b),
            "linear" => no_arg(Self::Linear),
            "expanding" => no_arg(Self::Expanding),
            "rotation" => no_arg(Self::Rotation),
            "zero" => no_arg(Self::Zero),
            "constant" => {
                let arg = arg.ok_or_else(|| Error::Config("constant needs a value".into()))?;
                let parts = arg.split(',').map(number).collect::<Result<Vec<T>>>()?;
                match parts.as_slice() {
                    [c] => Ok(Self::Constant([*c, *c])),
                    [c1, c2] => Ok(Self::Constant([*c1, *c2])),
                    _ => config(format!("constant takes one or two components, got {arg:?}")),
                }
            }
            _ => config(format!("unknown velocity field {name:?}")),
        }
    }

    /// `b(x, t)`; components beyond the grid dimension are ignored by callers.
    #[inline]
    pub fn eval(&self, x: [T; 2], _t: T) -> [T; 2] {
        let [x1, x2] = x;
        match self {
            Self::Fig1 { eps } => {
                let r2 = x1 * x1 + x2 * x2;
                let s = -r2 / (*eps + r2 * r2 / T::lit(4.0));
                [s * x1, s * x2]
            }
            Self::Fig2 { eps } => anisotropic(x1, x2, T::lit(4.0) / T::lit(25.0), T::lit(16.0), *eps),
            Self::Fig2b => anisotropic(x1, x2, T::lit(1e-5), T::lit(4.0), T::lit(1e-10)),
            Self::Linear => [-x1, -x2],
            Self::Expanding => [x1, x2],
            Self::Rotation => [-x2, x1],
            Self::Constant(c) => *c,
            Self::Zero => [T::zero(); 2],
        }
    }
}

#[inline]
fn anisotropic<T: Scalar>(x1: T, x2: T, coef: T, shift: T, eps: T) -> [T; 2] {
    let p = shift + x1 * x1;
    let q = eps + x2 * x2;
    [-coef * x1 / (p * p * q), -coef * x2 / (p * q * q)]
}

impl<T: Scalar> fmt::Display for VelocityField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fig1 { eps } => write!(f, "fig1_eps:{}", eps.as_f64()),
            Self::Fig2 { eps } => write!(f, "fig2_eps:{}", eps.as_f64()),
            Self::Fig2b => f.write_str("fig2b"),
            Self::Linear => f.write_str("linear"),
            Self::Expanding => f.write_str("expanding"),
            Self::Rotation => f.write_str("rotation"),
            Self::Constant([a, b]) => write!(f, "constant:{},{}", a.as_f64(), b.as_f64()),
            Self::Zero => f.write_str("zero"),
        }
    }
}

/// Evaluates a catalog field by name.
pub fn eval_b<T: Scalar>(name: &str, x: [T; 2], t: T) -> Result<[T; 2]> {
    Ok(VelocityField::parse(name)?.eval(x, t))
}

/// `beta = -div b` by central differences with step `1e-6 (1 + |x|)`.
pub fn beta<T: Scalar>(b: &VelocityField<T>, x: [T; 2], t: T, dim: usize) -> T {
    let norm = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let step = T::lit(1e-6) * (T::one() + norm);
    let mut div = T::zero();
    for axis in 0..dim {
        let mut xp = x;
        let mut xm = x;
        xp[axis] = xp[axis] + step;
        xm[axis] = xm[axis] - step;
        div = div + (b.eval(xp, t)[axis] - b.eval(xm, t)[axis]) / (step + step);
    }
    -div
}

/// Piecewise description of a positive function of time.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeFunction<T> {
    Constant(T),
    /// `(t, value)` knots with increasing `t`, linear in between, clamped outside.
    Table(Vec<(T, T)>),
}

impl<T: Scalar> TimeFunction<T> {
    pub fn eval(&self, t: T) -> T {
        match self {
            Self::Constant(c) => *c,
            Self::Table(knots) => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = knots.partition_point(|&(tk, _)| tk <= t);
                let (t0, v0) = knots[k - 1];
                let (t1, v1) = knots[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn validate_positive(&self, what: &str) -> Result<()> {
        let values: Vec<T> = match self {
            Self::Constant(c) => vec![*c],
            Self::Table(knots) => {
                if knots.is_empty() {
                    return config(format!("{what} table is empty"));
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return config(format!("{what} table times must increase strictly"));
                }
                knots.iter().map(|k| k.1).collect()
            }
        };
        if values.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return config(format!("{what} must be positive and finite"));
        }
        Ok(())
    }
}

/// Power-law advective flux `f(x, t, u) = b(x, t) |u|^kappa u`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerLawFlux<T> {
    pub velocity: VelocityField<T>,
    pub kappa: T,
}

/// Spatially uniform flux `g(t, u) = c |u|^kappa u`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformFlux<T> {
    pub c: [T; 2],
    pub kappa: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AdvectionKind<T> {
    Zero,
    PowerLaw(PowerLawFlux<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdvectionSpec<T> {
    pub kind: AdvectionKind<T>,
    pub g: Option<UniformFlux<T>>,
}

impl<T: Scalar> AdvectionSpec<T> {
    pub fn none() -> Self {
        Self {
            kind: AdvectionKind::Zero,
            g: None,
        }
    }

    pub fn power_law(velocity: VelocityField<T>, kappa: T) -> Self {
        Self {
            kind: AdvectionKind::PowerLaw(PowerLawFlux { velocity, kappa }),
            g: None,
        }
    }

    pub fn with_g(mut self, c: [T; 2], kappa: T) -> Self {
        self.g = Some(UniformFlux { c, kappa });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let AdvectionKind::PowerLaw(p) = &self.kind {
            if !(p.kappa >= T::zero()) {
                return config("kappa must be >= 0");
            }
        }
        if let Some(g) = &self.g {
            if !(g.kappa >= T::zero()) {
                return config("kappa of g must be >= 0");
            }
        }
        Ok(())
    }

    /// Spatial exponent used in the flux growth bound; 0 when `f` vanishes.
    pub fn kappa(&self) -> T {
        match &self.kind {
            AdvectionKind::Zero => T::zero(),
            AdvectionKind::PowerLaw(p) => p.kappa,
        }
    }

    pub fn velocity(&self) -> Option<&VelocityField<T>> {
        match &self.kind {
            AdvectionKind::Zero => None,
            AdvectionKind::PowerLaw(p) => Some(&p.velocity),
        }
    }
}

/// `f(x, t, u)`; exactly zero at `u = 0`.
pub fn eval_f<T: Scalar>(spec: &AdvectionSpec<T>, x: [T; 2], t: T, u: T) -> [T; 2] {
    match &spec.kind {
        AdvectionKind::Zero => [T::zero(); 2],
        AdvectionKind::PowerLaw(p) => {
            let s = u.abs_pow(p.kappa) * u;
            let b = p.velocity.eval(x, t);
            [b[0] * s, b[1] * s]
        }
    }
}

/// `g(t, u)`.
pub fn eval_g<T: Scalar>(spec: &AdvectionSpec<T>, _t: T, u: T) -> [T; 2] {
    match &spec.g {
        None => [T::zero(); 2],
        Some(g) => {
            let s = u.abs_pow(g.kappa) * u;
            [g.c[0] * s, g.c[1] * s]
        }
    }
}

fn norm2<T: Scalar>(v: [T; 2]) -> T {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Tightest `F(t)` on the sample: `sup |f(x,t,u)| / |u|^(kappa+1)` over cell
/// centers and a ladder of `u` values in `[-u_range, u_range]`.
pub fn empirical_f<T: Scalar>(spec: &AdvectionSpec<T>, grid: &Grid<T>, t: T, u_range: T) -> Result<T> {
    if !(u_range > T::zero()) {
        return domain(format!("u_range must be positive, got {u_range}"));
    }
    let AdvectionKind::PowerLaw(p) = &spec.kind else {
        return Ok(T::zero());
    };
    let us: Vec<T> = [1.0, 0.5, 0.125, 1.0 / 64.0]
        .iter()
        .flat_map(|&s| [T::lit(s) * u_range, -T::lit(s) * u_range])
        .collect();
    let mut sup = T::zero();
    for i in 0..grid.len() {
        let x = grid.center(i);
        for &u in &us {
            let f = eval_f(spec, x, t, u);
            let r = norm2(f) / u.abs_pow(p.kappa + T::one());
            if !r.is_finite() {
                return Err(Error::NonFiniteSample {
                    x: [x[0].as_f64(), x[1].as_f64()],
                    u: u.as_f64(),
                });
            }
            sup = sup.max(r);
        }
    }
    Ok(sup)
}

/// Outcome of the sampled divergence sign condition `sum_i u df_i/dx_i >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignConditionReport<T> {
    pub holds: bool,
    /// Sample with the smallest value of `u div_x f`: `(x, u, value)`.
    pub worst: Option<([T; 2], T, T)>,
    pub samples: usize,
}

/// Tolerance below zero accepted before a sample counts as a violation.
pub const SIGN_CONDITION_TOL: f64 = -1e-9;

/// Samples `u * div_x f(x, t, u)` on cell centers times `u_samples`. For the
/// power-law flux this equals `-beta(x,t) |u|^kappa u^2`.
pub fn check_sign_condition<T: Scalar>(
    spec: &AdvectionSpec<T>,
    grid: &Grid<T>,
    t: T,
    u_samples: &[T],
) -> Result<SignConditionReport<T>> {
    if u_samples.is_empty() {
        return domain("u_samples must be nonempty");
    }
    let samples = grid.len() * u_samples.len();
    let AdvectionKind::PowerLaw(p) = &spec.kind else {
        return Ok(SignConditionReport {
            holds: true,
            worst: None,
            samples,
        });
    };
    let mut worst: Option<([T; 2], T, T)> = None;
    for i in 0..grid.len() {
        let x = grid.center(i);
        let b = beta(&p.velocity, x, t, grid.dim());
        for &u in u_samples {
            let value = -b * u.abs_pow(p.kappa) * u * u;
            if worst.is_none_or(|w| value < w.2) {
                worst = Some((x, u, value));
            }
        }
    }
    let holds = worst.is_none_or(|w| w.2 >= T::lit(SIGN_CONDITION_TOL));
    Ok(SignConditionReport { holds, worst, samples })
}

/// Diffusion parameters: exponent, `mu(t)`, optional upper bound `M(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSpec<T> {
    pub alpha: T,
    pub mu: TimeFunction<T>,
    pub m_bound: Option<TimeFunction<T>>,
}

impl<T: Scalar> DiffusionSpec<T> {
    pub fn new(alpha: T, mu: TimeFunction<T>) -> Self {
        Self {
            alpha,
            mu,
            m_bound: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return config(format!("alpha must be positive, got {}", self.alpha));
        }
        self.mu.validate_positive("mu")?;
        if let Some(m) = &self.m_bound {
            m.validate_positive("M")?;
        }
        Ok(())
    }
}

/// One evaluation point `(x, t, u, v)` for the diffusion-flux checker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxSample<T> {
    pub x: [T; 2],
    pub t: T,
    pub u: T,
    pub v: [T; 2],
}

/// Worst margins of the coercivity and growth bounds on a diffusion flux.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticityReport<T> {
    /// `min <A, v> - mu |u|^alpha |v|^2`.
    pub lower_margin: T,
    /// `min M |u|^alpha |v| - |A|`.
    pub upper_margin: T,
    /// Smallest `M` that would satisfy the growth bound on the sample.
    pub required_m: T,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// Isotropic flux `A = mu(t) |u|^alpha v`.
pub fn isotropic_flux<T: Scalar>(diffusion: &DiffusionSpec<T>) -> impl Fn([T; 2], T, T, [T; 2]) -> [T; 2] + '_ {
    move |_x, t, u, v| {
        let k = diffusion.mu.eval(t) * u.abs_pow(diffusion.alpha);
        [k * v[0], k * v[1]]
    }
}

pub fn check_ellipticity<T: Scalar>(
    flux: impl Fn([T; 2], T, T, [T; 2]) -> [T; 2],
    diffusion: &DiffusionSpec<T>,
    samples: &[FluxSample<T>],
) -> Result<EllipticityReport<T>> {
    let Some(m_bound) = &diffusion.m_bound else {
        return config("growth bound M(t) is required for the ellipticity check");
    };
    let tol = T::lit(1e-12);
    let mut report = EllipticityReport {
        lower_margin: T::infinity(),
        upper_margin: T::infinity(),
        required_m: T::zero(),
        lower_holds: true,
        upper_holds: true,
    };
    for s in samples {
        let a = flux(s.x, s.t, s.u, s.v);
        let weight = s.u.abs_pow(diffusion.alpha);
        let v_sq = s.v[0] * s.v[0] + s.v[1] * s.v[1];
        let inner = a[0] * s.v[0] + a[1] * s.v[1];
        let lower_rhs = diffusion.mu.eval(s.t) * weight * v_sq;
        let lower = inner - lower_rhs;
        let a_norm = norm2(a);
        let scale = weight * v_sq.sqrt();
        let upper_rhs = m_bound.eval(s.t) * scale;
        let upper = upper_rhs - a_norm;
        report.lower_margin = report.lower_margin.min(lower);
        report.upper_margin = report.upper_margin.min(upper);
        if scale > T::zero() {
            report.required_m = report.required_m.max(a_norm / scale);
        }
        if lower < -tol * (T::one() + lower_rhs.abs()) {
            report.lower_holds = false;
        }
        if upper < -tol * (T::one() + upper_rhs.abs()) {
            report.upper_holds = false;
        }
    }
    Ok(report)
}

/// The full initial-value problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec<T> {
    pub advection: AdvectionSpec<T>,
    pub diffusion: DiffusionSpec<T>,
    pub initial: InitialDatum<T>,
    pub dim: usize,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return config(format!("dimension must be 1 or 2, got {}", self.dim));
        }
        self.advection.validate()?;
        self.diffusion.validate()
    }

    /// Time at which the initial datum is imposed.
    pub fn start_time(&self) -> T {
        self.initial.start_time()
    }

    /// Exponent offset `n (kappa - alpha)`.
    pub fn a(&self) -> T {
        T::lit(self.dim as f64) * (self.advection.kappa() - self.diffusion.alpha)
    }
}
