//! Explicit conservative finite-volume scheme.
//!
//! Advective faces use the local Lax-Friedrichs flux
//! `H = (h(uL) + h(uR))/2 - lambda (uR - uL)/2` with `b` sampled at face
//! midpoints; diffusion is `mu(t)` times the standard Laplacian of
//! `Phi(u) = |u|^alpha u / (alpha + 1)`. Boundary faces carry no flux.

use crate::diagnostics::{RunReport, RunSettings};
use crate::error::{config, Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::model::{empirical_f, AdvectionKind, AdvectionSpec, ProblemSpec, TimeFunction};
use crate::scalar::Scalar;

/// `|u|^alpha u / (alpha + 1)`, the antiderivative of `|u|^alpha`.
#[inline]
pub fn phi<T: Scalar>(u: T, alpha: T) -> T {
    u.abs_pow(alpha) * u / (alpha + T::one())
}

/// Cells per axis of the lattice on which `F(t)` is sampled during a run.
pub const F_SAMPLING_CELLS: usize = 2048;

/// Magnitude at which a cell value is treated as blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    /// Two-stage strong-stability-preserving Runge-Kutta.
    Heun,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig<T> {
    pub cfl_adv: T,
    pub cfl_diff: T,
    pub integrator: Integrator,
    /// Largest `|u|` tolerated in the outer cell ring, relative to `max |u|`.
    pub boundary_guard: T,
}

impl<T: Scalar> Default for SchemeConfig<T> {
    fn default() -> Self {
        Self {
            cfl_adv: T::lit(0.4),
            cfl_diff: T::lit(0.4),
            integrator: Integrator::Euler,
            boundary_guard: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> SchemeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |c: T| c > T::zero() && c <= T::one();
        if !unit(self.cfl_adv) || !unit(self.cfl_diff) {
            return config("CFL numbers must lie in (0, 1]");
        }
        if !(self.boundary_guard >= T::zero()) {
            return config("boundary guard must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T> {
    pub field: Field<T>,
    pub t: T,
    pub step_count: usize,
    pub dt_last: T,
    pub guard_violations: usize,
}

impl<T: Scalar> SolverState<T> {
    pub fn new(field: Field<T>) -> Self {
        let t = field.time();
        Self {
            field,
            t,
            step_count: 0,
            dt_last: T::zero(),
            guard_violations: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct PowerTerm<T> {
    kappa: T,
    /// `kappa + 1`, the factor in `|dh/du|`.
    slope: T,
}

/// Discretization of one problem on one grid, with face velocities and
/// scratch buffers cached between steps.
#[derive(Clone, Debug)]
pub struct Scheme<T> {
    grid: Grid<T>,
    alpha: T,
    mu: TimeFunction<T>,
    f_term: Option<PowerTerm<T>>,
    g_term: Option<(PowerTerm<T>, [T; 2])>,
    /// Normal velocity on x-faces, `(nx + 1) * ny`, face-major within rows.
    bx: Vec<T>,
    /// Normal velocity on y-faces, `nx * (ny + 1)`.
    by: Vec<T>,
    b_max: [T; 2],
    pow_f: Vec<T>,
    flux_f: Vec<T>,
    pow_g: Vec<T>,
    flux_g: Vec<T>,
    phi: Vec<T>,
    stage: Vec<T>,
    rhs: Vec<T>,
}

#[derive(Clone, Copy)]
struct Terms {
    advection: bool,
    diffusion: bool,
}

impl<T: Scalar> Scheme<T> {
    pub fn new(grid: Grid<T>, advection: &AdvectionSpec<T>, alpha: T, mu: TimeFunction<T>) -> Result<Self> {
        advection.validate()?;
        if !(alpha > T::zero()) {
            return config(format!("alpha must be positive, got {alpha}"));
        }
        let [nx, ny] = grid.cells();
        let (f_term, bx, by) = match &advection.kind {
            AdvectionKind::Zero => (None, vec![T::zero(); (nx + 1) * ny], vec![T::zero(); nx * (ny + 1)]),
            AdvectionKind::PowerLaw(p) => {
                let mut bx = vec![T::zero(); (nx + 1) * ny];
                for iy in 0..ny {
                    for fx in 1..nx {
                        bx[iy * (nx + 1) + fx] = p.velocity.eval(grid.face_midpoint(0, fx, iy), T::zero())[0];
                    }
                }
                let mut by = vec![T::zero(); nx * (ny + 1)];
                if grid.dim() == 2 {
                    for fy in 1..ny {
                        for ix in 0..nx {
                            by[fy * nx + ix] = p.velocity.eval(grid.face_midpoint(1, fy, ix), T::zero())[1];
                        }
                    }
                }
                let term = PowerTerm {
                    kappa: p.kappa,
                    slope: p.kappa + T::one(),
                };
                (Some(term), bx, by)
            }
        };
        let max_abs = |v: &[T]| v.iter().fold(T::zero(), |m, b| m.max(b.abs()));
        let b_max = [max_abs(&bx), max_abs(&by)];
        let mut g_term = advection.g.as_ref().map(|g| {
            (
                PowerTerm {
                    kappa: g.kappa,
                    slope: g.kappa + T::one(),
                },
                g.c,
            )
        });
        if grid.dim() == 1 {
            if let Some((_, c)) = g_term.as_mut() {
                c[1] = T::zero();
            }
        }
        let n = grid.len();
        Ok(Self {
            grid,
            alpha,
            mu,
            f_term,
            g_term,
            bx,
            by,
            b_max,
            pow_f: vec![T::zero(); n],
            flux_f: vec![T::zero(); n],
            pow_g: vec![T::zero(); n],
            flux_g: vec![T::zero(); n],
            phi: vec![T::zero(); n],
            stage: vec![T::zero(); n],
            rhs: vec![T::zero(); n],
        })
    }

    pub fn for_problem(problem: &ProblemSpec<T>, grid: Grid<T>) -> Result<Self> {
        problem.validate()?;
        if problem.dim != grid.dim() {
            return config(format!("problem is {}-D but the grid is {}-D", problem.dim, grid.dim()));
        }
        Self::new(
            grid,
            &problem.advection,
            problem.diffusion.alpha,
            problem.diffusion.mu.clone(),
        )
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Global bound on `|dh/du|` over all faces and axes for the given state.
    pub fn max_wave_speed(&self, u: &[T]) -> T {
        let umax = u.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut lambda = T::zero();
        for axis in 0..self.grid.dim() {
            let mut l = T::zero();
            if let Some(f) = self.f_term {
                l = l + self.b_max[axis] * f.slope * umax.abs_pow(f.kappa);
            }
            if let Some((g, c)) = self.g_term {
                l = l + c[axis].abs() * g.slope * umax.abs_pow(g.kappa);
            }
            lambda = lambda.max(l);
        }
        lambda
    }

    /// Explicit step limit. The advective and diffusive limits are combined
    /// harmonically, so their CFL fractions add up to at most
    /// `max(n cfl_adv, cfl_diff)`. Returns `cap` when nothing moves.
    pub fn stable_dt(&self, u: &[T], t: T, cfg: &SchemeConfig<T>, cap: T) -> T {
        let h = self.grid.h_min();
        let n = T::lit(self.grid.dim() as f64);
        let umax = u.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let lambda = self.max_wave_speed(u);
        let diff_rate = (n + n) * self.mu.eval(t) * umax.abs_pow(self.alpha) / (h * h);
        let inv_dt = lambda / (cfg.cfl_adv * h) + diff_rate / cfg.cfl_diff;
        if inv_dt > T::zero() {
            (T::one() / inv_dt).min(cap)
        } else {
            cap
        }
    }

    fn prepare(&mut self, u: &[T]) {
        if let Some(f) = self.f_term {
            for ((p, s), &v) in self.pow_f.iter_mut().zip(self.flux_f.iter_mut()).zip(u) {
                *p = v.abs_pow(f.kappa);
                *s = *p * v;
            }
        }
        if let Some((g, _)) = self.g_term {
            for ((p, s), &v) in self.pow_g.iter_mut().zip(self.flux_g.iter_mut()).zip(u) {
                *p = v.abs_pow(g.kappa);
                *s = *p * v;
            }
        }
        let scale = (self.alpha + T::one()).recip();
        for (p, &v) in self.phi.iter_mut().zip(u) {
            *p = v.abs_pow(self.alpha) * v * scale;
        }
    }

    /// Net flux through the face between cells `l` and `r` (positive toward `r`).
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn face_flux(&self, u: &[T], l: usize, r: usize, b: T, axis: usize, diff_coef: T, terms: Terms) -> T {
        let half = T::lit(0.5);
        let mut flux = T::zero();
        if terms.advection {
            let jump = u[r] - u[l];
            if let Some(f) = self.f_term {
                let lambda = b.abs() * f.slope * self.pow_f[l].max(self.pow_f[r]);
                flux = flux + half * (b * (self.flux_f[l] + self.flux_f[r]) - lambda * jump);
            }
            if let Some((g, c)) = self.g_term {
                let cn = c[axis];
                let lambda = cn.abs() * g.slope * self.pow_g[l].max(self.pow_g[r]);
                flux = flux + half * (cn * (self.flux_g[l] + self.flux_g[r]) - lambda * jump);
            }
        }
        if terms.diffusion {
            flux = flux - diff_coef * (self.phi[r] - self.phi[l]);
        }
        flux
    }

    /// Fills `out` with `-div_h F` for the selected flux terms.
    fn divergence(&mut self, u: &[T], t: T, terms: Terms, out: &mut [T]) {
        self.prepare(u);
        out.iter_mut().for_each(|v| *v = T::zero());
        let g = self.grid;
        let [nx, ny] = g.cells();
        let h = g.h();
        let mu = self.mu.eval(t);
        for iy in 0..ny {
            let row = iy * nx;
            let inv_h = h[0].recip();
            let coef = mu * inv_h;
            for fx in 1..nx {
                let (l, r) = (row + fx - 1, row + fx);
                let b = self.bx[iy * (nx + 1) + fx];
                let fl = self.face_flux(u, l, r, b, 0, coef, terms) * inv_h;
                out[l] = out[l] - fl;
                out[r] = out[r] + fl;
            }
        }
        if g.dim() == 2 {
            let inv_h = h[1].recip();
            let coef = mu * inv_h;
            for fy in 1..ny {
                for ix in 0..nx {
                    let (l, r) = ((fy - 1) * nx + ix, fy * nx + ix);
                    let b = self.by[fy * nx + ix];
                    let fl = self.face_flux(u, l, r, b, 1, coef, terms) * inv_h;
                    out[l] = out[l] - fl;
                    out[r] = out[r] + fl;
                }
            }
        }
    }

    /// `mu(t) Lap_h Phi(u)`.
    pub fn diffusion_rhs(&mut self, u: &[T], t: T) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        self.divergence(
            u,
            t,
            Terms {
                advection: false,
                diffusion: true,
            },
            &mut out,
        );
        out
    }

    /// `div_h (f + g)` with the local Lax-Friedrichs face flux.
    pub fn advection_rhs(&mut self, u: &[T], t: T) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        self.divergence(
            u,
            t,
            Terms {
                advection: true,
                diffusion: false,
            },
            &mut out,
        );
        out.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// Full semi-discrete right-hand side `diffusion - advection`.
    pub fn total_rhs(&mut self, u: &[T], t: T) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        self.divergence(
            u,
            t,
            Terms {
                advection: true,
                diffusion: true,
            },
            &mut out,
        );
        out
    }

    fn euler_into(&mut self, u: &[T], t: T, dt: T, out: &mut Vec<T>) {
        let mut rhs = std::mem::take(&mut self.rhs);
        self.divergence(
            u,
            t,
            Terms {
                advection: true,
                diffusion: true,
            },
            &mut rhs,
        );
        out.clear();
        out.extend(u.iter().zip(&rhs).map(|(&v, &r)| v + dt * r));
        self.rhs = rhs;
    }

    /// Advances `state` by `dt`. The caller keeps `dt` within [`Scheme::stable_dt`].
    pub fn step(&mut self, state: &mut SolverState<T>, cfg: &SchemeConfig<T>, dt: T) -> Result<()> {
        let t = state.t;
        let mut next = std::mem::take(&mut self.stage);
        match cfg.integrator {
            Integrator::Euler => self.euler_into(state.field.values(), t, dt, &mut next),
            Integrator::Heun => {
                self.euler_into(state.field.values(), t, dt, &mut next);
                let mut second = Vec::with_capacity(next.len());
                self.euler_into(&next, t + dt, dt, &mut second);
                let half = T::lit(0.5);
                for ((n, &u0), &u2) in next.iter_mut().zip(state.field.values()).zip(&second) {
                    *n = half * (u0 + u2);
                }
            }
        }
        let limit = T::lit(BLOW_UP_THRESHOLD);
        let mut umax = T::zero();
        for (i, &v) in next.iter().enumerate() {
            if !v.is_finite() || v.abs() > limit {
                self.stage = next;
                return Err(Error::BlowUp {
                    time: (t + dt).as_f64(),
                    cell: i,
                    value: v.as_f64(),
                });
            }
            umax = umax.max(v.abs());
        }
        let values = state.field.values_mut();
        values.copy_from_slice(&next);
        self.stage = next;
        state.t = t + dt;
        state.field.set_time(state.t);
        state.step_count += 1;
        state.dt_last = dt;
        if self.ring_max(state.field.values()) > cfg.boundary_guard * umax {
            state.guard_violations += 1;
        }
        Ok(())
    }

    fn ring_max(&self, u: &[T]) -> T {
        let [nx, ny] = self.grid.cells();
        let mut m = T::zero();
        if self.grid.dim() == 1 {
            return u[0].abs().max(u[nx - 1].abs());
        }
        for ix in 0..nx {
            m = m.max(u[ix].abs()).max(u[(ny - 1) * nx + ix].abs());
        }
        for iy in 0..ny {
            m = m.max(u[iy * nx].abs()).max(u[iy * nx + nx - 1].abs());
        }
        m
    }
}

/// `mu_t Lap_h Phi(u)` as a field-shaped increment.
pub fn diffusion_rhs<T: Scalar>(field: &Field<T>, alpha: T, mu_t: T) -> Result<Field<T>> {
    let mut s = Scheme::new(
        *field.grid(),
        &AdvectionSpec::none(),
        alpha,
        TimeFunction::Constant(mu_t),
    )?;
    Field::from_values(
        *field.grid(),
        s.diffusion_rhs(field.values(), field.time()),
        field.time(),
    )
}

/// `div_h (f + g)` as a field-shaped increment.
pub fn advection_rhs<T: Scalar>(field: &Field<T>, spec: &AdvectionSpec<T>, t: T) -> Result<Field<T>> {
    let mut s = Scheme::new(*field.grid(), spec, T::one(), TimeFunction::Constant(T::one()))?;
    Field::from_values(*field.grid(), s.advection_rhs(field.values(), t), field.time())
}

pub fn stable_dt<T: Scalar>(
    state: &SolverState<T>,
    problem: &ProblemSpec<T>,
    cfg: &SchemeConfig<T>,
    cap: T,
) -> Result<T> {
    let s = Scheme::for_problem(problem, *state.field.grid())?;
    Ok(s.stable_dt(state.field.values(), state.t, cfg, cap))
}

pub fn step<T: Scalar>(
    state: &SolverState<T>,
    problem: &ProblemSpec<T>,
    cfg: &SchemeConfig<T>,
    dt: T,
) -> Result<SolverState<T>> {
    let mut s = Scheme::for_problem(problem, *state.field.grid())?;
    let mut next = state.clone();
    s.step(&mut next, cfg, dt)?;
    Ok(next)
}

/// Integrates `problem` on `grid` from its start time over `settings.horizon`,
/// recording diagnostics at every output time. `observer` sees each recorded
/// snapshot. Blow-up ends the run early with the report flagged.
pub fn run<T: Scalar>(
    problem: &ProblemSpec<T>,
    grid: Grid<T>,
    cfg: &SchemeConfig<T>,
    settings: &RunSettings<T>,
    mut observer: impl FnMut(&Field<T>, &RunReport<T>),
) -> Result<RunReport<T>> {
    cfg.validate()?;
    settings.validate()?;
    let mut scheme = Scheme::for_problem(problem, grid)?;
    let t0 = problem.start_time();
    let mut field = problem.initial.sample(&grid)?;
    field.set_time(t0);
    let mut state = SolverState::new(field);
    let alpha = problem.diffusion.alpha;

    // Catalog velocities are steady and the u-dependence of the power-law
    // flux cancels, so F is sampled once on a dense lattice over the box.
    let lattice = grid.with_cells(grid.cells()[0].max(F_SAMPLING_CELLS))?;
    let f_const = empirical_f(&problem.advection, &lattice, t0, T::one())?;
    let forcing = |_t: T, _u: &Field<T>| -> Result<T> { Ok(f_const) };

    let mut report = RunReport::new(settings.exponents.clone())?;
    let f0 = forcing(t0, &state.field)?;
    report.update(&state.field, T::zero(), f0, problem.diffusion.mu.eval(t0), alpha)?;
    observer(&state.field, &report);

    let end = t0 + settings.horizon;
    let mut k = 0usize;
    let mut last_output = t0;
    while state.t < end {
        k += 1;
        let target = (t0 + T::lit(k as f64) * settings.output_interval).min(end);
        while state.t < target {
            let remaining = target - state.t;
            let dt = scheme.stable_dt(state.field.values(), state.t, cfg, remaining);
            // Land exactly on the output time.
            let dt = if dt >= remaining { remaining } else { dt };
            match scheme.step(&mut state, cfg, dt) {
                Ok(()) => {}
                Err(Error::BlowUp { time, cell, .. }) => {
                    report.flags.blow_up = Some((state.t.as_f64(), time, cell));
                    report.steps = state.step_count;
                    report.guard_violations = state.guard_violations;
                    report.flags.boundary_contaminated = state.guard_violations > 0;
                    return Ok(report);
                }
                Err(e) => return Err(e),
            }
            if dt == remaining {
                state.t = target;
                state.field.set_time(target);
            }
        }
        let f_t = forcing(state.t, &state.field)?;
        report.update(
            &state.field,
            state.t - last_output,
            f_t,
            problem.diffusion.mu.eval(state.t),
            alpha,
        )?;
        last_output = state.t;
        observer(&state.field, &report);
    }
    report.steps = state.step_count;
    report.guard_violations = state.guard_violations;
    report.flags.boundary_contaminated = state.guard_violations > 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VelocityField;
    use crate::scenarios::{exact_barenblatt, InitialDatum};

    fn field_1d(values: &[f64], lo: f64, hi: f64) -> Field<f64> {
        let g = Grid::new_1d(lo, hi, values.len()).unwrap();
        Field::from_values(g, values.to_vec(), 0.0).unwrap()
    }

    fn diffusion_problem(dim: usize, alpha: f64) -> ProblemSpec<f64> {
        ProblemSpec {
            advection: AdvectionSpec::none(),
            diffusion: crate::model::DiffusionSpec::new(alpha, TimeFunction::Constant(1.0)),
            initial: InitialDatum::CanonicalBump { amplitude: 1.0 },
            dim,
        }
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi(0.0, 1.3), 0.0);
        assert_eq!(phi(2.0, 1.0), 2.0);
        assert!((phi::<f64>(-1.0, 2.0) + 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn diffusion_of_constant_is_zero() {
        let g = Grid::cube(2, -1.0, 1.0, 6).unwrap();
        let f = Field::from_fn(g, 0.0, |_| 0.7);
        let inc = diffusion_rhs(&f, 1.5, 2.0).unwrap();
        assert!(inc.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diffusion_of_spike_matches_hand_stencil() {
        // Phi = u^2/2 = [0, 0, 1/2, 0, 0], h = 1, no-flux ends.
        let f = field_1d(&[0.0, 0.0, 1.0, 0.0, 0.0], 0.0, 5.0);
        let inc = diffusion_rhs(&f, 1.0, 1.0).unwrap();
        assert_eq!(inc.values(), &[0.0, 0.5, -1.0, 0.5, 0.0]);
        let inc = diffusion_rhs(&f, 1.0, 3.0).unwrap();
        assert_eq!(inc.values(), &[0.0, 1.5, -3.0, 1.5, 0.0]);
    }

    #[test]
    fn advection_of_zero_is_zero() {
        let g = Grid::cube(2, -4.0, 4.0, 8).unwrap();
        let spec = AdvectionSpec::power_law(VelocityField::Fig1 { eps: 1e-4 }, 1.0).with_g([1.0, 2.0], 0.5);
        let inc = advection_rhs(&Field::zeros(g), &spec, 0.0).unwrap();
        assert!(inc.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_velocity_linear_flux_is_upwind() {
        let vals: Vec<f64> = (0..8).map(|i| (-(i as f64 - 3.5).powi(2) / 3.0).exp()).collect();
        let f = field_1d(&vals, 0.0, 2.0);
        let h = 0.25;
        for c in [2.0, -1.5] {
            let spec = AdvectionSpec::power_law(VelocityField::Constant([c, 0.0]), 0.0);
            let inc = advection_rhs(&f, &spec, 0.0).unwrap();
            // Upwind oracle: interior face i+1/2 carries c * u_upwind; walls carry nothing.
            let mut face = [0.0; 9];
            for k in 1..8 {
                face[k] = if c > 0.0 { c * vals[k - 1] } else { c * vals[k] };
            }
            for i in 0..8 {
                let expected = (face[i + 1] - face[i]) / h;
                assert!((inc.values()[i] - expected).abs() < 1e-14, "c={c} i={i}");
            }
        }
    }

    #[test]
    fn fused_rhs_is_diffusion_minus_advection() {
        let g = Grid::<f64>::cube(2, -2.0, 2.0, 10).unwrap();
        let f = Field::from_fn(g, 0.0, |x| (x[0] * 1.3).sin() + 0.5 * x[1]);
        let spec = AdvectionSpec::power_law(VelocityField::Fig1 { eps: 1e-2 }, 1.0).with_g([0.3, -0.2], 2.0);
        let mut s = Scheme::new(g, &spec, 1.5, TimeFunction::Constant(0.7)).unwrap();
        let d = s.diffusion_rhs(f.values(), 0.0);
        let a = s.advection_rhs(f.values(), 0.0);
        let total = s.total_rhs(f.values(), 0.0);
        for i in 0..g.len() {
            assert!((total[i] - (d[i] - a[i])).abs() < 1e-12 * (1.0 + d[i].abs() + a[i].abs()));
        }
    }

    #[test]
    fn stable_dt_cases() {
        let g = Grid::cube(2, 0.0, 0.8, 8).unwrap();
        let zero = SolverState::new(Field::zeros(g));
        let cfg = SchemeConfig::default();
        assert_eq!(stable_dt(&zero, &diffusion_problem(2, 1.0), &cfg, 0.05).unwrap(), 0.05);

        // h = 0.1, max|u| = 1, mu = 1, n = 2 -> 0.4 * 0.01 / 4.
        let mut f = Field::zeros(g);
        f.values_mut()[10] = 1.0;
        f.values_mut()[11] = -0.5;
        let dt = stable_dt(&SolverState::new(f), &diffusion_problem(2, 1.0), &cfg, 1.0).unwrap();
        assert!((dt - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn stable_dt_fig1_initial_state() {
        let scenario: crate::Scenario<f64> = crate::scenarios::build("fig1", &[]).unwrap();
        let g = scenario.grid;
        let u0 = scenario.problem.initial.sample(&g).unwrap();
        let cfg = SchemeConfig::default();
        let dt = stable_dt(&SolverState::new(u0.clone()), &scenario.problem, &cfg, 1.0).unwrap();

        // Independent evaluation: max normal velocity over interior face midpoints.
        let h = 8.0 / 128.0;
        let mut bmax: f64 = 0.0;
        for j in 0..128 {
            for k in 1..128 {
                let along = -4.0 + k as f64 * h;
                let across = -4.0 + (j as f64 + 0.5) * h;
                let r2 = along * along + across * across;
                let s = r2 / (1e-4 + r2 * r2 / 4.0);
                bmax = bmax.max(s * along.abs());
            }
        }
        let umax = u0.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let adv_rate = bmax * 2.0 * umax / (0.4 * h);
        let diff_rate = 4.0 * umax / (h * h) / 0.4;
        let expected = 1.0 / (adv_rate + diff_rate);
        assert!((dt - expected).abs() < 1e-12 * expected, "{dt} vs {expected}");
    }

    #[test]
    fn zero_and_constants_are_fixed_points() {
        let g = Grid::cube(2, -1.0, 1.0, 8).unwrap();
        let cfg = SchemeConfig::default();
        let p = diffusion_problem(2, 1.0);
        let zero = SolverState::new(Field::zeros(g));
        let next = step(&zero, &p, &cfg, 0.1).unwrap();
        assert_eq!(next.field.values(), zero.field.values());
        assert_eq!(next.t, 0.1);

        let c = SolverState::new(Field::from_fn(g, 0.0, |_| 2.5));
        let dt = stable_dt(&c, &p, &cfg, 1.0).unwrap();
        let next = step(&c, &p, &cfg, dt).unwrap();
        assert_eq!(next.field.values(), c.field.values());
        assert_eq!(next.step_count, 1);

        let mut heun = cfg;
        heun.integrator = Integrator::Heun;
        let next = step(&c, &p, &heun, dt).unwrap();
        assert_eq!(next.field.values(), c.field.values());
    }

    #[test]
    fn barenblatt_step_moves_toward_exact_solution() {
        let g = Grid::new_1d(-3.0, 3.0, 256).unwrap();
        let t0 = 0.1;
        let exact = |t: f64| Field::from_fn(g, t, |x| exact_barenblatt(x, t, 1.0, 1.0, 1).unwrap());
        let u0 = exact(t0);
        let mut p = diffusion_problem(1, 1.0);
        p.initial = InitialDatum::Barenblatt {
            mass: 1.0,
            t0,
            alpha: 1.0,
        };
        let cfg = SchemeConfig::default();
        let state = SolverState::new(u0.clone());
        let dt = stable_dt(&state, &p, &cfg, 1.0).unwrap();
        let next = step(&state, &p, &cfg, dt).unwrap();
        let target = exact(t0 + dt);
        let l1 = |a: &Field<f64>, b: &Field<f64>| {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                * g.h()[0]
        };
        let frozen = l1(&u0, &target);
        let stepped = l1(&next.field, &target);
        assert!(stepped < 0.1 * frozen, "stepped {stepped:e} frozen {frozen:e}");
    }

    #[test]
    fn overflow_is_reported_as_blow_up() {
        let g = Grid::cube(2, -1.0, 1.0, 6).unwrap();
        let mut f = Field::zeros(g);
        f.values_mut()[14] = 2e100;
        let err = step(
            &SolverState::new(f),
            &diffusion_problem(2, 1.0),
            &SchemeConfig::default(),
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BlowUp { cell: 14, .. }));
    }

    #[test]
    fn mass_in_outer_ring_counts_as_guard_violation() {
        let g = Grid::cube(2, -1.0, 1.0, 6).unwrap();
        let mut f = Field::zeros(g);
        f.values_mut()[0] = 1.0;
        let s = SolverState::new(f);
        let p = diffusion_problem(2, 1.0);
        let cfg = SchemeConfig::default();
        let dt = stable_dt(&s, &p, &cfg, 1.0).unwrap();
        assert_eq!(step(&s, &p, &cfg, dt).unwrap().guard_violations, 1);
    }

    #[test]
    fn run_with_zero_horizon_records_initial_snapshot_only() {
        let scenario: crate::Scenario<f64> =
            crate::scenarios::build("pure_diffusion_2d", &[("horizon".into(), "0".into())]).unwrap();
        let out = scenario.run(vec![], |_, _| {}).unwrap();
        assert_eq!(out.report.times, vec![0.0]);
        assert_eq!(out.report.steps, 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn increments_telescope(values in proptest::collection::vec(-2.0..2.0f64, 64), alpha in 0.2..3.0f64, kappa in 0.0..2.0f64) {
                let g = Grid::cube(2, -2.0, 2.0, 8).unwrap();
                let f = Field::from_values(g, values, 0.0).unwrap();
                let spec = AdvectionSpec::power_law(VelocityField::Fig1 { eps: 1e-4 }, kappa).with_g([0.5, -1.0], 1.0);
                let vol = g.cell_volume();
                for inc in [diffusion_rhs(&f, alpha, 1.3).unwrap(), advection_rhs(&f, &spec, 0.0).unwrap()] {
                    let sum: f64 = inc.values().iter().sum::<f64>() * vol;
                    let scale: f64 = inc.values().iter().map(|v| v.abs()).sum::<f64>() * vol;
                    prop_assert!(sum.abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE));
                }
            }
        }
    }
}
