//! Run-time diagnostics: norm histories, running suprema, the space-time
//! energy integral, and audits of the L1 decay and the sup-norm estimate.

use std::io::Write;
use std::path::Path;

use crate::error::{config, domain, Result};
use crate::field::{format_full, Field};
use crate::scalar::Scalar;

/// Output schedule of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings<T> {
    pub horizon: T,
    pub output_interval: T,
    /// Extra finite `L^p` exponents to track besides 1, 2 and infinity.
    pub exponents: Vec<T>,
}

impl<T: Scalar> RunSettings<T> {
    pub fn new(horizon: T, output_interval: T) -> Self {
        Self {
            horizon,
            output_interval,
            exponents: Vec::new(),
        }
    }

    pub fn with_exponents(mut self, exponents: Vec<T>) -> Self {
        self.exponents = exponents;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= T::zero()) || !self.horizon.is_finite() {
            return config("horizon must be finite and nonnegative");
        }
        if !(self.output_interval > T::zero()) {
            return config("output interval must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunFlags {
    /// `(last valid time, failing time, cell)` of the first non-finite or overflowing value.
    pub blow_up: Option<(f64, f64, usize)>,
    pub boundary_contaminated: bool,
}

impl RunFlags {
    pub fn any(&self) -> bool {
        self.blow_up.is_some() || self.boundary_contaminated
    }
}

/// Time series of diagnostics sampled at output times.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport<T> {
    /// Tracked exponents: `1, 2, p..., inf`.
    exponents: Vec<T>,
    /// Exponent reported in the `lp`/`Up` columns.
    pub primary_p: T,
    pub times: Vec<T>,
    /// `norms[k][j]` is the norm at `times[k]` for `exponents[j]`.
    pub norms: Vec<Vec<T>>,
    /// Running suprema of `norms` up to and including `times[k]`.
    pub sup_norms: Vec<Vec<T>>,
    pub mass: Vec<T>,
    /// Right-endpoint accumulation of `int_0^t int |grad Phi(u)|^2`.
    pub energy_cum: Vec<T>,
    /// `F(t)` sampled on the grid at each output time.
    pub forcing: Vec<T>,
    /// Running supremum of `F / mu`.
    pub f_mu: Vec<T>,
    pub flags: RunFlags,
    pub steps: usize,
    pub guard_violations: usize,
}

impl<T: Scalar> RunReport<T> {
    /// `extra` lists finite exponents `p >= 1` to track besides 1, 2 and infinity.
    /// The first extra exponent (default 2) feeds the `lp` column.
    pub fn new(extra: Vec<T>) -> Result<Self> {
        let mut exponents = vec![T::one(), T::lit(2.0)];
        for &p in &extra {
            if !(p >= T::one()) || !p.is_finite() {
                return domain(format!("tracked exponent must be finite and >= 1, got {p}"));
            }
            if !exponents.contains(&p) {
                exponents.push(p);
            }
        }
        exponents.push(T::infinity());
        Ok(Self {
            exponents,
            primary_p: extra.first().copied().unwrap_or(T::lit(2.0)),
            times: Vec::new(),
            norms: Vec::new(),
            sup_norms: Vec::new(),
            mass: Vec::new(),
            energy_cum: Vec::new(),
            forcing: Vec::new(),
            f_mu: Vec::new(),
            flags: RunFlags::default(),
            steps: 0,
            guard_violations: 0,
        })
    }

    pub fn exponents(&self) -> &[T] {
        &self.exponents
    }

    fn slot(&self, q: T) -> Option<usize> {
        self.exponents.iter().position(|&e| e == q)
    }

    /// History of `||u(t_k)||_q`; `None` if `q` is not tracked.
    pub fn norm_series(&self, q: T) -> Option<Vec<T>> {
        let j = self.slot(q)?;
        Some(self.norms.iter().map(|row| row[j]).collect())
    }

    /// History of `U_q(t_k) = max_{i <= k} ||u(t_i)||_q`.
    pub fn sup_series(&self, q: T) -> Option<Vec<T>> {
        let j = self.slot(q)?;
        Some(self.sup_norms.iter().map(|row| row[j]).collect())
    }

    /// Appends one output time. `dt_elapsed` is the time since the previous
    /// record (zero for the first one).
    pub fn update(&mut self, field: &Field<T>, dt_elapsed: T, f_t: T, mu_t: T, alpha: T) -> Result<()> {
        if !(mu_t > T::zero()) {
            return domain(format!("mu must be positive, got {mu_t}"));
        }
        if let Some(i) = field.first_non_finite() {
            return domain(format!("field is not finite at cell {i}"));
        }
        let norms = self
            .exponents
            .iter()
            .map(|&q| field.lq_norm(q))
            .collect::<Result<Vec<T>>>()?;
        let sups = match self.sup_norms.last() {
            Some(prev) => prev.iter().zip(&norms).map(|(&a, &b)| a.max(b)).collect(),
            None => norms.clone(),
        };
        let ratio = f_t / mu_t;
        let f_mu = self.f_mu.last().map_or(ratio, |&prev| prev.max(ratio));
        let energy = self.energy_cum.last().copied().unwrap_or(T::zero()) + dt_elapsed * field.grad_sq_phi(alpha)?;
        self.times.push(field.time());
        self.norms.push(norms);
        self.sup_norms.push(sups);
        self.mass.push(field.mass());
        self.energy_cum.push(energy);
        self.forcing.push(f_t);
        self.f_mu.push(f_mu);
        Ok(())
    }

    /// `max_t ||u(t)||_1` over the recorded times.
    pub fn m1(&self) -> T {
        self.sup_norms.last().map_or(T::zero(), |row| row[0])
    }

    /// `max_t ||u(t)||_inf` over the recorded times.
    pub fn minf(&self) -> T {
        self.sup_norms.last().map_or(T::zero(), |row| row[row.len() - 1])
    }

    pub fn linf_series(&self) -> Vec<T> {
        self.norm_series(T::infinity()).unwrap_or_default()
    }

    pub fn l1_series(&self) -> Vec<T> {
        self.norm_series(T::one()).unwrap_or_default()
    }

    /// Writes the `diagnostics.csv` table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "l1",
            "l2",
            "lp",
            "linf",
            "mass",
            "energy_cum",
            "U1",
            "Up",
            "Uinf",
            "Fmu",
        ])?;
        let jp = self.slot(self.primary_p).unwrap_or(1);
        let last = self.exponents.len() - 1;
        for k in 0..self.times.len() {
            let n = &self.norms[k];
            let s = &self.sup_norms[k];
            let row = [
                self.times[k],
                n[0],
                n[1],
                n[jp],
                n[last],
                self.mass[k],
                self.energy_cum[k],
                s[0],
                s[jp],
                s[last],
                self.f_mu[k],
            ];
            w.write_record(row.iter().map(|&v| format_full(v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Exponent pair `(p, sigma)` accepted by the sup-norm estimate, with
/// `a = n (kappa - alpha)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissiblePair<T> {
    pub p: T,
    pub sigma: T,
    pub a: T,
    pub kappa: T,
    pub alpha: T,
    pub n: usize,
}

/// Negative part `max(-s, 0)`.
#[inline]
pub fn negative_part<T: Scalar>(s: T) -> T {
    (-s).max(T::zero())
}

/// `p >= 1`, `p > n (kappa - alpha)`, `sigma > 1` and
/// `sigma >= max(2/p, 1 + (2 kappa - alpha)_- / p)`.
pub fn admissible<T: Scalar>(p: T, sigma: T, kappa: T, alpha: T, n: usize) -> bool {
    let a = T::lit(n as f64) * (kappa - alpha);
    let two = T::lit(2.0);
    let bound = (two / p).max(T::one() + negative_part(two * kappa - alpha) / p);
    p >= T::one() && p > a && sigma > T::one() && sigma >= bound
}

impl<T: Scalar> AdmissiblePair<T> {
    pub fn new(p: T, sigma: T, kappa: T, alpha: T, n: usize) -> Result<Self> {
        if !admissible(p, sigma, kappa, alpha, n) {
            return domain(format!(
                "(p, sigma) = ({p}, {sigma}) is not admissible for n = {n}, kappa = {kappa}, alpha = {alpha}: \
                 need p >= 1, p > n (kappa - alpha), sigma > 1, sigma >= max(2/p, 1 + (2 kappa - alpha)_-/p)"
            ));
        }
        let a = T::lit(n as f64) * (kappa - alpha);
        Ok(Self {
            p,
            sigma,
            a,
            kappa,
            alpha,
            n,
        })
    }
}

/// Ratio series `U_inf(t) / max(||u0||_inf, F_mu(t)^(n/(p-a)) U_p(t)^(p/(p-a)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRatio<T> {
    /// One entry per output time; `None` where the denominator underflows.
    pub values: Vec<Option<T>>,
    /// Supremum of the series (the empirical constant).
    pub empirical_k: T,
    pub t_of_sup: T,
}

impl<T: Scalar> EstimateRatio<T> {
    pub fn all_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite()) && self.empirical_k.is_finite()
    }
}

/// Smallest denominator for which a ratio is reported.
pub const RATIO_DENOMINATOR_FLOOR: f64 = 1e-300;

pub fn linf_estimate_ratio<T: Scalar>(
    report: &RunReport<T>,
    pair: &AdmissiblePair<T>,
    u0_inf: T,
) -> Result<EstimateRatio<T>> {
    if !admissible(pair.p, pair.sigma, pair.kappa, pair.alpha, pair.n) {
        return domain("exponent pair violates the admissibility constraints");
    }
    let up = report
        .sup_series(pair.p)
        .ok_or_else(|| crate::Error::Domain(format!("exponent p = {} is not tracked by the report", pair.p)))?;
    let uinf = report.sup_series(T::infinity()).unwrap_or_default();
    let gap = pair.p - pair.a;
    let e_f = T::lit(pair.n as f64) / gap;
    let e_u = pair.p / gap;
    let floor = T::lit(RATIO_DENOMINATOR_FLOOR);
    let mut out = EstimateRatio {
        values: Vec::with_capacity(uinf.len()),
        empirical_k: T::zero(),
        t_of_sup: T::zero(),
    };
    for k in 0..uinf.len() {
        let growth = if report.f_mu[k] == T::zero() {
            T::zero()
        } else {
            report.f_mu[k].powf(e_f) * up[k].powf(e_u)
        };
        let denom = u0_inf.max(growth);
        if !(denom >= floor) {
            out.values.push(None);
            continue;
        }
        let r = uinf[k] / denom;
        if r > out.empirical_k || out.values.iter().all(Option::is_none) {
            out.empirical_k = r;
            out.t_of_sup = report.times[k];
        }
        out.values.push(Some(r));
    }
    Ok(out)
}

/// Result of the output-to-output L1 decay check.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayCheck<T> {
    pub pass: bool,
    /// Largest (tolerance-free) increment and the index of the later time.
    pub worst_increment: T,
    pub worst_index: usize,
}

/// Allowed L1 increase per output interval, relative to `||u0||_1`.
pub const L1_DECAY_TOL: f64 = 1e-8;

pub fn check_l1_decay<T: Scalar>(report: &RunReport<T>) -> Result<DecayCheck<T>> {
    let l1 = report.l1_series();
    check_nonincreasing(&l1, T::lit(L1_DECAY_TOL) * l1.first().copied().unwrap_or(T::zero()))
}

/// Checks that `series[k+1] <= series[k] + slack` for every consecutive pair.
pub fn check_nonincreasing<T: Scalar>(series: &[T], slack: T) -> Result<DecayCheck<T>> {
    if series.len() < 2 {
        return domain("need at least two output times");
    }
    let mut worst = (T::neg_infinity(), 1);
    for k in 1..series.len() {
        let inc = series[k] - series[k - 1];
        if inc > worst.0 {
            worst = (inc, k);
        }
    }
    Ok(DecayCheck {
        pass: worst.0 <= slack,
        worst_increment: worst.0,
        worst_index: worst.1,
    })
}

/// Per-interval relative max-norm check: `||u(t_{k+1})||_inf <= (1 + rel) ||u(t_k)||_inf`.
pub fn check_linf_nonincreasing<T: Scalar>(report: &RunReport<T>, rel: T) -> Result<DecayCheck<T>> {
    let s = report.linf_series();
    if s.len() < 2 {
        return domain("need at least two output times");
    }
    let mut worst = (T::neg_infinity(), 1);
    let mut pass = true;
    for k in 1..s.len() {
        let inc = s[k] - s[k - 1];
        if inc > rel * s[k - 1] {
            pass = false;
        }
        if inc > worst.0 {
            worst = (inc, k);
        }
    }
    Ok(DecayCheck {
        pass,
        worst_increment: worst.0,
        worst_index: worst.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn worked_admissibility_examples() {
        assert!(admissible(2.0, 1.01, 1.0, 1.0, 2));
        assert!(!admissible(2.0, 1.01, 2.0, 1.0, 2));
        assert!(!admissible(2.0, 5.0, 2.0, 1.0, 2));
        assert!(admissible(1.0, 2.0, 0.0, 1.0, 1));
        assert!(!admissible(1.0, 1.5, 0.0, 1.0, 1));
        assert!(!admissible(1.0, 1.5, 1.0, 1.0, 2));
        assert!(!admissible(0.5, 5.0, 0.0, 1.0, 1));
        assert!(AdmissiblePair::new(2.0, 1.01, 1.0, 1.0, 2).is_ok());
        assert!(AdmissiblePair::new(1.0, 1.5, 1.0, 1.0, 2).is_err());
    }

    fn synthetic_report(values: &[f64]) -> RunReport<f64> {
        let g = Grid::cube(2, 0.0, 1.0, 4).unwrap();
        let mut r = RunReport::new(vec![]).unwrap();
        for (k, &c) in values.iter().enumerate() {
            let mut f = Field::from_fn(g, k as f64, |_| c);
            f.set_time(k as f64);
            r.update(&f, if k == 0 { 0.0 } else { 1.0 }, 0.0, 1.0, 1.0).unwrap();
        }
        r
    }

    #[test]
    fn first_record_is_singleton_sup() {
        let r = synthetic_report(&[0.7]);
        assert_eq!(r.sup_series(1.0).unwrap(), r.norm_series(1.0).unwrap());
        assert!((r.sup_series(1.0).unwrap()[0] - 0.7).abs() < 1e-15);
        assert_eq!(r.sup_series(f64::INFINITY).unwrap(), vec![0.7]);
        assert_eq!(r.energy_cum, vec![0.0]);
    }

    #[test]
    fn zero_stream_stays_zero() {
        let r = synthetic_report(&[0.0, 0.0, 0.0]);
        for row in r.norms.iter().chain(&r.sup_norms) {
            assert!(row.iter().all(|&v| v == 0.0));
        }
        assert!(r.energy_cum.iter().all(|&v| v == 0.0));
        assert!(r.mass.iter().all(|&v| v == 0.0));
        assert!(check_l1_decay(&r).unwrap().pass);
    }

    #[test]
    fn running_max_matches_scan() {
        let vals = [0.5, 2.0, 1.0];
        let r = synthetic_report(&vals);
        // Constant fields on the unit square: every norm equals the constant.
        let mut scan = Vec::new();
        let mut m = f64::NEG_INFINITY;
        for v in vals {
            m = m.max(v);
            scan.push(m);
        }
        for q in [1.0, 2.0, f64::INFINITY] {
            let s = r.sup_series(q).unwrap();
            for (a, b) in s.iter().zip(&scan) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        assert!((r.m1() - 2.0).abs() < 1e-14);
        assert!((r.minf() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn l1_decay_flags_injected_increase() {
        let r = synthetic_report(&[1.0, 0.9, 0.95, 0.5]);
        let c = check_l1_decay(&r).unwrap();
        assert!(!c.pass);
        assert_eq!(c.worst_index, 2);
        assert!((c.worst_increment - 0.05).abs() < 1e-12);
        assert!(check_l1_decay(&synthetic_report(&[1.0])).is_err());
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let g = Grid::cube(2, 0.0, 1.0, 4).unwrap();
        let mut r = RunReport::new(vec![]).unwrap();
        let f = Field::zeros(g);
        assert!(r.update(&f, 0.0, 0.0, 0.0, 1.0).is_err());
        let mut bad = Field::zeros(g);
        bad.values_mut()[3] = f64::NAN;
        assert!(r.update(&bad, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(RunReport::new(vec![0.5]).is_err());
    }

    #[test]
    fn ratio_without_forcing_is_sup_over_initial() {
        let r = synthetic_report(&[1.0, 0.8, 0.6]);
        let pair = AdmissiblePair::new(2.0, 1.01, 1.0, 1.0, 2).unwrap();
        let ratio = linf_estimate_ratio(&r, &pair, 1.0).unwrap();
        assert_eq!(ratio.values, vec![Some(1.0), Some(1.0), Some(1.0)]);
        assert_eq!(ratio.empirical_k, 1.0);
        let untracked = AdmissiblePair::new(3.0, 1.01, 1.0, 1.0, 2).unwrap();
        assert!(linf_estimate_ratio(&r, &untracked, 1.0).is_err());
    }

    #[test]
    fn ratio_uses_growth_term_when_larger() {
        let g = Grid::cube(2, 0.0, 1.0, 4).unwrap();
        let mut r = RunReport::<f64>::new(vec![4.0]).unwrap();
        let f = Field::from_fn(g, 0.0, |_| 2.0);
        r.update(&f, 0.0, 3.0, 1.0, 1.0).unwrap();
        // n = 2, kappa = 2, alpha = 1 -> a = 2, p = 4: F^(2/2) U_4^(4/2) = 3 * 4 = 12.
        let pair = AdmissiblePair::new(4.0, 2.0, 2.0, 1.0, 2).unwrap();
        let ratio = linf_estimate_ratio(&r, &pair, 2.0).unwrap();
        assert!((ratio.empirical_k as f64 - 2.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn ratio_skips_vanishing_denominators() {
        let r = synthetic_report(&[0.0, 0.0]);
        let pair = AdmissiblePair::new(2.0, 1.01, 1.0, 1.0, 2).unwrap();
        let ratio = linf_estimate_ratio(&r, &pair, 0.0).unwrap();
        assert_eq!(ratio.values, vec![None, None]);
    }

    #[test]
    fn csv_has_mandated_header() {
        let r = synthetic_report(&[1.0, 0.5]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,l1,l2,lp,linf,mass,energy_cum,U1,Up,Uinf,Fmu");
        assert_eq!(lines.count(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn admissibility_is_monotone_in_sigma(
                p in 0.5..8.0f64, sigma in 0.5..4.0f64, extra in 0.0..5.0f64,
                kappa in 0.0..3.0f64, alpha in 0.05..3.0f64, n in 1usize..3,
            ) {
                if admissible(p, sigma, kappa, alpha, n) {
                    prop_assert!(admissible(p, sigma + extra, kappa, alpha, n));
                }
            }
        }
    }
}
