//! Cell data at one time level, discrete norms, and snapshot CSV I/O.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{domain, Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;
use crate::solver::phi;

/// Values of `u` on every cell of a grid at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid<T>,
    values: Vec<T>,
    time: T,
}

impl<T: Scalar> Field<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
            time: T::zero(),
        }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>, time: T) -> Result<Self> {
        if values.len() != grid.len() {
            return domain(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.len()
            ));
        }
        if time < T::zero() {
            return domain("field time must be nonnegative");
        }
        Ok(Self { grid, values, time })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid<T>, time: T, f: impl Fn([T; 2]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self { grid, values, time }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn set_time(&mut self, t: T) {
        self.time = t;
    }

    /// First cell holding NaN/Inf, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| c * v).collect(),
            time: self.time,
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Discrete `L^q` norm with midpoint quadrature; `q = inf` gives the max norm.
    pub fn lq_norm(&self, q: T) -> Result<T> {
        if q.is_nan() || q < T::one() {
            return domain(format!("norm exponent must be >= 1, got {q}"));
        }
        let vol = self.grid.cell_volume();
        if q.is_infinite() {
            return Ok(self.max_abs());
        }
        if q == T::one() {
            return Ok(self.values.iter().map(|v| v.abs()).sum::<T>() * vol);
        }
        // Scale by the max so large exponents cannot overflow.
        let m = self.max_abs();
        if m == T::zero() {
            return Ok(T::zero());
        }
        let s: T = self.values.iter().map(|v| (v.abs() / m).powf(q)).sum();
        Ok(m * (s * vol).powf(q.recip()))
    }

    /// Signed integral `sum u_i h^n`.
    pub fn mass(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    /// Discrete `int |grad Phi(u)|^2 dx` with `Phi(u) = |u|^alpha u / (alpha + 1)`,
    /// summed over interior faces; mirrored boundary faces contribute nothing.
    pub fn grad_sq_phi(&self, alpha: T) -> Result<T> {
        if !(alpha > T::zero()) {
            return domain(format!("alpha must be positive, got {alpha}"));
        }
        let g = &self.grid;
        let [nx, ny] = g.cells();
        let h = g.h();
        let p: Vec<T> = self.values.iter().map(|&u| phi(u, alpha)).collect();
        let mut total = T::zero();
        for iy in 0..ny {
            for ix in 0..nx.saturating_sub(1) {
                let i = g.index(ix, iy);
                let d = (p[i + 1] - p[i]) / h[0];
                total = total + d * d;
            }
        }
        if g.dim() == 2 {
            for iy in 0..ny.saturating_sub(1) {
                for ix in 0..nx {
                    let i = g.index(ix, iy);
                    let d = (p[i + nx] - p[i]) / h[1];
                    total = total + d * d;
                }
            }
        }
        Ok(total * g.cell_volume())
    }

    /// Writes `x[,y],u` rows in storage order with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.grid.dim() == 2 {
            w.write_record(["x", "y", "u"])?;
        } else {
            w.write_record(["x", "u"])?;
        }
        for (i, &u) in self.values.iter().enumerate() {
            let c = self.grid.center(i);
            let u = format_full(u);
            if self.grid.dim() == 2 {
                w.write_record([format_full(c[0]), format_full(c[1]), u])?;
            } else {
                w.write_record([format_full(c[0]), u])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a snapshot written by [`Field::write_csv`] onto `grid`. Rows must
    /// match the grid's cell centers in storage order.
    pub fn read_csv<R: Read>(grid: Grid<T>, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let expected: &[&str] = if grid.dim() == 2 { &["x", "y", "u"] } else { &["x", "u"] };
        let headers = r.headers()?.clone();
        let found: Vec<&str> = headers.iter().map(str::trim).collect();
        if found != expected {
            return domain(format!("expected header {expected:?}, found {found:?}"));
        }
        let h = grid.h();
        let mut values = Vec::with_capacity(grid.len());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if row >= grid.len() {
                return domain(format!("snapshot has more than {} rows", grid.len()));
            }
            let nums = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Domain(format!("row {row}: {e}")))?;
            let c = grid.center(row);
            for a in 0..grid.dim() {
                if (nums[a] - c[a].as_f64()).abs() > 0.25 * h[a].as_f64() {
                    return domain(format!("row {row} is not at cell center {c:?}"));
                }
            }
            values.push(T::lit(nums[grid.dim()]));
        }
        Self::from_values(grid, values, T::zero())
    }

    pub fn load_csv(grid: Grid<T>, path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(grid, std::io::BufReader::new(file))
    }
}

/// Full-precision rendering used by every CSV writer in the crate.
pub fn format_full<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize) -> Grid<f64> {
        Grid::cube(2, 0.0, 1.0, n).unwrap()
    }

    #[test]
    fn zero_field_norms_vanish() {
        let f = Field::zeros(unit_square(8));
        for q in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(f.lq_norm(q).unwrap(), 0.0);
        }
        assert_eq!(f.mass(), 0.0);
        assert_eq!(f.grad_sq_phi(1.0).unwrap(), 0.0);
    }

    #[test]
    fn indicator_on_unit_square() {
        let f = Field::from_fn(unit_square(8), 0.0, |_| 1.0);
        for q in [1.0, 2.0, f64::INFINITY] {
            assert!((f.lq_norm(q).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!((f.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn l2_norm_of_index_sum_matches_direct_summation() {
        // Direct oracle: sum_{i,j<8} (i+j)^2 = 2*8*140 + 2*28^2 = 3808, times h^2 = 1/64.
        let g = unit_square(8);
        let mut f = Field::zeros(g);
        for iy in 0..8 {
            for ix in 0..8 {
                f.values_mut()[g.index(ix, iy)] = (ix + iy) as f64;
            }
        }
        let expected = (3808.0_f64 / 64.0).sqrt();
        assert!((f.lq_norm(2.0).unwrap() - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn signed_mass_matches_summation() {
        use rand::{Rng, SeedableRng};
        let g = unit_square(16);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..g.len())
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let mut acc = 0.0;
        for v in &vals {
            acc += v;
        }
        let f = Field::from_values(g, vals, 0.0).unwrap();
        assert!((f.mass() - acc / 256.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_exponents() {
        let f = Field::zeros(unit_square(4));
        assert!(f.lq_norm(0.5).is_err());
        assert!(f.lq_norm(f64::NAN).is_err());
        assert!(f.grad_sq_phi(0.0).is_err());
        assert!(f.grad_sq_phi(-1.0).is_err());
    }

    #[test]
    fn grad_sq_phi_four_cell_hand_computation() {
        // u(x) = x on [0,1], four cells: centers 1/8, 3/8, 5/8, 7/8.
        // alpha = 1: Phi = u^2/2 -> 1/128, 9/128, 25/128, 49/128.
        // Face differences 8/128, 16/128, 24/128, divided by h = 1/4:
        // 1/4, 1/2, 3/4; squares sum to 14/16, times h = 1/4 -> 7/32.
        let g = Grid::<f64>::new_1d(0.0, 1.0, 4).unwrap();
        let f = Field::from_fn(g, 0.0, |x| x[0]);
        assert!((f.grad_sq_phi(1.0).unwrap() - 7.0 / 32.0).abs() < 1e-15);
        // alpha = 2: Phi = u^3/3 -> (1, 27, 125, 343)/1536; differences
        // (26, 98, 218)/1536 * 4; sum of squares * 1/4.
        let d = [26.0_f64, 98.0, 218.0].map(|v| v / 1536.0 * 4.0);
        let expected = d.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!((f.grad_sq_phi(2.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_field_has_no_gradient() {
        let f = Field::from_fn(unit_square(6), 0.0, |_| 3.0);
        assert_eq!(f.grad_sq_phi(1.5).unwrap(), 0.0);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let g = Grid::<f64>::cube(2, -1.0, 1.0, 5).unwrap();
        let f = Field::from_fn(g, 0.0, |x| (x[0] * 3.1).sin() / 7.0 + x[1]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,u\n"));
        assert_eq!(text.lines().count(), 26);
        let back = Field::read_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn csv_rejects_wrong_grid() {
        let g = Grid::new_1d(0.0, 1.0, 4).unwrap();
        let f = Field::from_fn(g, 0.0, |x| x[0]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let other = Grid::new_1d(0.0, 2.0, 4).unwrap();
        assert!(Field::read_csv(other, buf.as_slice()).is_err());
    }

    fn field_from(values: Vec<f64>, n: usize) -> Field<f64> {
        Field::from_values(Grid::cube(2, -1.0, 1.0, n).unwrap(), values, 0.0).unwrap()
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn norms_are_absolutely_homogeneous(
                values in prop::collection::vec(-10.0f64..10.0, 64),
                c in prop_oneof![-50.0f64..-1e-3, 1e-3f64..50.0],
                q in prop_oneof![Just(1.0f64), Just(2.0), Just(3.5), Just(f64::INFINITY), 1.0f64..20.0],
            ) {
                let f = field_from(values, 8);
                let lhs = f.scaled(c).lq_norm(q).unwrap();
                let rhs = c.abs() * f.lq_norm(q).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.max(f64::MIN_POSITIVE), "{lhs} vs {rhs}");
            }

            #[test]
            fn mass_equals_l1_for_nonnegative_fields(values in prop::collection::vec(0.0f64..10.0, 36)) {
                let f = field_from(values, 6);
                let m = f.mass();
                let l1 = f.lq_norm(1.0).unwrap();
                prop_assert!((m - l1).abs() <= 1e-13 * l1.max(f64::MIN_POSITIVE));
            }
        }
    }

    #[test]
    fn high_q_norms_approach_the_max_norm() {
        let g = Grid::cube(2, -1.0, 1.0, 64).unwrap();
        let gap = |f: &dyn Fn([f64; 2]) -> f64, q: f64| {
            let field = Field::from_fn(g, 0.0, f);
            let max = field.lq_norm(f64::INFINITY).unwrap();
            (max - field.lq_norm(q).unwrap()).abs() / max
        };
        let gaussian = |x: [f64; 2]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let wave = |x: [f64; 2]| 2.0 + (3.0 * x[0]).sin() * (2.0 * x[1]).cos();
        for q in [64.0, 128.0] {
            assert!(gap(&gaussian, q) < 0.05);
            assert!(gap(&wave, q) < 0.05);
        }
        // A sharper peak converges more slowly: about 5.03% at q = 64.
        let peaked = |x: [f64; 2]| (std::f64::consts::PI * x[0]).cos().powi(2) * (1.0 - x[1] * x[1]);
        assert!(gap(&peaked, 64.0) < 0.06);
        assert!(gap(&peaked, 128.0) < 0.03);
    }
}
