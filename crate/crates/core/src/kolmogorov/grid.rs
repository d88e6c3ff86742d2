//! Characteristic-aligned `(t, a)` grids with `Δt = Δa`.
//!
//! Off-grid values are read with piecewise-linear interpolation on the triangles
//! obtained by cutting every grid cell along its diagonal. The diagonal is the
//! characteristic direction `(1, 1)`, so along a characteristic the interpolant is
//! linear between the two diagonal neighbours and never mixes in off-diagonal nodes.

use crate::error::{Error, Result};
use crate::simulate::Segment;

const SNAP: f64 = 1e-9;

/// Grid geometry: `N` time steps of size `dt` over `[0, T]`, ages `0..=J` with `J·dt ≥ a_max + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dt: f64,
    pub steps: usize,
    pub ages: usize,
    pub horizon: f64,
    pub a_max: f64,
}

impl Grid {
    pub fn new(horizon: f64, dt: f64, a_max: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(dt > 0.0) || dt > horizon {
            return Err(Error::Config(format!("dt must be in (0, T], got {dt}")));
        }
        if !(a_max >= 0.0) || !a_max.is_finite() {
            return Err(Error::Config(format!(
                "a_max must be nonnegative, got {a_max}"
            )));
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > SNAP * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "dt = {dt} does not divide T = {horizon}"
            )));
        }
        let ages = ((a_max + horizon) / dt - SNAP).ceil().max(steps);
        Ok(Self {
            dt,
            steps: steps as usize,
            ages: ages as usize,
            horizon,
            a_max,
        })
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    #[inline]
    pub fn age(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn max_age(&self) -> f64 {
        self.age(self.ages)
    }

    /// Local times in `(seg.start, seg.end)` where global time `t_offset + s` or the age
    /// crosses a grid line. Between consecutive crossings the interpolant is linear.
    pub fn push_crossings(&self, seg: &Segment, t_offset: f64, cuts: &mut Vec<f64>) {
        let dt = self.dt;
        let t0 = t_offset + seg.start;
        let t1 = t_offset + seg.end;
        let mut k = (t0 / dt).floor() + 1.0;
        while k * dt < t1 {
            cuts.push(k * dt - t_offset);
            k += 1.0;
        }
        let a0 = seg.age;
        let a1 = seg.age_at(seg.end);
        let mut k = (a0 / dt).floor() + 1.0;
        while k * dt < a1 {
            cuts.push(seg.start + (k * dt - a0));
            k += 1.0;
        }
    }
}

/// A function `v(t, x, a)` sampled on a [`Grid`]: `values[i][x][j] = v(i·dt, x, j·dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    grid: Grid,
    states: usize,
    values: Vec<f64>,
}

impl ValueField {
    pub fn zeros(grid: Grid, states: usize) -> Self {
        Self {
            grid,
            states,
            values: vec![0.0; (grid.steps + 1) * states * (grid.ages + 1)],
        }
    }

    /// Fills every node with `f(t, x, a)`.
    pub fn from_fn(grid: Grid, states: usize, f: impl Fn(f64, usize, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, states);
        for i in 0..=grid.steps {
            for x in 0..states {
                for (j, v) in out.row_mut(i, x).iter_mut().enumerate() {
                    *v = f(grid.time(i), x, grid.age(j));
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    #[inline]
    fn index(&self, i: usize, x: usize, j: usize) -> usize {
        (i * self.states + x) * (self.grid.ages + 1) + j
    }

    #[inline]
    pub fn get(&self, i: usize, x: usize, j: usize) -> f64 {
        self.values[self.index(i, x, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, x: usize, j: usize, v: f64) {
        let k = self.index(i, x, j);
        self.values[k] = v;
    }

    /// Ages `0..=J` of state `x` at time index `i`.
    pub fn row(&self, i: usize, x: usize) -> &[f64] {
        let k = self.index(i, x, 0);
        &self.values[k..k + self.grid.ages + 1]
    }

    pub fn row_mut(&mut self, i: usize, x: usize) -> &mut [f64] {
        let k = self.index(i, x, 0);
        let len = self.grid.ages + 1;
        &mut self.values[k..k + len]
    }

    /// All states at time index `i`, state-major.
    pub fn slice(&self, i: usize) -> &[f64] {
        let len = self.states * (self.grid.ages + 1);
        &self.values[i * len..(i + 1) * len]
    }

    /// Mutable slice at `i` together with the read-only slice at `i + 1`.
    pub(crate) fn slice_pair_mut(&mut self, i: usize) -> (&mut [f64], &[f64]) {
        let len = self.states * (self.grid.ages + 1);
        let (head, tail) = self.values.split_at_mut((i + 1) * len);
        (&mut head[i * len..], &tail[..len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sup |self − other|` over all nodes.
    pub fn sup_distance(&self, other: &ValueField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Interpolated `v(t, x, a)`.
    pub fn eval(&self, t: f64, x: usize, a: f64) -> Result<f64> {
        let g = &self.grid;
        if x >= self.states {
            return Err(Error::Domain(format!("state index {x} out of range")));
        }
        if !(t >= -SNAP * g.horizon && t <= g.horizon * (1.0 + SNAP)) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                g.horizon
            )));
        }
        if !(a >= -SNAP && a <= g.max_age() * (1.0 + SNAP)) {
            return Err(Error::Domain(format!(
                "age {a} outside the grid [0, {}] (raise a_max)",
                g.max_age()
            )));
        }
        Ok(self.eval_unchecked(t, x, a))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64, x: usize, a: f64) -> f64 {
        let g = &self.grid;
        let u = (t / g.dt).max(0.0);
        let w = (a / g.dt).max(0.0);
        let i = (u.floor() as usize).min(g.steps - 1);
        let j = (w.floor() as usize).min(g.ages - 1);
        let p = (u - i as f64).clamp(0.0, 1.0);
        let q = (w - j as f64).clamp(0.0, 1.0);
        let v00 = self.get(i, x, j);
        let v11 = self.get(i + 1, x, j + 1);
        // difference form keeps constants exact
        if p >= q {
            let v10 = self.get(i + 1, x, j);
            v00 + p * (v10 - v00) + q * (v11 - v10)
        } else {
            let v01 = self.get(i, x, j + 1);
            v00 + q * (v01 - v00) + p * (v11 - v01)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = Grid::new(1.0, 0.25, 0.3).unwrap();
        assert_eq!(g.steps, 4);
        assert_eq!(g.ages, 6); // ceil(1.3 / 0.25)
        assert!(Grid::new(1.0, 0.3, 0.0).is_err());
        assert_eq!(Grid::new(1.0, 1e-3, 0.0).unwrap().steps, 1000);
    }

    #[test]
    fn interpolation_reproduces_affine_functions() {
        let g = Grid::new(1.0, 0.1, 0.5).unwrap();
        let f = |t: f64, x: usize, a: f64| 2.0 * t - 0.5 * a + x as f64;
        let v = ValueField::from_fn(g, 2, f);
        for &(t, a) in &[
            (0.0, 0.0),
            (0.33, 0.71),
            (0.95, 1.2),
            (0.5, 0.05),
            (1.0, 1.5),
        ] {
            assert!((v.eval(t, 1, a).unwrap() - f(t, 1, a)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_along_diagonal_uses_diagonal_neighbours() {
        let g = Grid::new(1.0, 0.5, 0.0).unwrap();
        let mut v = ValueField::zeros(g, 1);
        v.set(0, 0, 0, 1.0);
        v.set(1, 0, 1, 3.0);
        v.set(1, 0, 0, 100.0);
        v.set(0, 0, 1, -100.0);
        assert!((v.eval(0.25, 0, 0.25).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn off_grid_is_domain_error() {
        let g = Grid::new(1.0, 0.1, 0.0).unwrap();
        let v = ValueField::zeros(g, 1);
        assert!(matches!(v.eval(0.5, 0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(v.eval(1.5, 0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(v.eval(0.5, 3, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn crossings_cover_time_and_age_lines() {
        let g = Grid::new(1.0, 0.25, 0.0).unwrap();
        let seg = Segment {
            start: 0.1,
            end: 0.6,
            state: 0,
            age: 0.05,
        };
        let mut cuts = Vec::new();
        g.push_crossings(&seg, 0.0, &mut cuts);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [0.25, 0.3, 0.5, 0.55];
        assert_eq!(cuts.len(), expect.len());
        for (c, e) in cuts.iter().zip(expect) {
            assert!((c - e).abs() < 1e-12);
        }
    }
}
