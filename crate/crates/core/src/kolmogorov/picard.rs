use crate::error::{Error, Result};
use crate::model::SemiMarkovModel;

use super::generator::{contraction_constant, Generator};
use super::grid::{Grid, ValueField};

/// Distances between successive iterates of a Picard run.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardLog {
    pub beta: f64,
    /// `max{2α, 2L√α, L'}` for the model and generator of the run.
    pub contraction_constant: f64,
    /// `‖w_{k+1} − w_k‖_β`
    pub distances: Vec<f64>,
    /// Unweighted `sup |w_{k+1} − w_k|`, used for the stopping rule.
    pub sup_distances: Vec<f64>,
    /// Weighted distances below this are rounding noise: `1e3·ε·max(1, sup|w|)`.
    pub noise_floor: f64,
}

impl PicardLog {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    /// Successive ratios `d_{k+1} / d_k` of the weighted distances, while both lie
    /// above the noise floor.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .take_while(|w| w[1] > self.noise_floor)
            .map(|w| w[1] / w[0])
            .collect()
    }

    /// Rate bound `C/β` promised by the contraction estimate.
    pub fn rate_bound(&self) -> f64 {
        self.contraction_constant / self.beta
    }
}

/// Weighted sup norm `sup_{t,x,a} e^{−β(T−t)} |v − w|`.
pub fn weighted_distance(v: &ValueField, w: &ValueField, beta: f64) -> f64 {
    let g = *v.grid();
    (0..=g.steps)
        .map(|i| {
            let weight = (-beta * (g.horizon - g.time(i))).exp();
            let sup = v
                .slice(i)
                .iter()
                .zip(w.slice(i))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            weight * sup
        })
        .fold(0.0, f64::max)
}

/// Transport of the terminal condition along characteristics, with the same top-row
/// closure as the backward scheme.
fn transported_terminal(grid: Grid, n: usize, terminal: &dyn Fn(usize, f64) -> f64) -> ValueField {
    let mut out = ValueField::zeros(grid, n);
    for x in 0..n {
        for (j, v) in out.row_mut(grid.steps, x).iter_mut().enumerate() {
            *v = terminal(x, grid.age(j));
        }
    }
    for i in (0..grid.steps).rev() {
        for x in 0..n {
            for j in 0..=grid.ages {
                let v = out.get(i + 1, x, (j + 1).min(grid.ages));
                out.set(i, x, j, v);
            }
        }
    }
    out
}

/// One application of the fixed-point map: transported terminal plus the trapezoidal
/// integral of `Lw + f(w)` along each characteristic.
fn picard_map(
    model: &SemiMarkovModel,
    generator: &dyn Generator,
    transport: &ValueField,
    w: &ValueField,
) -> ValueField {
    let grid = *w.grid();
    let n = model.num_states();
    let width = grid.ages + 1;
    let mut integrand = ValueField::zeros(grid, n);
    let mut z = vec![0.0; n];
    for i in 0..=grid.steps {
        let t = grid.time(i);
        let slice = w.slice(i);
        for x in 0..n {
            for j in 0..width {
                let a = grid.age(j);
                let wv = slice[x * width + j];
                let (rate, row) = model.rate_and_row(x, a);
                let mut lw = 0.0;
                for y in 0..n {
                    z[y] = slice[y * width] - wv;
                    lw += row[y] * z[y];
                }
                integrand.set(i, x, j, rate * lw + generator.eval(t, x, a, wv, &z));
            }
        }
    }
    let mut acc = ValueField::zeros(grid, n);
    let half = 0.5 * grid.dt;
    for i in (0..grid.steps).rev() {
        for x in 0..n {
            for j in 0..width {
                let jn = (j + 1).min(grid.ages);
                let v = acc.get(i + 1, x, jn)
                    + half * (integrand.get(i, x, j) + integrand.get(i + 1, x, jn));
                acc.set(i, x, j, v);
            }
        }
    }
    let mut out = transport.clone();
    for i in 0..=grid.steps {
        for x in 0..n {
            for (o, a) in out.row_mut(i, x).iter_mut().zip(acc.row(i, x)) {
                *o += a;
            }
        }
    }
    out
}

/// Fixed-point iteration `w ↦ Γ(w)` of the integral form of the equation, started
/// from the transported terminal condition and stopped once the unweighted sup
/// distance between iterates drops below `tol`. The weighted norm makes early time
/// rows tiny, so it is logged but not used to stop.
#[allow(clippy::too_many_arguments)]
pub fn solve_picard(
    model: &SemiMarkovModel,
    generator: &dyn Generator,
    terminal: &dyn Fn(usize, f64) -> f64,
    horizon: f64,
    dt: f64,
    a_max: f64,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ValueField, PicardLog)> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {tol}")));
    }
    let constant = contraction_constant(model, generator);
    if !(beta > constant) {
        return Err(Error::Config(format!(
            "beta = {beta} must exceed the contraction constant {constant}"
        )));
    }
    let grid = Grid::new(horizon, dt, a_max)?;
    let n = model.num_states();
    let transport = transported_terminal(grid, n, terminal);
    let mut log = PicardLog {
        beta,
        contraction_constant: constant,
        distances: Vec::new(),
        sup_distances: Vec::new(),
        noise_floor: 0.0,
    };
    let mut w = transport.clone();
    for _ in 0..max_iter {
        let next = picard_map(model, generator, &transport, &w);
        if let Some(k) = next.values().iter().position(|v| !v.is_finite()) {
            let width = grid.ages + 1;
            return Err(Error::Numerical {
                i: k / (n * width),
                state: (k / width) % n,
                j: k % width,
                message: "non-finite Picard iterate".into(),
            });
        }
        log.distances.push(weighted_distance(&next, &w, beta));
        let d = next.sup_distance(&w);
        log.sup_distances.push(d);
        w = next;
        if d < tol {
            let scale = w.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            log.noise_floor = 1e3 * f64::EPSILON * scale;
            return Ok((w, log));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        distance: log.sup_distances.last().copied().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kolmogorov::backward::solve_backward;
    use crate::kolmogorov::generator::GeneratorSpec;
    use crate::piecewise::PiecewiseConstant;

    fn swap() -> SemiMarkovModel {
        SemiMarkovModel::new(
            vec!["a".into(), "b".into()],
            vec![
                PiecewiseConstant::new(vec![0.0, 0.6], vec![1.8, 0.3]).unwrap(),
                PiecewiseConstant::constant(1.7),
            ],
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn large_beta_still_converges_at_early_times() {
        // with β·T ≈ 50 the weighted norm hides the t = 0 rows entirely
        let m = swap();
        let gen = GeneratorSpec::new(
            |_, x, _, _, z: &[f64]| (x as f64 - 0.5) + 2.0 * z[1 - x].min(0.0),
            2.0,
            0.0,
        );
        let terminal = |x: usize, a: f64| if x == 0 { a.min(1.0) } else { -0.5 };
        let dt = 0.01;
        let v = solve_backward(&m, &gen, &terminal, 1.0, dt, 0.5).unwrap();
        let (w, log) = solve_picard(&m, &gen, &terminal, 1.0, dt, 0.5, 50.0, 1e-10, 500).unwrap();
        assert!(*log.sup_distances.last().unwrap() < 1e-10);
        assert!(v.sup_distance(&w) < 2.0 * dt, "{}", v.sup_distance(&w));
        assert!(log.ratios().iter().all(|&q| q <= log.rate_bound() + 0.05));
    }

    #[test]
    fn rejects_small_beta_and_reports_nonconvergence() {
        let m = swap();
        let gen = GeneratorSpec::new(|_, x, _, _, _: &[f64]| x as f64, 0.0, 0.0);
        let terminal = |_: usize, _: f64| 0.0;
        assert!(matches!(
            solve_picard(&m, &gen, &terminal, 1.0, 0.1, 0.0, 1.0, 1e-10, 10),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            solve_picard(&m, &gen, &terminal, 1.0, 0.1, 0.0, 10.0, 1e-300, 2),
            Err(Error::NonConvergence { .. })
        ));
    }
}
