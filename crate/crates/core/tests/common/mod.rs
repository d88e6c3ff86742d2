//! Helpers shared by the integration tests: random models and problems, closed
//! forms computed independently of the library, and a path integrator.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smctrl::control::StepTable;
use smctrl::kolmogorov::Grid;
use smctrl::{ControlProblem, GridPolicy, PiecewiseConstant, SemiMarkovModel, Trajectory};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

/// A step function with up to `max_segments` pieces, breaks in `(0, 1.5)` and values in `[lo, hi]`.
pub fn random_step(r: &mut ChaCha8Rng, max_segments: usize, lo: f64, hi: f64) -> PiecewiseConstant {
    let m = r.random_range(1..=max_segments);
    let mut breaks: Vec<f64> = (1..m).map(|_| r.random_range(0.05..1.5)).collect();
    breaks.push(0.0);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let values = breaks.iter().map(|_| r.random_range(lo..hi)).collect();
    PiecewiseConstant::new(breaks, values).unwrap()
}

fn random_row(r: &mut ChaCha8Rng, n: usize, x: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n)
        .map(|y| {
            if y == x {
                0.0
            } else {
                r.random_range(0.05..1.0)
            }
        })
        .collect();
    let s: f64 = row.iter().sum();
    for p in &mut row {
        *p /= s;
    }
    // force the row sum to 1 up to rounding of the last entry
    let last = if x == n - 1 { n - 2 } else { n - 1 };
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|(y, _)| *y != last)
        .map(|(_, p)| p)
        .sum();
    row[last] = 1.0 - rest;
    row
}

/// A model with `2..=4` states and age-dependent hazards and kernels.
pub fn random_model(r: &mut ChaCha8Rng, max_hazard: f64) -> SemiMarkovModel {
    let n = r.random_range(2..=4);
    let mut hazards = Vec::new();
    let mut kernels = Vec::new();
    for x in 0..n {
        let h = random_step(r, 3, 0.0, max_hazard);
        kernels.push((0..h.segments()).map(|_| random_row(r, n, x)).collect());
        hazards.push(h);
    }
    SemiMarkovModel::new(names(n), hazards, kernels, None).unwrap()
}

/// A step table in `(t, a)` with values in `[lo, hi]`.
pub fn random_table(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> StepTable {
    let tb = if r.random_bool(0.5) {
        vec![0.0]
    } else {
        vec![0.0, r.random_range(0.1..0.9)]
    };
    let ab = if r.random_bool(0.5) {
        vec![0.0]
    } else {
        vec![0.0, r.random_range(0.1..1.2)]
    };
    let values = (0..tb.len() * ab.len())
        .map(|_| r.random_range(lo..hi))
        .collect();
    StepTable::new(tb, ab, values).unwrap()
}

/// A problem on `model` with random tabulated rates in `[0, C_r]`, costs and terminal values.
pub fn random_problem(r: &mut ChaCha8Rng, model: &SemiMarkovModel, horizon: f64) -> ControlProblem {
    let n = model.num_states();
    let m = r.random_range(1..=3);
    let c_r: f64 = r.random_range(1.5..3.0);
    let rate = (0..m * n * n).map(|_| random_table(r, 0.0, c_r)).collect();
    let running = (0..m * n).map(|_| random_table(r, -0.5, 1.0)).collect();
    let terminal = (0..n)
        .map(|_| {
            let ab = vec![0.0, r.random_range(0.2..1.5)];
            StepTable::new(
                vec![0.0],
                ab,
                vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)],
            )
            .unwrap()
        })
        .collect();
    ControlProblem::from_tables(
        (0..m).map(|u| format!("u{u}")).collect(),
        n,
        c_r,
        horizon,
        rate,
        running,
        terminal,
    )
    .unwrap()
}

/// A feedback law with independent random actions on the nodes of a coarse grid.
pub fn random_policy(
    r: &mut ChaCha8Rng,
    problem: &ControlProblem,
    dt: f64,
    a_max: f64,
) -> GridPolicy {
    let grid = Grid::new(problem.horizon(), dt, a_max).unwrap();
    let n = problem.num_states();
    let m = problem.actions().len();
    let nodes = (grid.steps + 1) * n * (grid.ages + 1);
    GridPolicy::from_actions(
        grid,
        n,
        (0..nodes).map(|_| Some(r.random_range(0..m))).collect(),
    )
    .unwrap()
}

/// Closed forms of the four-state example with unit hazard, `c = min(1, α)` and `τ = T − s`.
pub mod example {
    /// Value in `x2` at time `s`: `c(1 − e^{−τ})`.
    pub fn y1(alpha: f64, horizon: f64, s: f64) -> f64 {
        alpha.min(1.0) * (1.0 - (-(horizon - s)).exp())
    }

    /// Value in `x1` at time `s`: `c(1 − e^{−τ} − τe^{−τ})`.
    pub fn y0(alpha: f64, horizon: f64, s: f64) -> f64 {
        let tau = horizon - s;
        alpha.min(1.0) * (1.0 - (-tau).exp() - tau * (-tau).exp())
    }

    /// RK4 solution of `y0' = −λ1(a+s)(y1(s) − y0)`, `y0(T) = 0`, for a general
    /// hazard in `x1` and the given `y1(s) = y1(s, s)`. Steps land on every time in
    /// `cuts`, where the right-hand side may jump or kink.
    pub fn y0_ode(
        lambda1: impl Fn(f64) -> f64,
        y1: impl Fn(f64) -> f64,
        horizon: f64,
        cuts: &[f64],
        steps: usize,
    ) -> f64 {
        let mut knots: Vec<f64> = cuts
            .iter()
            .copied()
            .filter(|&c| c > 0.0 && c < horizon)
            .collect();
        knots.push(0.0);
        knots.push(horizon);
        knots.sort_by(|a, b| b.partial_cmp(a).unwrap());
        knots.dedup();
        let rhs = |s: f64, y: f64| -lambda1(s) * (y1(s) - y);
        let mut y = 0.0;
        for w in knots.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            let m = ((hi - lo) / horizon * steps as f64).ceil().max(1.0) as usize;
            let h = (hi - lo) / m as f64;
            // sample strictly inside the piece so the one-sided values are used
            let inside = |s: f64| s.clamp(lo + 1e-14, hi - 1e-14);
            let f = |s: f64, y: f64| rhs(inside(s), y);
            for k in 0..m {
                let s = hi - k as f64 * h;
                let k1 = f(s, y);
                let k2 = f(s - h / 2.0, y - h / 2.0 * k1);
                let k3 = f(s - h / 2.0, y - h / 2.0 * k2);
                let k4 = f(s - h, y - h * k3);
                y -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        y
    }
}

/// `∫_from^H h(s, state, age) ds` along a path, cut at the lines of `grid` and at the
/// hazard breaks, with 5-point Gauss–Legendre on each piece.
pub fn path_integral(
    traj: &Trajectory,
    grid: &Grid,
    model: &SemiMarkovModel,
    t_offset: f64,
    from: f64,
    h: impl Fn(f64, usize, f64) -> f64,
) -> f64 {
    const NODES: [(f64, f64); 5] = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let mut total = 0.0;
    for seg in traj.segments() {
        if seg.end <= from {
            continue;
        }
        let mut cuts = vec![seg.start.max(from), seg.end];
        grid.push_crossings(&seg, t_offset, &mut cuts);
        for &b in model.age_breaks(seg.state) {
            cuts.push(seg.start + (b - seg.age));
        }
        cuts.retain(|&c| c >= seg.start.max(from) && c <= seg.end);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            total += half
                * NODES
                    .iter()
                    .map(|&(x, wt)| {
                        let s = mid + half * x;
                        wt * h(s, seg.state, seg.age_at(s))
                    })
                    .sum::<f64>();
        }
    }
    total
}
