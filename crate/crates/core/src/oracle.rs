//! Closed-form solution of a four-state control example.
//!
//! States `x1 → x2 → {x3, x4}`: from `x1` the process always jumps to `x2`, from `x2`
//! to `x3` or `x4` with probability ½ each, and `x3`, `x4` are absorbing. Actions
//! `u ∈ {0, 1, 2}` tilt the second jump: `r(x3, u) = u`, `r(x4, u) = 2 − u`. Running
//! cost `l = (αu/2)·λ(x, a)`, terminal cost `1` in `x4`.
//!
//! With `c = min(1, α)` and `Λ_k(a, s) = ∫_a^{a+s} λ_k`:
//!
//! * `y1(s, t1) = c·(1 − e^{−Λ2(s−t1, T−s)})` after a first jump at `t1`,
//! * `y0(s) = ∫_s^T λ1(a+σ) e^{−Λ1(a+s, σ−s)} y1(σ, σ) dσ`, which solves
//!   `y0' = −λ1(a+s)(y1(s,s) − y0)`, `y0(T) = 0`.

use crate::control::{
    ControlProblem, CostDoc, CostEntry, Label, ProblemDoc, RateDoc, RateEntry, StepDoc,
};
use crate::error::Result;
use crate::model::SemiMarkovModel;
use crate::piecewise::PiecewiseConstant;

pub const X1: usize = 0;
pub const X2: usize = 1;
pub const X3: usize = 2;
pub const X4: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleConfig {
    pub alpha: f64,
    pub horizon: f64,
    /// Age of the process in `x1` at time 0.
    pub start_age: f64,
    pub hazard_x1: PiecewiseConstant,
    pub hazard_x2: PiecewiseConstant,
}

impl ExampleConfig {
    /// `λ ≡ 1`, start age 0.
    pub fn unit(alpha: f64, horizon: f64) -> Self {
        Self {
            alpha,
            horizon,
            start_age: 0.0,
            hazard_x1: PiecewiseConstant::constant(1.0),
            hazard_x2: PiecewiseConstant::constant(1.0),
        }
    }

    fn c(&self) -> f64 {
        self.alpha.min(1.0)
    }
}

pub fn example_model(cfg: &ExampleConfig) -> Result<SemiMarkovModel> {
    SemiMarkovModel::new(
        ["x1", "x2", "x3", "x4"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        vec![
            cfg.hazard_x1.clone(),
            cfg.hazard_x2.clone(),
            PiecewiseConstant::constant(0.0),
            PiecewiseConstant::constant(0.0),
        ],
        vec![
            vec![vec![0.0, 1.0, 0.0, 0.0]],
            vec![vec![0.0, 0.0, 0.5, 0.5]],
            vec![],
            vec![],
        ],
        None,
    )
}

/// The problem document with actions `0, 1, 2` and `C_r = 2`.
pub fn example_problem_doc(cfg: &ExampleConfig) -> ProblemDoc {
    let rate = |u: f64, to: &str, v: f64| RateEntry {
        action: Some(Label::Number(u)),
        from: Some(Label::Name("x2".into())),
        to: Some(Label::Name(to.into())),
        value: StepDoc::Constant(v),
    };
    let cost = |u: f64| CostEntry {
        action: Some(Label::Number(u)),
        state: None,
        value: StepDoc::Constant(cfg.alpha * u / 2.0),
        per_hazard: true,
    };
    ProblemDoc {
        actions: vec![Label::Number(0.0), Label::Number(1.0), Label::Number(2.0)],
        c_r: 2.0,
        horizon: cfg.horizon,
        rate_multiplier: RateDoc {
            default: 1.0,
            entries: [0.0, 1.0, 2.0]
                .iter()
                .flat_map(|&u| [rate(u, "x3", u), rate(u, "x4", 2.0 - u)])
                .collect(),
        },
        running_cost: CostDoc {
            default: 0.0,
            entries: vec![cost(1.0), cost(2.0)],
        },
        terminal_cost: CostDoc {
            default: 0.0,
            entries: vec![CostEntry {
                action: None,
                state: Some(Label::Name("x4".into())),
                value: StepDoc::Constant(1.0),
                per_hazard: false,
            }],
        },
    }
}

pub fn example_problem(cfg: &ExampleConfig, model: &SemiMarkovModel) -> Result<ControlProblem> {
    ControlProblem::from_doc(&example_problem_doc(cfg), model)
}

/// `y1(s, t1)`, the value in `x2` at time `s` after a first jump at `t1 ≤ s`.
pub fn oracle_y1(cfg: &ExampleConfig, s: f64, t1: f64) -> f64 {
    cfg.c() * -(-cfg.hazard_x2.integral(s - t1, cfg.horizon - s)).exp_m1()
}

/// `y0(s)`, the value in `x1` at time `s` (age `start_age + s`).
pub fn oracle_y0(cfg: &ExampleConfig, s: f64) -> f64 {
    let t_end = cfg.horizon;
    if s >= t_end {
        return 0.0;
    }
    let a = cfg.start_age;
    let h1 = &cfg.hazard_x1;
    let h2 = &cfg.hazard_x2;
    // σ-breaks where λ1(a+σ) or λ2(T−σ) change
    let mut cuts = vec![s, t_end];
    cuts.extend(h1.breaks().iter().map(|b| b - a));
    cuts.extend(h2.breaks().iter().map(|b| t_end - b));
    cuts.retain(|&c| c >= s && c <= t_end);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let mut nested = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let l1 = h1.eval(a + mid);
        if l1 == 0.0 {
            continue;
        }
        let l2 = h2.eval(t_end - mid);
        let e0 = -h1.integral(a + s, lo - s) - h2.integral(0.0, t_end - lo);
        // ∫_0^len e^{−(l1−l2)τ} dτ
        let k = l1 - l2;
        let shape = if k == 0.0 {
            len
        } else {
            -(-k * len).exp_m1() / k
        };
        nested += l1 * e0.exp() * shape;
    }
    let first = -(-h1.integral(a + s, t_end - s)).exp_m1();
    cfg.c() * (first - nested)
}

/// All processes of the example solution.
#[derive(Debug, Clone)]
pub struct ExampleSolution {
    cfg: ExampleConfig,
}

pub fn oracle_full(cfg: &ExampleConfig) -> ExampleSolution {
    ExampleSolution { cfg: cfg.clone() }
}

impl ExampleSolution {
    pub fn y0(&self, s: f64) -> f64 {
        oracle_y0(&self.cfg, s)
    }

    pub fn y1(&self, s: f64, t1: f64) -> f64 {
        oracle_y1(&self.cfg, s, t1)
    }

    /// Value after the second jump: 1 in `x4`, 0 in `x3`.
    pub fn y2(&self, mark: usize) -> f64 {
        if mark == X4 {
            1.0
        } else {
            0.0
        }
    }

    /// `z0(s, y)` before the first jump.
    pub fn z0(&self, s: f64, y: usize) -> f64 {
        if y == X2 {
            self.y1(s, s) - self.y0(s)
        } else {
            0.0
        }
    }

    /// `z1(s, y)` between the jumps, first jump at `t1`.
    pub fn z1(&self, s: f64, t1: f64, y: usize) -> f64 {
        match y {
            X3 => self.y2(X3) - self.y1(s, t1),
            X4 => self.y2(X4) - self.y1(s, t1),
            _ => 0.0,
        }
    }

    /// Optimal action index after `jump_count` jumps: `2` between the jumps when `α ≤ 1`, else `0`.
    pub fn optimal_action(&self, jump_count: usize) -> usize {
        if jump_count == 1 && self.cfg.alpha <= 1.0 {
            2
        } else {
            0
        }
    }
}
