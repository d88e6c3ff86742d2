//! Intensity control: the tabulated problem `(U, r, l, g, T)`, its Hamiltonian,
//! the HJB solve and feedback extraction.
//!
//! Every coefficient is a step function of time and age, so costs and the
//! Girsanov exponent integrate exactly along a path once it is cut at the
//! breakpoints reported by [`ControlProblem::next_time_break`] and
//! [`ControlProblem::next_age_break`].

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kolmogorov::{solve_backward, Generator, Grid, ValueField};
use crate::model::SemiMarkovModel;
use crate::piecewise::PiecewiseConstant;

const SNAP: f64 = 1e-9;

fn check_breaks(path: &str, breaks: &[f64]) -> Result<()> {
    if breaks.first() != Some(&0.0) {
        return Err(Error::validation(
            format!("{path}[0]"),
            "first breakpoint must be 0",
        ));
    }
    for (k, w) in breaks.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::validation(
                format!("{path}[{}]", k + 1),
                "breakpoints must be finite and strictly increasing",
            ));
        }
    }
    Ok(())
}

fn merge(into: &mut Vec<f64>, extra: &[f64]) {
    into.extend_from_slice(extra);
    into.sort_by(|a, b| a.partial_cmp(b).unwrap());
    into.dedup();
}

/// A step function of `(t, a)`: `values[k·m + l]` on `[time_breaks[k], time_breaks[k+1]) × [age_breaks[l], age_breaks[l+1])`
/// with `m = age_breaks.len()`. Both break lists start at 0 and the last cells extend to `∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTable {
    time_breaks: Vec<f64>,
    age_breaks: Vec<f64>,
    values: Vec<f64>,
}

impl StepTable {
    pub fn constant(value: f64) -> Self {
        Self {
            time_breaks: vec![0.0],
            age_breaks: vec![0.0],
            values: vec![value],
        }
    }

    pub fn new(time_breaks: Vec<f64>, age_breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_breaks("time_breaks", &time_breaks)?;
        check_breaks("age_breaks", &age_breaks)?;
        let cells = time_breaks.len() * age_breaks.len();
        if values.len() != cells {
            return Err(Error::validation(
                "values",
                format!("expected {cells} values, got {}", values.len()),
            ));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                format!("values[{k}]"),
                "value is not finite",
            ));
        }
        Ok(Self {
            time_breaks,
            age_breaks,
            values,
        })
    }

    /// A table depending on age only.
    pub fn of_age(f: &PiecewiseConstant) -> Self {
        Self {
            time_breaks: vec![0.0],
            age_breaks: f.breaks().to_vec(),
            values: f.values().to_vec(),
        }
    }

    pub fn time_breaks(&self) -> &[f64] {
        &self.time_breaks
    }

    pub fn age_breaks(&self) -> &[f64] {
        &self.age_breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn eval(&self, t: f64, a: f64) -> f64 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        let k = self
            .time_breaks
            .partition_point(|&b| b <= t)
            .saturating_sub(1);
        let l = self
            .age_breaks
            .partition_point(|&b| b <= a)
            .saturating_sub(1);
        self.values[k * self.age_breaks.len() + l]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise product with a step function of age.
    pub fn times_age_function(&self, h: &PiecewiseConstant) -> Self {
        let ages = PiecewiseConstant::merged_breaks(&self.age_breaks, h.breaks());
        let mut values = Vec::with_capacity(self.time_breaks.len() * ages.len());
        for &t in &self.time_breaks {
            for &a in &ages {
                values.push(self.eval(t, a) * h.eval(a));
            }
        }
        Self {
            time_breaks: self.time_breaks.clone(),
            age_breaks: ages,
            values,
        }
    }
}

/// JSON form of a [`StepTable`]: a bare number, or breaks with flat or nested
/// (`values[time][age]`) values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepDoc {
    Constant(f64),
    Table {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        time_breaks: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        age_breaks: Option<Vec<f64>>,
        values: ValuesDoc,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValuesDoc {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

impl StepDoc {
    fn build(&self, path: &str) -> Result<StepTable> {
        match self {
            StepDoc::Constant(v) => {
                if !v.is_finite() {
                    return Err(Error::validation(path, "value is not finite"));
                }
                Ok(StepTable::constant(*v))
            }
            StepDoc::Table {
                time_breaks,
                age_breaks,
                values,
            } => {
                let tb = time_breaks.clone().unwrap_or_else(|| vec![0.0]);
                let ab = age_breaks.clone().unwrap_or_else(|| vec![0.0]);
                let flat = match values {
                    ValuesDoc::Flat(v) => v.clone(),
                    ValuesDoc::Nested(rows) => {
                        for (k, r) in rows.iter().enumerate() {
                            if r.len() != ab.len() {
                                return Err(Error::validation(
                                    format!("{path}.values[{k}]"),
                                    format!("expected {} age cells, got {}", ab.len(), r.len()),
                                ));
                            }
                        }
                        rows.concat()
                    }
                };
                StepTable::new(tb, ab, flat).map_err(|e| match e {
                    Error::Validation { path: p, message } => Error::Validation {
                        path: format!("{path}.{p}"),
                        message,
                    },
                    other => other,
                })
            }
        }
    }
}

/// An action or state selector: a name, a number, or `"*"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Number(f64),
    Name(String),
}

impl Label {
    fn text(&self) -> String {
        match self {
            Label::Number(v) => format!("{v}"),
            Label::Name(s) => s.clone(),
        }
    }
}

fn select(label: &Option<Label>, names: &[String], path: &str) -> Result<Vec<usize>> {
    match label {
        None => Ok((0..names.len()).collect()),
        Some(l) => {
            let t = l.text();
            if t == "*" {
                return Ok((0..names.len()).collect());
            }
            names
                .iter()
                .position(|n| *n == t)
                .map(|k| vec![k])
                .ok_or_else(|| Error::validation(path, format!("unknown label {t:?}")))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateEntry {
    #[serde(default)]
    pub action: Option<Label>,
    #[serde(default)]
    pub from: Option<Label>,
    #[serde(default)]
    pub to: Option<Label>,
    pub value: StepDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateDoc {
    #[serde(default = "one")]
    pub default: f64,
    #[serde(default)]
    pub entries: Vec<RateEntry>,
}

fn one() -> f64 {
    1.0
}

impl Default for RateDoc {
    fn default() -> Self {
        Self {
            default: 1.0,
            entries: Vec::new(),
        }
    }
}

/// A cost entry. With `per_hazard` the tabulated value is multiplied by `λ(x, a)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostEntry {
    #[serde(default)]
    pub action: Option<Label>,
    #[serde(default)]
    pub state: Option<Label>,
    pub value: StepDoc,
    #[serde(default)]
    pub per_hazard: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CostDoc {
    #[serde(default)]
    pub default: f64,
    #[serde(default)]
    pub entries: Vec<CostEntry>,
}

/// JSON form of a [`ControlProblem`]. Later entries override earlier ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub actions: Vec<Label>,
    #[serde(rename = "C_r")]
    pub c_r: f64,
    pub horizon: f64,
    #[serde(default)]
    pub rate_multiplier: RateDoc,
    #[serde(default)]
    pub running_cost: CostDoc,
    #[serde(default)]
    pub terminal_cost: CostDoc,
}

/// Finite-action intensity control problem on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    actions: Vec<String>,
    states: usize,
    rate_bound: f64,
    horizon: f64,
    /// `[(u·n + x)·n + y]`
    rate: Vec<StepTable>,
    /// `[u·n + x]`
    running: Vec<StepTable>,
    /// `[x]`, age only
    terminal: Vec<StepTable>,
    time_breaks: Vec<f64>,
    age_breaks: Vec<Vec<f64>>,
}

impl ControlProblem {
    /// Builds a problem from explicit tables; see the field layout on [`ControlProblem`].
    pub fn from_tables(
        actions: Vec<String>,
        states: usize,
        rate_bound: f64,
        horizon: f64,
        rate: Vec<StepTable>,
        running: Vec<StepTable>,
        terminal: Vec<StepTable>,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Config("the action set is empty".into()));
        }
        if !(rate_bound > 1.0) || !rate_bound.is_finite() {
            return Err(Error::validation(
                "C_r",
                format!("must be finite and > 1, got {rate_bound}"),
            ));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::validation(
                "horizon",
                format!("must be positive, got {horizon}"),
            ));
        }
        let n = states;
        let m = actions.len();
        if rate.len() != m * n * n || running.len() != m * n || terminal.len() != n {
            return Err(Error::Config(
                "table counts do not match actions and states".into(),
            ));
        }
        for (k, r) in rate.iter().enumerate() {
            if r.min_value() < 0.0 || r.max_value() > rate_bound {
                let (u, x, y) = (k / (n * n), (k / n) % n, k % n);
                return Err(Error::validation(
                    format!("rate_multiplier[{}][{x}][{y}]", actions[u]),
                    format!("values must lie in [0, C_r = {rate_bound}]"),
                ));
            }
        }
        for (x, g) in terminal.iter().enumerate() {
            if g.time_breaks.len() != 1 {
                return Err(Error::validation(
                    format!("terminal_cost[{x}]"),
                    "must not depend on time",
                ));
            }
        }
        let mut time_breaks = Vec::new();
        for t in rate.iter().chain(&running) {
            merge(&mut time_breaks, &t.time_breaks);
        }
        let mut age_breaks = vec![Vec::new(); n];
        for (k, t) in rate.iter().enumerate() {
            merge(&mut age_breaks[(k / n) % n], &t.age_breaks);
        }
        for (k, t) in running.iter().enumerate() {
            merge(&mut age_breaks[k % n], &t.age_breaks);
        }
        Ok(Self {
            actions,
            states,
            rate_bound,
            horizon,
            rate,
            running,
            terminal,
            time_breaks,
            age_breaks,
        })
    }

    pub fn from_doc(doc: &ProblemDoc, model: &SemiMarkovModel) -> Result<Self> {
        let actions: Vec<String> = doc.actions.iter().map(Label::text).collect();
        for (k, a) in actions.iter().enumerate() {
            if actions[..k].contains(a) {
                return Err(Error::validation(
                    format!("actions[{k}]"),
                    format!("duplicate action {a:?}"),
                ));
            }
        }
        if actions.is_empty() {
            return Err(Error::Config("the action set is empty".into()));
        }
        let names = model.state_names();
        let n = names.len();
        let m = actions.len();
        let check = |v: f64, path: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(path, "value is not finite"))
            }
        };
        check(doc.rate_multiplier.default, "rate_multiplier.default")?;
        check(doc.running_cost.default, "running_cost.default")?;
        check(doc.terminal_cost.default, "terminal_cost.default")?;

        let mut rate = vec![StepTable::constant(doc.rate_multiplier.default); m * n * n];
        for (k, e) in doc.rate_multiplier.entries.iter().enumerate() {
            let path = format!("rate_multiplier.entries[{k}]");
            let table = e.value.build(&format!("{path}.value"))?;
            for u in select(&e.action, &actions, &format!("{path}.action"))? {
                for x in select(&e.from, names, &format!("{path}.from"))? {
                    for y in select(&e.to, names, &format!("{path}.to"))? {
                        rate[(u * n + x) * n + y] = table.clone();
                    }
                }
            }
        }

        let mut running = vec![StepTable::constant(doc.running_cost.default); m * n];
        for (k, e) in doc.running_cost.entries.iter().enumerate() {
            let path = format!("running_cost.entries[{k}]");
            let table = e.value.build(&format!("{path}.value"))?;
            for u in select(&e.action, &actions, &format!("{path}.action"))? {
                for x in select(&e.state, names, &format!("{path}.state"))? {
                    running[u * n + x] = if e.per_hazard {
                        table.times_age_function(model.hazard(x))
                    } else {
                        table.clone()
                    };
                }
            }
        }

        let mut terminal = vec![StepTable::constant(doc.terminal_cost.default); n];
        for (k, e) in doc.terminal_cost.entries.iter().enumerate() {
            let path = format!("terminal_cost.entries[{k}]");
            if e.action.is_some() {
                return Err(Error::validation(
                    format!("{path}.action"),
                    "terminal cost does not depend on the action",
                ));
            }
            let table = e.value.build(&format!("{path}.value"))?;
            if table.time_breaks.len() != 1 {
                return Err(Error::validation(
                    format!("{path}.value.time_breaks"),
                    "terminal cost does not depend on time",
                ));
            }
            for x in select(&e.state, names, &format!("{path}.state"))? {
                terminal[x] = if e.per_hazard {
                    table.times_age_function(model.hazard(x))
                } else {
                    table.clone()
                };
            }
        }
        Self::from_tables(actions, n, doc.c_r, doc.horizon, rate, running, terminal)
    }

    pub fn from_json_str(s: &str, model: &SemiMarkovModel) -> Result<Self> {
        let doc: ProblemDoc = serde_json::from_str(s)?;
        Self::from_doc(&doc, model)
    }

    pub fn load(path: impl AsRef<Path>, model: &SemiMarkovModel) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?, model)
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_index(&self, label: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::Domain(format!("unknown action {label:?}")))
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    /// Declared `C_r`.
    pub fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `r(t, x, a, y, u)`.
    #[inline]
    pub fn rate(&self, t: f64, x: usize, a: f64, y: usize, u: usize) -> f64 {
        self.rate[(u * self.states + x) * self.states + y].eval(t, a)
    }

    /// `l(t, x, a, u)`.
    #[inline]
    pub fn running_cost(&self, t: f64, x: usize, a: f64, u: usize) -> f64 {
        self.running[u * self.states + x].eval(t, a)
    }

    /// `g(x, a)`.
    #[inline]
    pub fn terminal_cost(&self, x: usize, a: f64) -> f64 {
        self.terminal[x].eval(0.0, a)
    }

    /// First time breakpoint of any rate or running-cost table strictly after `t`.
    pub fn next_time_break(&self, t: f64) -> f64 {
        let k = self.time_breaks.partition_point(|&b| b <= t);
        self.time_breaks.get(k).copied().unwrap_or(f64::INFINITY)
    }

    /// First age breakpoint of the tables of state `x` strictly after `a`.
    pub fn next_age_break(&self, x: usize, a: f64) -> f64 {
        let b = &self.age_breaks[x];
        let k = b.partition_point(|&v| v <= a);
        b.get(k).copied().unwrap_or(f64::INFINITY)
    }

    fn check_model(&self, model: &SemiMarkovModel) -> Result<()> {
        if model.num_states() != self.states {
            return Err(Error::Config(format!(
                "problem has {} states, model has {}",
                self.states,
                model.num_states()
            )));
        }
        Ok(())
    }
}

/// `l(t,x,a,u) + Σ_y z_y (r(t,x,a,y,u) − 1) λ(x,a) q̄(x,a,{y})`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn minimand(
    problem: &ControlProblem,
    rate: f64,
    row: &[f64],
    t: f64,
    x: usize,
    a: f64,
    z: &[f64],
    u: usize,
) -> f64 {
    let mut tilt = 0.0;
    if rate > 0.0 {
        for (y, &p) in row.iter().enumerate() {
            if p > 0.0 {
                tilt += z[y] * (problem.rate(t, x, a, y, u) - 1.0) * p;
            }
        }
    }
    problem.running_cost(t, x, a, u) + tilt * rate
}

#[inline]
fn minimize(
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    t: f64,
    x: usize,
    a: f64,
    z: &[f64],
) -> (f64, usize) {
    let (rate, row) = model.rate_and_row(x, a);
    let mut best = (f64::INFINITY, 0);
    for u in 0..problem.actions.len() {
        let v = minimand(problem, rate, row, t, x, a, z, u);
        if v < best.0 {
            best = (v, u);
        }
    }
    best
}

/// Hamiltonian value and the lowest-index minimizing action.
pub fn hamiltonian(
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    t: f64,
    x: usize,
    a: f64,
    z: &[f64],
) -> Result<(f64, usize)> {
    if problem.actions.is_empty() {
        return Err(Error::Config("the action set is empty".into()));
    }
    problem.check_model(model)?;
    if x >= problem.states || z.len() != problem.states {
        return Err(Error::Domain(format!(
            "state {x} or z of length {} does not fit",
            z.len()
        )));
    }
    Ok(minimize(problem, model, t, x, a, z))
}

/// The Hamiltonian as a backward-equation driver. It does not depend on `y`.
pub struct HamiltonianGenerator<'a> {
    problem: &'a ControlProblem,
    model: &'a SemiMarkovModel,
}

impl<'a> HamiltonianGenerator<'a> {
    pub fn new(problem: &'a ControlProblem, model: &'a SemiMarkovModel) -> Self {
        Self { problem, model }
    }
}

impl Generator for HamiltonianGenerator<'_> {
    #[inline]
    fn eval(&self, t: f64, x: usize, a: f64, _y: f64, z: &[f64]) -> f64 {
        minimize(self.problem, self.model, t, x, a, z).0
    }
    /// `(C_r + 1)·sup(λ q̄(·,K))^{1/2}`.
    fn lipschitz_z(&self) -> f64 {
        (self.problem.rate_bound + 1.0) * self.model.max_jump_rate().sqrt()
    }
    fn lipschitz_y(&self) -> f64 {
        0.0
    }
}

/// Value function of the control problem on a grid of step `dt`.
pub fn solve_hjb(
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    dt: f64,
    a_max: f64,
) -> Result<ValueField> {
    problem.check_model(model)?;
    let gen = HamiltonianGenerator::new(problem, model);
    solve_backward(
        model,
        &gen,
        &|x, a| problem.terminal_cost(x, a),
        problem.horizon,
        dt,
        a_max,
    )
}

/// A feedback control `u(t, x, a)`.
pub trait FeedbackLaw: Sync {
    fn action(&self, t: f64, x: usize, a: f64) -> Result<usize>;

    /// Global time up to which the action stays unchanged along the characteristic
    /// through `(t, x, a)`, i.e. while no jump occurs.
    fn hold_until(&self, t: f64, x: usize, a: f64) -> f64;
}

/// The same action everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantFeedback(pub usize);

impl FeedbackLaw for ConstantFeedback {
    fn action(&self, _: f64, _: usize, _: f64) -> Result<usize> {
        Ok(self.0)
    }
    fn hold_until(&self, _: f64, _: usize, _: f64) -> f64 {
        f64::INFINITY
    }
}

const MISSING: u16 = u16::MAX;

/// A feedback law tabulated on the nodes `(t_m, x, a_k)` of a grid.
///
/// In the strip `t_{m−1} ≤ t < t_m` the law follows the characteristic up to the
/// time line `t_m` and uses the action stored at the nearest node there. This is the
/// action the explicit scheme uses on the step from `t_m` back to `t_{m−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPolicy {
    grid: Grid,
    states: usize,
    actions: Vec<u16>,
    /// First time line at which the action along the diagonal changes, or `steps + 1`.
    run_end: Vec<u32>,
}

impl GridPolicy {
    /// `actions[(m·states + x)·(J+1) + k]` is the action at node `(t_m, x, a_k)`;
    /// `None` marks nodes the law is not defined on.
    pub fn from_actions(grid: Grid, states: usize, actions: Vec<Option<usize>>) -> Result<Self> {
        let width = grid.ages + 1;
        if actions.len() != (grid.steps + 1) * states * width {
            return Err(Error::Config(format!(
                "expected {} node actions, got {}",
                (grid.steps + 1) * states * width,
                actions.len()
            )));
        }
        let actions: Vec<u16> = actions
            .into_iter()
            .map(|a| match a {
                Some(u) if u < MISSING as usize => Ok(u as u16),
                Some(u) => Err(Error::Config(format!("action index {u} too large"))),
                None => Ok(MISSING),
            })
            .collect::<Result<_>>()?;
        let mut run_end = vec![0u32; actions.len()];
        let idx = |m: usize, x: usize, k: usize| (m * states + x) * width + k;
        for x in 0..states {
            for k in 0..width {
                run_end[idx(grid.steps, x, k)] = grid.steps as u32 + 1;
            }
        }
        for m in (0..grid.steps).rev() {
            for x in 0..states {
                for k in 0..width {
                    let next = idx(m + 1, x, (k + 1).min(grid.ages));
                    run_end[idx(m, x, k)] = if actions[next] == actions[idx(m, x, k)] {
                        run_end[next]
                    } else {
                        m as u32 + 1
                    };
                }
            }
        }
        Ok(Self {
            grid,
            states,
            actions,
            run_end,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Action stored at node `(t_m, x, a_k)`.
    pub fn node_action(&self, m: usize, x: usize, k: usize) -> Option<usize> {
        let a = self.actions[(m * self.states + x) * (self.grid.ages + 1) + k];
        (a != MISSING).then_some(a as usize)
    }

    /// Time line `m` and node `k` governing `(t, a)`, unchecked for the age range.
    #[inline]
    fn locate(&self, t: f64, a: f64) -> (usize, f64) {
        let dt = self.grid.dt;
        let m = ((t / dt + SNAP).floor() as i64 + 1).clamp(1, self.grid.steps as i64) as usize;
        let upper_age = a + (self.grid.time(m) - t);
        (m, (upper_age / dt).round())
    }

    /// Writes `t,state,a,action` rows for the nodes with a defined action.
    pub fn write_csv<W: Write>(
        &self,
        out: W,
        model: &SemiMarkovModel,
        problem: &ControlProblem,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "state", "a", "action"])?;
        let names = model.state_names();
        for m in 0..=self.grid.steps {
            for (x, name) in names.iter().enumerate().take(self.states) {
                for k in 0..=self.grid.ages {
                    if let Some(u) = self.node_action(m, x, k) {
                        w.write_record([
                            format!("{}", self.grid.time(m)),
                            name.clone(),
                            format!("{}", self.grid.age(k)),
                            problem.actions[u].clone(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`GridPolicy::write_csv`]. The grid is recovered from the
    /// node coordinates: `dt` is the smallest positive time, `T` the largest.
    pub fn read_csv<R: Read>(
        input: R,
        model: &SemiMarkovModel,
        problem: &ControlProblem,
    ) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: f64,
            state: String,
            a: f64,
            action: String,
        }
        let mut rows = Vec::new();
        for (k, r) in csv::Reader::from_reader(input)
            .deserialize::<Row>()
            .enumerate()
        {
            let r = r?;
            let x = model.state_index(&r.state).map_err(|_| {
                Error::validation(
                    format!("policy row {}", k + 1),
                    format!("unknown state {:?}", r.state),
                )
            })?;
            let u = problem.action_index(&r.action).map_err(|_| {
                Error::validation(
                    format!("policy row {}", k + 1),
                    format!("unknown action {:?}", r.action),
                )
            })?;
            if !(r.t >= 0.0) || !(r.a >= 0.0) {
                return Err(Error::validation(
                    format!("policy row {}", k + 1),
                    "negative coordinate",
                ));
            }
            rows.push((r.t, x, r.a, u));
        }
        let dt = rows
            .iter()
            .map(|r| r.0)
            .filter(|&t| t > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !dt.is_finite() {
            return Err(Error::validation(
                "policy",
                "needs rows at two or more time lines",
            ));
        }
        let horizon = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let max_age = rows.iter().map(|r| r.2).fold(0.0, f64::max);
        let steps = (horizon / dt).round();
        let grid = Grid::new(steps * dt, dt, (max_age - steps * dt).max(0.0))?;
        let width = grid.ages + 1;
        let n = model.num_states();
        let mut actions = vec![None; (grid.steps + 1) * n * width];
        for (k, &(t, x, a, u)) in rows.iter().enumerate() {
            let (mf, kf) = (t / dt, a / dt);
            let (m, j) = (mf.round(), kf.round());
            if (mf - m).abs() > 1e-6 || (kf - j).abs() > 1e-6 || j as usize > grid.ages {
                return Err(Error::validation(
                    format!("policy row {}", k + 1),
                    "coordinates are not grid nodes",
                ));
            }
            actions[(m as usize * n + x) * width + j as usize] = Some(u);
        }
        Self::from_actions(grid, n, actions)
    }

    pub fn save(
        &self,
        path: impl AsRef<Path>,
        model: &SemiMarkovModel,
        problem: &ControlProblem,
    ) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f), model, problem)
    }

    pub fn load(
        path: impl AsRef<Path>,
        model: &SemiMarkovModel,
        problem: &ControlProblem,
    ) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), model, problem)
    }
}

impl FeedbackLaw for GridPolicy {
    fn action(&self, t: f64, x: usize, a: f64) -> Result<usize> {
        if x >= self.states {
            return Err(Error::Domain(format!("state index {x} out of range")));
        }
        if !(t >= -SNAP && t <= self.grid.horizon * (1.0 + SNAP)) || !(a >= -SNAP) {
            return Err(Error::Domain(format!("({t}, {a}) outside the policy grid")));
        }
        let (m, k) = self.locate(t, a);
        if k > self.grid.ages as f64 {
            return Err(Error::Domain(format!("age {a} beyond the policy grid")));
        }
        self.node_action(m, x, k.max(0.0) as usize).ok_or_else(|| {
            Error::Domain(format!("no action stored near (t={t}, state {x}, a={a})"))
        })
    }

    fn hold_until(&self, t: f64, x: usize, a: f64) -> f64 {
        let (m, k) = self.locate(t, a);
        let k = (k.max(0.0) as usize).min(self.grid.ages);
        let end = self.run_end
            [(m * self.states + x.min(self.states - 1)) * (self.grid.ages + 1) + k]
            as usize;
        if end > self.grid.steps {
            f64::INFINITY
        } else {
            self.grid.time(end - 1)
        }
    }
}

/// Feedback law `u(t,x,a) ∈ argmin` of the Hamiltonian at `z_y = v(t,y,0) − v(t,x,a)`,
/// tabulated on the nodes of `field`.
pub fn extract_feedback(
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    field: &ValueField,
) -> Result<GridPolicy> {
    problem.check_model(model)?;
    let grid = *field.grid();
    let n = model.num_states();
    let width = grid.ages + 1;
    let mut actions = Vec::with_capacity((grid.steps + 1) * n * width);
    let mut z = vec![0.0; n];
    for m in 0..=grid.steps {
        let t = grid.time(m);
        let slice = field.slice(m);
        for x in 0..n {
            for k in 0..width {
                let v = slice[x * width + k];
                for y in 0..n {
                    z[y] = slice[y * width] - v;
                }
                actions.push(Some(minimize(problem, model, t, x, grid.age(k), &z).1));
            }
        }
    }
    GridPolicy::from_actions(grid, n, actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SemiMarkovModel {
        SemiMarkovModel::from_json_str(
            r#"{"states":["a","b","c"],
                "hazard":{"a":{"breaks":[0,0.5],"values":[1,2]},"b":{"breaks":[0],"values":[1]}},
                "kernel":{"a":[[0,0.5,0.5]],"b":[[1,0,0]]}}"#,
        )
        .unwrap()
    }

    fn problem(m: &SemiMarkovModel) -> ControlProblem {
        ControlProblem::from_json_str(
            r#"{"actions":["lo","hi"],"C_r":3,"horizon":1,
                "rate_multiplier":{"entries":[
                    {"action":"hi","from":"a","to":"b","value":2.5},
                    {"action":"hi","from":"a","to":"c","value":{"time_breaks":[0,0.5],"values":[0.5,1.5]}}]},
                "running_cost":{"entries":[{"action":"hi","value":0.25,"per_hazard":true}]},
                "terminal_cost":{"entries":[{"state":"c","value":{"age_breaks":[0,0.2],"values":[1,2]}}]}}"#,
            m,
        )
        .unwrap()
    }

    #[test]
    fn tables_and_lookups() {
        let m = model();
        let p = problem(&m);
        assert_eq!(p.rate(0.1, 0, 0.0, 1, 1), 2.5);
        assert_eq!(p.rate(0.7, 0, 0.0, 2, 1), 1.5);
        assert_eq!(p.rate(0.7, 0, 0.0, 2, 0), 1.0);
        assert_eq!(p.running_cost(0.0, 0, 0.7, 1), 0.5);
        assert_eq!(p.running_cost(0.0, 0, 0.7, 0), 0.0);
        assert_eq!(p.terminal_cost(2, 0.3), 2.0);
        assert_eq!(p.next_time_break(0.1), 0.5);
        assert_eq!(p.next_age_break(0, 0.1), 0.5);
        assert_eq!(p.next_age_break(1, 0.1), f64::INFINITY);
    }

    #[test]
    fn validation_messages() {
        let m = model();
        let bad = r#"{"actions":[0],"C_r":2,"horizon":1,
            "rate_multiplier":{"entries":[{"from":"zz","value":1}]}}"#;
        match ControlProblem::from_json_str(bad, &m) {
            Err(Error::Validation { path, .. }) => {
                assert_eq!(path, "rate_multiplier.entries[0].from")
            }
            other => panic!("{other:?}"),
        }
        let over = r#"{"actions":[0],"C_r":2,"horizon":1,"rate_multiplier":{"default":2.5}}"#;
        assert!(matches!(
            ControlProblem::from_json_str(over, &m),
            Err(Error::Validation { .. })
        ));
        let empty = r#"{"actions":[],"C_r":2,"horizon":1}"#;
        assert!(matches!(
            ControlProblem::from_json_str(empty, &m),
            Err(Error::Config(_))
        ));
        let low = r#"{"actions":[0],"C_r":1,"horizon":1}"#;
        assert!(matches!(
            ControlProblem::from_json_str(low, &m),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn hamiltonian_examples() {
        let m = model();
        let flat = r#"{"actions":[0,1,2],"C_r":2,"horizon":1,"running_cost":{"default":0.75}}"#;
        let p = ControlProblem::from_json_str(flat, &m).unwrap();
        assert_eq!(
            hamiltonian(&p, &m, 0.0, 0, 0.0, &[0.0; 3]).unwrap(),
            (0.75, 0)
        );
        // r ≡ 1: the z-term vanishes whatever z is
        assert_eq!(
            hamiltonian(&p, &m, 0.0, 0, 0.0, &[3.0, -1.0, 7.0]).unwrap(),
            (0.75, 0)
        );
        let p = problem(&m);
        let z = [0.0, -1.0, 0.5];
        let (v, u) = hamiltonian(&p, &m, 0.2, 0, 0.1, &z).unwrap();
        // hi: 0.25 + (-1)(1.5)(0.5) + 0.5(-0.5)(0.5) = -0.625 ; lo: 0
        assert_eq!(u, 1);
        assert!((v + 0.625).abs() < 1e-15);
    }

    #[test]
    fn trivial_hjb() {
        let m = model();
        let p =
            ControlProblem::from_json_str(r#"{"actions":[0,1],"C_r":2,"horizon":1}"#, &m).unwrap();
        let v = solve_hjb(&p, &m, 0.05, 0.5).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grid_policy_runs_and_csv() {
        let m = model();
        let p = problem(&m);
        let grid = Grid::new(1.0, 0.25, 0.0).unwrap();
        let width = grid.ages + 1;
        let mut acts = vec![Some(0); (grid.steps + 1) * 3 * width];
        // diagonal (m, k) = (2, 1), (3, 2) carries action 1 in state 0
        acts[2 * 3 * width + 1] = Some(1);
        acts[3 * 3 * width + 2] = Some(1);
        let pol = GridPolicy::from_actions(grid, 3, acts).unwrap();
        assert_eq!(pol.action(0.3, 0, 0.05).unwrap(), 1);
        assert_eq!(pol.hold_until(0.3, 0, 0.05), 0.75);
        assert_eq!(pol.action(0.6, 0, 0.35).unwrap(), 1);
        assert_eq!(pol.action(0.8, 0, 0.55).unwrap(), 0);
        assert_eq!(pol.hold_until(0.1, 1, 0.0), f64::INFINITY);
        let mut buf = Vec::new();
        pol.write_csv(&mut buf, &m, &p).unwrap();
        let back = GridPolicy::read_csv(buf.as_slice(), &m, &p).unwrap();
        assert_eq!(back, pol);
    }
}
