//! Semi-Markov model data: finite states, age-dependent hazard `λ(x,a)` and
//! age-dependent jump kernel `q̄(x,a,·)`, both piecewise constant in the age.
//!
//! The jump-law quantities (cumulative hazard, survival, the distribution
//! function `H` and the kernel `Q` of `(X_{T₁}, T₁)`) are evaluated in closed form
//! segment by segment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::PiecewiseConstant;

/// Tolerance on kernel row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A point `(x, a)` of the state space `K × [0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgePoint {
    pub state: usize,
    pub age: f64,
}

impl AgePoint {
    pub fn new(state: usize, age: f64) -> Self {
        Self { state, age }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct StateLaw {
    hazard: PiecewiseConstant,
    /// One probability row per hazard segment.
    kernel: Vec<Vec<f64>>,
}

/// Finite-state semi-Markov model. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiMarkovModel {
    states: Vec<String>,
    laws: Vec<StateLaw>,
    hazard_bound: f64,
}

/// JSON form of a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub states: Vec<String>,
    #[serde(default)]
    pub hazard: BTreeMap<String, HazardDoc>,
    #[serde(default)]
    pub kernel: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default)]
    pub hazard_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HazardDoc {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl SemiMarkovModel {
    /// Builds a model from per-state hazards and per-segment kernel rows.
    ///
    /// `kernels[x]` holds either one row per hazard segment of `x` or a single row
    /// used for every segment. Rows on segments with zero hazard may be all zero.
    /// Adjacent segments with equal hazard and equal row are merged.
    pub fn new(
        states: Vec<String>,
        hazards: Vec<PiecewiseConstant>,
        kernels: Vec<Vec<Vec<f64>>>,
        hazard_bound: Option<f64>,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::validation(
                "states",
                "at least one state is required",
            ));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(Error::validation(
                    format!("states[{i}]"),
                    format!("duplicate state {s:?}"),
                ));
            }
        }
        if hazards.len() != n || kernels.len() != n {
            return Err(Error::validation(
                "hazard",
                "one hazard and one kernel per state required",
            ));
        }
        let max_hazard = hazards.iter().map(|h| h.max_value()).fold(0.0, f64::max);
        let bound = hazard_bound.unwrap_or(max_hazard);
        if !bound.is_finite() || bound < 0.0 {
            return Err(Error::validation(
                "hazard_bound",
                "must be finite and nonnegative",
            ));
        }
        let mut laws = Vec::with_capacity(n);
        for (x, (hazard, rows)) in hazards.into_iter().zip(kernels).enumerate() {
            let name = &states[x];
            for (k, &v) in hazard.values().iter().enumerate() {
                if v < 0.0 || v > bound {
                    return Err(Error::validation(
                        format!("hazard.{name}.values[{k}]"),
                        format!("hazard {v} outside [0, {bound}]"),
                    ));
                }
            }
            let segs = hazard.segments();
            let rows = match rows.len() {
                0 if hazard.max_value() == 0.0 => vec![vec![0.0; n]; segs],
                1 => vec![rows[0].clone(); segs],
                m if m == segs => rows,
                m => {
                    return Err(Error::validation(
                        format!("kernel.{name}"),
                        format!("expected {segs} rows (one per hazard segment) or 1, got {m}"),
                    ))
                }
            };
            for (k, row) in rows.iter().enumerate() {
                let path = format!("kernel.{name}[{k}]");
                if row.len() != n {
                    return Err(Error::validation(
                        path,
                        format!("row must have {n} entries"),
                    ));
                }
                if let Some(j) = row.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
                    return Err(Error::validation(
                        format!("{path}[{j}]"),
                        "probabilities must be nonnegative",
                    ));
                }
                if row[x] != 0.0 {
                    return Err(Error::validation(
                        format!("{path}[{x}]"),
                        "self-transitions are not allowed (a jump changes the state)",
                    ));
                }
                let sum: f64 = row.iter().sum();
                let active = hazard.values()[k] > 0.0;
                if (active || sum != 0.0) && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::validation(
                        path,
                        format!("row sums to {sum}, expected 1"),
                    ));
                }
            }
            laws.push(canonical_law(hazard, rows));
        }
        Ok(Self {
            states,
            laws,
            hazard_bound: bound,
        })
    }

    pub fn from_doc(doc: &ModelDoc) -> Result<Self> {
        let n = doc.states.len();
        for key in doc.hazard.keys().chain(doc.kernel.keys()) {
            if !doc.states.contains(key) {
                return Err(Error::validation(format!("hazard.{key}"), "unknown state"));
            }
        }
        let mut hazards = Vec::with_capacity(n);
        let mut kernels = Vec::with_capacity(n);
        for name in &doc.states {
            let hazard = match doc.hazard.get(name) {
                Some(h) => PiecewiseConstant::new(h.breaks.clone(), h.values.clone()).map_err(
                    |e| match e {
                        Error::Validation { path, message } => {
                            Error::validation(format!("hazard.{name}.{path}"), message)
                        }
                        other => other,
                    },
                )?,
                None => PiecewiseConstant::constant(0.0),
            };
            hazards.push(hazard);
            kernels.push(doc.kernel.get(name).cloned().unwrap_or_default());
        }
        Self::new(doc.states.clone(), hazards, kernels, doc.hazard_bound)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(s)?;
        Self::from_doc(&doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_doc(&self) -> ModelDoc {
        let mut hazard = BTreeMap::new();
        let mut kernel = BTreeMap::new();
        for (x, law) in self.laws.iter().enumerate() {
            hazard.insert(
                self.states[x].clone(),
                HazardDoc {
                    breaks: law.hazard.breaks().to_vec(),
                    values: law.hazard.values().to_vec(),
                },
            );
            kernel.insert(self.states[x].clone(), law.kernel.clone());
        }
        ModelDoc {
            states: self.states.clone(),
            hazard,
            kernel,
            hazard_bound: Some(self.hazard_bound),
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::Domain(format!("unknown state {name:?}")))
    }

    /// Declared bound `C_λ` on the hazard.
    pub fn hazard_bound(&self) -> f64 {
        self.hazard_bound
    }

    /// `sup λ(x,a) q̄(x,a,K)`, the total jump-rate bound used by contraction estimates.
    pub fn max_jump_rate(&self) -> f64 {
        self.laws
            .iter()
            .flat_map(|l| {
                l.hazard
                    .values()
                    .iter()
                    .zip(&l.kernel)
                    .map(|(v, row)| v * row.iter().sum::<f64>())
            })
            .fold(0.0, f64::max)
    }

    pub fn hazard(&self, x: usize) -> &PiecewiseConstant {
        &self.laws[x].hazard
    }

    /// Age breakpoints where `λ(x,·)` or `q̄(x,·,·)` may change.
    pub fn age_breaks(&self, x: usize) -> &[f64] {
        self.laws[x].hazard.breaks()
    }

    #[inline]
    pub fn lambda(&self, x: usize, a: f64) -> f64 {
        self.laws[x].hazard.eval(a)
    }

    /// The row `q̄(x, a, ·)`.
    #[inline]
    pub fn jump_row(&self, x: usize, a: f64) -> &[f64] {
        let law = &self.laws[x];
        &law.kernel[law.hazard.segment_of(a)]
    }

    /// Hazard value and kernel row on one lookup.
    #[inline]
    pub fn rate_and_row(&self, x: usize, a: f64) -> (f64, &[f64]) {
        let law = &self.laws[x];
        let k = law.hazard.segment_of(a);
        (law.hazard.values()[k], &law.kernel[k])
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x < self.states.len() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "state index {x} out of range (|K| = {})",
                self.states.len()
            )))
        }
    }

    fn check_nonneg(name: &str, v: f64) -> Result<()> {
        if v >= 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{name} must be nonnegative, got {v}"
            )))
        }
    }

    /// `∫_a^{a+s} λ(x,r) dr`.
    pub fn cumulative_hazard(&self, x: usize, a: f64, s: f64) -> Result<f64> {
        self.check_state(x)?;
        Self::check_nonneg("age", a)?;
        Self::check_nonneg("duration", s)?;
        Ok(self.laws[x].hazard.integral(a, s))
    }

    /// `P^{x,a}(T₁ > s)`.
    pub fn survival(&self, x: usize, a: f64, s: f64) -> Result<f64> {
        Ok((-self.cumulative_hazard(x, a, s)?).exp())
    }

    /// `H(x,s) = 1 − exp(−∫_0^s λ(x,r) dr)`; `s = ∞` gives the probability of ever jumping.
    pub fn distribution_h(&self, x: usize, s: f64) -> Result<f64> {
        Ok(-(-self.cumulative_hazard(x, 0.0, s)?).exp_m1())
    }

    /// `Q(x, a, A × (c, d))`, the probability that the first jump lands in `targets`
    /// at a time in `(c, d]`. `d` may be `∞`.
    pub fn kernel_q(&self, x: usize, a: f64, targets: &[usize], c: f64, d: f64) -> Result<f64> {
        self.check_state(x)?;
        Self::check_nonneg("age", a)?;
        if !(c >= 0.0 && d > c) {
            return Err(Error::Domain(format!("need 0 ≤ c < d, got c={c}, d={d}")));
        }
        for &y in targets {
            self.check_state(y)?;
        }
        if targets.is_empty() {
            return Ok(0.0);
        }
        let law = &self.laws[x];
        let h = &law.hazard;
        let mut acc = 0.0;
        // walk the hazard segments intersecting ages (a+c, a+d)
        let mut lo = c;
        let mut log_surv = -h.integral(a, c);
        let mut k = h.segment_of(a + c);
        while lo < d {
            let hi = (h.breaks().get(k + 1).copied().unwrap_or(f64::INFINITY) - a).min(d);
            let rate = h.values()[k];
            if rate > 0.0 {
                let mass: f64 = targets.iter().map(|&y| law.kernel[k][y]).sum();
                if mass > 0.0 {
                    let jump = if hi.is_infinite() {
                        1.0
                    } else {
                        -(-rate * (hi - lo)).exp_m1()
                    };
                    acc += mass * log_surv.exp() * jump;
                }
                log_surv -= rate * (hi - lo);
            }
            lo = hi;
            k += 1;
        }
        Ok(acc)
    }
}

fn canonical_law(hazard: PiecewiseConstant, rows: Vec<Vec<f64>>) -> StateLaw {
    let mut breaks = Vec::new();
    let mut values = Vec::new();
    let mut kernel: Vec<Vec<f64>> = Vec::new();
    for ((&b, &v), row) in hazard.breaks().iter().zip(hazard.values()).zip(rows) {
        // rows on zero-hazard segments are irrelevant; normalize them so merging works
        let row = if v == 0.0 { vec![0.0; row.len()] } else { row };
        if values.last() == Some(&v) && kernel.last() == Some(&row) {
            continue;
        }
        breaks.push(b);
        values.push(v);
        kernel.push(row);
    }
    StateLaw {
        hazard: PiecewiseConstant::new(breaks, values).expect("merging preserves validity"),
        kernel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn swap_model(rate: f64) -> SemiMarkovModel {
        SemiMarkovModel::new(
            names(2),
            vec![
                PiecewiseConstant::constant(rate),
                PiecewiseConstant::constant(rate),
            ],
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            None,
        )
        .unwrap()
    }

    fn two_segment_model() -> SemiMarkovModel {
        SemiMarkovModel::new(
            names(3),
            vec![
                PiecewiseConstant::new(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap(),
                PiecewiseConstant::constant(1.0),
                PiecewiseConstant::constant(0.0),
            ],
            vec![
                vec![vec![0.0, 0.5, 0.5], vec![0.0, 0.25, 0.75]],
                vec![vec![0.5, 0.0, 0.5]],
                vec![],
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn cumulative_hazard_examples() {
        assert_eq!(swap_model(0.0).cumulative_hazard(0, 1.3, 7.0).unwrap(), 0.0);
        assert_eq!(swap_model(1.0).cumulative_hazard(0, 0.0, 2.5).unwrap(), 2.5);
        assert_eq!(
            two_segment_model().cumulative_hazard(0, 0.5, 1.0).unwrap(),
            2.0
        );
    }

    #[test]
    fn survival_examples() {
        assert_eq!(swap_model(0.0).survival(1, 0.0, 100.0).unwrap(), 1.0);
        assert!(
            (swap_model(1.0).survival(0, 0.0, 1.0).unwrap() - 0.367_879_441_171_442_3).abs()
                < 1e-15
        );
        assert_eq!(two_segment_model().survival(0, 0.4, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn distribution_h_examples() {
        let m = swap_model(1.0);
        assert!((m.distribution_h(0, 1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(m.distribution_h(0, 0.0).unwrap(), 0.0);
        assert_eq!(
            swap_model(0.0).distribution_h(0, f64::INFINITY).unwrap(),
            0.0
        );
    }

    #[test]
    fn kernel_q_examples() {
        let m = two_segment_model();
        let all = [0, 1, 2];
        let q = m.kernel_q(0, 0.3, &all, 0.0, 1.7).unwrap();
        assert!((q + m.survival(0, 0.3, 1.7).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.kernel_q(0, 0.3, &[], 0.0, 1.0).unwrap(), 0.0);
        // factorized kernel with λ ≡ 1 and q̄(x,·,{y}) = 1/2: ∫_0^∞ e^{-s} ds / 2
        let q_half = m.kernel_q(1, 0.0, &[0], 0.0, f64::INFINITY).unwrap();
        assert!((q_half - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_state_is_domain_error() {
        let m = swap_model(1.0);
        assert!(matches!(
            m.cumulative_hazard(5, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(m.survival(0, -1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_self_transition_and_bad_rows() {
        let bad_self = SemiMarkovModel::new(
            names(2),
            vec![
                PiecewiseConstant::constant(1.0),
                PiecewiseConstant::constant(1.0),
            ],
            vec![vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0]]],
            None,
        );
        assert!(
            matches!(bad_self, Err(Error::Validation { path, .. }) if path == "kernel.s0[0][0]")
        );
        let bad_sum = SemiMarkovModel::new(
            names(2),
            vec![
                PiecewiseConstant::constant(1.0),
                PiecewiseConstant::constant(1.0),
            ],
            vec![vec![vec![0.0, 0.9]], vec![vec![1.0, 0.0]]],
            None,
        );
        assert!(bad_sum.is_err());
        let over_bound = SemiMarkovModel::new(
            names(2),
            vec![
                PiecewiseConstant::constant(3.0),
                PiecewiseConstant::constant(1.0),
            ],
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            Some(2.0),
        );
        assert!(
            matches!(over_bound, Err(Error::Validation { path, .. }) if path == "hazard.s0.values[0]")
        );
    }

    #[test]
    fn json_round_trip_and_error_paths() {
        let json = r#"{
            "states": ["a", "b"],
            "hazard": {"a": {"breaks": [0, 1], "values": [1, 2]}, "b": {"breaks": [0], "values": [0.5]}},
            "kernel": {"a": [[0, 1]], "b": [[1, 0]]}
        }"#;
        let m = SemiMarkovModel::from_json_str(json).unwrap();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.lambda(0, 1.5), 2.0);
        let again = SemiMarkovModel::from_doc(&m.to_doc()).unwrap();
        assert_eq!(again, m);

        let bad = r#"{"states": ["a", "b"], "hazard": {"a": {"breaks": [0, 1], "values": [1, -2]}},
                      "kernel": {"a": [[0, 1]]}}"#;
        match SemiMarkovModel::from_json_str(bad) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "hazard.a.values[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn refinement_is_invisible() {
        let coarse = two_segment_model();
        let fine = SemiMarkovModel::new(
            names(3),
            vec![
                PiecewiseConstant::new(vec![0.0, 0.4, 1.0, 2.5], vec![1.0, 1.0, 3.0, 3.0]).unwrap(),
                PiecewiseConstant::new(vec![0.0, 0.7], vec![1.0, 1.0]).unwrap(),
                PiecewiseConstant::constant(0.0),
            ],
            vec![
                vec![
                    vec![0.0, 0.5, 0.5],
                    vec![0.0, 0.5, 0.5],
                    vec![0.0, 0.25, 0.75],
                    vec![0.0, 0.25, 0.75],
                ],
                vec![vec![0.5, 0.0, 0.5]],
                vec![],
            ],
            None,
        )
        .unwrap();
        assert_eq!(coarse, fine);
    }
}
