//! Monte Carlo estimates of the controlled cost
//! `J(t,x,a,u) = E_u[∫_0^{T−t} l(t+s, X_s, a_s, u_s) ds + g(X_{T−t}, a_{T−t})]`,
//! by Girsanov reweighting of reference paths and by direct thinned simulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControlProblem, FeedbackLaw};
use crate::error::{Error, Result};
use crate::model::{AgePoint, SemiMarkovModel};
use crate::simulate::{simulate_controlled_path, simulate_path, RngSeed, Trajectory};
use crate::stats::SampleMean;

/// Pieces shorter than this are not split further.
const MIN_PIECE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Weighted,
    Thinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub method: EstimatorKind,
}

/// Running cost and Girsanov factors accumulated along one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFunctionals {
    pub running_cost: f64,
    pub terminal_cost: f64,
    /// `∫ Σ_y (1 − r) λ q̄ ds`
    pub log_weight: f64,
    /// `Π_n r` at the jumps
    pub rate_product: f64,
}

impl PathFunctionals {
    pub fn cost(&self) -> f64 {
        self.running_cost + self.terminal_cost
    }

    pub fn weight(&self) -> f64 {
        if self.rate_product == 0.0 {
            0.0
        } else {
            self.log_weight.exp() * self.rate_product
        }
    }
}

/// Walks a path in pieces on which state, hazard, kernel row, every problem table and
/// the feedback action are constant, so all integrals are exact.
pub fn path_functionals(
    traj: &Trajectory,
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    feedback: &dyn FeedbackLaw,
    t_offset: f64,
) -> Result<PathFunctionals> {
    let mut out = PathFunctionals {
        running_cost: 0.0,
        terminal_cost: 0.0,
        log_weight: 0.0,
        rate_product: 1.0,
    };
    for seg in traj.segments() {
        let x = seg.state;
        let mut s = seg.start;
        while seg.end - s > MIN_PIECE {
            let a = seg.age_at(s);
            let t = t_offset + s;
            let mut next = seg.end;
            for cand in [
                s + (model.hazard(x).next_break_after(a) - a),
                s + (problem.next_age_break(x, a) - a),
                problem.next_time_break(t) - t_offset,
                feedback.hold_until(t, x, a) - t_offset,
            ] {
                if cand > s + MIN_PIECE && cand < next {
                    next = cand;
                }
            }
            let mid = 0.5 * (s + next);
            let (tm, am) = (t_offset + mid, seg.age_at(mid));
            let u = feedback.action(tm, x, am)?;
            let len = next - s;
            out.running_cost += problem.running_cost(tm, x, am, u) * len;
            let (rate, row) = model.rate_and_row(x, am);
            if rate > 0.0 {
                let tilt: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(y, &p)| (1.0 - problem.rate(tm, x, am, y, u)) * p)
                    .sum();
                out.log_weight += tilt * rate * len;
            }
            s = next;
        }
    }
    for (n, j) in traj.jumps.iter().enumerate() {
        let pre = traj.pre_jump(n);
        let t = t_offset + j.time;
        let u = feedback.action(t, pre.state, pre.age)?;
        out.rate_product *= problem.rate(t, pre.state, pre.age, j.mark, u);
    }
    let end = traj.end_point();
    out.terminal_cost = problem.terminal_cost(end.state, end.age);
    Ok(out)
}

/// `L^t_{T−t}` for a reference-law path: `exp(∫ Σ_y (1 − r) λ q̄ ds) · Π_n r(T_n, X_{T_n−}, a_{T_n−}, X_{T_n}, u_{T_n})`.
pub fn girsanov_weight(
    traj: &Trajectory,
    problem: &ControlProblem,
    feedback: &dyn FeedbackLaw,
    t_offset: f64,
    model: &SemiMarkovModel,
) -> Result<f64> {
    Ok(path_functionals(traj, problem, model, feedback, t_offset)?.weight())
}

/// Running plus terminal cost along a path, ignoring any weight.
pub fn path_cost(
    traj: &Trajectory,
    problem: &ControlProblem,
    feedback: &dyn FeedbackLaw,
    t_offset: f64,
    model: &SemiMarkovModel,
) -> Result<f64> {
    Ok(path_functionals(traj, problem, model, feedback, t_offset)?.cost())
}

fn check_run(
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    t_offset: f64,
    n_paths: usize,
) -> Result<f64> {
    if n_paths < 2 {
        return Err(Error::Config(format!(
            "need at least 2 paths, got {n_paths}"
        )));
    }
    if model.num_states() != problem.num_states() {
        return Err(Error::Config(
            "problem and model disagree on the number of states".into(),
        ));
    }
    let h = problem.horizon() - t_offset;
    if !(t_offset >= 0.0) || !(h > 0.0) {
        return Err(Error::Domain(format!("t_offset {t_offset} outside [0, T)")));
    }
    Ok(h)
}

fn per_path<F>(n_paths: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// Mean of `weight · cost` over paths drawn from the reference law.
#[allow(clippy::too_many_arguments)]
pub fn estimate_cost_weighted(
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    start: AgePoint,
    t_offset: f64,
    feedback: &dyn FeedbackLaw,
    n_paths: usize,
    seed: RngSeed,
) -> Result<CostEstimate> {
    let h = check_run(problem, model, t_offset, n_paths)?;
    let values = per_path(n_paths, |i| {
        let traj = simulate_path(model, start, h, &mut seed.path_rng(i))?;
        let p = path_functionals(&traj, problem, model, feedback, t_offset)?;
        Ok(p.weight() * p.cost())
    })?;
    Ok(estimate(&values, EstimatorKind::Weighted))
}

/// Mean cost over paths drawn from the controlled law by thinning.
pub fn estimate_cost_thinned(
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    start: AgePoint,
    t_offset: f64,
    feedback: &dyn FeedbackLaw,
    n_paths: usize,
    seed: RngSeed,
) -> Result<CostEstimate> {
    let h = check_run(problem, model, t_offset, n_paths)?;
    let values = per_path(n_paths, |i| {
        let traj = simulate_controlled_path(
            model,
            problem,
            start,
            h,
            feedback,
            t_offset,
            &mut seed.path_rng(i),
        )?;
        path_cost(&traj, problem, feedback, t_offset, model)
    })?;
    Ok(estimate(&values, EstimatorKind::Thinned))
}

/// Mean Girsanov weight over reference paths; should be 1.
pub fn mean_weight(
    problem: &ControlProblem,
    model: &SemiMarkovModel,
    start: AgePoint,
    t_offset: f64,
    feedback: &dyn FeedbackLaw,
    n_paths: usize,
    seed: RngSeed,
) -> Result<SampleMean> {
    let h = check_run(problem, model, t_offset, n_paths)?;
    let values = per_path(n_paths, |i| {
        let traj = simulate_path(model, start, h, &mut seed.path_rng(i))?;
        girsanov_weight(&traj, problem, feedback, t_offset, model)
    })?;
    Ok(SampleMean::of(&values))
}

fn estimate(values: &[f64], method: EstimatorKind) -> CostEstimate {
    let s = SampleMean::of(values);
    CostEstimate {
        mean: s.mean,
        std_error: s.std_error,
        paths: s.n,
        method,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ConstantFeedback;
    use crate::simulate::Jump;

    fn model() -> SemiMarkovModel {
        SemiMarkovModel::from_json_str(
            r#"{"states":["a","b"],
                "hazard":{"a":{"breaks":[0,0.4],"values":[1,2]},"b":{"breaks":[0],"values":[0.5]}},
                "kernel":{"a":[[0,1]],"b":[[1,0]]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn identity_multiplier_has_unit_weight() {
        let m = model();
        let p =
            ControlProblem::from_json_str(r#"{"actions":[0],"C_r":2,"horizon":1}"#, &m).unwrap();
        let traj = Trajectory {
            start: AgePoint::new(0, 0.0),
            horizon: 1.0,
            jumps: vec![Jump { time: 0.5, mark: 1 }],
        };
        assert_eq!(
            girsanov_weight(&traj, &p, &ConstantFeedback(0), 0.0, &m).unwrap(),
            1.0
        );
    }

    #[test]
    fn constant_multiplier_without_jumps() {
        let m = model();
        let p = ControlProblem::from_json_str(
            r#"{"actions":[0],"C_r":2,"horizon":1,"rate_multiplier":{"default":1.5}}"#,
            &m,
        )
        .unwrap();
        let traj = Trajectory::still(AgePoint::new(0, 0.0), 1.0);
        // Λ = 0.4 + 0.6·2 = 1.6
        let w = girsanov_weight(&traj, &p, &ConstantFeedback(0), 0.0, &m).unwrap();
        assert!((w - (-0.5f64 * 1.6).exp()).abs() < 1e-14);
    }

    #[test]
    fn zero_costs_give_zero_estimate() {
        let m = model();
        let p =
            ControlProblem::from_json_str(r#"{"actions":[0,1],"C_r":2,"horizon":1}"#, &m).unwrap();
        let e = estimate_cost_weighted(
            &p,
            &m,
            AgePoint::new(0, 0.0),
            0.0,
            &ConstantFeedback(1),
            100,
            RngSeed(1),
        )
        .unwrap();
        assert_eq!((e.mean, e.std_error), (0.0, 0.0));
        assert!(estimate_cost_weighted(
            &p,
            &m,
            AgePoint::new(0, 0.0),
            0.0,
            &ConstantFeedback(1),
            1,
            RngSeed(1)
        )
        .is_err());
    }

    #[test]
    fn frozen_dynamics_are_deterministic() {
        let m = model();
        let p = ControlProblem::from_json_str(
            r#"{"actions":[0],"C_r":2,"horizon":1,"rate_multiplier":{"default":0},
                "running_cost":{"default":0.5},
                "terminal_cost":{"entries":[{"state":"a","value":{"age_breaks":[0,1],"values":[3,7]}}]}}"#,
            &m,
        )
        .unwrap();
        let e = estimate_cost_thinned(
            &p,
            &m,
            AgePoint::new(0, 0.2),
            0.1,
            &ConstantFeedback(0),
            50,
            RngSeed(4),
        )
        .unwrap();
        assert_eq!(e.std_error, 0.0);
        // age 0.2 + 0.9 = 1.1 → g = 7; running 0.5 · 0.9
        assert!((e.mean - 7.45).abs() < 1e-12);
    }

    #[test]
    fn seeded_estimates_repeat() {
        let m = model();
        let p = ControlProblem::from_json_str(
            r#"{"actions":[0],"C_r":2,"horizon":1,"rate_multiplier":{"default":1.7},"running_cost":{"default":1},
                "terminal_cost":{"entries":[{"state":"b","value":1}]}}"#,
            &m,
        )
        .unwrap();
        let f = ConstantFeedback(0);
        let a = estimate_cost_weighted(&p, &m, AgePoint::new(0, 0.0), 0.0, &f, 500, RngSeed(3))
            .unwrap();
        let b = estimate_cost_weighted(&p, &m, AgePoint::new(0, 0.0), 0.0, &f, 500, RngSeed(3))
            .unwrap();
        assert_eq!(a, b);
    }
}
