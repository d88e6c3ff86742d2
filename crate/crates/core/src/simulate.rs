//! Trajectory sampling for the pair `(X_s, a_s)`.
//!
//! The uncontrolled process is sampled exactly through its embedded chain: the
//! holding time by inverting the cumulative hazard, the mark from `q̄` at the jump
//! age. Controlled intensities `r·λ·q̄` are sampled by thinning candidates drawn
//! from the dominating intensity `C_r·λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControlProblem, FeedbackLaw};
use crate::error::{Error, Result};
use crate::model::{AgePoint, SemiMarkovModel};

/// Seed of a reproducible simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent stream for path `index`; the same `(seed, index)` always gives the same stream.
    pub fn path_rng(self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub mark: usize,
}

/// A path on `[0, horizon]`: start point and the ordered jumps `(T_n, X_{T_n})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: AgePoint,
    pub horizon: f64,
    pub jumps: Vec<Jump>,
}

/// A maximal interval `[start, end)` of local time without jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub state: usize,
    /// Age at local time `start`.
    pub age: f64,
}

impl Segment {
    #[inline]
    pub fn age_at(&self, s: f64) -> f64 {
        self.age + (s - self.start)
    }
}

/// Result of a holding-time draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Holding {
    After(f64),
    NoJump,
}

impl Trajectory {
    /// An empty (jump-free) trajectory.
    pub fn still(start: AgePoint, horizon: f64) -> Self {
        Self {
            start,
            horizon,
            jumps: Vec::new(),
        }
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// Checks strictly increasing times in `(0, horizon]` and state-changing marks.
    pub fn validate(&self) -> Result<()> {
        let mut prev_t = 0.0;
        let mut prev_x = self.start.state;
        for (n, j) in self.jumps.iter().enumerate() {
            if !(j.time > prev_t) || j.time > self.horizon {
                return Err(Error::validation(
                    format!("jumps[{n}].time"),
                    "jump times must increase within (0, horizon]",
                ));
            }
            if j.mark == prev_x {
                return Err(Error::validation(
                    format!("jumps[{n}].mark"),
                    "mark must differ from the current state",
                ));
            }
            prev_t = j.time;
            prev_x = j.mark;
        }
        Ok(())
    }

    /// Inter-jump segments covering `[0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let mut state = self.start.state;
        let mut age = self.start.age;
        let mut t = 0.0;
        let mut idx = 0;
        std::iter::from_fn(move || {
            if idx > self.jumps.len() {
                return None;
            }
            let end = self.jumps.get(idx).map_or(self.horizon, |j| j.time);
            let seg = Segment {
                start: t,
                end,
                state,
                age,
            };
            if let Some(j) = self.jumps.get(idx) {
                state = j.mark;
                age = 0.0;
                t = j.time;
            }
            idx += 1;
            Some(seg)
        })
    }

    /// `(X_s, a_s)`, right-continuous.
    pub fn evaluate_state(&self, s: f64) -> Result<AgePoint> {
        self.check_time(s)?;
        let n = self.jumps.partition_point(|j| j.time <= s);
        Ok(match n {
            0 => AgePoint::new(self.start.state, self.start.age + s),
            _ => {
                let j = self.jumps[n - 1];
                AgePoint::new(j.mark, s - j.time)
            }
        })
    }

    /// `(X_{s−}, a_{s−})`; at `s = 0` this is the start point.
    pub fn evaluate_left(&self, s: f64) -> Result<AgePoint> {
        self.check_time(s)?;
        let n = self.jumps.partition_point(|j| j.time < s);
        Ok(match n {
            0 => AgePoint::new(self.start.state, self.start.age + s),
            _ => {
                let j = self.jumps[n - 1];
                AgePoint::new(j.mark, s - j.time)
            }
        })
    }

    /// State and age just before jump `n`.
    pub fn pre_jump(&self, n: usize) -> AgePoint {
        let t = self.jumps[n].time;
        match n {
            0 => AgePoint::new(self.start.state, self.start.age + t),
            _ => AgePoint::new(self.jumps[n - 1].mark, t - self.jumps[n - 1].time),
        }
    }

    pub fn end_point(&self) -> AgePoint {
        match self.jumps.last() {
            None => AgePoint::new(self.start.state, self.start.age + self.horizon),
            Some(j) => AgePoint::new(j.mark, self.horizon - j.time),
        }
    }

    fn check_time(&self, s: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&s) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "time {s} outside [0, {}]",
                self.horizon
            )))
        }
    }
}

/// Draws the next holding time from `(x, a)`: `P(S > s) = exp(−∫_a^{a+s} λ(x,r) dr)`.
pub fn sample_holding_time<R: Rng + ?Sized>(
    model: &SemiMarkovModel,
    x: usize,
    a: f64,
    rng: &mut R,
) -> Holding {
    let level: f64 = Exp1.sample(rng);
    match model.hazard(x).invert_integral(a, level) {
        Some(s) => Holding::After(s),
        None => Holding::NoJump,
    }
}

fn sample_from_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let total: f64 = row.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (y, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = y;
            if target < acc {
                return y;
            }
        }
    }
    last_positive
}

/// Draws the post-jump state `y ~ q̄(x, jump_age, ·)`.
pub fn sample_mark<R: Rng + ?Sized>(
    model: &SemiMarkovModel,
    x: usize,
    jump_age: f64,
    rng: &mut R,
) -> usize {
    sample_from_row(model.jump_row(x, jump_age), rng)
}

/// Samples a path under `P^{x,a}` on `[0, horizon]`.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &SemiMarkovModel,
    start: AgePoint,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_start(model, start, horizon)?;
    let mut traj = Trajectory::still(start, horizon);
    let (mut x, mut a, mut t) = (start.state, start.age, 0.0);
    while let Holding::After(s) = sample_holding_time(model, x, a, rng) {
        let jump_time = t + s;
        if jump_time > horizon {
            break;
        }
        let y = sample_mark(model, x, a + s, rng);
        traj.jumps.push(Jump {
            time: jump_time,
            mark: y,
        });
        x = y;
        a = 0.0;
        t = jump_time;
    }
    Ok(traj)
}

/// Samples a path whose intensity toward `y` is `r(t_offset+s, x, a, y, u)·λ(x,a)·q̄(x,a,{y})`,
/// with `u = feedback(t_offset+s, x, a)` evaluated at the pre-jump point.
pub fn simulate_controlled_path<R: Rng + ?Sized>(
    model: &SemiMarkovModel,
    problem: &ControlProblem,
    start: AgePoint,
    horizon: f64,
    feedback: &dyn FeedbackLaw,
    t_offset: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_start(model, start, horizon)?;
    let bound = problem.rate_bound();
    let mut traj = Trajectory::still(start, horizon);
    let (mut x, mut a, mut t) = (start.state, start.age, 0.0);
    loop {
        // candidate from the dominating intensity C_r·λ: solve C_r·Λ(a, s) = E
        let level: f64 = Exp1.sample(rng);
        let s = match model.hazard(x).invert_integral(a, level / bound) {
            Some(s) => s,
            None => break,
        };
        let cand = t + s;
        if cand > horizon {
            break;
        }
        let age = a + s;
        let y = sample_mark(model, x, age, rng);
        let u = feedback.action(t_offset + cand, x, age)?;
        let r = problem.rate(t_offset + cand, x, age, y, u);
        if !(0.0..=bound).contains(&r) {
            return Err(Error::Contract(format!(
                "rate multiplier {r} outside [0, C_r = {bound}] at t={}, state {x}, age {age}",
                t_offset + cand
            )));
        }
        let accept: f64 = rng.random();
        if accept * bound < r {
            traj.jumps.push(Jump {
                time: cand,
                mark: y,
            });
            x = y;
            a = 0.0;
        } else {
            a = age;
        }
        t = cand;
    }
    Ok(traj)
}

/// `n_paths` independent paths, path `i` driven by `seed.path_rng(i)`; output ordered by index.
pub fn simulate_batch(
    model: &SemiMarkovModel,
    start: AgePoint,
    horizon: f64,
    n_paths: usize,
    seed: RngSeed,
) -> Result<Vec<Trajectory>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(model, start, horizon, &mut seed.path_rng(i)))
        .collect()
}

fn check_start(model: &SemiMarkovModel, start: AgePoint, horizon: f64) -> Result<()> {
    if start.state >= model.num_states() {
        return Err(Error::Domain(format!(
            "unknown start state {}",
            start.state
        )));
    }
    if !(start.age >= 0.0) {
        return Err(Error::Domain(format!(
            "start age must be nonnegative, got {}",
            start.age
        )));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    Ok(())
}
