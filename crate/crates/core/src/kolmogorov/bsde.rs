use crate::error::{Error, Result};
use crate::model::{AgePoint, SemiMarkovModel};
use crate::simulate::Trajectory;

use super::generator::Generator;
use super::grid::ValueField;
use super::integrate_along;

/// The pair `(Y, Z)` along one trajectory, read off a solved field:
/// `Y_s = v(t+s, X_s, a_s)` and `Z_s(y) = v(t+s, y, 0) − v(t+s, X_{s−}, a_{s−})`.
#[derive(Debug, Clone, Copy)]
pub struct BsdePath<'a> {
    field: &'a ValueField,
    trajectory: &'a Trajectory,
    t_offset: f64,
}

/// Attaches a trajectory started at time `t_offset` to a solved field.
pub fn recover_bsde<'a>(
    field: &'a ValueField,
    trajectory: &'a Trajectory,
    t_offset: f64,
) -> Result<BsdePath<'a>> {
    let g = field.grid();
    let tol = 1e-9 * g.horizon.max(1.0);
    if !(t_offset >= 0.0) || t_offset + trajectory.horizon > g.horizon + tol {
        return Err(Error::Domain(format!(
            "path on [{t_offset}, {}] does not fit in [0, {}]",
            t_offset + trajectory.horizon,
            g.horizon
        )));
    }
    let k = trajectory.start.age / g.dt;
    if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
        return Err(Error::Domain(format!(
            "start age {} is not a multiple of dt = {}",
            trajectory.start.age, g.dt
        )));
    }
    if trajectory.start.age + trajectory.horizon > g.max_age() + tol {
        return Err(Error::Domain(format!(
            "ages up to {} exceed the grid ({})",
            trajectory.start.age + trajectory.horizon,
            g.max_age()
        )));
    }
    if trajectory.start.state >= field.num_states() {
        return Err(Error::Domain(format!(
            "unknown state {}",
            trajectory.start.state
        )));
    }
    Ok(BsdePath {
        field,
        trajectory,
        t_offset,
    })
}

impl<'a> BsdePath<'a> {
    pub fn trajectory(&self) -> &Trajectory {
        self.trajectory
    }

    /// `Y_s`.
    pub fn y(&self, s: f64) -> Result<f64> {
        let p = self.trajectory.evaluate_state(s)?;
        self.field.eval(self.t_offset + s, p.state, p.age)
    }

    /// `Z_s(y)`.
    pub fn z(&self, s: f64, y: usize) -> Result<f64> {
        let p = self.trajectory.evaluate_left(s)?;
        let t = self.t_offset + s;
        Ok(self.field.eval(t, y, 0.0)? - self.field.eval(t, p.state, p.age)?)
    }

    /// `Z_s(·)` given the pre-jump point.
    fn z_vec(&self, s: f64, here: AgePoint, out: &mut [f64]) {
        let t = self.t_offset + s;
        let v = self.field.eval_unchecked(t, here.state, here.age);
        for (y, o) in out.iter_mut().enumerate() {
            *o = self.field.eval_unchecked(t, y, 0.0) - v;
        }
    }

    /// Pathwise defect of the backward equation on `[s, H]`:
    /// `Y_s + ∫_s^H ∫ Z dq − ξ − ∫_s^H f(r, X_r, a_r, Y_r, Z_r) dr` with `ξ = terminal(X_H, a_H)`.
    pub fn equation_defect(
        &self,
        model: &SemiMarkovModel,
        generator: &dyn Generator,
        terminal: &dyn Fn(usize, f64) -> f64,
        s: f64,
    ) -> Result<f64> {
        let traj = self.trajectory;
        let n = model.num_states();
        let grid = self.field.grid();
        let jumps: f64 = traj
            .jumps
            .iter()
            .enumerate()
            .filter(|(_, j)| j.time > s)
            .map(|(k, j)| {
                let pre = traj.pre_jump(k);
                let t = self.t_offset + j.time;
                self.field.eval_unchecked(t, j.mark, 0.0)
                    - self.field.eval_unchecked(t, pre.state, pre.age)
            })
            .sum();
        let drift = integrate_along(traj, grid, model, self.t_offset, s, |r, here| {
            let mut z = vec![0.0; n];
            self.z_vec(r, here, &mut z);
            let (rate, row) = model.rate_and_row(here.state, here.age);
            let comp: f64 = row.iter().zip(&z).map(|(p, v)| p * v).sum::<f64>() * rate;
            let y = self
                .field
                .eval_unchecked(self.t_offset + r, here.state, here.age);
            generator.eval(self.t_offset + r, here.state, here.age, y, &z) + comp
        });
        let end = traj.end_point();
        let xi = terminal(end.state, end.age);
        Ok(self.y(s)? + jumps - xi - drift)
    }
}
