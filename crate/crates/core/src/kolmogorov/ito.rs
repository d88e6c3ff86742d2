use crate::error::Result;
use crate::model::{AgePoint, SemiMarkovModel};
use crate::mpp::{integrate_q, MarkField};
use crate::simulate::{Segment, Trajectory};

use super::grid::ValueField;
use super::{apply_l, integrate_along};

/// `H_s(y) = v(t+s, y, 0) − v(t+s, X_{s−}, a_{s−})`, linear in `s` between grid crossings.
struct IncrementField<'a> {
    field: &'a ValueField,
    t_offset: f64,
}

impl MarkField for IncrementField<'_> {
    fn eval(&self, s: f64, current: AgePoint, y: usize) -> f64 {
        let t = self.t_offset + s;
        self.field.eval_unchecked(t, y, 0.0)
            - self.field.eval_unchecked(t, current.state, current.age)
    }
    fn polynomial_degree(&self) -> Option<usize> {
        Some(1)
    }
    fn breakpoints(&self, seg: &Segment) -> Vec<f64> {
        let mut cuts = Vec::new();
        self.field
            .grid()
            .push_crossings(seg, self.t_offset, &mut cuts);
        cuts
    }
}

/// Nodal directional derivative `(v[i+1][x][j+1] − v[i][x][j]) / dt`, with the top age
/// row closed like the solvers and the last time line copied from the one before.
fn directional_derivative(field: &ValueField) -> ValueField {
    let g = *field.grid();
    let n = field.num_states();
    let mut d = ValueField::zeros(g, n);
    for i in 0..g.steps {
        for x in 0..n {
            for j in 0..=g.ages {
                let up = field.get(i + 1, x, (j + 1).min(g.ages));
                d.set(i, x, j, (up - field.get(i, x, j)) / g.dt);
            }
        }
    }
    for x in 0..n {
        for j in 0..=g.ages {
            let v = d.get(g.steps - 1, x, j);
            d.set(g.steps, x, j, v);
        }
    }
    d
}

/// Pathwise defect of the Itô-type formula
/// `v(t+H, X_H, a_H) − v(t, x, a) = ∫ Dv ds + ∫ Lv ds + ∫∫ [v(·,y,0) − v(·,X_{s−},a_{s−})] q(ds dy)`
/// for a trajectory of length `H` started at time `t = t_offset`.
///
/// `Dv` is the grid diagonal difference, read between nodes with the same interpolation
/// as the field, so the residual is a first-order discretisation error in `dt`.
pub fn check_ito_formula(
    field: &ValueField,
    trajectory: &Trajectory,
    t_offset: f64,
    model: &SemiMarkovModel,
) -> Result<f64> {
    let path = super::recover_bsde(field, trajectory, t_offset)?;
    let grid = field.grid();
    let end = trajectory.end_point();
    let left = field.eval(t_offset + trajectory.horizon, end.state, end.age)? - path.y(0.0)?;

    let d = directional_derivative(field);
    let d_int = integrate_along(trajectory, grid, model, t_offset, 0.0, |s, p| {
        d.eval_unchecked(t_offset + s, p.state, p.age)
    });
    let l_int = integrate_along(trajectory, grid, model, t_offset, 0.0, |s, p| {
        let t = t_offset + s;
        apply_l(model, |y, a| field.eval_unchecked(t, y, a), p.state, p.age)
    });
    let increments = IncrementField { field, t_offset };
    let q_int = integrate_q(trajectory, &increments, model)?;
    Ok((left - (d_int + l_int + q_int)).abs())
}
