//! The nonlinear Kolmogorov equation
//! `v(t,x,a) = g(x, a+T−t) + ∫_t^T [Lv + f(·, v, z)](s, x, a+s−t) ds`
//! with `z_y = v(s,y,0) − v(s,x,a+s−t)`, solved on characteristic-aligned grids.

pub mod backward;
pub mod bsde;
pub mod generator;
pub mod grid;
pub mod ito;
pub mod picard;

pub use backward::solve_backward;
pub use bsde::{recover_bsde, BsdePath};
pub use generator::{
    contraction_constant, lipschitz_excess, zero_generator, Generator, GeneratorSpec,
};
pub use grid::{Grid, ValueField};
pub use ito::check_ito_formula;
pub use picard::{solve_picard, weighted_distance, PicardLog};

use crate::model::{AgePoint, SemiMarkovModel};
use crate::mpp::{finish_cuts, push_age_cuts};
use crate::quadrature::gauss_legendre;
use crate::simulate::Trajectory;

/// `Lψ(x,a) = Σ_y [ψ(y,0) − ψ(x,a)] λ(x,a) q̄(x,a,{y})`.
pub fn apply_l(
    model: &SemiMarkovModel,
    field: impl Fn(usize, f64) -> f64,
    x: usize,
    a: f64,
) -> f64 {
    let (rate, row) = model.rate_and_row(x, a);
    if rate == 0.0 {
        return 0.0;
    }
    let here = field(x, a);
    row.iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(y, &p)| (field(y, 0.0) - here) * p)
        .sum::<f64>()
        * rate
}

/// `∫_from^H h(s, X_s, a_s) ds` along a trajectory, split at grid crossings and hazard
/// breaks and integrated with 3-point Gauss–Legendre on each piece.
pub(crate) fn integrate_along(
    traj: &Trajectory,
    grid: &Grid,
    model: &SemiMarkovModel,
    t_offset: f64,
    from: f64,
    h: impl Fn(f64, AgePoint) -> f64,
) -> f64 {
    let mut total = 0.0;
    let mut cuts = Vec::new();
    for seg in traj.segments() {
        if seg.end <= from || seg.end <= seg.start {
            continue;
        }
        cuts.clear();
        grid.push_crossings(&seg, t_offset, &mut cuts);
        push_age_cuts(&seg, model.age_breaks(seg.state), &mut cuts);
        if from > seg.start {
            cuts.push(from);
        }
        finish_cuts(&seg, &mut cuts);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0].max(from), w[1]);
            if hi <= lo {
                continue;
            }
            total += gauss_legendre(|s| h(s, AgePoint::new(seg.state, seg.age_at(s))), lo, hi, 5);
        }
    }
    total
}
