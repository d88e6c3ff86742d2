//! Integrals against the jump measure `p(ds dy)` of a trajectory, against its
//! compensator `λ(X_{s−},a_{s−}) q̄(X_{s−},a_{s−},dy) ds`, and against the
//! compensated measure `q = p − compensator`.

use crate::error::Result;
use crate::model::{AgePoint, SemiMarkovModel};
use crate::quadrature::{adaptive_simpson, gauss_legendre, MAX_EXACT_DEGREE};
use crate::simulate::{Segment, Trajectory};

/// Tolerance of the adaptive fallback quadrature, per path piece.
pub const COMPENSATOR_TOLERANCE: f64 = 1e-10;

/// A predictable integrand `H_s(y)`.
///
/// `current` is the pre-jump point `(X_{s−}, a_{s−})`, so evaluation can only
/// depend on the path strictly before `s`.
pub trait MarkField: Sync {
    fn eval(&self, s: f64, current: AgePoint, y: usize) -> f64;

    /// Degree in `s` along a jump-free piece, when the field is polynomial there.
    fn polynomial_degree(&self) -> Option<usize> {
        None
    }

    /// Local times inside `(seg.start, seg.end)` where the field stops being smooth.
    fn breakpoints(&self, _seg: &Segment) -> Vec<f64> {
        Vec::new()
    }

    /// Declared `sup |H|`, if bounded.
    fn bound(&self) -> Option<f64> {
        None
    }
}

/// A [`MarkField`] backed by a closure.
pub struct FnField<F> {
    f: F,
    degree: Option<usize>,
    bound: Option<f64>,
}

impl<F> FnField<F>
where
    F: Fn(f64, AgePoint, usize) -> f64 + Sync,
{
    pub fn new(f: F) -> Self {
        Self {
            f,
            degree: None,
            bound: None,
        }
    }

    /// Declares the field polynomial of degree `degree` in `s` between jumps.
    pub fn polynomial(mut self, degree: usize) -> Self {
        self.degree = Some(degree);
        self
    }

    pub fn bounded(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }
}

impl<F> MarkField for FnField<F>
where
    F: Fn(f64, AgePoint, usize) -> f64 + Sync,
{
    fn eval(&self, s: f64, current: AgePoint, y: usize) -> f64 {
        (self.f)(s, current, y)
    }
    fn polynomial_degree(&self) -> Option<usize> {
        self.degree
    }
    fn bound(&self) -> Option<f64> {
        self.bound
    }
}

/// Pushes the local times in `(seg.start, seg.end)` where the age crosses one of `breaks`.
pub(crate) fn push_age_cuts(seg: &Segment, breaks: &[f64], cuts: &mut Vec<f64>) {
    let a_end = seg.age_at(seg.end);
    for &b in breaks {
        if b > seg.age && b < a_end {
            cuts.push(seg.start + (b - seg.age));
        }
    }
}

/// Sorted, deduplicated piece boundaries of `seg` including both ends.
pub(crate) fn finish_cuts(seg: &Segment, cuts: &mut Vec<f64>) {
    cuts.push(seg.start);
    cuts.push(seg.end);
    cuts.retain(|&c| c >= seg.start && c <= seg.end);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
}

/// `∫_0^{T_h} ∫_K H_s(y) p(ds dy) = Σ_n H_{T_n}(X_{T_n})`.
pub fn integrate_p(traj: &Trajectory, field: &dyn MarkField) -> f64 {
    traj.jumps
        .iter()
        .enumerate()
        .map(|(n, j)| field.eval(j.time, traj.pre_jump(n), j.mark))
        .sum()
}

/// `∫_0^{T_h} Σ_y H_s(y) λ(X_s,a_s) q̄(X_s,a_s,{y}) ds`, exact on each piece when the
/// field is polynomial, adaptive quadrature otherwise.
pub fn integrate_compensator(
    traj: &Trajectory,
    field: &dyn MarkField,
    model: &SemiMarkovModel,
) -> Result<f64> {
    let degree = field.polynomial_degree().filter(|&d| d <= MAX_EXACT_DEGREE);
    let mut total = 0.0;
    let mut cuts = Vec::new();
    for seg in traj.segments() {
        if seg.end <= seg.start {
            continue;
        }
        cuts.clear();
        push_age_cuts(&seg, model.age_breaks(seg.state), &mut cuts);
        cuts.extend(field.breakpoints(&seg));
        finish_cuts(&seg, &mut cuts);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let (rate, row) = model.rate_and_row(seg.state, seg.age_at(0.5 * (lo + hi)));
            if rate == 0.0 {
                continue;
            }
            let integrand = |s: f64| {
                let here = AgePoint::new(seg.state, seg.age_at(s));
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(y, &p)| field.eval(s, here, y) * p)
                    .sum::<f64>()
                    * rate
            };
            total += match degree {
                Some(d) => gauss_legendre(integrand, lo, hi, d),
                None => adaptive_simpson(integrand, lo, hi, COMPENSATOR_TOLERANCE)?,
            };
        }
    }
    Ok(total)
}

/// `∫ H dq = ∫ H dp − ∫ H d(compensator)`.
pub fn integrate_q(
    traj: &Trajectory,
    field: &dyn MarkField,
    model: &SemiMarkovModel,
) -> Result<f64> {
    Ok(integrate_p(traj, field) - integrate_compensator(traj, field, model)?)
}
