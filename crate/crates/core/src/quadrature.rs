//! One-dimensional quadrature used on jump-free path pieces.

use crate::error::{Error, Result};

const GL_NODES: [&[(f64, f64)]; 5] = [
    &[(0.0, 2.0)],
    &[
        (-0.577_350_269_189_625_8, 1.0),
        (0.577_350_269_189_625_8, 1.0),
    ],
    &[
        (-0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
        (0.0, 0.888_888_888_888_889),
        (0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
    ],
    &[
        (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    ],
    &[
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ],
];

/// Highest polynomial degree integrated exactly by [`gauss_legendre`].
pub const MAX_EXACT_DEGREE: usize = 9;

/// Gauss–Legendre rule exact for polynomials of degree `≤ degree` (up to [`MAX_EXACT_DEGREE`]).
pub fn gauss_legendre(f: impl Fn(f64) -> f64, lo: f64, hi: f64, degree: usize) -> f64 {
    let n = (degree / 2 + 1).min(GL_NODES.len());
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    half * GL_NODES[n - 1]
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Adaptive Simpson rule with absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let fa = f(lo);
    let fm = f(0.5 * (lo + hi));
    let fb = f(hi);
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst: f64 = 0.0;
    let v = simpson_step(&f, lo, hi, fa, fm, fb, whole, tol, 50, &mut worst);
    if worst > tol {
        return Err(Error::Quadrature {
            tolerance: tol,
            achieved: worst,
        });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a) < 1e-14 * (1.0 + a.abs()) {
        if depth == 0 {
            *worst = worst.max(delta.abs() / 15.0);
        }
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst)
}
