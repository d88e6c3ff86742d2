use rand::Rng;

use crate::model::SemiMarkovModel;
use crate::simulate::RngSeed;

/// Driver `f(t, x, a, y, z)` of the backward equation, with `z` given as the vector
/// `(z_y)_{y∈K}`.
///
/// Implementations declare Lipschitz constants: `lipschitz_y` in `y` and `lipschitz_z`
/// in `z` for the norm `(Σ_y |z_y|² λ(x,a) q̄(x,a,{y}))^{1/2}`.
pub trait Generator: Sync {
    fn eval(&self, t: f64, x: usize, a: f64, y: f64, z: &[f64]) -> f64;
    fn lipschitz_z(&self) -> f64;
    fn lipschitz_y(&self) -> f64;
}

/// A closure generator with declared Lipschitz constants.
pub struct GeneratorSpec<F> {
    f: F,
    lipschitz_z: f64,
    lipschitz_y: f64,
}

impl<F> GeneratorSpec<F>
where
    F: Fn(f64, usize, f64, f64, &[f64]) -> f64 + Sync,
{
    pub fn new(f: F, lipschitz_z: f64, lipschitz_y: f64) -> Self {
        Self {
            f,
            lipschitz_z,
            lipschitz_y,
        }
    }
}

impl<F> Generator for GeneratorSpec<F>
where
    F: Fn(f64, usize, f64, f64, &[f64]) -> f64 + Sync,
{
    #[inline]
    fn eval(&self, t: f64, x: usize, a: f64, y: f64, z: &[f64]) -> f64 {
        (self.f)(t, x, a, y, z)
    }
    fn lipschitz_z(&self) -> f64 {
        self.lipschitz_z
    }
    fn lipschitz_y(&self) -> f64 {
        self.lipschitz_y
    }
}

/// `f ≡ 0`.
pub fn zero_generator() -> GeneratorSpec<impl Fn(f64, usize, f64, f64, &[f64]) -> f64 + Sync> {
    GeneratorSpec::new(|_, _, _, _, _| 0.0, 0.0, 0.0)
}

/// Largest observed excess of `|f(y,z) − f(y',z')|` over the declared Lipschitz bound,
/// over `probes` random argument pairs. Nonpositive means no violation was found.
pub fn lipschitz_excess(
    generator: &dyn Generator,
    model: &SemiMarkovModel,
    horizon: f64,
    max_age: f64,
    probes: usize,
    seed: RngSeed,
) -> f64 {
    let mut rng = seed.path_rng(0);
    let n = model.num_states();
    let mut worst = f64::NEG_INFINITY;
    let mut z1 = vec![0.0; n];
    let mut z2 = vec![0.0; n];
    for _ in 0..probes {
        let t = rng.random::<f64>() * horizon;
        let x = rng.random_range(0..n);
        let a = rng.random::<f64>() * max_age;
        let y1 = rng.random_range(-5.0..5.0);
        let y2 = rng.random_range(-5.0..5.0);
        for k in 0..n {
            z1[k] = rng.random_range(-5.0..5.0);
            z2[k] = rng.random_range(-5.0..5.0);
        }
        let (rate, row) = model.rate_and_row(x, a);
        let znorm = row
            .iter()
            .zip(z1.iter().zip(&z2))
            .map(|(p, (u, v))| (u - v) * (u - v) * p * rate)
            .sum::<f64>()
            .sqrt();
        let lhs = (generator.eval(t, x, a, y1, &z1) - generator.eval(t, x, a, y2, &z2)).abs();
        let rhs = generator.lipschitz_y() * (y1 - y2).abs() + generator.lipschitz_z() * znorm;
        worst = worst.max(lhs - rhs);
    }
    worst
}

/// `max{2α, 2L√α, L'}` with `α = sup λ q̄(·,K)`: the contraction constant of the
/// fixed-point map in the weighted norm `sup e^{−β(T−t)}|v|`.
pub fn contraction_constant(model: &SemiMarkovModel, generator: &dyn Generator) -> f64 {
    let alpha = model.max_jump_rate();
    (2.0 * alpha)
        .max(2.0 * generator.lipschitz_z() * alpha.sqrt())
        .max(generator.lipschitz_y())
}
