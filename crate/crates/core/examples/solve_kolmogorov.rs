//! Solves a nonlinear Kolmogorov equation by backward stepping and by Picard
//! iteration, and compares the two fields.

use smctrl::kolmogorov::{contraction_constant, GeneratorSpec};
use smctrl::{solve_backward, solve_picard, PiecewiseConstant, SemiMarkovModel};

fn main() -> smctrl::Result<()> {
    let model = SemiMarkovModel::new(
        vec!["up".into(), "down".into()],
        vec![
            PiecewiseConstant::new(vec![0.0, 0.4], vec![0.5, 2.0])?,
            PiecewiseConstant::constant(1.0),
        ],
        vec![vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
        None,
    )?;
    // f = cost in "down" − 0.3·y + a bounded nonlinearity in z
    let generator = GeneratorSpec::new(
        |_t, x, _a, y, z: &[f64]| if x == 1 { 1.0 } else { 0.0 } - 0.3 * y + 0.5 * z.iter().map(|v| v.tanh()).sum::<f64>(),
        1.0,
        0.3,
    );
    let terminal = |x: usize, a: f64| if x == 0 { a.min(1.0) } else { 0.0 };

    let dt = 0.01;
    let v = solve_backward(&model, &generator, &terminal, 1.0, dt, 1.0)?;
    let beta = 4.0 * contraction_constant(&model, &generator);
    let (w, log) = solve_picard(
        &model, &generator, &terminal, 1.0, dt, 1.0, beta, 1e-10, 200,
    )?;

    println!(
        "v(0, up, 0)   backward {:.6}  picard {:.6}",
        v.get(0, 0, 0),
        w.get(0, 0, 0)
    );
    println!(
        "v(0, down, 0) backward {:.6}  picard {:.6}",
        v.get(0, 1, 0),
        w.get(0, 1, 0)
    );
    println!("sup distance {:.2e}", v.sup_distance(&w));
    println!(
        "Picard: {} iterations, ratios ≤ {:.3} (bound {:.3})",
        log.iterations(),
        log.ratios().iter().cloned().fold(0.0, f64::max),
        log.rate_bound()
    );
    Ok(())
}
