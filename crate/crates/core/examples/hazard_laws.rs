//! Jump-time and jump-kernel laws of a two-state model with a piecewise hazard.

use smctrl::{PiecewiseConstant, SemiMarkovModel};

fn main() -> smctrl::Result<()> {
    let model = SemiMarkovModel::new(
        vec!["healthy".into(), "ill".into(), "dead".into()],
        vec![
            PiecewiseConstant::new(vec![0.0, 1.0, 3.0], vec![0.2, 0.6, 1.5])?,
            PiecewiseConstant::constant(0.8),
            PiecewiseConstant::constant(0.0),
        ],
        vec![
            vec![
                vec![0.0, 0.9, 0.1],
                vec![0.0, 0.7, 0.3],
                vec![0.0, 0.5, 0.5],
            ],
            vec![vec![0.6, 0.0, 0.4]],
            vec![],
        ],
        None,
    )?;

    println!("{:>6} {:>10} {:>10}", "s", "H(s)", "S(1, s)");
    for k in 0..=8 {
        let s = 0.5 * k as f64;
        println!(
            "{s:>6.2} {:>10.5} {:>10.5}",
            model.distribution_h(0, s)?,
            model.survival(0, 1.0, s)?
        );
    }
    let dead = model.state_index("dead")?;
    let ill = model.state_index("ill")?;
    println!(
        "P(first jump lands in ill within (0, 2]) = {:.5}",
        model.kernel_q(0, 0.0, &[ill], 0.0, 2.0)?
    );
    println!(
        "P(first jump ever lands in dead) = {:.5}",
        model.kernel_q(0, 0.0, &[dead], 0.0, f64::INFINITY)?
    );
    Ok(())
}
