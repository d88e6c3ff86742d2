//! Integrals against the jump measure, its compensator and the compensated measure.
//! The compensated integral has mean zero.

use smctrl::mpp::{integrate_compensator, integrate_p, integrate_q, FnField};
use smctrl::{simulate_path, AgePoint, PiecewiseConstant, RngSeed, SampleMean, SemiMarkovModel};

fn main() -> smctrl::Result<()> {
    let model = SemiMarkovModel::new(
        vec!["a".into(), "b".into()],
        vec![
            PiecewiseConstant::new(vec![0.0, 0.5], vec![1.0, 3.0])?,
            PiecewiseConstant::constant(2.0),
        ],
        vec![vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
        None,
    )?;
    // H_s(y) = (1 + s) for landing in b, −a_{s−} for landing in a
    let field =
        FnField::new(|s: f64, here: AgePoint, y: usize| if y == 1 { 1.0 + s } else { -here.age })
            .polynomial(1);

    let mut q = Vec::new();
    let (mut p_sum, mut c_sum) = (0.0, 0.0);
    for i in 0..20_000 {
        let traj = simulate_path(
            &model,
            AgePoint::new(0, 0.0),
            2.0,
            &mut RngSeed(7).path_rng(i),
        )?;
        p_sum += integrate_p(&traj, &field);
        c_sum += integrate_compensator(&traj, &field, &model)?;
        q.push(integrate_q(&traj, &field, &model)?);
    }
    let m = SampleMean::of(&q);
    println!("mean of  ∫H dp = {:.4}", p_sum / q.len() as f64);
    println!("mean of ∫H dΛ = {:.4}", c_sum / q.len() as f64);
    println!("mean of  ∫H dq = {:.4} ± {:.4}", m.mean, m.std_error);
    Ok(())
}
