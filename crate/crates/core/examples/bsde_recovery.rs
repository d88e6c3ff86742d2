//! Reads the pair (Y, Z) off a solved field along one sampled path and checks the
//! Itô-type decomposition of `v` along it.

use smctrl::oracle::{example_model, example_problem, ExampleConfig, X1};
use smctrl::{
    check_ito_formula, recover_bsde, simulate_path, solve_hjb, AgePoint, HamiltonianGenerator,
    RngSeed,
};

fn main() -> smctrl::Result<()> {
    let cfg = ExampleConfig::unit(0.5, 1.0);
    let model = example_model(&cfg)?;
    let problem = example_problem(&cfg, &model)?;
    let field = solve_hjb(&problem, &model, 1e-3, 0.0)?;

    let traj = simulate_path(
        &model,
        AgePoint::new(X1, 0.0),
        1.0,
        &mut RngSeed(3).path_rng(0),
    )?;
    println!("jumps: {:?}", traj.jumps);
    let path = recover_bsde(&field, &traj, 0.0)?;
    for k in 0..=5 {
        let s = 0.2 * k as f64;
        let z: Vec<String> = (0..model.num_states())
            .map(|y| format!("{:+.4}", path.z(s, y).unwrap()))
            .collect();
        println!("s={s:.1}  Y={:.5}  Z=[{}]", path.y(s)?, z.join(", "));
    }
    let generator = HamiltonianGenerator::new(&problem, &model);
    let terminal = |x: usize, a: f64| problem.terminal_cost(x, a);
    println!(
        "equation defect on [0, H]: {:.2e}",
        path.equation_defect(&model, &generator, &terminal, 0.0)?
    );
    println!(
        "Itô residual: {:.2e}",
        check_ito_formula(&field, &traj, 0.0, &model)?
    );
    Ok(())
}
