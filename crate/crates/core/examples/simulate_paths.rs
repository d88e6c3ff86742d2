//! Samples a batch of paths and summarises jump counts and occupation at the horizon.

use smctrl::simulate::simulate_batch;
use smctrl::{AgePoint, RngSeed, SemiMarkovModel};

fn main() -> smctrl::Result<()> {
    let model = SemiMarkovModel::load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/example_model.json"
    ))?;
    let paths = simulate_batch(&model, AgePoint::new(0, 0.0), 1.5, 20_000, RngSeed(42))?;

    let mut counts = [0usize; 3];
    let mut occupation = vec![0usize; model.num_states()];
    for p in &paths {
        counts[p.jump_count().min(2)] += 1;
        occupation[p.end_point().state] += 1;
    }
    println!(
        "jumps: 0 -> {}, 1 -> {}, 2 -> {}",
        counts[0], counts[1], counts[2]
    );
    for (name, n) in model.state_names().iter().zip(&occupation) {
        println!("P(X_H = {name}) ~ {:.4}", *n as f64 / paths.len() as f64);
    }
    let first = &paths[0];
    println!("path 0: {:?}", first.jumps);
    Ok(())
}
