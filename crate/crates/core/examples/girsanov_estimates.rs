//! Estimates the cost of a feedback by reweighting reference paths and by thinning,
//! and checks that the mean Girsanov weight is one.

use smctrl::montecarlo::mean_weight;
use smctrl::oracle::{example_model, example_problem, ExampleConfig, X1};
use smctrl::{estimate_cost_thinned, estimate_cost_weighted, AgePoint, ConstantFeedback, RngSeed};

fn main() -> smctrl::Result<()> {
    let cfg = ExampleConfig::unit(0.5, 1.0);
    let model = example_model(&cfg)?;
    let problem = example_problem(&cfg, &model)?;
    let start = AgePoint::new(X1, 0.0);
    for u in 0..problem.actions().len() {
        let law = ConstantFeedback(u);
        let w = estimate_cost_weighted(&problem, &model, start, 0.0, &law, 50_000, RngSeed(1))?;
        let t = estimate_cost_thinned(&problem, &model, start, 0.0, &law, 50_000, RngSeed(2))?;
        let m = mean_weight(&problem, &model, start, 0.0, &law, 50_000, RngSeed(3))?;
        println!(
            "u ≡ {}: weighted {:.4} ± {:.4}, thinned {:.4} ± {:.4}, mean weight {:.4} ± {:.4}",
            problem.actions()[u],
            w.mean,
            w.std_error,
            t.mean,
            t.std_error,
            m.mean,
            m.std_error
        );
    }
    Ok(())
}
