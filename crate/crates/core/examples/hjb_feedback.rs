//! Solves the HJB equation of the four-state example, extracts the optimal feedback
//! and writes it as CSV.

use smctrl::oracle::{example_model, example_problem, oracle_y0, ExampleConfig, X1, X2};
use smctrl::{extract_feedback, solve_hjb, FeedbackLaw};

fn main() -> smctrl::Result<()> {
    for alpha in [0.5, 2.0] {
        let cfg = ExampleConfig::unit(alpha, 1.0);
        let model = example_model(&cfg)?;
        let problem = example_problem(&cfg, &model)?;
        let v = solve_hjb(&problem, &model, 1e-3, 0.0)?;
        let policy = extract_feedback(&problem, &model, &v)?;
        println!(
            "alpha={alpha}: v(0,x1,0)={:.6} closed form {:.6}; action in x2 at (t=0.5, a=0.2): {}",
            v.get(0, X1, 0),
            oracle_y0(&cfg, 0.0),
            problem.actions()[policy.action(0.5, X2, 0.2)?]
        );
        let out = std::env::temp_dir().join(format!("policy_alpha_{alpha}.csv"));
        policy.save(&out, &model, &problem)?;
        println!("  policy written to {}", out.display());
    }
    Ok(())
}
