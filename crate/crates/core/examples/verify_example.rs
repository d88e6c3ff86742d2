//! End-to-end check on the four-state example: solver, feedback and both Monte
//! Carlo estimators against the closed form. Pass `alpha` as the first argument.

fn main() {
    let alpha = std::env::args().nth(1).unwrap_or_else(|| "0.5".into());
    let code = smctrl::cli::run([
        "smctrl",
        "verify-example",
        "--alpha",
        &alpha,
        "--paths",
        "50000",
    ]);
    std::process::exit(code);
}
