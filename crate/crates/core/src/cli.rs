//! Command-line front end. Every output file gets a `<out>.manifest.json` next to
//! it recording the input hashes, seed and crate version needed to reproduce it.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::control::{
    extract_feedback, solve_hjb, ControlProblem, FeedbackLaw, GridPolicy, HamiltonianGenerator,
};
use crate::error::{Error, Result};
use crate::kolmogorov::{contraction_constant, solve_picard, ValueField};
use crate::model::{AgePoint, SemiMarkovModel};
use crate::montecarlo::{estimate_cost_thinned, estimate_cost_weighted, CostEstimate};
use crate::oracle::{example_model, example_problem, oracle_y0, ExampleConfig, X1};
use crate::simulate::{simulate_batch, RngSeed};

#[derive(Debug, Parser)]
#[command(
    name = "smctrl",
    version,
    about = "Semi-Markov simulation, HJB solving and control verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SolveMethod {
    Backward,
    Picard,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum EvalMethod {
    Weighted,
    Thinned,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample trajectories; writes path_id,jump_index,time,mark rows.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Start point as STATE:AGE.
        #[arg(long)]
        start: String,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the HJB equation of a problem; writes t,state,a,v rows.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        dt: f64,
        #[arg(long, default_value_t = 0.0)]
        a_max: f64,
        #[arg(long, value_enum, default_value_t = SolveMethod::Backward)]
        method: SolveMethod,
        /// Picard weight; defaults to 4 times the contraction constant.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the HJB equation and write the optimal feedback as t,state,a,action rows.
    Control {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        dt: f64,
        #[arg(long, default_value_t = 0.0)]
        a_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo estimate of the cost of a feedback policy.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// A policy CSV or `builtin-optimal`.
        #[arg(long)]
        policy: String,
        /// Start point as STATE:AGE; defaults to the first state at age 0.
        #[arg(long)]
        start: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        t_offset: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EvalMethod::Both)]
        method: EvalMethod,
        /// Grid step for `builtin-optimal`.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0.0)]
        a_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check solver and estimators against the closed-form four-state example.
    VerifyExample {
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Optional JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs the CLI: exit code 0 on success, 1 on usage or validation errors, 2 on
/// numerical failure or a failed verification.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let args: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli.command, &args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    argv: &'a [String],
    inputs: Vec<(String, String)>,
    seed: Option<u64>,
    output: String,
    output_sha256: String,
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn write_manifest(out: &Path, argv: &[String], inputs: &[&Path], seed: Option<u64>) -> Result<()> {
    let manifest = Manifest {
        tool: "smctrl",
        version: env!("CARGO_PKG_VERSION"),
        argv,
        inputs: inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
            .collect::<Result<_>>()?,
        seed,
        output: out.display().to_string(),
        output_sha256: sha256_file(out)?,
    };
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    std::fs::write(
        PathBuf::from(name),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

fn parse_start(s: &str, model: &SemiMarkovModel) -> Result<AgePoint> {
    let (name, age) = s
        .rsplit_once(':')
        .ok_or_else(|| Error::validation("--start", format!("expected STATE:AGE, got {s:?}")))?;
    let state = model
        .state_index(name)
        .map_err(|_| Error::validation("--start", format!("unknown state {name:?}")))?;
    let age: f64 = age
        .parse()
        .map_err(|_| Error::validation("--start", format!("bad age {age:?}")))?;
    if !(age >= 0.0) || !age.is_finite() {
        return Err(Error::validation(
            "--start",
            "age must be finite and nonnegative",
        ));
    }
    Ok(AgePoint::new(state, age))
}

fn write_field(field: &ValueField, model: &SemiMarkovModel, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(out)?));
    w.write_record(["t", "state", "a", "v"])?;
    let g = *field.grid();
    for i in 0..=g.steps {
        for (x, name) in model.state_names().iter().enumerate() {
            for (j, v) in field.row(i, x).iter().enumerate() {
                w.write_record([
                    format!("{}", g.time(i)),
                    name.clone(),
                    format!("{}", g.age(j)),
                    format!("{v}"),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn execute(command: Command, argv: &[String]) -> Result<i32> {
    match command {
        Command::Simulate {
            model,
            start,
            horizon,
            paths,
            seed,
            out,
        } => {
            let m = SemiMarkovModel::load(&model)?;
            let start = parse_start(&start, &m)?;
            let trajs = simulate_batch(&m, start, horizon, paths, RngSeed(seed))?;
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&out)?));
            w.write_record(["path_id", "jump_index", "time", "mark"])?;
            for (p, t) in trajs.iter().enumerate() {
                for (k, j) in t.jumps.iter().enumerate() {
                    w.write_record([
                        p.to_string(),
                        k.to_string(),
                        format!("{}", j.time),
                        m.state_names()[j.mark].clone(),
                    ])?;
                }
            }
            w.flush()?;
            drop(w);
            write_manifest(&out, argv, &[&model], Some(seed))?;
            let jumps: usize = trajs.iter().map(|t| t.jump_count()).sum();
            println!("{paths} paths, {jumps} jumps -> {}", out.display());
            Ok(0)
        }
        Command::Solve {
            model,
            problem,
            dt,
            a_max,
            method,
            beta,
            tol,
            max_iter,
            out,
        } => {
            let m = SemiMarkovModel::load(&model)?;
            let p = ControlProblem::load(&problem, &m)?;
            let field = match method {
                SolveMethod::Backward => solve_hjb(&p, &m, dt, a_max)?,
                SolveMethod::Picard => {
                    let gen = HamiltonianGenerator::new(&p, &m);
                    let beta =
                        beta.unwrap_or_else(|| 4.0 * contraction_constant(&m, &gen).max(0.25));
                    let (field, log) = solve_picard(
                        &m,
                        &gen,
                        &|x, a| p.terminal_cost(x, a),
                        p.horizon(),
                        dt,
                        a_max,
                        beta,
                        tol,
                        max_iter,
                    )?;
                    println!("picard: {} iterations, beta = {beta}", log.iterations());
                    field
                }
            };
            write_field(&field, &m, &out)?;
            write_manifest(&out, argv, &[&model, &problem], None)?;
            println!("v(0, {}, 0) = {}", m.state_names()[0], field.get(0, 0, 0));
            Ok(0)
        }
        Command::Control {
            model,
            problem,
            dt,
            a_max,
            out,
        } => {
            let m = SemiMarkovModel::load(&model)?;
            let p = ControlProblem::load(&problem, &m)?;
            let field = solve_hjb(&p, &m, dt, a_max)?;
            let policy = extract_feedback(&p, &m, &field)?;
            policy.save(&out, &m, &p)?;
            write_manifest(&out, argv, &[&model, &problem], None)?;
            println!(
                "policy on {} time lines -> {}",
                field.grid().steps + 1,
                out.display()
            );
            Ok(0)
        }
        Command::Evaluate {
            model,
            problem,
            policy,
            start,
            t_offset,
            paths,
            seed,
            method,
            dt,
            a_max,
            out,
        } => {
            let m = SemiMarkovModel::load(&model)?;
            let p = ControlProblem::load(&problem, &m)?;
            let start = match start {
                Some(s) => parse_start(&s, &m)?,
                None => AgePoint::new(0, 0.0),
            };
            let mut inputs: Vec<&Path> = vec![&model, &problem];
            let policy_path = PathBuf::from(&policy);
            let law: GridPolicy = if policy == "builtin-optimal" {
                let field = solve_hjb(&p, &m, dt, a_max.max(start.age))?;
                extract_feedback(&p, &m, &field)?
            } else {
                inputs.push(&policy_path);
                GridPolicy::load(&policy_path, &m, &p)?
            };
            let estimates = evaluate(&p, &m, start, t_offset, &law, paths, RngSeed(seed), method)?;
            let mut hasher = Sha256::new();
            for path in &inputs {
                hasher.update(std::fs::read(path)?);
            }
            // the output location is not part of the configuration
            let mut skip = false;
            let args: Vec<&str> = argv
                .iter()
                .filter(|a| {
                    let drop = skip || a.starts_with("--out=");
                    skip = *a == "--out";
                    !drop && !skip
                })
                .map(String::as_str)
                .collect();
            hasher.update(args.join("\u{1f}").as_bytes());
            #[derive(Serialize)]
            struct Report<'a> {
                estimates: &'a [CostEstimate],
                seed: u64,
                config_hash: String,
            }
            let report = Report {
                estimates: &estimates,
                seed,
                config_hash: hex::encode(hasher.finalize()),
            };
            std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
            write_manifest(&out, argv, &inputs, Some(seed))?;
            for e in &estimates {
                println!(
                    "{:?}: {:.6} ± {:.6} ({} paths)",
                    e.method, e.mean, e.std_error, e.paths
                );
            }
            Ok(0)
        }
        Command::VerifyExample {
            alpha,
            horizon,
            dt,
            paths,
            seed,
            out,
        } => verify_example(alpha, horizon, dt, paths, seed, out.as_deref(), argv),
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    p: &ControlProblem,
    m: &SemiMarkovModel,
    start: AgePoint,
    t_offset: f64,
    law: &dyn FeedbackLaw,
    paths: usize,
    seed: RngSeed,
    method: EvalMethod,
) -> Result<Vec<CostEstimate>> {
    let mut out = Vec::new();
    if matches!(method, EvalMethod::Weighted | EvalMethod::Both) {
        out.push(estimate_cost_weighted(
            p, m, start, t_offset, law, paths, seed,
        )?);
    }
    if matches!(method, EvalMethod::Thinned | EvalMethod::Both) {
        out.push(estimate_cost_thinned(
            p, m, start, t_offset, law, paths, seed,
        )?);
    }
    Ok(out)
}

/// Tolerance of the HJB value against the closed form.
const VALUE_TOLERANCE: f64 = 1e-2;

fn verify_example(
    alpha: f64,
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: u64,
    out: Option<&Path>,
    argv: &[String],
) -> Result<i32> {
    if !(alpha > 0.0) {
        return Err(Error::validation("--alpha", "must be positive"));
    }
    let cfg = ExampleConfig::unit(alpha, horizon);
    let m = example_model(&cfg)?;
    let p = example_problem(&cfg, &m)?;
    let field = solve_hjb(&p, &m, dt, 0.0)?;
    let law = extract_feedback(&p, &m, &field)?;
    let oracle = oracle_y0(&cfg, 0.0);
    let v = field.get(0, X1, 0);
    let start = AgePoint::new(X1, 0.0);
    let estimates = evaluate(
        &p,
        &m,
        start,
        0.0,
        &law,
        paths,
        RngSeed(seed),
        EvalMethod::Both,
    )?;

    #[derive(Serialize)]
    struct Row {
        quantity: String,
        value: f64,
        std_error: Option<f64>,
        reference: f64,
        tolerance: f64,
        pass: bool,
    }
    let mut rows = vec![Row {
        quantity: "hjb v(0,x1,0)".into(),
        value: v,
        std_error: None,
        reference: oracle,
        tolerance: VALUE_TOLERANCE,
        pass: (v - oracle).abs() <= VALUE_TOLERANCE,
    }];
    for e in &estimates {
        let tol = 3.0 * e.std_error + VALUE_TOLERANCE;
        rows.push(Row {
            quantity: format!("{:?} J(u*)", e.method).to_lowercase(),
            value: e.mean,
            std_error: Some(e.std_error),
            reference: v,
            tolerance: tol,
            pass: (e.mean - v).abs() <= tol,
        });
    }
    println!("alpha = {alpha}, T = {horizon}, dt = {dt}, paths = {paths}, seed = {seed}");
    println!("oracle y0(0)          {oracle:.7}");
    for r in &rows {
        let se = r.std_error.map_or(String::new(), |s| format!(" ± {s:.7}"));
        println!(
            "{:<22}{:.7}{se}  |diff| {:.2e} <= {:.2e}  {}",
            r.quantity,
            r.value,
            (r.value - r.reference).abs(),
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let pass = rows.iter().all(|r| r.pass);
    println!("{}", if pass { "PASS" } else { "FAIL" });
    if let Some(path) = out {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(
            &mut f,
            &serde_json::json!({ "oracle_y0": oracle, "rows": rows, "pass": pass }),
        )?;
        writeln!(f)?;
        drop(f);
        write_manifest(path, argv, &[], Some(seed))?;
    }
    Ok(if pass { 0 } else { 2 })
}
