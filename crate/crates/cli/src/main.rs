use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pdl_core::analysis::{analyze, predict_sss_ritel, verify_ritel_superset, verify_theorem};
use pdl_core::config::{parse_config, RunConfig, SimSection};
use pdl_core::cooling::{divergence_test, schedule_experiment, ScheduleSpec};
use pdl_core::game::{fixtures, GameSpec, Quantization, UtilityModel};
use pdl_core::large_dev::{bin_resistance, empirical_rate_check, hoeffding_lower, legendre, Distribution};
use pdl_core::numeric::{parse_q, Q};
use pdl_core::policy::Algorithm;
use pdl_core::report::{analysis_json, canonical_json, emit_report, occupancy_csv, write_file, Format};
use pdl_core::sim::{merge_occupancy, run_replicates, Schedule};
use pdl_core::{PdlError, Result};

/// Simulate and analyze perturbation-based distributed learning on finite games.
#[derive(Parser)]
#[command(name = "pdl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run ITEL, IODL or RITEL at a fixed perturbation.
    Simulate(SimulateArgs),
    /// Exact chain analysis and stochastically stable set prediction.
    Analyze(AnalyzeArgs),
    /// Rate functions and bin resistances of a utility distribution.
    Ld(LdArgs),
    /// Cooling schedule experiments.
    Cool(CoolArgs),
    /// Write the built-in games as JSON files.
    Fixtures(FixturesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Itel,
    Iodl,
    Ritel,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Itel => Algorithm::Itel,
            Algo::Iodl => Algorithm::Iodl,
            Algo::Ritel => Algorithm::Ritel,
        }
    }
}

/// Options shared by every game-driven subcommand; flags override the file.
#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    game: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algo>,
    /// Bin width for RITEL, as a decimal or a fraction.
    #[arg(long, value_parser = parse_rational)]
    delta: Option<Q>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fail on violated assumptions instead of warning.
    #[arg(long)]
    strict: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Steps, or periods under RITEL.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    trace_every: Option<u64>,
    /// Occupancy table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Class graph in DOT format.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Check the prediction against exact stationary distributions.
    #[arg(long)]
    verify: bool,
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    /// Largest state space to enumerate.
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args)]
struct LdArgs {
    /// Bernoulli success probability.
    #[arg(long, conflicts_with_all = ["gaussian", "points"])]
    bernoulli: Option<f64>,
    /// Gaussian as MEAN,VARIANCE.
    #[arg(long, value_delimiter = ',', num_args = 2, conflicts_with = "points")]
    gaussian: Option<Vec<f64>>,
    /// Finite support as VALUE:PROB pairs separated by commas.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<String>>,
    /// Points where the rate function is evaluated.
    #[arg(long, value_delimiter = ',')]
    x: Vec<f64>,
    /// Target bin for the bin resistance.
    #[arg(long)]
    bin: Option<u32>,
    #[arg(long, value_parser = parse_rational)]
    delta: Option<Q>,
    #[arg(long)]
    tau0: Option<f64>,
    /// Perturbations for the exact tail slope check.
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoolArgs {
    #[command(flatten)]
    common: Common,
    /// Schedule as inline JSON, e.g. {"kind":"polynomial","k0":10,"gamma":4}.
    #[arg(long)]
    schedule: Vec<String>,
    /// Exponent the divergence test uses.
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
    #[arg(long, default_value_t = 100_000)]
    horizon: u64,
    #[arg(long)]
    replicates: Option<u64>,
}

#[derive(Args)]
struct FixturesArgs {
    /// Directory receiving one JSON file per game.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Only this fixture.
    #[arg(long)]
    name: Option<String>,
}

fn parse_rational(s: &str) -> std::result::Result<Q, String> {
    parse_q(s).ok_or_else(|| format!("`{s}` is not a number"))
}

fn load(common: &Common) -> Result<(RunConfig, GameSpec)> {
    let mut config = match &common.config {
        Some(path) => parse_config(path)?,
        None => {
            let game = common.game.clone().ok_or_else(|| PdlError::config("game", "pass --game or --config"))?;
            let algo = common.algo.ok_or_else(|| PdlError::config("algorithm", "pass --algo or --config"))?;
            RunConfig::minimal(game, algo.into())
        }
    };
    if common.config.is_some() {
        if let Some(g) = &common.game {
            config.game = std::env::current_dir().map_err(|e| PdlError::io(Path::new("."), e))?.join(g);
        }
        if let Some(a) = common.algo {
            config.algorithm = a.into();
        }
    }
    config.delta = common.delta.or(config.delta);
    config.tau0 = common.tau0.or(config.tau0);
    config.seed = common.seed.or(config.seed);
    config.strict |= common.strict;
    config.warnings = config.check()?;
    let game = config.load_game()?;
    for w in &config.warnings {
        eprintln!("warning: {w}");
    }
    Ok((config, game))
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let bytes = emit_report(value, Format::Json)?;
    match out {
        Some(path) => write_file(path, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn out_path(flag: &Option<PathBuf>, config: &RunConfig, configured: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| configured.as_ref().map(|p| config.output_path(p)))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (mut config, game) = load(&args.common)?;
    let mut sim = config.simulation.clone().unwrap_or(SimSection {
        epsilon: 0.0,
        steps: 0,
        replicates: 1,
        burn_in: pdl_core::sim::DEFAULT_BURN_IN,
        trace_every: None,
    });
    sim.epsilon = args.epsilon.unwrap_or(sim.epsilon);
    sim.steps = args.steps.unwrap_or(sim.steps);
    sim.replicates = args.replicates.unwrap_or(sim.replicates);
    sim.burn_in = args.burn_in.unwrap_or(sim.burn_in);
    sim.trace_every = args.trace_every.or(sim.trace_every);
    config.simulation = Some(sim);
    config.check()?;
    let (params, replicates) = config.sim_params()?;
    let policy = config.policy()?;
    let mut warnings = config.warnings.clone();
    if policy.algorithm == Algorithm::Ritel {
        warnings.extend(pdl_core::sim::ritel_warnings(&policy, &params)?);
    }
    let reports = run_replicates(&game, &policy, &params, None, replicates)?;
    let occupancy = merge_occupancy(&reports, false);
    let total: f64 = occupancy.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(PdlError::internal(format!("occupancy sums to {total}")));
    }
    let table = |m: &std::collections::BTreeMap<_, f64>| -> Value {
        m.iter().map(|(s, f): (&pdl_core::chain::GlobalState, &f64)| (s.to_string(), json!(f))).collect::<serde_json::Map<_, _>>().into()
    };
    let report = json!({
        "algorithm": policy.algorithm,
        "seed": params.seed,
        "params": params,
        "replicates": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        "occupancy": table(&occupancy),
        "occupancy_after_burn_in": table(&merge_occupancy(&reports, true)),
        "warnings": warnings,
    });
    if let Some(path) = out_path(&args.csv, &config, &config.output.csv) {
        write_file(&path, occupancy_csv(&occupancy).as_bytes())?;
    }
    emit(&report, out_path(&args.common.out, &config, &config.output.report).as_deref())
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<()> {
    let (mut config, game) = load(&args.common)?;
    if let Some(grid) = args.eps_grid {
        config.analysis.eps_grid = grid;
    }
    config.analysis.cap = args.cap.or(config.analysis.cap);
    config.analysis.verify |= args.verify;
    config.check()?;
    let report = match config.algorithm {
        Algorithm::Ritel => {
            let quant = config.quantization()?.expect("RITEL has bins");
            let tau0 = config.tau0.ok_or_else(|| PdlError::config("tau0", "RITEL needs a period constant"))?;
            let prediction = predict_sss_ritel(&game, &quant, tau0, &config.policy, config.strict)?;
            let mut v = json!({ "ritel": prediction });
            if config.analysis.verify {
                let checks = verify_ritel_superset(&game, &quant, tau0, &config.policy, &config.analysis.eps_grid)?;
                if let Some(last) = checks.last() {
                    if last.inside <= last.outside {
                        return Err(PdlError::internal(format!("superset mass {} at eps {} is not a majority", last.inside, last.epsilon)));
                    }
                }
                v["verification"] = json!(checks);
            }
            v
        }
        algorithm => {
            let analysis = analyze(&game, algorithm, &config.policy, config.strict, config.analysis.cap)?;
            if !analysis.agree() {
                return Err(PdlError::internal("formula and potential minimizers differ"));
            }
            if let Some(path) = out_path(&args.dot, &config, &config.output.dot) {
                write_file(&path, analysis.graph.to_dot().as_bytes())?;
            }
            let mut v = analysis_json(&analysis);
            if config.analysis.verify {
                let report = verify_theorem(&game, algorithm, &config.policy, &config.analysis.eps_grid, None)?;
                if !report.pass() {
                    return Err(PdlError::internal(report.failures.join("; ")));
                }
                v["verification"] = json!(report);
            }
            v
        }
    };
    emit(&report, out_path(&args.common.out, &config, &config.output.report).as_deref())
}

fn distribution(args: &LdArgs) -> Result<(Distribution, Option<UtilityModel>)> {
    if let Some(p) = args.bernoulli {
        let q = pdl_core::numeric::q_from_f64(p).ok_or_else(|| PdlError::config("bernoulli", "not finite"))?;
        let model = UtilityModel::bernoulli(q).map_err(|e| PdlError::config("bernoulli", e.to_string()))?;
        return Ok((Distribution::from_model(&model), Some(model)));
    }
    if let Some(g) = &args.gaussian {
        if g[1] <= 0.0 {
            return Err(PdlError::config("gaussian", "variance must be positive"));
        }
        return Ok((Distribution::gaussian(g[0], g[1]), None));
    }
    if let Some(points) = &args.points {
        let parsed = points
            .iter()
            .map(|p| {
                let (v, w) = p.split_once(':').ok_or_else(|| PdlError::config("points", format!("`{p}` is not VALUE:PROB")))?;
                match (parse_q(v), parse_q(w)) {
                    (Some(v), Some(w)) => Ok((v, w)),
                    _ => Err(PdlError::config("points", format!("`{p}` is not VALUE:PROB"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let model = UtilityModel::finite_support(parsed).map_err(|e| PdlError::config("points", e.to_string()))?;
        return Ok((Distribution::from_model(&model), Some(model)));
    }
    Err(PdlError::config("distribution", "pass --bernoulli, --gaussian or --points"))
}

fn ld(args: LdArgs) -> Result<()> {
    let (dist, model) = distribution(&args)?;
    let mean = dist.mean();
    let mut rates = Vec::new();
    for &x in &args.x {
        let rate = legendre(&dist, x).map_err(PdlError::from)?;
        rates.push(json!({ "x": x, "rate": rate, "hoeffding": hoeffding_lower(x, mean) }));
    }
    let mut report = json!({ "mean": mean, "variance": dist.variance(), "rates": rates });
    if let Some(bin) = args.bin {
        let delta = args.delta.ok_or_else(|| PdlError::config("delta", "--bin needs --delta"))?;
        let tau0 = args.tau0.ok_or_else(|| PdlError::config("tau0", "--bin needs --tau0"))?;
        let quant = Quantization::from_delta(delta).map_err(|e| PdlError::config("delta", e.to_string()))?;
        report["bin_resistance"] = json!(bin_resistance(&dist, bin, &quant, tau0).map_err(PdlError::from)?);
        if let (Some(grid), Some(model)) = (&args.eps_grid, &model) {
            report["slopes"] = json!(empirical_rate_check(model, bin, &quant, tau0, grid)?);
        }
    }
    emit(&report, args.out.as_deref())
}

fn cool(args: CoolArgs) -> Result<()> {
    let (config, game) = load(&args.common)?;
    let seed = config.require_seed()?;
    let mut specs: Vec<ScheduleSpec> = config.cooling.as_ref().map(|c| c.schedules.clone()).unwrap_or_default();
    for (k, text) in args.schedule.iter().enumerate() {
        let schedule: Schedule =
            serde_json::from_str(text).map_err(|e| PdlError::config(format!("schedule[{k}]"), e.to_string()))?;
        specs.push(ScheduleSpec {
            name: None,
            schedule,
            gamma: args.gamma,
            horizon: args.horizon,
        });
    }
    if specs.is_empty() {
        return Err(PdlError::config("schedule", "no schedule given"));
    }
    for (k, s) in specs.iter().enumerate() {
        s.schedule
            .validate()
            .map_err(|e| PdlError::config(format!("schedule[{k}]"), e.to_string()))?;
        divergence_test(&s.schedule, s.gamma, 1)?;
    }
    let replicates = args
        .replicates
        .or(config.cooling.as_ref().map(|c| c.replicates))
        .unwrap_or(200);
    let report = schedule_experiment(&game, config.algorithm, &config.policy, &specs, replicates, seed)?;
    emit(&json!(report), out_path(&args.common.out, &config, &config.output.report).as_deref())
}

fn dump_fixtures(args: FixturesArgs) -> Result<()> {
    let all = fixtures::all();
    if let Some(name) = &args.name {
        if !all.iter().any(|(n, _)| n == name) {
            return Err(PdlError::config("name", format!("unknown fixture `{name}`")));
        }
    }
    for (name, game) in all {
        if args.name.as_deref().is_some_and(|n| n != name) {
            continue;
        }
        let path = args.out_dir.join(format!("{name}.json"));
        write_file(&path, canonical_json(&game.to_json()).as_bytes())?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Ld(a) => ld(a),
        Command::Cool(a) => cool(a),
        Command::Fixtures(a) => dump_fixtures(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
