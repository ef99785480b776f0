use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stochmatch::bounds::{self, appendix_check, min_ratio, search_params};
use stochmatch::engine::{monte_carlo_with, offline_optimum, sample_arrivals, uniform_grid, McConfig, Policy};
use stochmatch::lp::{build_basic_matching, build_jaillet_lu, solve, to_matching, LpStatus};
use stochmatch::pipeline::{run_pipeline, PipelineConfig, Stage};
use stochmatch::preprocess::{pad_offline, pad_online, preprocess, split_types};
use stochmatch::{classify, parallel, validate_instance, validate_matching, Error, FractionalMatching, Instance};

/// Edge-weighted online stochastic matching experiments.
#[derive(Parser)]
#[command(name = "stochmatch", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check an instance (and optionally a matching) and print the report as JSON.
    Validate {
        instance: PathBuf,
        #[arg(long)]
        matching: Option<PathBuf>,
    },
    /// Solve the Jaillet-Lu LP (or the plain matching LP with --basic).
    SolveLp {
        instance: PathBuf,
        /// Write the matching here instead of standard output.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        basic: bool,
        /// Write a plain-text dump of the LP to this file.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Run one preprocessing step, or all of them.
    Preprocess {
        instance: PathBuf,
        matching: PathBuf,
        #[arg(long, value_enum, default_value_t = Step::All)]
        step: Step,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        times: Times,
    },
    /// Monte Carlo of one policy. The matching is preprocessed first unless
    /// it already has the two-class form.
    Simulate {
        instance: PathBuf,
        matching: PathBuf,
        #[arg(long, default_value = "multistage")]
        policy: Policy,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        times: Times,
        /// Per-edge statistics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Full statistics, survival curves included, as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// LP, preprocessing, then Monte Carlo of both policies.
    Pipeline {
        instance: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        times: Times,
    },
    /// Closed-form ratio curves and the monotonicity certificate.
    Bounds {
        #[command(flatten)]
        times: Times,
        /// Points of the y grid.
        #[arg(long, default_value_t = 10_000)]
        grid_points: usize,
        /// Also run the parameter search over [0, 0.2] x [0.5, 1].
        #[arg(long)]
        search: bool,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Write ratio_curve.csv and appendix.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Grid search for the stage boundaries.
    SearchParams {
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.0, 0.2])]
        t0_range: Vec<f64>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.5, 1.0])]
        t1_range: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Mean offline optimum over sampled arrival sequences.
    Opt {
        instance: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Step {
    PadOnline,
    PadOffline,
    Split,
    All,
}

#[derive(Args)]
struct Times {
    #[arg(long, default_value_t = bounds::DEFAULT_T0)]
    t0: f64,
    #[arg(long, default_value_t = bounds::DEFAULT_T1)]
    t1: f64,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Points of the survival-curve time grid on [0, 1].
    #[arg(long, default_value_t = 21)]
    grid_points: usize,
    /// Also solve the offline optimum of every replication.
    #[arg(long)]
    with_opt: bool,
}

/// Failure with its exit code: 1 validation, 2 I/O, 3 internal.
struct Fail {
    code: u8,
    msg: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInstance(_) | Error::InfeasibleMatching(_) | Error::NotPreprocessed(_) | Error::Domain(_) => 1,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::Internal(_) => 3,
        };
        Fail { code, msg: e.to_string() }
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail { code: 1, msg: msg.into() }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Fail {
    Fail { code: 2, msg: format!("{}: {e}", path.display()) }
}

type CmdResult = Result<(), Fail>;

fn read_instance(path: &Path) -> Result<Instance, Fail> {
    Instance::read(path).map_err(|e| io_fail(path, e))
}

fn read_matching(path: &Path) -> Result<FractionalMatching, Fail> {
    FractionalMatching::read(path).map_err(|e| io_fail(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Fail> {
    File::create(path).map(BufWriter::new).map_err(|e| io_fail(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_fail(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_fail(path, e))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| io_fail(path, e))
}

/// Writes to standard output; a closed pipe (e.g. `| head`) is not an error.
fn print_text(text: &str) -> CmdResult {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Fail { code: 2, msg: format!("stdout: {e}") }),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Fail { code: 3, msg: e.to_string() })?;
    print_text(&text)
}

fn make_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))
}

fn in_dir(dir: &Path, name: &str, write: impl FnOnce(&Path) -> stochmatch::Result<()>) -> CmdResult {
    let path = dir.join(name);
    write(&path).map_err(|e| io_fail(&path, e))
}

fn check_sim(sim: &SimArgs) -> CmdResult {
    if sim.trials == 0 {
        return Err(invalid("--trials must be at least 1"));
    }
    Ok(())
}

fn validate(instance: &Path, matching: Option<&Path>) -> CmdResult {
    let inst = read_instance(instance)?;
    let mut report = validate_instance(&inst);
    if let Some(m) = matching {
        if report.is_ok() {
            report = validate_matching(&inst, &read_matching(m)?);
        }
    }
    print_json(&report)?;
    if report.is_ok() {
        Ok(())
    } else {
        Err(invalid(format!("{} violation(s)", report.violations.len())))
    }
}

fn ensure_valid(inst: &Instance) -> CmdResult {
    match validate_instance(inst).violations.first() {
        Some(v) => Err(invalid(format!("invalid instance: {}", v.message))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct LpSummary {
    lp: &'static str,
    objective: f64,
    variables: usize,
    rows: usize,
}

fn solve_lp(instance: &Path, out: Option<&Path>, basic: bool, dump: Option<&Path>) -> CmdResult {
    let inst = read_instance(instance)?;
    ensure_valid(&inst)?;
    let problem = if basic { build_basic_matching(&inst) } else { build_jaillet_lu(&inst) };
    if let Some(path) = dump {
        write_text(path, &problem.dump())?;
    }
    let sol = solve(&problem);
    if sol.status != LpStatus::Optimal {
        return Err(Fail { code: 3, msg: format!("LP reported {:?}", sol.status) });
    }
    let fm = to_matching(&inst, &sol);
    let summary = LpSummary {
        lp: if basic { "basic" } else { "jaillet_lu" },
        objective: sol.objective,
        variables: problem.num_vars(),
        rows: problem.rows.len(),
    };
    match out {
        Some(path) => {
            fm.write(path).map_err(|e| io_fail(path, e))?;
            print_json(&summary)
        }
        None => {
            eprintln!("objective {}", sol.objective);
            print_text(&fm.to_json()?)
        }
    }
}

#[derive(Serialize)]
struct ClassRow {
    online: String,
    offline: String,
    class: stochmatch::EdgeClass,
    flow: f64,
    weight: f64,
    y_j: f64,
}

fn preprocess_cmd(instance: &Path, matching: &Path, step: Step, out_dir: &Path, times: &Times) -> CmdResult {
    let inst = read_instance(instance)?;
    let fm = read_matching(matching)?;
    ensure_valid(&inst)?;
    if let Some(v) = validate_matching(&inst, &fm).violations.first() {
        return Err(invalid(format!("matching is not Jaillet-Lu feasible: {}", v.message)));
    }
    make_dir(out_dir)?;
    let write_pair = |i: &Instance, f: &FractionalMatching| -> CmdResult {
        in_dir(out_dir, "instance.json", |p| i.write(p))?;
        in_dir(out_dir, "matching.json", |p| f.write(p))
    };
    match step {
        Step::PadOnline => {
            let (i, f) = pad_online(&inst, &fm);
            write_pair(&i, &f)
        }
        Step::PadOffline => {
            let (xi, _) = fm.totals(&inst);
            if inst.online_types().iter().zip(&xi).any(|(t, x)| (t.rate - x).abs() > stochmatch::TOL) {
                return Err(invalid("pad-offline needs x_i = λ_i for every type; run pad-online first"));
            }
            let (i, f) = pad_offline(&inst, &fm);
            write_pair(&i, &f)
        }
        Step::Split => {
            let (xi, xj) = fm.totals(&inst);
            let rates_ok = inst.online_types().iter().zip(&xi).all(|(t, x)| (t.rate - x).abs() <= stochmatch::TOL);
            if !rates_ok || xj.iter().any(|x| (x - 1.0).abs() > stochmatch::TOL) {
                return Err(invalid("split needs x_i = λ_i and x_j = 1; run pad-online and pad-offline first"));
            }
            let (i, f, map) = split_types(&inst, &fm);
            write_pair(&i, &f)?;
            in_dir(out_dir, "split_map.json", |p| Ok(fs::write(p, map.to_json()? + "\n")?))
        }
        Step::All => {
            let (p, map) = preprocess(&inst, &fm, times.t0, times.t1)?;
            write_pair(p.instance(), p.matching())?;
            in_dir(out_dir, "split_map.json", |path| Ok(fs::write(path, map.to_json()? + "\n")?))?;
            let inst = p.instance();
            let rows: Vec<ClassRow> = p
                .edges()
                .iter()
                .map(|e| ClassRow {
                    online: inst.online_types()[e.online].id.clone(),
                    offline: inst.offline()[e.offline].clone(),
                    class: e.class,
                    flow: e.flow,
                    weight: e.weight,
                    y_j: p.y()[e.offline],
                })
                .collect();
            write_json(&out_dir.join("classes.json"), &rows)
        }
    }
}

#[derive(Serialize)]
struct SimSummary<'a> {
    policy: Policy,
    trials: u64,
    seed: u64,
    preprocessed: bool,
    mean_weight: f64,
    mean_offline_opt: Option<f64>,
    min_ratio: Option<f64>,
    edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<&'a Path>,
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    instance: &Path,
    matching: &Path,
    policy: Policy,
    sim: &SimArgs,
    times: &Times,
    csv: Option<&Path>,
    json: Option<&Path>,
) -> CmdResult {
    check_sim(sim)?;
    let inst = read_instance(instance)?;
    let fm = read_matching(matching)?;
    ensure_valid(&inst)?;
    let mut cfg = McConfig::new(policy, sim.trials, sim.seed);
    cfg.time_grid = uniform_grid(sim.grid_points);
    cfg.with_opt = sim.with_opt;
    // already in two-class form: simulate as given
    let (pinst, preprocessed) = match classify(&inst, &fm, times.t0, times.t1) {
        Ok(p) => (p, false),
        Err(Error::Domain(m)) => return Err(invalid(m)),
        Err(_) => {
            let (p, map) = preprocess(&inst, &fm, times.t0, times.t1)?;
            if sim.with_opt {
                cfg.original = Some((inst.clone(), map));
            }
            (p, true)
        }
    };
    let stats = monte_carlo_with(&pinst, &cfg)?;
    if let Some(path) = csv {
        stats.write_csv(create(path)?).map_err(|e| io_fail(path, e))?;
    }
    if let Some(path) = json {
        write_text(path, &(stats.to_json()? + "\n"))?;
    }
    print_json(&SimSummary {
        policy,
        trials: stats.trials,
        seed: stats.seed,
        preprocessed,
        mean_weight: stats.mean_weight,
        mean_offline_opt: stats.mean_offline_opt,
        min_ratio: stats.edges.iter().map(|e| e.ratio).reduce(f64::min),
        edges: stats.edges.len(),
        csv,
    })
}

#[derive(Serialize)]
struct PipelineSummary {
    lp_objective: f64,
    trials: u64,
    seed: u64,
    t0: f64,
    t1: f64,
    edges: usize,
    multistage_mean_weight: f64,
    suggested_mean_weight: f64,
    mean_offline_opt: Option<f64>,
    min_analytic_ratio: Option<f64>,
    min_multistage_ratio: Option<f64>,
    min_suggested_ratio: Option<f64>,
}

fn pipeline(instance: &Path, out_dir: &Path, sim: &SimArgs, times: &Times) -> CmdResult {
    check_sim(sim)?;
    let inst = read_instance(instance)?;
    ensure_valid(&inst)?;
    let mut cfg = PipelineConfig::new(sim.trials, sim.seed);
    cfg.t0 = times.t0;
    cfg.t1 = times.t1;
    cfg.time_grid = uniform_grid(sim.grid_points);
    cfg.with_opt = sim.with_opt;
    let out = run_pipeline(&inst, &cfg).map_err(|e| {
        let mut f = Fail::from(e.error);
        // an invalid stage boundary is a user error; anything else past the input check is ours
        if e.stage != Stage::Preprocess && f.code == 1 {
            f.code = 3;
        }
        f.msg = format!("{} stage failed: {}", e.stage, f.msg);
        f
    })?;
    make_dir(out_dir)?;
    in_dir(out_dir, "lp_matching.json", |p| out.matching.write(p))?;
    in_dir(out_dir, "preprocessed_instance.json", |p| out.preprocessed.instance().write(p))?;
    in_dir(out_dir, "preprocessed_matching.json", |p| out.preprocessed.matching().write(p))?;
    in_dir(out_dir, "split_map.json", |p| Ok(fs::write(p, out.split_map.to_json()? + "\n")?))?;
    for stats in [&out.multistage, &out.suggested] {
        let name = stats.policy.as_str();
        in_dir(out_dir, &format!("{name}.csv"), |p| stats.write_csv(File::create(p)?))?;
        in_dir(out_dir, &format!("{name}.json"), |p| Ok(fs::write(p, stats.to_json()? + "\n")?))?;
    }
    in_dir(out_dir, "comparison.csv", |p| out.write_comparison_csv(File::create(p)?))?;
    let min = |f: fn(&stochmatch::pipeline::EdgeComparison) -> f64| out.comparison.iter().map(f).reduce(f64::min);
    let summary = PipelineSummary {
        lp_objective: out.lp_objective,
        trials: sim.trials,
        seed: sim.seed,
        t0: times.t0,
        t1: times.t1,
        edges: out.comparison.len(),
        multistage_mean_weight: out.multistage.mean_weight,
        suggested_mean_weight: out.suggested.mean_weight,
        mean_offline_opt: out.multistage.mean_offline_opt,
        min_analytic_ratio: min(|c| c.analytic),
        min_multistage_ratio: min(|c| c.multistage_ratio),
        min_suggested_ratio: min(|c| c.suggested_ratio),
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    print_json(&summary)
}

#[derive(Serialize)]
struct BoundsSummary {
    t0: f64,
    t1: f64,
    grid_points: usize,
    min_ratio: f64,
    argmin_y: f64,
    min_first: f64,
    min_second: f64,
    nonincreasing: bool,
    appendix: stochmatch::bounds::AppendixReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    search: Option<stochmatch::bounds::SearchResult>,
}

fn bounds_cmd(times: &Times, grid_points: usize, search: bool, step: f64, out_dir: Option<&Path>) -> CmdResult {
    let curve = min_ratio(times.t0, times.t1, grid_points)?;
    let appendix = appendix_check(grid_points)?;
    let search = if search { Some(search_params((0.0, 0.2), (0.5, 1.0), step)?) } else { None };
    if let Some(dir) = out_dir {
        make_dir(dir)?;
        in_dir(dir, "ratio_curve.csv", |p| curve.write_csv(File::create(p)?))?;
        write_json(&dir.join("appendix.json"), &appendix)?;
    }
    print_json(&BoundsSummary {
        t0: curve.t0,
        t1: curve.t1,
        grid_points,
        min_ratio: curve.min,
        argmin_y: curve.argmin,
        min_first: curve.min_first,
        min_second: curve.min_second,
        nonincreasing: curve.nonincreasing,
        appendix,
        search,
    })
}

#[derive(Serialize)]
struct OptSummary {
    trials: u64,
    seed: u64,
    mean_offline_opt: f64,
    stderr: f64,
}

fn opt(instance: &Path, trials: u64, seed: u64) -> CmdResult {
    if trials == 0 {
        return Err(invalid("--trials must be at least 1"));
    }
    let inst = read_instance(instance)?;
    ensure_valid(&inst)?;
    let reps: Vec<u64> = (0..trials).collect();
    let values = parallel::map(&reps, |&rep| offline_optimum(&inst, &sample_arrivals(&inst, seed, rep)));
    let n = trials as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if trials > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    print_json(&OptSummary { trials, seed, mean_offline_opt: mean, stderr: (var / n).sqrt() })
}

fn threads_from_env() -> CmdResult {
    let Ok(raw) = std::env::var("STOCHMATCH_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| invalid(format!("STOCHMATCH_THREADS={raw:?} is not a thread count")))?;
    parallel::configure_threads(n).map_err(|e| Fail { code: 3, msg: e })
}

fn run(cli: Cli) -> CmdResult {
    threads_from_env()?;
    match &cli.cmd {
        Cmd::Validate { instance, matching } => validate(instance, matching.as_deref()),
        Cmd::SolveLp { instance, out, basic, dump_lp } => solve_lp(instance, out.as_deref(), *basic, dump_lp.as_deref()),
        Cmd::Preprocess { instance, matching, step, out_dir, times } => {
            preprocess_cmd(instance, matching, *step, out_dir, times)
        }
        Cmd::Simulate { instance, matching, policy, sim, times, csv, json } => {
            simulate(instance, matching, *policy, sim, times, csv.as_deref(), json.as_deref())
        }
        Cmd::Pipeline { instance, out_dir, sim, times } => pipeline(instance, out_dir, sim, times),
        Cmd::Bounds { times, grid_points, search, step, out_dir } => {
            bounds_cmd(times, *grid_points, *search, *step, out_dir.as_deref())
        }
        Cmd::SearchParams { t0_range, t1_range, step } => {
            print_json(&search_params((t0_range[0], t0_range[1]), (t1_range[0], t1_range[1]), *step)?)
        }
        Cmd::Opt { instance, trials, seed } => opt(instance, *trials, *seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = io::stdout().flush();
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
