use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hetsched::bench::{
    brute_force_opt, read_records, run_experiment, summarize, write_records, Algorithm, BenchConfig, BenchError,
    ALGORITHM_NAMES, BRUTE_FORCE_MAX_TASKS, DEFAULT_PAIRS,
};
use hetsched::instances::{
    gen_erls_adversary, gen_forkjoin, gen_heft_adversary, gen_hlp_adversary, read_graph, write_graph_with_meta,
    ForkJoinSpec,
};
use hetsched::lp::{build_hlp, round_allocation, solve_lp};
use hetsched::offline::schedule_allocation;
use hetsched::online::{online_run, ArrivalMode};
use hetsched::{validate_graph, validate_schedule, Error, Platform, Schedule, ScheduleDocument, TaskGraph};

#[derive(Parser)]
#[command(name = "hetsched", version, about = "Schedule task graphs on hybrid CPU/GPU platforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Forkjoin,
    HeftAdv,
    HlpAdv,
    ErlsAdv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write it as JSON plus a `.meta.json` sidecar
    Generate {
        #[arg(long, value_enum)]
        family: Family,
        /// Fork-join phases
        #[arg(long, default_value_t = 2)]
        phases: usize,
        /// Fork-join width
        #[arg(long, default_value_t = 20)]
        width: usize,
        /// Number of resource types of a fork-join instance (2 or 3)
        #[arg(long, default_value_t = 2)]
        q: usize,
        /// CPUs of an adversarial instance
        #[arg(long, default_value_t = 4)]
        m: usize,
        /// GPUs of an adversarial instance
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one algorithm on a graph and print a JSON summary
    Solve {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(ALGORITHM_NAMES))]
        algo: String,
        /// Machine counts per type, e.g. "16,4" or "16,2,2"
        #[arg(long)]
        platform: String,
        #[arg(long)]
        graph: PathBuf,
        /// Write the schedule here (CSV if the name ends in .csv, JSON otherwise)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Online arrival order: natural or random:SEED
        #[arg(long, default_value = "natural")]
        arrival: String,
        /// Seed of the random policy
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the relaxation in CPLEX LP format
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Print the relaxation and critical-path lower bounds
    Bounds {
        #[arg(long)]
        platform: String,
        #[arg(long)]
        graph: PathBuf,
        /// Also compute the exact optimum (at most 7 tasks)
        #[arg(long)]
        opt: bool,
    },
    /// Check a graph, and optionally a schedule of it
    Validate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        platform: Option<String>,
        /// Schedule file (.csv or JSON document); needs --platform
        #[arg(long, requires = "platform")]
        schedule: Option<PathBuf>,
    },
    /// Run an experiment matrix and write the results CSV
    Bench {
        /// TOML or JSON matrix file
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; standard output when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a results CSV into ratio and pairwise summaries
    Summarize {
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; standard output when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with its exit status.
struct Failure {
    code: i32,
    message: String,
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        Failure { code: e.exit_code(), message: format!("{}: {e}", e.code()) }
    }
}

fn parse_failure(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    parse_failure(format!("IoError: {}: {e}", path.display()))
}

fn platform(s: &str) -> Result<Platform, Failure> {
    s.parse().map_err(|e| parse_failure(format!("PlatformError: {e}")))
}

fn load(path: &Path, platform: &Platform) -> Result<TaskGraph, Failure> {
    let g = read_graph(path)?;
    validate_graph(&g, platform)?;
    Ok(g)
}

/// Opens `path` for writing, or standard output.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_failure(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value serializes"));
}

fn write_schedule(schedule: &Schedule, platform: &Platform, path: &Path) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut out = BufWriter::new(file);
    if path.extension().is_some_and(|e| e == "csv") {
        schedule.write_csv(&mut out).map_err(|e| parse_failure(format!("IoError: {e}")))?;
    } else {
        let text = serde_json::to_string_pretty(&schedule.to_document(platform)).expect("document serializes");
        writeln!(out, "{text}").map_err(|e| io_failure(path, e))?;
    }
    out.flush().map_err(|e| io_failure(path, e))
}

fn read_schedule(path: &Path) -> Result<Schedule, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    if path.extension().is_some_and(|e| e == "csv") {
        Schedule::read_csv(text.as_bytes()).map_err(|e| parse_failure(format!("ParseError: {e}")))
    } else {
        let doc: ScheduleDocument =
            serde_json::from_str(&text).map_err(|e| parse_failure(format!("ParseError: {e}")))?;
        Ok(Schedule::from_document(&doc))
    }
}

fn generate(family: Family, spec: ForkJoinSpec, m: usize, k: usize, out: &Path) -> Result<(), Failure> {
    let (g, meta) = match family {
        Family::Forkjoin => {
            let g = gen_forkjoin(&spec)?;
            let meta = json!({"family": "forkjoin", "phases": spec.phases, "width": spec.width,
                "q": spec.q, "seed": spec.seed, "rng": "ChaCha8", "tasks": g.len()});
            (g, meta)
        }
        Family::HeftAdv | Family::HlpAdv | Family::ErlsAdv => {
            let (name, built) = match family {
                Family::HeftAdv => ("heft-adv", gen_heft_adversary(m, k)),
                Family::HlpAdv => ("hlp-adv", gen_hlp_adversary(m)),
                _ => ("erls-adv", gen_erls_adversary(m, k)),
            };
            let (g, p) = built?;
            let mut meta = json!({"family": name, "m": m, "platform": p.to_string(), "tasks": g.len()});
            if !matches!(family, Family::HlpAdv) {
                meta["k"] = json!(k);
            }
            (g, meta)
        }
    };
    let sidecar = write_graph_with_meta(&g, out, &meta)?;
    eprintln!("wrote {} ({} tasks) and {}", out.display(), g.len(), sidecar.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve(
    algo: &str,
    platform_str: &str,
    graph: &Path,
    out: Option<&Path>,
    arrival: &str,
    seed: u64,
    dump_lp: Option<&Path>,
) -> Result<(), Failure> {
    let platform = platform(platform_str)?;
    let g = load(graph, &platform)?;
    let algorithm = Algorithm::parse(algo, seed)?;
    let arrival: ArrivalMode = arrival.parse().map_err(parse_failure)?;

    let model = build_hlp(&g, &platform)?;
    if let Some(path) = dump_lp {
        fs::write(path, model.to_cplex_lp()).map_err(|e| io_failure(path, e))?;
    }
    let lp = solve_lp(&model);
    let mut report = json!({
        "algorithm": algorithm.name(),
        "platform": platform.to_string(),
        "tasks": g.len(),
        "cp_min": g.critical_path_min(),
    });
    let schedule = match algorithm {
        Algorithm::Hlp { policy, .. } => {
            let sol = lp.as_ref().map_err(|e| Failure::from(e.clone()))?;
            schedule_allocation(&g, &platform, &round_allocation(sol, &g), policy)?
        }
        Algorithm::Online(policy) => {
            let run = online_run(&g, &platform, policy, arrival)?;
            report["policy"] = json!(policy.name());
            report["seed"] = json!(policy.seed());
            report["arrival"] = json!(arrival.to_string());
            report["decisions"] = serde_json::to_value(&run.log).expect("decisions serialize");
            run.schedule
        }
        Algorithm::Heft => algorithm.run(&g, &platform, arrival)?,
    };
    validate_schedule(&schedule, &g, &platform)?;
    let makespan = schedule.makespan_or_zero();
    report["makespan"] = json!(makespan);
    if let Ok(sol) = &lp {
        report["lp_star"] = json!(sol.objective);
        if sol.objective > 0.0 {
            report["ratio"] = json!(makespan / sol.objective);
        }
    }
    if let Some(path) = out {
        write_schedule(&schedule, &platform, path)?;
    }
    print_json(&report);
    Ok(())
}

fn bounds(platform_str: &str, graph: &Path, opt: bool) -> Result<(), Failure> {
    let platform = platform(platform_str)?;
    let g = load(graph, &platform)?;
    let b = hetsched::bench::lower_bounds(&g, &platform)?;
    let mut report = json!({"lp_star": b.lp_star, "cp_min": b.cp_min});
    if opt {
        if g.len() > BRUTE_FORCE_MAX_TASKS {
            return Err(BenchError::TooLarge { tasks: g.len(), cap: BRUTE_FORCE_MAX_TASKS }.into());
        }
        report["opt"] = json!(brute_force_opt(&g, &platform)?);
    }
    print_json(&report);
    Ok(())
}

fn validate(graph: &Path, platform_str: Option<&str>, schedule: Option<&Path>) -> Result<(), Failure> {
    let g = read_graph(graph)?;
    let mut report = json!({"graph": "ok", "tasks": g.len(), "edges": g.num_edges(), "q": g.num_types()});
    if let Some(p) = platform_str {
        let platform = platform(p)?;
        validate_graph(&g, &platform)?;
        if let Some(path) = schedule {
            let s = read_schedule(path)?;
            validate_schedule(&s, &g, &platform)?;
            report["schedule"] = json!("ok");
            report["makespan"] = json!(s.makespan_or_zero());
        }
    }
    print_json(&report);
    Ok(())
}

fn bench(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let config = BenchConfig::from_path(config)?;
    let records = run_experiment(&config)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    write_records(&records, sink(out)?)?;
    eprintln!("{} rows, {failed} failed", records.len());
    Ok(())
}

fn summarize_cmd(input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let file = File::open(input).map_err(|e| io_failure(input, e))?;
    let records = read_records(file)?;
    summarize(&records, &DEFAULT_PAIRS).write_csv(sink(out)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { family, phases, width, q, m, k, seed, out } => {
            generate(family, ForkJoinSpec::new(phases, width, seed, q), m, k, &out)
        }
        Command::Solve { algo, platform, graph, out, arrival, seed, dump_lp } => {
            solve(&algo, &platform, &graph, out.as_deref(), &arrival, seed, dump_lp.as_deref())
        }
        Command::Bounds { platform, graph, opt } => bounds(&platform, &graph, opt),
        Command::Validate { graph, platform, schedule } => validate(&graph, platform.as_deref(), schedule.as_deref()),
        Command::Bench { config, out } => bench(&config, out.as_deref()),
        Command::Summarize { input, out } => summarize_cmd(&input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
