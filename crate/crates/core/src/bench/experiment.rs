use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::graph::{validate_graph, Allocation, Platform, TaskGraph};
use crate::instances::{gen_erls_adversary, gen_forkjoin, gen_heft_adversary, gen_hlp_adversary, read_graph};
use crate::instances::ForkJoinSpec;
use crate::lp::{build_hlp, round_allocation, solve_lp, LpSolution};
use crate::offline::schedule_allocation;
use crate::online::ArrivalMode;
use crate::schedule::{validate_schedule, Schedule};

use super::{Algorithm, BenchError};

/// Column order of the results CSV.
pub const CSV_HEADER: &str = "instance,family,params,seed,platform,algorithm,makespan,lp_star,cp_min,ratio,wall_ms,status";

/// Experiment matrix, read from TOML or JSON.
///
/// ```toml
/// platforms = ["16,2", "32,4"]
/// algorithms = ["hlp-est", "hlp-ols", "heft"]
/// arrival = "natural"        # or "random:SEED", online policies only
/// random_seed = 0            # coin seed of the random policy
/// timing = false             # fill wall_ms (breaks byte-identical reruns)
///
/// [[instances]]
/// family = "forkjoin"
/// phases = [2, 5]
/// width = [20, 50]
/// seeds = [1, 2, 3]
/// q = 2
///
/// [[instances]]
/// family = "heft-adv"
/// m = 4
/// k = 2
/// ```
///
/// Adversarial families run on their own platform. Other groups use the
/// top-level `platforms` unless they list their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub platforms: Vec<String>,
    pub algorithms: Vec<String>,
    #[serde(default = "natural")]
    pub arrival: String,
    #[serde(default)]
    pub random_seed: u64,
    #[serde(default)]
    pub timing: bool,
    pub instances: Vec<InstanceGroup>,
    /// Directory that relative `file` paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn natural() -> String {
    "natural".to_string()
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceGroup {
    Forkjoin {
        phases: Vec<usize>,
        width: Vec<usize>,
        seeds: Vec<u64>,
        #[serde(default = "two")]
        q: usize,
        #[serde(default)]
        platforms: Option<Vec<String>>,
    },
    HeftAdv { m: usize, k: usize },
    HlpAdv { m: usize },
    ErlsAdv { m: usize, k: usize },
    File {
        path: PathBuf,
        #[serde(default)]
        platforms: Option<Vec<String>>,
    },
}

impl BenchConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_owned(), source })?;
        let mut config = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text)?,
            _ => Self::from_toml_str(&text)?,
        };
        config.base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
        Ok(config)
    }
}

/// One cell of the matrix. Empty optional fields are written as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub family: String,
    pub params: String,
    pub seed: Option<u64>,
    pub platform: String,
    pub algorithm: String,
    pub makespan: Option<f64>,
    pub lp_star: Option<f64>,
    pub cp_min: Option<f64>,
    pub ratio: Option<f64>,
    pub wall_ms: Option<f64>,
    /// `ok` or the error code of the failing step.
    pub status: String,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

struct Instance {
    id: String,
    family: &'static str,
    params: String,
    seed: Option<u64>,
    graph: Result<TaskGraph, BenchError>,
    platforms: Vec<String>,
}

fn expand(config: &BenchConfig) -> Vec<Instance> {
    let mut out = Vec::new();
    for group in &config.instances {
        match group {
            InstanceGroup::Forkjoin { phases, width, seeds, q, platforms } => {
                for &p in phases {
                    for &w in width {
                        for &seed in seeds {
                            out.push(Instance {
                                id: format!("forkjoin-p{p}-w{w}-q{q}-s{seed}"),
                                family: "forkjoin",
                                params: format!("p={p};width={w};q={q}"),
                                seed: Some(seed),
                                graph: gen_forkjoin(&ForkJoinSpec::new(p, w, seed, *q)).map_err(Into::into),
                                platforms: platforms.clone().unwrap_or_else(|| config.platforms.clone()),
                            });
                        }
                    }
                }
            }
            InstanceGroup::HeftAdv { m, k } => {
                out.push(adversary("heft-adv", format!("m={m};k={k}"), gen_heft_adversary(*m, *k)))
            }
            InstanceGroup::HlpAdv { m } => out.push(adversary("hlp-adv", format!("m={m}"), gen_hlp_adversary(*m))),
            InstanceGroup::ErlsAdv { m, k } => {
                out.push(adversary("erls-adv", format!("m={m};k={k}"), gen_erls_adversary(*m, *k)))
            }
            InstanceGroup::File { path, platforms } => {
                let full = config.base_dir.join(path);
                out.push(Instance {
                    id: path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into()),
                    family: "file",
                    params: format!("path={}", path.display()),
                    seed: None,
                    graph: read_graph(&full).map_err(Into::into),
                    platforms: platforms.clone().unwrap_or_else(|| config.platforms.clone()),
                });
            }
        }
    }
    out
}

fn adversary(
    family: &'static str,
    params: String,
    built: Result<(TaskGraph, Platform), crate::instances::GeneratorError>,
) -> Instance {
    let id = format!("{family}-{}", params.replace(['=', ';'], ""));
    let (graph, platforms) = match built {
        Ok((g, p)) => (Ok(g), vec![p.to_string()]),
        Err(e) => (Err(e.into()), vec![String::new()]),
    };
    Instance { id, family, params, seed: None, graph, platforms }
}

/// Relaxation result shared by every LP-based algorithm of one cell row.
struct Relaxation {
    solution: LpSolution,
    allocation: Allocation,
    ms: f64,
}

fn relax(g: &TaskGraph, platform: &Platform) -> Result<Relaxation, BenchError> {
    let clock = Instant::now();
    let solution = solve_lp(&build_hlp(g, platform)?)?;
    let allocation = round_allocation(&solution, g);
    Ok(Relaxation { solution, allocation, ms: clock.elapsed().as_secs_f64() * 1e3 })
}

fn run_cell(
    g: &TaskGraph,
    platform: &Platform,
    algorithm: Algorithm,
    relaxation: Option<&Relaxation>,
    arrival: ArrivalMode,
) -> Result<(Schedule, f64), BenchError> {
    let clock = Instant::now();
    let (schedule, extra_ms) = match algorithm {
        Algorithm::Hlp { policy, .. } => {
            let relaxation = relaxation.expect("caller skips LP algorithms without a relaxation");
            (schedule_allocation(g, platform, &relaxation.allocation, policy)?, relaxation.ms)
        }
        other => (other.run(g, platform, arrival)?, 0.0),
    };
    let ms = clock.elapsed().as_secs_f64() * 1e3 + extra_ms;
    validate_schedule(&schedule, g, platform)?;
    Ok((schedule, ms))
}

/// Runs every (instance, platform, algorithm) cell in config order.
///
/// Invalid configs fail up front; any failure inside a cell becomes a row
/// whose status is the error code.
pub fn run_experiment(config: &BenchConfig) -> Result<Vec<RunRecord>, BenchError> {
    let algorithms: Vec<Algorithm> =
        config.algorithms.iter().map(|a| Algorithm::parse(a, config.random_seed)).collect::<Result<_, _>>()?;
    let arrival: ArrivalMode = config.arrival.parse().map_err(BenchError::Config)?;
    for p in &config.platforms {
        p.parse::<Platform>().map_err(|e| BenchError::Config(format!("platform {p:?}: {e}")))?;
    }

    let mut records = Vec::new();
    for inst in expand(config) {
        for platform_str in &inst.platforms {
            let record = |algorithm: Algorithm| RunRecord {
                instance: inst.id.clone(),
                family: inst.family.to_string(),
                params: inst.params.clone(),
                seed: inst.seed,
                platform: platform_str.clone(),
                algorithm: algorithm.name().to_string(),
                makespan: None,
                lp_star: None,
                cp_min: None,
                ratio: None,
                wall_ms: None,
                status: "ok".to_string(),
            };
            let setup = inst.graph.as_ref().map_err(BenchError::code).and_then(|g| {
                let platform: Platform = platform_str.parse().map_err(|_| "ConfigError")?;
                validate_graph(g, &platform).map_err(|e| e.code())?;
                Ok((g, platform))
            });
            let (g, platform) = match setup {
                Ok(ok) => ok,
                Err(code) => {
                    records.extend(algorithms.iter().map(|&a| RunRecord { status: code.to_string(), ..record(a) }));
                    continue;
                }
            };
            let relaxation = relax(g, &platform);
            let lp_star = relaxation.as_ref().ok().map(|r| r.solution.objective);
            let cp_min = g.critical_path_min();
            for &algorithm in &algorithms {
                let mut row = record(algorithm);
                row.lp_star = lp_star;
                row.cp_min = Some(cp_min);
                let outcome = match (&algorithm, &relaxation) {
                    (Algorithm::Hlp { .. }, Err(e)) => Err(e.code()),
                    _ => run_cell(g, &platform, algorithm, relaxation.as_ref().ok(), arrival).map_err(|e| e.code()),
                };
                match outcome {
                    Ok((schedule, ms)) => {
                        let makespan = schedule.makespan_or_zero();
                        row.makespan = Some(makespan);
                        row.ratio = lp_star.filter(|&l| l > 0.0).map(|l| makespan / l);
                        row.wall_ms = config.timing.then_some(ms);
                    }
                    Err(code) => row.status = code.to_string(),
                }
                records.push(row);
            }
        }
    }
    Ok(records)
}

/// Writes records with a header row.
pub fn write_records<W: Write>(records: &[RunRecord], out: W) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(out);
    if records.is_empty() {
        writer.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|source| BenchError::Io { path: PathBuf::from("<csv>"), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
platforms = ["16,2", "32,4"]
algorithms = ["hlp-est", "hlp-ols", "heft", "erls"]

[[instances]]
family = "forkjoin"
phases = [2]
width = [5]
seeds = [1, 2]

[[instances]]
family = "heft-adv"
m = 4
k = 2
"#;

    #[test]
    fn matrix_shape_and_header() {
        let config = BenchConfig::from_toml_str(SMALL).unwrap();
        let records = run_experiment(&config).unwrap();
        assert_eq!(records.len(), 2 * 2 * 4 + 4);
        assert!(records.iter().all(RunRecord::is_ok));
        let mut out = Vec::new();
        write_records(&records, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let heft = records.iter().find(|r| r.family == "heft-adv" && r.algorithm == "heft").unwrap();
        assert_eq!(heft.platform, "4,2");
        assert!(heft.ratio.unwrap() >= 1.20);
    }

    #[test]
    fn failures_become_rows() {
        let config = BenchConfig::from_toml_str(
            r#"
platforms = ["4,1,1"]
algorithms = ["heft", "erls"]

[[instances]]
family = "forkjoin"
phases = [1]
width = [3]
seeds = [0]

[[instances]]
family = "hlp-adv"
m = 2
"#,
        )
        .unwrap();
        let records = run_experiment(&config).unwrap();
        let statuses: Vec<&str> = records.iter().map(|r| r.status.as_str()).collect();
        assert_eq!(statuses, ["ArityMismatch", "ArityMismatch", "ParameterOutOfRange", "ParameterOutOfRange"]);
    }

    #[test]
    fn online_policy_needs_two_types() {
        let config = BenchConfig::from_toml_str(
            r#"
platforms = ["4,1,1"]
algorithms = ["qhlp-ols", "eft", "erls"]

[[instances]]
family = "forkjoin"
phases = [1]
width = [3]
seeds = [0]
q = 3
"#,
        )
        .unwrap();
        let records = run_experiment(&config).unwrap();
        let statuses: Vec<&str> = records.iter().map(|r| r.status.as_str()).collect();
        assert_eq!(statuses, ["ok", "ok", "RequiresTwoTypes"]);
    }

    #[test]
    fn bad_config_is_rejected() {
        assert!(BenchConfig::from_toml_str("algorithms = []\ninstances = []\nbogus = 1").is_err());
        let config = BenchConfig::from_toml_str("algorithms = [\"magic\"]\ninstances = []").unwrap();
        assert_eq!(run_experiment(&config).unwrap_err().code(), "UnknownAlgorithm");
        let json = r#"{"algorithms":["heft"],"instances":[{"family":"hlp-adv","m":3}]}"#;
        let config = BenchConfig::from_json_str(json).unwrap();
        assert_eq!(run_experiment(&config).unwrap().len(), 1);
    }
}
