use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pbitsat::bench::{self, ExperimentPlan, GenSpec, InstanceSource};
use pbitsat::consensus::ConsensusConfig;
use pbitsat::dimacs::{self, DimacsDocument};
use pbitsat::gate;
use pbitsat::hybrid::{self, Answer, HybridConfig, HybridReport, RetryPolicy};
use pbitsat::ising;
use pbitsat::pbit::{self, SamplerConfig};

#[derive(Parser)]
#[command(name = "pbitsat", version, about = "Hybrid p-bit / CDCL SAT solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one DIMACS file and print a JSON result line.
    Solve {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveMode::Hybrid)]
        mode: SolveMode,
        #[command(flatten)]
        hybrid: HybridArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write planted random 3-SAT instances as DIMACS files.
    Gen {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 429)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run pure and hybrid solves over a corpus and write a results CSV.
    Bench {
        /// Directory searched recursively for `.cnf` files.
        #[arg(long, conflicts_with = "gen_spec", required_unless_present = "gen_spec")]
        dir: Option<PathBuf>,
        /// Generated corpus, e.g. `n=100,m=429,count=50,seed=1`.
        #[arg(long)]
        gen_spec: Option<GenSpec>,
        /// Number of hybrid seeds, 1..=N.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hybrid: HybridArgs,
    },
    /// Print the summary tables for a results CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the Ising model of a DIMACS file.
    Encode { path: PathBuf },
    #[command(subcommand)]
    Gate(GateCommand),
}

#[derive(Subcommand)]
enum GateCommand {
    /// Structural and probe features for every `.cnf` under a directory.
    Features {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        probe_seed: u64,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Policy metrics for a CSV of routes and measured outcomes.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMode {
    Pure,
    Hybrid,
}

#[derive(Clone, Copy, ValueEnum)]
enum RetryArg {
    Halve,
    Same,
}

#[derive(Args)]
struct HybridArgs {
    #[arg(long, default_value_t = 30)]
    replicas: usize,
    #[arg(long, default_value_t = 700)]
    sweeps: usize,
    #[arg(long, default_value_t = 0.1)]
    beta_hot: f64,
    #[arg(long, default_value_t = 5.0)]
    beta_cold: f64,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 12)]
    max_assumptions: usize,
    #[arg(long, default_value_t = 1500)]
    budget1: u64,
    #[arg(long, default_value_t = 1000)]
    budget2: u64,
    #[arg(long, value_enum, default_value_t = RetryArg::Halve)]
    retry: RetryArg,
    /// Rescue on a fresh solver without learned clauses.
    #[arg(long)]
    fresh_rescue: bool,
}

impl HybridArgs {
    fn config(&self, seed: u64) -> HybridConfig {
        HybridConfig {
            sampler: SamplerConfig {
                replicas: self.replicas,
                sweeps: self.sweeps,
                beta_hot: self.beta_hot,
                beta_cold: self.beta_cold,
                ..SamplerConfig::default()
            },
            consensus: ConsensusConfig {
                top_k: self.top_k,
                max_assumptions: self.max_assumptions,
            },
            budget1: self.budget1,
            budget2: self.budget2,
            master_seed: seed,
            retry: match self.retry {
                RetryArg::Halve => RetryPolicy::Halve,
                RetryArg::Same => RetryPolicy::Same,
            },
            fresh_rescue: self.fresh_rescue,
            forced_assumptions: None,
        }
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Serialize)]
struct SolveLine<'a> {
    path: String,
    answer: &'a str,
    mode: &'a str,
    rescue_flag: u8,
    conflicts: u64,
    propagations: u64,
    subcube_exponent: Option<usize>,
    best_violation: Option<usize>,
    model: Option<Vec<i32>>,
    rng: &'static str,
}

fn solve_line<'a>(path: &Path, r: &'a HybridReport) -> SolveLine<'a> {
    SolveLine {
        path: path.display().to_string(),
        answer: r.answer.as_str(),
        mode: r.mode.as_str(),
        rescue_flag: r.rescue_flag as u8,
        conflicts: r.conflicts,
        propagations: r.propagations,
        subcube_exponent: r.subcube_exponent,
        best_violation: r.best_violation,
        model: match &r.answer {
            Answer::Sat(a) => Some(a.to_dimacs_literals()),
            Answer::Unsat => None,
        },
        rng: pbit::RNG_ALGORITHM,
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { path, mode, hybrid, seed } => {
            let formula = dimacs::read_formula(&path)?;
            let report = match mode {
                SolveMode::Pure => hybrid::solve_pure(&formula)?,
                SolveMode::Hybrid => hybrid::solve_hybrid(&formula, &hybrid.config(seed))?,
            };
            println!("{}", serde_json::to_string(&solve_line(&path, &report))?);
        }
        Command::Gen { n, m, count, seed, out_dir } => {
            if n < 3 {
                bail!("--n must be at least 3");
            }
            fs::create_dir_all(&out_dir)?;
            let spec = GenSpec { n, m, count, seed };
            for i in 0..count {
                let s = spec.instance_seed(i);
                let formula = bench::gen_planted_3sat(n, m, s);
                let mut doc = DimacsDocument::from_formula(&formula);
                doc.comments = vec![format!("planted 3-SAT n={n} m={m} seed={s}")];
                let file = out_dir.join(format!("planted-n{n}-m{m}-s{s}.cnf"));
                fs::write(&file, dimacs::write_dimacs(&doc))?;
            }
            eprintln!("wrote {count} instances to {}", out_dir.display());
        }
        Command::Bench { dir, gen_spec, seeds, jobs, out, hybrid } => {
            let source = match (dir, gen_spec) {
                (Some(d), None) => InstanceSource::Dir(d),
                (None, Some(g)) => InstanceSource::Generated(g),
                _ => bail!("give exactly one of --dir and --gen-spec"),
            };
            let plan = ExperimentPlan {
                source,
                seeds: (1..=seeds).collect(),
                hybrid: hybrid.config(1),
                jobs,
            };
            let results = bench::run_experiment(&plan)?;
            let rows: Vec<_> = results.iter().map(|r| r.to_row()).collect();
            bench::write_results_csv(output(Some(&out))?, &rows)?;
            print!("{}", bench::render_summary(&rows));
        }
        Command::Summarize { input } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let rows = bench::read_results_csv(file)?;
            print!("{}", bench::render_summary(&rows));
        }
        Command::Encode { path } => {
            let formula = dimacs::read_formula(&path)?;
            print!("{}", ising::encode_cnf(&formula)?.dump());
        }
        Command::Gate(GateCommand::Features { dir, probe_seed, out }) => {
            let instances = bench::load_instances(&InstanceSource::Dir(dir))?;
            let mut features = Vec::with_capacity(instances.len());
            for inst in &instances {
                features.push(gate::extract_features(&inst.formula, probe_seed)?);
            }
            let rows = instances.iter().map(|i| i.path.as_str()).zip(features.iter());
            gate::write_features_csv(output(out.as_deref())?, rows)?;
        }
        Command::Gate(GateCommand::Eval { input }) => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let records = gate::read_eval_csv(file)?;
            let metrics = gate::evaluate_records(&records)?;
            println!("{}", serde_json::to_string(&metrics)?);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
