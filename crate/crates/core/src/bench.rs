//! Pure-vs-hybrid experiments: one pure solve and one hybrid solve per seed
//! for every instance, seed medians, reductions, labels, CSV and summaries.
//!
//! Effort is measured in solver counters only. Instance jobs run in
//! parallel; results keep input order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimacs::{self, DimacsError};
use crate::formula::{BoolAssignment, CnfFormula, Lit, Var};
use crate::gate::{self, GateError};
use crate::hybrid::{self, HybridConfig, HybridError, Mode};
use crate::stats::{mean, median_lower};

/// First line of every results CSV.
pub const CSV_VERSION_LINE: &str = "# pbit-sat results v1";
/// Definition of the rescue statistic, recorded alongside summaries.
pub const RESCUE_RATE_DEFINITION: &str =
    "rescue rate = per-instance mean of rescue_flag over seeds, median over instances";
pub const GENERATOR_NOTE: &str =
    "planted 3-SAT: clauses violated by a hidden uniform assignment are rejected";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("answers disagree on {path}: {detail}")]
    AnswerDisagreement { path: String, detail: String },
    #[error("pure baseline is zero")]
    ZeroBaseline,
    #[error("seed list must be non-empty and distinct")]
    InvalidSeeds,
    #[error("invalid generator spec `{0}` (expected n=..,m=..,count=..,seed=..)")]
    InvalidGenSpec(String),
    #[error("{path}: {source}")]
    Dimacs { path: String, source: DimacsError },
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

/// Planted random 3-SAT together with its hidden model.
pub fn gen_planted_3sat_with_model(n: usize, m: usize, seed: u64) -> (CnfFormula, BoolAssignment) {
    assert!(n >= 3, "need at least 3 variables");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let mut clauses = Vec::with_capacity(m);
    while clauses.len() < m {
        let mut vars = [0u32; 3];
        let mut filled = 0;
        while filled < 3 {
            let v = rng.gen_range(0..n as u32);
            if !vars[..filled].contains(&v) {
                vars[filled] = v;
                filled += 1;
            }
        }
        let clause: Vec<Lit> = vars.iter().map(|&v| Lit::new(Var(v), rng.gen())).collect();
        if clause.iter().any(|l| l.eval(hidden[l.var().index()])) {
            clauses.push(clause);
        }
    }
    let formula = CnfFormula::new(n, clauses).expect("variables drawn in range");
    (formula, BoolAssignment::new(hidden))
}

pub fn gen_planted_3sat(n: usize, m: usize, seed: u64) -> CnfFormula {
    gen_planted_3sat_with_model(n, m, seed).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub count: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn instance_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

impl std::str::FromStr for GenSpec {
    type Err = BenchError;

    /// Parses `n=100,m=429,count=50,seed=1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::InvalidGenSpec(s.to_string());
        let mut fields: BTreeMap<&str, u64> = BTreeMap::new();
        for part in s.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            fields.insert(k.trim(), v.trim().parse().map_err(|_| bad())?);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(bad);
        let spec = GenSpec {
            n: get("n")? as usize,
            m: get("m")? as usize,
            count: get("count")? as usize,
            seed: fields.get("seed").copied().unwrap_or(1),
        };
        if spec.n < 3 || spec.m == 0 {
            return Err(bad());
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    /// All `*.cnf` files below this directory, recursively, sorted by path.
    Dir(PathBuf),
    Generated(GenSpec),
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub family: String,
    pub path: String,
    pub formula: CnfFormula,
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub source: InstanceSource,
    pub seeds: Vec<u64>,
    pub hybrid: HybridConfig,
    pub jobs: usize,
}

impl ExperimentPlan {
    pub fn new(source: InstanceSource, hybrid: HybridConfig) -> Self {
        ExperimentPlan {
            source,
            seeds: (1..=5).collect(),
            hybrid,
            jobs: 1,
        }
    }
}

/// Family tag of a DIMACS file: its parent directory name.
pub fn family_of(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "root".to_string())
}

fn collect_cnf_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_cnf_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "cnf") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn load_instances(source: &InstanceSource) -> Result<Vec<Instance>, BenchError> {
    match source {
        InstanceSource::Dir(dir) => {
            let mut files = Vec::new();
            collect_cnf_files(dir, &mut files)?;
            files.sort();
            if files.is_empty() {
                log::warn!("no .cnf files under {}", dir.display());
            }
            files
                .into_iter()
                .map(|p| {
                    let formula = dimacs::read_formula(&p).map_err(|source| BenchError::Dimacs {
                        path: p.display().to_string(),
                        source,
                    })?;
                    Ok(Instance {
                        family: family_of(&p),
                        path: p.display().to_string(),
                        formula,
                    })
                })
                .collect()
        }
        InstanceSource::Generated(spec) => Ok((0..spec.count)
            .map(|i| {
                let seed = spec.instance_seed(i);
                Instance {
                    family: "planted".to_string(),
                    path: format!("planted-n{}-m{}-s{}", spec.n, spec.m, seed),
                    formula: gen_planted_3sat(spec.n, spec.m, seed),
                }
            })
            .collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridRun {
    pub seed: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub sat: bool,
    pub rescue: bool,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceResult {
    pub family: String,
    pub path: String,
    pub n: usize,
    pub m: usize,
    pub pure_conflicts: u64,
    pub pure_propagations: u64,
    pub sat: bool,
    pub runs: Vec<HybridRun>,
    pub hybrid_conflicts_median: u64,
    pub hybrid_propagations_median: u64,
    /// `None` when the pure counter is zero.
    pub conflict_reduction: Option<f64>,
    pub propagation_reduction: Option<f64>,
    pub rescue_rate: f64,
    pub label: bool,
}

impl InstanceResult {
    pub fn mode_counts(&self) -> BTreeMap<Mode, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.runs {
            *counts.entry(r.mode).or_insert(0) += 1;
        }
        counts
    }

    pub fn to_row(&self) -> ResultRow {
        let counts = self.mode_counts();
        let mode_counts = [Mode::Guided, Mode::Retry, Mode::Rescue, Mode::PureSkip]
            .iter()
            .map(|m| format!("{}={}", m.as_str(), counts.get(m).copied().unwrap_or(0)))
            .collect::<Vec<_>>()
            .join(";");
        ResultRow {
            family: self.family.clone(),
            path: self.path.clone(),
            n: self.n,
            m: self.m,
            ratio: if self.n > 0 { self.m as f64 / self.n as f64 } else { 0.0 },
            pure_conflicts: self.pure_conflicts,
            pure_props: self.pure_propagations,
            hyb_conf_med: self.hybrid_conflicts_median,
            hyb_prop_med: self.hybrid_propagations_median,
            conf_reduction: self.conflict_reduction,
            prop_reduction: self.propagation_reduction,
            rescue_rate: self.rescue_rate,
            label: self.label as u8,
            mode_counts,
        }
    }
}

/// Solves one instance once pure and once per seed hybrid.
pub fn run_instance(inst: &Instance, seeds: &[u64], cfg: &HybridConfig) -> Result<InstanceResult, BenchError> {
    let f = &inst.formula;
    let pure = hybrid::solve_pure(f)?;
    let sat = pure.answer.is_sat();
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = HybridConfig {
            master_seed: seed,
            ..cfg.clone()
        };
        let r = hybrid::solve_hybrid(f, &cfg)?;
        if r.answer.is_sat() != sat {
            return Err(BenchError::AnswerDisagreement {
                path: inst.path.clone(),
                detail: format!(
                    "pure {} vs hybrid seed {} {}",
                    pure.answer.as_str(),
                    seed,
                    r.answer.as_str()
                ),
            });
        }
        runs.push(HybridRun {
            seed,
            conflicts: r.conflicts,
            propagations: r.propagations,
            sat: r.answer.is_sat(),
            rescue: r.rescue_flag,
            mode: r.mode,
        });
    }
    let conflicts: Vec<u64> = runs.iter().map(|r| r.conflicts).collect();
    let props: Vec<u64> = runs.iter().map(|r| r.propagations).collect();
    let c_h = median_lower(&conflicts).unwrap_or(0);
    let p_h = median_lower(&props).unwrap_or(0);
    let pairs: Vec<(u64, u64)> = runs.iter().map(|r| (r.conflicts, r.propagations)).collect();
    let label = match gate::compute_label(pure.conflicts, pure.propagations, &pairs) {
        Ok(l) => l.y,
        Err(GateError::DegeneratePure) => false,
        Err(e) => return Err(e.into()),
    };
    let rescues: Vec<f64> = runs.iter().map(|r| r.rescue as u8 as f64).collect();
    Ok(InstanceResult {
        family: inst.family.clone(),
        path: inst.path.clone(),
        n: f.num_vars(),
        m: f.num_clauses(),
        pure_conflicts: pure.conflicts,
        pure_propagations: pure.propagations,
        sat,
        runs,
        hybrid_conflicts_median: c_h,
        hybrid_propagations_median: p_h,
        conflict_reduction: gate::reduction(pure.conflicts as f64, c_h as f64),
        propagation_reduction: gate::reduction(pure.propagations as f64, p_h as f64),
        rescue_rate: mean(&rescues).unwrap_or(0.0),
        label,
    })
}

pub fn validate_seeds(seeds: &[u64]) -> Result<(), BenchError> {
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if seeds.is_empty() || sorted.len() != seeds.len() {
        return Err(BenchError::InvalidSeeds);
    }
    Ok(())
}

/// Runs a batch of instances on up to `jobs` threads; results keep input order.
pub fn run_instances(
    instances: &[Instance],
    seeds: &[u64],
    cfg: &HybridConfig,
    jobs: usize,
) -> Result<Vec<InstanceResult>, BenchError> {
    use rayon::prelude::*;
    validate_seeds(seeds)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    pool.install(|| {
        instances
            .par_iter()
            .map(|inst| run_instance(inst, seeds, cfg))
            .collect()
    })
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<InstanceResult>, BenchError> {
    validate_seeds(&plan.seeds)?;
    let instances = load_instances(&plan.source)?;
    run_instances(&instances, &plan.seeds, &plan.hybrid, plan.jobs)
}

/// `100 * (1 - hybrid / pure)`.
pub fn improvement_pct(pure_median: f64, hybrid_median: f64) -> Result<f64, BenchError> {
    if pure_median <= 0.0 {
        return Err(BenchError::ZeroBaseline);
    }
    Ok(100.0 * (1.0 - hybrid_median / pure_median))
}

/// Rounds to one decimal for display.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: String,
    pub path: String,
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    pub pure_conflicts: u64,
    pub pure_props: u64,
    pub hyb_conf_med: u64,
    pub hyb_prop_med: u64,
    pub conf_reduction: Option<f64>,
    pub prop_reduction: Option<f64>,
    pub rescue_rate: f64,
    pub label: u8,
    pub mode_counts: String,
}

pub fn write_results_csv(mut out: impl Write, rows: &[ResultRow]) -> Result<(), BenchError> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    let mut writer = csv::Writer::from_writer(out);
    if rows.is_empty() {
        writer.write_record([
            "family",
            "path",
            "n",
            "m",
            "ratio",
            "pure_conflicts",
            "pure_props",
            "hyb_conf_med",
            "hyb_prop_med",
            "conf_reduction",
            "prop_reduction",
            "rescue_rate",
            "label",
            "mode_counts",
        ])?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_results_csv(input: impl Read) -> Result<Vec<ResultRow>, BenchError> {
    let mut buffered = BufReader::new(input);
    let mut first = String::new();
    buffered.read_line(&mut first)?;
    if first.trim_end() != CSV_VERSION_LINE {
        log::warn!("results file does not start with `{CSV_VERSION_LINE}`");
    }
    let rest: Box<dyn Read> = if first.starts_with('#') {
        Box::new(buffered)
    } else {
        Box::new(std::io::Cursor::new(first.into_bytes()).chain(buffered))
    };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(rest);
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: String,
    pub instances: usize,
    /// Fraction of instances labelled as hybrid wins.
    pub good_rate: f64,
    pub conflict_reduction: Option<f64>,
    pub propagation_reduction: Option<f64>,
    pub rescue_rate: f64,
}

/// Per-family aggregates over stored rows, families in sorted order.
pub fn family_summary(rows: &[ResultRow]) -> Vec<FamilySummary> {
    let mut groups: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(&r.family).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(family, rs)| {
            let conf: Vec<f64> = rs.iter().filter_map(|r| r.conf_reduction).collect();
            let prop: Vec<f64> = rs.iter().filter_map(|r| r.prop_reduction).collect();
            let rescue: Vec<f64> = rs.iter().map(|r| r.rescue_rate).collect();
            let good = rs.iter().filter(|r| r.label != 0).count();
            FamilySummary {
                family: family.to_string(),
                instances: rs.len(),
                good_rate: good as f64 / rs.len() as f64,
                conflict_reduction: median_lower(&conf),
                propagation_reduction: median_lower(&prop),
                rescue_rate: median_lower(&rescue).unwrap_or(0.0),
            }
        })
        .collect()
}

/// Per-(family, n, m) medians of pure and hybrid counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    pub instances: usize,
    pub pure_conflicts: u64,
    pub hybrid_conflicts: u64,
    pub conflict_improve: Option<f64>,
    pub pure_props: u64,
    pub hybrid_props: u64,
    pub prop_improve: Option<f64>,
}

pub fn group_summary(rows: &[ResultRow]) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(&str, usize, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.family, r.n, r.m)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((family, n, m), rs)| {
            let med = |f: fn(&ResultRow) -> u64| {
                median_lower(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap_or(0)
            };
            let pc = med(|r| r.pure_conflicts);
            let hc = med(|r| r.hyb_conf_med);
            let pp = med(|r| r.pure_props);
            let hp = med(|r| r.hyb_prop_med);
            GroupSummary {
                family: family.to_string(),
                n,
                m,
                ratio: if n > 0 { m as f64 / n as f64 } else { 0.0 },
                instances: rs.len(),
                pure_conflicts: pc,
                hybrid_conflicts: hc,
                conflict_improve: improvement_pct(pc as f64, hc as f64).ok(),
                pure_props: pp,
                hybrid_props: hp,
                prop_improve: improvement_pct(pp as f64, hp as f64).ok(),
            }
        })
        .collect()
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}%", round1(v)))
}

/// Text rendering of the per-group counter table and the family table.
pub fn render_summary(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>8} {:>6} {:>10} {:>10} {:>8} {:>12} {:>12} {:>8}",
        "family", "vars", "clauses", "ratio", "conf pure", "conf hyb", "improve", "prop pure", "prop hyb", "improve"
    );
    for g in group_summary(rows) {
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>8} {:>6.2} {:>10} {:>10} {:>8} {:>12} {:>12} {:>8}",
            g.family,
            g.n,
            g.m,
            g.ratio,
            g.pure_conflicts,
            g.hybrid_conflicts,
            pct(g.conflict_improve),
            g.pure_props,
            g.hybrid_props,
            pct(g.prop_improve),
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<12} {:>9} {:>8} {:>8} {:>8} {:>8}",
        "family", "instances", "good", "conf", "prop", "rescue"
    );
    for s in family_summary(rows) {
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>8} {:>8} {:>8} {:>8}",
            s.family,
            s.instances,
            pct(Some(100.0 * s.good_rate)),
            pct(s.conflict_reduction.map(|r| 100.0 * r)),
            pct(s.propagation_reduction.map(|r| 100.0 * r)),
            pct(Some(100.0 * s.rescue_rate)),
        );
    }
    let _ = writeln!(out, "# {RESCUE_RATE_DEFINITION}");
    out
}
