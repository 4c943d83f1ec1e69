//! Hybrid suitability: labels, features, routing and policy metrics.
//!
//! A formula is a hybrid win (`y = 1`) when the seed-median hybrid run cuts
//! both conflicts and propagations by at least 20% relative to pure CDCL.
//! Features are structural CNF statistics plus a short probe anneal. The
//! router is any [`GateScorer`]; a single-feature threshold rule and the two
//! constant policies ship here.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{self, ConsensusConfig};
use crate::formula::CnfFormula;
use crate::ising::{self, IsingError};
use crate::pbit::{self, PbitError, SamplerConfig};
use crate::stats::{mean, median_lower};

/// Minimum relative reduction on both counters for a hybrid win.
pub const LABEL_THRESHOLD: f64 = 0.20;
pub const PROBE_REPLICAS: usize = 10;
pub const PROBE_SWEEPS: usize = 200;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("pure run has zero conflicts or propagations; reductions are undefined")]
    DegeneratePure,
    #[error("no hybrid runs supplied")]
    NoRuns,
    #[error("{decisions} decisions but {labels} labelled outcomes")]
    LengthMismatch { decisions: usize, labels: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error(transparent)]
    Encoding(#[from] IsingError),
    #[error(transparent)]
    Sampler(#[from] PbitError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `1 - hybrid / pure`, undefined for a zero baseline.
pub fn reduction(pure: f64, hybrid: f64) -> Option<f64> {
    if pure > 0.0 {
        Some(1.0 - hybrid / pure)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateLabel {
    pub y: bool,
    pub conflict_reduction: f64,
    pub propagation_reduction: f64,
    /// Seed medians the reductions were computed from.
    pub hybrid_conflicts: u64,
    pub hybrid_propagations: u64,
}

impl GateLabel {
    pub fn from_reductions(conflict_reduction: f64, propagation_reduction: f64) -> Self {
        GateLabel {
            y: conflict_reduction >= LABEL_THRESHOLD && propagation_reduction >= LABEL_THRESHOLD,
            conflict_reduction,
            propagation_reduction,
            hybrid_conflicts: 0,
            hybrid_propagations: 0,
        }
    }
}

/// Labels one formula from its pure counters and per-seed hybrid counters.
/// The hybrid side is summarized by the lower median over seeds.
pub fn compute_label(
    pure_conflicts: u64,
    pure_propagations: u64,
    hybrid_runs: &[(u64, u64)],
) -> Result<GateLabel, GateError> {
    if hybrid_runs.is_empty() {
        return Err(GateError::NoRuns);
    }
    if pure_conflicts == 0 || pure_propagations == 0 {
        return Err(GateError::DegeneratePure);
    }
    let conflicts: Vec<u64> = hybrid_runs.iter().map(|r| r.0).collect();
    let props: Vec<u64> = hybrid_runs.iter().map(|r| r.1).collect();
    let c_h = median_lower(&conflicts).unwrap();
    let p_h = median_lower(&props).unwrap();
    Ok(GateLabel {
        y: meets_threshold(pure_conflicts, c_h) && meets_threshold(pure_propagations, p_h),
        conflict_reduction: 1.0 - c_h as f64 / pure_conflicts as f64,
        propagation_reduction: 1.0 - p_h as f64 / pure_propagations as f64,
        hybrid_conflicts: c_h,
        hybrid_propagations: p_h,
    })
}

/// `1 - hybrid / pure >= 0.20` on the integer counters, free of rounding:
/// in floating point `1 - 800 / 1000` falls just below 0.2.
fn meets_threshold(pure: u64, hybrid: u64) -> bool {
    5 * hybrid as u128 <= 4 * pure as u128
}

/// Structural statistics computable from the clause database alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralFeatures {
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    /// Clause counts by length 1, 2, 3 and 4-or-more.
    pub len_hist: [usize; 4],
    pub positive_fraction: f64,
    pub degree_mean: f64,
    pub degree_max: usize,
    pub degree_variance: f64,
}

/// Statistics of a short, cheap anneal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFeatures {
    pub q_abs: f64,
    pub min_violation: usize,
    pub mean_violation: f64,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateFeatures {
    pub structural: StructuralFeatures,
    pub probe: ProbeFeatures,
}

pub fn structural_features(formula: &CnfFormula) -> StructuralFeatures {
    let n = formula.num_vars();
    let m = formula.num_clauses();
    let mut len_hist = [0usize; 4];
    let mut positive = 0usize;
    let mut total = 0usize;
    let mut degree = vec![0usize; n];
    for clause in formula.clauses() {
        if !clause.is_empty() {
            len_hist[clause.len().min(4) - 1] += 1;
        }
        for lit in clause {
            total += 1;
            positive += lit.is_positive() as usize;
            degree[lit.var().index()] += 1;
        }
    }
    let degrees: Vec<f64> = degree.iter().map(|&d| d as f64).collect();
    let degree_mean = mean(&degrees).unwrap_or(0.0);
    let degree_variance = mean(
        &degrees
            .iter()
            .map(|d| (d - degree_mean).powi(2))
            .collect::<Vec<_>>(),
    )
    .unwrap_or(0.0);
    StructuralFeatures {
        n,
        m,
        ratio: if n > 0 { m as f64 / n as f64 } else { 0.0 },
        len_hist,
        positive_fraction: if total > 0 {
            positive as f64 / total as f64
        } else {
            0.0
        },
        degree_mean,
        degree_max: degree.iter().copied().max().unwrap_or(0),
        degree_variance,
    }
}

/// Structural features plus a 10-replica, 200-sweep probe seeded by `probe_seed`.
pub fn extract_features(formula: &CnfFormula, probe_seed: u64) -> Result<GateFeatures, GateError> {
    let structural = structural_features(formula);
    let model = ising::encode_cnf(formula)?;
    let cfg = SamplerConfig {
        replicas: PROBE_REPLICAS,
        sweeps: PROBE_SWEEPS,
        ..SamplerConfig::default()
    };
    let samples = pbit::run_sampler(formula, &model, &cfg, probe_seed)?;
    let top_k = ConsensusConfig::default().top_k.min(samples.len());
    let candidate_count = consensus::agreement_scores(&samples, top_k)
        .expect("top_k within replica count")
        .candidates()
        .len();
    let violations: Vec<f64> = samples.violations().iter().map(|&v| v as f64).collect();
    let probe = ProbeFeatures {
        q_abs: consensus::q_abs(&samples).expect("probe has replicas"),
        min_violation: samples.best_violation().unwrap_or(0),
        mean_violation: mean(&violations).unwrap_or(0.0),
        candidate_count,
    };
    Ok(GateFeatures { structural, probe })
}

/// A named scalar feature, usable in a threshold rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feature {
    N,
    M,
    Ratio,
    PositiveFraction,
    DegreeMean,
    DegreeMax,
    DegreeVariance,
    QAbs,
    MinViolation,
    MeanViolation,
    CandidateCount,
}

impl Feature {
    pub const ALL: [Feature; 11] = [
        Feature::N,
        Feature::M,
        Feature::Ratio,
        Feature::PositiveFraction,
        Feature::DegreeMean,
        Feature::DegreeMax,
        Feature::DegreeVariance,
        Feature::QAbs,
        Feature::MinViolation,
        Feature::MeanViolation,
        Feature::CandidateCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::N => "n",
            Feature::M => "m",
            Feature::Ratio => "ratio",
            Feature::PositiveFraction => "pos_frac",
            Feature::DegreeMean => "deg_mean",
            Feature::DegreeMax => "deg_max",
            Feature::DegreeVariance => "deg_var",
            Feature::QAbs => "q_abs",
            Feature::MinViolation => "probe_min_v",
            Feature::MeanViolation => "probe_mean_v",
            Feature::CandidateCount => "probe_candidates",
        }
    }

    pub fn value(self, f: &GateFeatures) -> f64 {
        let s = &f.structural;
        let p = &f.probe;
        match self {
            Feature::N => s.n as f64,
            Feature::M => s.m as f64,
            Feature::Ratio => s.ratio,
            Feature::PositiveFraction => s.positive_fraction,
            Feature::DegreeMean => s.degree_mean,
            Feature::DegreeMax => s.degree_max as f64,
            Feature::DegreeVariance => s.degree_variance,
            Feature::QAbs => p.q_abs,
            Feature::MinViolation => p.min_violation as f64,
            Feature::MeanViolation => p.mean_violation,
            Feature::CandidateCount => p.candidate_count as f64,
        }
    }
}

impl FromStr for Feature {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| GateError::UnknownFeature(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Hybrid,
    Pure,
}

/// Maps features to an estimated probability that the hybrid path wins.
pub trait GateScorer {
    fn score(&self, features: &GateFeatures) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysHybrid;

impl GateScorer for AlwaysHybrid {
    fn score(&self, _: &GateFeatures) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysPure;

impl GateScorer for AlwaysPure {
    fn score(&self, _: &GateFeatures) -> f64 {
        0.0
    }
}

/// Routes to hybrid when `feature <= threshold` (or `>=` with `hybrid_above`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub feature: Feature,
    pub threshold: f64,
    pub hybrid_above: bool,
}

impl GateScorer for ThresholdRule {
    fn score(&self, features: &GateFeatures) -> f64 {
        let v = self.feature.value(features);
        let hybrid = if self.hybrid_above {
            v >= self.threshold
        } else {
            v <= self.threshold
        };
        if hybrid {
            1.0
        } else {
            0.0
        }
    }
}

pub fn gate_predict(features: &GateFeatures, scorer: &dyn GateScorer) -> Route {
    if scorer.score(features) >= 0.5 {
        Route::Hybrid
    } else {
        Route::Pure
    }
}

/// Ground truth for one test formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledOutcome {
    pub label: bool,
    pub pure_conflicts: u64,
    pub pure_propagations: u64,
    pub hybrid_conflicts: u64,
    pub hybrid_propagations: u64,
}

/// Policy quality. Rates are fractions in `[0, 1]`; `None` where the
/// denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub count: usize,
    /// Fraction of formulas routed to hybrid.
    pub apply: Option<f64>,
    /// Fraction of hybrid wins routed to hybrid.
    pub keep: Option<f64>,
    /// Fraction of non-wins routed to pure.
    pub avoid: Option<f64>,
    /// `1 - sum(policy conflicts) / sum(pure conflicts)`.
    pub conflict_savings: Option<f64>,
    pub propagation_savings: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn gate_evaluate(routes: &[Route], outcomes: &[LabeledOutcome]) -> Result<PolicyMetrics, GateError> {
    if routes.len() != outcomes.len() {
        return Err(GateError::LengthMismatch {
            decisions: routes.len(),
            labels: outcomes.len(),
        });
    }
    let mut hybrid = 0;
    let (mut wins, mut wins_kept) = (0, 0);
    let (mut losses, mut losses_avoided) = (0, 0);
    let (mut pure_c, mut pure_p, mut policy_c, mut policy_p) = (0u128, 0u128, 0u128, 0u128);
    for (route, o) in routes.iter().zip(outcomes) {
        let to_hybrid = *route == Route::Hybrid;
        hybrid += to_hybrid as usize;
        if o.label {
            wins += 1;
            wins_kept += to_hybrid as usize;
        } else {
            losses += 1;
            losses_avoided += (!to_hybrid) as usize;
        }
        pure_c += o.pure_conflicts as u128;
        pure_p += o.pure_propagations as u128;
        if to_hybrid {
            policy_c += o.hybrid_conflicts as u128;
            policy_p += o.hybrid_propagations as u128;
        } else {
            policy_c += o.pure_conflicts as u128;
            policy_p += o.pure_propagations as u128;
        }
    }
    let savings = |policy: u128, pure: u128| (pure > 0).then(|| 1.0 - policy as f64 / pure as f64);
    Ok(PolicyMetrics {
        count: routes.len(),
        apply: ratio(hybrid, routes.len()),
        keep: ratio(wins_kept, wins),
        avoid: ratio(losses_avoided, losses),
        conflict_savings: savings(policy_c, pure_c),
        propagation_savings: savings(policy_p, pure_p),
    })
}

/// One row of the `gate eval` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub path: String,
    pub route: Route,
    pub label: u8,
    pub pure_conflicts: u64,
    pub pure_props: u64,
    pub hyb_conf: u64,
    pub hyb_prop: u64,
}

impl EvalRecord {
    pub fn outcome(&self) -> LabeledOutcome {
        LabeledOutcome {
            label: self.label != 0,
            pure_conflicts: self.pure_conflicts,
            pure_propagations: self.pure_props,
            hybrid_conflicts: self.hyb_conf,
            hybrid_propagations: self.hyb_prop,
        }
    }
}

/// Reads decisions and labels from CSV with header
/// `path,route,label,pure_conflicts,pure_props,hyb_conf,hyb_prop`.
/// Lines starting with `#` are ignored.
pub fn read_eval_csv(input: impl Read) -> Result<Vec<EvalRecord>, GateError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn evaluate_records(records: &[EvalRecord]) -> Result<PolicyMetrics, GateError> {
    let routes: Vec<Route> = records.iter().map(|r| r.route).collect();
    let outcomes: Vec<LabeledOutcome> = records.iter().map(EvalRecord::outcome).collect();
    gate_evaluate(&routes, &outcomes)
}

/// Column names of the `gate features` CSV.
pub fn feature_csv_header() -> Vec<&'static str> {
    vec![
        "path",
        "n",
        "m",
        "ratio",
        "len1",
        "len2",
        "len3",
        "len4plus",
        "pos_frac",
        "deg_mean",
        "deg_max",
        "deg_var",
        "q_abs",
        "probe_min_v",
        "probe_mean_v",
        "probe_candidates",
    ]
}

pub fn feature_csv_row(path: &str, f: &GateFeatures) -> Vec<String> {
    let s = &f.structural;
    let p = &f.probe;
    vec![
        path.to_string(),
        s.n.to_string(),
        s.m.to_string(),
        s.ratio.to_string(),
        s.len_hist[0].to_string(),
        s.len_hist[1].to_string(),
        s.len_hist[2].to_string(),
        s.len_hist[3].to_string(),
        s.positive_fraction.to_string(),
        s.degree_mean.to_string(),
        s.degree_max.to_string(),
        s.degree_variance.to_string(),
        p.q_abs.to_string(),
        p.min_violation.to_string(),
        p.mean_violation.to_string(),
        p.candidate_count.to_string(),
    ]
}

pub fn write_features_csv<'a>(
    out: impl Write,
    rows: impl IntoIterator<Item = (&'a str, &'a GateFeatures)>,
) -> Result<(), GateError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(feature_csv_header())?;
    for (path, f) in rows {
        writer.write_record(feature_csv_row(path, f))?;
    }
    writer.flush()?;
    Ok(())
}
