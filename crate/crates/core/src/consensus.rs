//! High-agreement literal extraction from a ranked [`SampleSet`].
//!
//! Candidates are variables on which the `top_k` lowest-violation replicas are
//! unanimous. Candidates are ranked by the quality-weighted magnetization
//! `m_i = sum_r w_r s_i^(r)` over all replicas, with `w_r` proportional to
//! `1 / (1 + V_r)`. These literals are search hints, not backbone claims.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Lit, Var};
use crate::pbit::SampleSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("top_k = {top_k} must be between 1 and the replica count {replicas}")]
    InvalidTopK { top_k: usize, replicas: usize },
    #[error("max_assumptions must be at least 1")]
    ZeroCapacity,
    #[error("sample set is empty")]
    EmptySampleSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    pub top_k: usize,
    pub max_assumptions: usize,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            top_k: 5,
            max_assumptions: 12,
        }
    }
}

impl ConsensusConfig {
    pub fn validate(&self, replicas: usize) -> Result<(), ConsensusError> {
        if self.top_k == 0 || self.top_k > replicas {
            return Err(ConsensusError::InvalidTopK {
                top_k: self.top_k,
                replicas,
            });
        }
        if self.max_assumptions == 0 {
            return Err(ConsensusError::ZeroCapacity);
        }
        Ok(())
    }
}

/// Per-variable spin sums over the top-k pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agreement {
    k: usize,
    sums: Vec<i64>,
}

impl Agreement {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sums(&self) -> &[i64] {
        &self.sums
    }

    /// `(1/k) sum_{r in top k} s_i^(r)`
    pub fn score(&self, var: usize) -> f64 {
        self.sums[var] as f64 / self.k as f64
    }

    pub fn scores(&self) -> Vec<f64> {
        (0..self.sums.len()).map(|i| self.score(i)).collect()
    }

    /// Unanimity, tested on the integer sum.
    pub fn is_candidate(&self, var: usize) -> bool {
        self.sums[var].unsigned_abs() == self.k as u64
    }

    pub fn candidates(&self) -> Vec<usize> {
        (0..self.sums.len()).filter(|&i| self.is_candidate(i)).collect()
    }
}

pub fn agreement_scores(samples: &SampleSet, k: usize) -> Result<Agreement, ConsensusError> {
    if k == 0 || k > samples.len() {
        return Err(ConsensusError::InvalidTopK {
            top_k: k,
            replicas: samples.len(),
        });
    }
    let mut sums = vec![0i64; samples.num_vars()];
    for rep in &samples.replicas()[..k] {
        for (sum, &s) in sums.iter_mut().zip(rep.values()) {
            *sum += s as i64;
        }
    }
    Ok(Agreement { k, sums })
}

/// `w_r = (1 + V_r)^-1 / sum_q (1 + V_q)^-1`
pub fn replica_weights(samples: &SampleSet) -> Vec<f64> {
    let raw: Vec<f64> = samples
        .violations()
        .iter()
        .map(|&v| 1.0 / (1.0 + v as f64))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub fn weighted_magnetization(samples: &SampleSet) -> Result<Vec<f64>, ConsensusError> {
    if samples.is_empty() {
        return Err(ConsensusError::EmptySampleSet);
    }
    let weights = replica_weights(samples);
    let mut m = vec![0.0; samples.num_vars()];
    for (rep, &w) in samples.replicas().iter().zip(&weights) {
        for (mi, &s) in m.iter_mut().zip(rep.values()) {
            *mi += w * s as f64;
        }
    }
    Ok(m)
}

/// Mean of `|m_i|` over the original variables.
pub fn q_abs(samples: &SampleSet) -> Result<f64, ConsensusError> {
    let m = weighted_magnetization(samples)?;
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(m.iter().map(|x| x.abs()).sum::<f64>() / m.len() as f64)
}

/// Ordered assumption literals with the `|m_i|` that ranked them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssumptionSet {
    literals: Vec<Lit>,
    scores: Vec<f64>,
}

impl AssumptionSet {
    /// Builds a set from literals in priority order, without scores.
    /// Returns `None` if a variable appears twice.
    pub fn from_literals(literals: Vec<Lit>) -> Option<Self> {
        let mut vars: Vec<Var> = literals.iter().map(|l| l.var()).collect();
        vars.sort_unstable();
        vars.dedup();
        if vars.len() != literals.len() {
            return None;
        }
        let scores = vec![f64::NAN; literals.len()];
        Some(AssumptionSet { literals, scores })
    }

    pub fn literals(&self) -> &[Lit] {
        &self.literals
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// The first `ceil(len / 2)` literals.
    pub fn top_half(&self) -> AssumptionSet {
        let keep = self.len().div_ceil(2);
        AssumptionSet {
            literals: self.literals[..keep].to_vec(),
            scores: self.scores[..keep].to_vec(),
        }
    }

    pub fn to_dimacs(&self) -> Vec<i32> {
        self.literals.iter().map(|l| l.to_dimacs()).collect()
    }
}

/// Ranks unanimity candidates by descending `|m_i|` (ties: lower variable
/// first) and keeps at most `max_assumptions`. An empty result means there
/// is nothing to assume.
pub fn select_assumptions(
    samples: &SampleSet,
    cfg: &ConsensusConfig,
) -> Result<AssumptionSet, ConsensusError> {
    if samples.is_empty() {
        return Err(ConsensusError::EmptySampleSet);
    }
    cfg.validate(samples.len())?;
    let agreement = agreement_scores(samples, cfg.top_k)?;
    let m = weighted_magnetization(samples)?;
    let mut ranked: Vec<usize> = agreement.candidates();
    ranked.sort_by(|&a, &b| m[b].abs().total_cmp(&m[a].abs()).then(a.cmp(&b)));
    ranked.truncate(cfg.max_assumptions);
    let literals = ranked
        .iter()
        .map(|&v| Lit::new(Var(v as u32), agreement.sums()[v] > 0))
        .collect();
    let scores = ranked.iter().map(|&v| m[v].abs()).collect();
    Ok(AssumptionSet { literals, scores })
}
