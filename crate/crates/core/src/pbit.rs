//! Annealed p-bit sampling over an [`IsingModel`].
//!
//! Each spin is a p-bit: given the effective field `f_i = -h_i - sum_j J_ij y_j`
//! it becomes +1 with probability `(1 + tanh(beta * f_i)) / 2`. Replicas are
//! swept sequentially while `beta` rises geometrically from hot to cold, then
//! ranked by the direct violation count of their original-variable spins.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{CnfFormula, SpinVector};
use crate::ising::IsingModel;

/// Identifies the replica RNG so runs can be replayed.
pub const RNG_ALGORITHM: &str = "chacha8 (seed_from_u64(master_seed), stream = replica index)";

#[derive(Debug, Error, PartialEq)]
pub enum PbitError {
    #[error("spin index {index} out of range for {len} spins")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid annealing schedule: {0}")]
    InvalidSchedule(String),
    #[error("replica count must be at least 1")]
    NoReplicas,
}

/// Geometric inverse-temperature ramp `beta_hot -> beta_cold` over `sweeps` sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    beta_hot: f64,
    beta_cold: f64,
    sweeps: usize,
}

impl AnnealSchedule {
    pub fn geometric(beta_hot: f64, beta_cold: f64, sweeps: usize) -> Result<Self, PbitError> {
        if !(beta_hot > 0.0 && beta_hot.is_finite() && beta_cold.is_finite()) {
            return Err(PbitError::InvalidSchedule(format!(
                "betas must be positive and finite (hot {beta_hot}, cold {beta_cold})"
            )));
        }
        if beta_hot >= beta_cold {
            return Err(PbitError::InvalidSchedule(format!(
                "beta_hot {beta_hot} must be below beta_cold {beta_cold}"
            )));
        }
        if sweeps == 0 {
            return Err(PbitError::InvalidSchedule("sweeps must be at least 1".into()));
        }
        Ok(AnnealSchedule {
            beta_hot,
            beta_cold,
            sweeps,
        })
    }

    pub fn beta_hot(&self) -> f64 {
        self.beta_hot
    }

    pub fn beta_cold(&self) -> f64 {
        self.beta_cold
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Inverse temperature of sweep `t`. A single-sweep schedule runs cold.
    pub fn beta(&self, t: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_cold;
        }
        if t + 1 >= self.sweeps {
            return self.beta_cold;
        }
        let frac = t as f64 / (self.sweeps - 1) as f64;
        self.beta_hot * (self.beta_cold / self.beta_hot).powf(frac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SweepOrder {
    /// Spins 0..n every sweep.
    #[default]
    Ascending,
    /// A fresh random permutation each sweep, drawn from the replica RNG.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub replicas: usize,
    pub sweeps: usize,
    pub beta_hot: f64,
    pub beta_cold: f64,
    pub order: SweepOrder,
    pub execution: Execution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            replicas: 30,
            sweeps: 700,
            beta_hot: 0.1,
            beta_cold: 5.0,
            order: SweepOrder::Ascending,
            execution: Execution::Parallel,
        }
    }
}

impl SamplerConfig {
    /// The short, cheap run used for gate features: 10 replicas, 200 sweeps.
    pub fn probe() -> Self {
        SamplerConfig {
            replicas: 10,
            sweeps: 200,
            ..Default::default()
        }
    }

    pub fn schedule(&self) -> Result<AnnealSchedule, PbitError> {
        AnnealSchedule::geometric(self.beta_hot, self.beta_cold, self.sweeps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaSeed {
    pub master: u64,
    pub stream: u64,
}

impl ReplicaSeed {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

/// Replica spins over the original variables, sorted by violation count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    replicas: Vec<SpinVector>,
    violations: Vec<usize>,
    seeds: Vec<ReplicaSeed>,
}

impl SampleSet {
    /// Scores each replica against `formula` and sorts ascending by violations,
    /// ties kept in input order.
    pub fn from_replicas(formula: &CnfFormula, replicas: Vec<SpinVector>, seeds: Vec<ReplicaSeed>) -> Self {
        assert_eq!(replicas.len(), seeds.len());
        let violations: Vec<usize> = replicas.iter().map(|s| formula.violation_count(s)).collect();
        Self::from_scored(replicas, violations, seeds)
    }

    /// Builds a set from precomputed violation counts, sorting as above.
    pub fn from_scored(replicas: Vec<SpinVector>, violations: Vec<usize>, seeds: Vec<ReplicaSeed>) -> Self {
        assert_eq!(replicas.len(), violations.len());
        assert_eq!(replicas.len(), seeds.len());
        let mut order: Vec<usize> = (0..replicas.len()).collect();
        order.sort_by_key(|&r| violations[r]);
        let mut reps: Vec<Option<SpinVector>> = replicas.into_iter().map(Some).collect();
        SampleSet {
            replicas: order.iter().map(|&r| reps[r].take().unwrap()).collect(),
            violations: order.iter().map(|&r| violations[r]).collect(),
            seeds: order.iter().map(|&r| seeds[r]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.replicas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicas.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.replicas.first().map_or(0, SpinVector::len)
    }

    pub fn replicas(&self) -> &[SpinVector] {
        &self.replicas
    }

    pub fn violations(&self) -> &[usize] {
        &self.violations
    }

    pub fn seeds(&self) -> &[ReplicaSeed] {
        &self.seeds
    }

    pub fn best_violation(&self) -> Option<usize> {
        self.violations.first().copied()
    }
}

/// `-h_i - sum_j J_ij y_j`
pub fn local_field(model: &IsingModel, y: &[i8], i: usize) -> Result<f64, PbitError> {
    if i >= model.num_spins() || i >= y.len() {
        return Err(PbitError::IndexOutOfRange {
            index: i,
            len: model.num_spins(),
        });
    }
    Ok(field_unchecked(model, y, i))
}

#[inline]
fn field_unchecked(model: &IsingModel, y: &[i8], i: usize) -> f64 {
    let coupled: f64 = model
        .neighbors(i)
        .iter()
        .map(|&(j, w)| w * y[j as usize] as f64)
        .sum();
    -model.field_real(i) - coupled
}

/// `Pr(y_i = +1) = (1 + tanh(beta * field)) / 2`
#[inline]
pub fn update_probability(field: f64, beta: f64) -> f64 {
    0.5 * (1.0 + (beta * field).tanh())
}

/// One sequential sweep in ascending spin order, each update seeing the
/// spins already refreshed earlier in the same sweep.
pub fn sweep<R: Rng + ?Sized>(model: &IsingModel, y: &mut [i8], beta: f64, rng: &mut R) {
    for i in 0..y.len() {
        update_spin(model, y, i, beta, rng);
    }
}

/// Sweep visiting spins in the order given by `order`.
pub fn sweep_in_order<R: Rng + ?Sized>(
    model: &IsingModel,
    y: &mut [i8],
    beta: f64,
    order: &[usize],
    rng: &mut R,
) {
    for &i in order {
        update_spin(model, y, i, beta, rng);
    }
}

#[inline]
pub fn update_spin<R: Rng + ?Sized>(model: &IsingModel, y: &mut [i8], i: usize, beta: f64, rng: &mut R) {
    let p = update_probability(field_unchecked(model, y, i), beta);
    let u: f64 = rng.gen();
    y[i] = if u < p { 1 } else { -1 };
}

/// Uniform random initial spins, auxiliaries included.
pub fn random_spins<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i8> {
    (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}

/// Anneals one replica and returns the full final spin vector.
pub fn anneal_replica(
    model: &IsingModel,
    schedule: &AnnealSchedule,
    order: SweepOrder,
    seed: ReplicaSeed,
) -> Vec<i8> {
    let mut rng = seed.rng();
    let mut y = random_spins(model.num_spins(), &mut rng);
    let mut perm: Vec<usize> = (0..y.len()).collect();
    for t in 0..schedule.sweeps() {
        let beta = schedule.beta(t);
        match order {
            SweepOrder::Ascending => sweep(model, &mut y, beta, &mut rng),
            SweepOrder::Shuffled => {
                perm.shuffle(&mut rng);
                sweep_in_order(model, &mut y, beta, &perm, &mut rng);
            }
        }
    }
    y
}

/// Runs `cfg.replicas` independent annealing chains. Replica `r` draws from
/// ChaCha8 stream `r` of `master_seed`, so serial and parallel execution give
/// identical results.
pub fn run_sampler(
    formula: &CnfFormula,
    model: &IsingModel,
    cfg: &SamplerConfig,
    master_seed: u64,
) -> Result<SampleSet, PbitError> {
    if cfg.replicas == 0 {
        return Err(PbitError::NoReplicas);
    }
    let schedule = cfg.schedule()?;
    let n = formula.num_vars();
    debug_assert_eq!(model.n_orig(), n);
    let seeds: Vec<ReplicaSeed> = (0..cfg.replicas as u64)
        .map(|stream| ReplicaSeed {
            master: master_seed,
            stream,
        })
        .collect();
    let run = |seed: &ReplicaSeed| {
        let y = anneal_replica(model, &schedule, cfg.order, *seed);
        SpinVector::new(y[..n].to_vec()).expect("sampler only writes +-1")
    };
    let replicas: Vec<SpinVector> = match cfg.execution {
        Execution::Serial => seeds.iter().map(run).collect(),
        Execution::Parallel => seeds.par_iter().map(run).collect(),
    };
    Ok(SampleSet::from_replicas(formula, replicas, seeds))
}
