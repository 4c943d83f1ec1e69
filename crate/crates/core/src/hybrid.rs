//! Sample, assume, retry, rescue.
//!
//! The pipeline on one formula:
//!
//! 1. encode to an Ising model, anneal replicas, select assumption literals;
//!    with no candidates, solve unrestricted (`PureSkip`);
//! 2. guided CDCL call under the assumptions with conflict budget `budget1`;
//! 3. on failure, a retry with budget `budget2` under the weakened set;
//! 4. on failure, an unrestricted, unlimited rescue call.
//!
//! All calls share one solver, so clauses learned while guided are available
//! to the rescue. Answers only ever come from the solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cdcl::{Budget, SolveOutcome, SolveStatus, Solver};
use crate::consensus::{self, AssumptionSet, ConsensusConfig, ConsensusError};
use crate::formula::{BoolAssignment, CnfFormula, Lit};
use crate::ising::{self, IsingError};
use crate::pbit::{self, PbitError, SamplerConfig};

#[derive(Debug, Error)]
pub enum HybridError {
    #[error(transparent)]
    Sampler(#[from] PbitError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Encoding(#[from] IsingError),
    #[error("forced assumptions repeat a variable or reference one out of range")]
    InvalidForcedAssumptions,
    #[error("solver returned a model that violates the formula")]
    ModelCheckFailed,
}

/// How the retry attempt derives its assumptions from the guided set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RetryPolicy {
    /// Keep the first `ceil(|rho| / 2)` literals by magnetization rank.
    #[default]
    Halve,
    /// Reuse the guided set unchanged.
    Same,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub sampler: SamplerConfig,
    pub consensus: ConsensusConfig,
    pub budget1: u64,
    pub budget2: u64,
    pub master_seed: u64,
    pub retry: RetryPolicy,
    /// Run the rescue on a fresh solver, discarding learned clauses.
    pub fresh_rescue: bool,
    /// Replace sampler guidance with these literals for both guided calls.
    /// Test and ablation hook.
    pub forced_assumptions: Option<Vec<Lit>>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            sampler: SamplerConfig::default(),
            consensus: ConsensusConfig::default(),
            budget1: 1500,
            budget2: 1000,
            master_seed: 1,
            retry: RetryPolicy::Halve,
            fresh_rescue: false,
            forced_assumptions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Guided,
    Retry,
    Rescue,
    PureSkip,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Guided => "guided",
            Mode::Retry => "retry",
            Mode::Rescue => "rescue",
            Mode::PureSkip => "pure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Guided,
    Retry,
    Rescue,
    Unrestricted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Sat(BoolAssignment),
    Unsat,
}

impl Answer {
    pub fn is_sat(&self) -> bool {
        matches!(self, Answer::Sat(_))
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Answer::Sat(_) => "SAT",
            Answer::Unsat => "UNSAT",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub phase: Phase,
    pub assumptions: AssumptionSet,
    pub outcome: SolveOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridReport {
    pub answer: Answer,
    pub mode: Mode,
    pub phases: Vec<PhaseRecord>,
    pub conflicts: u64,
    pub propagations: u64,
    pub rescue_flag: bool,
    /// `n - |rho|` for the guided attempt; the restricted subcube has
    /// `2^subcube_exponent` points before propagation.
    pub subcube_exponent: Option<usize>,
    /// Lowest direct violation count among the annealed replicas.
    pub best_violation: Option<usize>,
}

impl HybridReport {
    fn single(phase: Phase, outcome: SolveOutcome, mode: Mode) -> Self {
        let answer = answer_of(&outcome);
        HybridReport {
            answer,
            mode,
            conflicts: outcome.call_conflicts,
            propagations: outcome.call_propagations,
            phases: vec![PhaseRecord {
                phase,
                assumptions: AssumptionSet::default(),
                outcome,
            }],
            rescue_flag: false,
            subcube_exponent: None,
            best_violation: None,
        }
    }
}

fn answer_of(outcome: &SolveOutcome) -> Answer {
    match (&outcome.status, &outcome.model) {
        (SolveStatus::Sat, Some(m)) => Answer::Sat(m.clone()),
        _ => Answer::Unsat,
    }
}

fn check_answer(formula: &CnfFormula, report: HybridReport) -> Result<HybridReport, HybridError> {
    if let Answer::Sat(model) = &report.answer {
        if !formula.is_satisfied_by(model) {
            return Err(HybridError::ModelCheckFailed);
        }
    }
    Ok(report)
}

/// One unrestricted, unlimited solve on a fresh solver.
pub fn solve_pure(formula: &CnfFormula) -> Result<HybridReport, HybridError> {
    let mut solver = Solver::new(formula);
    let outcome = solver.solve(&[], Budget::Unlimited);
    check_answer(
        formula,
        HybridReport::single(Phase::Unrestricted, outcome, Mode::PureSkip),
    )
}

/// Anneals, extracts the assumption set, and reports the best violation count.
pub fn guidance(
    formula: &CnfFormula,
    cfg: &HybridConfig,
) -> Result<(AssumptionSet, Option<usize>), HybridError> {
    if let Some(forced) = &cfg.forced_assumptions {
        if forced.iter().any(|l| l.var().index() >= formula.num_vars()) {
            return Err(HybridError::InvalidForcedAssumptions);
        }
        let set = AssumptionSet::from_literals(forced.clone())
            .ok_or(HybridError::InvalidForcedAssumptions)?;
        return Ok((set, None));
    }
    let model = ising::encode_cnf(formula)?;
    let samples = pbit::run_sampler(formula, &model, &cfg.sampler, cfg.master_seed)?;
    let set = consensus::select_assumptions(&samples, &cfg.consensus)?;
    Ok((set, samples.best_violation()))
}

pub fn solve_hybrid(formula: &CnfFormula, cfg: &HybridConfig) -> Result<HybridReport, HybridError> {
    let mut solver = Solver::new(formula);
    if solver.is_trivially_unsat() {
        let outcome = solver.solve(&[], Budget::Unlimited);
        return Ok(HybridReport::single(Phase::Unrestricted, outcome, Mode::PureSkip));
    }
    cfg.consensus.validate(cfg.sampler.replicas)?;

    let (rho, best_violation) = guidance(formula, cfg)?;
    if rho.is_empty() {
        let outcome = solver.solve(&[], Budget::Unlimited);
        let mut report = HybridReport::single(Phase::Unrestricted, outcome, Mode::PureSkip);
        report.best_violation = best_violation;
        return check_answer(formula, report);
    }

    let mut phases = Vec::with_capacity(3);
    let subcube_exponent = Some(formula.num_vars() - rho.len());
    let mut extra = (0u64, 0u64);

    let guided = solver.solve(rho.literals(), Budget::Conflicts(cfg.budget1));
    let guided_sat = guided.is_sat();
    phases.push(PhaseRecord {
        phase: Phase::Guided,
        assumptions: rho.clone(),
        outcome: guided,
    });

    let (mode, final_phase) = if guided_sat {
        (Mode::Guided, 0)
    } else {
        let retry_set = match (cfg.retry, cfg.forced_assumptions.is_some()) {
            (_, true) | (RetryPolicy::Same, _) => rho.clone(),
            (RetryPolicy::Halve, false) => rho.top_half(),
        };
        let retry = solver.solve(retry_set.literals(), Budget::Conflicts(cfg.budget2));
        let retry_sat = retry.is_sat();
        phases.push(PhaseRecord {
            phase: Phase::Retry,
            assumptions: retry_set,
            outcome: retry,
        });
        if retry_sat {
            (Mode::Retry, 1)
        } else {
            let rescue = if cfg.fresh_rescue {
                let mut fresh = Solver::new(formula);
                let out = fresh.solve(&[], Budget::Unlimited);
                extra = (fresh.stats().conflicts, fresh.stats().propagations);
                out
            } else {
                solver.solve(&[], Budget::Unlimited)
            };
            phases.push(PhaseRecord {
                phase: Phase::Rescue,
                assumptions: AssumptionSet::default(),
                outcome: rescue,
            });
            (Mode::Rescue, 2)
        }
    };

    let stats = solver.stats();
    let report = HybridReport {
        answer: answer_of(&phases[final_phase].outcome),
        mode,
        conflicts: stats.conflicts + extra.0,
        propagations: stats.propagations + extra.1,
        rescue_flag: mode == Mode::Rescue,
        subcube_exponent,
        best_violation,
        phases,
    };
    check_answer(formula, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn formula(n: usize, clauses: &[&[i32]]) -> CnfFormula {
        let cs: Vec<Vec<i32>> = clauses.iter().map(|c| c.to_vec()).collect();
        CnfFormula::from_dimacs_clauses(n, &cs).unwrap()
    }

    fn small_cfg() -> HybridConfig {
        HybridConfig {
            sampler: SamplerConfig {
                replicas: 8,
                sweeps: 100,
                ..Default::default()
            },
            consensus: ConsensusConfig {
                top_k: 3,
                max_assumptions: 4,
            },
            ..Default::default()
        }
    }

    #[test]
    fn trivially_unsat_short_circuits() {
        let f = formula(1, &[&[1], &[-1]]);
        let r = solve_hybrid(&f, &small_cfg()).unwrap();
        assert_eq!(r.answer, Answer::Unsat);
        assert_eq!(r.mode, Mode::PureSkip);
        assert!(!r.rescue_flag);
    }

    #[test]
    fn unit_formula_is_solved_under_guidance() {
        let f = formula(4, &[&[1], &[-2], &[3], &[-4]]);
        let r = solve_hybrid(&f, &small_cfg()).unwrap();
        assert!(r.answer.is_sat());
        // everything is fixed at the root, so assumptions all hold
        assert_eq!(r.mode, Mode::Guided);
        assert_eq!(r.subcube_exponent, Some(0));
        assert_eq!(r.conflicts, 0);
    }

    #[test]
    fn unsat_formula_goes_through_rescue() {
        let f = formula(
            3,
            &[
                &[1, 2],
                &[1, -2],
                &[-1, 3],
                &[-1, -3],
            ],
        );
        let cfg = HybridConfig {
            forced_assumptions: Some(vec![Lit::from_dimacs(2)]),
            ..small_cfg()
        };
        let r = solve_hybrid(&f, &cfg).unwrap();
        assert_eq!(r.answer, Answer::Unsat);
        assert_eq!(r.mode, Mode::Rescue);
        assert!(r.rescue_flag);
        assert_eq!(r.phases.len(), 3);
    }

    #[test]
    fn wrong_forced_assumptions_are_rescued() {
        // only model: 1 2 3
        let f = formula(3, &[&[1], &[-1, 2], &[-2, 3]]);
        let cfg = HybridConfig {
            forced_assumptions: Some(vec![Lit::from_dimacs(-3)]),
            budget1: 1,
            budget2: 1,
            ..small_cfg()
        };
        let r = solve_hybrid(&f, &cfg).unwrap();
        assert_eq!(r.mode, Mode::Rescue);
        assert!(r.answer.is_sat());
        assert_eq!(r.phases[1].assumptions.to_dimacs(), vec![-3]);
    }

    #[test]
    fn forced_assumptions_are_validated() {
        let f = formula(2, &[&[1, 2]]);
        let cfg = HybridConfig {
            forced_assumptions: Some(vec![Lit::from_dimacs(1), Lit::from_dimacs(-1)]),
            ..small_cfg()
        };
        assert!(matches!(
            solve_hybrid(&f, &cfg),
            Err(HybridError::InvalidForcedAssumptions)
        ));
    }

    #[test]
    fn totals_include_fresh_rescue() {
        let f = formula(
            3,
            &[
                &[1, 2],
                &[1, -2],
                &[-1, 3],
                &[-1, -3],
            ],
        );
        let cfg = HybridConfig {
            fresh_rescue: true,
            ..small_cfg()
        };
        let r = solve_hybrid(&f, &cfg).unwrap();
        let summed: u64 = r.phases.iter().map(|p| p.outcome.call_conflicts).sum();
        assert_eq!(r.conflicts, summed);
    }

    #[test]
    fn pure_path() {
        let f = formula(2, &[&[1, 2], &[-1]]);
        let r = solve_pure(&f).unwrap();
        assert_eq!(r.mode, Mode::PureSkip);
        assert!(r.answer.is_sat());
        assert_eq!(r.phases.len(), 1);
    }
}
