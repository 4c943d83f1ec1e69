//! Conflict-driven clause learning solver with assumptions.
//!
//! MiniSat lineage: two watched literals per clause, first-UIP learning with
//! basic clause minimization, exponentially decayed variable activity, phase
//! saving (initial phase false) and Luby restarts. Assumptions are enqueued
//! as pseudo-decisions on levels `1..=k` before any free decision.
//!
//! Counters accumulate over the lifetime of a [`Solver`]. A conflict is
//! counted each time propagation falsifies a clause; a propagation is counted
//! for every literal assigned because some clause became unit. Decisions and
//! assumptions are not propagations. Learned clauses survive across calls.

mod heap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{BoolAssignment, CnfFormula, Lit, Var};
use heap::VarHeap;

/// Activity decay factor applied after every conflict.
pub const VAR_DECAY: f64 = 0.95;
/// Luby restart unit, in conflicts.
pub const RESTART_BASE: u64 = 64;
/// Learned clauses are only ever deleted above this count.
pub const MAX_LEARNTS: usize = 100_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CdclError {
    #[error("formula is unsatisfiable at decision level 0")]
    TriviallyUnsat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Budget {
    #[default]
    Unlimited,
    /// Stop once this call has produced this many conflicts. Checked after
    /// each conflict.
    Conflicts(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Sat,
    /// UNSAT, either outright (`failed_assumptions` empty) or under the
    /// assumptions passed to the call.
    Unsat,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub model: Option<BoolAssignment>,
    /// Assumptions responsible for an UNSAT answer; empty means the formula
    /// itself is unsatisfiable.
    pub failed_assumptions: Vec<Lit>,
    pub call_conflicts: u64,
    pub call_propagations: u64,
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        self.status == SolveStatus::Sat
    }

    /// True when the formula itself was refuted, independent of assumptions.
    pub fn is_formula_unsat(&self) -> bool {
        self.status == SolveStatus::Unsat && self.failed_assumptions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub conflicts: u64,
    pub propagations: u64,
    pub decisions: u64,
    pub restarts: u64,
}

type ClauseRef = usize;

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<Lit>,
    deleted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: ClauseRef,
    blocker: Lit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    True,
    False,
    Undef,
}

#[derive(Debug, Clone)]
pub struct Solver {
    num_vars: usize,
    clauses: Vec<Clause>,
    learnts: Vec<ClauseRef>,
    num_problem_clauses: usize,
    // indexed by literal code: clauses in which that literal is watched
    watches: Vec<Vec<Watcher>>,
    // per variable: +1 true, -1 false, 0 unassigned
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<ClauseRef>>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    var_inc: f64,
    order: VarHeap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    ok: bool,
    stats: SolverStats,
}

impl Solver {
    /// Loads `formula` and propagates its unit clauses at level 0. An
    /// unsatisfiable-at-root formula still yields a solver, which answers
    /// UNSAT to every call; see [`Solver::try_new`] for the checked form.
    pub fn new(formula: &CnfFormula) -> Self {
        let n = formula.num_vars();
        let mut s = Solver {
            num_vars: n,
            clauses: Vec::with_capacity(formula.num_clauses()),
            learnts: Vec::new(),
            num_problem_clauses: 0,
            watches: vec![Vec::new(); 2 * n],
            assigns: vec![0; n],
            level: vec![0; n],
            reason: vec![None; n],
            phase: vec![false; n],
            activity: vec![0.0; n],
            var_inc: 1.0,
            order: VarHeap::new(n),
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: vec![false; n],
            ok: true,
            stats: SolverStats::default(),
        };
        for v in 0..n as u32 {
            s.order.insert(v, &s.activity);
        }

        let mut units = Vec::new();
        for (idx, clause) in formula.clauses().iter().enumerate() {
            if formula.is_tautology(idx) {
                continue;
            }
            match clause.len() {
                0 => s.ok = false,
                1 => units.push(clause[0]),
                _ => {
                    s.attach(clause.clone(), false);
                    s.num_problem_clauses += 1;
                }
            }
        }
        if s.ok {
            for lit in units {
                match s.value(lit) {
                    Value::True => {}
                    Value::False => {
                        s.ok = false;
                        break;
                    }
                    Value::Undef => s.enqueue(lit, None),
                }
            }
        }
        if s.ok && s.propagate().is_some() {
            s.ok = false;
        }
        s.stats = SolverStats::default();
        s
    }

    pub fn try_new(formula: &CnfFormula) -> Result<Self, CdclError> {
        let s = Self::new(formula);
        if s.ok {
            Ok(s)
        } else {
            Err(CdclError::TriviallyUnsat)
        }
    }

    pub fn is_trivially_unsat(&self) -> bool {
        !self.ok
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Problem clauses of length two or more held in the database.
    pub fn num_problem_clauses(&self) -> usize {
        self.num_problem_clauses
    }

    pub fn num_learnts(&self) -> usize {
        self.learnts.len()
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// Learned clauses currently in the database.
    pub fn learned_clauses(&self) -> Vec<Vec<Lit>> {
        self.learnts
            .iter()
            .map(|&c| self.clauses[c].lits.clone())
            .collect()
    }

    /// Literals fixed at decision level 0 (input units and learned units).
    pub fn root_literals(&self) -> Vec<Lit> {
        let end = self.trail_lim.first().copied().unwrap_or(self.trail.len());
        self.trail[..end].to_vec()
    }

    #[inline]
    fn value(&self, lit: Lit) -> Value {
        match self.assigns[lit.var().index()] {
            0 => Value::Undef,
            a if (a > 0) == lit.is_positive() => Value::True,
            _ => Value::False,
        }
    }

    #[inline]
    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    #[inline]
    fn enqueue(&mut self, lit: Lit, reason: Option<ClauseRef>) {
        let v = lit.var().index();
        debug_assert_eq!(self.assigns[v], 0);
        self.assigns[v] = if lit.is_positive() { 1 } else { -1 };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> ClauseRef {
        debug_assert!(lits.len() >= 2);
        let cref = self.clauses.len();
        self.watches[lits[0].code()].push(Watcher {
            cref,
            blocker: lits[1],
        });
        self.watches[lits[1].code()].push(Watcher {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(Clause {
            lits,
            deleted: false,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    /// Unit propagation over the watch lists. Returns a falsified clause.
    fn propagate(&mut self) -> Option<ClauseRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == Value::True {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let kept = Watcher {
                    cref,
                    blocker: first,
                };
                if first != w.blocker && self.value(first) == Value::True {
                    ws[j] = kept;
                    j += 1;
                    continue;
                }
                // look for a replacement watch
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let lit = self.clauses[cref].lits[k];
                    if self.value(lit) != Value::False {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[lit.code()].push(kept);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = kept;
                j += 1;
                if self.value(first) == Value::False {
                    conflict = Some(cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                    self.stats.propagations += 1;
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.trail_lim[level as usize];
        for idx in (start..self.trail.len()).rev() {
            let lit = self.trail[idx];
            let v = lit.var().index();
            self.assigns[v] = 0;
            self.reason[v] = None;
            self.phase[v] = lit.is_positive();
            self.order.insert(v as u32, &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(level as usize);
        self.qhead = start;
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.increased(v as u32, &self.activity);
    }

    /// First-UIP conflict analysis. Returns the learned clause (asserting
    /// literal first, a literal of the backjump level second) and the
    /// backjump level.
    fn analyze(&mut self, mut confl: ClauseRef) -> (Vec<Lit>, u32) {
        let current = self.decision_level();
        let mut learnt: Vec<Lit> = vec![Lit::from_code(0)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();

        loop {
            let start = usize::from(p.is_some());
            let len = self.clauses[confl].lits.len();
            debug_assert!(p.is_none() || self.clauses[confl].lits[0] == p.unwrap());
            for k in start..len {
                let q = self.clauses[confl].lits[k];
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let lit = self.trail[index];
            let v = lit.var().index();
            self.seen[v] = false;
            path -= 1;
            p = Some(lit);
            if path == 0 {
                break;
            }
            confl = self.reason[v].expect("non-UIP literal at conflict level has a reason");
        }
        learnt[0] = !p.unwrap();

        // Basic minimization: drop literals whose reason is subsumed by the clause.
        let marked: Vec<Lit> = learnt[1..].to_vec();
        let mut kept = 1;
        for k in 1..learnt.len() {
            let v = learnt[k].var().index();
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r].lits[1..].iter().all(|q| {
                    let u = q.var().index();
                    self.seen[u] || self.level[u] == 0
                }),
            };
            if !redundant {
                learnt[kept] = learnt[k];
                kept += 1;
            }
        }
        learnt.truncate(kept);
        for lit in marked {
            self.seen[lit.var().index()] = false;
        }

        let backjump = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var().index()] > self.level[learnt[max_i].var().index()] {
                    max_i = k;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().index()]
        };
        (learnt, backjump)
    }

    /// Assumptions implicated in forcing `failed` false. `failed` itself is
    /// included.
    fn analyze_final(&mut self, failed: Lit) -> Vec<Lit> {
        let mut out = vec![failed];
        if self.decision_level() == 0 {
            return out;
        }
        let fv = failed.var().index();
        self.seen[fv] = true;
        let start = self.trail_lim[0];
        for idx in (start..self.trail.len()).rev() {
            let lit = self.trail[idx];
            let v = lit.var().index();
            if !self.seen[v] {
                continue;
            }
            match self.reason[v] {
                None => {
                    if v != fv {
                        out.push(lit);
                    }
                }
                Some(r) => {
                    for k in 1..self.clauses[r].lits.len() {
                        let u = self.clauses[r].lits[k].var().index();
                        if self.level[u] > 0 {
                            self.seen[u] = true;
                        }
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[fv] = false;
        out
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assigns[v as usize] == 0 {
                return Some(Lit::new(Var(v), self.phase[v as usize]));
            }
        }
        None
    }

    /// Deletes the larger half of the unlocked learned clauses.
    fn reduce_learnts(&mut self) {
        let mut candidates: Vec<ClauseRef> = self
            .learnts
            .iter()
            .copied()
            .filter(|&c| !self.is_locked(c) && self.clauses[c].lits.len() > 2)
            .collect();
        candidates.sort_by_key(|&c| std::cmp::Reverse(self.clauses[c].lits.len()));
        let remove = self.learnts.len() / 2;
        for &c in candidates.iter().take(remove) {
            self.clauses[c].deleted = true;
            self.clauses[c].lits = Vec::new();
        }
        let clauses = &self.clauses;
        self.learnts.retain(|&c| !clauses[c].deleted);
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref].deleted);
        }
    }

    fn is_locked(&self, cref: ClauseRef) -> bool {
        let first = self.clauses[cref].lits[0];
        self.value(first) == Value::True && self.reason[first.var().index()] == Some(cref)
    }

    fn extract_model(&self) -> BoolAssignment {
        BoolAssignment::new(self.assigns.iter().map(|&a| a > 0).collect())
    }

    /// Solves the formula under `assumptions` (all must hold) with a
    /// conflict budget for this call.
    pub fn solve(&mut self, assumptions: &[Lit], budget: Budget) -> SolveOutcome {
        let before = self.stats;
        let finish = |s: &mut Solver, status, model, failed| {
            s.cancel_until(0);
            SolveOutcome {
                status,
                model,
                failed_assumptions: failed,
                call_conflicts: s.stats.conflicts - before.conflicts,
                call_propagations: s.stats.propagations - before.propagations,
            }
        };

        if !self.ok {
            return finish(self, SolveStatus::Unsat, None, Vec::new());
        }
        for &a in assumptions {
            assert!(a.var().index() < self.num_vars, "assumption {a} out of range");
            if assumptions.contains(&!a) {
                return finish(self, SolveStatus::Unsat, None, vec![a, !a]);
            }
        }

        let limit = match budget {
            Budget::Unlimited => u64::MAX,
            Budget::Conflicts(c) => c,
        };
        let mut call_conflicts = 0u64;
        let mut restart_index = 0u64;
        let mut restart_limit = RESTART_BASE * luby(restart_index);
        let mut since_restart = 0u64;

        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                call_conflicts += 1;
                since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return finish(self, SolveStatus::Unsat, None, Vec::new());
                }
                let (learnt, backjump) = self.analyze(confl);
                self.cancel_until(backjump);
                let asserting = learnt[0];
                if learnt.len() == 1 {
                    self.enqueue(asserting, None);
                } else {
                    let cref = self.attach(learnt, true);
                    self.enqueue(asserting, Some(cref));
                }
                self.stats.propagations += 1;
                self.var_inc /= VAR_DECAY;
                if call_conflicts >= limit {
                    return finish(self, SolveStatus::BudgetExhausted, None, Vec::new());
                }
                continue;
            }

            if since_restart >= restart_limit {
                self.cancel_until(0);
                self.stats.restarts += 1;
                restart_index += 1;
                restart_limit = RESTART_BASE * luby(restart_index);
                since_restart = 0;
                continue;
            }
            if self.learnts.len() > MAX_LEARNTS {
                self.reduce_learnts();
            }

            let mut next = None;
            while (self.decision_level() as usize) < assumptions.len() {
                let a = assumptions[self.decision_level() as usize];
                match self.value(a) {
                    Value::True => self.trail_lim.push(self.trail.len()),
                    Value::False => {
                        let failed = self.analyze_final(a);
                        return finish(self, SolveStatus::Unsat, None, failed);
                    }
                    Value::Undef => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let lit = match next {
                Some(a) => a,
                None => match self.pick_branch() {
                    Some(l) => {
                        self.stats.decisions += 1;
                        l
                    }
                    None => {
                        let model = self.extract_model();
                        return finish(self, SolveStatus::Sat, Some(model), Vec::new());
                    }
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(lit, None);
        }
    }
}

/// Element `i` (0-based) of the Luby sequence 1 1 2 1 1 2 4 1 1 2 ...
pub fn luby(mut i: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1 << seq
}
