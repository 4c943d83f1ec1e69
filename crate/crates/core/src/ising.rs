//! CNF to quadratic Ising Hamiltonian.
//!
//! Each clause contributes the 0/1 polynomial `prod (1 - val(l))`, which is 1
//! exactly on falsifying assignments. Cubic monomials are reduced to quadratic
//! ones with Rosenberg substitution `w = x_i x_j`, enforced by the penalty
//! `M (x_i x_j - 2 x_i w - 2 x_j w + 3 w)`. The result is rewritten over spins
//! with `x = (1 + s) / 2`, giving
//!
//! ```text
//! E(y) = e0 + sum_i h_i y_i + sum_{i<j} J_ij y_i y_j      y = [s; z]
//! ```
//!
//! For every assignment `s` of the original spins, `min_z E([s; z])` equals the
//! number of violated clauses. All coefficients are kept as integers scaled by
//! [`ENERGY_SCALE`] so that identity is checkable without tolerance.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::formula::{CnfFormula, Lit, Var};

/// Energies and coefficients are stored multiplied by this factor.
pub const ENERGY_SCALE: i64 = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IsingError {
    #[error("clause {clause} is empty; the formula is trivially unsatisfiable")]
    EmptyClause { clause: usize },
    #[error("polynomial of degree {degree} cannot be quadratized (max 3)")]
    DegreeTooHigh { degree: usize },
    #[error("spin vector has length {got}, model has {expected} spins")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spin {index} has value {value}, expected -1 or +1")]
    InvalidSpin { index: usize, value: i8 },
    #[error("coupling ({0}, {0}) on the diagonal")]
    DiagonalCoupling(usize),
}

/// Multilinear polynomial over 0/1 variables with integer coefficients.
///
/// Monomials are sorted, duplicate-free variable index lists; `x * x = x`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PenaltyPolynomial {
    terms: BTreeMap<Vec<u32>, i64>,
}

impl PenaltyPolynomial {
    pub fn constant(c: i64) -> Self {
        let mut p = Self::default();
        p.add_term(&[], c);
        p
    }

    /// Adds `coef * prod_{v in vars} x_v`. `vars` need not be sorted.
    pub fn add_term(&mut self, vars: &[u32], coef: i64) {
        if coef == 0 {
            return;
        }
        let mut key = vars.to_vec();
        key.sort_unstable();
        key.dedup();
        match self.terms.entry(key) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += coef;
                if *e.get() == 0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(coef);
            }
        }
    }

    pub fn add(&mut self, other: &PenaltyPolynomial) {
        for (vars, &c) in &other.terms {
            self.add_term(vars, c);
        }
    }

    pub fn mul(&self, other: &PenaltyPolynomial) -> PenaltyPolynomial {
        let mut out = PenaltyPolynomial::default();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                let mut vars = a.clone();
                vars.extend_from_slice(b);
                out.add_term(&vars, ca * cb);
            }
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn coefficient(&self, vars: &[u32]) -> i64 {
        let mut key = vars.to_vec();
        key.sort_unstable();
        key.dedup();
        self.terms.get(&key).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], i64)> {
        self.terms.iter().map(|(k, &c)| (k.as_slice(), c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Evaluates at a 0/1 point; `x[v]` is the value of variable `v`.
    pub fn eval(&self, x: &[bool]) -> i64 {
        self.terms
            .iter()
            .filter(|(vars, _)| vars.iter().all(|&v| x[v as usize]))
            .map(|(_, &c)| c)
            .sum()
    }
}

/// The 0/1 violation polynomial of a clause: `prod (1 - val(l))` where
/// `val(l) = x` for a positive literal and `1 - x` for a negated one.
pub fn clause_penalty(clause: &[Lit]) -> Result<PenaltyPolynomial, IsingError> {
    if clause.is_empty() {
        return Err(IsingError::EmptyClause { clause: 0 });
    }
    let mut poly = PenaltyPolynomial::constant(1);
    for &lit in clause {
        let v = lit.var().0;
        let mut factor = PenaltyPolynomial::default();
        if lit.is_positive() {
            // 1 - x
            factor.add_term(&[], 1);
            factor.add_term(&[v], -1);
        } else {
            // x
            factor.add_term(&[v], 1);
        }
        poly = poly.mul(&factor);
    }
    Ok(poly)
}

/// Where an auxiliary spin came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxOrigin {
    /// Rosenberg product variable standing for `x_a * x_b` (spin indices).
    Product(u32, u32),
    /// Chaining variable introduced while splitting a long clause.
    Chain { clause: usize },
}

/// Hands out auxiliary variable indices above the original variables.
#[derive(Debug, Clone)]
pub struct AuxAllocator {
    next: u32,
    pairs: BTreeMap<(u32, u32), u32>,
    origins: Vec<AuxOrigin>,
}

impl AuxAllocator {
    pub fn new(num_original: usize) -> Self {
        AuxAllocator {
            next: num_original as u32,
            pairs: BTreeMap::new(),
            origins: Vec::new(),
        }
    }

    /// The shared auxiliary for the product `x_a x_b`, allocated on first use.
    pub fn pair(&mut self, a: u32, b: u32) -> u32 {
        let key = (a.min(b), a.max(b));
        if let Some(&w) = self.pairs.get(&key) {
            return w;
        }
        let w = self.fresh(AuxOrigin::Product(key.0, key.1));
        self.pairs.insert(key, w);
        w
    }

    pub fn chain(&mut self, clause: usize) -> u32 {
        self.fresh(AuxOrigin::Chain { clause })
    }

    fn fresh(&mut self, origin: AuxOrigin) -> u32 {
        let w = self.next;
        self.next += 1;
        self.origins.push(origin);
        w
    }

    pub fn num_aux(&self) -> usize {
        self.origins.len()
    }

    pub fn origins(&self) -> &[AuxOrigin] {
        &self.origins
    }
}

/// Replaces every cubic monomial `c x_i x_j x_k` (`i < j < k`) with `c w x_k`,
/// `w` the shared auxiliary for `(i, j)`, and adds one Rosenberg penalty per
/// auxiliary with weight `M = 1 + sum |c|` over the monomials that consume it.
pub fn quadratize(
    poly: &PenaltyPolynomial,
    alloc: &mut AuxAllocator,
) -> Result<PenaltyPolynomial, IsingError> {
    let degree = poly.degree();
    if degree > 3 {
        return Err(IsingError::DegreeTooHigh { degree });
    }
    let mut out = PenaltyPolynomial::default();
    let mut weights: BTreeMap<u32, (u32, u32, i64)> = BTreeMap::new();
    for (vars, c) in poly.terms() {
        if vars.len() < 3 {
            out.add_term(vars, c);
            continue;
        }
        let (i, j, k) = (vars[0], vars[1], vars[2]);
        let w = alloc.pair(i, j);
        out.add_term(&[w, k], c);
        weights.entry(w).or_insert((i, j, 0)).2 += c.abs();
    }
    for (w, (i, j, sum_abs)) in weights {
        let m = 1 + sum_abs;
        out.add_term(&[i, j], m);
        out.add_term(&[i, w], -2 * m);
        out.add_term(&[j, w], -2 * m);
        out.add_term(&[w], 3 * m);
    }
    Ok(out)
}

/// Splits a clause longer than three literals into a chain of 3-literal
/// clauses linked by fresh variables.
fn split_long_clause(clause: &[Lit], idx: usize, alloc: &mut AuxAllocator) -> Vec<Vec<Lit>> {
    if clause.len() <= 3 {
        return vec![clause.to_vec()];
    }
    let mut out = Vec::new();
    let mut link = Lit::new(Var(alloc.chain(idx)), true);
    out.push(vec![clause[0], clause[1], link]);
    let last = clause.len() - 2;
    for &lit in &clause[2..last] {
        let next = Lit::new(Var(alloc.chain(idx)), true);
        out.push(vec![!link, lit, next]);
        link = next;
    }
    out.push(vec![!link, clause[last], clause[last + 1]]);
    out
}

/// Quadratic Ising model over original spins followed by auxiliary spins.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n_orig: usize,
    n_aux: usize,
    e0: i64,
    h: Vec<i64>,
    couplings: BTreeMap<(u32, u32), i64>,
    aux_origin: Vec<AuxOrigin>,
    // Sampler view: unscaled fields and symmetric adjacency.
    h_real: Vec<f64>,
    neighbors: Vec<Vec<(u32, f64)>>,
}

impl IsingModel {
    /// Builds a model from scaled integer coefficients. `couplings` keys are
    /// unordered pairs; entries for the same pair are summed.
    pub fn from_scaled(
        n_orig: usize,
        n_aux: usize,
        e0: i64,
        h: Vec<i64>,
        couplings: impl IntoIterator<Item = ((u32, u32), i64)>,
        aux_origin: Vec<AuxOrigin>,
    ) -> Result<Self, IsingError> {
        let n = n_orig + n_aux;
        if h.len() != n {
            return Err(IsingError::DimensionMismatch {
                expected: n,
                got: h.len(),
            });
        }
        let mut map: BTreeMap<(u32, u32), i64> = BTreeMap::new();
        for ((a, b), j) in couplings {
            if a == b {
                return Err(IsingError::DiagonalCoupling(a as usize));
            }
            let hi = a.max(b) as usize;
            if hi >= n {
                return Err(IsingError::DimensionMismatch {
                    expected: n,
                    got: hi + 1,
                });
            }
            *map.entry((a.min(b), a.max(b))).or_insert(0) += j;
        }
        map.retain(|_, j| *j != 0);

        let scale = ENERGY_SCALE as f64;
        let h_real = h.iter().map(|&x| x as f64 / scale).collect();
        let mut neighbors = vec![Vec::new(); n];
        for (&(a, b), &j) in &map {
            let jr = j as f64 / scale;
            neighbors[a as usize].push((b, jr));
            neighbors[b as usize].push((a, jr));
        }
        Ok(IsingModel {
            n_orig,
            n_aux,
            e0,
            h,
            couplings: map,
            aux_origin,
            h_real,
            neighbors,
        })
    }

    pub fn n_orig(&self) -> usize {
        self.n_orig
    }

    pub fn n_aux(&self) -> usize {
        self.n_aux
    }

    pub fn num_spins(&self) -> usize {
        self.n_orig + self.n_aux
    }

    pub fn e0_scaled(&self) -> i64 {
        self.e0
    }

    pub fn h_scaled(&self) -> &[i64] {
        &self.h
    }

    /// `J_ab` (scaled); symmetric, zero on the diagonal and for absent pairs.
    pub fn coupling_scaled(&self, a: usize, b: usize) -> i64 {
        if a == b {
            return 0;
        }
        let key = (a.min(b) as u32, a.max(b) as u32);
        self.couplings.get(&key).copied().unwrap_or(0)
    }

    /// Nonzero couplings, each unordered pair once with `a < b`.
    pub fn couplings_scaled(&self) -> impl Iterator<Item = ((usize, usize), i64)> + '_ {
        self.couplings
            .iter()
            .map(|(&(a, b), &j)| ((a as usize, b as usize), j))
    }

    pub fn num_couplings(&self) -> usize {
        self.couplings.len()
    }

    pub fn aux_origin(&self) -> &[AuxOrigin] {
        &self.aux_origin
    }

    #[inline]
    pub fn field_real(&self, i: usize) -> f64 {
        self.h_real[i]
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.neighbors[i]
    }

    fn check(&self, y: &[i8]) -> Result<(), IsingError> {
        if y.len() != self.num_spins() {
            return Err(IsingError::DimensionMismatch {
                expected: self.num_spins(),
                got: y.len(),
            });
        }
        if let Some((index, &value)) = y.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
            return Err(IsingError::InvalidSpin { index, value });
        }
        Ok(())
    }

    /// Energy times [`ENERGY_SCALE`], summing couplings pair by pair.
    pub fn energy_scaled(&self, y: &[i8]) -> Result<i64, IsingError> {
        self.check(y)?;
        let linear: i64 = self.h.iter().zip(y).map(|(&h, &s)| h * s as i64).sum();
        let pairs: i64 = self
            .couplings
            .iter()
            .map(|(&(a, b), &j)| j * (y[a as usize] * y[b as usize]) as i64)
            .sum();
        Ok(self.e0 + linear + pairs)
    }

    /// Energy times [`ENERGY_SCALE`], accumulated through per-spin local sums
    /// `h_i + 1/2 sum_j J_ij y_j`.
    pub fn energy_scaled_via_fields(&self, y: &[i8]) -> Result<i64, IsingError> {
        self.check(y)?;
        let mut twice = 2 * self.e0;
        let mut adjacency: Vec<Vec<(usize, i64)>> = vec![Vec::new(); self.num_spins()];
        for (&(a, b), &j) in &self.couplings {
            adjacency[a as usize].push((b as usize, j));
            adjacency[b as usize].push((a as usize, j));
        }
        for (i, row) in adjacency.iter().enumerate() {
            let coupled: i64 = row.iter().map(|&(k, j)| j * y[k] as i64).sum();
            twice += y[i] as i64 * (2 * self.h[i] + coupled);
        }
        debug_assert_eq!(twice % 2, 0);
        Ok(twice / 2)
    }

    pub fn energy(&self, y: &[i8]) -> Result<f64, IsingError> {
        Ok(self.energy_scaled(y)? as f64 / ENERGY_SCALE as f64)
    }

    /// Diagnostic listing of the model. The format is not stable.
    pub fn dump(&self) -> String {
        let scale = ENERGY_SCALE as f64;
        let mut out = String::new();
        let _ = writeln!(out, "original {} auxiliary {}", self.n_orig, self.n_aux);
        let _ = writeln!(out, "e0 {}", self.e0 as f64 / scale);
        for (i, &h) in self.h.iter().enumerate() {
            if h != 0 {
                let _ = writeln!(out, "h {} {}", i, h as f64 / scale);
            }
        }
        for (&(a, b), &j) in &self.couplings {
            let _ = writeln!(out, "J {} {} {}", a, b, j as f64 / scale);
        }
        for (k, origin) in self.aux_origin.iter().enumerate() {
            let idx = self.n_orig + k;
            match origin {
                AuxOrigin::Product(a, b) => {
                    let _ = writeln!(out, "aux {idx} product {a} {b}");
                }
                AuxOrigin::Chain { clause } => {
                    let _ = writeln!(out, "aux {idx} chain clause {clause}");
                }
            }
        }
        out
    }
}

/// Converts a degree-2 0/1 polynomial to scaled spin-domain coefficients.
fn spin_coefficients(
    poly: &PenaltyPolynomial,
    num_spins: usize,
) -> (i64, Vec<i64>, BTreeMap<(u32, u32), i64>) {
    let mut e0 = 0i64;
    let mut h = vec![0i64; num_spins];
    let mut j: BTreeMap<(u32, u32), i64> = BTreeMap::new();
    for (vars, c) in poly.terms() {
        let c = c * ENERGY_SCALE;
        match *vars {
            [] => e0 += c,
            // x = (1 + s) / 2
            [a] => {
                e0 += c / 2;
                h[a as usize] += c / 2;
            }
            // x_a x_b = (1 + s_a + s_b + s_a s_b) / 4
            [a, b] => {
                let q = c / 4;
                e0 += q;
                h[a as usize] += q;
                h[b as usize] += q;
                *j.entry((a, b)).or_insert(0) += q;
            }
            _ => unreachable!("quadratized polynomial has degree <= 2"),
        }
    }
    (e0, h, j)
}

/// Encodes `F` as an Ising model whose minimum over auxiliary spins equals
/// the violation count of the original assignment.
pub fn encode_cnf(formula: &CnfFormula) -> Result<IsingModel, IsingError> {
    let n = formula.num_vars();
    let mut alloc = AuxAllocator::new(n);
    let mut total = PenaltyPolynomial::default();
    for (idx, clause) in formula.clauses().iter().enumerate() {
        if clause.is_empty() {
            return Err(IsingError::EmptyClause { clause: idx });
        }
        if formula.is_tautology(idx) {
            continue;
        }
        for piece in split_long_clause(clause, idx, &mut alloc) {
            total.add(&clause_penalty(&piece)?);
        }
    }
    let quadratic = quadratize(&total, &mut alloc)?;
    let num_spins = n + alloc.num_aux();
    let (e0, h, j) = spin_coefficients(&quadratic, num_spins);
    IsingModel::from_scaled(n, alloc.num_aux(), e0, h, j, alloc.origins().to_vec())
}
