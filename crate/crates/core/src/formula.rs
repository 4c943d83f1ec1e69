//! CNF formulas, assignments and the Boolean/spin correspondence.
//!
//! Variables are 0-indexed here. The DIMACS boundary (`crate::dimacs`) is the
//! only place that deals in 1-indexed signed integers.

use std::fmt;

use thiserror::Error;

/// A propositional variable, 0-indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn pos(self) -> Lit {
        Lit::new(self, true)
    }

    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Lit {
        Lit::new(self, false)
    }
}

/// A literal, packed as `2 * var + (negated as u32)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    #[inline]
    pub fn new(var: Var, positive: bool) -> Self {
        Lit(var.0 << 1 | (!positive) as u32)
    }

    /// Builds a literal from a DIMACS-style signed integer. Panics on 0.
    pub fn from_dimacs(lit: i32) -> Self {
        assert!(lit != 0, "0 is not a literal");
        Lit::new(Var(lit.unsigned_abs() - 1), lit > 0)
    }

    pub fn to_dimacs(self) -> i32 {
        let v = self.var().0 as i32 + 1;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    #[inline]
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// Dense code usable as an index into per-literal tables.
    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_code(code: usize) -> Self {
        Lit(code as u32)
    }

    /// Truth value of the literal under a Boolean value for its variable.
    #[inline]
    pub fn eval(self, value: bool) -> bool {
        value == self.is_positive()
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

// Serialized as the signed DIMACS integer.
impl serde::Serialize for Lit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i32(self.to_dimacs())
    }
}

impl<'de> serde::Deserialize<'de> for Lit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i32::deserialize(d)?;
        if v == 0 {
            return Err(serde::de::Error::custom("0 is not a literal"));
        }
        Ok(Lit::from_dimacs(v))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("literal {lit} references a variable outside 1..={num_vars}")]
    LiteralOutOfRange { lit: i32, num_vars: usize },
}

/// An immutable clause database with a per-literal occurrence index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<Lit>>,
    occurrences: Vec<Vec<usize>>,
    tautology: Vec<bool>,
    has_empty_clause: bool,
}

impl CnfFormula {
    /// Builds a formula. Duplicate literals inside a clause are collapsed;
    /// tautological clauses are kept and flagged.
    pub fn new(num_vars: usize, clauses: Vec<Vec<Lit>>) -> Result<Self, FormulaError> {
        let mut cleaned = Vec::with_capacity(clauses.len());
        for clause in clauses {
            let mut out: Vec<Lit> = Vec::with_capacity(clause.len());
            for lit in clause {
                if lit.var().index() >= num_vars {
                    return Err(FormulaError::LiteralOutOfRange {
                        lit: lit.to_dimacs(),
                        num_vars,
                    });
                }
                if !out.contains(&lit) {
                    out.push(lit);
                }
            }
            cleaned.push(out);
        }
        Ok(Self::from_clean(num_vars, cleaned))
    }

    /// Convenience constructor from DIMACS-style signed literals.
    pub fn from_dimacs_clauses(num_vars: usize, clauses: &[Vec<i32>]) -> Result<Self, FormulaError> {
        let mut converted = Vec::with_capacity(clauses.len());
        for clause in clauses {
            let mut c = Vec::with_capacity(clause.len());
            for &l in clause {
                if l == 0 || l.unsigned_abs() as usize > num_vars {
                    return Err(FormulaError::LiteralOutOfRange { lit: l, num_vars });
                }
                c.push(Lit::from_dimacs(l));
            }
            converted.push(c);
        }
        Self::new(num_vars, converted)
    }

    fn from_clean(num_vars: usize, clauses: Vec<Vec<Lit>>) -> Self {
        let occurrences = build_occurrences(num_vars, &clauses);
        let tautology = clauses
            .iter()
            .map(|c| c.iter().any(|&l| c.contains(&!l)))
            .collect();
        let has_empty_clause = clauses.iter().any(|c| c.is_empty());
        CnfFormula {
            num_vars,
            clauses,
            occurrences,
            tautology,
            has_empty_clause,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn clause(&self, idx: usize) -> &[Lit] {
        &self.clauses[idx]
    }

    /// Clause ids containing `lit`.
    pub fn occurrences(&self, lit: Lit) -> &[usize] {
        &self.occurrences[lit.code()]
    }

    pub fn is_tautology(&self, idx: usize) -> bool {
        self.tautology[idx]
    }

    /// True when the formula contains an empty clause and is therefore UNSAT.
    pub fn has_empty_clause(&self) -> bool {
        self.has_empty_clause
    }

    /// Recomputes the occurrence index from scratch and compares it with the stored one.
    pub fn occurrence_index_consistent(&self) -> bool {
        build_occurrences(self.num_vars, &self.clauses) == self.occurrences
    }

    /// Number of clauses falsified by `s`.
    pub fn violation_count(&self, s: &SpinVector) -> usize {
        debug_assert_eq!(s.len(), self.num_vars);
        self.clauses
            .iter()
            .filter(|c| violation_indicator(c, s) == 1)
            .count()
    }

    pub fn is_satisfied_by(&self, x: &BoolAssignment) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|&l| l.eval(x.get(l.var()))))
    }
}

fn build_occurrences(num_vars: usize, clauses: &[Vec<Lit>]) -> Vec<Vec<usize>> {
    let mut occ = vec![Vec::new(); 2 * num_vars];
    for (idx, clause) in clauses.iter().enumerate() {
        for &lit in clause {
            occ[lit.code()].push(idx);
        }
    }
    occ
}

/// Returns 1 when every literal of `clause` is false under `s`, else 0.
pub fn violation_indicator(clause: &[Lit], s: &SpinVector) -> u8 {
    let satisfied = clause.iter().any(|&l| s.lit_true(l));
    (!satisfied) as u8
}

/// Spins over the original variables, each exactly -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(values: Vec<i8>) -> Option<Self> {
        if values.iter().all(|&v| v == 1 || v == -1) {
            Some(SpinVector(values))
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    #[inline]
    pub fn get(&self, var: Var) -> i8 {
        self.0[var.index()]
    }

    #[inline]
    pub fn lit_true(&self, lit: Lit) -> bool {
        (self.0[lit.var().index()] > 0) == lit.is_positive()
    }

    /// x_i = (1 + s_i) / 2
    pub fn to_bool(&self) -> BoolAssignment {
        BoolAssignment(self.0.iter().map(|&s| s > 0).collect())
    }
}

/// A total Boolean assignment over the original variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoolAssignment(Vec<bool>);

impl BoolAssignment {
    pub fn new(values: Vec<bool>) -> Self {
        BoolAssignment(values)
    }

    /// Decodes the low `n` bits of `bits`, variable i taking bit i.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        BoolAssignment((0..n).map(|i| bits >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    #[inline]
    pub fn get(&self, var: Var) -> bool {
        self.0[var.index()]
    }

    /// s_i = 2 x_i - 1
    pub fn to_spins(&self) -> SpinVector {
        SpinVector(self.0.iter().map(|&x| if x { 1 } else { -1 }).collect())
    }

    /// The model as DIMACS-style literals, one per variable.
    pub fn to_dimacs_literals(&self) -> Vec<i32> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &x)| if x { i as i32 + 1 } else { -(i as i32 + 1) })
            .collect()
    }
}

pub fn spin_of_bool(x: &BoolAssignment) -> SpinVector {
    x.to_spins()
}

pub fn bool_of_spin(s: &SpinVector) -> BoolAssignment {
    s.to_bool()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spins(v: &[i8]) -> SpinVector {
        SpinVector::new(v.to_vec()).unwrap()
    }

    fn clause(lits: &[i32]) -> Vec<Lit> {
        lits.iter().map(|&l| Lit::from_dimacs(l)).collect()
    }

    #[test]
    fn literal_packing() {
        let l = Lit::from_dimacs(-3);
        assert_eq!(l.var(), Var(2));
        assert!(!l.is_positive());
        assert_eq!((!l).to_dimacs(), 3);
        assert_eq!(Lit::from_code(l.code()), l);
    }

    #[test]
    fn spin_bool_mapping() {
        let x = BoolAssignment::new(vec![false, true]);
        assert_eq!(spin_of_bool(&x).values(), &[-1, 1]);
        let x = BoolAssignment::new(vec![true; 3]);
        assert_eq!(spin_of_bool(&x).values(), &[1, 1, 1]);
        assert!(SpinVector::new(vec![0, 1]).is_none());
    }

    #[test]
    fn indicator_examples() {
        let s = spins(&[-1, -1]);
        assert_eq!(violation_indicator(&clause(&[1, 2]), &s), 1);
        assert_eq!(violation_indicator(&clause(&[1, -2]), &s), 0);
        for v in [[-1i8], [1]] {
            assert_eq!(violation_indicator(&clause(&[1, -1]), &spins(&v)), 0);
        }
    }

    #[test]
    fn contradictory_units_violate_exactly_one() {
        let f = CnfFormula::from_dimacs_clauses(1, &[vec![1], vec![-1]]).unwrap();
        assert_eq!(f.violation_count(&spins(&[1])), 1);
        assert_eq!(f.violation_count(&spins(&[-1])), 1);
    }

    #[test]
    fn constructor_dedups_and_flags() {
        let f = CnfFormula::from_dimacs_clauses(2, &[vec![1, 1, 2], vec![2, -2], vec![]]).unwrap();
        assert_eq!(f.clause(0), &clause(&[1, 2])[..]);
        assert!(f.is_tautology(1));
        assert!(!f.is_tautology(0));
        assert!(f.has_empty_clause());
        assert!(f.occurrence_index_consistent());
        assert_eq!(f.occurrences(Lit::from_dimacs(2)), &[0, 1]);
    }

    #[test]
    fn out_of_range_rejected() {
        let err = CnfFormula::from_dimacs_clauses(2, &[vec![3]]).unwrap_err();
        assert_eq!(err, FormulaError::LiteralOutOfRange { lit: 3, num_vars: 2 });
    }
}
