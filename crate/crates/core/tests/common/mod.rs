//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver or encoder code paths it is used to check.

#![allow(dead_code)]

use pbitsat::formula::{CnfFormula, Lit};
use pbitsat::ising::{AuxOrigin, IsingModel};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random CNF with clause widths drawn uniformly from `1..=max_width` over
/// distinct variables.
pub fn random_cnf(rng: &mut impl Rng, n: usize, m: usize, max_width: usize) -> Vec<Vec<i32>> {
    (0..m)
        .map(|_| {
            let width = rng.gen_range(1..=max_width.min(n));
            let mut vars: Vec<i32> = Vec::with_capacity(width);
            while vars.len() < width {
                let v = rng.gen_range(1..=n as i32);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            vars.into_iter()
                .map(|v| if rng.gen::<bool>() { v } else { -v })
                .collect()
        })
        .collect()
}

pub fn random_3sat(rng: &mut impl Rng, n: usize, m: usize) -> Vec<Vec<i32>> {
    (0..m)
        .map(|_| {
            let mut vars: Vec<i32> = Vec::with_capacity(3);
            while vars.len() < 3 {
                let v = rng.gen_range(1..=n as i32);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            vars.into_iter()
                .map(|v| if rng.gen::<bool>() { v } else { -v })
                .collect()
        })
        .collect()
}

pub fn build(n: usize, clauses: &[Vec<i32>]) -> CnfFormula {
    CnfFormula::from_dimacs_clauses(n, clauses).unwrap()
}

/// Clause check on raw signed literals; `bits` bit i is variable i+1.
pub fn satisfies(clauses: &[Vec<i32>], bits: u64) -> bool {
    clauses.iter().all(|c| {
        c.iter().any(|&l| {
            let value = bits >> (l.unsigned_abs() - 1) & 1 == 1;
            value == (l > 0)
        })
    })
}

pub fn count_violations(clauses: &[Vec<i32>], bits: u64) -> i64 {
    clauses
        .iter()
        .filter(|c| {
            !c.iter().any(|&l| {
                let value = bits >> (l.unsigned_abs() - 1) & 1 == 1;
                value == (l > 0)
            })
        })
        .count() as i64
}

/// All satisfying assignments by truth table.
pub fn models(n: usize, clauses: &[Vec<i32>]) -> Vec<u64> {
    (0u64..1 << n).filter(|&b| satisfies(clauses, b)).collect()
}

pub fn model_bits(model: &[bool]) -> u64 {
    model
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &x)| acc | (x as u64) << i)
}

pub fn lits(ls: &[i32]) -> Vec<Lit> {
    ls.iter().map(|&l| Lit::from_dimacs(l)).collect()
}

/// Clause widths 1, 2, 3 drawn with weights 1:4:15. Uniform widths make
/// almost every formula at these densities fail by unit propagation alone.
pub const ORACLE_WIDTH_WEIGHTS: [u32; 3] = [1, 4, 15];

/// One random formula of the correctness suite: n in [3,12], m/n in [2,6],
/// mixed widths 1 to 3.
pub fn oracle_instance(seed: u64) -> (usize, Vec<Vec<i32>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=12);
    let ratio: f64 = rng.gen_range(2.0..=6.0);
    let m = ((n as f64) * ratio).round() as usize;
    let width = WeightedIndex::new(ORACLE_WIDTH_WEIGHTS).unwrap();
    let clauses = (0..m)
        .map(|_| {
            let w = width.sample(&mut rng) + 1;
            let mut vars: Vec<i32> = Vec::with_capacity(w);
            while vars.len() < w {
                let v = rng.gen_range(1..=n as i32);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            vars.into_iter()
                .map(|v| if rng.gen::<bool>() { v } else { -v })
                .collect()
        })
        .collect();
    (n, clauses)
}

/// Seeds of the first `count` satisfiable suite formulas.
pub fn satisfiable_oracle_seeds(count: usize) -> Vec<u64> {
    (0u64..)
        .filter(|&s| {
            let (n, c) = oracle_instance(s);
            !models(n, &c).is_empty()
        })
        .take(count)
        .collect()
}

/// Literals setting every variable opposite to `model`.
pub fn complement_literals(n: usize, model: u64) -> Vec<i32> {
    (1..=n as i32)
        .map(|v| if model >> (v - 1) & 1 == 1 { -v } else { v })
        .collect()
}

/// Spins for the original variables; bit i of `bits` is variable i+1.
pub fn spins_of_bits(n: usize, bits: u64) -> Vec<i8> {
    (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect()
}

/// `e0 + sum h_i y_i + sum_{i<j} J_ij y_i y_j` straight from the stored
/// integer coefficients.
pub fn naive_energy(model: &IsingModel, y: &[i8]) -> i64 {
    let linear: i64 = model.h_scaled().iter().zip(y).map(|(&h, &s)| h * s as i64).sum();
    let quadratic: i64 = model
        .couplings_scaled()
        .map(|((a, b), j)| j * y[a] as i64 * y[b] as i64)
        .sum();
    model.e0_scaled() + linear + quadratic
}

/// Exact minimum of the scaled energy over the auxiliary spins with the
/// original spins fixed. Chain auxiliaries are enumerated; product
/// auxiliaries never couple to each other, so once everything else is fixed
/// each one is minimized on its own.
pub fn min_energy_over_aux(model: &IsingModel, orig: &[i8]) -> i64 {
    let n = model.n_orig();
    let total = model.num_spins();
    let is_product = |i: usize| i >= n && matches!(model.aux_origin()[i - n], AuxOrigin::Product(..));
    assert!(
        !model.couplings_scaled().any(|((a, b), _)| is_product(a) && is_product(b)),
        "product auxiliaries coupled"
    );
    let chain: Vec<usize> = (n..total).filter(|&i| !is_product(i)).collect();
    let product: Vec<usize> = (n..total).filter(|&i| is_product(i)).collect();
    assert!(chain.len() <= 16, "too many chain auxiliaries for enumeration");
    let mut y: Vec<i8> = orig.iter().copied().chain(std::iter::repeat_n(-1, total - n)).collect();
    (0u64..1 << chain.len())
        .map(|bits| {
            for (k, &z) in chain.iter().enumerate() {
                y[z] = if bits >> k & 1 == 1 { 1 } else { -1 };
            }
            for &z in &product {
                y[z] = -1;
                let down = naive_energy(model, &y);
                y[z] = 1;
                let up = naive_energy(model, &y);
                y[z] = if up < down { 1 } else { -1 };
            }
            naive_energy(model, &y)
        })
        .min()
        .unwrap()
}

/// Random replicas and violation counts for consensus checks.
pub fn random_samples(rng: &mut impl Rng) -> (Vec<Vec<i8>>, Vec<usize>) {
    let r = rng.gen_range(1..=40);
    let n = rng.gen_range(1..=30);
    let bias: f64 = rng.gen_range(0.5..1.0);
    let reps = (0..r)
        .map(|_| (0..n).map(|_| if rng.gen_bool(bias) { 1 } else { -1 }).collect())
        .collect();
    let violations = (0..r).map(|_| rng.gen_range(0..8)).collect();
    (reps, violations)
}

/// Replica indices ordered by violation count, ties by original position.
pub fn naive_order(violations: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..violations.len()).collect();
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && violations[order[j - 1]] > violations[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    order
}

pub struct NaiveConsensus {
    pub candidate: Vec<bool>,
    pub sign: Vec<i8>,
    pub weights: Vec<f64>,
    pub magnetization: Vec<f64>,
    pub q_abs: f64,
}

pub fn naive_consensus(reps: &[Vec<i8>], violations: &[usize], k: usize) -> NaiveConsensus {
    let order = naive_order(violations);
    let n = reps[0].len();
    let top: Vec<&Vec<i8>> = order[..k].iter().map(|&r| &reps[r]).collect();
    let candidate = (0..n).map(|i| top.iter().all(|r| r[i] == top[0][i])).collect();
    let sign = (0..n).map(|i| top[0][i]).collect();
    let denom: f64 = order.iter().map(|&r| 1.0 / (1.0 + violations[r] as f64)).sum();
    let weights: Vec<f64> = order
        .iter()
        .map(|&r| 1.0 / (1.0 + violations[r] as f64) / denom)
        .collect();
    let magnetization: Vec<f64> = (0..n)
        .map(|i| order.iter().zip(&weights).map(|(&r, w)| w * reps[r][i] as f64).sum())
        .collect();
    let q_abs = magnetization.iter().map(|m: &f64| m.abs()).sum::<f64>() / n as f64;
    NaiveConsensus {
        candidate,
        sign,
        weights,
        magnetization,
        q_abs,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
