//! Exact formulas, reference curves, brute-force oracles and Monte Carlo
//! estimators for the number `I` of packets requested after one emission.
//!
//! Binomials are computed with arbitrary-precision integers and probabilities
//! stay exact rationals until the final conversion.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{CodeGrid, CodeParams};
use crate::error::{invalid, Error, Result};
use crate::feedback::{
    build_gadget, min_frs_unit, packet_weight, CostFunction, FeedbackRepairSet, GadgetEdge, Weight,
};
use crate::packet::{ErrorConfiguration, GridCoord};

/// Largest edge count accepted by [`forest_counts`].
pub const MAX_FOREST_EDGES: usize = 25;
/// Largest configuration accepted by the brute-force repair oracle.
pub const MAX_BRUTE_FORCE_ERRORS: usize = 24;

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // exact at every step: acc = C(n, i+1) after the division
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parse a probability written as a decimal (`0.125`) or a fraction (`1/8`)
/// into an exact rational.
pub fn parse_probability(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot read {s:?} as a probability"));
    let value = if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        BigRational::new(num, den)
    } else {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        let digits = format!("{int}{frac}");
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let num: BigInt = digits.parse().map_err(|_| bad())?;
        BigRational::new(num, BigInt::from(10u32).pow(frac.len() as u32))
    };
    if value < BigRational::zero() || value > BigRational::one() {
        return invalid(format!("probability {s} is outside [0, 1]"));
    }
    Ok(value)
}

/// `Pr(N_e = n_e)` for `cells` independent cells each erroneous with
/// probability `p`.
pub fn law_ne(cells: usize, p: &BigRational, n_e: usize) -> Result<BigRational> {
    if n_e > cells {
        return invalid(format!("n_e = {n_e} exceeds the {cells} cells"));
    }
    if *p < BigRational::zero() || *p > BigRational::one() {
        return invalid(format!("p = {p} is outside [0, 1]"));
    }
    let q = BigRational::one() - p;
    let c = BigRational::from_integer(BigInt::from(binomial(cells, n_e)));
    Ok(c * pow(p, n_e) * pow(&q, cells - n_e))
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    num_traits::pow(x.clone(), e)
}

fn check_ne(n: usize, m: usize, n_e: usize) -> Result<usize> {
    let cells = (n + 1) * (m + 1);
    if n_e > cells {
        return invalid(format!("n_e = {n_e} exceeds N = {cells}"));
    }
    Ok(cells)
}

/// Probability that a given column holds none of `n_e` uniformly placed errors.
fn empty_col_prob(n: usize, m: usize, n_e: usize) -> Result<BigRational> {
    let cells = check_ne(n, m, n_e)?;
    Ok(ratio(binomial(cells - n - 1, n_e), binomial(cells, n_e)))
}

/// `E(C | N_e = n_e)`: expected number of columns holding an error.
pub fn exp_cols_given_ne(n: usize, m: usize, n_e: usize) -> Result<BigRational> {
    let q = empty_col_prob(n, m, n_e)?;
    Ok(BigRational::from_integer(BigInt::from(m + 1)) * (BigRational::one() - q))
}

/// `E(R | N_e = n_e)`: expected number of rows holding an error.
pub fn exp_rows_given_ne(n: usize, m: usize, n_e: usize) -> Result<BigRational> {
    exp_cols_given_ne(m, n, n_e)
}

/// Large-`n_e` estimate of `E(I | N_e = n_e)`: `n_e + 1 - E(R) - E(C)`,
/// which is exact up to `E(N_nscc) - 1`.
pub fn expected_i_regime3(n: usize, m: usize, n_e: usize) -> Result<BigRational> {
    let r = exp_rows_given_ne(n, m, n_e)?;
    let c = exp_cols_given_ne(n, m, n_e)?;
    Ok(BigRational::from_integer(BigInt::from(n_e + 1)) - r - c)
}

/// `n_e + 1 - ((m+1) q_c + (n+1) q_r)` with `q_c`, `q_r` the probabilities
/// of an empty column and row. Kept for comparison with
/// [`expected_i_regime3`]; it does not reduce to `K` at full erasure.
pub fn expected_i_regime3_as_printed(n: usize, m: usize, n_e: usize) -> Result<BigRational> {
    let qc = empty_col_prob(n, m, n_e)?;
    let qr = empty_col_prob(m, n, n_e)?;
    let int = |v: usize| BigRational::from_integer(BigInt::from(v));
    Ok(int(n_e + 1) - int(m + 1) * qc - int(n + 1) * qr)
}

/// `lambda(x) = -(ln(1 - x) + x) / 2` for `0 < x < 1`.
pub fn lambda_of_x(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return invalid(format!("lambda needs x in (0, 1), got {x}"));
    }
    Ok(-((-x).ln_1p() + x) / 2.0)
}

/// Union-find with rollback: union by size, no path compression.
struct RollbackSets {
    parent: Vec<usize>,
    size: Vec<usize>,
    history: Vec<usize>,
}

impl RollbackSets {
    fn new(count: usize) -> Self {
        Self {
            parent: (0..count).collect(),
            size: vec![1; count],
            history: Vec::new(),
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        self.history.push(b);
        true
    }

    fn undo(&mut self) {
        let b = self.history.pop().expect("undo after union");
        let a = self.parent[b];
        self.size[a] -= self.size[b];
        self.parent[b] = b;
    }
}

/// Number of forests of each edge count in the complete bipartite graph
/// with `n + 1` and `m + 1` vertices on its sides (the coordinates graph of
/// a fully erased `n x m` code). Exhaustive.
pub fn forest_counts(n: usize, m: usize) -> Result<Vec<u64>> {
    let (rows, cols) = (n + 1, m + 1);
    let edges: Vec<(usize, usize)> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, rows + j)))
        .collect();
    if edges.len() > MAX_FOREST_EDGES {
        return Err(Error::ResourceLimit(format!(
            "{} edges exceed the enumeration limit of {MAX_FOREST_EDGES}",
            edges.len()
        )));
    }
    fn go(e: usize, size: usize, edges: &[(usize, usize)], sets: &mut RollbackSets, counts: &mut [u64]) {
        if e == edges.len() {
            counts[size] += 1;
            return;
        }
        go(e + 1, size, edges, sets, counts);
        let (a, b) = edges[e];
        if sets.union(a, b) {
            go(e + 1, size + 1, edges, sets, counts);
            sets.undo();
        }
    }
    let mut counts = vec![0u64; edges.len() + 1];
    let mut sets = RollbackSets::new(rows + cols);
    go(0, 0, &edges, &mut sets, &mut counts);
    Ok(counts)
}

/// `f(n, m, n_e)`: forests with `n_e` edges in the coordinates graph of a
/// fully erased code.
pub fn count_acyclic_subgraphs(n: usize, m: usize, n_e: usize) -> Result<u64> {
    let cells = check_ne(n, m, n_e)?;
    let counts = forest_counts(n, m)?;
    debug_assert_eq!(counts.len(), cells + 1);
    Ok(counts[n_e])
}

/// `Pr(I = 0 | N_e = n_e) = f(n, m, n_e) / C(N, n_e)`.
pub fn prob_i_zero(n: usize, m: usize, n_e: usize) -> Result<BigRational> {
    let cells = check_ne(n, m, n_e)?;
    let f = count_acyclic_subgraphs(n, m, n_e)?;
    Ok(ratio(BigUint::from(f), binomial(cells, n_e)))
}

/// Whether peeling removes every error left in `alive`.
fn peels_clean(errors: &[(usize, usize)], mut alive: u32, rows: &mut [u8], cols: &mut [u8]) -> bool {
    loop {
        if alive == 0 {
            return true;
        }
        rows.fill(0);
        cols.fill(0);
        for (k, &(r, c)) in errors.iter().enumerate() {
            if alive >> k & 1 == 1 {
                rows[r] += 1;
                cols[c] += 1;
            }
        }
        let before = alive;
        for (k, &(r, c)) in errors.iter().enumerate() {
            if alive >> k & 1 == 1 && (rows[r] == 1 || cols[c] == 1) {
                alive &= !(1 << k);
            }
        }
        if alive == before {
            return false;
        }
    }
}

/// Minimum-cost set of errors whose removal leaves a configuration the
/// peeling decoder clears, found by trying every subset.
///
/// Independent of the coordinates graph: each candidate is checked by
/// running the peeling rule on the remaining errors.
pub fn brute_force_min_frs_edges(errors: &[GadgetEdge]) -> Result<FeedbackRepairSet> {
    let count = errors.len();
    if count > MAX_BRUTE_FORCE_ERRORS {
        return Err(Error::ResourceLimit(format!(
            "{count} errors exceed the brute-force limit of {MAX_BRUTE_FORCE_ERRORS}"
        )));
    }
    if let Some(e) = errors.iter().find(|e| e.weight.is_zero()) {
        return invalid(format!("packet {} has a nonpositive weight", e.packet));
    }
    let cells: Vec<(usize, usize)> = errors.iter().map(|e| (e.row, e.col)).collect();
    let mut rows = vec![0u8; cells.iter().map(|c| c.0 + 1).max().unwrap_or(0)];
    let mut cols = vec![0u8; cells.iter().map(|c| c.1 + 1).max().unwrap_or(0)];
    let full: u32 = if count == 32 { u32::MAX } else { (1u32 << count) - 1 };
    let pick = |mask: u32| {
        let mut packets: Vec<_> = (0..count)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| errors[k].packet)
            .collect();
        packets.sort_unstable();
        let cost = (0..count)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| errors[k].weight)
            .sum();
        FeedbackRepairSet { packets, cost }
    };
    if errors.iter().all(|e| e.weight.is_one()) {
        for size in 0..=count {
            // masks of `size` bits in increasing order
            let mut mask: u32 = if size == 0 { 0 } else { (1u32 << size) - 1 };
            loop {
                if peels_clean(&cells, full & !mask, &mut rows, &mut cols) {
                    return Ok(pick(mask));
                }
                if mask == 0 {
                    break;
                }
                let low = mask & mask.wrapping_neg();
                let ripple = mask + low;
                if ripple > full || ripple == 0 {
                    break;
                }
                mask = (((ripple ^ mask) >> 2) / low) | ripple;
                if mask > full {
                    break;
                }
            }
        }
        unreachable!("removing every error always leaves a clean grid");
    }
    let mut best: Option<(Weight, u32)> = None;
    for mask in 0..=full {
        let w: Weight = (0..count)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| errors[k].weight)
            .sum();
        if best.is_some_and(|(b, _)| w >= b) {
            continue;
        }
        if peels_clean(&cells, full & !mask, &mut rows, &mut cols) {
            best = Some((w, mask));
        }
    }
    Ok(pick(best.expect("the full set always works").1))
}

/// [`brute_force_min_frs_edges`] for a configuration laid out by `params`,
/// weighted by `cost`.
pub fn brute_force_min_frs(
    config: &ErrorConfiguration,
    cost: CostFunction,
    params: &CodeParams,
    grid: Option<&CodeGrid>,
) -> Result<FeedbackRepairSet> {
    if config.len() > MAX_BRUTE_FORCE_ERRORS {
        return Err(Error::ResourceLimit(format!(
            "{} errors exceed the brute-force limit of {MAX_BRUTE_FORCE_ERRORS}",
            config.len()
        )));
    }
    if cost == CostFunction::Graded && grid.is_none() {
        return invalid("graded cost needs the received grid for its corruption masks");
    }
    let errors = config
        .iter()
        .map(|c| {
            let packet = params.index_of(c)?;
            let mask = match grid.map(|g| g.cell(c).status()) {
                Some(crate::packet::Status::BitCorrupted(mask)) => Some(mask),
                _ => None,
            };
            Ok(GadgetEdge {
                row: c.row,
                col: c.col,
                packet,
                weight: packet_weight(cost, packet, params, mask)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    brute_force_min_frs_edges(&errors)
}

/// Quantity estimated by [`mc_conditional`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    ExpectedI,
    ProbIZero,
    ExpectedC,
    ExpectedR,
}

impl Statistic {
    const NAMES: [(Statistic, &'static str); 4] = [
        (Statistic::ExpectedI, "expected-i"),
        (Statistic::ProbIZero, "prob-i-zero"),
        (Statistic::ExpectedC, "expected-c"),
        (Statistic::ExpectedR, "expected-r"),
    ];
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Self::NAMES.iter().find(|(s, _)| s == self).map(|(_, n)| *n);
        f.write_str(name.unwrap_or("?"))
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(stat, _)| *stat)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown statistic {s:?}; expected expected-i, prob-i-zero, expected-c or expected-r"
                ))
            })
    }
}

/// Monte Carlo estimate over uniform configurations of exactly `n_e` errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalStats {
    pub n: usize,
    pub m: usize,
    pub n_e: usize,
    pub statistic: Statistic,
    pub estimate: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Configuration of trial `trial`: `n_e` distinct cells drawn uniformly,
/// from a ChaCha8 stream of its own.
pub fn sample_configuration(n: usize, m: usize, n_e: usize, seed: u64, trial: u64) -> ErrorConfiguration {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(b"mc-confg");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    let cols = m + 1;
    let cells = rand::seq::index::sample(&mut rng, (n + 1) * cols, n_e);
    ErrorConfiguration::new(n, m, cells.into_iter().map(|k| GridCoord::new(k / cols, k % cols)))
        .expect("sampled cells are in bounds")
}

pub fn mc_conditional(
    n: usize,
    m: usize,
    n_e: usize,
    trials: u64,
    seed: u64,
    statistic: Statistic,
) -> Result<ConditionalStats> {
    check_ne(n, m, n_e)?;
    if trials == 0 {
        return invalid("at least one trial is needed");
    }
    let params = CodeParams::row_major(n, m)?;
    let value = |t: u64| -> Result<u64> {
        let config = sample_configuration(n, m, n_e, seed, t);
        Ok(match statistic {
            Statistic::ExpectedC => config.cols_touched() as u64,
            Statistic::ExpectedR => config.rows_touched() as u64,
            Statistic::ExpectedI | Statistic::ProbIZero => {
                let g = build_gadget(&config, CostFunction::AllOrNone, &params, None)?;
                let i = min_frs_unit(&g)?.len() as u64;
                if statistic == Statistic::ExpectedI {
                    i
                } else {
                    u64::from(i == 0)
                }
            }
        })
    };
    // integer sums: the reduction is exact, so any split gives the same result
    let (sum, sum_sq) = (0..trials)
        .into_par_iter()
        .map(|t| value(t).map(|v| (u128::from(v), u128::from(v) * u128::from(v))))
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let mean = Ratio::new(sum, u128::from(trials));
    let estimate = mean.to_f64().unwrap_or(f64::NAN);
    let std_error = if trials > 1 {
        // sample variance (sum_sq - sum^2/t) / (t - 1)
        let t = trials as f64;
        let var = (sum_sq as f64 - (sum as f64) * (sum as f64) / t) / (t - 1.0);
        (var.max(0.0) / t).sqrt()
    } else {
        0.0
    };
    Ok(ConditionalStats {
        n,
        m,
        n_e,
        statistic,
        estimate,
        std_error,
        trials,
    })
}

/// Decimal rendering of an exact rational with `digits` fractional digits,
/// rounded half away from zero.
pub fn decimal(value: &BigRational, digits: usize) -> String {
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = value * BigRational::from_integer(scale.clone());
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let rounded = if scaled < BigRational::zero() {
        -(-scaled + half).floor()
    } else {
        (scaled + half).floor()
    }
    .to_integer();
    let neg = rounded < BigInt::zero();
    let mag = if neg { -rounded } else { rounded };
    let int = &mag / &scale;
    let frac = &mag % &scale;
    let sign = if neg { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac:0>digits$}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::peel_residual;
    use crate::feedback::{min_frs_weighted, CoordinatesGraph};
    use crate::packet::PacketIndex;
    use proptest::prelude::*;

    fn q(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(9, 2), BigUint::from(36u32));
        assert_eq!(binomial(5, 7), BigUint::zero());
        assert_eq!(binomial(0, 0), BigUint::one());
        assert_eq!(binomial(100, 50).to_string(), "100891344545564193334812497256");
    }

    #[test]
    fn law_ne_examples() {
        assert_eq!(law_ne(4, &q(1, 2), 2).unwrap(), q(3, 8));
        assert_eq!(law_ne(7, &q(0, 1), 0).unwrap(), q(1, 1));
        let p = parse_probability("0.1").unwrap();
        assert_eq!(p, q(1, 10));
        assert_eq!(law_ne(3, &p, 1).unwrap(), q(243, 1000));
        assert!(law_ne(3, &p, 4).is_err());
        assert!(parse_probability("1.5").is_err());
        assert!(parse_probability("x").is_err());
        assert_eq!(parse_probability("3/8").unwrap(), q(3, 8));
    }

    #[test]
    fn law_ne_sums_to_one_with_mean_pn() {
        let p = q(2, 7);
        let cells = 12;
        let mut total = BigRational::zero();
        let mut mean = BigRational::zero();
        for k in 0..=cells {
            let v = law_ne(cells, &p, k).unwrap();
            mean += v.clone() * BigRational::from_integer(BigInt::from(k));
            total += v;
        }
        assert_eq!(total, q(1, 1));
        assert_eq!(mean, p * BigRational::from_integer(BigInt::from(cells)));
    }

    /// Mean number of touched columns over every `n_e`-subset.
    fn enumerate_cols(n: usize, m: usize, n_e: usize) -> BigRational {
        let cells = (n + 1) * (m + 1);
        let (mut sum, mut count) = (0u64, 0u64);
        for mask in 0u64..1 << cells {
            if mask.count_ones() as usize == n_e {
                sum += ErrorConfiguration::from_mask(n, m, mask).cols_touched() as u64;
                count += 1;
            }
        }
        q(sum as i64, count as i64)
    }

    #[test]
    fn expected_columns() {
        assert_eq!(exp_cols_given_ne(1, 1, 1).unwrap(), q(1, 1));
        assert_eq!(exp_cols_given_ne(2, 2, 2).unwrap(), q(7, 4));
        for n_e in 0..=9 {
            assert_eq!(exp_cols_given_ne(2, 2, n_e).unwrap(), enumerate_cols(2, 2, n_e));
        }
        for n_e in 0..=12 {
            assert_eq!(exp_cols_given_ne(2, 3, n_e).unwrap(), enumerate_cols(2, 3, n_e));
            assert_eq!(exp_rows_given_ne(3, 2, n_e).unwrap(), enumerate_cols(2, 3, n_e));
        }
        assert_eq!(exp_cols_given_ne(3, 5, 24).unwrap(), q(6, 1));
        assert!(exp_cols_given_ne(1, 1, 5).is_err());
    }

    #[test]
    fn regime3_estimate() {
        // printed form at full erasure of a 1x1 code
        assert_eq!(expected_i_regime3_as_printed(1, 1, 4).unwrap(), q(5, 1));
        // derived form reduces to K there
        assert_eq!(expected_i_regime3(1, 1, 4).unwrap(), q(1, 1));
        assert_eq!(expected_i_regime3(4, 6, 35).unwrap(), q(24, 1));
        let v = expected_i_regime3(30, 30, 127).unwrap();
        let r = exp_rows_given_ne(30, 30, 127).unwrap();
        let c = exp_cols_given_ne(30, 30, 127).unwrap();
        assert_eq!(v.clone(), q(128, 1) - r - c);
        let x = v.to_f64().unwrap();
        assert!(x > 66.0 && x < 67.5, "{x}");
    }

    #[test]
    fn lambda_values() {
        assert!((lambda_of_x(0.25).unwrap() - 0.018_841_04).abs() < 1e-7);
        assert!((lambda_of_x(0.5).unwrap() - 0.096_573_59).abs() < 1e-7);
        assert!((lambda_of_x(1e-4).unwrap() - 0.25e-8).abs() < 1e-11);
        assert!(lambda_of_x(0.0).is_err());
        assert!(lambda_of_x(1.0).is_err());
        let mut prev = 0.0;
        for k in 1..100 {
            let v = lambda_of_x(k as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn forest_examples() {
        assert_eq!(count_acyclic_subgraphs(1, 1, 1).unwrap(), 4);
        assert_eq!(count_acyclic_subgraphs(1, 1, 3).unwrap(), 4);
        assert_eq!(count_acyclic_subgraphs(1, 1, 4).unwrap(), 0);
        for (n, m) in [(1, 1), (2, 3), (3, 3)] {
            assert_eq!(count_acyclic_subgraphs(n, m, 0).unwrap(), 1);
        }
        assert!(matches!(forest_counts(5, 5), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn spanning_forests_match_cayley_count() {
        // spanning trees of K_{a,b}: a^(b-1) b^(a-1)
        for (n, m) in [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (3, 4)] {
            let (a, b) = (n as u64 + 1, m as u64 + 1);
            let trees = a.pow(b as u32 - 1) * b.pow(a as u32 - 1);
            assert_eq!(count_acyclic_subgraphs(n, m, n + m + 1).unwrap(), trees);
        }
    }

    #[test]
    fn forest_counts_match_peeling() {
        // a configuration is clean under peeling iff its graph is a forest
        let counts = forest_counts(2, 2).unwrap();
        let mut direct = vec![0u64; 10];
        for mask in 0u64..1 << 9 {
            let c = ErrorConfiguration::from_mask(2, 2, mask);
            if peel_residual(&c).is_empty() {
                direct[c.len()] += 1;
            }
        }
        assert_eq!(counts, direct);
        assert_eq!(prob_i_zero(2, 2, 9).unwrap(), q(0, 1));
    }

    #[test]
    fn bitmask_peel_agrees_with_codec() {
        for mask in 0u64..1 << 12 {
            let c = ErrorConfiguration::from_mask(2, 3, mask);
            let cells: Vec<_> = c.iter().map(|g| (g.row, g.col)).collect();
            let full = (1u32 << cells.len()) - 1;
            let clean = peels_clean(&cells, full, &mut [0; 3], &mut [0; 4]);
            assert_eq!(clean, peel_residual(&c).is_empty(), "{c}");
        }
    }

    fn edge(row: usize, col: usize, packet: usize, w: Weight) -> GadgetEdge {
        GadgetEdge {
            row,
            col,
            packet: PacketIndex(packet),
            weight: w,
        }
    }

    #[test]
    fn brute_force_examples() {
        let params = CodeParams::row_major(1, 1).unwrap();
        let empty = ErrorConfiguration::empty(1, 1);
        let f = brute_force_min_frs(&empty, CostFunction::AllOrNone, &params, None).unwrap();
        assert!(f.is_empty());
        let all = ErrorConfiguration::from_mask(1, 1, 0b1111);
        let f = brute_force_min_frs(&all, CostFunction::AllOrNone, &params, None).unwrap();
        assert_eq!(f.cost, Weight::from_integer(1));
        let w = |a, b| Ratio::new(a, b);
        let cycle = [
            edge(0, 0, 0, w(5, 1)),
            edge(0, 1, 1, w(1, 1)),
            edge(1, 0, 2, w(2, 1)),
            edge(1, 1, 3, w(3, 1)),
        ];
        let f = brute_force_min_frs_edges(&cycle).unwrap();
        assert_eq!(f.packets, vec![PacketIndex(1)]);
        let big = ErrorConfiguration::from_mask(4, 4, (1 << 25) - 1);
        let params = CodeParams::row_major(4, 4).unwrap();
        assert!(matches!(
            brute_force_min_frs(&big, CostFunction::AllOrNone, &params, None),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn modified_cost_brute_force_matches_solver() {
        let params = CodeParams::row_major(2, 2).unwrap();
        for mask in 0u64..1 << 9 {
            let c = ErrorConfiguration::from_mask(2, 2, mask);
            let cost = CostFunction::ModifiedAllOrNone;
            let g = build_gadget(&c, cost, &params, None).unwrap();
            let fast = min_frs_weighted(&g).unwrap();
            let slow = brute_force_min_frs(&c, cost, &params, None).unwrap();
            assert_eq!(fast.cost, slow.cost, "{c}");
        }
    }

    #[test]
    fn mc_trivial_cases() {
        for stat in [Statistic::ExpectedI, Statistic::ProbIZero] {
            let s = mc_conditional(5, 5, 0, 200, 1, stat).unwrap();
            let want = if stat == Statistic::ExpectedI { 0.0 } else { 1.0 };
            assert_eq!(s.estimate, want);
            assert_eq!(s.std_error, 0.0);
        }
        let s = mc_conditional(5, 5, 1, 200, 1, Statistic::ExpectedI).unwrap();
        assert_eq!(s.estimate, 0.0);
        let s = mc_conditional(3, 3, 16, 10, 1, Statistic::ExpectedC).unwrap();
        assert_eq!(s.estimate, 4.0);
        assert!(mc_conditional(3, 3, 17, 10, 1, Statistic::ExpectedC).is_err());
        assert!(mc_conditional(3, 3, 1, 0, 1, Statistic::ExpectedC).is_err());
    }

    #[test]
    fn mc_is_deterministic() {
        let a = mc_conditional(6, 6, 12, 3000, 9, Statistic::ExpectedI).unwrap();
        let b = mc_conditional(6, 6, 12, 3000, 9, Statistic::ExpectedI).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn statistic_names_round_trip() {
        for (s, name) in Statistic::NAMES {
            assert_eq!(name.parse::<Statistic>().unwrap(), s);
            assert_eq!(s.to_string(), name);
        }
        assert!("mean".parse::<Statistic>().is_err());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal(&q(243, 1000), 3), "0.243");
        assert_eq!(decimal(&q(2, 3), 4), "0.6667");
        assert_eq!(decimal(&q(-1, 8), 2), "-0.13");
        assert_eq!(decimal(&q(7, 1), 0), "7");
    }

    proptest! {
        #[test]
        fn unit_solver_matches_brute_force(n in 1usize..5, m in 1usize..5, bits in any::<u64>()) {
            let cells = (n + 1) * (m + 1);
            let mut mask = bits & ((1u64 << cells) - 1);
            while mask.count_ones() as usize > MAX_BRUTE_FORCE_ERRORS {
                mask &= mask - 1;
            }
            let c = ErrorConfiguration::from_mask(n, m, mask);
            let params = CodeParams::row_major(n, m).unwrap();
            let g = build_gadget(&c, CostFunction::AllOrNone, &params, None).unwrap();
            let fast = min_frs_unit(&g).unwrap();
            let slow = brute_force_min_frs(&c, CostFunction::AllOrNone, &params, None).unwrap();
            prop_assert_eq!(fast.cost, slow.cost);
        }

        #[test]
        fn weighted_solver_matches_brute_force(bits in any::<u16>(), weights in proptest::collection::vec(0usize..4, 16)) {
            let table = [Ratio::new(1, 1), Ratio::new(11, 10), Ratio::new(2, 1), Ratio::new(3, 1)];
            let c = ErrorConfiguration::from_mask(3, 3, u64::from(bits));
            let params = CodeParams::row_major(3, 3).unwrap();
            let edges: Vec<_> = c
                .iter()
                .map(|g| {
                    let p = params.index_of(g).unwrap();
                    edge(g.row, g.col, p.0, table[weights[p.0]])
                })
                .collect();
            let graph = CoordinatesGraph::from_edges(3, 3, edges.clone()).unwrap();
            let fast = min_frs_weighted(&graph).unwrap();
            let slow = brute_force_min_frs_edges(&edges).unwrap();
            prop_assert_eq!(fast.cost, slow.cost);
        }
    }
}
