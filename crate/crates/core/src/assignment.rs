//! Square assignment problems: an ε-scaling auction solver and an exact
//! brute-force oracle for small instances.
//!
//! The auction works on the minimization form: bidder `i` values object `j`
//! at `-cost(i, j) - price[j]`. Each bid raises the price of the bidder's best
//! object by the gap to its second-best object plus `eps`. The final
//! assignment is within `n * eps_final` of the optimum.

use std::collections::VecDeque;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Point3, PointCloud};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("cost({0}, {1}) is not a finite non-negative number")]
    NonFiniteCost(usize, usize),
    #[error("cost matrix must be square and non-empty (got {0} values)")]
    NotSquare(usize),
    #[error("brute force is limited to n <= {max}, got {n}")]
    SizeExceeded { n: usize, max: usize },
    #[error("point sets differ in size: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("invalid auction parameters: {0}")]
    Params(String),
}

/// Square matrix of non-negative costs, either stored or computed on demand.
pub trait CostMatrix: Sync {
    fn n(&self) -> usize;
    fn cost(&self, i: usize, j: usize) -> f64;
}

/// Row-major materialized costs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCosts {
    n: usize,
    data: Vec<f64>,
}

impl DenseCosts {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if n == 0 || data.len() != n * n {
            return Err(AssignmentError::NotSquare(data.len()));
        }
        if let Some(k) = data.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(AssignmentError::NonFiniteCost(k / n, k % n));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AssignmentError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(AssignmentError::NotSquare(rows.iter().map(Vec::len).sum()));
        }
        Self::new(n, rows.concat())
    }

    pub fn materialize(costs: &impl CostMatrix) -> Result<Self, AssignmentError> {
        let n = costs.n();
        let data = (0..n * n).map(|k| costs.cost(k / n, k % n)).collect();
        Self::new(n, data)
    }
}

impl CostMatrix for DenseCosts {
    fn n(&self) -> usize {
        self.n
    }
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Squared Euclidean distances between two equal-size point sets,
/// evaluated lazily.
#[derive(Debug, Clone, Copy)]
pub struct PointCosts<'a> {
    a: &'a [Point3],
    b: &'a [Point3],
}

impl CostMatrix for PointCosts<'_> {
    fn n(&self) -> usize {
        self.a.len()
    }
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.a[i].distance_sq(&self.b[j])
    }
}

impl<'a> PointCosts<'a> {
    pub fn from_slices(a: &'a [Point3], b: &'a [Point3]) -> Result<Self, AssignmentError> {
        if a.len() != b.len() {
            return Err(AssignmentError::SizeMismatch(a.len(), b.len()));
        }
        if a.is_empty() {
            return Err(AssignmentError::NotSquare(0));
        }
        Ok(Self { a, b })
    }

    /// Mean of all `n^2` costs in O(n):
    /// `mean|a|^2 + mean|b|^2 - 2 mean(a) . mean(b)`.
    pub fn mean_cost(&self) -> f64 {
        let n = self.a.len() as f64;
        let sq = |s: &[Point3]| s.iter().map(Point3::norm_sq).sum::<f64>() / n;
        let mean = |s: &[Point3]| {
            s.iter().fold(Point3::ORIGIN, |acc, p| acc + *p) * (1.0 / n)
        };
        let (ma, mb) = (mean(self.a), mean(self.b));
        (sq(self.a) + sq(self.b) - 2.0 * (ma.x * mb.x + ma.y * mb.y + ma.z * mb.z)).max(0.0)
    }
}

/// Cost matrix `cost(i, j) = |a_i - b_j|^2`.
pub fn point_cost<'a>(a: &'a PointCloud, b: &'a PointCloud) -> Result<PointCosts<'a>, AssignmentError> {
    PointCosts::from_slices(a.points(), b.points())
}

/// A bijection `row -> sigma[row]` and its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub sigma: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn from_sigma(costs: &impl CostMatrix, sigma: Vec<usize>) -> Self {
        let total_cost = sigma.iter().enumerate().map(|(i, &j)| costs.cost(i, j)).sum();
        Self { sigma, total_cost }
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.sigma.len()];
        self.sigma
            .iter()
            .all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiddingMode {
    /// One bidder at a time, queue order. Deterministic.
    #[default]
    GaussSeidel,
    /// All unassigned bidders bid against the same prices each round;
    /// conflicts resolved per object by highest bid.
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionParams {
    pub eps_start: f64,
    pub eps_scale_divisor: f64,
    pub eps_final: f64,
    pub mode: BiddingMode,
}

impl AuctionParams {
    pub fn new(eps_start: f64, eps_final: f64) -> Self {
        Self {
            eps_start,
            eps_scale_divisor: 4.0,
            eps_final,
            mode: BiddingMode::GaussSeidel,
        }
    }

    pub fn with_mode(mut self, mode: BiddingMode) -> Self {
        self.mode = mode;
        self
    }

    fn validate(&self) -> Result<(), AssignmentError> {
        let ok = self.eps_final > 0.0
            && self.eps_final.is_finite()
            && self.eps_start >= self.eps_final
            && self.eps_start.is_finite()
            && self.eps_scale_divisor > 1.0;
        if ok {
            Ok(())
        } else {
            Err(AssignmentError::Params(format!("{self:?}")))
        }
    }

    /// Schedule that is exact on costs that are multiples of `granularity`:
    /// start at half the largest cost, finish at `granularity / (n + 1)`.
    pub fn for_granular_costs(costs: &impl CostMatrix, granularity: f64) -> Self {
        let n = costs.n();
        let eps_final = granularity / (n as f64 + 1.0);
        let max = max_cost(costs);
        Self::new((max / 2.0).max(eps_final), eps_final)
    }

    /// Schedule ending at an absolute `eps_final`.
    pub fn with_final(costs: &impl CostMatrix, eps_final: f64) -> Self {
        let max = max_cost(costs);
        Self::new((max / 2.0).max(eps_final), eps_final)
    }

    /// Schedule ending at `relative * mean_cost` (1.0 if all costs are zero).
    pub fn relative(costs: &impl CostMatrix, mean_cost: f64, relative: f64) -> Self {
        let eps_final = if mean_cost > 0.0 { relative * mean_cost } else { 1.0 };
        Self::with_final(costs, eps_final)
    }
}

fn max_cost(costs: &impl CostMatrix) -> f64 {
    let n = costs.n();
    let mut max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max = max.max(costs.cost(i, j));
        }
    }
    max
}

/// Counters from one auction run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuctionStats {
    pub phases: usize,
    pub bids: u64,
}

pub fn auction_solve(
    costs: &impl CostMatrix,
    params: &AuctionParams,
) -> Result<Assignment, AssignmentError> {
    auction_solve_with_stats(costs, params).map(|(a, _)| a)
}

pub fn auction_solve_with_stats(
    costs: &impl CostMatrix,
    params: &AuctionParams,
) -> Result<(Assignment, AuctionStats), AssignmentError> {
    params.validate()?;
    let n = costs.n();
    if n == 0 {
        return Err(AssignmentError::NotSquare(0));
    }
    let mut prices = vec![0.0f64; n];
    let mut stats = AuctionStats::default();
    let mut eps = params.eps_start;
    let sigma = loop {
        stats.phases += 1;
        let sigma = match params.mode {
            BiddingMode::GaussSeidel => gauss_seidel_phase(costs, &mut prices, eps, &mut stats)?,
            BiddingMode::Jacobi => jacobi_phase(costs, &mut prices, eps, &mut stats)?,
        };
        if eps <= params.eps_final {
            break sigma;
        }
        eps = (eps / params.eps_scale_divisor).max(params.eps_final);
    };
    Ok((Assignment::from_sigma(costs, sigma), stats))
}

/// Best and second-best object for bidder `i`: `(j1, v1, v2)`. Ties go to
/// the lowest index.
#[inline]
fn best_two(
    costs: &impl CostMatrix,
    prices: &[f64],
    i: usize,
) -> Result<(usize, f64, f64), AssignmentError> {
    let mut j1 = 0;
    let mut v1 = f64::NEG_INFINITY;
    let mut v2 = f64::NEG_INFINITY;
    for (j, &p) in prices.iter().enumerate() {
        let c = costs.cost(i, j);
        if !(c.is_finite() && c >= 0.0) {
            return Err(AssignmentError::NonFiniteCost(i, j));
        }
        let v = -c - p;
        if v > v1 {
            v2 = v1;
            v1 = v;
            j1 = j;
        } else if v > v2 {
            v2 = v;
        }
    }
    Ok((j1, v1, v2))
}

/// Price after bidder with values `(v1, v2)` bids on an object at `price`.
#[inline]
fn bid_price(price: f64, v1: f64, v2: f64, eps: f64) -> f64 {
    if v2 == f64::NEG_INFINITY {
        // Single object: any positive increment keeps the bid valid.
        price + eps
    } else {
        price + (v1 - v2) + eps
    }
}

fn gauss_seidel_phase(
    costs: &impl CostMatrix,
    prices: &mut [f64],
    eps: f64,
    stats: &mut AuctionStats,
) -> Result<Vec<usize>, AssignmentError> {
    let n = prices.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut assigned: Vec<usize> = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = (0..n).collect();
    while let Some(i) = queue.pop_front() {
        let (j1, v1, v2) = best_two(costs, prices, i)?;
        prices[j1] = bid_price(prices[j1], v1, v2, eps);
        stats.bids += 1;
        if let Some(prev) = owner[j1].replace(i) {
            assigned[prev] = usize::MAX;
            queue.push_back(prev);
        }
        assigned[i] = j1;
    }
    Ok(assigned)
}

fn jacobi_phase(
    costs: &impl CostMatrix,
    prices: &mut [f64],
    eps: f64,
    stats: &mut AuctionStats,
) -> Result<Vec<usize>, AssignmentError> {
    let n = prices.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut assigned: Vec<usize> = vec![usize::MAX; n];
    let mut unassigned: Vec<usize> = (0..n).collect();
    while !unassigned.is_empty() {
        let snapshot: &[f64] = prices;
        let bids: Vec<(usize, usize, f64)> = unassigned
            .par_iter()
            .map(|&i| {
                best_two(costs, snapshot, i).map(|(j1, v1, v2)| (i, j1, bid_price(snapshot[j1], v1, v2, eps)))
            })
            .collect::<Result<_, _>>()?;
        stats.bids += bids.len() as u64;
        // Highest bid per object wins; lower bidder index on ties.
        let mut winner: Vec<Option<(usize, f64)>> = vec![None; n];
        for &(i, j, price) in &bids {
            match winner[j] {
                Some((_, best)) if best >= price => {}
                _ => winner[j] = Some((i, price)),
            }
        }
        let mut next = Vec::new();
        for (j, w) in winner.iter().enumerate() {
            let Some((i, price)) = *w else { continue };
            prices[j] = price;
            if let Some(prev) = owner[j].replace(i) {
                assigned[prev] = usize::MAX;
                next.push(prev);
            }
            assigned[i] = j;
        }
        for &(i, _, _) in &bids {
            if assigned[i] == usize::MAX {
                next.push(i);
            }
        }
        next.sort_unstable();
        next.dedup();
        unassigned = next;
    }
    Ok(assigned)
}

pub const BRUTE_FORCE_MAX: usize = 10;

/// Exact optimum by enumerating all permutations in lexicographic order;
/// the first optimal permutation found is kept.
pub fn brute_force_solve(costs: &impl CostMatrix) -> Result<Assignment, AssignmentError> {
    let n = costs.n();
    if n > BRUTE_FORCE_MAX {
        return Err(AssignmentError::SizeExceeded {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    if n == 0 {
        return Err(AssignmentError::NotSquare(0));
    }
    for i in 0..n {
        for j in 0..n {
            let c = costs.cost(i, j);
            if !(c.is_finite() && c >= 0.0) {
                return Err(AssignmentError::NonFiniteCost(i, j));
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| costs.cost(i, j)).sum::<f64>();
    let mut best = perm.clone();
    let mut best_cost = total(&perm);
    while next_permutation(&mut perm) {
        let c = total(&perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment {
        sigma: best,
        total_cost: best_cost,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
