//! Block direct sums of maximally entangled representations.
//!
//! A rational convex combination `sum_k (n_k / M) p_k` of correlations with
//! reps at dimensions `d_k` is realized at dimension `R M`, `R = prod d_k`, by
//! placing `R_k n_k` copies (`R_k = R / d_k`) of the `k`-th rep's operators
//! along the diagonal. Each copy contributes `Tr / (R M)`, which adds up to
//! `(n_k / M) Tr / d_k`.

use serde::{Deserialize, Serialize};

use crate::correlation::Correlation;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::operators::{HermMatrix, MaxEntRep, MeasureKind, OperatorMeasure};
use crate::rational::{self, RationalWeight};
use crate::EXACT_TOL;

/// Default cap on the dimension of any constructed representation.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Integer bookkeeping for a rational combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    /// Common denominator of the weights.
    #[serde(rename = "M")]
    pub common_den: u64,
    /// Numerators over `M`.
    #[serde(rename = "n")]
    pub numerators: Vec<u64>,
    #[serde(skip)]
    pub block_dims: Vec<usize>,
    /// `prod d_k`.
    #[serde(rename = "R")]
    pub r: u64,
    /// `R / d_k`.
    #[serde(rename = "R_k")]
    pub r_k: Vec<u64>,
    pub total_dim: u64,
}

impl BlockPlan {
    /// Copies of block `k` in the direct sum.
    pub fn copies(&self, k: usize) -> u64 {
        self.r_k[k] * self.numerators[k]
    }

    /// `sum_k R_k d_k n_k == R M`.
    pub fn identity_holds(&self) -> bool {
        let lhs: u128 = (0..self.numerators.len())
            .map(|k| self.r_k[k] as u128 * self.block_dims[k] as u128 * self.numerators[k] as u128)
            .sum();
        lhs == self.r as u128 * self.common_den as u128
    }
}

pub fn plan_blocks(dims: &[usize], weights: &[RationalWeight], max_dim: usize) -> Result<BlockPlan> {
    if dims.len() != weights.len() || dims.is_empty() {
        return Err(Error::Shape(format!("{} dims but {} weights", dims.len(), weights.len())));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidInput("block dimensions must be positive".into()));
    }
    if !rational::sums_to_one(weights)? {
        let s: f64 = weights.iter().map(|w| w.to_f64()).sum();
        return Err(Error::WeightSum { sum: format!("{s} ({})", weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" + ")) });
    }
    let m = rational::common_denominator(weights)?;
    let numerators: Vec<u64> = weights.iter().map(|w| w.num() * (m / w.den())).collect();
    let r: u128 = dims.iter().try_fold(1u128, |acc, &d| acc.checked_mul(d as u128)).unwrap_or(u128::MAX);
    let total = r.saturating_mul(m as u128);
    if total > max_dim as u128 {
        return Err(Error::DimensionCap { needed: total, cap: max_dim, context: format!("R = {r}, M = {m}") });
    }
    let r = r as u64;
    Ok(BlockPlan {
        common_den: m,
        numerators,
        block_dims: dims.to_vec(),
        r,
        r_k: dims.iter().map(|&d| r / d as u64).collect(),
        total_dim: total as u64,
    })
}

fn check_compatible(reps: &[MaxEntRep]) -> Result<()> {
    let first = reps.first().ok_or_else(|| Error::InvalidInput("no representations".into()))?;
    for rep in reps {
        if (rep.n_a(), rep.n_b(), rep.m()) != (first.n_a(), first.n_b(), first.m()) {
            return Err(Error::Shape("representations differ in (n_a, n_b, m)".into()));
        }
        if rep.kind() != MeasureKind::Pvm {
            return Err(Error::KindMismatch { expected: "PVM" });
        }
    }
    Ok(())
}

fn direct_sum_measure(parts: &[(&OperatorMeasure, u64)]) -> Result<OperatorMeasure> {
    let m = parts[0].0.outcomes();
    let elements = (0..m)
        .map(|i| {
            let blocks: Vec<&CMat> = parts
                .iter()
                .flat_map(|(meas, copies)| std::iter::repeat_n(meas.element(i).matrix(), *copies as usize))
                .collect();
            HermMatrix::new(linalg::block_diag(blocks))
        })
        .collect::<Result<Vec<_>>>()?;
    OperatorMeasure::new(elements, MeasureKind::Pvm)
}

/// A PVM rep of `sum_k w_k eval(reps[k])` at dimension `R M`.
///
/// If every input rep has `alice == bob` the output does too.
pub fn rational_combination(reps: &[MaxEntRep], weights: &[RationalWeight], max_dim: usize) -> Result<MaxEntRep> {
    check_compatible(reps)?;
    let dims: Vec<usize> = reps.iter().map(MaxEntRep::d).collect();
    let plan = plan_blocks(&dims, weights, max_dim)?;
    let party = |select: fn(&MaxEntRep) -> &[OperatorMeasure], count: usize| -> Result<Vec<OperatorMeasure>> {
        (0..count)
            .map(|x| {
                let parts: Vec<(&OperatorMeasure, u64)> =
                    reps.iter().enumerate().map(|(k, rep)| (&select(rep)[x], plan.copies(k))).collect();
                direct_sum_measure(&parts)
            })
            .collect()
    };
    MaxEntRep::new(party(MaxEntRep::alice, reps[0].n_a())?, party(MaxEntRep::bob, reps[0].n_b())?)
}

/// Rationals `r_k` with `sum r_k = 1` exactly and `|t_k - r_k| < eps / N`.
///
/// Uses the smallest common denominator `q <= max_den` that works after
/// rounding each target to a multiple of `1/q` and letting the largest weight
/// absorb the rounding surplus.
pub fn approximate_weights(targets: &[f64], eps: f64, max_den: u64) -> Result<Vec<RationalWeight>> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("no target weights".into()));
    }
    if targets.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidInput("target weights must be nonnegative".into()));
    }
    let sum: f64 = targets.iter().sum();
    if (sum - 1.0).abs() > EXACT_TOL {
        return Err(Error::WeightSum { sum: sum.to_string() });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let (q, nums) = rational::common_denominator_approx(targets, eps / targets.len() as f64, max_den)?;
    nums.into_iter().map(|n| RationalWeight::new(n, q)).collect()
}

/// Replaces every operator by `k` copies of itself on the diagonal, realizing
/// the inclusion of dimension-`d` correlations among dimension-`d k` ones.
pub fn embed_factorial(rep: &MaxEntRep, k: usize, max_dim: usize) -> Result<MaxEntRep> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let dim = rep.d() as u128 * k as u128;
    if dim > max_dim as u128 {
        return Err(Error::DimensionCap { needed: dim, cap: max_dim, context: format!("{k} copies of dimension {}", rep.d()) });
    }
    if k == 1 {
        return Ok(rep.clone());
    }
    rep.map_operators(|e| HermMatrix::from_hermitian_unchecked(linalg::repeat_diag(e.matrix(), k)))
}

/// `p(i,j|x,y) = sum_k (t_k / n_k) Tr(E^(k)_{x,i} E^(k)_{y,j})`: a tracial
/// state on a direct sum of matrix blocks, each block carrying its own list
/// of per-input PVMs at dimension `n_k`.
pub fn synchronous_from_blocks(blocks: &[Vec<OperatorMeasure>], trace_weights: &[f64]) -> Result<Correlation> {
    if blocks.is_empty() || blocks.len() != trace_weights.len() {
        return Err(Error::Shape(format!("{} blocks but {} weights", blocks.len(), trace_weights.len())));
    }
    if trace_weights.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("trace weights must be positive".into()));
    }
    let sum: f64 = trace_weights.iter().sum();
    if (sum - 1.0).abs() > EXACT_TOL {
        return Err(Error::WeightSum { sum: sum.to_string() });
    }
    let n = blocks[0].len();
    let m = blocks[0].first().ok_or_else(|| Error::Shape("a block needs at least one input".into()))?.outcomes();
    for block in blocks {
        let dim = block.first().map(OperatorMeasure::dim).unwrap_or(0);
        if block.len() != n || block.iter().any(|meas| meas.outcomes() != m || meas.dim() != dim) {
            return Err(Error::Shape("blocks differ in inputs, outcomes or internal dimension".into()));
        }
        if block.iter().any(|meas| meas.kind() != MeasureKind::Pvm) {
            return Err(Error::KindMismatch { expected: "PVM" });
        }
    }
    Correlation::from_fn(n, n, m, |x, y, i, j| {
        blocks
            .iter()
            .zip(trace_weights)
            .map(|(block, &t)| {
                let tr = linalg::trace_of_product(block[x].element(i).matrix(), block[y].element(j).matrix()).re;
                t / block[x].dim() as f64 * tr
            })
            .sum::<f64>()
            .max(0.0)
    })
}
