//! The correlation tensor `p(i, j | x, y)` and its structural predicates.
//!
//! Values are stored flat in `(x, y, i, j)` row-major order so that each
//! conditional distribution `p(·, · | x, y)` is contiguous. The same order is
//! used by the JSON schema.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::json::{serialize_f64, serialize_f64_slice};
use crate::rng;
use crate::EXACT_TOL;

/// A bipartite correlation with `n_a` inputs for Alice, `n_b` for Bob and
/// `m` outputs per input.
///
/// Construction only checks the shape; use [`Correlation::validate`] for
/// nonnegativity and normalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    n_a: usize,
    n_b: usize,
    m: usize,
    #[serde(serialize_with = "serialize_f64_slice")]
    values: Vec<f64>,
}

/// One failed constraint found by [`Correlation::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    Nonnegativity {
        x: usize,
        y: usize,
        i: usize,
        j: usize,
        #[serde(serialize_with = "serialize_f64")]
        value: f64,
    },
    Normalization {
        x: usize,
        y: usize,
        #[serde(serialize_with = "serialize_f64")]
        sum: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Marginal densities `p_A(i|x)` and `p_B(j|y)`.
///
/// `alice[x][i]` is computed at `y = 0` and `bob[y][j]` at `x = 0`; the
/// signalling defect is the largest deviation of any other choice from those.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalPair {
    pub alice: Vec<Vec<f64>>,
    pub bob: Vec<Vec<f64>>,
    pub well_defined: bool,
    pub max_signalling_defect: f64,
}

impl Correlation {
    pub fn new(n_a: usize, n_b: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n_a == 0 || n_b == 0 || m == 0 {
            return Err(Error::Shape(format!("n_a={n_a}, n_b={n_b}, m={m} must all be positive")));
        }
        let expected = n_a * n_b * m * m;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} values for (n_a, n_b, m) = ({n_a}, {n_b}, {m}), got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self { n_a, n_b, m, values })
    }

    /// Builds a tensor from `f(x, y, i, j)`.
    pub fn from_fn(n_a: usize, n_b: usize, m: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n_a * n_b * m * m);
        for x in 0..n_a {
            for y in 0..n_b {
                for i in 0..m {
                    for j in 0..m {
                        values.push(f(x, y, i, j));
                    }
                }
            }
        }
        Self::new(n_a, n_b, m, values)
    }

    pub fn uniform(n_a: usize, n_b: usize, m: usize) -> Result<Self> {
        let v = 1.0 / (m * m) as f64;
        Self::from_fn(n_a, n_b, m, |_, _, _, _| v)
    }

    /// The deterministic correlation `p(i,j|x,y) = [i = alice[x]] [j = bob[y]]`.
    pub fn deterministic(alice: &[usize], bob: &[usize], m: usize) -> Result<Self> {
        if alice.iter().chain(bob).any(|&o| o >= m) {
            return Err(Error::InvalidInput(format!("response outputs must be below m={m}")));
        }
        Self::from_fn(alice.len(), bob.len(), m, |x, y, i, j| {
            if alice[x] == i && bob[y] == j {
                1.0
            } else {
                0.0
            }
        })
    }

    /// The PR box: `1/2` when `i XOR j = x AND y`, else `0`.
    pub fn pr_box() -> Self {
        Self::from_fn(2, 2, 2, |x, y, i, j| if (i ^ j) == (x & y) { 0.5 } else { 0.0 }).expect("fixed shape")
    }

    /// A random nonsignalling correlation: a convex mixture, with uniformly
    /// drawn weights, of up to four extreme points. Each is either a
    /// deterministic correlation or a box `p(i,j|x,y) = [j - i = g(x,y) mod m] / m`
    /// for a random function `g`; the boxes have uniform marginals and are
    /// nonsignalling for every `g`.
    pub fn random_nonsignalling(n_a: usize, n_b: usize, m: usize, seed: u64) -> Result<Self> {
        if n_a == 0 || n_b == 0 || m == 0 {
            return Err(Error::Shape("n_a, n_b and m must be positive".into()));
        }
        let mut r = rng::stream(seed, 0);
        let count = r.random_range(1..=4);
        let mut parts = Vec::with_capacity(count);
        for _ in 0..count {
            if r.random_bool(0.5) {
                let alice: Vec<usize> = (0..n_a).map(|_| r.random_range(0..m)).collect();
                let bob: Vec<usize> = (0..n_b).map(|_| r.random_range(0..m)).collect();
                parts.push(Self::deterministic(&alice, &bob, m)?);
            } else {
                let g: Vec<usize> = (0..n_a * n_b).map(|_| r.random_range(0..m)).collect();
                let share = 1.0 / m as f64;
                parts.push(Self::from_fn(n_a, n_b, m, |x, y, i, j| {
                    if (j + m - i) % m == g[x * n_b + y] {
                        share
                    } else {
                        0.0
                    }
                })?);
            }
        }
        let raw: Vec<f64> = (0..count).map(|_| r.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let rest: f64 = weights[1..].iter().sum();
        weights[0] = 1.0 - rest;
        Self::convex_combine(&parts, &weights)
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_a, self.n_b, self.m)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, i: usize, j: usize) -> usize {
        debug_assert!(x < self.n_a && y < self.n_b && i < self.m && j < self.m);
        ((x * self.n_b + y) * self.m + i) * self.m + j
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, i: usize, j: usize) -> f64 {
        self.values[self.index(x, y, i, j)]
    }

    /// The conditional distribution `p(·, · | x, y)` as an `m*m` slice indexed `i*m + j`.
    pub fn block(&self, x: usize, y: usize) -> &[f64] {
        let start = self.index(x, y, 0, 0);
        &self.values[start..start + self.m * self.m]
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }

    fn check_square(&self) -> Result<()> {
        if self.n_a != self.n_b {
            return Err(Error::Shape(format!("n_a={} differs from n_b={}", self.n_a, self.n_b)));
        }
        Ok(())
    }

    /// Checks nonnegativity (entries `>= -tol`) and normalization of every
    /// conditional distribution (`|sum - 1| <= tol`).
    pub fn validate(&self, tol: f64) -> ValidityReport {
        let mut violations = Vec::new();
        for x in 0..self.n_a {
            for y in 0..self.n_b {
                let mut sum = 0.0;
                for i in 0..self.m {
                    for j in 0..self.m {
                        let v = self.get(x, y, i, j);
                        if v < -tol {
                            violations.push(Violation::Nonnegativity { x, y, i, j, value: v });
                        }
                        sum += v;
                    }
                }
                if (sum - 1.0).abs() > tol {
                    violations.push(Violation::Normalization { x, y, sum });
                }
            }
        }
        ValidityReport { ok: violations.is_empty(), violations }
    }

    pub fn marginals(&self, tol: f64) -> MarginalPair {
        let (n_a, n_b, m) = self.shape();
        let alice_at = |x: usize, y: usize, i: usize| (0..m).map(|j| self.get(x, y, i, j)).sum::<f64>();
        let bob_at = |x: usize, y: usize, j: usize| (0..m).map(|i| self.get(x, y, i, j)).sum::<f64>();

        let alice: Vec<Vec<f64>> = (0..n_a).map(|x| (0..m).map(|i| alice_at(x, 0, i)).collect()).collect();
        let bob: Vec<Vec<f64>> = (0..n_b).map(|y| (0..m).map(|j| bob_at(0, y, j)).collect()).collect();

        let mut defect: f64 = 0.0;
        for x in 0..n_a {
            for y in 0..n_b {
                for k in 0..m {
                    defect = defect.max((alice_at(x, y, k) - alice[x][k]).abs());
                    defect = defect.max((bob_at(x, y, k) - bob[y][k]).abs());
                }
            }
        }
        MarginalPair { alice, bob, well_defined: defect <= tol, max_signalling_defect: defect }
    }

    /// Marginals averaged over the other party's inputs. Coincides with
    /// [`Correlation::marginals`] for nonsignalling tensors.
    pub fn averaged_marginals(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (n_a, n_b, m) = self.shape();
        let mut alice = vec![vec![0.0; m]; n_a];
        let mut bob = vec![vec![0.0; m]; n_b];
        for x in 0..n_a {
            for y in 0..n_b {
                for i in 0..m {
                    for j in 0..m {
                        let v = self.get(x, y, i, j);
                        alice[x][i] += v / n_b as f64;
                        bob[y][j] += v / n_a as f64;
                    }
                }
            }
        }
        (alice, bob)
    }

    /// `p(i,j|x,x) <= tol` for every `x` and `i != j`.
    pub fn is_synchronous(&self, tol: f64) -> Result<bool> {
        self.check_square()?;
        for x in 0..self.n_a {
            for i in 0..self.m {
                for j in 0..self.m {
                    if i != j && self.get(x, x, i, j) > tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// `|p(i,j|x,y) - p(j,i|y,x)| <= tol` for all indices.
    pub fn is_symmetric(&self, tol: f64) -> Result<bool> {
        self.check_square()?;
        let n = self.n_a;
        for x in 0..n {
            for y in 0..n {
                for i in 0..self.m {
                    for j in 0..self.m {
                        if (self.get(x, y, i, j) - self.get(y, x, j, i)).abs() > tol {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// Entrywise weighted sum. Weights must be nonnegative and sum to one
    /// within [`EXACT_TOL`].
    pub fn convex_combine(ps: &[Correlation], weights: &[f64]) -> Result<Correlation> {
        let first = ps.first().ok_or_else(|| Error::InvalidInput("no correlations to combine".into()))?;
        if ps.len() != weights.len() {
            return Err(Error::Shape(format!("{} correlations but {} weights", ps.len(), weights.len())));
        }
        for p in ps {
            first.check_same_shape(p)?;
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > EXACT_TOL {
            return Err(Error::WeightSum { sum: sum.to_string() });
        }
        let mut values = vec![0.0; first.values.len()];
        for (p, &w) in ps.iter().zip(weights) {
            for (acc, v) in values.iter_mut().zip(&p.values) {
                *acc += w * v;
            }
        }
        Correlation::new(first.n_a, first.n_b, first.m, values)
    }

    /// Largest entrywise absolute difference.
    pub fn sup_distance(&self, other: &Correlation) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Reads the JSON schema, clamping entries in `[-tol, 0)` to zero and
    /// rejecting anything more negative.
    pub fn from_json_str(s: &str, tol: f64) -> Result<Self> {
        let raw: RawCorrelation = serde_json::from_str(s)?;
        raw.into_correlation(tol)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("finite values serialize")
    }
}

#[derive(Deserialize)]
struct RawCorrelation {
    n_a: usize,
    n_b: usize,
    m: usize,
    values: Vec<f64>,
}

impl RawCorrelation {
    fn into_correlation(mut self, tol: f64) -> Result<Correlation> {
        for (pos, v) in self.values.iter_mut().enumerate() {
            if *v < -tol {
                return Err(Error::InvalidInput(format!("entry {pos} is {v}, below -{tol:e}")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Correlation::new(self.n_a, self.n_b, self.m, self.values)
    }
}

impl<'de> Deserialize<'de> for Correlation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        RawCorrelation::deserialize(deserializer)?
            .into_correlation(EXACT_TOL)
            .map_err(serde::de::Error::custom)
    }
}
