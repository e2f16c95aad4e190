//! Membership in the local polytope, the convex hull of deterministic
//! correlations.
//!
//! Membership is a feasibility LP over vertex weights. A feasible solution
//! is reported with its weights; an infeasible one yields a Farkas vector
//! whose correlation part is a Bell functional separating `p` from every
//! vertex. Both outcomes are re-checked independently of the solver, and
//! anything that fails the re-check is reported as indeterminate.

use serde::{Deserialize, Serialize};

use crate::correlation::Correlation;
use crate::error::{Error, Result};
use crate::json::{serialize_f64, serialize_f64_slice};
use crate::operators::{HermMatrix, MaxEntRep, MeasureKind, OperatorMeasure};
use crate::simplex::{self, LpOutcome, SimplexOptions};

pub const DEFAULT_MAX_VERTICES: usize = 100_000;

/// Largest reconstruction error accepted for an inside verdict.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Smallest violation of the classical bound accepted for an outside verdict.
pub const SEPARATION_MARGIN: f64 = 1e-9;

/// `f(p) = Σ coefficients(x,y,i,j) · p(i,j|x,y) + offset`, coefficients in
/// the same `(x, y, i, j)` layout as [`Correlation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFunctional")]
pub struct BellFunctional {
    n_a: usize,
    n_b: usize,
    m: usize,
    #[serde(serialize_with = "serialize_f64_slice")]
    coefficients: Vec<f64>,
    #[serde(serialize_with = "serialize_f64")]
    offset: f64,
}

#[derive(Deserialize)]
struct RawFunctional {
    n_a: usize,
    n_b: usize,
    m: usize,
    coefficients: Vec<f64>,
    #[serde(default)]
    offset: f64,
}

impl TryFrom<RawFunctional> for BellFunctional {
    type Error = Error;

    fn try_from(raw: RawFunctional) -> Result<Self> {
        Self::new(raw.n_a, raw.n_b, raw.m, raw.coefficients, raw.offset)
    }
}

impl BellFunctional {
    pub fn new(n_a: usize, n_b: usize, m: usize, coefficients: Vec<f64>, offset: f64) -> Result<Self> {
        if n_a == 0 || n_b == 0 || m == 0 {
            return Err(Error::Shape("n_a, n_b and m must be positive".into()));
        }
        if coefficients.len() != n_a * n_b * m * m {
            return Err(Error::Shape(format!(
                "{} coefficients for shape ({n_a}, {n_b}, {m}); expected {}",
                coefficients.len(),
                n_a * n_b * m * m
            )));
        }
        if coefficients.iter().chain([&offset]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite Bell coefficient".into()));
        }
        Ok(Self { n_a, n_b, m, coefficients, offset })
    }

    pub fn zero(n_a: usize, n_b: usize, m: usize, offset: f64) -> Result<Self> {
        Self::new(n_a, n_b, m, vec![0.0; n_a * n_b * m * m], offset)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_a, self.n_b, self.m)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn get(&self, x: usize, y: usize, i: usize, j: usize) -> f64 {
        self.coefficients[((x * self.n_b + y) * self.m + i) * self.m + j]
    }

    /// Maximum over deterministic correlations. For each response function
    /// of Alice, Bob's best reply decouples across his inputs.
    pub fn classical_bound(&self, max_vertices: usize) -> Result<f64> {
        vertex_count(self.n_a, self.n_b, self.m, max_vertices)?;
        let (n_a, n_b, m) = self.shape();
        let alice_count = (m as u64).pow(n_a as u32);
        let mut best = f64::NEG_INFINITY;
        for a_idx in 0..alice_count {
            let a = digits(a_idx, n_a, m);
            let mut total = self.offset;
            for y in 0..n_b {
                total += (0..m)
                    .map(|j| (0..n_a).map(|x| self.get(x, y, a[x], j)).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            best = best.max(total);
        }
        Ok(best)
    }
}

pub fn bell_value(p: &Correlation, f: &BellFunctional) -> Result<f64> {
    if p.shape() != f.shape() {
        return Err(Error::Shape(format!("correlation shape {:?} vs functional shape {:?}", p.shape(), f.shape())));
    }
    Ok(p.values().iter().zip(&f.coefficients).map(|(a, b)| a * b).sum::<f64>() + f.offset)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexWeight {
    /// See [`enumerate_deterministic`] for the indexing.
    pub vertex: usize,
    #[serde(serialize_with = "serialize_f64")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub functional: BellFunctional,
    #[serde(serialize_with = "serialize_f64")]
    pub classical_bound: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub achieved_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "VerdictJson", try_from = "VerdictJson")]
pub enum MembershipVerdict {
    Inside { weights: Vec<VertexWeight>, reconstruction_error: f64 },
    Outside { certificate: Certificate },
    /// The solver stopped or its answer failed the independent re-check.
    Indeterminate { reason: String },
}

impl MembershipVerdict {
    /// `None` when indeterminate.
    pub fn inside(&self) -> Option<bool> {
        match self {
            Self::Inside { .. } => Some(true),
            Self::Outside { .. } => Some(false),
            Self::Indeterminate { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VerdictJson {
    status: String,
    inside: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    weights: Option<Vec<VertexWeight>>,
    #[serde(skip_serializing_if = "Option::is_none", default, serialize_with = "opt_f64")]
    reconstruction_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    reason: Option<String>,
}

fn opt_f64<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_f64(x, s),
        None => s.serialize_none(),
    }
}

impl From<MembershipVerdict> for VerdictJson {
    fn from(v: MembershipVerdict) -> Self {
        let inside = v.inside();
        let mut out =
            VerdictJson { status: String::new(), inside, weights: None, reconstruction_error: None, certificate: None, reason: None };
        match v {
            MembershipVerdict::Inside { weights, reconstruction_error } => {
                out.status = "inside".into();
                out.weights = Some(weights);
                out.reconstruction_error = Some(reconstruction_error);
            }
            MembershipVerdict::Outside { certificate } => {
                out.status = "outside".into();
                out.certificate = Some(certificate);
            }
            MembershipVerdict::Indeterminate { reason } => {
                out.status = "indeterminate".into();
                out.reason = Some(reason);
            }
        }
        out
    }
}

impl TryFrom<VerdictJson> for MembershipVerdict {
    type Error = String;

    fn try_from(v: VerdictJson) -> std::result::Result<Self, String> {
        let missing = |field: &str| format!("{} verdict without {field}", v.status);
        match v.status.as_str() {
            "inside" => Ok(Self::Inside {
                weights: v.weights.clone().ok_or_else(|| missing("weights"))?,
                reconstruction_error: v.reconstruction_error.ok_or_else(|| missing("reconstruction_error"))?,
            }),
            "outside" => Ok(Self::Outside { certificate: v.certificate.clone().ok_or_else(|| missing("certificate"))? }),
            "indeterminate" => Ok(Self::Indeterminate { reason: v.reason.clone().unwrap_or_default() }),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

/// `m^{n_a} · m^{n_b}`, checked against `max_vertices`.
pub fn vertex_count(n_a: usize, n_b: usize, m: usize, max_vertices: usize) -> Result<usize> {
    let count = (m as u128).checked_pow((n_a + n_b) as u32).unwrap_or(u128::MAX);
    if count > max_vertices as u128 {
        return Err(Error::VertexCap { count, cap: max_vertices });
    }
    Ok(count as usize)
}

fn digits(mut idx: u64, len: usize, m: usize) -> Vec<usize> {
    (0..len)
        .map(|_| {
            let dgt = (idx % m as u64) as usize;
            idx /= m as u64;
            dgt
        })
        .collect()
}

/// All deterministic correlations `p(i,j|x,y) = [a(x) = i][b(y) = j]`.
///
/// Vertex `a_idx · m^{n_b} + b_idx` has `a(x)` equal to digit `x` of
/// `a_idx` in base `m` (least significant first), and likewise for `b`.
pub fn enumerate_deterministic(n_a: usize, n_b: usize, m: usize, max_vertices: usize) -> Result<Vec<Correlation>> {
    if n_a == 0 || n_b == 0 || m == 0 {
        return Err(Error::Shape("n_a, n_b and m must be positive".into()));
    }
    let count = vertex_count(n_a, n_b, m, max_vertices)?;
    let bob_count = (m as u64).pow(n_b as u32);
    (0..count as u64)
        .map(|v| Correlation::deterministic(&digits(v / bob_count, n_a, m), &digits(v % bob_count, n_b, m), m))
        .collect()
}

/// Decides whether `p` lies in the local polytope. `tol` is the phase-one
/// residual below which the weight system counts as feasible.
pub fn is_local(p: &Correlation, tol: f64, max_vertices: usize) -> Result<MembershipVerdict> {
    let (n_a, n_b, m) = p.shape();
    let vertices = enumerate_deterministic(n_a, n_b, m, max_vertices)?;
    let cells = p.values().len();

    let mut a: Vec<Vec<f64>> = (0..cells).map(|cell| vertices.iter().map(|v| v.values()[cell]).collect()).collect();
    a.push(vec![1.0; vertices.len()]);
    let mut b = p.values().to_vec();
    b.push(1.0);
    let c = vec![0.0; vertices.len()];
    let opts = SimplexOptions { feasibility_tol: tol, ..Default::default() };

    Ok(match simplex::solve(&a, &b, &c, &opts)? {
        LpOutcome::Optimal { x, .. } => inside_verdict(p, &vertices, &x),
        LpOutcome::Infeasible { farkas, .. } => outside_verdict(p, &farkas[..cells], max_vertices)?,
        LpOutcome::IterationLimit => MembershipVerdict::Indeterminate { reason: "simplex iteration limit reached".into() },
        LpOutcome::Unbounded => MembershipVerdict::Indeterminate { reason: "feasibility LP reported unbounded".into() },
    })
}

fn inside_verdict(p: &Correlation, vertices: &[Correlation], x: &[f64]) -> MembershipVerdict {
    let weights: Vec<VertexWeight> =
        x.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(vertex, &weight)| VertexWeight { vertex, weight }).collect();
    let mut recon = vec![0.0; p.values().len()];
    for w in &weights {
        for (r, v) in recon.iter_mut().zip(vertices[w.vertex].values()) {
            *r += w.weight * v;
        }
    }
    let sum_err = (weights.iter().map(|w| w.weight).sum::<f64>() - 1.0).abs();
    let err = recon.iter().zip(p.values()).map(|(r, v)| (r - v).abs()).fold(sum_err, f64::max);
    if err <= RECONSTRUCTION_TOL {
        MembershipVerdict::Inside { weights, reconstruction_error: err }
    } else {
        MembershipVerdict::Indeterminate { reason: format!("weights reconstruct p only within {err:e}") }
    }
}

fn outside_verdict(p: &Correlation, g: &[f64], max_vertices: usize) -> Result<MembershipVerdict> {
    let (n_a, n_b, m) = p.shape();
    let scale = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Ok(MembershipVerdict::Indeterminate { reason: "dual certificate vanished".into() });
    }
    let functional = BellFunctional::new(n_a, n_b, m, g.iter().map(|v| v / scale).collect(), 0.0)?;
    let classical_bound = functional.classical_bound(max_vertices)?;
    let achieved_value = bell_value(p, &functional)?;
    Ok(if achieved_value > classical_bound + SEPARATION_MARGIN {
        MembershipVerdict::Outside { certificate: Certificate { functional, classical_bound, achieved_value } }
    } else {
        MembershipVerdict::Indeterminate {
            reason: format!("certificate separates by only {:e}", achieved_value - classical_bound),
        }
    })
}

fn qubit_projection_pvm(theta: f64) -> OperatorMeasure {
    let (c, s) = (theta.cos(), theta.sin());
    let p0 = HermMatrix::from_real_rows(&[&[c * c, c * s], &[c * s, s * s]]).expect("symmetric");
    let p1 = HermMatrix::from_real_rows(&[&[s * s, -c * s], &[-c * s, c * c]]).expect("symmetric");
    OperatorMeasure::new(vec![p0, p1], MeasureKind::Pvm).expect("same dimension")
}

/// Qubit projections onto `(cos θ, sin θ)`: Alice at `θ = 0, π/4`, Bob at
/// `θ = ±π/8`. Real symmetric operators are their own transposes, so Bob's
/// are already in canonical form.
pub fn chsh_optimal_rep() -> MaxEntRep {
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
    let alice = vec![qubit_projection_pvm(0.0), qubit_projection_pvm(FRAC_PI_4)];
    let bob = vec![qubit_projection_pvm(FRAC_PI_8), qubit_projection_pvm(-FRAC_PI_8)];
    MaxEntRep::new(alice, bob).expect("consistent shapes")
}

/// Winning probability of the CHSH game under uniform inputs:
/// `¼ Σ [i ⊕ j = x·y] p(i,j|x,y)`.
pub fn chsh_game_functional() -> BellFunctional {
    let coefficients = (0..16)
        .map(|idx| {
            let (x, y, i, j) = (idx >> 3 & 1, idx >> 2 & 1, idx >> 1 & 1, idx & 1);
            if i ^ j == x & y {
                0.25
            } else {
                0.0
            }
        })
        .collect();
    BellFunctional::new(2, 2, 2, coefficients, 0.0).expect("16 coefficients")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CHSH_QUANTUM: f64 = 0.853_553_390_593_273_8;

    #[test]
    fn vertex_counts() {
        assert_eq!(enumerate_deterministic(1, 1, 2, DEFAULT_MAX_VERTICES).unwrap().len(), 4);
        let v = enumerate_deterministic(2, 2, 2, DEFAULT_MAX_VERTICES).unwrap();
        assert_eq!(v.len(), 16);
        for p in &v {
            assert!(p.validate(0.0).ok);
            assert_eq!(p.marginals(0.0).max_signalling_defect, 0.0);
        }
        assert_eq!(v[0b0110], Correlation::deterministic(&[1, 0], &[0, 1], 2).unwrap());
        assert!(matches!(enumerate_deterministic(4, 4, 3, 1000), Err(Error::VertexCap { count: 6561, cap: 1000 })));
    }

    #[test]
    fn vertices_and_uniform_are_inside() {
        for (idx, v) in enumerate_deterministic(2, 2, 2, DEFAULT_MAX_VERTICES).unwrap().iter().enumerate() {
            match is_local(v, 1e-9, DEFAULT_MAX_VERTICES).unwrap() {
                MembershipVerdict::Inside { weights, reconstruction_error } => {
                    assert_eq!(weights, vec![VertexWeight { vertex: idx, weight: 1.0 }]);
                    assert!(reconstruction_error <= 1e-12);
                }
                other => panic!("{other:?}"),
            }
        }
        let u = Correlation::uniform(2, 3, 2).unwrap();
        assert_eq!(is_local(&u, 1e-9, DEFAULT_MAX_VERTICES).unwrap().inside(), Some(true));
    }

    #[test]
    fn chsh_rep_values() {
        let rep = chsh_optimal_rep();
        rep.validate().unwrap();
        let p = rep.eval().unwrap();
        let marg = p.marginals(1e-12);
        assert!(marg.alice.iter().chain(&marg.bob).flatten().all(|v| (v - 0.5).abs() < 1e-12));
        let f = chsh_game_functional();
        assert!((bell_value(&p, &f).unwrap() - CHSH_QUANTUM).abs() < 1e-12);
        assert!((bell_value(&Correlation::uniform(2, 2, 2).unwrap(), &f).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(bell_value(&Correlation::pr_box(), &f).unwrap(), 1.0);
        assert_eq!(f.classical_bound(16).unwrap(), 0.75);
        assert_eq!(bell_value(&p, &BellFunctional::zero(2, 2, 2, 0.3).unwrap()).unwrap(), 0.3);
    }

    #[test]
    fn chsh_correlation_is_outside() {
        let p = chsh_optimal_rep().eval().unwrap();
        match is_local(&p, 1e-9, DEFAULT_MAX_VERTICES).unwrap() {
            MembershipVerdict::Outside { certificate } => {
                let vertices = enumerate_deterministic(2, 2, 2, 16).unwrap();
                let remax = vertices
                    .iter()
                    .map(|v| bell_value(v, &certificate.functional).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((remax - certificate.classical_bound).abs() < 1e-12);
                assert!(certificate.achieved_value > remax + SEPARATION_MARGIN);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(is_local(&Correlation::pr_box(), 1e-9, 16).unwrap().inside(), Some(false));
    }

    #[test]
    fn verdict_json_round_trips() {
        let p = chsh_optimal_rep().eval().unwrap();
        for verdict in [
            is_local(&p, 1e-9, 16).unwrap(),
            is_local(&Correlation::uniform(2, 2, 2).unwrap(), 1e-9, 16).unwrap(),
            MembershipVerdict::Indeterminate { reason: "test".into() },
        ] {
            let s = serde_json::to_string(&verdict).unwrap();
            let back: MembershipVerdict = serde_json::from_str(&s).unwrap();
            assert_eq!(back, verdict, "{s}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn mixtures_of_inside_points_stay_inside(a in 0usize..16, b in 0usize..16, raw in proptest::collection::vec(0.0f64..1.0, 16), w in 0.0f64..1.0) {
            let vertices = enumerate_deterministic(2, 2, 2, 16).unwrap();
            let s: f64 = raw.iter().sum::<f64>().max(1e-9);
            let mixed = Correlation::convex_combine(&vertices, &raw.iter().map(|r| r / s).collect::<Vec<_>>()).unwrap();
            let p = Correlation::convex_combine(&[vertices[a].clone(), vertices[b].clone()], &[w, 1.0 - w]).unwrap();
            for q in [&mixed, &p] {
                prop_assert_eq!(is_local(q, 1e-9, 16).unwrap().inside(), Some(true));
            }
            let combo = Correlation::convex_combine(&[mixed, p], &[w, 1.0 - w]).unwrap();
            prop_assert_eq!(is_local(&combo, 1e-9, 16).unwrap().inside(), Some(true));
        }
    }
}
