use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::json::Sig17;
use crate::linalg::{self, c, CMat, C64};
use crate::rng;
use crate::{EXACT_TOL, FLOAT_TOL};

/// A Hermitian `d x d` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix(CMat);

impl HermMatrix {
    /// Accepts `a` if it is square and Hermitian within `1e-12`; the stored
    /// matrix is the exact Hermitian part.
    pub fn new(a: CMat) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::Shape(format!("{}x{} matrix is not square and nonempty", a.nrows(), a.ncols())));
        }
        let r = linalg::hermitian_residual(&a);
        if r > EXACT_TOL {
            return Err(Error::InvalidInput(format!("matrix is not Hermitian (residual {r:e})")));
        }
        Ok(Self(linalg::hermitian_part(&a)))
    }

    pub(crate) fn from_hermitian_unchecked(a: CMat) -> Self {
        Self(a)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMat::from_fn(n, n, |j, k| if j == k { c(diag[j], 0.0) } else { c(0.0, 0.0) }))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("rows of unequal length".into()));
        }
        Self::new(CMat::from_fn(n, n, |j, k| c(rows[j][k], 0.0)))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMat::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMat::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// `(W A W*)`, kept Hermitian.
    pub fn conjugate_by(&self, w: &CMat) -> Self {
        Self(linalg::hermitian_part(&(w * &self.0 * w.adjoint())))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }
}

impl Serialize for HermMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let rows: Vec<Vec<[Sig17; 2]>> =
            (0..n).map(|j| (0..n).map(|k| [Sig17(self.0[(j, k)].re), Sig17(self.0[(j, k)].im)]).collect()).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HermMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom(format!("matrix with {n} rows is not square")));
        }
        let a = CMat::from_fn(n, n, |j, k| c(rows[j][k][0], rows[j][k][1]));
        HermMatrix::new(a).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Pvm,
    Povm,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Pvm => "PVM",
            MeasureKind::Povm => "POVM",
        }
    }
}

/// An ordered list of `m` Hermitian `d x d` matrices, declared either a
/// projection-valued or a positive operator-valued measure.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMeasure {
    kind: MeasureKind,
    elements: Vec<HermMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureFailure {
    /// `sum_i E_i` differs from the identity.
    Completeness,
    /// Some POVM element has a negative eigenvalue below `-1e-9`.
    Positivity,
    /// Some PVM element fails `||E^2 - E||_max <= 1e-9`.
    Idempotence,
}

/// Outcome of [`OperatorMeasure::validate`]; every residual is reported so
/// callers can see how close a failing measure is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub ok: bool,
    pub kind: MeasureKind,
    pub failures: Vec<MeasureFailure>,
    pub completeness_residual: f64,
    /// Smallest eigenvalue over all elements (POVM only).
    pub min_eigenvalue: Option<f64>,
    /// Largest `||E^2 - E||_max` over all elements (PVM only).
    pub idempotence_residual: Option<f64>,
}

impl MeasureReport {
    /// The largest residual among those checked.
    pub fn worst_residual(&self) -> f64 {
        let mut w = self.completeness_residual;
        if let Some(e) = self.min_eigenvalue {
            w = w.max(-e);
        }
        if let Some(r) = self.idempotence_residual {
            w = w.max(r);
        }
        w
    }
}

impl OperatorMeasure {
    pub fn new(elements: Vec<HermMatrix>, kind: MeasureKind) -> Result<Self> {
        let d = elements.first().ok_or_else(|| Error::Shape("a measure needs at least one element".into()))?.dim();
        if elements.iter().any(|e| e.dim() != d) {
            return Err(Error::Shape("measure elements differ in dimension".into()));
        }
        Ok(Self { kind, elements })
    }

    /// The measure `{ diag(1,0,...), diag(0,1,...), ... }` assigning basis
    /// vector `k` to outcome `outcomes[k]`.
    pub fn diagonal_pvm(outcomes: &[usize], m: usize) -> Result<Self> {
        if outcomes.iter().any(|&o| o >= m) {
            return Err(Error::InvalidInput(format!("outcome index out of range for m={m}")));
        }
        let elements = (0..m)
            .map(|i| HermMatrix::from_real_diagonal(&outcomes.iter().map(|&o| f64::from(o == i)).collect::<Vec<_>>()))
            .collect();
        Self::new(elements, MeasureKind::Pvm)
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn elements(&self) -> &[HermMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &HermMatrix {
        &self.elements[i]
    }

    pub fn matrices(&self) -> Vec<CMat> {
        self.elements.iter().map(|e| e.matrix().clone()).collect()
    }

    pub fn with_kind(mut self, kind: MeasureKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn map(&self, f: impl Fn(&HermMatrix) -> HermMatrix) -> Self {
        Self { kind: self.kind, elements: self.elements.iter().map(f).collect() }
    }

    pub fn validate(&self) -> MeasureReport {
        let d = self.dim();
        let mut sum = CMat::zeros(d, d);
        for e in &self.elements {
            sum += e.matrix();
        }
        let completeness_residual = linalg::max_abs(&(sum - CMat::identity(d, d)));
        let mut failures = Vec::new();
        if completeness_residual > FLOAT_TOL {
            failures.push(MeasureFailure::Completeness);
        }
        let (mut min_eigenvalue, mut idempotence_residual) = (None, None);
        match self.kind {
            MeasureKind::Povm => {
                let mut lo = f64::INFINITY;
                for e in &self.elements {
                    match linalg::herm_eigen(e.matrix()) {
                        Ok(eig) => lo = lo.min(eig.values[0]),
                        Err(_) => lo = f64::NEG_INFINITY,
                    }
                }
                if lo < -FLOAT_TOL {
                    failures.push(MeasureFailure::Positivity);
                }
                min_eigenvalue = Some(lo);
            }
            MeasureKind::Pvm => {
                let worst = self
                    .elements
                    .iter()
                    .map(|e| linalg::max_abs(&(e.matrix() * e.matrix() - e.matrix())))
                    .fold(0.0, f64::max);
                if worst > FLOAT_TOL {
                    failures.push(MeasureFailure::Idempotence);
                }
                idempotence_residual = Some(worst);
            }
        }
        MeasureReport {
            ok: failures.is_empty(),
            kind: self.kind,
            failures,
            completeness_residual,
            min_eigenvalue,
            idempotence_residual,
        }
    }

    /// Whether the elements satisfy the PVM invariants, regardless of the
    /// declared kind.
    pub fn is_projective(&self) -> bool {
        self.clone().with_kind(MeasureKind::Pvm).validate().ok
    }

    /// A PVM whose `i`-th element has rank `ranks[i]`: consecutive diagonal
    /// projections conjugated by a Haar-random unitary drawn from `seed`.
    pub fn random_pvm(d: usize, ranks: &[usize], seed: u64) -> Result<Self> {
        let total: usize = ranks.iter().sum();
        if total != d || ranks.is_empty() {
            return Err(Error::InvalidInput(format!("ranks {ranks:?} must sum to d={d}")));
        }
        let u = linalg::haar_unitary(d, &mut rng::stream(seed, 0));
        let mut start = 0;
        let elements = ranks
            .iter()
            .map(|&r| {
                let diag: Vec<C64> = (0..d).map(|k| c(f64::from(u8::from(k >= start && k < start + r)), 0.0)).collect();
                start += r;
                let p = CMat::from_diagonal(&nalgebra::DVector::from_vec(diag));
                HermMatrix::from_hermitian_unchecked(linalg::hermitian_part(&(&u * p * u.adjoint())))
            })
            .collect();
        Self::new(elements, MeasureKind::Pvm)
    }
}

impl Serialize for OperatorMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.elements.serialize(serializer)
    }
}
