use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::measure::{HermMatrix, MeasureKind, OperatorMeasure};
use super::rep::MaxEntRep;
use crate::correlation::Correlation;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::json::Sig17;
use crate::{EXACT_TOL, FLOAT_TOL};

const SCHMIDT_DROP: f64 = 1e-12;

/// A general finite-dimensional representation: measures on `C^{d_a}` and
/// `C^{d_b}` and a unit vector in `C^{d_a} ⊗ C^{d_b}` stored in the
/// lexicographic product basis (`state[a * d_b + b]`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateRep {
    d_a: usize,
    d_b: usize,
    alice: Vec<OperatorMeasure>,
    bob: Vec<OperatorMeasure>,
    state: Vec<C64>,
}

/// `state = sum_k coefficients[k] * left[k] ⊗ right[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtForm {
    /// Strictly positive, descending.
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub left_basis: Vec<DVector<C64>>,
    #[serde(skip)]
    pub right_basis: Vec<DVector<C64>>,
}

impl SchmidtForm {
    pub fn reconstruct(&self) -> Vec<C64> {
        let da = self.left_basis.first().map_or(0, |v| v.len());
        let db = self.right_basis.first().map_or(0, |v| v.len());
        let mut out = vec![C64::new(0.0, 0.0); da * db];
        for ((alpha, u), f) in self.coefficients.iter().zip(&self.left_basis).zip(&self.right_basis) {
            for a in 0..da {
                for b in 0..db {
                    out[a * db + b] += u[a] * f[b] * *alpha;
                }
            }
        }
        out
    }
}

fn state_matrix(state: &[C64], d_a: usize, d_b: usize) -> Result<CMat> {
    if d_a == 0 || d_b == 0 || state.len() != d_a * d_b {
        return Err(Error::Shape(format!("state of length {} is not {d_a} x {d_b}", state.len())));
    }
    Ok(CMat::from_fn(d_a, d_b, |a, b| state[a * d_b + b]))
}

fn norm(state: &[C64]) -> f64 {
    state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Schmidt decomposition via the singular value decomposition of the
/// `d_a x d_b` coefficient matrix. Coefficients below `1e-12` are dropped;
/// equal coefficients keep the order produced by the SVD.
pub fn schmidt_decompose(state: &[C64], d_a: usize, d_b: usize) -> Result<SchmidtForm> {
    let mat = state_matrix(state, d_a, d_b)?;
    let n = norm(state);
    if n == 0.0 {
        return Err(Error::InvalidInput("zero vector has no Schmidt decomposition".into()));
    }
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("state has norm {n}, expected 1")));
    }
    let svd = mat.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut form = SchmidtForm { coefficients: vec![], left_basis: vec![], right_basis: vec![] };
    for k in order {
        let s = svd.singular_values[k];
        if s < SCHMIDT_DROP {
            continue;
        }
        // M = U S V*, so state = sum_k s_k u_k ⊗ conj(v_k), and conj(v_k) is row k of V*
        form.coefficients.push(s);
        form.left_basis.push(u.column(k).into_owned());
        form.right_basis.push(v_t.row(k).transpose());
    }
    Ok(form)
}

/// True iff `d_a = d_b = d` and all `d` Schmidt coefficients equal `1/sqrt(d)`
/// within `tol`.
pub fn is_maximally_entangled(state: &[C64], d_a: usize, d_b: usize, tol: f64) -> bool {
    if d_a != d_b {
        return false;
    }
    let Ok(form) = schmidt_decompose(state, d_a, d_b) else {
        return false;
    };
    let target = 1.0 / (d_a as f64).sqrt();
    form.coefficients.len() == d_a && form.coefficients.iter().all(|a| (a - target).abs() <= tol)
}

/// `(1/sqrt(d)) sum_k e_k ⊗ e_k`.
pub fn canonical_max_ent_state(d: usize) -> Vec<C64> {
    let s = 1.0 / (d as f64).sqrt();
    (0..d * d).map(|ab| if ab / d == ab % d { C64::new(s, 0.0) } else { C64::new(0.0, 0.0) }).collect()
}

impl StateRep {
    pub fn new(alice: Vec<OperatorMeasure>, bob: Vec<OperatorMeasure>, state: Vec<C64>) -> Result<Self> {
        let d_a = alice.first().ok_or_else(|| Error::Shape("Alice needs at least one measure".into()))?.dim();
        let d_b = bob.first().ok_or_else(|| Error::Shape("Bob needs at least one measure".into()))?.dim();
        let m = alice[0].outcomes();
        if alice.iter().any(|a| a.dim() != d_a || a.outcomes() != m) || bob.iter().any(|b| b.dim() != d_b || b.outcomes() != m) {
            return Err(Error::Shape("measures disagree on dimension or outcome count".into()));
        }
        if state.len() != d_a * d_b {
            return Err(Error::Shape(format!("state length {} is not {d_a} * {d_b}", state.len())));
        }
        let n = norm(&state);
        if (n - 1.0).abs() > EXACT_TOL {
            return Err(Error::InvalidInput(format!("state has norm {n}, expected 1")));
        }
        Ok(Self { d_a, d_b, alice, bob, state })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn alice(&self) -> &[OperatorMeasure] {
        &self.alice
    }

    pub fn bob(&self) -> &[OperatorMeasure] {
        &self.bob
    }

    pub fn state(&self) -> &[C64] {
        &self.state
    }

    /// `p(i,j|x,y) = <(E_{x,i} ⊗ F_{y,j}) φ, φ>`. With `Φ` the coefficient
    /// matrix of `φ`, `(E ⊗ F) φ` has coefficient matrix `E Φ Fᵀ`.
    pub fn eval(&self) -> Result<Correlation> {
        let phi = state_matrix(&self.state, self.d_a, self.d_b)?;
        let m = self.alice[0].outcomes();
        let mut worst_imag: f64 = 0.0;
        let p = Correlation::from_fn(self.alice.len(), self.bob.len(), m, |x, y, i, j| {
            let e = self.alice[x].element(i).matrix();
            let f = self.bob[y].element(j).matrix();
            let image = e * &phi * f.transpose();
            let z: C64 = phi.iter().zip(image.iter()).map(|(a, b)| a.conj() * b).sum();
            worst_imag = worst_imag.max(z.im.abs());
            if z.re < 0.0 && z.re > -1e-10 {
                0.0
            } else {
                z.re
            }
        })?;
        if worst_imag > 1e-10 {
            return Err(Error::Numerical(format!("expectation has imaginary part {worst_imag:e}")));
        }
        Ok(p)
    }

    /// Moves a maximally entangled representation into canonical form.
    ///
    /// The coefficient matrix of a maximally entangled state is `W / sqrt(d)`
    /// with `W` unitary, so `φ = (1/sqrt(d)) sum_k e_k ⊗ w_k` where `w_k` is
    /// the `k`-th row of `W`. Alice's Schmidt basis is therefore the standard
    /// basis and her operators are unchanged; Bob's basis map is `V = conj(W)`
    /// and his stored operators become `(V F V*)ᵀ`.
    pub fn canonicalize(&self) -> Result<MaxEntRep> {
        if !is_maximally_entangled(&self.state, self.d_a, self.d_b, FLOAT_TOL) {
            return Err(Error::NotMaximallyEntangled("Schmidt coefficients are not all 1/sqrt(d)".into()));
        }
        let d = self.d_a;
        let w = state_matrix(&self.state, d, d)?.scale((d as f64).sqrt());
        let residual = linalg::unitarity_residual(&w);
        if residual > 1e-8 {
            return Err(Error::NotMaximallyEntangled(format!("coefficient matrix is not unitary (residual {residual:e})")));
        }
        let v = w.conjugate();
        let bob = self.bob.iter().map(|meas| meas.map(|f| f.conjugate_by(&v).transpose())).collect();
        MaxEntRep::new(self.alice.clone(), bob)
    }

    /// The state representation of a canonical rep, transported by local
    /// unitaries: state `(U ⊗ V) φ_d`, Alice operators `U A U*` and Bob
    /// operators `V Bᵀ V*`.
    pub fn from_max_ent(rep: &MaxEntRep, u: &CMat, v: &CMat) -> Result<Self> {
        let d = rep.d();
        if u.nrows() != d || v.nrows() != d {
            return Err(Error::Shape("local unitaries must match the rep dimension".into()));
        }
        let phi0 = canonical_max_ent_state(d);
        let mat = state_matrix(&phi0, d, d)?;
        let moved = u * mat * v.transpose();
        let state: Vec<C64> = (0..d * d).map(|ab| moved[(ab / d, ab % d)]).collect();
        let alice = rep.alice().iter().map(|m| m.map(|a| a.conjugate_by(u))).collect();
        let bob = rep.bob().iter().map(|m| m.map(|b| b.transpose().conjugate_by(v))).collect();
        let kind = rep.kind();
        let fix = |list: Vec<OperatorMeasure>| list.into_iter().map(|m| m.with_kind(kind)).collect::<Vec<_>>();
        StateRep::new(fix(alice), fix(bob), normalize(state))
    }

    pub fn kind(&self) -> MeasureKind {
        self.alice[0].kind()
    }
}

impl StateRep {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("finite entries serialize")
    }
}

/// `{"d_a", "d_b", "kind", "alice", "bob", "state"}` with the state as
/// `[re, im]` pairs; `kind` may be omitted on input.
impl Serialize for StateRep {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let state: Vec<[Sig17; 2]> = self.state.iter().map(|z| [Sig17(z.re), Sig17(z.im)]).collect();
        let mut st = serializer.serialize_struct("StateRep", 6)?;
        st.serialize_field("d_a", &self.d_a)?;
        st.serialize_field("d_b", &self.d_b)?;
        st.serialize_field("kind", &self.kind())?;
        st.serialize_field("alice", &self.alice)?;
        st.serialize_field("bob", &self.bob)?;
        st.serialize_field("state", &state)?;
        st.end()
    }
}

#[derive(Deserialize)]
struct RawStateRep {
    d_a: usize,
    d_b: usize,
    #[serde(default)]
    kind: Option<MeasureKind>,
    alice: Vec<Vec<HermMatrix>>,
    bob: Vec<Vec<HermMatrix>>,
    state: Vec<[f64; 2]>,
}

impl<'de> Deserialize<'de> for StateRep {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawStateRep::deserialize(deserializer)?;
        let build = |lists: &[Vec<HermMatrix>], kind: MeasureKind| {
            lists.iter().map(|els| OperatorMeasure::new(els.clone(), kind)).collect::<Result<Vec<_>>>()
        };
        let kind = match raw.kind {
            Some(k) => k,
            None => {
                let probe = build(&raw.alice, MeasureKind::Pvm).and_then(|a| Ok((a, build(&raw.bob, MeasureKind::Pvm)?)));
                let (a, b) = probe.map_err(D::Error::custom)?;
                if a.iter().chain(&b).all(OperatorMeasure::is_projective) {
                    MeasureKind::Pvm
                } else {
                    MeasureKind::Povm
                }
            }
        };
        let alice = build(&raw.alice, kind).map_err(D::Error::custom)?;
        let bob = build(&raw.bob, kind).map_err(D::Error::custom)?;
        let state = raw.state.iter().map(|&[re, im]| C64::new(re, im)).collect();
        let rep = StateRep::new(alice, bob, state).map_err(D::Error::custom)?;
        if rep.d_a != raw.d_a || rep.d_b != raw.d_b {
            return Err(D::Error::custom(format!(
                "declared d_a={}, d_b={} but operators have d_a={}, d_b={}",
                raw.d_a, raw.d_b, rep.d_a, rep.d_b
            )));
        }
        Ok(rep)
    }
}

fn normalize(state: Vec<C64>) -> Vec<C64> {
    let n = norm(&state);
    state.into_iter().map(|z| z / n).collect()
}
