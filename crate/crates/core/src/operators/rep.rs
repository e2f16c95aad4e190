use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use super::measure::{HermMatrix, MeasureKind, OperatorMeasure};
use crate::correlation::Correlation;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Operator measures for both parties at a common dimension `d`, evaluated
/// through `p(i,j|x,y) = Tr(A_{x,i} B_{y,j}) / d`.
///
/// Bob's operators are stored in canonical form, i.e. already transposed with
/// respect to the Schmidt basis of the maximally entangled state, so no
/// transpose appears in the evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxEntRep {
    d: usize,
    m: usize,
    kind: MeasureKind,
    alice: Vec<OperatorMeasure>,
    bob: Vec<OperatorMeasure>,
}

impl MaxEntRep {
    /// Structural checks only: every measure has dimension `d`, `m` outcomes
    /// and the same kind. Use [`MaxEntRep::validate`] for the measure
    /// invariants.
    pub fn new(alice: Vec<OperatorMeasure>, bob: Vec<OperatorMeasure>) -> Result<Self> {
        let first = alice.first().ok_or_else(|| Error::Shape("Alice needs at least one measure".into()))?;
        if bob.is_empty() {
            return Err(Error::Shape("Bob needs at least one measure".into()));
        }
        let (d, m, kind) = (first.dim(), first.outcomes(), first.kind());
        for meas in alice.iter().chain(&bob) {
            if meas.dim() != d || meas.outcomes() != m {
                return Err(Error::Shape(format!(
                    "measure of dimension {} with {} outcomes in a rep with d={d}, m={m}",
                    meas.dim(),
                    meas.outcomes()
                )));
            }
            if meas.kind() != kind {
                return Err(Error::InvalidInput("measures of mixed kind in one rep".into()));
            }
        }
        Ok(Self { d, m, kind, alice, bob })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_a(&self) -> usize {
        self.alice.len()
    }

    pub fn n_b(&self) -> usize {
        self.bob.len()
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn alice(&self) -> &[OperatorMeasure] {
        &self.alice
    }

    pub fn bob(&self) -> &[OperatorMeasure] {
        &self.bob
    }

    /// Re-declares every measure with `kind` (no validation).
    pub fn with_kind(self, kind: MeasureKind) -> Self {
        let relabel = |v: Vec<OperatorMeasure>| v.into_iter().map(|m| m.with_kind(kind)).collect();
        Self { kind, alice: relabel(self.alice), bob: relabel(self.bob), ..self }
    }

    /// Validates every measure; returns the first failure with its location.
    pub fn validate(&self) -> Result<()> {
        for (party, list) in [("alice", &self.alice), ("bob", &self.bob)] {
            for (x, meas) in list.iter().enumerate() {
                let r = meas.validate();
                if !r.ok {
                    return Err(Error::InvalidInput(format!(
                        "{party}[{x}] fails {} validation: {:?} (worst residual {:e})",
                        meas.kind().name(),
                        r.failures,
                        r.worst_residual()
                    )));
                }
            }
        }
        Ok(())
    }

    /// `Tr(A_{x,i} B_{y,j}) / d` for every index; entries in `(-1e-10, 0)`
    /// are clamped to zero.
    pub(crate) fn trace_formula(&self) -> Correlation {
        let d = self.d as f64;
        Correlation::from_fn(self.n_a(), self.n_b(), self.m, |x, y, i, j| {
            let v = linalg::trace_of_product(self.alice[x].element(i).matrix(), self.bob[y].element(j).matrix()).re / d;
            if v < 0.0 && v > -1e-10 {
                0.0
            } else {
                v
            }
        })
        .expect("rep shape is positive")
    }

    /// Evaluates a PVM rep.
    pub fn eval(&self) -> Result<Correlation> {
        if self.kind != MeasureKind::Pvm {
            return Err(Error::KindMismatch { expected: "PVM" });
        }
        Ok(self.trace_formula())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("finite entries serialize")
    }

    /// The same rep with each operator replaced by `f(operator)`.
    pub fn map_operators(&self, f: impl Fn(&HermMatrix) -> HermMatrix) -> Result<Self> {
        let apply = |v: &[OperatorMeasure]| v.iter().map(|m| m.map(&f)).collect();
        Self::new(apply(&self.alice), apply(&self.bob))
    }

    /// A PVM rep with Haar-random measures; each measure's ranks come from
    /// assigning every basis vector a uniformly random outcome.
    pub fn random(n_a: usize, n_b: usize, m: usize, d: usize, seed: u64) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::InvalidInput("m and d must be positive".into()));
        }
        let make = |party: u64, count: usize| -> Result<Vec<OperatorMeasure>> {
            (0..count)
                .map(|x| {
                    let sub = rng::derive(seed, &[party, x as u64]);
                    let mut r = rng::stream(sub, 1);
                    let mut ranks = vec![0; m];
                    for _ in 0..d {
                        ranks[r.random_range(0..m)] += 1;
                    }
                    OperatorMeasure::random_pvm(d, &ranks, sub)
                })
                .collect()
        };
        Self::new(make(0, n_a)?, make(1, n_b)?)
    }
}

#[derive(Deserialize)]
struct RawRep {
    d: usize,
    m: usize,
    #[serde(default)]
    kind: Option<MeasureKind>,
    alice: Vec<Vec<HermMatrix>>,
    bob: Vec<Vec<HermMatrix>>,
}

impl<'de> Deserialize<'de> for MaxEntRep {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawRep::deserialize(deserializer)?;
        let build = |lists: Vec<Vec<HermMatrix>>, kind: MeasureKind| {
            lists.into_iter().map(|els| OperatorMeasure::new(els, kind)).collect::<Result<Vec<_>>>()
        };
        let kind = match raw.kind {
            Some(k) => k,
            None => {
                // infer: PVM when every measure is projective
                let probe = build(raw.alice.clone(), MeasureKind::Pvm)
                    .and_then(|a| Ok((a, build(raw.bob.clone(), MeasureKind::Pvm)?)))
                    .map_err(D::Error::custom)?;
                if probe.0.iter().chain(&probe.1).all(|m| m.validate().ok) {
                    MeasureKind::Pvm
                } else {
                    MeasureKind::Povm
                }
            }
        };
        let alice = build(raw.alice, kind).map_err(D::Error::custom)?;
        let bob = build(raw.bob, kind).map_err(D::Error::custom)?;
        let rep = MaxEntRep::new(alice, bob).map_err(D::Error::custom)?;
        if rep.d != raw.d || rep.m != raw.m {
            return Err(D::Error::custom(format!(
                "declared d={}, m={} but operators have d={}, m={}",
                raw.d, raw.m, rep.d, rep.m
            )));
        }
        Ok(rep)
    }
}
