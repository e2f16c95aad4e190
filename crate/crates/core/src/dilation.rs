//! POVM evaluation, dilation of commuting rational-spectrum POVMs to PVMs,
//! and rounding of spectra to rationals.
//!
//! A commuting family with shared eigenvectors `v_k` and eigenvalues
//! `n_{k,i} / N` is dilated onto `C^d ⊗ C^N` as
//! `E_i = Σ_k |v_k⟩⟨v_k| ⊗ G_{k,i}`, where `G_{k,i}` projects onto `n_{k,i}`
//! consecutive basis vectors of `C^N`. Every dilated family gets its own
//! ancilla factor (its "slot"), Alice's inputs first, then Bob's; all other
//! operators act as the identity there.
//!
//! Because the dimension is `d · Π N`, [`DilatedRep`] keeps this factored
//! form and evaluates the correlation from the spectral data directly.
//! [`DilatedRep::materialize`] builds the dense [`MaxEntRep`] when it fits.

use rand::Rng;
use serde::Serialize;

use crate::correlation::Correlation;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, SimultaneousEigen};
use crate::operators::{HermMatrix, MaxEntRep, MeasureKind, OperatorMeasure};
use crate::rational::{self, RationalWeight};
use crate::rng;
use crate::FLOAT_TOL;

/// Eigenvalues within this distance of a rational are snapped to it.
pub const SNAP_TOL: f64 = 1e-9;

const BASIS_TOL: f64 = 1e-10;

/// `p(i,j|x,y) = Tr(P_{x,i} Q_{y,j}) / d` for POVMs (PVMs are accepted too).
pub fn eval_almost_max_ent(rep: &MaxEntRep) -> Result<Correlation> {
    rep.clone().with_kind(MeasureKind::Povm).validate()?;
    Ok(rep.trace_formula())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutationCheck {
    pub commuting: bool,
    /// Largest entry of any commutator `[M_i, M_j]`.
    pub worst: f64,
}

pub fn check_pairwise_commuting(m: &OperatorMeasure, tol: f64) -> CommutationCheck {
    let worst = linalg::worst_commutator(&m.matrices());
    CommutationCheck { commuting: worst <= tol, worst }
}

/// A commuting measure in spectral form: element `i` is
/// `Σ_k (n_{k,i} / N) |v_k⟩⟨v_k|` with `v_k` the columns of `basis`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralFamily {
    #[serde(skip)]
    basis: CMat,
    #[serde(rename = "N")]
    den: u64,
    /// `numerators[k][i]`; each row sums to `N` exactly.
    numerators: Vec<Vec<u64>>,
}

impl SpectralFamily {
    pub fn new(basis: CMat, den: u64, numerators: Vec<Vec<u64>>) -> Result<Self> {
        let d = basis.nrows();
        if basis.ncols() != d || numerators.len() != d || d == 0 {
            return Err(Error::Shape(format!("basis {}x{} with {} spectral rows", d, basis.ncols(), numerators.len())));
        }
        let m = numerators[0].len();
        if m == 0 || numerators.iter().any(|row| row.len() != m) {
            return Err(Error::Shape("spectral rows differ in length".into()));
        }
        if den == 0 {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        for (k, row) in numerators.iter().enumerate() {
            let s: u128 = row.iter().map(|&n| n as u128).sum();
            if s != den as u128 {
                return Err(Error::InvalidInput(format!("eigenvalues at basis vector {k} sum to {s}/{den}, not 1")));
            }
        }
        let residual = linalg::unitarity_residual(&basis);
        if residual > BASIS_TOL {
            return Err(Error::Numerical(format!("eigenbasis unitarity residual {residual:e}")));
        }
        Ok(Self { basis, den, numerators })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn outcomes(&self) -> usize {
        self.numerators[0].len()
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn numerators(&self) -> &[Vec<u64>] {
        &self.numerators
    }

    /// The eigenvalues of element `i`, one per basis vector.
    pub fn eigenvalues(&self, i: usize) -> Vec<RationalWeight> {
        self.numerators.iter().map(|row| RationalWeight::new(row[i], self.den).expect("den > 0")).collect()
    }

    fn weight(&self, k: usize, i: usize) -> f64 {
        self.numerators[k][i] as f64 / self.den as f64
    }

    /// The POVM `V diag(n_{·,i} / N) V*`.
    pub fn to_measure(&self) -> OperatorMeasure {
        let d = self.dim();
        let elements = (0..self.outcomes())
            .map(|i| {
                let mut a = CMat::zeros(d, d);
                for k in 0..d {
                    let v = self.basis.column(k);
                    a += (&v * v.adjoint()).scale(self.weight(k, i));
                }
                HermMatrix::from_hermitian_unchecked(linalg::hermitian_part(&a))
            })
            .collect();
        OperatorMeasure::new(elements, MeasureKind::Povm).expect("uniform dimension")
    }

    /// The projection `Σ_k |v_k⟩⟨v_k|` over those `k` whose block
    /// `G_{k,i}` contains ancilla basis vector `g`.
    fn slice(&self, i: usize, g: u64) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (k, row) in self.numerators.iter().enumerate() {
            let start: u64 = row[..i].iter().sum();
            if (start..start + row[i]).contains(&g) {
                let v = self.basis.column(k);
                out += &v * v.adjoint();
            }
        }
        out
    }
}

fn povm_checked(m: &OperatorMeasure) -> Result<()> {
    let report = m.clone().with_kind(MeasureKind::Povm).validate();
    if report.ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("not a POVM: {:?} (worst residual {:e})", report.failures, report.worst_residual())))
    }
}

fn diagonalize(m: &OperatorMeasure, seed: u64) -> Result<SimultaneousEigen> {
    let check = check_pairwise_commuting(m, FLOAT_TOL);
    if !check.commuting {
        return Err(Error::NonCommuting { worst: check.worst });
    }
    linalg::simultaneous_diagonalize(&m.matrices(), seed)
}

fn snap(eig: SimultaneousEigen, max_den: u64) -> Result<SpectralFamily> {
    let mut snapped = Vec::with_capacity(eig.values.len());
    for row in &eig.values {
        let mut out = Vec::with_capacity(row.len());
        for (i, &v) in row.iter().enumerate() {
            let r = rational::best_rational(v, max_den);
            if (r.to_f64() - v).abs() > SNAP_TOL {
                return Err(Error::IrrationalSpectrum { value: v, element: i, max_den });
            }
            out.push(r);
        }
        snapped.push(out);
    }
    let all: Vec<RationalWeight> = snapped.iter().flatten().copied().collect();
    let den = rational::common_denominator(&all)?;
    let numerators = snapped.iter().map(|row| row.iter().map(|r| r.num() * (den / r.den())).collect()).collect();
    SpectralFamily::new(eig.basis, den, numerators)
}

/// Simultaneously diagonalizes `m` and snaps every eigenvalue to the nearest
/// rational with denominator at most `max_den`, failing if one is farther
/// than [`SNAP_TOL`].
pub fn rational_spectrum(m: &OperatorMeasure, max_den: u64, seed: u64) -> Result<SpectralFamily> {
    povm_checked(m)?;
    snap(diagonalize(m, seed)?, max_den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationOptions {
    /// Largest denominator accepted when snapping or rounding a spectrum.
    pub max_den: u64,
    /// Dimension cap for dense output.
    pub max_dim: usize,
    /// Seeds the simultaneous diagonalizations.
    pub seed: u64,
}

impl Default for DilationOptions {
    fn default() -> Self {
        Self { max_den: 1000, max_dim: crate::constructions::DEFAULT_MAX_DIM, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DilatedMeasure {
    /// Already projective; acts on the base factor only.
    Kept(OperatorMeasure),
    /// Replaced by `Σ_k |v_k⟩⟨v_k| ⊗ G_{k,i}` on ancilla factor `slot`.
    Dilated { slot: usize, family: SpectralFamily },
}

/// A PVM rep on `C^d ⊗ C^{N_0} ⊗ ... ⊗ C^{N_{S-1}}` in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatedRep {
    d: usize,
    m: usize,
    slots: Vec<u64>,
    alice: Vec<DilatedMeasure>,
    bob: Vec<DilatedMeasure>,
}

enum Plan {
    Keep(OperatorMeasure),
    Spectral(SpectralFamily),
}

impl DilatedRep {
    fn assemble(d: usize, m: usize, alice: Vec<Plan>, bob: Vec<Plan>) -> Self {
        let mut slots = Vec::new();
        let mut place = |plans: Vec<Plan>| -> Vec<DilatedMeasure> {
            plans
                .into_iter()
                .map(|p| match p {
                    Plan::Keep(meas) => DilatedMeasure::Kept(meas.with_kind(MeasureKind::Pvm)),
                    Plan::Spectral(family) => {
                        slots.push(family.den);
                        DilatedMeasure::Dilated { slot: slots.len() - 1, family }
                    }
                })
                .collect()
        };
        let alice = place(alice);
        let bob = place(bob);
        Self { d, m, slots, alice, bob }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `N` of every ancilla factor, in slot order.
    pub fn slot_dens(&self) -> &[u64] {
        &self.slots
    }

    pub fn alice(&self) -> &[DilatedMeasure] {
        &self.alice
    }

    pub fn bob(&self) -> &[DilatedMeasure] {
        &self.bob
    }

    /// `d · Π N`, or `None` on `u128` overflow.
    pub fn dimension(&self) -> Option<u128> {
        self.slots.iter().try_fold(self.d as u128, |acc, &n| acc.checked_mul(n as u128))
    }

    /// Checks the PVM invariants in factored form: kept measures validate as
    /// PVMs, eigenbases are unitary within `1e-10`, every spectral row sums
    /// to its `N` exactly and each slot is used by exactly one family.
    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.slots.len()];
        for meas in self.alice.iter().chain(&self.bob) {
            match meas {
                DilatedMeasure::Kept(om) => {
                    let r = om.clone().with_kind(MeasureKind::Pvm).validate();
                    if !r.ok {
                        return Err(Error::InvalidInput(format!("kept measure is not a PVM: {:?}", r.failures)));
                    }
                }
                DilatedMeasure::Dilated { slot, family } => {
                    if *slot >= self.slots.len() || used[*slot] || self.slots[*slot] != family.den {
                        return Err(Error::InvalidInput(format!("slot {slot} inconsistent")));
                    }
                    used[*slot] = true;
                    SpectralFamily::new(family.basis.clone(), family.den, family.numerators.clone())?;
                }
            }
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidInput("unused ancilla slot".into()));
        }
        Ok(())
    }

    /// The correlation of the dilated rep, evaluated from the factored form:
    /// the ancilla trace of `G_{k,i}` contributes `n_{k,i} / N`, and two
    /// dilated families on different slots contribute the overlaps
    /// `|⟨v_k|w_l⟩|²` of their eigenbases.
    pub fn eval(&self) -> Correlation {
        let d = self.d as f64;
        let m = self.m;
        let cell = |a: &DilatedMeasure, b: &DilatedMeasure| -> Vec<f64> {
            let mut out = vec![0.0; m * m];
            match (a, b) {
                (DilatedMeasure::Kept(e), DilatedMeasure::Kept(f)) => {
                    for i in 0..m {
                        for j in 0..m {
                            out[i * m + j] = linalg::trace_of_product(e.element(i).matrix(), f.element(j).matrix()).re;
                        }
                    }
                }
                (DilatedMeasure::Dilated { family, .. }, DilatedMeasure::Kept(kept))
                | (DilatedMeasure::Kept(kept), DilatedMeasure::Dilated { family, .. }) => {
                    let family_first = matches!(a, DilatedMeasure::Dilated { .. });
                    let v = &family.basis;
                    for (kept_idx, el) in kept.elements().iter().enumerate() {
                        let diag = (v.adjoint() * el.matrix() * v).diagonal();
                        for fam_idx in 0..m {
                            let s: f64 = (0..self.d).map(|k| family.weight(k, fam_idx) * diag[k].re).sum();
                            let (i, j) = if family_first { (fam_idx, kept_idx) } else { (kept_idx, fam_idx) };
                            out[i * m + j] = s;
                        }
                    }
                }
                (DilatedMeasure::Dilated { family: fa, .. }, DilatedMeasure::Dilated { family: fb, .. }) => {
                    let overlap = fa.basis.adjoint() * &fb.basis;
                    for i in 0..m {
                        for j in 0..m {
                            let mut s = 0.0;
                            for k in 0..self.d {
                                let wk = fa.weight(k, i);
                                if wk == 0.0 {
                                    continue;
                                }
                                for l in 0..self.d {
                                    s += overlap[(k, l)].norm_sqr() * wk * fb.weight(l, j);
                                }
                            }
                            out[i * m + j] = s;
                        }
                    }
                }
            }
            out
        };
        let blocks: Vec<Vec<f64>> =
            self.alice.iter().flat_map(|a| self.bob.iter().map(move |b| (a, b))).map(|(a, b)| cell(a, b)).collect();
        let n_b = self.bob.len();
        Correlation::from_fn(self.alice.len(), n_b, m, |x, y, i, j| {
            let v = blocks[x * n_b + y][i * m + j] / d;
            if v < 0.0 && v > -1e-10 {
                0.0
            } else {
                v
            }
        })
        .expect("rep shape is positive")
    }

    /// The dense PVM rep, if `d · Π N <= max_dim`.
    pub fn materialize(&self, max_dim: usize) -> Result<MaxEntRep> {
        let cap_err = |needed: u128| Error::DimensionCap {
            needed,
            cap: max_dim,
            context: format!("base dimension {} times family denominators {:?}", self.d, self.slots),
        };
        let total = self.dimension().ok_or_else(|| cap_err(u128::MAX))?;
        if total > max_dim as u128 {
            return Err(cap_err(total));
        }
        let ancilla = (total / self.d as u128) as usize;
        let dense = |meas: &DilatedMeasure| -> Result<OperatorMeasure> {
            let elements = (0..self.m).map(|i| HermMatrix::from_hermitian_unchecked(self.dense_element(meas, i, ancilla))).collect();
            OperatorMeasure::new(elements, MeasureKind::Pvm)
        };
        let alice = self.alice.iter().map(dense).collect::<Result<Vec<_>>>()?;
        let bob = self.bob.iter().map(dense).collect::<Result<Vec<_>>>()?;
        MaxEntRep::new(alice, bob)
    }

    /// Rows and columns are indexed `a · S + α` with `a` the base index and
    /// `α` the ancilla index, slot 0 most significant.
    fn dense_element(&self, meas: &DilatedMeasure, i: usize, ancilla: usize) -> CMat {
        let d = self.d;
        let dim = d * ancilla;
        let mut out = CMat::zeros(dim, dim);
        let mut fill = |alpha: usize, block: &CMat| {
            for a in 0..d {
                for b in 0..d {
                    out[(a * ancilla + alpha, b * ancilla + alpha)] = block[(a, b)];
                }
            }
        };
        match meas {
            DilatedMeasure::Kept(om) => {
                let e = om.element(i).matrix();
                for alpha in 0..ancilla {
                    fill(alpha, e);
                }
            }
            DilatedMeasure::Dilated { slot, family } => {
                let after: u64 = self.slots[slot + 1..].iter().product();
                let slices: Vec<CMat> = (0..family.den).map(|g| family.slice(i, g)).collect();
                for alpha in 0..ancilla {
                    let g = (alpha as u64 / after) % family.den;
                    fill(alpha, &slices[g as usize]);
                }
            }
        }
        out
    }
}

fn family_seed(seed: u64, party: u64, x: usize) -> u64 {
    rng::derive(seed, &[party, x as u64])
}

fn plan_exact(meas: &OperatorMeasure, seed: u64, max_den: u64) -> Result<Plan> {
    povm_checked(meas)?;
    if meas.is_projective() {
        return Ok(Plan::Keep(meas.clone()));
    }
    Ok(Plan::Spectral(snap(diagonalize(meas, seed)?, max_den)?))
}

/// Rounded plan plus whether the spectrum was already rational.
fn plan_rounded(meas: &OperatorMeasure, seed: u64, eps: f64, max_den: u64) -> Result<(Plan, bool)> {
    povm_checked(meas)?;
    if meas.is_projective() {
        return Ok((Plan::Keep(meas.clone()), true));
    }
    let eig = diagonalize(meas, seed)?;
    if let Ok(family) = snap(eig.clone(), max_den) {
        return Ok((Plan::Spectral(family), true));
    }
    let rows: Vec<&[f64]> = eig.values.iter().map(Vec::as_slice).collect();
    let (den, numerators) = rational::common_denominator_rows(&rows, eps / 2.0, max_den)?;
    Ok((Plan::Spectral(SpectralFamily::new(eig.basis, den, numerators)?), false))
}

fn plan_all<T>(rep: &MaxEntRep, seed: u64, f: impl Fn(&OperatorMeasure, u64) -> Result<T>) -> Result<(Vec<T>, Vec<T>)> {
    let run = |party: u64, list: &[OperatorMeasure]| -> Result<Vec<T>> {
        list.iter().enumerate().map(|(x, meas)| f(meas, family_seed(seed, party, x))).collect()
    };
    Ok((run(0, rep.alice())?, run(1, rep.bob())?))
}

/// Dilates every non-projective family of a commuting rational-spectrum
/// POVM rep, keeping the result factored.
pub fn dilate_factored(rep: &MaxEntRep, opts: &DilationOptions) -> Result<DilatedRep> {
    let (alice, bob) = plan_all(rep, opts.seed, |meas, seed| plan_exact(meas, seed, opts.max_den))?;
    Ok(DilatedRep::assemble(rep.d(), rep.m(), alice, bob))
}

/// [`dilate_factored`] materialized as a dense PVM rep of dimension
/// `d · Π N`, subject to `opts.max_dim`.
pub fn dilate_commuting_rational(rep: &MaxEntRep, opts: &DilationOptions) -> Result<MaxEntRep> {
    dilate_factored(rep, opts)?.materialize(opts.max_dim)
}

/// Replaces every eigenvalue of every non-projective family by a rational
/// within `eps / 2` (a common denominator per family, rows summing to one
/// exactly), so the correlation moves by less than `eps`. Families whose
/// spectrum is already rational with denominator at most `max_den` are
/// returned unchanged.
pub fn round_to_rational_spectrum(rep: &MaxEntRep, eps: f64, opts: &DilationOptions) -> Result<MaxEntRep> {
    check_eps(eps)?;
    let (alice, bob) = plan_all(rep, opts.seed, |meas, seed| {
        let (plan, unchanged) = plan_rounded(meas, seed, eps, opts.max_den)?;
        Ok(match plan {
            _ if unchanged => meas.clone().with_kind(MeasureKind::Povm),
            Plan::Spectral(family) => family.to_measure(),
            Plan::Keep(_) => unreachable!("kept families are unchanged"),
        })
    })?;
    MaxEntRep::new(alice, bob)
}

/// Rounds as [`round_to_rational_spectrum`] and dilates the rounded
/// families directly, without re-diagonalizing.
pub fn round_and_dilate(rep: &MaxEntRep, eps: f64, opts: &DilationOptions) -> Result<DilatedRep> {
    check_eps(eps)?;
    let (alice, bob) = plan_all(rep, opts.seed, |meas, seed| Ok(plan_rounded(meas, seed, eps, opts.max_den)?.0))?;
    Ok(DilatedRep::assemble(rep.d(), rep.m(), alice, bob))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("eps must be positive, got {eps}")))
    }
}

/// A POVM with Haar-random eigenbasis and rational spectrum: one denominator
/// `N` drawn from `1..=max_den`, and for each basis vector a uniformly random
/// split of `N` into `m` parts.
pub fn random_commuting_povm(d: usize, m: usize, max_den: u64, seed: u64) -> Result<OperatorMeasure> {
    if d == 0 || m == 0 || max_den == 0 {
        return Err(Error::InvalidInput("d, m and max_den must be positive".into()));
    }
    let mut r = rng::stream(seed, 0);
    let basis = linalg::haar_unitary(d, &mut r);
    let den = r.random_range(1..=max_den);
    let numerators = (0..d)
        .map(|_| {
            let mut cuts: Vec<u64> = (0..m - 1).map(|_| r.random_range(0..=den)).collect();
            cuts.sort_unstable();
            cuts.push(den);
            let mut prev = 0;
            cuts.iter()
                .map(|&cut| {
                    let part = cut - prev;
                    prev = cut;
                    part
                })
                .collect()
        })
        .collect();
    Ok(SpectralFamily::new(basis, den, numerators)?.to_measure())
}

/// A POVM rep whose measures all come from [`random_commuting_povm`].
pub fn random_commuting_rep(n_a: usize, n_b: usize, m: usize, d: usize, max_den: u64, seed: u64) -> Result<MaxEntRep> {
    let make = |party: u64, count: usize| -> Result<Vec<OperatorMeasure>> {
        (0..count).map(|x| random_commuting_povm(d, m, max_den, family_seed(seed, party, x))).collect()
    };
    MaxEntRep::new(make(0, n_a)?, make(1, n_b)?)
}

/// A two-outcome POVM rep: `P_0 = V diag(λ) V*` with Haar `V` and `λ`
/// uniform in `[0, 1]`, and `P_1 = I - P_0`.
pub fn random_binary_povm_rep(n_a: usize, n_b: usize, d: usize, seed: u64) -> Result<MaxEntRep> {
    if d == 0 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    let make = |party: u64, count: usize| -> Result<Vec<OperatorMeasure>> {
        (0..count)
            .map(|x| {
                let mut r = rng::stream(family_seed(seed, party, x), 0);
                let v = linalg::haar_unitary(d, &mut r);
                let lambda: Vec<f64> = (0..d).map(|_| r.random_range(0.0..=1.0)).collect();
                let element = |vals: Vec<f64>| {
                    let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(d, vals.into_iter().map(|l| c(l, 0.0))));
                    HermMatrix::from_hermitian_unchecked(linalg::hermitian_part(&(&v * diag * v.adjoint())))
                };
                let p1 = lambda.iter().map(|l| 1.0 - l).collect();
                OperatorMeasure::new(vec![element(lambda), element(p1)], MeasureKind::Povm)
            })
            .collect()
    };
    MaxEntRep::new(make(0, n_a)?, make(1, n_b)?)
}
