//! Dense complex linear algebra used throughout the crate: a cyclic Jacobi
//! eigensolver for Hermitian matrices, simultaneous diagonalization of
//! commuting families, Haar-random unitaries and a few structural helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |a_jk - conj(a_kj)|`.
pub fn hermitian_residual(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((a[(j, k)] - a[(k, j)].conj()).norm());
        }
    }
    worst
}

/// `(a + a*) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    acc
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Block-diagonal matrix with the given blocks in order.
pub fn block_diag<'a>(blocks: impl IntoIterator<Item = &'a CMat>) -> CMat {
    let blocks: Vec<&CMat> = blocks.into_iter().collect();
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}

/// `k` copies of `a` along the diagonal, i.e. `I_k ⊗ a`.
pub fn repeat_diag(a: &CMat, k: usize) -> CMat {
    block_diag(std::iter::repeat_n(a, k))
}

/// Eigendecomposition `a = V diag(values) V*` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `values`.
    pub vectors: CMat,
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Sweeps pairs `(p, q)` in row order, annihilating each off-diagonal entry
/// with a complex plane rotation, until the off-diagonal Frobenius norm drops
/// below `1e-13` (at most 100 sweeps).
pub fn herm_eigen(a: &CMat) -> Result<HermEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("{}x{} matrix is not square", n, a.ncols())));
    }
    let mut a = hermitian_part(a);
    let mut v = CMat::identity(n, n);

    let off_norm = |a: &CMat| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    s += a[(j, k)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= JACOBI_OFF_TOL;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b < 1e-300 {
                    continue;
                }
                let phase = apq / b; // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 { 1.0 / (tau + (1.0 + tau * tau).sqrt()) } else { -1.0 / (-tau + (1.0 + tau * tau).sqrt()) };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // columns p, q of the rotation: u = (c, -s e^{-i phi}), w = (s e^{i phi}, c)
                let u_q = -phase.conj() * sn;
                let w_p = phase * sn;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * cs + akq * u_q;
                    a[(k, q)] = akp * w_p + akq * cs;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * cs + aqk * u_q.conj();
                    a[(q, k)] = apk * w_p.conj() + aqk * cs;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cs + vkq * u_q;
                    v[(k, q)] = vkp * w_p + vkq * cs;
                }
            }
        }
        sweeps += 1;
        converged = off_norm(&a) <= JACOBI_OFF_TOL;
    }
    if !converged {
        return Err(Error::Numerical(format!("Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, n, |r, col| v[(r, order[col])]);
    Ok(HermEigen { values, vectors })
}

/// A common eigenbasis of a commuting Hermitian family.
#[derive(Debug, Clone)]
pub struct SimultaneousEigen {
    /// Unitary whose columns are the shared eigenvectors `v_k`.
    pub basis: CMat,
    /// `values[k][i] = <v_k, A_i v_k>`.
    pub values: Vec<Vec<f64>>,
}

const SIMDIAG_OFF_TOL: f64 = 1e-8;
const SIMDIAG_RETRIES: u64 = 5;
const CLUSTER_GAP: f64 = 1e-7;

fn diagonal_in_basis(family: &[CMat], basis: &CMat) -> Option<Vec<Vec<f64>>> {
    let n = basis.nrows();
    let transformed: Vec<CMat> = family.iter().map(|a| basis.adjoint() * a * basis).collect();
    for t in &transformed {
        for j in 0..n {
            for k in 0..n {
                if j != k && t[(j, k)].norm() > SIMDIAG_OFF_TOL {
                    return None;
                }
            }
        }
    }
    Some((0..n).map(|k| transformed.iter().map(|t| t[(k, k)].re).collect()).collect())
}

/// Diagonalizes a commuting Hermitian family in a common orthonormal basis.
///
/// A random real combination `sum_i w_i A_i` (weights drawn from `seed`) is
/// diagonalized and each member checked for diagonality within `1e-8`. After
/// five failed draws the basis is refined member by member instead: each
/// eigenspace cluster of the current basis is re-diagonalized under the next
/// member.
pub fn simultaneous_diagonalize(family: &[CMat], seed: u64) -> Result<SimultaneousEigen> {
    let first = family.first().ok_or_else(|| Error::InvalidInput("empty family".into()))?;
    let n = first.nrows();
    if family.iter().any(|a| a.nrows() != n || a.ncols() != n) {
        return Err(Error::Shape("family members differ in dimension".into()));
    }
    for attempt in 0..SIMDIAG_RETRIES {
        let mut rng = rng::stream(seed, attempt);
        let mut combo = CMat::zeros(n, n);
        for a in family {
            let w: f64 = rng.random_range(-1.0..1.0);
            combo += a.scale(w);
        }
        let eig = herm_eigen(&combo)?;
        if let Some(values) = diagonal_in_basis(family, &eig.vectors) {
            return Ok(SimultaneousEigen { basis: eig.vectors, values });
        }
    }
    refine_by_blocks(family)
}

fn refine_by_blocks(family: &[CMat]) -> Result<SimultaneousEigen> {
    let n = family[0].nrows();
    // each block is a set of orthonormal columns on which every member
    // processed so far acts as a scalar
    let mut blocks: Vec<CMat> = vec![CMat::identity(n, n)];
    for a in family {
        let mut next = Vec::with_capacity(blocks.len());
        for b in &blocks {
            let restricted = b.adjoint() * a * b;
            let eig = herm_eigen(&restricted)?;
            let rotated = b * &eig.vectors;
            let mut start = 0;
            for k in 1..=eig.values.len() {
                if k == eig.values.len() || eig.values[k] - eig.values[k - 1] > CLUSTER_GAP {
                    next.push(rotated.columns(start, k - start).into_owned());
                    start = k;
                }
            }
        }
        blocks = next;
    }
    let mut basis = CMat::zeros(n, n);
    let mut col = 0;
    for b in &blocks {
        basis.view_mut((0, col), (n, b.ncols())).copy_from(b);
        col += b.ncols();
    }
    let values = diagonal_in_basis(family, &basis).ok_or_else(|| {
        Error::NonCommuting { worst: worst_commutator(family) }
    })?;
    Ok(SimultaneousEigen { basis, values })
}

/// `max_{i<j} || A_i A_j - A_j A_i ||_max`.
pub fn worst_commutator(family: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in family.iter().enumerate() {
        for b in &family[i + 1..] {
            worst = worst.max(max_abs(&(a * b - b * a)));
        }
    }
    worst
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 { rkk / rkk.norm() } else { C64::new(1.0, 0.0) };
        for row in 0..d {
            q[(row, k)] *= phase;
        }
    }
    q
}

/// `max |U*U - I|`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMat::identity(n, n)))
}
