//! Corner projections of synchronous correlations and the lifts that invert
//! them.
//!
//! Viewing a correlation on `n = n_A + n_B` inputs per party as the block
//! matrix `[[A, B], [C, D]]` (rows `(x, i)`, columns `(y, j)`), the corner is
//! the block `B`: Alice's first `n_A` inputs against Bob's last `n_B`.

use crate::correlation::Correlation;
use crate::error::{Error, Result};
use crate::operators::{MaxEntRep, MeasureKind};

/// `corner(p)(i,j|x,y) = p(i,j|x, y + n_a)` for `x < n_a`, `y < n_b`.
pub fn corner(p: &Correlation, n_a: usize, n_b: usize) -> Result<Correlation> {
    if p.n_a() != p.n_b() {
        return Err(Error::Shape(format!("corner needs a square input, got n_a={} n_b={}", p.n_a(), p.n_b())));
    }
    if n_a + n_b != p.n_a() || n_a == 0 || n_b == 0 {
        return Err(Error::Shape(format!("n_A + n_B = {} + {} must equal n = {}", n_a, n_b, p.n_a())));
    }
    Correlation::from_fn(n_a, n_b, p.m(), |x, y, i, j| p.get(x, y + n_a, i, j))
}

/// Both parties measure Alice's PVMs on the first `n_A` inputs and Bob's on
/// the remaining `n_B`. Projectivity makes the lift synchronous:
/// `E_{x,i} E_{x,j} = 0` for `i != j`.
pub fn lift_max_ent(rep: &MaxEntRep) -> Result<MaxEntRep> {
    if rep.kind() != MeasureKind::Pvm {
        return Err(Error::KindMismatch { expected: "PVM" });
    }
    let combined: Vec<_> = rep.alice().iter().chain(rep.bob()).cloned().collect();
    MaxEntRep::new(combined.clone(), combined)
}

/// A symmetric, synchronous, nonsignalling correlation on `n_A + n_B` inputs
/// whose corner is `p`.
///
/// With marginals `p_A`, `p_B` the lift is assembled blockwise:
///
/// * both inputs Alice's: `δ_ij p_A(i|x)` when `x = y`, else `p_A(i|x) p_A(j|y)`;
/// * Alice's `x`, Bob's `y`: `p(i,j|x,y)` copied verbatim;
/// * Bob's `x`, Alice's `y`: `p(j,i|y,x)`;
/// * both Bob's: as the first case with `p_B`.
///
/// Marginals are averaged over the other party's inputs, which matters only
/// for the float noise admitted by `tol`.
pub fn lift_nonsignalling(p: &Correlation, tol: f64) -> Result<Correlation> {
    let marg = p.marginals(tol);
    if !marg.well_defined {
        return Err(Error::Signalling { defect: marg.max_signalling_defect, tol });
    }
    let (pa, pb) = p.averaged_marginals();
    let (n_a, n_b, m) = p.shape();
    let product_block = |marg: &[Vec<f64>], x: usize, y: usize, i: usize, j: usize| {
        if x == y {
            if i == j {
                marg[x][i]
            } else {
                0.0
            }
        } else {
            marg[x][i] * marg[y][j]
        }
    };
    Correlation::from_fn(n_a + n_b, n_a + n_b, m, |x, y, i, j| match (x < n_a, y < n_a) {
        (true, true) => product_block(&pa, x, y, i, j),
        (true, false) => p.get(x, y - n_a, i, j),
        (false, true) => p.get(y, x - n_a, j, i),
        (false, false) => product_block(&pb, x - n_a, y - n_a, i, j),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorMeasure;

    #[test]
    fn corner_of_uniform() {
        let p = Correlation::uniform(4, 4, 2).unwrap();
        assert_eq!(corner(&p, 2, 2).unwrap(), Correlation::uniform(2, 2, 2).unwrap());
        assert!(corner(&p, 1, 2).is_err());
        assert!(corner(&Correlation::uniform(2, 3, 2).unwrap(), 1, 1).is_err());
    }

    #[test]
    fn corner_is_block_b_of_matrix_view() {
        let rep = MaxEntRep::random(3, 3, 2, 3, 5).unwrap();
        let p = rep.eval().unwrap();
        let (n_a, n_b, m) = (1, 2, 2);
        // matrix view: row (x, i) -> x*m + i, column (y, j) -> y*m + j
        let rows = 3 * m;
        let mat: Vec<Vec<f64>> = (0..rows)
            .map(|r| (0..rows).map(|col| p.get(r / m, col / m, r % m, col % m)).collect())
            .collect();
        let c = corner(&p, n_a, n_b).unwrap();
        for r in 0..m * n_a {
            for col in 0..m * n_b {
                let v = mat[r][m * n_a + col];
                assert_eq!(c.get(r / m, col / m, r % m, col % m), v);
            }
        }
    }

    #[test]
    fn deterministic_product_lifts_to_deterministic() {
        let p = Correlation::deterministic(&[1, 0], &[2], 3).unwrap();
        let lifted = lift_nonsignalling(&p, 1e-12).unwrap();
        assert!(lifted.values().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(lifted.is_synchronous(0.0).unwrap());
        assert_eq!(corner(&lifted, 2, 1).unwrap(), p);
    }

    #[test]
    fn lift_blocks_follow_marginals() {
        let rep = MaxEntRep::random(2, 2, 3, 3, 77).unwrap();
        let p = rep.eval().unwrap();
        let lifted = lift_nonsignalling(&p, 1e-10).unwrap();
        let marg = p.marginals(1e-10);
        for x in 0..2 {
            for i in 0..3 {
                assert!((lifted.get(x, x, i, i) - marg.alice[x][i]).abs() < 1e-12);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let expected = marg.alice[0][i] * marg.alice[1][j];
                assert!((lifted.get(0, 1, i, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pr_box_lift() {
        let pr = Correlation::pr_box();
        let lifted = lift_nonsignalling(&pr, 1e-12).unwrap();
        assert!(lifted.validate(1e-12).ok);
        assert!(lifted.is_synchronous(1e-10).unwrap());
        assert!(lifted.is_symmetric(1e-10).unwrap());
        assert!(lifted.marginals(1e-10).well_defined);
        assert_eq!(corner(&lifted, 2, 2).unwrap(), pr);
    }

    #[test]
    fn signalling_input_rejected() {
        let p = Correlation::from_fn(2, 2, 2, |_, y, i, j| if i == y && j == 0 { 1.0 } else { 0.0 }).unwrap();
        match lift_nonsignalling(&p, 1e-9) {
            Err(Error::Signalling { defect, .. }) => assert_eq!(defect, 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn max_ent_lift() {
        let rep = MaxEntRep::random(2, 3, 2, 3, 3).unwrap();
        let lifted = lift_max_ent(&rep).unwrap();
        assert_eq!(lifted.d(), 3);
        lifted.validate().unwrap();
        let q = lifted.eval().unwrap();
        for x in 0..5 {
            for i in 0..2 {
                for j in 0..2 {
                    if i != j {
                        assert!(q.get(x, x, i, j).abs() < 1e-12);
                    }
                }
            }
        }
        let c = corner(&q, 2, 3).unwrap();
        assert!(c.sup_distance(&rep.eval().unwrap()).unwrap() < 1e-12);

        let scalar = MaxEntRep::new(
            vec![OperatorMeasure::diagonal_pvm(&[1], 2).unwrap()],
            vec![OperatorMeasure::diagonal_pvm(&[0], 2).unwrap()],
        )
        .unwrap();
        let lifted = lift_max_ent(&scalar).unwrap().eval().unwrap();
        assert_eq!(lifted, Correlation::deterministic(&[1, 0], &[1, 0], 2).unwrap());

        let povm = rep.clone().with_kind(MeasureKind::Povm);
        assert!(lift_max_ent(&povm).is_err());
    }
}
