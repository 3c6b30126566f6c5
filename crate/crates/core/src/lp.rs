//! Dense tableau simplex over exact rationals.
//!
//! Solves `max c.y` subject to `A y <= b`, `y >= 0` with `b >= 0`, so the
//! origin is a feasible starting basis. Bland's rule guarantees termination.

use num_traits::{Signed, Zero};

use crate::error::{DexError, Result};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub point: Vec<Rational>,
    pub value: Rational,
    /// Optimal multipliers of the `A y <= b` rows (a solution of the dual).
    pub row_duals: Vec<Rational>,
}

/// `a` is row-major with `b.len()` rows and `c.len()` columns.
pub fn maximize(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> Result<LpSolution> {
    let rows = b.len();
    let n = c.len();
    if a.len() != rows || a.iter().any(|r| r.len() != n) {
        return Err(DexError::DimensionMismatch(format!(
            "constraint matrix is not {rows}x{n}"
        )));
    }
    if b.iter().any(|v| v.is_negative()) {
        return Err(DexError::Unsupported(
            "negative right-hand side needs a phase-one start".into(),
        ));
    }
    let width = n + rows;
    let mut tab: Vec<Vec<Rational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut t = row.clone();
            t.extend((0..rows).map(|k| if k == i { Rational::from_integer(1.into()) } else { Rational::zero() }));
            t
        })
        .collect();
    let mut rhs: Vec<Rational> = b.to_vec();
    // Reduced costs: objective row holds z_j - c_j.
    let mut obj: Vec<Rational> = c.iter().map(|v| -v).chain((0..rows).map(|_| Rational::zero())).collect();
    let mut value = Rational::zero();
    let mut basis: Vec<usize> = (n..width).collect();

    loop {
        let Some(enter) = obj.iter().position(|v| v.is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..rows {
            let coef = &tab[i][enter];
            if !coef.is_positive() {
                continue;
            }
            let r = &rhs[i] / coef;
            let better = match &leave {
                None => true,
                Some((j, best)) => r < *best || (r == *best && basis[i] < basis[*j]),
            };
            if better {
                leave = Some((i, r));
            }
        }
        let Some((pr, _)) = leave else {
            return Err(DexError::LpUnbounded);
        };

        let pivot = tab[pr][enter].clone();
        for v in tab[pr].iter_mut() {
            if !v.is_zero() {
                *v /= &pivot;
            }
        }
        rhs[pr] /= &pivot;
        let prow = tab[pr].clone();
        let prhs = rhs[pr].clone();
        for i in 0..rows {
            if i == pr || tab[i][enter].is_zero() {
                continue;
            }
            let f = tab[i][enter].clone();
            for (j, pv) in prow.iter().enumerate() {
                if !pv.is_zero() {
                    tab[i][j] -= &f * pv;
                }
            }
            rhs[i] -= &f * &prhs;
        }
        let f = obj[enter].clone();
        for (j, pv) in prow.iter().enumerate() {
            if !pv.is_zero() {
                obj[j] -= &f * pv;
            }
        }
        value -= &f * &prhs;
        basis[pr] = enter;
    }

    let mut point = vec![Rational::zero(); n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            point[j] = rhs[i].clone();
        }
    }
    let row_duals = obj[n..].to_vec();
    Ok(LpSolution {
        point,
        value,
        row_duals,
    })
}
