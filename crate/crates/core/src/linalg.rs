//! Exact linear algebra over the rationals.
//!
//! Elimination runs on integer rows (each rational row is scaled by the lcm
//! of its denominators) and every updated row is divided by the gcd of its
//! entries, so intermediate growth stays bounded without any division.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::expr::Rational;

/// Reduced row-echelon form: `rows[i]` has a leading 1 at column `pivots[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rref {
    pub rows: Vec<Vec<Rational>>,
    pub pivots: Vec<usize>,
    pub ncols: usize,
}

impl Rref {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

fn integer_row(r: &[Rational]) -> Vec<BigInt> {
    let l = r.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let mut out: Vec<BigInt> = r.iter().map(|c| c.numer() * (&l / c.denom())).collect();
    make_primitive(&mut out);
    out
}

fn make_primitive(row: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for v in row.iter() {
        if !v.is_zero() {
            g = g.gcd(v);
            if g.is_one() {
                return;
            }
        }
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for v in row.iter_mut() {
        if !v.is_zero() {
            *v /= &g;
        }
    }
}

/// Fraction-free Gauss–Jordan. Pivot choice is deterministic: leftmost
/// column first, then the smallest row index with a non-zero entry.
pub fn rref(m: &[Vec<Rational>], ncols: usize) -> Rref {
    let mut rows: Vec<Vec<BigInt>> = m
        .iter()
        .map(|r| {
            assert_eq!(r.len(), ncols, "ragged matrix");
            integer_row(r)
        })
        .filter(|r| r.iter().any(|v| !v.is_zero()))
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..ncols {
        if rank == rows.len() {
            break;
        }
        let Some(found) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, found);
        let pivot_row = rows[rank].clone();
        let p = pivot_row[col].clone();
        let nz: Vec<usize> = (col..ncols).filter(|&c| !pivot_row[c].is_zero()).collect();
        for (j, row) in rows.iter_mut().enumerate() {
            if j == rank || row[col].is_zero() {
                continue;
            }
            let a = row[col].clone();
            let g = a.gcd(&p);
            let (pa, aa) = (&p / &g, &a / &g);
            if !pa.is_one() {
                for v in row.iter_mut() {
                    if !v.is_zero() {
                        *v *= &pa;
                    }
                }
            }
            for &c in &nz {
                row[c] -= &aa * &pivot_row[c];
            }
            make_primitive(row);
        }
        pivots.push(col);
        rank += 1;
        // rows that became zero carry no information
        let mut keep = 0;
        for i in 0..rows.len() {
            if i < rank || rows[i].iter().any(|v| !v.is_zero()) {
                rows.swap(keep, i);
                keep += 1;
            }
        }
        rows.truncate(keep);
    }
    rows.truncate(rank);
    let rows = rows
        .into_iter()
        .zip(&pivots)
        .map(|(r, &pc)| {
            let p = r[pc].clone();
            r.into_iter().map(|v| Rational::new(v, p.clone())).collect()
        })
        .collect();
    Rref {
        rows,
        pivots,
        ncols,
    }
}

pub fn rank(m: &[Vec<Rational>], ncols: usize) -> usize {
    rref(m, ncols).rank()
}

/// Basis of `{v : M v = 0}`, one vector per free column, in column order.
pub fn rational_nullspace(m: &[Vec<Rational>], ncols: usize) -> Vec<Vec<Rational>> {
    nullspace_of_rref(&rref(m, ncols))
}

pub fn nullspace_of_rref(r: &Rref) -> Vec<Vec<Rational>> {
    let mut is_pivot = vec![false; r.ncols];
    for &p in &r.pivots {
        is_pivot[p] = true;
    }
    (0..r.ncols)
        .filter(|&c| !is_pivot[c])
        .map(|free| {
            let mut v = vec![Rational::zero(); r.ncols];
            v[free] = Rational::one();
            for (row, &pc) in r.rows.iter().zip(&r.pivots) {
                v[pc] = -row[free].clone();
            }
            v
        })
        .collect()
}

/// Solve `Σ_j x_j columns[j] = target`. `None` when inconsistent; when the
/// columns are dependent the free coordinates are set to zero.
pub fn solve_columns(columns: &[Vec<Rational>], target: &[Rational]) -> Option<Vec<Rational>> {
    let n = columns.len();
    let dim = target.len();
    let aug: Vec<Vec<Rational>> = (0..dim)
        .map(|i| {
            let mut row: Vec<Rational> = columns.iter().map(|c| c[i].clone()).collect();
            row.push(target[i].clone());
            row
        })
        .collect();
    let r = rref(&aug, n + 1);
    if r.pivots.last() == Some(&n) {
        return None;
    }
    let mut x = vec![Rational::zero(); n];
    for (row, &pc) in r.rows.iter().zip(&r.pivots) {
        x[pc] = row[n].clone();
    }
    Some(x)
}

pub fn mat_vec(m: &[Vec<Rational>], v: &[Rational]) -> Vec<Rational> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Scale so the first non-zero entry is 1.
pub fn normalize_leading(v: &mut [Rational]) {
    if let Some(lead) = v.iter().find(|c| !c.is_zero()).cloned() {
        if !lead.is_one() {
            for c in v.iter_mut() {
                *c /= &lead;
            }
        }
    }
}

pub fn is_zero_vec(v: &[Rational]) -> bool {
    v.iter().all(|c| c.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::q;

    fn m(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
        rows.iter()
            .map(|r| r.iter().map(|&v| q(v, 1)).collect())
            .collect()
    }

    #[test]
    fn identity_has_trivial_kernel() {
        assert!(rational_nullspace(&m(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]), 3).is_empty());
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let ns = rational_nullspace(&m(&[&[0, 0, 0], &[0, 0, 0]]), 3);
        assert_eq!(ns.len(), 3);
        assert_eq!(rank(&ns, 3), 3);
    }

    #[test]
    fn rref_matches_hand_computation() {
        let a = vec![
            vec![q(2, 1), q(4, 1), q(-2, 1)],
            vec![q(1, 2), q(1, 1), q(1, 3)],
        ];
        let r = rref(&a, 3);
        assert_eq!(r.pivots, vec![0, 2]);
        assert_eq!(r.rows[0], vec![q(1, 1), q(2, 1), q(0, 1)]);
        assert_eq!(r.rows[1], vec![q(0, 1), q(0, 1), q(1, 1)]);
        let ns = rational_nullspace(&a, 3);
        assert_eq!(ns, vec![vec![q(-2, 1), q(1, 1), q(0, 1)]]);
    }

    #[test]
    fn solve_detects_inconsistency() {
        let cols = vec![
            vec![q(1, 1), q(0, 1), q(1, 1)],
            vec![q(0, 1), q(1, 1), q(1, 1)],
        ];
        assert_eq!(
            solve_columns(&cols, &[q(2, 1), q(3, 1), q(5, 1)]),
            Some(vec![q(2, 1), q(3, 1)])
        );
        assert_eq!(solve_columns(&cols, &[q(2, 1), q(3, 1), q(4, 1)]), None);
    }
}
