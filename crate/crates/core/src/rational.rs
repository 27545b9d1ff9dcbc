//! Exact rational linear algebra for the neutral-space computations.
//!
//! Rank and kernel decisions here are algebraic statements about mass
//! vectors, and floating-point rank is unsound near the exceptional
//! variety, so everything in this module works over `BigRational`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Rat = BigRational;

pub fn rat_i64(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Exact rationalization of a finite f64 (dyadic rational).
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

pub fn identity(n: usize) -> Vec<Vec<Rat>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Rat::one() } else { Rat::zero() })
                .collect()
        })
        .collect()
}

/// Left-multiplies `mat` by `R*_i` (the transpose of the collision block),
/// i.e. replaces rows `i, i+1` by
/// `row_i' = γ row_i + (1+γ) row_{i+1}`,
/// `row_{i+1}' = (1-γ) row_i - γ row_{i+1}`.
#[allow(clippy::needless_range_loop)]
pub fn left_mul_rstar(mat: &mut [Vec<Rat>], lower: usize, gamma: &Rat) {
    let n = mat[lower].len();
    let one = Rat::one();
    for c in 0..n {
        let a = mat[lower][c].clone();
        let b = mat[lower + 1][c].clone();
        mat[lower][c] = gamma * &a + (&one + gamma) * &b;
        mat[lower + 1][c] = (&one - gamma) * &a - gamma * &b;
    }
}

/// Basis of the null space `{x : rows · x = 0}` in `Q^n`, via exact
/// Gauss-Jordan elimination.
#[allow(clippy::needless_range_loop)]
pub fn kernel_basis(rows: &[Vec<Rat>], n: usize) -> Vec<Vec<Rat>> {
    let mut mat: Vec<Vec<Rat>> = rows.iter().filter(|r| !is_zero_row(r)).cloned().collect();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let pivot = (r..mat.len()).find(|&i| !mat[i][c].is_zero());
        let Some(p) = pivot else { continue };
        mat.swap(r, p);
        let inv = mat[r][c].clone();
        for x in &mut mat[r] {
            *x = &*x / &inv;
        }
        for i in 0..mat.len() {
            if i != r && !mat[i][c].is_zero() {
                let f = mat[i][c].clone();
                for j in 0..n {
                    let sub = &f * &mat[r][j];
                    mat[i][j] = &mat[i][j] - sub;
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
        if r == mat.len() {
            break;
        }
    }

    let mut basis = Vec::new();
    for free in 0..n {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut x = vec![Rat::zero(); n];
        x[free] = Rat::one();
        for (row, &pc) in pivot_cols.iter().enumerate() {
            x[pc] = -mat[row][free].clone();
        }
        basis.push(x);
    }
    basis
}

fn is_zero_row(row: &[Rat]) -> bool {
    row.iter().all(|x| x.is_zero())
}

/// Incremental rank tracker over `Q^n`: rows are reduced against the
/// stored echelon as they arrive, so prefix scans do not re-solve.
#[derive(Debug, Clone)]
pub struct IncrementalRank {
    n: usize,
    /// Echelon rows, each normalized to a unit pivot.
    rows: Vec<Vec<Rat>>,
    pivots: Vec<usize>,
}

impl IncrementalRank {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Adds a row; returns true iff it was independent of the span so far.
    pub fn add_row(&mut self, mut row: Vec<Rat>) -> bool {
        debug_assert_eq!(row.len(), self.n);
        for (r, &p) in self.rows.iter().zip(self.pivots.iter()) {
            if !row[p].is_zero() {
                let f = row[p].clone();
                for j in 0..self.n {
                    let sub = &f * &r[j];
                    row[j] = &row[j] - sub;
                }
            }
        }
        let Some(p) = row.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = row[p].clone();
        for x in &mut row {
            *x = &*x / &inv;
        }
        self.rows.push(row);
        self.pivots.push(p);
        true
    }
}

/// Evaluates `rows · x` and checks it vanishes (test helper for replay).
pub fn in_kernel(rows: &[Vec<Rat>], x: &[Rat]) -> bool {
    rows.iter().all(|row| {
        row.iter()
            .zip(x.iter())
            .fold(Rat::zero(), |acc, (a, b)| acc + a * b)
            .is_zero()
    })
}

/// Nearest f64 of a rational (for handing exact masses to the f64 flow).
pub fn rat_to_f64(x: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_ones_row() {
        let rows = vec![vec![Rat::one(), Rat::one(), Rat::one()]];
        let basis = kernel_basis(&rows, 3);
        assert_eq!(basis.len(), 2);
        for x in &basis {
            assert!(in_kernel(&rows, x));
        }
    }

    #[test]
    fn kernel_of_full_rank_system_is_trivial() {
        let rows = vec![
            vec![rat_i64(1, 1), rat_i64(1, 1)],
            vec![rat_i64(1, 2), rat_i64(3, 2)],
        ];
        assert!(kernel_basis(&rows, 2).is_empty());
    }

    #[test]
    fn incremental_rank_matches_batch() {
        let rows = vec![
            vec![rat_i64(1, 1), rat_i64(2, 1), rat_i64(3, 1)],
            vec![rat_i64(2, 1), rat_i64(4, 1), rat_i64(6, 1)],
            vec![rat_i64(0, 1), rat_i64(1, 1), rat_i64(1, 1)],
        ];
        let mut inc = IncrementalRank::new(3);
        assert!(inc.add_row(rows[0].clone()));
        assert!(!inc.add_row(rows[1].clone()));
        assert!(inc.add_row(rows[2].clone()));
        assert_eq!(inc.rank(), 2);
        assert_eq!(kernel_basis(&rows, 3).len(), 1);
    }

    #[test]
    fn rstar_product_row() {
        // R*: on (a, -a) the first row reads gamma*a - (1+gamma)*a = -a
        let mut p = identity(2);
        let gamma = rat_i64(1, 3);
        left_mul_rstar(&mut p, 0, &gamma);
        let a = rat_i64(5, 7);
        let combo = &p[0][0] * &a - &p[0][1] * &a;
        assert_eq!(combo, -a);
    }
}
