//! Rank-revealing linear system solver.
//!
//! Classifies `A x = b` by the numerical ranks of `A` and `[A|b]` and returns
//! the unique least-squares solution when both ranks equal the number of
//! unknowns. Singular values below `RANK_TOL_FACTOR` times the largest
//! singular value of the matrix at hand are treated as zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{DenseMatrix, DenseVector};

/// Relative singular-value cutoff for numerical rank decisions.
pub const RANK_TOL_FACTOR: f64 = 1e-10;

/// Outcome of a rank-revealing solve.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    /// Ranks of `A` and `[A|b]` both equal the number of unknowns.
    Unique(DenseVector),
    /// Consistent but rank-deficient; carries the minimum-norm least-squares
    /// solution (one of infinitely many).
    Underdetermined { min_norm: DenseVector },
    /// `b` has a component outside the column space of `A`.
    Inconsistent,
}

impl SolveOutcome {
    pub fn unique(&self) -> Option<&DenseVector> {
        match self {
            SolveOutcome::Unique(v) => Some(v),
            _ => None,
        }
    }
}

fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.data())
}

fn rank_of(m: &DMatrix<f64>) -> usize {
    let svals = m.clone().singular_values();
    let largest = svals.iter().cloned().fold(0.0f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    let tol = RANK_TOL_FACTOR * largest;
    svals.iter().filter(|&&s| s > tol).count()
}

/// Solve `A x = b`, reporting the structure of the solution set.
pub fn solve_linear(a: &DenseMatrix, b: &DenseVector) -> Result<SolveOutcome> {
    if a.rows() != b.len() {
        return Err(Error::dimension(format!(
            "solve: {} rows vs rhs length {}",
            a.rows(),
            b.len()
        )));
    }
    let na = to_na(a);
    let nb = DVector::from_column_slice(b.data());

    let rank_a = rank_of(&na);
    let mut aug = na.clone().insert_column(a.cols(), 0.0);
    aug.set_column(a.cols(), &nb);
    let rank_aug = rank_of(&aug);

    if rank_aug > rank_a {
        return Ok(SolveOutcome::Inconsistent);
    }

    let svd = na.svd(true, true);
    let largest = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = if largest == 0.0 {
        0.0
    } else {
        RANK_TOL_FACTOR * largest
    };
    let x = svd
        .solve(&nb, tol)
        .map_err(|e| Error::domain(format!("svd solve failed: {e}")))?;
    let x = DenseVector::new(x.iter().cloned().collect())?;

    if rank_a == a.cols() {
        Ok(SolveOutcome::Unique(x))
    } else {
        Ok(SolveOutcome::Underdetermined { min_norm: x })
    }
}
