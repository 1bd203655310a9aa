//! Sparse direct solves with the Newton matrix.
//!
//! `J = L + diag(lambda^2 exp(u))` is not symmetric, but `-V J` is (V the
//! diagonal of cell volumes), and it is positive definite on the stable
//! branch below the fold. A Cholesky factorization failing is therefore the
//! discrete signature of being at or past the fold.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Conj, MatMut, Par, Side};

use crate::discretization::Laplacian;
use crate::error::{Error, Result};

/// Pattern and symbolic analysis of `-V J`, shared by every factorization on
/// one grid.
pub(crate) struct NewtonMatrix {
    pattern: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLlt<usize>,
    base: Vec<f64>,
    diag_slot: Vec<usize>,
    volume: Vec<f64>,
}

impl NewtonMatrix {
    pub fn new(lap: &Laplacian) -> Result<Self> {
        faer::set_global_parallelism(Par::Seq);
        let dim = lap.dim();
        let (col_ptr, row_idx, base) = lap.weighted_lower_csc();
        let diag_slot = col_ptr[..dim].to_vec();
        let pattern = SymbolicSparseColMat::new_checked(dim, dim, col_ptr, None, row_idx);
        let symbolic = SymbolicLlt::try_new(pattern.as_ref(), Side::Lower)
            .map_err(|e| Error::InvalidInput(format!("symbolic factorization failed: {e:?}")))?;
        Ok(NewtonMatrix {
            pattern,
            symbolic,
            base,
            diag_slot,
            volume: lap.volumes(),
        })
    }

    /// Factorizes `-V J(u)` at `lambda^2 = lambda_sq`.
    pub fn factor(&self, u: &[f64], lambda_sq: f64) -> Result<Factor<'_>> {
        let mut values = self.base.clone();
        for (p, &slot) in self.diag_slot.iter().enumerate() {
            values[slot] -= self.volume[p] * lambda_sq * u[p].exp();
        }
        let mat = SparseColMatRef::new(self.pattern.as_ref(), &values);
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat, Side::Lower)
            .map_err(|_| Error::SingularJacobian { lambda_sq })?;
        Ok(Factor {
            llt,
            volume: &self.volume,
        })
    }
}

pub(crate) struct Factor<'a> {
    llt: Llt<usize, f64>,
    volume: &'a [f64],
}

impl Factor<'_> {
    /// Solves `J x = rhs` in place.
    pub fn solve_jacobian(&self, rhs: &mut [f64]) {
        // J x = b  <=>  (-V J) x = -V b
        for (b, v) in rhs.iter_mut().zip(self.volume) {
            *b *= -v;
        }
        let n = rhs.len();
        let view = MatMut::from_column_major_slice_mut(rhs, n, 1);
        self.llt.solve_in_place_with_conj(Conj::No, view);
    }
}
