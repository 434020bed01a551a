//! Finite-dimensional density-matrix algebra.
//!
//! A [`DensityMatrix`] is a Hermitian, positive semidefinite, unit-trace
//! operator on `C^d`. Construction always goes through [`validate`], which
//! enforces the three invariants at fixed tolerances and repairs the tiny
//! negative eigenvalues produced by floating-point arithmetic on nearly pure
//! states.
//!
//! All entropies are in nats. Eigenvalues at or below [`EIGEN_CLAMP`] are
//! treated as exact zeros before taking logarithms (`0 ln 0 = 0`).
//!
//! [`StateField`] is the flat per-grid-point storage used by the
//! classical-quantum models; it avoids one heap allocation per grid point.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum tolerated `max |A - A^dagger|`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Maximum tolerated `|Tr A - 1|`.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues at or below this value contribute nothing to entropies.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// A validated quantum state of the system `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

/// Check the density-matrix invariants and return the (repaired) state.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero and the result is
/// renormalized to unit trace.
pub fn validate(a: DMatrix<Complex64>) -> Result<DensityMatrix> {
    let (rows, cols) = a.shape();
    if rows != cols || rows == 0 {
        return Err(Error::NotSquare { rows, cols });
    }
    let d = rows;
    let mut violation = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            violation = violation.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    if violation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { violation });
    }
    let trace: f64 = (0..d).map(|i| a[(i, i)].re).sum();
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::TraceNotOne {
            violation: (trace - 1.0).abs(),
        });
    }
    let herm = (&a + a.adjoint()).scale(0.5);
    let eig = herm.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    let mut repaired = if min < 0.0 {
        let clamped = eig.eigenvalues.map(|l| Complex64::new(l.clamp(0.0, 1.0), 0.0));
        let v = &eig.eigenvectors;
        v * DMatrix::from_diagonal(&clamped) * v.adjoint()
    } else {
        herm
    };
    let tr: f64 = (0..d).map(|i| repaired[(i, i)].re).sum();
    repaired.unscale_mut(tr);
    Ok(DensityMatrix { matrix: repaired })
}

impl DensityMatrix {
    pub fn maximally_mixed(dim: usize) -> Self {
        let v = Complex64::new(1.0 / dim as f64, 0.0);
        DensityMatrix {
            matrix: DMatrix::from_diagonal_element(dim, dim, v),
        }
    }

    /// Diagonal state from a probability vector.
    pub fn from_diagonal(probabilities: &[f64]) -> Result<Self> {
        let diag: Vec<Complex64> = probabilities.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        validate(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    /// Qubit state `(I + r . sigma) / 2` for a Bloch vector with `|r| <= 1`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let [x, y, z] = r;
        let half = 0.5;
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(half * (1.0 + z), 0.0),
                Complex64::new(half * x, -half * y),
                Complex64::new(half * x, half * y),
                Complex64::new(half * (1.0 - z), 0.0),
            ],
        );
        validate(m)
    }

    /// Projector onto the normalized vector `psi`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParameters("zero state vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|c| c / norm));
        validate(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Column-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        self.matrix.as_slice()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        hermitian_eigenvalues(self.as_slice(), self.dim(), &mut out);
        out.sort_by(|a, b| a.total_cmp(b));
        out
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(self)
    }

    /// `U rho U^dagger`, revalidated.
    pub fn conjugate(&self, unitary: &DMatrix<Complex64>) -> Result<Self> {
        validate(unitary * &self.matrix * unitary.adjoint())
    }

    /// Trace norm `||rho - sigma||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(trace_norm_of_difference(self.as_slice(), other.as_slice(), self.dim()))
    }

    pub(crate) fn from_slice_unchecked(dim: usize, data: &[Complex64]) -> Self {
        DensityMatrix {
            matrix: DMatrix::from_column_slice(dim, dim, data),
        }
    }
}

/// `S(rho) = -Tr rho ln rho` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let mut eig = vec![0.0; rho.dim()];
    hermitian_eigenvalues(rho.as_slice(), rho.dim(), &mut eig);
    spectrum_entropy(&eig)
}

/// Kronecker product `rho (x) sigma`.
pub fn tensor(rho: &DensityMatrix, sigma: &DensityMatrix) -> DensityMatrix {
    DensityMatrix {
        matrix: rho.matrix.kronecker(&sigma.matrix),
    }
}

/// Block layout `H = (+)_i H_i^X (x) H_i^Y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    blocks: Vec<(usize, usize)>,
}

impl BlockStructure {
    pub fn new(blocks: Vec<(usize, usize)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::DimensionMismatch("block structure has no blocks".into()));
        }
        if blocks.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(Error::DimensionMismatch("block dimensions must be >= 1".into()));
        }
        Ok(BlockStructure { blocks })
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    pub fn block_dim(&self, i: usize) -> usize {
        let (a, b) = self.blocks[i];
        a * b
    }

    pub fn dim(&self) -> usize {
        (0..self.blocks.len()).map(|i| self.block_dim(i)).sum()
    }

    /// Offset of block `i` along the diagonal.
    pub fn offset(&self, i: usize) -> usize {
        (0..i).map(|k| self.block_dim(k)).sum()
    }
}

/// Block-diagonal state `(+)_i r(i) part_i`.
pub fn direct_sum(
    weights: &[f64],
    parts: &[DensityMatrix],
    structure: &BlockStructure,
) -> Result<DensityMatrix> {
    let n = structure.blocks().len();
    if weights.len() != n || parts.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} blocks, {} weights, {} parts",
            n,
            weights.len(),
            parts.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameters(format!(
            "block weights must be a probability vector (sum {total})"
        )));
    }
    let d = structure.dim();
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for (i, part) in parts.iter().enumerate() {
        let bd = structure.block_dim(i);
        if part.dim() != bd {
            return Err(Error::DimensionMismatch(format!(
                "block {i} expects dimension {bd}, got {}",
                part.dim()
            )));
        }
        let off = structure.offset(i);
        m.view_mut((off, off), (bd, bd))
            .copy_from(&part.matrix.scale(weights[i]));
    }
    validate(m)
}

/// Shannon entropy of a probability vector, `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// `-sum l ln l` over a spectrum with the eigenvalue clamp applied.
pub fn spectrum_entropy(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > EIGEN_CLAMP)
        .map(|&l| -l * l.ln())
        .sum()
}

/// Eigenvalues of a Hermitian `d x d` operator stored column-major.
///
/// Only the lower triangle is read for `d > 2`.
pub fn hermitian_eigenvalues(op: &[Complex64], d: usize, out: &mut [f64]) {
    debug_assert_eq!(op.len(), d * d);
    match d {
        1 => out[0] = op[0].re,
        2 => {
            let a = op[0].re;
            let c = op[3].re;
            let b = op[1].norm_sqr();
            let mean = 0.5 * (a + c);
            let half = 0.5 * (a - c);
            let r = (half * half + b).sqrt();
            out[0] = mean - r;
            out[1] = mean + r;
        }
        _ => {
            let m = DMatrix::from_column_slice(d, d, op);
            let ev = m.symmetric_eigenvalues();
            out.copy_from_slice(ev.as_slice());
        }
    }
}

pub(crate) fn trace_norm_of_difference(a: &[Complex64], b: &[Complex64], d: usize) -> f64 {
    let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut eig = vec![0.0; d];
    hermitian_eigenvalues(&diff, d, &mut eig);
    eig.iter().map(|l| l.abs()).sum()
}

/// Flat storage for one `d x d` operator per grid point (column-major).
#[derive(Clone, Debug, PartialEq)]
pub struct StateField {
    dim: usize,
    data: Vec<Complex64>,
}

impl StateField {
    pub fn zeros(dim: usize, points: usize) -> Self {
        StateField {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim * points],
        }
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len() % (dim * dim), 0);
        StateField { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.dim * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[Complex64] {
        let s = self.dim * self.dim;
        &self.data[i * s..(i + 1) * s]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [Complex64] {
        let s = self.dim * self.dim;
        &mut self.data[i * s..(i + 1) * s]
    }

    pub fn set(&mut self, i: usize, rho: &DensityMatrix) {
        self.get_mut(i).copy_from_slice(rho.as_slice());
    }

    pub fn density_matrix(&self, i: usize) -> DensityMatrix {
        DensityMatrix::from_slice_unchecked(self.dim, self.get(i))
    }

    pub(crate) fn raw(&self) -> &[Complex64] {
        &self.data
    }
}
