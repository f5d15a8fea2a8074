//! Density matrices, bipartite pure states and the linear algebra behind them.

use nalgebra::linalg::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::{Complex64, ComplexMatrix, ComplexVector, Error, Result};

/// Tolerance on Hermiticity, trace and negative eigenvalues for a valid state.
pub const STATE_TOL: f64 = 1e-10;
/// Largest `|m - m^dagger|` entry accepted by [`hermitian_eig`] before symmetrizing.
pub const EIG_HERMITIAN_TOL: f64 = 1e-8;
/// Eigenvalues at or below this are counted as zero when computing ranks.
pub const RANK_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Which factor of a bipartite system to keep in [`partial_trace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermiticity_gap(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

fn symmetrize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Kronecker product `a ⊗ b`, joint index `i * b.nrows() + k`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of two vectors, A-major.
pub fn tensor_vectors(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    let mut out = ComplexVector::zeros(a.len() * b.len());
    for (j, x) in a.iter().enumerate() {
        for (k, y) in b.iter().enumerate() {
            out[j * b.len() + k] = x * y;
        }
    }
    out
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V diag(values) V^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (c, &v) in self.values.iter().enumerate() {
            scaled.column_mut(c).scale_mut(v);
        }
        let out = &scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        out
    }

    /// Apply a real function to the spectrum: `V diag(f(values)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (c, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            scaled.column_mut(c).iter_mut().for_each(|z| *z *= fv);
        }
        &scaled * self.vectors.adjoint()
    }
}

fn check_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
///
/// The input is symmetrized as `(m + m^dagger)/2` before solving; inputs
/// further than [`EIG_HERMITIAN_TOL`] from Hermitian are rejected.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    check_square(m, "eigensolver input")?;
    let gap = hermiticity_gap(m);
    if !gap.is_finite() || gap > EIG_HERMITIAN_TOL {
        return Err(Error::NotHermitian(gap));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_square(m, "eigensolver input")?;
    let gap = hermiticity_gap(m);
    if !gap.is_finite() || gap > EIG_HERMITIAN_TOL {
        return Err(Error::NotHermitian(gap));
    }
    let mut values: Vec<f64> = symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// A validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        check_square(&mat, "density matrix")?;
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("non-finite entry".into()));
        }
        let gap = hermiticity_gap(&mat);
        if gap > STATE_TOL {
            return Err(Error::Validation(format!("not Hermitian (gap {gap:e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::Validation(format!("trace {tr} is not 1")));
        }
        let mat = symmetrize(&mat);
        let min = hermitian_eigenvalues(&mat)?.last().copied().unwrap_or(0.0);
        if min < -STATE_TOL {
            return Err(Error::Validation(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix known to be a state by construction (reductions,
    /// mixtures, unitary conjugates of valid states).
    pub(crate) fn from_trusted(mat: ComplexMatrix) -> Self {
        debug_assert!(mat.is_square());
        Self {
            mat: symmetrize(&mat),
        }
    }

    /// `|psi><psi|` for a vector normalized to [`STATE_TOL`].
    pub fn from_vector(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if psi.is_empty() || (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation(format!("vector norm {norm} is not 1")));
        }
        Ok(Self::from_trusted(psi * psi.adjoint()))
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self::from_trusted(psi.amplitudes() * psi.amplitudes().adjoint())
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let m = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            probs.len(),
            probs.iter().map(|&p| Complex64::new(p, 0.0)),
        ));
        Self::new(m)
    }

    /// `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(ComplexMatrix::identity(dim, dim).scale(1.0 / dim as f64))
    }

    /// `|j><j|` in dimension `dim`.
    pub fn basis_state(dim: usize, j: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(j, j)] = ONE;
        Self::from_trusted(m)
    }

    /// Convex combination `sum_i w_i rho_i`. Weights must be nonnegative and
    /// sum to one; all states must share a dimension.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::Validation("empty mixture".into()));
        };
        let dim = first.dim();
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation(
                "mixture weights must form a distribution".into(),
            ));
        }
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::Dimension(
                    "mixture of states of different dimension".into(),
                ));
            }
            acc += rho.matrix().scale(*w);
        }
        Ok(Self::from_trusted(acc))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// Real diagonal `rho_ii`.
    pub fn diagonal_probs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.mat).expect("density matrices are Hermitian")
    }

    pub fn eigen(&self) -> HermitianEigen {
        hermitian_eig(&self.mat).expect("density matrices are Hermitian")
    }

    /// Number of eigenvalues above [`RANK_TOL`].
    pub fn rank(&self) -> usize {
        self.eigenvalues().iter().filter(|&&v| v > RANK_TOL).count()
    }

    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `U rho U^dagger`. `u` must be unitary; this is not re-validated.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "unitary is {}x{}, state has dimension {}",
                u.nrows(),
                u.ncols(),
                self.dim()
            )));
        }
        Ok(Self::from_trusted(u * &self.mat * u.adjoint()))
    }

    /// Trace norm `||self - other||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(
                "trace distance between different dimensions".into(),
            ));
        }
        Ok(hermitian_eigenvalues(&(&self.mat - &other.mat))?
            .iter()
            .map(|v| v.abs())
            .sum())
    }

    pub fn to_json(&self, dims: [usize; 2]) -> Result<StateJson> {
        if dims[0] * dims[1] != self.dim() {
            return Err(Error::Dimension(format!(
                "dims {}x{} do not match state dimension {}",
                dims[0],
                dims[1],
                self.dim()
            )));
        }
        Ok(StateJson::from_matrix(dims, &self.mat))
    }
}

/// Normalized amplitude vector on `C^{d_a} ⊗ C^{d_b}` (`d_b = 1` for a
/// single system).
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dim_a: usize,
    dim_b: usize,
    amps: ComplexVector,
}

impl PureState {
    pub fn new(dim_a: usize, dim_b: usize, amps: ComplexVector) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 || amps.len() != dim_a * dim_b {
            return Err(Error::Dimension(format!(
                "{} amplitudes for dims {dim_a}x{dim_b}",
                amps.len()
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("non-finite amplitude".into()));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation(format!("state norm {norm} is not 1")));
        }
        Ok(Self { dim_a, dim_b, amps })
    }

    /// Normalizes `amps` first; fails on the zero vector.
    pub fn normalized(dim_a: usize, dim_b: usize, amps: ComplexVector) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Validation(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Self::new(dim_a, dim_b, amps.unscale(norm))
    }

    pub(crate) fn from_trusted(dim_a: usize, dim_b: usize, amps: ComplexVector) -> Self {
        debug_assert_eq!(amps.len(), dim_a * dim_b);
        let norm = amps.norm();
        Self {
            dim_a,
            dim_b,
            amps: amps.unscale(norm),
        }
    }

    /// Single-system state (`d_b = 1`).
    pub fn single(amps: ComplexVector) -> Result<Self> {
        let d = amps.len();
        Self::new(d, 1, amps)
    }

    /// `|a> ⊗ |b>`.
    pub fn product(a: &ComplexVector, b: &ComplexVector) -> Result<Self> {
        Self::new(a.len(), b.len(), tensor_vectors(a, b))
    }

    /// `(1/sqrt(d)) sum_j |j>|j>`.
    pub fn maximally_entangled(d: usize) -> Self {
        let mut amps = ComplexVector::zeros(d * d);
        for j in 0..d {
            amps[j * d + j] = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        }
        Self::from_trusted(d, d, amps)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amps
    }

    /// Amplitudes reshaped to a `d_a x d_b` matrix, `M[j, k] = psi[j * d_b + k]`.
    pub fn coefficient_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim_a, self.dim_b, |j, k| self.amps[j * self.dim_b + k])
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }

    /// `Tr_B |psi><psi| = M M^dagger`.
    pub fn reduced_a(&self) -> DensityMatrix {
        let m = self.coefficient_matrix();
        DensityMatrix::from_trusted(&m * m.adjoint())
    }

    /// `Tr_A |psi><psi| = M^T conj(M)`.
    pub fn reduced_b(&self) -> DensityMatrix {
        let m = self.coefficient_matrix();
        DensityMatrix::from_trusted(m.transpose() * m.conjugate())
    }

    /// Apply `u_a ⊗ u_b`.
    pub fn apply_local(&self, u_a: &ComplexMatrix, u_b: &ComplexMatrix) -> Result<Self> {
        if u_a.nrows() != self.dim_a
            || u_b.nrows() != self.dim_b
            || !u_a.is_square()
            || !u_b.is_square()
        {
            return Err(Error::Dimension(
                "local unitary dimensions do not match the state".into(),
            ));
        }
        let m = u_a * self.coefficient_matrix() * u_b.transpose();
        let amps = ComplexVector::from_fn(self.dim_a * self.dim_b, |i, _| {
            m[(i / self.dim_b, i % self.dim_b)]
        });
        Ok(Self::from_trusted(self.dim_a, self.dim_b, amps))
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.amps.dotc(&other.amps).norm_sqr()
    }

    pub fn to_json(&self) -> StateJson {
        StateJson {
            dims: [self.dim_a, self.dim_b],
            re: self.amps.iter().map(|z| z.re).collect(),
            im: self.amps.iter().map(|z| z.im).collect(),
        }
    }
}

/// Reduced state of `rho` on the kept subsystem.
pub fn partial_trace(
    rho: &DensityMatrix,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<DensityMatrix> {
    let (da, db) = dims;
    if da == 0 || db == 0 || da * db != rho.dim() {
        return Err(Error::Dimension(format!(
            "dims {da}x{db} do not factor a state of dimension {}",
            rho.dim()
        )));
    }
    let m = rho.matrix();
    let out = match keep {
        Subsystem::A => ComplexMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(db, db, |k, l| {
            (0..da).map(|i| m[(i * db + k, i * db + l)]).sum()
        }),
    };
    Ok(DensityMatrix::from_trusted(out))
}

/// `|Psi> = sum_k sqrt(lambda_k) |phi_k> ⊗ |psi_k>`.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Weights `lambda_k`, descending, `min(d_a, d_b)` entries.
    pub coeffs: Vec<f64>,
    /// `|phi_k>` as columns (`d_a` rows).
    pub basis_a: ComplexMatrix,
    /// `|psi_k>` as columns (`d_b` rows).
    pub basis_b: ComplexMatrix,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coeffs.iter().filter(|&&l| l > RANK_TOL).count()
    }

    pub fn reconstruct(&self) -> PureState {
        let (da, db) = (self.basis_a.nrows(), self.basis_b.nrows());
        let mut amps = ComplexVector::zeros(da * db);
        for (k, &l) in self.coeffs.iter().enumerate() {
            let w = l.max(0.0).sqrt();
            let term = tensor_vectors(
                &self.basis_a.column(k).into_owned(),
                &self.basis_b.column(k).into_owned(),
            );
            amps += term.scale(w);
        }
        PureState::from_trusted(da, db, amps)
    }
}

/// Schmidt decomposition via the SVD of the coefficient matrix.
pub fn schmidt_decompose(psi: &PureState) -> SchmidtDecomposition {
    let m = psi.coefficient_matrix();
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^dagger");
    let n = svd.singular_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut coeffs: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i].powi(2))
        .collect();
    let total: f64 = coeffs.iter().sum();
    coeffs.iter_mut().for_each(|c| *c /= total);
    let mut basis_a = ComplexMatrix::zeros(psi.dim_a(), n);
    let mut basis_b = ComplexMatrix::zeros(psi.dim_b(), n);
    for (dst, &src) in order.iter().enumerate() {
        basis_a.set_column(dst, &u.column(src));
        // Row `src` of V^dagger holds the B-side vector.
        for k in 0..psi.dim_b() {
            basis_b[(k, dst)] = v_t[(src, k)];
        }
    }
    SchmidtDecomposition {
        coeffs,
        basis_a,
        basis_b,
    }
}

/// Purification `sum_i sqrt(lambda_i) |v_i> ⊗ |i>` with ancilla dimension
/// equal to the rank of `rho`.
pub fn purify(rho: &DensityMatrix) -> PureState {
    let eig = rho.eigen();
    let support: Vec<usize> = (0..rho.dim())
        .filter(|&i| eig.values[i] > RANK_TOL)
        .collect();
    let r = support.len().max(1);
    let d = rho.dim();
    let mut amps = ComplexVector::zeros(d * r);
    for (anc, &i) in support.iter().enumerate() {
        let w = eig.values[i].sqrt();
        for j in 0..d {
            amps[j * r + anc] = eig.vectors[(j, i)] * w;
        }
    }
    PureState::from_trusted(d, r, amps)
}

/// Purification with a fixed ancilla dimension `dim_b >= rank(rho)`.
pub fn purify_with_ancilla(rho: &DensityMatrix, dim_b: usize) -> Result<PureState> {
    let base = purify(rho);
    if dim_b < base.dim_b() {
        return Err(Error::Dimension(format!(
            "ancilla dimension {dim_b} below rank {}",
            base.dim_b()
        )));
    }
    let d = rho.dim();
    let mut amps = ComplexVector::zeros(d * dim_b);
    for j in 0..d {
        for k in 0..base.dim_b() {
            amps[j * dim_b + k] = base.amplitudes()[j * base.dim_b() + k];
        }
    }
    Ok(PureState::from_trusted(d, dim_b, amps))
}

/// Zero the off-diagonal entries.
pub fn dephase(rho: &DensityMatrix) -> DensityMatrix {
    let d = rho.dim();
    let m = ComplexMatrix::from_fn(
        d,
        d,
        |i, j| if i == j { rho.matrix()[(i, i)] } else { ZERO },
    );
    DensityMatrix::from_trusted(m)
}

/// Gram matrix `V^dagger V` deviation from identity, max entry.
pub fn orthonormality_gap(columns: &ComplexMatrix) -> f64 {
    let n = columns.ncols();
    max_abs(&(columns.adjoint() * columns - ComplexMatrix::identity(n, n)))
}

/// Wire format shared by state files, fixtures and reports: row-major real
/// and imaginary parts. A vector of length `d_a * d_b` is a pure state; a
/// vector of length `(d_a * d_b)^2` is a density matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub dims: [usize; 2],
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// A state read from [`StateJson`].
#[derive(Clone, Debug)]
pub enum ParsedState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl ParsedState {
    pub fn density(&self) -> DensityMatrix {
        match self {
            ParsedState::Pure(p) => p.density(),
            ParsedState::Mixed(m) => m.clone(),
        }
    }
}

impl StateJson {
    fn from_matrix(dims: [usize; 2], m: &ComplexMatrix) -> Self {
        let n = m.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { dims, re, im }
    }

    pub fn parse(&self) -> Result<ParsedState> {
        let [da, db] = self.dims;
        let n = da * db;
        if n == 0 {
            return Err(Error::Dimension("zero dimension".into()));
        }
        if self.re.len() != self.im.len() {
            return Err(Error::Dimension(format!(
                "re has {} entries, im has {}",
                self.re.len(),
                self.im.len()
            )));
        }
        let entries = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| Complex64::new(r, i));
        if self.re.len() == n * n && n > 1 {
            let vals: Vec<Complex64> = entries.collect();
            let m = ComplexMatrix::from_row_slice(n, n, &vals);
            Ok(ParsedState::Mixed(DensityMatrix::new(m)?))
        } else if self.re.len() == n {
            Ok(ParsedState::Pure(PureState::new(
                da,
                db,
                ComplexVector::from_iterator(n, entries),
            )?))
        } else {
            Err(Error::Dimension(format!(
                "{} entries fit neither a vector nor a matrix for dims {da}x{db}",
                self.re.len()
            )))
        }
    }
}
