//! Dense complex linear algebra kernel: Kronecker products, partial trace,
//! Hermitian eigendecomposition, matrix functions, trace norm and fidelity.
//!
//! Everything here is a pure function of immutable inputs. Dimensions stay
//! small (a few factors of dimension ≤ 64), so storage is dense and all
//! spectral computations go through an explicit eigendecomposition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SbsError};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default cap on the dimension of full-space constructions.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Numerical tolerances used by validators.
pub mod tol {
    /// Max-norm Hermiticity defect allowed on operator inputs.
    pub const HERMITIAN: f64 = 1e-10;
    /// Allowed deviation of a density-matrix trace from one.
    pub const TRACE: f64 = 1e-10;
    /// Most negative eigenvalue allowed by the PSD check.
    pub const PSD: f64 = 1e-10;
    /// Allowed deviation of a pure-state norm from one.
    pub const STATE_NORM: f64 = 1e-12;
    /// Structural tolerance for POVM/PVM resolution and orthogonality checks.
    pub const MEASUREMENT: f64 = 1e-9;
    /// Smallest Gram-matrix eigenvalue accepted as linearly independent.
    pub const INDEPENDENCE: f64 = 1e-10;
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
}

/// Max-norm of the entrywise difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(a: &CMatrix, tolerance: f64) -> bool {
    a.is_square() && hermiticity_defect(a) <= tolerance
}

fn ensure_square(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(SbsError::Shape(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn ensure_finite(a: &CMatrix) -> Result<()> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SbsError::Validation("matrix contains NaN or Inf".into()));
    }
    Ok(())
}

fn ensure_hermitian(a: &CMatrix) -> Result<()> {
    ensure_square(a)?;
    let defect = hermiticity_defect(a);
    if defect > tol::HERMITIAN {
        return Err(SbsError::Validation(format!(
            "matrix is not Hermitian (max defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// Kronecker product `a ⊗ b` with the default dimension cap.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    kron_with_cap(a, b, DEFAULT_DIM_CAP)
}

/// Kronecker product `a ⊗ b`, rejecting results larger than `cap`.
pub fn kron_with_cap(a: &CMatrix, b: &CMatrix, cap: usize) -> Result<CMatrix> {
    let dim = a
        .nrows()
        .checked_mul(b.nrows())
        .ok_or(SbsError::DimensionCap {
            dim: usize::MAX,
            cap,
        })?;
    let cols = a
        .ncols()
        .checked_mul(b.ncols())
        .ok_or(SbsError::DimensionCap {
            dim: usize::MAX,
            cap,
        })?;
    if dim.max(cols) > cap {
        return Err(SbsError::DimensionCap {
            dim: dim.max(cols),
            cap,
        });
    }
    Ok(a.kronecker(b))
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[CMatrix], cap: usize) -> Result<CMatrix> {
    let mut iter = factors.iter();
    let first = iter
        .next()
        .ok_or_else(|| SbsError::Shape("kron_all needs at least one factor".into()))?;
    let mut acc = first.clone();
    for f in iter {
        acc = kron_with_cap(&acc, f, cap)?;
    }
    Ok(acc)
}

/// Partial trace of a square matrix on a tensor-product space.
///
/// `dims` lists the factor dimensions in tensor order; `keep` lists the
/// factor indices that survive (strictly increasing). The result acts on the
/// kept factors in their original order.
pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    ensure_square(m)?;
    let total: usize = dims.iter().product();
    if total != m.nrows() {
        return Err(SbsError::Shape(format!(
            "factor dims {:?} multiply to {}, but the matrix is {}x{}",
            dims,
            total,
            m.nrows(),
            m.ncols()
        )));
    }
    if keep.is_empty() {
        return Err(SbsError::Shape("keep set must be nonempty".into()));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || *keep.last().unwrap() >= dims.len() {
        return Err(SbsError::Shape(format!(
            "keep indices {:?} must be strictly increasing and < {}",
            keep,
            dims.len()
        )));
    }

    // Row index r decomposes big-endian over the factors; split each full
    // index into a kept part and a traced part and sum over the traced one.
    let mut strides = vec![1usize; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|f| !keep.contains(f)).collect();

    let offsets = |factors: &[usize]| -> Vec<usize> {
        let mut out = vec![0usize];
        for &f in factors {
            let mut next = Vec::with_capacity(out.len() * dims[f]);
            for &base in &out {
                for digit in 0..dims[f] {
                    next.push(base + digit * strides[f]);
                }
            }
            out = next;
        }
        out
    };
    let kept_offsets = offsets(keep);
    let traced_offsets = offsets(&traced);

    let kept_dim = kept_offsets.len();
    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for &t_off in &traced_offsets {
        for (a, &ka) in kept_offsets.iter().enumerate() {
            for (b, &kb) in kept_offsets.iter().enumerate() {
                out[(a, b)] += m[(ka + t_off, kb + t_off)];
            }
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix: `a = V diag(λ) V†`.
///
/// Eigenvalues are returned in ascending order with matching eigenvector
/// columns; the input must be Hermitian within the validation tolerance.
///
/// The backend eigensolver can mis-resolve tightly clustered eigenvalues on
/// larger matrices (orthonormal vectors that do not reconstruct the input).
/// The residual of `V†AV` is therefore checked, and a Jacobi pass on that
/// near-diagonal matrix repairs the basis when needed.
pub fn herm_eig(a: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    ensure_finite(a)?;
    ensure_hermitian(a)?;
    let n = a.nrows();
    let eig = a.clone().symmetric_eigen();
    let mut values = eig.eigenvalues;
    let mut vectors = eig.eigenvectors;

    let scale = values
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(1e-300);
    let mut rotated = vectors.adjoint() * a * &vectors;
    if max_offdiagonal(&rotated) > scale * 1e-12 {
        jacobi_diagonalize(&mut rotated, &mut vectors, scale);
        for i in 0..n {
            values[i] = rotated[(i, i)].re;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted_values = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut sorted_vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        sorted_vectors.set_column(col, &vectors.column(i));
    }
    Ok((sorted_values, sorted_vectors))
}

fn max_offdiagonal(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for p in 0..n {
        for q in (p + 1)..n {
            worst = worst.max(m[(p, q)].norm());
        }
    }
    worst
}

/// Cyclic complex Jacobi sweeps on a Hermitian matrix `m`, accumulating the
/// rotations into `v` (so `v` keeps diagonalizing the original operator).
/// Intended for nearly diagonal inputs, where a couple of sweeps reach
/// machine precision.
fn jacobi_diagonalize(m: &mut CMatrix, v: &mut CMatrix, scale: f64) {
    let n = m.nrows();
    let target = scale * 1e-15 * (n as f64).sqrt();
    for _sweep in 0..30 {
        if max_offdiagonal(m) <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let mpq = m[(p, q)];
                let size = mpq.norm();
                if size <= target * 0.1 {
                    continue;
                }
                // Unitary G zeroing the (p,q) entry: a phase absorbing
                // arg(m_pq) followed by the real Jacobi rotation.
                let u = mpq.conj() / cr(size);
                let tau = (m[(q, q)].re - m[(p, p)].re) / (2.0 * size);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = t * cos;

                // columns: (col_p, col_q) ← (c·col_p − u·s·col_q,
                //                            s·col_p + u·c·col_q)
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = mp * cr(cos) - mq * u * cr(sin);
                    m[(r, q)] = mp * cr(sin) + mq * u * cr(cos);
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * cr(cos) - vq * u * cr(sin);
                    v[(r, q)] = vp * cr(sin) + vq * u * cr(cos);
                }
                // rows: G† from the left
                for r in 0..n {
                    let mp = m[(p, r)];
                    let mq = m[(q, r)];
                    m[(p, r)] = mp * cr(cos) - mq * u.conj() * cr(sin);
                    m[(q, r)] = mp * cr(sin) + mq * u.conj() * cr(cos);
                }
            }
        }
    }
}

/// Unitary `exp(-i s h)` of a Hermitian generator, via eigendecomposition.
pub fn unitary_exp(h: &CMatrix, s: f64) -> Result<CMatrix> {
    let (values, vectors) = herm_eig(h)?;
    Ok(phase_conjugate(&values, &vectors, s))
}

/// `V diag(exp(-i s λ)) V†` for a precomputed eigensystem.
pub fn phase_conjugate(values: &DVector<f64>, vectors: &CMatrix, s: f64) -> CMatrix {
    let n = values.len();
    let phases = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        values.iter().map(|&lam| c(0.0, -s * lam).exp()),
    ));
    vectors * phases * vectors.adjoint()
}

/// Trace norm (sum of singular values).
///
/// Hermitian inputs go through the eigendecomposition; general matrices fall
/// back to an SVD.
pub fn trace_norm(a: &CMatrix) -> f64 {
    if is_hermitian(a, tol::HERMITIAN) {
        let eig = a.clone().symmetric_eigen();
        eig.eigenvalues.iter().map(|lam| lam.abs()).sum()
    } else {
        let svd = a.clone().svd(false, false);
        svd.singular_values.iter().sum()
    }
}

/// Trace distance `½‖a − b‖₁`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * trace_norm(&(a - b))
}

/// Principal square root of a PSD Hermitian matrix; tiny negative
/// eigenvalues from rounding are clipped to zero.
pub fn sqrtm_psd(a: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = herm_eig(a)?;
    let n = values.len();
    let roots = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        values.iter().map(|&lam| cr(lam.max(0.0).sqrt())),
    ));
    Ok(&vectors * roots * vectors.adjoint())
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    vec: CVector,
}

impl PureState {
    /// Wrap an already-normalized amplitude vector.
    pub fn new(vec: CVector) -> Result<Self> {
        if vec.is_empty() {
            return Err(SbsError::Validation("empty state vector".into()));
        }
        if vec.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SbsError::Validation(
                "state vector contains NaN or Inf".into(),
            ));
        }
        let norm = vec.norm();
        if (norm - 1.0).abs() > tol::STATE_NORM {
            return Err(SbsError::Validation(format!(
                "state vector norm {norm} is not 1 within {:.0e}",
                tol::STATE_NORM
            )));
        }
        Ok(Self { vec })
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(vec: CVector) -> Result<Self> {
        let norm = vec.norm();
        if norm < 1e-14 {
            return Err(SbsError::Validation(
                "cannot normalize a zero vector".into(),
            ));
        }
        Self::new(vec / cr(norm))
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::new(CVector::from_row_slice(amplitudes))
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(SbsError::Index {
                index,
                context: format!("basis state of dim {dim}"),
            });
        }
        let mut v = CVector::zeros(dim);
        v[index] = cr(1.0);
        Ok(Self { vec: v })
    }

    /// Uniform superposition `(|0⟩ + … + |d-1⟩)/√d`.
    pub fn plus(dim: usize) -> Self {
        let amp = cr(1.0 / (dim as f64).sqrt());
        Self {
            vec: CVector::from_element(dim, amp),
        }
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.vec
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.vec.dotc(&other.vec)
    }

    /// Rank-one projector `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> CMatrix {
        &self.vec * self.vec.adjoint()
    }
}

/// Finite-dimensional density operator: Hermitian, PSD and trace one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validate and wrap a candidate density matrix.
    ///
    /// Inputs failing the PSD check are rejected, not clipped; clipping
    /// would silently mask bound violations downstream.
    pub fn new(mat: CMatrix) -> Result<Self> {
        ensure_finite(&mat)?;
        ensure_hermitian(&mat)?;
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > tol::TRACE || trace.im.abs() > tol::TRACE {
            return Err(SbsError::Validation(format!(
                "trace is {trace} instead of 1"
            )));
        }
        let eig = mat.clone().symmetric_eigen();
        let min_eig = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -tol::PSD {
            return Err(SbsError::Validation(format!(
                "matrix is not PSD (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { mat })
    }

    pub(crate) fn new_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            mat: psi.projector(),
        }
    }

    /// Convex mixture `Σ wᵢ ρᵢ`.
    pub fn mixture(items: &[(f64, DensityMatrix)]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| SbsError::Validation("empty mixture".into()))?;
        let dim = first.1.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        let mut weight_sum = 0.0;
        for (w, rho) in items {
            if rho.dim() != dim {
                return Err(SbsError::Shape(
                    "mixture members differ in dimension".into(),
                ));
            }
            if *w < -tol::TRACE {
                return Err(SbsError::Validation(format!("negative mixture weight {w}")));
            }
            acc += rho.matrix() * cr(*w);
            weight_sum += w;
        }
        if (weight_sum - 1.0).abs() > tol::TRACE {
            return Err(SbsError::Validation(format!(
                "mixture weights sum to {weight_sum} instead of 1"
            )));
        }
        Self::new(acc)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: identity(dim) * cr(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Spectral decomposition restricted to eigenvalues above `threshold`,
    /// as (weight, eigenvector) pairs in descending weight order.
    pub fn spectral_components(&self, threshold: f64) -> Result<Vec<(f64, PureState)>> {
        let (values, vectors) = herm_eig(&self.mat)?;
        let mut out = Vec::new();
        for i in (0..values.len()).rev() {
            if values[i] > threshold {
                let col = CVector::from_column_slice(vectors.column(i).as_slice());
                out.push((values[i], PureState::normalized(col)?));
            }
        }
        Ok(out)
    }

    /// Projector onto the support: eigenvectors with eigenvalue above the
    /// rank threshold `1e-10`.
    pub fn support_projector(&self) -> Result<CMatrix> {
        let dim = self.dim();
        let mut proj = CMatrix::zeros(dim, dim);
        for (_, psi) in self.spectral_components(1e-10)? {
            proj += psi.projector();
        }
        Ok(proj)
    }
}

/// Partial trace specialized to density matrices; trace is preserved.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let out = partial_trace_matrix(rho.matrix(), dims, keep)?;
    Ok(DensityMatrix::new_unchecked(out))
}

/// Uhlmann fidelity `F(ρ,σ) = ‖√ρ √σ‖₁²`, computed as `(Tr √(√σ ρ √σ))²`.
///
/// Eigenvalues of the inner product below `1e-13` are treated as exact
/// zeros: they sit at the rounding floor of the eigensolver and their
/// square roots would otherwise inject noise of order `1e-8` per spurious
/// direction. Dropping them can only underestimate the fidelity, which is
/// the safe direction for every bound built on it.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(SbsError::Shape(format!(
            "fidelity of states with dims {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let root = sqrtm_psd(sigma.matrix())?;
    let inner = &root * rho.matrix() * &root;
    let (values, _) = herm_eig(&inner)?;
    let sum: f64 = values
        .iter()
        .map(|&lam| if lam > 1e-13 { lam.sqrt() } else { 0.0 })
        .sum();
    Ok((sum * sum).clamp(0.0, 1.0))
}
