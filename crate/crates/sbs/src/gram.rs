//! Gram-Schmidt orthogonalization, Gram determinants and the
//! discrimination bounds they induce.
//!
//! The orthonormal set {φᵢ} of a linearly independent family {ψᵢ} defines a
//! PVM {|φᵢ⟩⟨φᵢ|} ∪ {I − Σ|φᵢ⟩⟨φᵢ|} whose misidentification of each ψᵢ is
//! controlled by the overlaps ⟨φₖ|ψᵢ⟩ with k < i. Those overlaps can be
//! produced two ways: iteratively from the orthogonalization itself, or as
//! ratios of bordered Gram determinants that consume nothing but pairwise
//! inner products. Both routes are implemented; the iterative one is the
//! canonical path (modified Gram-Schmidt with one reorthogonalization pass),
//! the determinant route serves as an independent cross-check and underlies
//! the closed-form bounds.

use crate::error::{Result, SbsError};
use crate::linalg::{self, tol, trace_norm, CMatrix, CVector, DensityMatrix, PureState, C64};
use crate::qsd::Pvm;

/// Result of orthogonalizing a linearly independent family.
#[derive(Debug, Clone)]
pub struct GramBasis {
    inputs: Vec<PureState>,
    ortho: Vec<PureState>,
    normalizers: Vec<f64>,
    determinants: Vec<f64>,
}

impl GramBasis {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].dim()
    }

    pub fn input(&self, i: usize) -> &PureState {
        &self.inputs[i]
    }

    pub fn ortho(&self, i: usize) -> &PureState {
        &self.ortho[i]
    }

    pub fn ortho_states(&self) -> &[PureState] {
        &self.ortho
    }

    /// Normalizer αᵢ = ‖ψᵢ − Σ_{k<i} ⟨φₖ|ψᵢ⟩ φₖ‖.
    pub fn normalizer(&self, i: usize) -> f64 {
        self.normalizers[i]
    }

    /// Determinant of the j×j leading Gram minor, with D₀ = 1.
    pub fn gram_determinant(&self, j: usize) -> f64 {
        self.determinants[j]
    }

    /// Overlap ⟨φₖ|ψᵢ⟩ from the iterative construction.
    pub fn overlap(&self, i: usize, k: usize) -> C64 {
        self.ortho[k].inner(&self.inputs[i])
    }

    /// Rank-one PVM {|φᵢ⟩⟨φᵢ|}.
    pub fn pvm(&self) -> Result<Pvm> {
        Pvm::from_states(&self.ortho)
    }
}

/// Orthonormalize a linearly independent family, keeping the Gram metadata.
///
/// Rejects families whose smallest Gram eigenvalue is at or below the
/// independence threshold, naming the first offending vector.
pub fn gram_schmidt(vectors: &[PureState]) -> Result<GramBasis> {
    let gram = gram_matrix(vectors)?;
    check_independence(&gram)?;
    let n = vectors.len();

    let mut ortho: Vec<PureState> = Vec::with_capacity(n);
    let mut normalizers = Vec::with_capacity(n);
    for (i, psi) in vectors.iter().enumerate() {
        let mut v = psi.amplitudes().clone();
        // Modified Gram-Schmidt with a second sweep to scrub the residual
        // projections left by rounding.
        for _ in 0..2 {
            for phi in ortho.iter().take(i) {
                let coeff = phi.amplitudes().dotc(&v);
                v -= phi.amplitudes() * coeff;
            }
        }
        let norm = v.norm();
        if norm <= tol::INDEPENDENCE.sqrt() {
            return Err(SbsError::Degenerate {
                index: i,
                gram_eigenvalue: norm * norm,
            });
        }
        normalizers.push(norm);
        ortho.push(PureState::normalized(v)?);
    }

    let determinants = (0..=n)
        .map(|j| leading_determinant(&gram, j))
        .collect::<Vec<f64>>();

    Ok(GramBasis {
        inputs: vectors.to_vec(),
        ortho,
        normalizers,
        determinants,
    })
}

/// Matrix of pairwise inner products `G[a][b] = ⟨ψ_a|ψ_b⟩`.
fn gram_matrix(vectors: &[PureState]) -> Result<CMatrix> {
    if vectors.is_empty() {
        return Err(SbsError::Validation("empty vector family".into()));
    }
    let dim = vectors[0].dim();
    if vectors.iter().any(|v| v.dim() != dim) {
        return Err(SbsError::Shape("vectors differ in dimension".into()));
    }
    let n = vectors.len();
    Ok(CMatrix::from_fn(n, n, |a, b| vectors[a].inner(&vectors[b])))
}

fn leading_determinant(gram: &CMatrix, j: usize) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let minor = gram.view((0, 0), (j, j)).into_owned();
    minor.determinant().re
}

/// Reject families whose smallest Gram eigenvalue is ≤ the independence
/// threshold, reporting the first vector that closes the gap.
fn check_independence(gram: &CMatrix) -> Result<()> {
    for j in 1..=gram.nrows() {
        let minor = gram.view((0, 0), (j, j)).into_owned();
        let (values, _) = linalg::herm_eig(&minor)?;
        if values[0] <= tol::INDEPENDENCE {
            return Err(SbsError::Degenerate {
                index: j - 1,
                gram_eigenvalue: values[0],
            });
        }
    }
    Ok(())
}

/// Determinant D_j of the leading j×j Gram minor (D₀ = 1).
pub fn gram_determinant(vectors: &[PureState], j: usize) -> Result<f64> {
    let gram = gram_matrix(vectors)?;
    if j > vectors.len() {
        return Err(SbsError::Index {
            index: j,
            context: format!("Gram minor of a family of {}", vectors.len()),
        });
    }
    Ok(leading_determinant(&gram, j))
}

/// Overlap ⟨ψᵢ|φₖ⟩ written purely in terms of pairwise inner products:
/// a bordered Gram determinant divided by √(Dₖ D_{k+1}).
///
/// The bordered matrix replaces the last row of the (k+1)-th leading minor
/// with the inner products of ψᵢ against ψ₀…ψₖ.
pub fn overlap_via_determinant(vectors: &[PureState], i: usize, k: usize) -> Result<C64> {
    if k >= i {
        return Err(SbsError::Index {
            index: k,
            context: format!("determinant overlap requires k < i = {i}"),
        });
    }
    if i >= vectors.len() {
        return Err(SbsError::Index {
            index: i,
            context: format!("family of {}", vectors.len()),
        });
    }
    let gram = gram_matrix(vectors)?;
    let d_lower = leading_determinant(&gram, k);
    let d_upper = leading_determinant(&gram, k + 1);
    let denom = (d_lower * d_upper).max(0.0).sqrt();
    if denom <= f64::MIN_POSITIVE {
        return Err(SbsError::Degenerate {
            index: k,
            gram_eigenvalue: d_upper,
        });
    }
    let bordered = CMatrix::from_fn(k + 1, k + 1, |r, b| {
        if r < k {
            gram[(r, b)]
        } else {
            gram[(i, b)]
        }
    });
    Ok(bordered.determinant() / linalg::cr(denom))
}

/// Bound `2 Σ_{k<i} |⟨φₖ|ψᵢ⟩|` on the trace-norm defect left by projecting
/// ψᵢ onto its own Gram-Schmidt direction.
pub fn projection_defect_bound(basis: &GramBasis, i: usize) -> f64 {
    (0..i).map(|k| basis.overlap(i, k).norm()).sum::<f64>() * 2.0
}

/// Exact value `‖ρᵢ − Pᵢ ρᵢ Pᵢ‖₁` for ρᵢ = |ψᵢ⟩⟨ψᵢ| and Pᵢ = |φᵢ⟩⟨φᵢ|.
pub fn projection_defect_exact(basis: &GramBasis, i: usize) -> f64 {
    let psi = basis.input(i);
    let phi = basis.ortho(i);
    let amp = phi.inner(psi).norm_sqr();
    let diff = psi.projector() - phi.projector() * linalg::cr(amp);
    trace_norm(&diff)
}

/// Gram-PVM discrimination bound for an ensemble of pure states.
#[derive(Debug, Clone)]
pub struct GramPvmBound {
    /// `Σ_{i≥1} pᵢ · 2Σ_{k<i} |⟨φₖ|ψᵢ⟩|`, overlaps taken from the
    /// determinant route.
    pub bound: f64,
    pub pvm: Pvm,
    pub basis: GramBasis,
}

/// Bound the PVM discrimination objective of a pure-state ensemble by the
/// Gram construction; the returned PVM achieves at most `bound`.
pub fn pure_ensemble_bound(ensemble: &crate::qsd::Ensemble) -> Result<GramPvmBound> {
    let mut vectors = Vec::with_capacity(ensemble.len());
    for idx in 0..ensemble.len() {
        vectors.push(extract_pure(ensemble.state(idx), idx)?);
    }
    let basis = gram_schmidt(&vectors)?;
    let mut bound = 0.0;
    for i in 1..vectors.len() {
        let mut tail = 0.0;
        for k in 0..i {
            tail += overlap_via_determinant(&vectors, i, k)?.norm();
        }
        bound += ensemble.weight(i) * 2.0 * tail;
    }
    let pvm = basis.pvm()?;
    Ok(GramPvmBound { bound, pvm, basis })
}

fn extract_pure(rho: &DensityMatrix, idx: usize) -> Result<PureState> {
    let components = rho.spectral_components(1e-12)?;
    match components.first() {
        Some((weight, psi)) if (*weight - 1.0).abs() <= 1e-9 => Ok(psi.clone()),
        _ => Err(SbsError::Precondition(format!(
            "state {idx} is not pure (purity {:.6})",
            rho.purity()
        ))),
    }
}

/// Branch-ordered flattening of a finite mixture of mixtures.
///
/// Components are laid out branch by branch: all of branch 0, then branch 1,
/// and so on; `branch_of` inverts the layout.
#[derive(Debug, Clone)]
pub struct MixedIndex {
    states: Vec<PureState>,
    weights: Vec<f64>,
    branch_of: Vec<usize>,
    offsets: Vec<usize>,
    shape: Vec<usize>,
    branch_weights: Vec<f64>,
}

impl MixedIndex {
    /// Number of flattened components `S = Σ Mᵢ`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_branches(&self) -> usize {
        self.shape.len()
    }

    /// Components per branch.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn state(&self, s: usize) -> &PureState {
        &self.states[s]
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    /// Flattened weight ω_s = pᵢ ηᵢₖ.
    pub fn weight(&self, s: usize) -> f64 {
        self.weights[s]
    }

    /// Branch index of a flattened component.
    pub fn branch_of(&self, s: usize) -> usize {
        self.branch_of[s]
    }

    /// Flattened position of component k of branch i.
    pub fn flat_index(&self, i: usize, k: usize) -> Result<usize> {
        if i >= self.shape.len() || k >= self.shape[i] {
            return Err(SbsError::Index {
                index: k,
                context: format!("component of branch {i} (shape {:?})", self.shape),
            });
        }
        Ok(self.offsets[i] + k)
    }

    /// Inverse of `flat_index`.
    pub fn component(&self, s: usize) -> (usize, usize) {
        let i = self.branch_of[s];
        (i, s - self.offsets[i])
    }

    pub fn branch_weight(&self, i: usize) -> f64 {
        self.branch_weights[i]
    }

    /// Density operator of branch i, `Σₖ ηᵢₖ |ψᵢₖ⟩⟨ψᵢₖ|`.
    pub fn branch_density(&self, i: usize) -> Result<DensityMatrix> {
        let dim = self.states[0].dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for s in self.offsets[i]..self.offsets[i] + self.shape[i] {
            let eta = if self.branch_weights[i] > 0.0 {
                self.weights[s] / self.branch_weights[i]
            } else {
                0.0
            };
            acc += self.states[s].projector() * linalg::cr(eta);
        }
        DensityMatrix::new(acc)
    }
}

/// Weighted pure components of one branch.
pub type WeightedComponents = Vec<(f64, PureState)>;

/// Flatten `{(pᵢ, {(ηᵢₖ, ψᵢₖ)})}` into a single weighted sequence.
pub fn flatten_mixed(branches: &[(f64, WeightedComponents)]) -> Result<MixedIndex> {
    if branches.is_empty() {
        return Err(SbsError::Validation("no branches to flatten".into()));
    }
    let p_sum: f64 = branches.iter().map(|(p, _)| p).sum();
    if (p_sum - 1.0).abs() > tol::TRACE {
        return Err(SbsError::Validation(format!(
            "branch weights sum to {p_sum} instead of 1"
        )));
    }
    let dim = branches
        .first()
        .and_then(|(_, comps)| comps.first())
        .map(|(_, psi)| psi.dim())
        .ok_or_else(|| SbsError::Validation("branch 0 has no components".into()))?;

    let mut states = Vec::new();
    let mut weights = Vec::new();
    let mut branch_of = Vec::new();
    let mut offsets = Vec::new();
    let mut shape = Vec::new();
    let mut branch_weights = Vec::new();
    for (i, (p, comps)) in branches.iter().enumerate() {
        if comps.is_empty() {
            return Err(SbsError::Validation(format!(
                "branch {i} has no components"
            )));
        }
        if *p < 0.0 {
            return Err(SbsError::Validation(format!(
                "branch {i} has negative weight {p}"
            )));
        }
        let eta_sum: f64 = comps.iter().map(|(eta, _)| eta).sum();
        if (eta_sum - 1.0).abs() > tol::TRACE {
            return Err(SbsError::Validation(format!(
                "component weights of branch {i} sum to {eta_sum} instead of 1"
            )));
        }
        offsets.push(states.len());
        shape.push(comps.len());
        branch_weights.push(*p);
        for (eta, psi) in comps {
            if psi.dim() != dim {
                return Err(SbsError::Shape(format!(
                    "component of branch {i} has dim {}, expected {dim}",
                    psi.dim()
                )));
            }
            if *eta < 0.0 {
                return Err(SbsError::Validation(format!(
                    "branch {i} has a negative component weight {eta}"
                )));
            }
            states.push(psi.clone());
            weights.push(p * eta);
            branch_of.push(i);
        }
    }
    Ok(MixedIndex {
        states,
        weights,
        branch_of,
        offsets,
        shape,
        branch_weights,
    })
}

/// Block-PVM discrimination bound for finite mixtures.
#[derive(Debug, Clone)]
pub struct BlockPvmBound {
    /// Two-term bound: `ordered_term + same_branch_term`.
    pub bound: f64,
    /// `2 Σ_s ω_s Σ_{k<s} |⟨φₖ|ξ_s⟩|`.
    pub ordered_term: f64,
    /// `Σ_s ω_s Σ_{l≠s} Σ_{k≠s} |⟨φ_l|ξ_s⟩⟨ξ_s|φ_k⟩|` over same-branch pairs.
    pub same_branch_term: f64,
    /// Coarser single-sum variant `3 Σ_s ω_s Σ_{l≠s, same branch} |⟨φ_l|ξ_s⟩|`;
    /// recorded for reference, not used as the guarantee.
    pub coarse_bound: f64,
    /// Block projectors `Pᵢ = Σ_{s in branch i} |φ_s⟩⟨φ_s|`.
    pub block_projectors: Vec<CMatrix>,
    pub pvm: Pvm,
    pub basis: GramBasis,
}

/// The two-term bound and coarse variant for a prebuilt basis.
pub fn mixed_bound_terms(index: &MixedIndex, basis: &GramBasis) -> (f64, f64, f64) {
    let s_total = index.len();
    // overlaps[l][s] = ⟨φ_l|ξ_s⟩
    let overlaps = CMatrix::from_fn(s_total, s_total, |l, s| basis.overlap(s, l));

    let mut ordered = 0.0;
    let mut same_branch = 0.0;
    let mut coarse = 0.0;
    for s in 0..s_total {
        let w = index.weight(s);
        let branch = index.branch_of(s);
        let mut tail = 0.0;
        for k in 0..s {
            tail += overlaps[(k, s)].norm();
        }
        ordered += 2.0 * w * tail;

        let peers: Vec<usize> = (0..s_total)
            .filter(|&l| l != s && index.branch_of(l) == branch)
            .collect();
        let mut cross = 0.0;
        let mut single = 0.0;
        for &l in &peers {
            single += overlaps[(l, s)].norm();
            for &k in &peers {
                cross += overlaps[(l, s)].norm() * overlaps[(k, s)].norm();
            }
        }
        same_branch += w * cross;
        coarse += 3.0 * w * single;
    }
    (ordered, same_branch, coarse)
}

/// Bound the PVM discrimination objective of a finite mixture of pure
/// components by the block Gram construction.
pub fn mixed_ensemble_bound(index: &MixedIndex) -> Result<BlockPvmBound> {
    let basis = gram_schmidt(index.states())?;
    let (ordered_term, same_branch_term, coarse_bound) = mixed_bound_terms(index, &basis);

    let dim = index.state(0).dim();
    let mut block_projectors = vec![CMatrix::zeros(dim, dim); index.n_branches()];
    for s in 0..index.len() {
        block_projectors[index.branch_of(s)] += basis.ortho(s).projector();
    }
    let pvm = Pvm::new(block_projectors.clone())?;
    Ok(BlockPvmBound {
        bound: ordered_term + same_branch_term,
        ordered_term,
        same_branch_term,
        coarse_bound,
        block_projectors,
        pvm,
        basis,
    })
}

/// Reorder a family by an explicit permutation, for probing the order
/// sensitivity of the Gram-Schmidt bounds.
pub fn reorder<T: Clone>(items: &[T], order: &[usize]) -> Result<Vec<T>> {
    if order.len() != items.len() {
        return Err(SbsError::Shape(format!(
            "permutation of length {} applied to {} items",
            order.len(),
            items.len()
        )));
    }
    let mut seen = vec![false; items.len()];
    for &o in order {
        if o >= items.len() || seen[o] {
            return Err(SbsError::Validation(format!(
                "{order:?} is not a permutation"
            )));
        }
        seen[o] = true;
    }
    Ok(order.iter().map(|&o| items[o].clone()).collect())
}

/// Random orthonormal completion helper used by tests and examples: the
/// eigenbasis columns of a Hermitian matrix.
pub fn unitary_columns(h: &CMatrix) -> Result<Vec<PureState>> {
    let (_, vectors) = linalg::herm_eig(h)?;
    (0..h.nrows())
        .map(|j| PureState::normalized(CVector::from_column_slice(vectors.column(j).as_slice())))
        .collect()
}
