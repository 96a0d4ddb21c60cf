//! Dephasing dynamics of a central system coupled to N environments through
//! an interaction of the measurement type: `H = X ⊗ Σₖ gₖ Bₖ`.
//!
//! In the eigenbasis {|i⟩} of X (eigenvalues xᵢ), the joint state at time t
//! of the system and the first `observed` environments is
//!
//! `Σᵢⱼ σᵢⱼ Γ(i,j,t) |i⟩⟨j| ⊗ ⊗ₖ ρ_{xᵢ,xⱼ}^{k,t}`
//!
//! with conditional environment operators
//! `ρ_{x,y}^{k,t} = e^{-itxgₖBₖ} ρᵏ e^{itygₖBₖ}` and the decoherence factor
//! `Γ(i,j,t) = Π_{k traced} Tr ρ_{xᵢ,xⱼ}^{k,t}`. Everything is computed with
//! per-environment dₖ×dₖ exponentials from a cached eigendecomposition of
//! each Bₖ; the full product space is only ever built on request, inside the
//! dimension cap.

use nalgebra::DVector;

use crate::error::{Result, SbsError};
use crate::gram::{flatten_mixed, gram_schmidt, GramBasis, MixedIndex};
use crate::linalg::{
    self, cr, identity, kron_all, phase_conjugate, tol, CMatrix, DensityMatrix, PureState,
};
use crate::qsd::{Pvm, SbsState};

/// Branch weights below this are treated as absent.
const ZERO_WEIGHT: f64 = 1e-14;

/// Initial state of one environment.
#[derive(Debug, Clone)]
pub enum EnvInitial {
    Pure(PureState),
    /// Explicit convex mixture of pure components.
    Mixture(Vec<(f64, PureState)>),
    Density(DensityMatrix),
}

impl EnvInitial {
    pub fn dim(&self) -> usize {
        match self {
            EnvInitial::Pure(psi) => psi.dim(),
            EnvInitial::Mixture(comps) => comps.first().map(|(_, psi)| psi.dim()).unwrap_or(0),
            EnvInitial::Density(rho) => rho.dim(),
        }
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        match self {
            EnvInitial::Pure(psi) => Ok(DensityMatrix::from_pure(psi)),
            EnvInitial::Mixture(comps) => DensityMatrix::mixture(
                &comps
                    .iter()
                    .map(|(w, psi)| (*w, DensityMatrix::from_pure(psi)))
                    .collect::<Vec<_>>(),
            ),
            EnvInitial::Density(rho) => Ok(rho.clone()),
        }
    }

    /// Pure decomposition. Explicit mixtures are returned as given; density
    /// inputs fall back to their spectral decomposition.
    pub fn components(&self) -> Result<Vec<(f64, PureState)>> {
        match self {
            EnvInitial::Pure(psi) => Ok(vec![(1.0, psi.clone())]),
            EnvInitial::Mixture(comps) => Ok(comps.clone()),
            EnvInitial::Density(rho) => rho.spectral_components(1e-12),
        }
    }
}

/// One environment of the model.
#[derive(Debug, Clone)]
pub struct Environment {
    pub dim: usize,
    pub coupling: f64,
    pub generator: CMatrix,
    pub initial: EnvInitial,
}

/// Validated model: pointer eigenvalues, system state in the pointer basis,
/// environments, and the observed/traced split (the first `observed`
/// environments are kept, the rest are traced out).
#[derive(Debug, Clone)]
pub struct VonNeumannModel {
    eigenvalues: Vec<f64>,
    system: DensityMatrix,
    environments: Vec<Environment>,
    observed: usize,
    env_eigs: Vec<(DVector<f64>, CMatrix)>,
    env_pops: Vec<Vec<f64>>,
    env_densities: Vec<DensityMatrix>,
    warnings: Vec<String>,
}

impl VonNeumannModel {
    pub fn new(
        eigenvalues: Vec<f64>,
        system: DensityMatrix,
        environments: Vec<Environment>,
        observed: usize,
    ) -> Result<Self> {
        if eigenvalues.len() != system.dim() {
            return Err(SbsError::Shape(format!(
                "{} pointer eigenvalues for a system of dim {}",
                eigenvalues.len(),
                system.dim()
            )));
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(SbsError::Validation(
                "pointer eigenvalues must be finite".into(),
            ));
        }
        if environments.is_empty() {
            return Err(SbsError::Validation(
                "at least one environment is required".into(),
            ));
        }
        if observed == 0 || observed > environments.len() {
            return Err(SbsError::Validation(format!(
                "observed count {observed} must lie in 1..={}",
                environments.len()
            )));
        }

        let mut env_eigs = Vec::with_capacity(environments.len());
        let mut env_pops = Vec::with_capacity(environments.len());
        let mut env_densities = Vec::with_capacity(environments.len());
        for (k, env) in environments.iter().enumerate() {
            if env.generator.nrows() != env.dim || env.generator.ncols() != env.dim {
                return Err(SbsError::Shape(format!(
                    "environment {k}: generator is {}x{}, expected {}x{}",
                    env.generator.nrows(),
                    env.generator.ncols(),
                    env.dim,
                    env.dim
                )));
            }
            if !env.coupling.is_finite() {
                return Err(SbsError::Validation(format!(
                    "environment {k}: coupling must be finite"
                )));
            }
            if env.initial.dim() != env.dim {
                return Err(SbsError::Shape(format!(
                    "environment {k}: initial state has dim {}, expected {}",
                    env.initial.dim(),
                    env.dim
                )));
            }
            if let EnvInitial::Mixture(comps) = &env.initial {
                if comps.is_empty() {
                    return Err(SbsError::Validation(format!(
                        "environment {k}: empty mixture"
                    )));
                }
                let sum: f64 = comps.iter().map(|(w, _)| w).sum();
                if (sum - 1.0).abs() > tol::TRACE || comps.iter().any(|(w, _)| *w < 0.0) {
                    return Err(SbsError::Validation(format!(
                        "environment {k}: mixture weights sum to {sum} instead of 1"
                    )));
                }
            }
            let eig = linalg::herm_eig(&env.generator).map_err(|_| {
                SbsError::Validation(format!("environment {k}: generator is not Hermitian"))
            })?;
            let density = env.initial.density()?;
            let rotated = eig.1.adjoint() * density.matrix() * &eig.1;
            let pops: Vec<f64> = (0..env.dim).map(|a| rotated[(a, a)].re).collect();
            env_eigs.push(eig);
            env_pops.push(pops);
            env_densities.push(density);
        }

        let mut warnings = Vec::new();
        for i in 0..eigenvalues.len() {
            for j in (i + 1)..eigenvalues.len() {
                if eigenvalues[i] == eigenvalues[j] {
                    warnings.push(format!(
                        "pointer eigenvalues {i} and {j} coincide; these branches never \
                         decohere and are merged in PVM constructions"
                    ));
                }
            }
        }

        Ok(Self {
            eigenvalues,
            system,
            environments,
            observed,
            env_eigs,
            env_pops,
            env_densities,
            warnings,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn system(&self) -> &DensityMatrix {
        &self.system
    }

    /// Matrix element σᵢⱼ = ⟨i|ρ_S|j⟩ in the pointer basis.
    pub fn sigma(&self, i: usize, j: usize) -> linalg::C64 {
        self.system.matrix()[(i, j)]
    }

    /// Diagonal weight σᵢ.
    pub fn sigma_diag(&self, i: usize) -> f64 {
        self.system.matrix()[(i, i)].re
    }

    pub fn n_envs(&self) -> usize {
        self.environments.len()
    }

    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn env(&self, k: usize) -> &Environment {
        &self.environments[k]
    }

    pub fn environments(&self) -> &[Environment] {
        &self.environments
    }

    pub fn initial_density(&self, k: usize) -> &DensityMatrix {
        &self.env_densities[k]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Branch unitary `e^{-i t x gₖ Bₖ}` on environment k alone.
    pub fn branch_unitary(&self, k: usize, x: f64, t: f64) -> CMatrix {
        let (values, vectors) = &self.env_eigs[k];
        phase_conjugate(values, vectors, t * x * self.environments[k].coupling)
    }

    /// Observed-space dimension `Π_{k<observed} dₖ`.
    pub fn observed_dim(&self) -> usize {
        self.environments[..self.observed]
            .iter()
            .map(|e| e.dim)
            .product()
    }

    /// Full assembled dimension of system plus observed environments.
    pub fn assembled_dim(&self) -> usize {
        self.system_dim() * self.observed_dim()
    }

    /// Full product-space dimension over all environments.
    pub fn total_dim(&self) -> usize {
        self.system_dim() * self.environments.iter().map(|e| e.dim).product::<usize>()
    }
}

/// Conditional environment operator `e^{-itxgₖBₖ} ρᵏ e^{itygₖBₖ}`.
///
/// For x = y this is a unitary conjugation of the initial state; in general
/// it is a non-Hermitian operator of trace norm one.
pub fn conditional_env_state(
    model: &VonNeumannModel,
    k: usize,
    x: f64,
    y: f64,
    t: f64,
) -> Result<CMatrix> {
    if k >= model.n_envs() {
        return Err(SbsError::Index {
            index: k,
            context: format!("environment of a model with {}", model.n_envs()),
        });
    }
    let ux = model.branch_unitary(k, x, t);
    let uy = model.branch_unitary(k, y, t);
    Ok(&ux * model.initial_density(k).matrix() * uy.adjoint())
}

/// Branch-conditional environment state `ρ_{xᵢ}^{k,t}` (diagonal case).
pub fn branch_env_state(
    model: &VonNeumannModel,
    k: usize,
    i: usize,
    t: f64,
) -> Result<DensityMatrix> {
    let x = model.eigenvalue(i);
    let m = conditional_env_state(model, k, x, x, t)?;
    Ok(DensityMatrix::new_unchecked(m))
}

/// Evolved pure component `e^{-itxgₖBₖ}|χ⟩`.
fn evolved_component(
    model: &VonNeumannModel,
    k: usize,
    x: f64,
    t: f64,
    chi: &PureState,
) -> Result<PureState> {
    let u = model.branch_unitary(k, x, t);
    PureState::normalized(&u * chi.amplitudes())
}

/// Decoherence factor of one environment,
/// `γᵢⱼᵏ(t) = Tr ρ_{xᵢ,xⱼ}^{k,t} = Σₐ ρ̃ₐₐ e^{-itgₖλₐ(xᵢ−xⱼ)}`.
pub fn gamma(model: &VonNeumannModel, k: usize, i: usize, j: usize, t: f64) -> linalg::C64 {
    let dx = model.eigenvalue(i) - model.eigenvalue(j);
    let g = model.env(k).coupling;
    let (values, _) = &model.env_eigs[k];
    let mut acc = linalg::c(0.0, 0.0);
    for (a, lam) in values.iter().enumerate() {
        acc += linalg::c(0.0, -t * g * lam * dx).exp() * cr(model.env_pops[k][a]);
    }
    acc
}

/// Product of γ over the traced environments, `Γ(i,j,t)`.
pub fn decoherence_factor(model: &VonNeumannModel, i: usize, j: usize, t: f64) -> linalg::C64 {
    let mut acc = cr(1.0);
    for k in model.observed()..model.n_envs() {
        acc *= gamma(model, k, i, j, t);
    }
    acc
}

/// Total off-diagonal suppression `Γ(t) = Σ_{i≠j} |σᵢⱼ| Π_{k traced} |γᵢⱼᵏ(t)|`.
pub fn gamma_total(model: &VonNeumannModel, t: f64) -> f64 {
    let d = model.system_dim();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let mut damp = model.sigma(i, j).norm();
            for k in model.observed()..model.n_envs() {
                damp *= gamma(model, k, i, j, t).norm();
            }
            acc += damp;
        }
    }
    acc
}

/// The joint state of system and observed environments at one time, kept in
/// factored form: coefficients `σᵢⱼ Γ(i,j,t)` and per-pair conditional
/// environment operators.
#[derive(Debug, Clone)]
pub struct ReducedState {
    t: f64,
    coefficients: CMatrix,
    conditionals: Vec<Vec<Vec<CMatrix>>>,
    observed_dims: Vec<usize>,
}

impl ReducedState {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn coefficient(&self, i: usize, j: usize) -> linalg::C64 {
        self.coefficients[(i, j)]
    }

    pub fn coefficients(&self) -> &CMatrix {
        &self.coefficients
    }

    /// Conditional operator of observed environment k for branch pair (i, j).
    pub fn conditional(&self, k: usize, i: usize, j: usize) -> &CMatrix {
        &self.conditionals[k][i][j]
    }

    /// Assemble the dense joint state `Σᵢⱼ cᵢⱼ |i⟩⟨j| ⊗ ⊗ₖ ρᵢⱼᵏ`.
    pub fn assemble(&self, cap: usize) -> Result<DensityMatrix> {
        let d_s = self.coefficients.nrows();
        let obs_dim: usize = self.observed_dims.iter().product();
        let full = d_s * obs_dim;
        if full > cap {
            return Err(SbsError::DimensionCap { dim: full, cap });
        }
        let mut out = CMatrix::zeros(full, full);
        for i in 0..d_s {
            for j in 0..d_s {
                let coeff = self.coefficients[(i, j)];
                if coeff.norm() == 0.0 {
                    continue;
                }
                let factors: Vec<CMatrix> = (0..self.observed_dims.len())
                    .map(|k| self.conditionals[k][i][j].clone())
                    .collect();
                let blob = kron_all(&factors, cap)? * coeff;
                out.view_mut((i * obs_dim, j * obs_dim), (obs_dim, obs_dim))
                    .copy_from(&blob);
            }
        }
        DensityMatrix::new(out)
    }
}

/// The evolved state of system plus observed environments in factored form.
pub fn reduced_state(model: &VonNeumannModel, t: f64) -> Result<ReducedState> {
    let d_s = model.system_dim();
    let coefficients = CMatrix::from_fn(d_s, d_s, |i, j| {
        model.sigma(i, j) * decoherence_factor(model, i, j, t)
    });
    build_reduced(model, t, coefficients)
}

/// The same state with all coherences discarded: `Σᵢ σᵢ |i⟩⟨i| ⊗ ⊗ₖ ρ_{xᵢ}ᵏ`.
pub fn diag_state(model: &VonNeumannModel, t: f64) -> Result<ReducedState> {
    let d_s = model.system_dim();
    let coefficients = CMatrix::from_fn(d_s, d_s, |i, j| {
        if i == j {
            cr(model.sigma_diag(i))
        } else {
            cr(0.0)
        }
    });
    build_reduced(model, t, coefficients)
}

fn build_reduced(model: &VonNeumannModel, t: f64, coefficients: CMatrix) -> Result<ReducedState> {
    let d_s = model.system_dim();
    let mut conditionals = Vec::with_capacity(model.observed());
    for k in 0..model.observed() {
        let mut per_i = Vec::with_capacity(d_s);
        for i in 0..d_s {
            let mut per_j = Vec::with_capacity(d_s);
            for j in 0..d_s {
                per_j.push(conditional_env_state(
                    model,
                    k,
                    model.eigenvalue(i),
                    model.eigenvalue(j),
                    t,
                )?);
            }
            per_i.push(per_j);
        }
        conditionals.push(per_i);
    }
    Ok(ReducedState {
        t,
        coefficients,
        conditionals,
        observed_dims: model.environments()[..model.observed()]
            .iter()
            .map(|e| e.dim)
            .collect(),
    })
}

/// Interaction generator `Σₖ gₖ X ⊗ (… ⊗ Bₖ ⊗ …)` over the given number of
/// environments, built on the product space.
pub fn interaction_generator(
    model: &VonNeumannModel,
    n_envs: usize,
    cap: usize,
) -> Result<CMatrix> {
    let d_s = model.system_dim();
    let x = CMatrix::from_fn(d_s, d_s, |i, j| {
        if i == j {
            cr(model.eigenvalue(i))
        } else {
            cr(0.0)
        }
    });
    let mut total = None;
    for k in 0..n_envs {
        let mut factors: Vec<CMatrix> = vec![x.clone()];
        for (l, env) in model.environments()[..n_envs].iter().enumerate() {
            if l == k {
                factors.push(&env.generator * cr(env.coupling));
            } else {
                factors.push(identity(env.dim));
            }
        }
        let term = kron_all(&factors, cap)?;
        total = Some(match total {
            None => term,
            Some(acc) => acc + term,
        });
    }
    total.ok_or_else(|| SbsError::Validation("no environments".into()))
}

/// Trace distance between the factored-form state and the composition of a
/// local dephasing map on the system with the observed-space unitary. The
/// two routes describe the same channel, so the distance is a consistency
/// residual.
pub fn channel_decomposition_check(model: &VonNeumannModel, t: f64, cap: usize) -> Result<f64> {
    let direct = reduced_state(model, t)?.assemble(cap)?;

    let d_s = model.system_dim();
    let dephased = CMatrix::from_fn(d_s, d_s, |i, j| {
        model.sigma(i, j) * decoherence_factor(model, i, j, t)
    });
    let mut factors = vec![dephased];
    for k in 0..model.observed() {
        factors.push(model.initial_density(k).matrix().clone());
    }
    let initial = kron_all(&factors, cap)?;
    let h = interaction_generator(model, model.observed(), cap)?;
    let u = linalg::unitary_exp(&h, t)?;
    let via_channel = &u * initial * u.adjoint();

    Ok(0.5 * linalg::trace_norm(&(direct.matrix() - via_channel)))
}

/// How the per-environment branch projectors are chosen.
#[derive(Debug, Clone)]
pub enum SbsStrategy {
    /// Gram-Schmidt orthogonalization of the evolved branch states
    /// (block version for mixed initial states).
    Gram,
    /// Projectors onto the supports of the evolved branch states; requires
    /// the supports to be mutually orthogonal.
    Support,
    /// Caller-supplied PVMs, one per observed environment, with one
    /// projector per branch.
    Custom(Vec<Pvm>),
}

/// Branches grouped by exact pointer-eigenvalue equality, with zero-weight
/// classes dropped.
#[derive(Debug, Clone)]
struct BranchClasses {
    class_of: Vec<Option<usize>>,
    reps: Vec<usize>,
    weights: Vec<f64>,
    merged: bool,
    dropped: bool,
}

fn branch_classes(model: &VonNeumannModel) -> BranchClasses {
    let d = model.system_dim();
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in 0..d {
        let x = model.eigenvalue(i);
        match groups.iter_mut().find(|(gx, _)| *gx == x) {
            Some((_, members)) => members.push(i),
            None => groups.push((x, vec![i])),
        }
    }
    let mut class_of = vec![None; d];
    let mut reps = Vec::new();
    let mut weights = Vec::new();
    let mut merged = false;
    let mut dropped = false;
    for (_, members) in &groups {
        let w: f64 = members.iter().map(|&i| model.sigma_diag(i)).sum();
        if w <= ZERO_WEIGHT {
            dropped = true;
            continue;
        }
        let class = reps.len();
        reps.push(members[0]);
        weights.push(w);
        if members.len() > 1 {
            merged = true;
        }
        for &i in members {
            class_of[i] = Some(class);
        }
    }
    if class_of.iter().any(|c| c.is_none()) {
        dropped = true;
    }
    BranchClasses {
        class_of,
        reps,
        weights,
        merged,
        dropped,
    }
}

/// Gram construction for the evolved branch states of one observed
/// environment: the orthonormalized family, its index structure, and the
/// mapping from branches to projector classes.
#[derive(Debug, Clone)]
pub struct EnvBranchGram {
    pub env: usize,
    /// Branch → projector class; `None` for zero-weight branches.
    pub class_of: Vec<Option<usize>>,
    /// Total system weight per class.
    pub class_weights: Vec<f64>,
    pub kind: EnvBranchGramKind,
}

#[derive(Debug, Clone)]
pub enum EnvBranchGramKind {
    /// Pure initial state: one evolved vector per class.
    Pure { basis: GramBasis },
    /// Mixed initial state: flattened components with block projectors.
    Mixed { index: MixedIndex, basis: GramBasis },
}

impl EnvBranchGram {
    pub fn n_classes(&self) -> usize {
        self.class_weights.len()
    }

    /// Projector of one class: a single Gram direction for pure initial
    /// states, a block of them for mixed ones.
    pub fn class_projector(&self, class: usize) -> CMatrix {
        match &self.kind {
            EnvBranchGramKind::Pure { basis } => basis.ortho(class).projector(),
            EnvBranchGramKind::Mixed { index, basis } => {
                let dim = basis.dim();
                let mut acc = CMatrix::zeros(dim, dim);
                for s in 0..index.len() {
                    if index.branch_of(s) == class {
                        acc += basis.ortho(s).projector();
                    }
                }
                acc
            }
        }
    }

    pub fn branch_projector(&self, i: usize, dim: usize) -> CMatrix {
        match self.class_of[i] {
            Some(class) => self.class_projector(class),
            None => CMatrix::zeros(dim, dim),
        }
    }

    /// PVM formed by the class projectors.
    pub fn pvm(&self) -> Result<Pvm> {
        Pvm::new(
            (0..self.n_classes())
                .map(|c| self.class_projector(c))
                .collect(),
        )
    }
}

/// Build the Gram construction for observed environment k at time t.
pub fn env_branch_gram(model: &VonNeumannModel, k: usize, t: f64) -> Result<EnvBranchGram> {
    if k >= model.observed() {
        return Err(SbsError::Index {
            index: k,
            context: format!("observed environment (observed = {})", model.observed()),
        });
    }
    let classes = branch_classes(model);
    let components = model.env(k).initial.components()?;
    let map_degeneracy = |e: SbsError| match e {
        SbsError::Degenerate { .. } => SbsError::DegenerateBranches { env: k, t },
        other => other,
    };

    let kind = if components.len() == 1 {
        let chi = &components[0].1;
        let vectors: Vec<PureState> = classes
            .reps
            .iter()
            .map(|&i| evolved_component(model, k, model.eigenvalue(i), t, chi))
            .collect::<Result<_>>()?;
        let basis = gram_schmidt(&vectors).map_err(map_degeneracy)?;
        EnvBranchGramKind::Pure { basis }
    } else {
        let total: f64 = classes.weights.iter().sum();
        let branches: Vec<(f64, Vec<(f64, PureState)>)> = classes
            .reps
            .iter()
            .zip(classes.weights.iter())
            .map(|(&i, &w)| {
                let evolved: Result<Vec<(f64, PureState)>> = components
                    .iter()
                    .map(|(eta, chi)| {
                        Ok((
                            *eta,
                            evolved_component(model, k, model.eigenvalue(i), t, chi)?,
                        ))
                    })
                    .collect();
                Ok((w / total, evolved?))
            })
            .collect::<Result<_>>()?;
        let index = flatten_mixed(&branches)?;
        let basis = gram_schmidt(index.states()).map_err(map_degeneracy)?;
        EnvBranchGramKind::Mixed { index, basis }
    };

    Ok(EnvBranchGram {
        env: k,
        class_of: classes.class_of,
        class_weights: classes.weights,
        kind,
    })
}

/// SBS approximant at one time: branch projectors applied to the diagonal
/// state, with the normalizer 𝒩 and the PVMs that produced it.
#[derive(Debug, Clone)]
pub struct SbsApproximant {
    t: f64,
    sigma: Vec<f64>,
    /// Unnormalized projected states `Pᵢᵏ ρ_{xᵢ}^{k,t} Pᵢᵏ`, indexed [i][k].
    projected: Vec<Vec<CMatrix>>,
    branch_traces: Vec<f64>,
    normalizer: f64,
    env_grams: Option<Vec<EnvBranchGram>>,
    flags: Vec<String>,
}

impl SbsApproximant {
    pub fn time(&self) -> f64 {
        self.t
    }

    /// Normalizing constant 𝒩 = Σᵢ σᵢ Πₖ Tr(Pᵢᵏ ρ_{xᵢ}^{k,t} Pᵢᵏ), in (0, 1].
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Rescaled pointer coefficients σᵢ/𝒩.
    pub fn sigma_tilde(&self, i: usize) -> f64 {
        self.sigma[i] / self.normalizer
    }

    pub fn branch_projected(&self, i: usize, k: usize) -> &CMatrix {
        &self.projected[i][k]
    }

    pub fn flags(&self) -> &[String] {
        &self.flags
    }

    pub fn env_grams(&self) -> Option<&[EnvBranchGram]> {
        self.env_grams.as_deref()
    }

    /// `Σᵢ σᵢ |i⟩⟨i| ⊗ ⊗ₖ Pᵢᵏ ρ_{xᵢ}^{k,t} Pᵢᵏ` (trace 𝒩, not 1).
    pub fn assemble_unnormalized(&self, cap: usize) -> Result<CMatrix> {
        let d_s = self.sigma.len();
        let obs_dim: usize = self.projected[0].iter().map(|m| m.nrows()).product();
        let full = d_s * obs_dim;
        if full > cap {
            return Err(SbsError::DimensionCap { dim: full, cap });
        }
        let mut out = CMatrix::zeros(full, full);
        for i in 0..d_s {
            if self.sigma[i] <= ZERO_WEIGHT {
                continue;
            }
            let blob = kron_all(&self.projected[i], cap)? * cr(self.sigma[i]);
            out.view_mut((i * obs_dim, i * obs_dim), (obs_dim, obs_dim))
                .copy_from(&blob);
        }
        Ok(out)
    }

    /// The normalized approximant, a valid density operator.
    pub fn assemble_normalized(&self, cap: usize) -> Result<DensityMatrix> {
        let un = self.assemble_unnormalized(cap)?;
        DensityMatrix::new(un / cr(self.normalizer))
    }

    /// Repackage as an explicit SBS structure with normalized branch states
    /// and pointer probabilities `σᵢ Πₖ Tr(…) / 𝒩`; zero-weight branches are
    /// dropped.
    pub fn to_sbs_state(&self) -> Result<SbsState> {
        let mut probs = Vec::new();
        let mut branches = Vec::new();
        for i in 0..self.sigma.len() {
            let p = self.sigma[i] * self.branch_traces[i] / self.normalizer;
            if p <= ZERO_WEIGHT {
                continue;
            }
            let row: Result<Vec<DensityMatrix>> = self.projected[i]
                .iter()
                .map(|m| {
                    let tr = m.trace().re;
                    DensityMatrix::new(m / cr(tr))
                })
                .collect();
            probs.push(p);
            branches.push(row?);
        }
        SbsState::new(probs, branches)
    }
}

/// Construct the SBS approximant of the evolved state at time t.
pub fn sbs_approximant(
    model: &VonNeumannModel,
    t: f64,
    strategy: &SbsStrategy,
) -> Result<SbsApproximant> {
    let d_s = model.system_dim();
    let n_obs = model.observed();
    let mut flags = Vec::new();

    let (projectors, env_grams): (Vec<Vec<CMatrix>>, Option<Vec<EnvBranchGram>>) = match strategy {
        SbsStrategy::Gram => {
            let grams: Vec<EnvBranchGram> = (0..n_obs)
                .map(|k| env_branch_gram(model, k, t))
                .collect::<Result<_>>()?;
            let classes = branch_classes(model);
            if classes.merged {
                flags.push("degenerate-x-merge".into());
            }
            if classes.dropped {
                flags.push("zero-weight-branch-dropped".into());
            }
            let projs = (0..n_obs)
                .map(|k| {
                    (0..d_s)
                        .map(|i| grams[k].branch_projector(i, model.env(k).dim))
                        .collect()
                })
                .collect();
            // reindex [k][i] → [i][k]
            let projs: Vec<Vec<CMatrix>> = transpose(projs);
            (projs, Some(grams))
        }
        SbsStrategy::Support => {
            let mut per_env: Vec<Vec<CMatrix>> = Vec::with_capacity(n_obs);
            for k in 0..n_obs {
                let dim = model.env(k).dim;
                let mut ps: Vec<CMatrix> = Vec::with_capacity(d_s);
                for i in 0..d_s {
                    if model.sigma_diag(i) <= ZERO_WEIGHT {
                        ps.push(CMatrix::zeros(dim, dim));
                    } else {
                        ps.push(branch_env_state(model, k, i, t)?.support_projector()?);
                    }
                }
                for i in 0..d_s {
                    for j in (i + 1)..d_s {
                        let cross = &ps[i] * &ps[j];
                        let worst = cross.iter().map(|z| z.norm()).fold(0.0, f64::max);
                        if worst > tol::MEASUREMENT {
                            return Err(SbsError::Precondition(format!(
                                "support strategy needs orthogonal branch supports; \
                                 environment {k} branches {i},{j} overlap ({worst:.3e})"
                            )));
                        }
                    }
                }
                per_env.push(ps);
            }
            (transpose(per_env), None)
        }
        SbsStrategy::Custom(pvms) => {
            if pvms.len() != n_obs {
                return Err(SbsError::Shape(format!(
                    "{} PVMs supplied for {} observed environments",
                    pvms.len(),
                    n_obs
                )));
            }
            let mut per_env: Vec<Vec<CMatrix>> = Vec::with_capacity(n_obs);
            for (k, pvm) in pvms.iter().enumerate() {
                if pvm.dim() != model.env(k).dim {
                    return Err(SbsError::Shape(format!(
                        "PVM for environment {k} has dim {}, expected {}",
                        pvm.dim(),
                        model.env(k).dim
                    )));
                }
                if pvm.len() != d_s {
                    return Err(SbsError::Shape(format!(
                        "PVM for environment {k} has {} projectors, expected {d_s}",
                        pvm.len()
                    )));
                }
                per_env.push(pvm.projectors().to_vec());
            }
            (transpose(per_env), None)
        }
    };

    let mut projected = Vec::with_capacity(d_s);
    let mut branch_traces = Vec::with_capacity(d_s);
    let mut normalizer = 0.0;
    for (i, branch_projectors) in projectors.iter().enumerate() {
        let mut row = Vec::with_capacity(n_obs);
        let mut trace_product = 1.0;
        for (k, p) in branch_projectors.iter().enumerate() {
            let rho = branch_env_state(model, k, i, t)?;
            let projected_state = p * rho.matrix() * p;
            trace_product *= projected_state.trace().re;
            row.push(projected_state);
        }
        normalizer += model.sigma_diag(i) * trace_product;
        projected.push(row);
        branch_traces.push(trace_product);
    }
    if normalizer <= 0.0 {
        return Err(SbsError::Validation(
            "SBS approximant has vanishing normalizer".into(),
        ));
    }

    Ok(SbsApproximant {
        t,
        sigma: (0..d_s).map(|i| model.sigma_diag(i)).collect(),
        projected,
        branch_traces,
        normalizer,
        env_grams,
        flags,
    })
}

fn transpose(per_env: Vec<Vec<CMatrix>>) -> Vec<Vec<CMatrix>> {
    let n_obs = per_env.len();
    let d_s = per_env[0].len();
    let mut out: Vec<Vec<CMatrix>> = (0..d_s).map(|_| Vec::with_capacity(n_obs)).collect();
    for env_row in per_env {
        for (i, p) in env_row.into_iter().enumerate() {
            out[i].push(p);
        }
    }
    out
}
