//! Quantum state discrimination: ensembles, POVM/PVM measurements, the
//! probability error, Helstrom/Montanaro/Knill-Barnum bounds, measurement
//! channels and structural checks on spectrum broadcast states.

use crate::error::{Result, SbsError};
use crate::linalg::{self, fidelity, identity, kron_all, tol, trace_norm, CMatrix, DensityMatrix};

/// Weighted ensemble of density operators on one common space.
#[derive(Debug, Clone)]
pub struct Ensemble {
    items: Vec<(f64, DensityMatrix)>,
    dim: usize,
}

impl Ensemble {
    pub fn new(items: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| SbsError::Validation("empty ensemble".into()))?;
        let dim = first.1.dim();
        let mut sum = 0.0;
        for (idx, (p, rho)) in items.iter().enumerate() {
            if !(*p >= 0.0 && *p <= 1.0 + tol::TRACE) {
                return Err(SbsError::Validation(format!(
                    "weight {p} of state {idx} is outside [0, 1]"
                )));
            }
            if rho.dim() != dim {
                return Err(SbsError::Shape(format!(
                    "state {idx} has dim {} but the ensemble dim is {dim}",
                    rho.dim()
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > tol::TRACE {
            return Err(SbsError::Validation(format!(
                "ensemble weights sum to {sum} instead of 1"
            )));
        }
        Ok(Self { items, dim })
    }

    pub fn from_pure(items: Vec<(f64, linalg::PureState)>) -> Result<Self> {
        Self::new(
            items
                .into_iter()
                .map(|(p, psi)| (p, DensityMatrix::from_pure(&psi)))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(f64, DensityMatrix)] {
        &self.items
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.items[i].0
    }

    pub fn state(&self, i: usize) -> &DensityMatrix {
        &self.items[i].1
    }

    /// The average state `Σ pᵢ ρᵢ`.
    pub fn average_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::mixture(&self.items)
    }
}

/// Positive operator-valued measure; optionally carries Kraus operators.
#[derive(Debug, Clone)]
pub struct Povm {
    effects: Vec<CMatrix>,
    kraus: Option<Vec<CMatrix>>,
    dim: usize,
}

impl Povm {
    /// Validate effects only (no Kraus decomposition).
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        Self::build(effects, None)
    }

    /// Build from Kraus operators; effects are `Mₗ† Mₗ`.
    pub fn from_kraus(kraus: Vec<CMatrix>) -> Result<Self> {
        let effects: Vec<CMatrix> = kraus.iter().map(|m| m.adjoint() * m).collect();
        Self::build(effects, Some(kraus))
    }

    /// Validate a matched (effects, Kraus) pair.
    pub fn with_kraus(effects: Vec<CMatrix>, kraus: Vec<CMatrix>) -> Result<Self> {
        Self::build(effects, Some(kraus))
    }

    fn build(effects: Vec<CMatrix>, kraus: Option<Vec<CMatrix>>) -> Result<Self> {
        let first = effects
            .first()
            .ok_or_else(|| SbsError::Validation("POVM needs at least one effect".into()))?;
        let dim = first.nrows();
        let mut sum = CMatrix::zeros(dim, dim);
        for (l, e) in effects.iter().enumerate() {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(SbsError::Shape(format!("effect {l} is not {dim}x{dim}")));
            }
            let (values, _) = linalg::herm_eig(e)?;
            if values[0] < -tol::PSD {
                return Err(SbsError::Validation(format!(
                    "effect {l} is not PSD (min eigenvalue {:.3e})",
                    values[0]
                )));
            }
            sum += e;
        }
        if linalg::max_abs_diff(&sum, &identity(dim)) > tol::MEASUREMENT {
            return Err(SbsError::Validation(
                "effects do not sum to the identity".into(),
            ));
        }
        if let Some(ms) = &kraus {
            if ms.len() != effects.len() {
                return Err(SbsError::Shape(
                    "Kraus operator count differs from effect count".into(),
                ));
            }
            for (l, (m, e)) in ms.iter().zip(effects.iter()).enumerate() {
                if linalg::max_abs_diff(&(m.adjoint() * m), e) > tol::MEASUREMENT {
                    return Err(SbsError::Validation(format!(
                        "Kraus operator {l} does not reproduce its effect"
                    )));
                }
            }
        }
        Ok(Self {
            effects,
            kraus,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effect(&self, l: usize) -> &CMatrix {
        &self.effects[l]
    }

    pub fn kraus(&self) -> Option<&[CMatrix]> {
        self.kraus.as_deref()
    }
}

/// Projector-valued measure: mutually orthogonal projectors plus the
/// implicit remainder `I − Σ Pⱼ`.
#[derive(Debug, Clone)]
pub struct Pvm {
    projectors: Vec<CMatrix>,
    dim: usize,
}

impl Pvm {
    pub fn new(projectors: Vec<CMatrix>) -> Result<Self> {
        let first = projectors
            .first()
            .ok_or_else(|| SbsError::Validation("PVM needs at least one projector".into()))?;
        let dim = first.nrows();
        for (j, p) in projectors.iter().enumerate() {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(SbsError::Shape(format!("projector {j} is not {dim}x{dim}")));
            }
            if linalg::hermiticity_defect(p) > tol::MEASUREMENT {
                return Err(SbsError::Validation(format!(
                    "projector {j} is not Hermitian"
                )));
            }
            if linalg::max_abs_diff(&(p * p), p) > tol::MEASUREMENT {
                return Err(SbsError::Validation(format!(
                    "projector {j} is not idempotent"
                )));
            }
        }
        for j in 0..projectors.len() {
            for k in (j + 1)..projectors.len() {
                let prod = &projectors[j] * &projectors[k];
                if prod.iter().map(|z| z.norm()).fold(0.0, f64::max) > tol::MEASUREMENT {
                    return Err(SbsError::Validation(format!(
                        "projectors {j} and {k} are not orthogonal"
                    )));
                }
            }
        }
        let pvm = Self { projectors, dim };
        let (values, _) = linalg::herm_eig(&pvm.remainder())?;
        if values[0] < -tol::MEASUREMENT {
            return Err(SbsError::Validation(
                "projectors overshoot the identity (remainder not PSD)".into(),
            ));
        }
        Ok(pvm)
    }

    /// Rank-one PVM from an orthonormal family.
    pub fn from_states(states: &[linalg::PureState]) -> Result<Self> {
        Self::new(states.iter().map(|s| s.projector()).collect())
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projector(&self, j: usize) -> &CMatrix {
        &self.projectors[j]
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn remainder(&self) -> CMatrix {
        let mut rem = identity(self.dim);
        for p in &self.projectors {
            rem -= p;
        }
        rem
    }

    /// View as a POVM; the remainder is appended as a final effect when it
    /// is not numerically zero. Projectors serve as their own Kraus
    /// operators.
    pub fn to_povm(&self) -> Result<Povm> {
        let mut effects = self.projectors.clone();
        let rem = self.remainder();
        if rem.iter().map(|z| z.norm()).fold(0.0, f64::max) > tol::MEASUREMENT {
            effects.push(rem);
        }
        let kraus = effects.clone();
        Povm::with_kraus(effects, kraus)
    }
}

/// Probability of misidentifying the prepared state: `1 − Σ pᵢ Tr(Mᵢ ρᵢ Mᵢ†)`.
///
/// Effects are matched to states positionally; extra effects beyond the
/// ensemble size only contribute to the error.
pub fn probability_error(ensemble: &Ensemble, povm: &Povm) -> Result<f64> {
    if povm.len() < ensemble.len() {
        return Err(SbsError::Arity {
            effects: povm.len(),
            states: ensemble.len(),
        });
    }
    if povm.dim() != ensemble.dim() {
        return Err(SbsError::Shape(format!(
            "POVM dim {} does not match ensemble dim {}",
            povm.dim(),
            ensemble.dim()
        )));
    }
    let mut success = 0.0;
    for (i, (p, rho)) in ensemble.items().iter().enumerate() {
        // Tr(M ρ M†) = Tr(E ρ), so effects suffice.
        success += p * (povm.effect(i) * rho.matrix()).trace().re;
    }
    Ok(1.0 - success)
}

/// Exact two-state minimum error `½(1 − ‖p₁ρ₁ − p₂ρ₂‖₁)`.
pub fn helstrom_error(p1: f64, rho1: &DensityMatrix, p2: f64, rho2: &DensityMatrix) -> Result<f64> {
    if (p1 + p2 - 1.0).abs() > tol::TRACE {
        return Err(SbsError::Validation(format!(
            "priors sum to {} instead of 1",
            p1 + p2
        )));
    }
    if rho1.dim() != rho2.dim() {
        return Err(SbsError::Shape(format!(
            "states have dims {} and {}",
            rho1.dim(),
            rho2.dim()
        )));
    }
    let diff = rho1.matrix() * linalg::cr(p1) - rho2.matrix() * linalg::cr(p2);
    Ok(0.5 * (1.0 - trace_norm(&diff)))
}

/// Lower bound on the minimum probability error:
/// `½ Σ_{i≠j} pᵢ pⱼ F(ρᵢ, ρⱼ)`.
pub fn montanaro_lower(ensemble: &Ensemble) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..ensemble.len() {
        for j in 0..ensemble.len() {
            if i != j {
                acc += ensemble.weight(i)
                    * ensemble.weight(j)
                    * fidelity(ensemble.state(i), ensemble.state(j))?;
            }
        }
    }
    Ok(0.5 * acc)
}

/// Upper bound on the minimum probability error:
/// `Σ_{i≠j} √(pᵢ pⱼ) √F(ρᵢ, ρⱼ)`.
///
/// The raw value is reported even when it exceeds one; it is a bound, not a
/// probability, and vacuous values are flagged by callers.
pub fn knill_barnum_upper(ensemble: &Ensemble) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..ensemble.len() {
        for j in 0..ensemble.len() {
            if i != j {
                acc += (ensemble.weight(i) * ensemble.weight(j)).sqrt()
                    * fidelity(ensemble.state(i), ensemble.state(j))?.sqrt();
            }
        }
    }
    Ok(acc)
}

/// Post-measurement state `Σ Mᵢ ρ Mᵢ†`; requires Kraus operators.
pub fn measurement_channel(rho: &DensityMatrix, povm: &Povm) -> Result<DensityMatrix> {
    let kraus = povm.kraus().ok_or(SbsError::MissingKraus)?;
    if povm.dim() != rho.dim() {
        return Err(SbsError::Shape(format!(
            "POVM dim {} does not match state dim {}",
            povm.dim(),
            rho.dim()
        )));
    }
    let mut out = CMatrix::zeros(rho.dim(), rho.dim());
    for m in kraus {
        out += m * rho.matrix() * m.adjoint();
    }
    DensityMatrix::new(out)
}

/// Spectrum broadcast state: pointer probabilities and per-branch,
/// per-environment states, with the recorded distinguishability defect
/// `max_{i≠j,k} F(ρᵢᵏ, ρⱼᵏ)`.
#[derive(Debug, Clone)]
pub struct SbsState {
    probs: Vec<f64>,
    branches: Vec<Vec<DensityMatrix>>,
    env_dims: Vec<usize>,
    defect: f64,
}

impl SbsState {
    pub fn new(probs: Vec<f64>, branches: Vec<Vec<DensityMatrix>>) -> Result<Self> {
        if probs.is_empty() || probs.len() != branches.len() {
            return Err(SbsError::Validation(
                "pointer probabilities and branches must be nonempty and matched".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol::TRACE || probs.iter().any(|p| *p < 0.0) {
            return Err(SbsError::Validation(format!(
                "pointer probabilities sum to {sum} instead of 1"
            )));
        }
        let n_envs = branches[0].len();
        if n_envs == 0 {
            return Err(SbsError::Validation(
                "at least one environment is required".into(),
            ));
        }
        let env_dims: Vec<usize> = branches[0].iter().map(|r| r.dim()).collect();
        for (i, row) in branches.iter().enumerate() {
            if row.len() != n_envs {
                return Err(SbsError::Shape(format!(
                    "branch {i} has {} environments, expected {n_envs}",
                    row.len()
                )));
            }
            for (k, rho) in row.iter().enumerate() {
                if rho.dim() != env_dims[k] {
                    return Err(SbsError::Shape(format!(
                        "branch {i} environment {k} has dim {}, expected {}",
                        rho.dim(),
                        env_dims[k]
                    )));
                }
            }
        }
        let mut defect = 0.0f64;
        for i in 0..branches.len() {
            for j in (i + 1)..branches.len() {
                for (a, b) in branches[i].iter().zip(branches[j].iter()) {
                    defect = defect.max(fidelity(a, b)?);
                }
            }
        }
        Ok(Self {
            probs,
            branches,
            env_dims,
            defect,
        })
    }

    pub fn n_branches(&self) -> usize {
        self.probs.len()
    }

    pub fn n_envs(&self) -> usize {
        self.env_dims.len()
    }

    pub fn env_dims(&self) -> &[usize] {
        &self.env_dims
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn branch_state(&self, i: usize, k: usize) -> &DensityMatrix {
        &self.branches[i][k]
    }

    /// Largest cross-branch fidelity over all environments.
    pub fn distinguishability_defect(&self) -> f64 {
        self.defect
    }

    pub fn is_exact(&self, tolerance: f64) -> bool {
        self.defect <= tolerance
    }

    /// Assemble the joint state `Σ pᵢ |i⟩⟨i| ⊗ ⊗ₖ ρᵢᵏ`.
    pub fn assemble(&self, cap: usize) -> Result<DensityMatrix> {
        let n = self.n_branches();
        let env_dim: usize = self.env_dims.iter().product();
        let full = n
            .checked_mul(env_dim)
            .filter(|d| *d <= cap)
            .ok_or(SbsError::DimensionCap {
                dim: n.saturating_mul(env_dim),
                cap,
            })?;
        let mut out = CMatrix::zeros(full, full);
        for i in 0..n {
            let factors: Vec<CMatrix> = self.branches[i]
                .iter()
                .map(|r| r.matrix().clone())
                .collect();
            let blob = kron_all(&factors, cap)? * linalg::cr(self.probs[i]);
            out.view_mut((i * env_dim, i * env_dim), (env_dim, env_dim))
                .copy_from(&blob);
        }
        DensityMatrix::new(out)
    }
}

/// Measure every environment with projectors onto the branch supports and
/// return `½‖ρ − ρ_measured‖₁`.
///
/// The guarantee that this vanishes only holds for orthogonal branch
/// supports, so a distinguishability defect above `1e-9` is rejected.
pub fn sbs_nondisturbance_check(state: &SbsState, cap: usize) -> Result<f64> {
    if !state.is_exact(1e-9) {
        return Err(SbsError::Precondition(format!(
            "non-disturbance holds only for exact SBS states; defect {:.3e} > 1e-9",
            state.distinguishability_defect()
        )));
    }
    let rho = state.assemble(cap)?;
    let n = state.n_branches();
    let n_envs = state.n_envs();

    // Per environment: one support projector per branch plus the remainder.
    let mut outcomes: Vec<Vec<CMatrix>> = Vec::with_capacity(n_envs);
    for k in 0..n_envs {
        let mut ps: Vec<CMatrix> = Vec::with_capacity(n + 1);
        let mut sum = CMatrix::zeros(state.env_dims()[k], state.env_dims()[k]);
        for i in 0..n {
            let p = state.branch_state(i, k).support_projector()?;
            sum += &p;
            ps.push(p);
        }
        ps.push(identity(state.env_dims()[k]) - sum);
        outcomes.push(ps);
    }

    // Product measurement channel over all outcome tuples; the system factor
    // is left untouched.
    let mut measured = CMatrix::zeros(rho.dim(), rho.dim());
    let mut tuple = vec![0usize; n_envs];
    loop {
        let mut factors: Vec<CMatrix> = Vec::with_capacity(n_envs + 1);
        factors.push(identity(n));
        for (env_outcomes, &choice) in outcomes.iter().zip(tuple.iter()) {
            factors.push(env_outcomes[choice].clone());
        }
        let kraus = kron_all(&factors, cap)?;
        measured += &kraus * rho.matrix() * kraus.adjoint();

        // odometer over outcome tuples
        let mut pos = 0;
        loop {
            if pos == n_envs {
                break;
            }
            tuple[pos] += 1;
            if tuple[pos] < outcomes[pos].len() {
                break;
            }
            tuple[pos] = 0;
            pos += 1;
        }
        if pos == n_envs {
            break;
        }
    }
    Ok(0.5 * trace_norm(&(rho.matrix() - &measured)))
}

/// Local state seen by an observer of environment `l`: the ensemble
/// `{(pᵢ, ρᵢ^{Eˡ})}`.
pub fn sbs_local_reduction(state: &SbsState, l: usize) -> Result<Ensemble> {
    if l >= state.n_envs() {
        return Err(SbsError::Index {
            index: l,
            context: format!(
                "environment of an SBS state with {} environments",
                state.n_envs()
            ),
        });
    }
    Ensemble::new(
        (0..state.n_branches())
            .map(|i| (state.prob(i), state.branch_state(i, l).clone()))
            .collect(),
    )
}

/// `Σ pᵢ ‖ρᵢ − Pᵢ ρᵢ Pᵢ‖₁` for positionally matched projectors.
pub fn pvm_objective(items: &[(f64, DensityMatrix)], projectors: &[CMatrix]) -> Result<f64> {
    if projectors.len() < items.len() {
        return Err(SbsError::Arity {
            effects: projectors.len(),
            states: items.len(),
        });
    }
    let mut acc = 0.0;
    for ((p, rho), proj) in items.iter().zip(projectors.iter()) {
        let projected = proj * rho.matrix() * proj;
        acc += p * trace_norm(&(rho.matrix() - projected));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr, partial_trace, pauli_z, CVector, PureState};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        DensityMatrix::new(m / cr(tr)).unwrap()
    }

    fn overlapping_pair(overlap: f64) -> (PureState, PureState) {
        let psi1 = PureState::basis(2, 0).unwrap();
        let psi2 =
            PureState::from_slice(&[cr(overlap), cr((1.0 - overlap * overlap).sqrt())]).unwrap();
        (psi1, psi2)
    }

    #[test]
    fn probability_error_perfect_discrimination() {
        let zero = PureState::basis(2, 0).unwrap();
        let one = PureState::basis(2, 1).unwrap();
        let ensemble = Ensemble::from_pure(vec![(0.3, zero.clone()), (0.7, one.clone())]).unwrap();
        let pvm = Pvm::from_states(&[zero, one]).unwrap();
        let err = probability_error(&ensemble, &pvm.to_povm().unwrap()).unwrap();
        assert!(err.abs() < 1e-12);
    }

    #[test]
    fn probability_error_identity_on_single_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random_density(&mut rng, 3);
        let ensemble = Ensemble::new(vec![(1.0, rho)]).unwrap();
        let povm = Povm::new(vec![identity(3)]).unwrap();
        assert!(probability_error(&ensemble, &povm).unwrap().abs() < 1e-12);
    }

    #[test]
    fn probability_error_arity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ensemble = Ensemble::new(vec![
            (0.5, random_density(&mut rng, 2)),
            (0.5, random_density(&mut rng, 2)),
        ])
        .unwrap();
        let povm = Povm::new(vec![identity(2)]).unwrap();
        assert!(matches!(
            probability_error(&ensemble, &povm),
            Err(SbsError::Arity {
                effects: 1,
                states: 2
            })
        ));
    }

    #[test]
    fn helstrom_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rho = random_density(&mut rng, 3);
        assert_relative_eq!(
            helstrom_error(0.5, &rho, 0.5, &rho).unwrap(),
            0.5,
            epsilon = 1e-12
        );

        let zero = DensityMatrix::from_pure(&PureState::basis(2, 0).unwrap());
        let one = DensityMatrix::from_pure(&PureState::basis(2, 1).unwrap());
        assert!(helstrom_error(0.4, &zero, 0.6, &one).unwrap().abs() < 1e-12);

        let (psi1, psi2) = overlapping_pair(0.6);
        let e = helstrom_error(
            0.5,
            &DensityMatrix::from_pure(&psi1),
            0.5,
            &DensityMatrix::from_pure(&psi2),
        )
        .unwrap();
        assert_relative_eq!(e, 0.1, epsilon = 1e-12);

        let small = DensityMatrix::maximally_mixed(2);
        let big = DensityMatrix::maximally_mixed(3);
        assert!(helstrom_error(0.5, &small, 0.5, &big).is_err());
    }

    #[test]
    fn montanaro_and_knill_barnum_reference_values() {
        let zero = PureState::basis(3, 0).unwrap();
        let one = PureState::basis(3, 1).unwrap();
        let two = PureState::basis(3, 2).unwrap();
        let ortho = Ensemble::from_pure(vec![(0.2, zero), (0.3, one), (0.5, two)]).unwrap();
        assert!(montanaro_lower(&ortho).unwrap() < 1e-12);
        assert!(knill_barnum_upper(&ortho).unwrap() < 1e-9);

        let (psi1, psi2) = overlapping_pair(0.6);
        let pair = Ensemble::from_pure(vec![(0.5, psi1), (0.5, psi2)]).unwrap();
        let lower = montanaro_lower(&pair).unwrap();
        let upper = knill_barnum_upper(&pair).unwrap();
        assert_relative_eq!(lower, 0.09, epsilon = 1e-10);
        assert_relative_eq!(upper, 0.6, epsilon = 1e-10);
        let exact = helstrom_error(0.5, pair.state(0), 0.5, pair.state(1)).unwrap();
        assert!(lower <= exact + 1e-12 && exact <= upper + 1e-12);
    }

    #[test]
    fn gram_pvm_error_sits_above_the_exact_minimum() {
        // equal priors, overlap 0.6, measured in the Gram PVM: the
        // misidentification probability cannot undercut the Helstrom value
        let (psi1, psi2) = overlapping_pair(0.6);
        let ensemble = Ensemble::from_pure(vec![(0.5, psi1.clone()), (0.5, psi2.clone())]).unwrap();
        let gram = crate::gram::pure_ensemble_bound(&ensemble).unwrap();
        let err = probability_error(&ensemble, &gram.pvm.to_povm().unwrap()).unwrap();
        let exact = helstrom_error(
            0.5,
            &DensityMatrix::from_pure(&psi1),
            0.5,
            &DensityMatrix::from_pure(&psi2),
        )
        .unwrap();
        assert!(
            err >= exact - 1e-12,
            "Gram PVM error {err} below the minimum {exact}"
        );
        assert!(err <= 1.0 + 1e-12);
    }

    #[test]
    fn montanaro_below_any_tried_measurement_on_qubit_triples() {
        // three states on a qubit: projective measurements padded with a
        // zero effect are legitimate POVMs for the positional convention
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..25 {
            let mut weights: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let items: Vec<(f64, DensityMatrix)> = weights
                .iter()
                .map(|&w| (w, random_density(&mut rng, 2)))
                .collect();
            let ensemble = Ensemble::new(items).unwrap();
            let lower = montanaro_lower(&ensemble).unwrap();
            for _ in 0..8 {
                let h = {
                    let a = CMatrix::from_fn(2, 2, |_, _| {
                        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    });
                    (&a + a.adjoint()) * cr(0.5)
                };
                let (_, v) = linalg::herm_eig(&h).unwrap();
                let mut effects: Vec<CMatrix> = (0..2)
                    .map(|j| {
                        let col = CVector::from_column_slice(v.column(j).as_slice());
                        &col * col.adjoint()
                    })
                    .collect();
                effects.push(CMatrix::zeros(2, 2));
                let povm = Povm::with_kraus(effects.clone(), effects).unwrap();
                let tried = probability_error(&ensemble, &povm).unwrap();
                assert!(lower <= tried + 1e-9, "lower {lower} tried {tried}");
            }
        }
    }

    #[test]
    fn measurement_channel_dephasing_and_trace() {
        // Eigenprojector PVM leaves a diagonal state unchanged.
        let diag = DensityMatrix::new(CMatrix::from_diagonal(&CVector::from_vec(vec![
            cr(0.25),
            cr(0.75),
        ])))
        .unwrap();
        let pvm = Pvm::from_states(&[
            PureState::basis(2, 0).unwrap(),
            PureState::basis(2, 1).unwrap(),
        ])
        .unwrap();
        let povm = pvm.to_povm().unwrap();
        let out = measurement_channel(&diag, &povm).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), diag.matrix()) < 1e-12);

        // Full dephasing of |+⟩⟨+|.
        let plus = DensityMatrix::from_pure(&PureState::plus(2));
        let out = measurement_channel(&plus, &povm).unwrap();
        assert!(
            linalg::max_abs_diff(out.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-12
        );

        // Trace preserved on random input and random PVM.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rho = random_density(&mut rng, 4);
        let h = {
            let a = CMatrix::from_fn(4, 4, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            (&a + a.adjoint()) * cr(0.5)
        };
        let (_, vectors) = linalg::herm_eig(&h).unwrap();
        let projs: Vec<CMatrix> = (0..4)
            .map(|j| {
                let col = CVector::from_column_slice(vectors.column(j).as_slice());
                &col * col.adjoint()
            })
            .collect();
        let povm = Pvm::new(projs).unwrap().to_povm().unwrap();
        let out = measurement_channel(&rho, &povm).unwrap();
        assert_relative_eq!(out.matrix().trace().re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn measurement_channel_requires_kraus() {
        let rho = DensityMatrix::maximally_mixed(2);
        let povm = Povm::new(vec![identity(2)]).unwrap();
        assert!(matches!(
            measurement_channel(&rho, &povm),
            Err(SbsError::MissingKraus)
        ));
    }

    /// Exact SBS with two branches of orthogonal supports in dim-4 envs.
    fn exact_sbs(rng: &mut ChaCha8Rng, mixed: bool) -> SbsState {
        let block = |rng: &mut ChaCha8Rng, offset: usize| -> DensityMatrix {
            if mixed {
                let w = rng.gen_range(0.2..0.8);
                let mut m = CMatrix::zeros(4, 4);
                m[(offset, offset)] = cr(w);
                m[(offset + 1, offset + 1)] = cr(1.0 - w);
                let phase = c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
                m[(offset, offset + 1)] = phase;
                m[(offset + 1, offset)] = phase.conj();
                // keep PSD: shrink coherence if needed
                let lim = (w * (1.0 - w)).sqrt() * 0.9;
                if phase.norm() > lim {
                    m[(offset, offset + 1)] *= cr(lim / phase.norm());
                    m[(offset + 1, offset)] *= cr(lim / phase.norm());
                }
                DensityMatrix::new(m).unwrap()
            } else {
                let a = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let b = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let mut v = CVector::zeros(4);
                v[offset] = a;
                v[offset + 1] = b;
                DensityMatrix::from_pure(&PureState::normalized(v).unwrap())
            }
        };
        let p = rng.gen_range(0.2..0.8);
        SbsState::new(
            vec![p, 1.0 - p],
            vec![
                vec![block(rng, 0), block(rng, 0)],
                vec![block(rng, 2), block(rng, 2)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn nondisturbance_vanishes_for_exact_sbs() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pure = exact_sbs(&mut rng, false);
        assert!(pure.is_exact(1e-12));
        assert!(sbs_nondisturbance_check(&pure, 4096).unwrap() <= 1e-10);

        let mixed = exact_sbs(&mut rng, true);
        assert!(mixed.is_exact(1e-12));
        assert!(sbs_nondisturbance_check(&mixed, 4096).unwrap() <= 1e-8);
    }

    #[test]
    fn nondisturbance_single_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let state = SbsState::new(
            vec![1.0],
            vec![vec![
                random_density(&mut rng, 3),
                random_density(&mut rng, 2),
            ]],
        )
        .unwrap();
        assert!(sbs_nondisturbance_check(&state, 4096).unwrap() <= 1e-10);
    }

    #[test]
    fn nondisturbance_rejects_inexact_sbs() {
        let plus = DensityMatrix::from_pure(&PureState::plus(2));
        let zero = DensityMatrix::from_pure(&PureState::basis(2, 0).unwrap());
        let state = SbsState::new(vec![0.5, 0.5], vec![vec![plus], vec![zero]]).unwrap();
        assert!(state.distinguishability_defect() > 0.1);
        assert!(matches!(
            sbs_nondisturbance_check(&state, 4096),
            Err(SbsError::Precondition(_))
        ));
    }

    #[test]
    fn local_reduction_matches_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let state = exact_sbs(&mut rng, true);
        let reduction = sbs_local_reduction(&state, 1).unwrap();
        assert_eq!(reduction.len(), 2);
        assert_relative_eq!(reduction.weight(0), state.prob(0), epsilon = 1e-15);

        // Cross-check against the assembled joint state.
        let joint = state.assemble(4096).unwrap();
        let dims = [state.n_branches(), 4, 4];
        let marginal = partial_trace(&joint, &dims, &[2]).unwrap();
        let mixture = reduction.average_state().unwrap();
        assert!(linalg::max_abs_diff(marginal.matrix(), mixture.matrix()) < 1e-10);

        assert!(matches!(
            sbs_local_reduction(&state, 5),
            Err(SbsError::Index { .. })
        ));
    }

    #[test]
    fn local_reduction_degenerate_probabilities() {
        let zero = DensityMatrix::from_pure(&PureState::basis(2, 0).unwrap());
        let one = DensityMatrix::from_pure(&PureState::basis(2, 1).unwrap());
        let state = SbsState::new(vec![1.0, 0.0], vec![vec![zero.clone()], vec![one]]).unwrap();
        let reduction = sbs_local_reduction(&state, 0).unwrap();
        let avg = reduction.average_state().unwrap();
        assert!(linalg::max_abs_diff(avg.matrix(), zero.matrix()) < 1e-12);
    }

    #[test]
    fn local_reductions_of_exact_sbs_discriminate_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let state = exact_sbs(&mut rng, true);
        for l in 0..state.n_envs() {
            let reduction = sbs_local_reduction(&state, l).unwrap();
            let projs: Vec<CMatrix> = (0..state.n_branches())
                .map(|i| state.branch_state(i, l).support_projector().unwrap())
                .collect();
            let mut effects = projs.clone();
            let mut sum = CMatrix::zeros(4, 4);
            for p in &projs {
                sum += p;
            }
            effects.push(identity(4) - sum);
            let povm = Povm::with_kraus(effects.clone(), effects).unwrap();
            assert!(probability_error(&reduction, &povm).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn pvm_validation_rejects_overlap() {
        let p0 = PureState::basis(2, 0).unwrap().projector();
        let plus = PureState::plus(2).projector();
        assert!(Pvm::new(vec![p0, plus]).is_err());
    }

    #[test]
    fn sigma_z_eigenprojectors_form_a_pvm() {
        let (_, v) = linalg::herm_eig(&pauli_z()).unwrap();
        let cols: Vec<CMatrix> = (0..2)
            .map(|j| {
                let col = CVector::from_column_slice(v.column(j).as_slice());
                &col * col.adjoint()
            })
            .collect();
        let pvm = Pvm::new(cols).unwrap();
        assert!(pvm.remainder().iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }
}
