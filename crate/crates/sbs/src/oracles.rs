//! Independent brute-force references: full product-space evolution, an
//! exhaustive qubit PVM grid search, and hand-derived two-level closed
//! forms. These are shipped in the library (not tucked into test code) so
//! the reference numbers can be reproduced from the CLI.

use crate::dynamics::{interaction_generator, VonNeumannModel};
use crate::error::{Result, SbsError};
use crate::linalg::{
    c, cr, identity, kron_all, partial_trace, unitary_exp, CMatrix, DensityMatrix,
};
use crate::qsd::Ensemble;

/// Result of a grid search, with enough metadata for honest tolerance
/// comparisons: `|grid min − true min| ≤ grid_slack`.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    /// Arguments of the minimizing grid point (Bloch angles θ, φ).
    pub argmin: Vec<f64>,
    /// Number of polar grid points; the azimuthal grid has `2(res−1)+1`.
    pub resolution: usize,
    /// Lipschitz slack of the objective over one grid cell.
    pub grid_slack: f64,
}

/// Default polar resolution: one-degree steps.
pub const DEFAULT_GRID_RESOLUTION: usize = 181;

/// Evolve the full product state with the dense interaction generator and
/// trace out the unobserved environments. The factored-form dynamics must
/// reproduce this within tolerance; this function is its reference.
pub fn full_evolution_oracle(model: &VonNeumannModel, t: f64, cap: usize) -> Result<DensityMatrix> {
    let total = model.total_dim();
    if total > cap {
        return Err(SbsError::DimensionCap { dim: total, cap });
    }
    let mut factors: Vec<CMatrix> = vec![model.system().matrix().clone()];
    for k in 0..model.n_envs() {
        factors.push(model.initial_density(k).matrix().clone());
    }
    let rho0 = kron_all(&factors, cap)?;
    let h = interaction_generator(model, model.n_envs(), cap)?;
    let u = unitary_exp(&h, t)?;
    let rho_t = &u * rho0 * u.adjoint();

    let mut dims = vec![model.system_dim()];
    dims.extend(model.environments().iter().map(|e| e.dim));
    let keep: Vec<usize> = (0..=model.observed()).collect();
    partial_trace(&DensityMatrix::new(rho_t)?, &dims, &keep)
}

/// Exhaustively minimize `Σ pᵢ ‖ρᵢ − Pᵢ ρᵢ Pᵢ‖₁` for two qubit states over
/// all rank-one orthogonal PVMs, parametrized by Bloch angles.
///
/// The polar grid has `resolution` points on [0, π] and the azimuthal grid
/// `2(resolution−1)+1` points on [0, 2π], so doubling the resolution via
/// `r → 2r−1` refines the grid while keeping every old point.
pub fn qubit_pvm_grid_search(ensemble: &Ensemble, resolution: usize) -> Result<OracleResult> {
    if ensemble.dim() != 2 || ensemble.len() != 2 {
        return Err(SbsError::Precondition(format!(
            "grid search covers two qubit states; got {} states of dim {}",
            ensemble.len(),
            ensemble.dim()
        )));
    }
    if resolution < 2 {
        return Err(SbsError::Domain("resolution must be at least 2".into()));
    }
    let (p1, rho1) = (ensemble.weight(0), ensemble.state(0).matrix().clone());
    let (p2, rho2) = (ensemble.weight(1), ensemble.state(1).matrix().clone());

    let theta_step = std::f64::consts::PI / (resolution - 1) as f64;
    let phi_points = 2 * (resolution - 1) + 1;
    let phi_step = 2.0 * std::f64::consts::PI / (phi_points - 1) as f64;

    let mut best = f64::INFINITY;
    let mut argmin = vec![0.0, 0.0];
    for it in 0..resolution {
        let theta = it as f64 * theta_step;
        let (st, ct) = theta.sin_cos();
        for ip in 0..phi_points {
            let phi = ip as f64 * phi_step;
            let (sp, cp) = phi.sin_cos();
            // P₁ = ½(I + n·σ), P₂ = I − P₁
            let n = (st * cp, st * sp, ct);
            let p_up = CMatrix::from_row_slice(
                2,
                2,
                &[
                    cr(0.5 * (1.0 + n.2)),
                    c(0.5 * n.0, -0.5 * n.1),
                    c(0.5 * n.0, 0.5 * n.1),
                    cr(0.5 * (1.0 - n.2)),
                ],
            );
            let p_dn = identity(2) - &p_up;
            let value =
                p1 * projection_defect_2x2(&rho1, &p_up) + p2 * projection_defect_2x2(&rho2, &p_dn);
            if value < best {
                best = value;
                argmin = vec![theta, phi];
            }
        }
    }
    // |f(n) − f(n′)| ≤ |n − n′| ≤ |Δθ| + |Δφ|, and the nearest grid point is
    // within half a step in each angle.
    let grid_slack = 0.5 * (theta_step + phi_step);
    Ok(OracleResult {
        value: best,
        argmin,
        resolution,
        grid_slack,
    })
}

/// `‖ρ − PρP‖₁` for 2×2 Hermitian ρ via the closed-form eigenvalues.
fn projection_defect_2x2(rho: &CMatrix, p: &CMatrix) -> f64 {
    let a = rho - p * rho * p;
    let half_trace = 0.5 * (a[(0, 0)].re + a[(1, 1)].re);
    let det = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).re;
    let disc = (half_trace * half_trace - det).max(0.0).sqrt();
    (half_trace + disc).abs() + (half_trace - disc).abs()
}

/// Hand-derived two-level reference values.
pub mod closed_form {
    use super::*;

    /// Decoherence factor of a σ_z-coupled qubit prepared in `|+⟩`:
    /// `γ(t) = cos(g t Δx)`.
    pub fn dephasing_gamma(g: f64, t: f64, dx: f64) -> f64 {
        (g * t * dx).cos()
    }

    /// Minimum error for two equal-prior pure states with overlap `c`:
    /// `½(1 − √(1 − c²))`.
    pub fn helstrom_pure_equal_priors(overlap: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&overlap.abs()) {
            return Err(SbsError::Domain(format!(
                "overlap magnitude must lie in [0,1], got {overlap}"
            )));
        }
        Ok(0.5 * (1.0 - (1.0 - overlap * overlap).sqrt()))
    }

    /// `‖|ψ⟩⟨ψ| − |φ⟩⟨φ|‖₁ = 2√(1 − c²)` for pure states with overlap `c`.
    pub fn projector_pair_distance(overlap: f64) -> Result<f64> {
        if overlap.abs() > 1.0 {
            return Err(SbsError::Domain(format!(
                "overlap magnitude must lie in [0,1], got {overlap}"
            )));
        }
        Ok(2.0 * (1.0 - overlap * overlap).max(0.0).sqrt())
    }

    /// Conditional operator of a σ_z-coupled qubit prepared in `|+⟩`:
    /// every entry is a pure phase of magnitude ½.
    pub fn dephasing_conditional(g: f64, t: f64, x: f64, y: f64) -> CMatrix {
        let diff = t * g * (x - y);
        let sum = t * g * (x + y);
        CMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.0, -diff).exp() * cr(0.5),
                c(0.0, -sum).exp() * cr(0.5),
                c(0.0, sum).exp() * cr(0.5),
                c(0.0, diff).exp() * cr(0.5),
            ],
        )
    }
}
