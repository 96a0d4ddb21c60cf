//! Structural properties of an exact spectrum broadcast state: measuring
//! every environment with support projectors does not disturb it, and each
//! local observer discriminates the pointer value perfectly.
//!
//! ```bash
//! cargo run --example sbs_structure_checks
//! ```

use sbs::linalg::{cr, identity, CMatrix, CVector, DensityMatrix, PureState};
use sbs::qsd::{probability_error, sbs_local_reduction, sbs_nondisturbance_check, Povm, SbsState};

fn main() -> sbs::Result<()> {
    // Two branches recorded in two dim-4 environments; branch 0 lives on
    // basis rows {0,1}, branch 1 on rows {2,3}, so supports are orthogonal.
    let pure_block = |offset: usize, a: f64, b: f64| -> sbs::Result<DensityMatrix> {
        let mut v = CVector::zeros(4);
        v[offset] = cr(a);
        v[offset + 1] = cr(b);
        Ok(DensityMatrix::from_pure(&PureState::normalized(v)?))
    };
    let mixed_block = |offset: usize, w: f64| -> sbs::Result<DensityMatrix> {
        let mut m = CMatrix::zeros(4, 4);
        m[(offset, offset)] = cr(w);
        m[(offset + 1, offset + 1)] = cr(1.0 - w);
        DensityMatrix::new(m)
    };
    let state = SbsState::new(
        vec![0.35, 0.65],
        vec![
            vec![pure_block(0, 0.8, 0.6)?, mixed_block(0, 0.3)?],
            vec![pure_block(2, 0.6, -0.8)?, mixed_block(2, 0.55)?],
        ],
    )?;

    println!(
        "distinguishability defect (largest cross-branch fidelity): {:.3e}",
        state.distinguishability_defect()
    );
    assert!(state.is_exact(1e-9));

    let disturbance = sbs_nondisturbance_check(&state, 4096)?;
    println!("non-disturbance defect after measuring every environment: {disturbance:.3e}");
    assert!(disturbance <= 1e-8);
    println!();

    // Every local observer sees a perfectly distinguishable mixture.
    for l in 0..state.n_envs() {
        let reduction = sbs_local_reduction(&state, l)?;
        let mut effects: Vec<CMatrix> = (0..state.n_branches())
            .map(|i| state.branch_state(i, l).support_projector())
            .collect::<sbs::Result<_>>()?;
        let mut sum = CMatrix::zeros(4, 4);
        for e in &effects {
            sum += e;
        }
        effects.push(identity(4) - sum);
        let povm = Povm::with_kraus(effects.clone(), effects)?;
        let error = probability_error(&reduction, &povm)?;
        println!("environment {l}: local discrimination error {error:.3e}");
        assert!(error.abs() <= 1e-9);
    }
    Ok(())
}
