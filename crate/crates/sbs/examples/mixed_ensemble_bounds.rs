//! Discriminate finite mixtures with a block Gram PVM: flatten the
//! components branch by branch, orthogonalize the flattened family, and sum
//! one projector block per branch.
//!
//! ```bash
//! cargo run --example mixed_ensemble_bounds
//! ```

use sbs::gram::{flatten_mixed, mixed_ensemble_bound, pure_ensemble_bound};
use sbs::linalg::{cr, CVector, DensityMatrix, PureState};
use sbs::qsd::{pvm_objective, Ensemble};

fn main() -> sbs::Result<()> {
    // Two branches of two components each in dimension 6. Components of
    // different branches overlap mildly; components within a branch are
    // orthogonal.
    let dim = 6;
    let tilt = |main: usize, into: usize, eps: f64| -> sbs::Result<PureState> {
        let mut v = CVector::zeros(dim);
        v[main] = cr((1.0 - eps * eps).sqrt());
        v[into] = cr(eps);
        PureState::new(v)
    };
    let branches = vec![
        (0.5, vec![(0.6, tilt(0, 2, 0.0)?), (0.4, tilt(1, 3, 0.0)?)]),
        (
            0.5,
            vec![(0.5, tilt(2, 0, 0.12)?), (0.5, tilt(3, 1, 0.12)?)],
        ),
    ];

    let index = flatten_mixed(&branches)?;
    println!(
        "flattened {} components over {} branches; shape {:?}",
        index.len(),
        index.n_branches(),
        index.shape()
    );
    for s in 0..index.len() {
        let (i, k) = index.component(s);
        println!(
            "  position {s}: branch {i}, component {k}, weight {:.3}",
            index.weight(s)
        );
    }
    println!();

    let result = mixed_ensemble_bound(&index)?;
    println!("ordered-overlap term   {:.9}", result.ordered_term);
    println!("same-branch cross term {:.9}", result.same_branch_term);
    println!("two-term bound         {:.9}", result.bound);
    println!(
        "coarse single-sum form {:.9}  (reference only)",
        result.coarse_bound
    );

    let items: Vec<(f64, DensityMatrix)> = (0..index.n_branches())
        .map(|i| Ok((index.branch_weight(i), index.branch_density(i)?)))
        .collect::<sbs::Result<_>>()?;
    let achieved = pvm_objective(&items, &result.block_projectors)?;
    println!("achieved by block PVM  {achieved:.9}");
    assert!(achieved <= result.bound + 1e-9);
    println!();

    // Single-component branches collapse to the pure-state construction.
    let pure_family: Vec<PureState> = vec![tilt(0, 2, 0.0)?, tilt(2, 0, 0.15)?, tilt(4, 1, 0.1)?];
    let weights = [0.5, 0.3, 0.2];
    let as_mixture = flatten_mixed(
        &pure_family
            .iter()
            .zip(weights.iter())
            .map(|(psi, w)| (*w, vec![(1.0, psi.clone())]))
            .collect::<Vec<_>>(),
    )?;
    let block = mixed_ensemble_bound(&as_mixture)?;
    let pure = pure_ensemble_bound(&Ensemble::from_pure(
        weights
            .iter()
            .cloned()
            .zip(pure_family.iter().cloned())
            .collect(),
    )?)?;
    println!("single-component degenerate case:");
    println!("  block bound {:.12}", block.bound);
    println!("  pure bound  {:.12}", pure.bound);
    assert!((block.bound - pure.bound).abs() < 1e-10);
    Ok(())
}
