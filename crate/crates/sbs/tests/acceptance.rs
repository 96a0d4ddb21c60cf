//! Acceptance suite: end-to-end checks of every advertised guarantee, one
//! test per criterion. Each test prints a single PASS line with the
//! measured witness (visible with `cargo test -- --nocapture`).

use std::path::PathBuf;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbs::bounds::{rescaled_distance_bound, rescaling_check, telescopic_check};
use sbs::dynamics::{reduced_state, EnvInitial, Environment, VonNeumannModel};
use sbs::gram::{
    flatten_mixed, gram_schmidt, mixed_ensemble_bound, overlap_via_determinant,
    projection_defect_bound, projection_defect_exact, pure_ensemble_bound,
};
use sbs::linalg::{c, cr, trace_distance, CMatrix, CVector, DensityMatrix, PureState};
use sbs::oracles::{closed_form, full_evolution_oracle, qubit_pvm_grid_search};
use sbs::qsd::{
    helstrom_error, knill_barnum_upper, montanaro_lower, probability_error, pvm_objective,
    sbs_local_reduction, sbs_nondisturbance_check, Ensemble, Povm, SbsState,
};

const CAP: usize = 4096;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = random_matrix(rng, n);
    (&a + a.adjoint()) * cr(0.5)
}

fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let g = random_matrix(rng, n);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m / cr(tr)).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> PureState {
    loop {
        let v = CVector::from_fn(n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        if v.norm() > 1e-3 {
            return PureState::normalized(v).unwrap();
        }
    }
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn random_independent_family(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<PureState> {
    loop {
        let family: Vec<PureState> = (0..n).map(|_| random_state(rng, dim)).collect();
        if gram_schmidt(&family).is_ok() {
            return family;
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> VonNeumannModel {
    let d_s = rng.gen_range(2..=3);
    let n_env = rng.gen_range(2..=3);
    let system = random_density(rng, d_s);
    let eigenvalues: Vec<f64> = (0..d_s).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let environments: Vec<Environment> = (0..n_env)
        .map(|_| {
            let dim = rng.gen_range(2..=3);
            let generator = random_hermitian(rng, dim);
            let initial = match rng.gen_range(0..3) {
                0 => EnvInitial::Pure(random_state(rng, dim)),
                1 => EnvInitial::Density(random_density(rng, dim)),
                _ => {
                    let w = rng.gen_range(0.2..0.8);
                    EnvInitial::Mixture(vec![
                        (w, PureState::basis(dim, 0).unwrap()),
                        (1.0 - w, PureState::basis(dim, 1).unwrap()),
                    ])
                }
            };
            Environment {
                dim,
                coupling: rng.gen_range(0.1..1.5),
                generator,
                initial,
            }
        })
        .collect();
    let observed = rng.gen_range(1..=n_env);
    VonNeumannModel::new(eigenvalues, system, environments, observed).unwrap()
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

#[test]
fn factored_dynamics_matches_full_space_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let start = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let model = random_model(&mut rng);
        for _ in 0..5 {
            let t = rng.gen_range(0.0..6.0);
            let oracle = full_evolution_oracle(&model, t, CAP).unwrap();
            let factored = reduced_state(&model, t).unwrap().assemble(CAP).unwrap();
            let dist = trace_distance(oracle.matrix(), factored.matrix());
            worst = worst.max(dist);
            assert!(dist <= 1e-8, "distance {dist} at t = {t}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "oracle comparison took {elapsed:?}");
    println!(
        "PASS factored dynamics matches the full-space oracle: 50 models x 5 times, \
         worst trace distance {worst:.3e}, {elapsed:.2?}"
    );
}

#[test]
fn bound_chain_holds_on_shipped_scenarios() {
    let start = std::time::Instant::now();
    let out_root = tempfile::tempdir().unwrap();
    let mut checked = 0usize;
    for name in [
        "pure_qubit_chain.json",
        "mixed_environment.json",
        "degenerate_pointer.json",
    ] {
        let out_dir = out_root.path().join(name.trim_end_matches(".json"));
        let output = Command::new(env!("CARGO_BIN_EXE_sbs"))
            .arg("sweep")
            .arg(scenario_path(name))
            .arg("-o")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "sweep of {name} exited with {:?}: {}",
            output.status.code(),
            String::from_utf8_lossy(&output.stderr)
        );
        let summary_file = std::fs::read_dir(&out_dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .find(|e| e.file_name().to_string_lossy().ends_with("_summary.json"))
            .unwrap();
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(summary_file.path()).unwrap()).unwrap();
        let points = summary["points_computed"].as_u64().unwrap();
        assert!(points >= 100, "{name}: only {points} points computed");
        let slack = summary["max_violation_slack"].as_f64().unwrap();
        assert!(slack <= 1e-8, "{name}: slack {slack}");
        checked += points as usize;
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "scenario sweeps took {elapsed:?}");
    println!(
        "PASS bound chain sound on the three shipped scenarios: {checked} points, \
         exit code 0 each, {elapsed:.2?}"
    );
}

#[test]
fn projection_defect_bound_is_exact_side_safe() {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..500 {
        let n = rng.gen_range(2..=4);
        let dim = rng.gen_range(n..=8);
        let family = random_independent_family(&mut rng, n, dim);
        let basis = gram_schmidt(&family).unwrap();
        for i in 0..n {
            let exact = projection_defect_exact(&basis, i);
            let bound = projection_defect_bound(&basis, i);
            worst = worst.max(exact - bound);
            assert!(exact <= bound + 1e-9, "exact {exact} > bound {bound}");
        }
    }
    // orthonormal input: both sides vanish
    let ortho: Vec<PureState> = (0..4).map(|i| PureState::basis(6, i).unwrap()).collect();
    let basis = gram_schmidt(&ortho).unwrap();
    for i in 0..4 {
        assert!(projection_defect_exact(&basis, i) < 1e-12);
        assert!(projection_defect_bound(&basis, i) < 1e-12);
    }
    println!(
        "PASS projection defect bounded by twice the overlap tail: 500 random families, \
         worst exact-minus-bound {worst:.3e}"
    );
}

#[test]
fn determinant_and_iterative_overlap_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut worst_overlap: f64 = 0.0;
    let mut worst_det: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.gen_range(2..=6);
        let dim = rng.gen_range(n..=10);
        let family = random_independent_family(&mut rng, n, dim);
        let basis = gram_schmidt(&family).unwrap();
        for i in 1..n {
            for k in 0..i {
                let det_route = overlap_via_determinant(&family, i, k).unwrap();
                let iterative = basis.input(i).inner(basis.ortho(k));
                let gap = (det_route - iterative).norm();
                worst_overlap = worst_overlap.max(gap);
                assert!(gap < 1e-8, "overlap routes differ by {gap} at ({i},{k})");
            }
        }
        for j in 1..=n {
            let product: f64 = (0..j).map(|i| basis.normalizer(i).powi(2)).product();
            let gap = (basis.gram_determinant(j) - product).abs();
            worst_det = worst_det.max(gap);
            assert!(gap < 1e-8, "determinant/product gap {gap} at {j}");
        }
    }
    println!(
        "PASS determinant-form overlaps match the iterative route: 500 families, \
         worst overlap gap {worst_overlap:.3e}, worst determinant gap {worst_det:.3e}"
    );
}

#[test]
fn discrimination_sandwich_and_reference_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    for _ in 0..500 {
        let dim = rng.gen_range(2..=6);
        let p = rng.gen_range(0.05..0.95);
        let rho1 = random_density(&mut rng, dim);
        let rho2 = random_density(&mut rng, dim);
        let ensemble = Ensemble::new(vec![(p, rho1.clone()), (1.0 - p, rho2.clone())]).unwrap();
        let lower = montanaro_lower(&ensemble).unwrap();
        let exact = helstrom_error(p, &rho1, 1.0 - p, &rho2).unwrap();
        let upper = knill_barnum_upper(&ensemble).unwrap();
        assert!(lower - exact <= 1e-9 && exact - upper <= 1e-9);
    }

    // equal priors, overlap 0.6: closed-form values
    let psi1 = PureState::basis(2, 0).unwrap();
    let psi2 = PureState::from_slice(&[cr(0.6), cr(0.8)]).unwrap();
    let pair = Ensemble::from_pure(vec![(0.5, psi1.clone()), (0.5, psi2.clone())]).unwrap();
    let lower = montanaro_lower(&pair).unwrap();
    let exact = helstrom_error(
        0.5,
        &DensityMatrix::from_pure(&psi1),
        0.5,
        &DensityMatrix::from_pure(&psi2),
    )
    .unwrap();
    let upper = knill_barnum_upper(&pair).unwrap();
    assert!((lower - 0.09).abs() <= 1e-10, "lower {lower}");
    assert!((exact - 0.1).abs() <= 1e-10, "exact {exact}");
    assert!((upper - 0.6).abs() <= 1e-10, "upper {upper}");
    assert!((exact - closed_form::helstrom_pure_equal_priors(0.6).unwrap()).abs() <= 1e-12);
    println!(
        "PASS discrimination sandwich on 500 random pairs; reference pair gives \
         {lower:.3} / {exact:.3} / {upper:.3}"
    );
}

#[test]
fn gram_pvm_bounds_are_achievable() {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..200 {
        let n = rng.gen_range(2..=4);
        let dim = rng.gen_range(n..=8);
        let family = random_independent_family(&mut rng, n, dim);
        let weights = random_weights(&mut rng, n);
        let ensemble = Ensemble::from_pure(
            weights
                .iter()
                .cloned()
                .zip(family.iter().cloned())
                .collect(),
        )
        .unwrap();
        let result = pure_ensemble_bound(&ensemble).unwrap();
        let achieved = pvm_objective(ensemble.items(), result.pvm.projectors()).unwrap();
        worst = worst.max(achieved - result.bound);
        assert!(achieved <= result.bound + 1e-9);
    }

    for _ in 0..100 {
        // two branches of two components, independent in dim ≥ 5
        let dim = rng.gen_range(5..=8);
        let family = random_independent_family(&mut rng, 4, dim);
        let p = rng.gen_range(0.2..0.8);
        let eta1 = rng.gen_range(0.2..0.8);
        let eta2 = rng.gen_range(0.2..0.8);
        let branches = vec![
            (
                p,
                vec![(eta1, family[0].clone()), (1.0 - eta1, family[1].clone())],
            ),
            (
                1.0 - p,
                vec![(eta2, family[2].clone()), (1.0 - eta2, family[3].clone())],
            ),
        ];
        let index = flatten_mixed(&branches).unwrap();
        let result = mixed_ensemble_bound(&index).unwrap();
        let items: Vec<(f64, DensityMatrix)> = (0..2)
            .map(|i| (index.branch_weight(i), index.branch_density(i).unwrap()))
            .collect();
        let achieved = pvm_objective(&items, &result.block_projectors).unwrap();
        worst = worst.max(achieved - result.bound);
        assert!(achieved <= result.bound + 1e-9);
    }

    // orthogonal inputs: bound and achieved both vanish
    let ortho: Vec<PureState> = (0..3).map(|i| PureState::basis(5, i).unwrap()).collect();
    let ensemble = Ensemble::from_pure(
        vec![0.2, 0.3, 0.5]
            .into_iter()
            .zip(ortho.iter().cloned())
            .collect(),
    )
    .unwrap();
    let result = pure_ensemble_bound(&ensemble).unwrap();
    let achieved = pvm_objective(ensemble.items(), result.pvm.projectors()).unwrap();
    assert!(result.bound <= 1e-9 && achieved <= 1e-9);

    // every branch a single component: block bound equals the pure bound
    let family = random_independent_family(&mut rng, 3, 6);
    let weights = random_weights(&mut rng, 3);
    let pure = pure_ensemble_bound(
        &Ensemble::from_pure(
            weights
                .iter()
                .cloned()
                .zip(family.iter().cloned())
                .collect(),
        )
        .unwrap(),
    )
    .unwrap();
    let degenerate_mixed = flatten_mixed(
        &family
            .iter()
            .zip(weights.iter())
            .map(|(psi, w)| (*w, vec![(1.0, psi.clone())]))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let block = mixed_ensemble_bound(&degenerate_mixed).unwrap();
    assert!(
        (block.bound - pure.bound).abs() <= 1e-10,
        "block {} vs pure {}",
        block.bound,
        pure.bound
    );
    println!(
        "PASS Gram/block PVM bounds achievable on 200 pure + 100 mixed ensembles, \
         worst achieved-minus-bound {worst:.3e}; single-component mixtures reduce to the \
         pure bound"
    );
}

#[test]
fn telescoping_and_rescaling_never_violated() {
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    let mut worst_tele: f64 = f64::NEG_INFINITY;
    for _ in 0..500 {
        let n = rng.gen_range(2..=3);
        let a: Vec<CMatrix> = (0..n)
            .map(|_| random_density(&mut rng, 2).into_matrix())
            .collect();
        let b: Vec<CMatrix> = (0..n)
            .map(|_| random_density(&mut rng, 2).into_matrix())
            .collect();
        let (lhs, rhs) = telescopic_check(&a, &b, CAP).unwrap();
        worst_tele = worst_tele.max(lhs - rhs);
        assert!(lhs <= rhs + 1e-9);
    }
    let mut worst_rescale: f64 = f64::NEG_INFINITY;
    for _ in 0..500 {
        let dim = rng.gen_range(2..=4);
        let rho = random_density(&mut rng, dim);
        let sigma = random_density(&mut rng, dim);
        let eta = rng.gen_range(0.0..1.0);
        let (l, d) = rescaling_check(&rho, &sigma, eta).unwrap();
        let bound = rescaled_distance_bound(l).unwrap();
        worst_rescale = worst_rescale.max(d - bound);
        assert!(d <= bound + 1e-9);
    }
    println!(
        "PASS telescoping and rescaling estimates: 500 trials each, worst slacks \
         {worst_tele:.3e} / {worst_rescale:.3e}"
    );
}

#[test]
fn exact_sbs_passes_structural_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let mut worst_defect: f64 = 0.0;
    let mut worst_error: f64 = 0.0;
    for trial in 0..10 {
        // branch i occupies rows {2i, 2i+1} of each dim-4 environment
        let mixed = trial % 2 == 0;
        let block = |rng: &mut ChaCha8Rng, offset: usize| -> DensityMatrix {
            if mixed {
                let w = rng.gen_range(0.2..0.8);
                let mut m = CMatrix::zeros(4, 4);
                m[(offset, offset)] = cr(w);
                m[(offset + 1, offset + 1)] = cr(1.0 - w);
                DensityMatrix::new(m).unwrap()
            } else {
                let mut v = CVector::zeros(4);
                v[offset] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                v[offset + 1] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                DensityMatrix::from_pure(&PureState::normalized(v).unwrap())
            }
        };
        let p = rng.gen_range(0.2..0.8);
        let state = SbsState::new(
            vec![p, 1.0 - p],
            vec![
                vec![block(&mut rng, 0), block(&mut rng, 0)],
                vec![block(&mut rng, 2), block(&mut rng, 2)],
            ],
        )
        .unwrap();
        assert!(state.is_exact(1e-9));

        let defect = sbs_nondisturbance_check(&state, CAP).unwrap();
        worst_defect = worst_defect.max(defect);
        assert!(defect <= 1e-8, "non-disturbance defect {defect}");

        for l in 0..state.n_envs() {
            let reduction = sbs_local_reduction(&state, l).unwrap();
            let mut effects: Vec<CMatrix> = (0..state.n_branches())
                .map(|i| state.branch_state(i, l).support_projector().unwrap())
                .collect();
            let mut sum = CMatrix::zeros(4, 4);
            for e in &effects {
                sum += e;
            }
            effects.push(sbs::linalg::identity(4) - sum);
            let povm = Povm::with_kraus(effects.clone(), effects).unwrap();
            let err = probability_error(&reduction, &povm).unwrap();
            worst_error = worst_error.max(err.abs());
            assert!(err.abs() <= 1e-9, "local discrimination error {err}");
        }
    }
    println!(
        "PASS exact SBS structural checks: worst non-disturbance defect {worst_defect:.3e}, \
         worst local discrimination error {worst_error:.3e}"
    );
}

#[test]
fn qubit_grid_oracle_is_coherent_with_gram_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..50 {
        let family = random_independent_family(&mut rng, 2, 2);
        let weights = random_weights(&mut rng, 2);
        let ensemble = Ensemble::from_pure(
            weights
                .iter()
                .cloned()
                .zip(family.iter().cloned())
                .collect(),
        )
        .unwrap();
        let grid = qubit_pvm_grid_search(&ensemble, 91).unwrap();
        let gram = pure_ensemble_bound(&ensemble).unwrap();
        let achieved = pvm_objective(ensemble.items(), gram.pvm.projectors()).unwrap();
        worst = worst.max(grid.value - (achieved + grid.grid_slack));
        assert!(
            grid.value <= achieved + grid.grid_slack,
            "grid {} vs achieved {} + slack {}",
            grid.value,
            achieved,
            grid.grid_slack
        );
    }

    // refinement monotonicity on a handful of ensembles
    for _ in 0..5 {
        let family = random_independent_family(&mut rng, 2, 2);
        let ensemble =
            Ensemble::from_pure(vec![(0.5, family[0].clone()), (0.5, family[1].clone())]).unwrap();
        let mut previous = f64::INFINITY;
        for r in [46usize, 91, 181] {
            let value = qubit_pvm_grid_search(&ensemble, r).unwrap().value;
            assert!(
                value <= previous + 1e-12,
                "refinement regressed: {value} > {previous}"
            );
            previous = value;
        }
    }
    println!(
        "PASS qubit grid oracle coherent with Gram-PVM values on 50 ensembles \
         (worst margin {worst:.3e}); grid refinement is monotone"
    );
}

#[test]
fn sweeps_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&dir_a, "1"), (&dir_b, "4")] {
        let output = Command::new(env!("CARGO_BIN_EXE_sbs"))
            .arg("sweep")
            .arg(scenario_path("pure_qubit_chain.json"))
            .arg("-o")
            .arg(dir.path())
            .arg("--threads")
            .arg(threads)
            .output()
            .unwrap();
        assert!(output.status.success());
    }
    for file in [
        "pure-qubit-chain_sweep.csv",
        "pure-qubit-chain_summary.json",
    ] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
    println!("PASS repeated sweeps produce byte-identical CSV and summary output");
}
