//! Batch front end: time sweeps of the bound chain and one-shot
//! discrimination reports, with deterministic CSV/JSON output.
//!
//! Time points are independent and dispatched to a worker pool; results are
//! collected in grid order by a single writer, so identical inputs produce
//! byte-identical files regardless of thread count. Floats are printed with
//! 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{sbs_distance_bound_with, BoundReport};
use crate::error::{Result, SbsError};
use crate::gram::{mixed_ensemble_bound, pure_ensemble_bound};
use crate::linalg::DEFAULT_DIM_CAP;
use crate::oracles::{qubit_pvm_grid_search, OracleResult, DEFAULT_GRID_RESOLUTION};
use crate::qsd::{helstrom_error, knill_barnum_upper, montanaro_lower, pvm_objective};
use crate::scenario::{EnsembleSpec, Scenario};

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Cap on assembled dimensions.
    pub cap: usize,
    /// Slack tolerance for the bound-chain inequalities.
    pub tol: f64,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    /// Overrides the scenario seed for randomized presets.
    pub seed: Option<u64>,
    /// Grid resolution for the qubit oracle in discrimination reports.
    pub grid_resolution: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_DIM_CAP,
            tol: 1e-8,
            threads: None,
            seed: None,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub scenario: String,
    pub strategy: String,
    pub points_requested: usize,
    pub points_computed: usize,
    /// Worst `measured − bound` slack over the sweep; positive means a
    /// violation. `None` when no distances were measured.
    pub max_violation_slack: Option<f64>,
    pub min_normalizer: f64,
    /// Times at which the branch states were degenerate and no bound exists.
    pub degeneracy_events: Vec<f64>,
    pub model_warnings: Vec<String>,
    pub flags_seen: Vec<String>,
    /// Points where the fidelity-sum diagnostic lies above ½·measured
    /// distance (consistent with it) versus below (inconclusive, since the
    /// measured distance is only an upper bound on the minimum).
    pub conjecture_consistent_points: usize,
    pub conjecture_inconclusive_points: usize,
    pub gamma_first_quarter_mean: f64,
    pub gamma_last_quarter_mean: f64,
    pub finite_dimension_note: String,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub csv_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub summary: SweepSummary,
    pub reports: Vec<BoundReport>,
    /// True when some inequality slack exceeded the tolerance.
    pub violation: bool,
}

const FINITE_DIMENSION_NOTE: &str = "Finite-dimensional environment generators have purely \
atomic spectra, so the decoherence factors are almost periodic and recur instead of decaying \
as t grows. Every inequality is therefore checked pointwise on the sampled grid; the gamma \
quarter means are an empirical decay diagnostic only, not an asymptotic statement.";

/// 17-significant-digit float formatting shared by all report writers.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn sanitize(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '-' || ch == '_' {
                ch
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() {
        "scenario".into()
    } else {
        cleaned
    }
}

fn run_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| SbsError::Validation(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// Sweep the bound chain over the scenario's time grid and write the CSV
/// and JSON summary into `out_dir`.
pub fn run_sweep(scenario: &Scenario, out_dir: &Path, opts: &SweepOptions) -> Result<SweepOutcome> {
    let strategy = scenario.strategy()?;
    let model = scenario.build_model(opts.seed)?;
    let points = scenario.time_points()?;
    let cap = opts.cap;

    let results: Vec<(f64, std::result::Result<BoundReport, SbsError>)> =
        run_pool(opts.threads, || {
            points
                .par_iter()
                .map(|&t| (t, sbs_distance_bound_with(&model, t, cap, &strategy)))
                .collect()
        })?;

    let mut reports = Vec::with_capacity(results.len());
    let mut degeneracy_events = Vec::new();
    for (t, result) in results {
        match result {
            Ok(report) => reports.push(report),
            Err(SbsError::DegenerateBranches { .. }) => degeneracy_events.push(t),
            Err(other) => return Err(other),
        }
    }

    let mut max_slack: Option<f64> = None;
    let mut min_normalizer = f64::INFINITY;
    let mut flags_seen: Vec<String> = Vec::new();
    let mut consistent = 0usize;
    let mut inconclusive = 0usize;
    for report in &reports {
        if let Some(slack) = report.violation_slack() {
            max_slack = Some(max_slack.map_or(slack, |m: f64| m.max(slack)));
        }
        min_normalizer = min_normalizer.min(report.normalizer);
        for flag in &report.flags {
            if !flags_seen.contains(flag) {
                flags_seen.push(flag.clone());
            }
        }
        if let Some(n) = report.measured_sbs {
            if report.conjectured >= 0.5 * n - 1e-12 {
                consistent += 1;
            } else {
                inconclusive += 1;
            }
        }
    }
    flags_seen.sort();

    let quarter = (reports.len() / 4).max(1).min(reports.len().max(1));
    let mean = |rs: &[BoundReport]| -> f64 {
        if rs.is_empty() {
            return 0.0;
        }
        rs.iter().map(|r| r.gamma_term).sum::<f64>() / rs.len() as f64
    };
    let gamma_first = mean(&reports[..quarter.min(reports.len())]);
    let gamma_last = mean(&reports[reports.len().saturating_sub(quarter)..]);

    let summary = SweepSummary {
        scenario: scenario.name.clone(),
        strategy: scenario.strategy.clone(),
        points_requested: points.len(),
        points_computed: reports.len(),
        max_violation_slack: max_slack,
        min_normalizer: if reports.is_empty() {
            0.0
        } else {
            min_normalizer
        },
        degeneracy_events,
        model_warnings: model.warnings().to_vec(),
        flags_seen,
        conjecture_consistent_points: consistent,
        conjecture_inconclusive_points: inconclusive,
        gamma_first_quarter_mean: gamma_first,
        gamma_last_quarter_mean: gamma_last,
        finite_dimension_note: FINITE_DIMENSION_NOTE.into(),
    };

    fs::create_dir_all(out_dir)?;
    let base = sanitize(&scenario.name);
    let want = |section: &str| {
        scenario.outputs.is_empty() || scenario.outputs.iter().any(|s| s == section)
    };

    let csv_path = if want("csv") {
        let path = out_dir.join(format!("{base}_sweep.csv"));
        write_sweep_csv(&path, &reports)?;
        Some(path)
    } else {
        None
    };
    let summary_path = if want("summary") {
        let path = out_dir.join(format!("{base}_summary.json"));
        let mut file = fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut file, &summary)?;
        file.write_all(b"\n")?;
        Some(path)
    } else {
        None
    };

    let violation = max_slack.is_some_and(|s| s > opts.tol);
    Ok(SweepOutcome {
        csv_path,
        summary_path,
        summary,
        reports,
        violation,
    })
}

fn write_sweep_csv(path: &Path, reports: &[BoundReport]) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "t,gamma_term,gram_term,total_bound,measured_unnormalized,measured_sbs,conjectured,normalizer_N,flags\n",
    );
    for r in reports {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_float(r.t),
            fmt_float(r.gamma_term),
            fmt_float(r.gram_term),
            fmt_float(r.total_bound),
            opt(r.measured_unnormalized),
            opt(r.measured_sbs),
            fmt_float(r.conjectured),
            fmt_float(r.normalizer),
            r.flags.join(";"),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GridOracleReport {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub resolution: usize,
    pub grid_slack: f64,
}

impl From<OracleResult> for GridOracleReport {
    fn from(o: OracleResult) -> Self {
        Self {
            value: o.value,
            argmin: o.argmin,
            resolution: o.resolution,
            grid_slack: o.grid_slack,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscriminationReport {
    pub name: String,
    pub dim: usize,
    pub n_states: usize,
    pub pure_states: bool,
    pub montanaro_lower: f64,
    pub knill_barnum_upper: f64,
    /// The upper bound exceeds one and carries no information there.
    pub knill_barnum_vacuous: bool,
    /// Exact two-state minimum; only defined for two states.
    pub helstrom: Option<f64>,
    /// Gram-PVM bound (rank-one for pure ensembles, block for mixtures).
    pub gram_pvm_bound: f64,
    /// Coarser single-sum variant; mixtures only.
    pub coarse_bound: Option<f64>,
    /// Objective actually achieved by the constructed PVM.
    pub achieved_gram_pvm: f64,
    /// Exhaustive qubit search; two qubit states only.
    pub grid_oracle: Option<GridOracleReport>,
}

/// Produce the discrimination report for an ensemble file and write it as
/// JSON into `out_dir`.
pub fn run_discrimination(
    spec: &EnsembleSpec,
    out_dir: &Path,
    opts: &SweepOptions,
) -> Result<(PathBuf, DiscriminationReport)> {
    let ensemble = spec.to_ensemble()?;
    let montanaro = montanaro_lower(&ensemble)?;
    let knill_barnum = knill_barnum_upper(&ensemble)?;
    let helstrom = if ensemble.len() == 2 {
        Some(helstrom_error(
            ensemble.weight(0),
            ensemble.state(0),
            ensemble.weight(1),
            ensemble.state(1),
        )?)
    } else {
        None
    };

    let (gram_bound, coarse, achieved) = if spec.is_pure() {
        let result = pure_ensemble_bound(&ensemble)?;
        let achieved = pvm_objective(ensemble.items(), result.pvm.projectors())?;
        (result.bound, None, achieved)
    } else {
        let index = spec.to_mixed_index()?;
        let result = mixed_ensemble_bound(&index)?;
        let items: Result<Vec<_>> = (0..index.n_branches())
            .map(|i| Ok((index.branch_weight(i), index.branch_density(i)?)))
            .collect();
        let achieved = pvm_objective(&items?, &result.block_projectors)?;
        (result.bound, Some(result.coarse_bound), achieved)
    };

    let grid_oracle = if ensemble.dim() == 2 && ensemble.len() == 2 && spec.is_pure() {
        Some(qubit_pvm_grid_search(&ensemble, opts.grid_resolution)?.into())
    } else {
        None
    };

    let report = DiscriminationReport {
        name: spec.name.clone(),
        dim: spec.dim,
        n_states: ensemble.len(),
        pure_states: spec.is_pure(),
        montanaro_lower: montanaro,
        knill_barnum_upper: knill_barnum,
        knill_barnum_vacuous: knill_barnum > 1.0,
        helstrom,
        gram_pvm_bound: gram_bound,
        coarse_bound: coarse,
        achieved_gram_pvm: achieved,
        grid_oracle,
    };

    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}_discrimination.json", sanitize(&spec.name)));
    let mut file = fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut file, &report)?;
    file.write_all(b"\n")?;
    Ok((path, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_scenario(steps: usize) -> Scenario {
        Scenario::from_json(&format!(
            r#"{{
                "name": "unit-chain",
                "model": {{
                    "eigenvalues": [1.0, -1.0],
                    "system": {{ "kind": "vector", "amplitudes": [0.70710678118654752, 0.70710678118654752] }},
                    "environments": [
                        {{ "dim": 2, "coupling": 0.53, "generator": {{ "kind": "pauli_z" }}, "initial": {{ "kind": "plus" }} }},
                        {{ "dim": 2, "coupling": 0.41, "generator": {{ "kind": "pauli_z" }}, "initial": {{ "kind": "plus" }} }},
                        {{ "dim": 2, "coupling": 0.29, "generator": {{ "kind": "pauli_z" }}, "initial": {{ "kind": "plus" }} }}
                    ],
                    "observed": 1
                }},
                "time_grid": {{ "start": 0.15, "stop": 6.0, "steps": {steps} }},
                "seed": 3
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn sweep_writes_rows_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = chain_scenario(21);
        let outcome = run_sweep(&scenario, dir.path(), &SweepOptions::default()).unwrap();
        assert!(!outcome.violation);
        assert_eq!(outcome.summary.points_computed, 21);
        assert!(outcome.summary.max_violation_slack.unwrap() <= 1e-8);

        let csv = fs::read_to_string(outcome.csv_path.as_ref().unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 22);
        assert!(lines[0].starts_with("t,gamma_term,gram_term,total_bound"));
        assert!(!csv.contains('\r'));

        let summary = fs::read_to_string(outcome.summary_path.as_ref().unwrap()).unwrap();
        assert!(summary.contains("max_violation_slack"));
    }

    #[test]
    fn sweep_is_deterministic_across_thread_counts() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let scenario = chain_scenario(11);
        let single = SweepOptions {
            threads: Some(1),
            ..Default::default()
        };
        run_sweep(&scenario, dir_a.path(), &single).unwrap();
        let quad = SweepOptions {
            threads: Some(4),
            ..Default::default()
        };
        run_sweep(&scenario, dir_b.path(), &quad).unwrap();
        let a = fs::read(dir_a.path().join("unit-chain_sweep.csv")).unwrap();
        let b = fs::read(dir_b.path().join("unit-chain_sweep.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_records_degeneracy_events() {
        let mut scenario = chain_scenario(5);
        scenario.time_grid = crate::scenario::TimeGridSpec::Explicit(vec![0.0, 0.5, 1.0]);
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_sweep(&scenario, dir.path(), &SweepOptions::default()).unwrap();
        assert_eq!(outcome.summary.points_computed, 2);
        assert_eq!(outcome.summary.degeneracy_events, vec![0.0]);
    }

    #[test]
    fn discrimination_report_reference_pair() {
        let spec = EnsembleSpec::from_json(
            r#"{
                "name": "overlap-pair",
                "dim": 2,
                "states": [
                    { "weight": 0.5, "kind": "vector", "amplitudes": [1.0, 0.0] },
                    { "weight": 0.5, "kind": "vector", "amplitudes": [0.6, 0.8] }
                ]
            }"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = SweepOptions {
            grid_resolution: 91,
            ..Default::default()
        };
        let (_, report) = run_discrimination(&spec, dir.path(), &opts).unwrap();
        assert!((report.montanaro_lower - 0.09).abs() < 1e-10);
        assert!((report.helstrom.unwrap() - 0.1).abs() < 1e-10);
        assert!((report.knill_barnum_upper - 0.6).abs() < 1e-10);
        assert!(!report.knill_barnum_vacuous);
        assert!(report.achieved_gram_pvm <= report.gram_pvm_bound + 1e-9);
        let oracle = report.grid_oracle.unwrap();
        assert!(oracle.value <= report.achieved_gram_pvm + oracle.grid_slack);
    }

    #[test]
    fn discrimination_report_mixed_branches() {
        let spec = EnsembleSpec::from_json(
            r#"{
                "name": "mixed-pair",
                "dim": 6,
                "states": [
                    { "weight": 0.5, "kind": "mixture", "components": [
                        { "weight": 0.6, "amplitudes": [1.0, 0.0, 0.0, 0.0, 0.0, 0.0] },
                        { "weight": 0.4, "amplitudes": [0.0, 1.0, 0.0, 0.0, 0.0, 0.0] }
                    ]},
                    { "weight": 0.5, "kind": "mixture", "components": [
                        { "weight": 0.5, "amplitudes": [0.1, 0.0, 0.99498743710662, 0.0, 0.0, 0.0] },
                        { "weight": 0.5, "amplitudes": [0.0, 0.1, 0.0, 0.99498743710662, 0.0, 0.0] }
                    ]}
                ]
            }"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (path, report) =
            run_discrimination(&spec, dir.path(), &SweepOptions::default()).unwrap();
        assert!(report.coarse_bound.is_some());
        assert!(report.achieved_gram_pvm <= report.gram_pvm_bound + 1e-9);
        assert!(report.grid_oracle.is_none());
        assert!(path.exists());
    }
}
