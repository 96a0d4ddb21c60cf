//! Human-writable JSON descriptions of models, time grids and ensembles,
//! plus their conversion into validated in-memory objects.
//!
//! Complex numbers are written either as a plain number (real) or as a
//! two-element array `[re, im]`. Generators may be given explicitly or by
//! preset name; `random_hermitian` draws entries from a seeded generator so
//! identical (scenario, seed) pairs produce bit-identical models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EnvInitial, Environment, VonNeumannModel};
use crate::error::{Result, SbsError};
use crate::gram::MixedIndex;
use crate::linalg::{c, cr, pauli_x, pauli_z, CMatrix, CVector, DensityMatrix, PureState};
use crate::qsd::Ensemble;

/// A complex scalar: `x` or `[re, im]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexSpec {
    pub fn value(&self) -> crate::linalg::C64 {
        match self {
            ComplexSpec::Real(re) => cr(*re),
            ComplexSpec::Pair([re, im]) => c(*re, *im),
        }
    }
}

fn vector_from_spec(amplitudes: &[ComplexSpec]) -> CVector {
    CVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|z| z.value()))
}

fn matrix_from_spec(rows: &[Vec<ComplexSpec>], what: &str) -> Result<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(SbsError::Validation(format!(
            "{what}: matrix rows must form a square"
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j].value()))
}

/// System state: a pure amplitude vector or a full density matrix, both in
/// the pointer basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    Vector { amplitudes: Vec<ComplexSpec> },
    Matrix { rows: Vec<Vec<ComplexSpec>> },
}

impl SystemSpec {
    pub fn to_density(&self) -> Result<DensityMatrix> {
        match self {
            SystemSpec::Vector { amplitudes } => {
                let psi = PureState::normalized(vector_from_spec(amplitudes))?;
                Ok(DensityMatrix::from_pure(&psi))
            }
            SystemSpec::Matrix { rows } => DensityMatrix::new(matrix_from_spec(rows, "system")?),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    PauliZ,
    PauliX,
    /// Dense Hermitian matrix with entries drawn uniformly from [-1, 1);
    /// the seed defaults to `scenario seed + environment index`.
    RandomHermitian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Explicit {
        rows: Vec<Vec<ComplexSpec>>,
    },
}

impl GeneratorSpec {
    fn build(&self, dim: usize, fallback_seed: u64, env_index: usize) -> Result<CMatrix> {
        match self {
            GeneratorSpec::PauliZ => {
                if dim != 2 {
                    return Err(SbsError::Validation(format!(
                        "environments[{env_index}]: pauli_z needs dim 2, got {dim}"
                    )));
                }
                Ok(pauli_z())
            }
            GeneratorSpec::PauliX => {
                if dim != 2 {
                    return Err(SbsError::Validation(format!(
                        "environments[{env_index}]: pauli_x needs dim 2, got {dim}"
                    )));
                }
                Ok(pauli_x())
            }
            GeneratorSpec::RandomHermitian { seed } => {
                let seed = seed.unwrap_or(fallback_seed.wrapping_add(env_index as u64));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let raw = CMatrix::from_fn(dim, dim, |_, _| {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                Ok((&raw + raw.adjoint()) * cr(0.5))
            }
            GeneratorSpec::Explicit { rows } => {
                let m = matrix_from_spec(rows, &format!("environments[{env_index}].generator"))?;
                if m.nrows() != dim {
                    return Err(SbsError::Shape(format!(
                        "environments[{env_index}]: generator is {}x{}, expected {dim}x{dim}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    /// Uniform superposition over the basis.
    Plus,
    Basis {
        index: usize,
    },
    Vector {
        amplitudes: Vec<ComplexSpec>,
    },
    Mixture {
        components: Vec<MixtureComponentSpec>,
    },
    MaximallyMixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureComponentSpec {
    pub weight: f64,
    pub amplitudes: Vec<ComplexSpec>,
}

impl InitialSpec {
    fn build(&self, dim: usize, env_index: usize) -> Result<EnvInitial> {
        let check_dim = |n: usize| -> Result<()> {
            if n != dim {
                return Err(SbsError::Shape(format!(
                    "environments[{env_index}]: initial state has dim {n}, expected {dim}"
                )));
            }
            Ok(())
        };
        match self {
            InitialSpec::Plus => Ok(EnvInitial::Pure(PureState::plus(dim))),
            InitialSpec::Basis { index } => Ok(EnvInitial::Pure(PureState::basis(dim, *index)?)),
            InitialSpec::Vector { amplitudes } => {
                check_dim(amplitudes.len())?;
                Ok(EnvInitial::Pure(PureState::normalized(vector_from_spec(
                    amplitudes,
                ))?))
            }
            InitialSpec::Mixture { components } => {
                let comps: Result<Vec<(f64, PureState)>> = components
                    .iter()
                    .map(|comp| {
                        check_dim(comp.amplitudes.len())?;
                        Ok((
                            comp.weight,
                            PureState::normalized(vector_from_spec(&comp.amplitudes))?,
                        ))
                    })
                    .collect();
                Ok(EnvInitial::Mixture(comps?))
            }
            InitialSpec::MaximallyMixed => {
                Ok(EnvInitial::Density(DensityMatrix::maximally_mixed(dim)))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub dim: usize,
    pub coupling: f64,
    pub generator: GeneratorSpec,
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Pointer eigenvalues x₁…x_d.
    pub eigenvalues: Vec<f64>,
    pub system: SystemSpec,
    pub environments: Vec<EnvironmentSpec>,
    /// Number of observed environments (the rest are traced out).
    pub observed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGridSpec {
    Explicit(Vec<f64>),
    Linspace { start: f64, stop: f64, steps: usize },
}

impl TimeGridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        match self {
            TimeGridSpec::Explicit(ts) => {
                if ts.is_empty() {
                    return Err(SbsError::Validation("time_grid: empty grid".into()));
                }
                if ts.iter().any(|t| !t.is_finite()) {
                    return Err(SbsError::Validation("time_grid: non-finite time".into()));
                }
                Ok(ts.clone())
            }
            TimeGridSpec::Linspace { start, stop, steps } => {
                if *steps == 0 {
                    return Err(SbsError::Validation(
                        "time_grid: steps must be positive".into(),
                    ));
                }
                if !start.is_finite() || !stop.is_finite() {
                    return Err(SbsError::Validation(
                        "time_grid: non-finite endpoint".into(),
                    ));
                }
                if *steps == 1 {
                    return Ok(vec![*start]);
                }
                let h = (stop - start) / (*steps as f64 - 1.0);
                Ok((0..*steps).map(|i| start + h * i as f64).collect())
            }
        }
    }
}

fn default_strategy() -> String {
    "gram".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    pub time_grid: TimeGridSpec,
    /// `gram` (default) or `support`.
    #[serde(default = "default_strategy")]
    pub strategy: String,
    /// Requested report sections; empty means everything.
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Build the validated model; `seed_override` replaces the scenario
    /// seed for randomized presets.
    pub fn build_model(&self, seed_override: Option<u64>) -> Result<VonNeumannModel> {
        let seed = seed_override.unwrap_or(self.seed);
        let system = self.model.system.to_density()?;
        let mut environments = Vec::with_capacity(self.model.environments.len());
        for (k, spec) in self.model.environments.iter().enumerate() {
            environments.push(Environment {
                dim: spec.dim,
                coupling: spec.coupling,
                generator: spec.generator.build(spec.dim, seed, k)?,
                initial: spec.initial.build(spec.dim, k)?,
            });
        }
        VonNeumannModel::new(
            self.model.eigenvalues.clone(),
            system,
            environments,
            self.model.observed,
        )
    }

    pub fn time_points(&self) -> Result<Vec<f64>> {
        self.time_grid.points()
    }

    pub fn strategy(&self) -> Result<crate::dynamics::SbsStrategy> {
        match self.strategy.as_str() {
            "gram" => Ok(crate::dynamics::SbsStrategy::Gram),
            "support" => Ok(crate::dynamics::SbsStrategy::Support),
            other => Err(SbsError::Validation(format!(
                "strategy must be \"gram\" or \"support\", got {other:?}"
            ))),
        }
    }
}

/// One member of a discrimination ensemble: pure vector or mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleStateSpec {
    pub weight: f64,
    #[serde(flatten)]
    pub state: InitialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub name: String,
    pub dim: usize,
    pub states: Vec<EnsembleStateSpec>,
}

impl EnsembleSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The ensemble of density operators.
    pub fn to_ensemble(&self) -> Result<Ensemble> {
        let items: Result<Vec<(f64, DensityMatrix)>> = self
            .states
            .iter()
            .map(|s| Ok((s.weight, s.state.build(self.dim, 0)?.density()?)))
            .collect();
        Ensemble::new(items?)
    }

    /// True when every member is a pure state.
    pub fn is_pure(&self) -> bool {
        self.states.iter().all(|s| {
            !matches!(
                s.state,
                InitialSpec::Mixture { .. } | InitialSpec::MaximallyMixed
            )
        })
    }

    /// Flattened component view for the block-PVM bound.
    pub fn to_mixed_index(&self) -> Result<MixedIndex> {
        let branches: Result<Vec<(f64, crate::gram::WeightedComponents)>> = self
            .states
            .iter()
            .map(|s| Ok((s.weight, s.state.build(self.dim, 0)?.components()?)))
            .collect();
        crate::gram::flatten_mixed(&branches?)
    }
}
