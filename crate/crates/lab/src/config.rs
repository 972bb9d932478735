//! Experiment configuration, read from and written to TOML.

use holonomy_core::circle::DiffMetricConfig;
use holonomy_core::cocycle::{synthesize_cohomologous, CocycleGenerator, Family, PhiFamily};
use holonomy_core::holonomy::HolonomyConfig;
use holonomy_core::torus::AnosovBase;
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub base: BaseConfig,
    #[serde(default)]
    pub fiber: FiberConfig,
    pub cocycle: CocycleConfig,
    /// Ground-truth conjugacy. When present, `A` is synthesized as `Φ_{f·} ∘ B ∘ Φ⁻¹`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiFamily>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub samples: SampleConfig,
    #[serde(default)]
    pub gates: Gates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    pub matrix: [[i64; 2]; 2],
    pub r_loc: f64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self { matrix: [[2, 1], [1, 1]], r_loc: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberConfig {
    pub grid_size: usize,
    pub epsilon0: f64,
    pub delta0: f64,
    /// Target regularity `r` in the bunching flags, `ρ = q − r`.
    pub r: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        let d = DiffMetricConfig::default();
        Self { grid_size: d.grid_size, epsilon0: d.epsilon0, delta0: d.delta0, r: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Declared fiber smoothness.
    pub q: f64,
    #[serde(flatten)]
    pub family: Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub holonomy: f64,
    pub inversion: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { holonomy: 1e-8, inversion: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Truncation {
    pub max_n: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { max_n: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Averaging {
    /// Cesàro length `N` of the metric average.
    pub n: usize,
}

impl Default for Averaging {
    fn default() -> Self {
        Self { n: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Lattice resolution of the conjugacy field and of the sampled generator.
    pub base_resolution: usize,
    pub metric_resolution: usize,
    pub metric_fiber: usize,
    /// Fiber points per base point in the generator CSV.
    pub fiber_samples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { base_resolution: 32, metric_resolution: 16, metric_fiber: 64, fiber_samples: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Leaf pairs per side in the holonomy table.
    pub pairs: usize,
    pub triples: usize,
    pub h2_pairs: usize,
    pub h2_max_n: usize,
    pub intertwining_pairs: usize,
    pub cycle_centers: usize,
    pub spot_checks: usize,
    pub metric_holonomy_pairs: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            pairs: 50,
            triples: 50,
            h2_pairs: 10,
            h2_max_n: 5,
            intertwining_pairs: 50,
            cycle_centers: 4,
            spot_checks: 10,
            metric_holonomy_pairs: 10,
        }
    }
}

/// Pass thresholds for the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    /// Allowed excess of the measured increment ratio over `σλ^β`.
    pub theta_margin: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3_slope: f64,
    pub synthesis: f64,
    pub ground_truth: f64,
    pub conjugacy: f64,
    pub intertwining: f64,
    pub path_independence: f64,
    pub reduction: f64,
    pub telescoping: f64,
    pub metric_relative: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            theta_margin: 0.05,
            h1: 3e-8,
            h2: 5e-8,
            h3_slope: 0.9,
            synthesis: 1e-9,
            ground_truth: 1e-3,
            conjugacy: 1e-3,
            intertwining: 1e-3,
            path_independence: 1e-4,
            reduction: 1e-3,
            telescoping: 1e-10,
            metric_relative: 0.05,
        }
    }
}

fn invalid(path: &str, msg: impl Into<String>) -> LabError {
    LabError::ConfigInvalid { path: path.to_string(), msg: msg.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid("<root>", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML form; parsing it back gives an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs contain only TOML-representable values")
    }

    pub fn validate(&self) -> Result<(), LabError> {
        self.base_map()?;
        self.fiber_config().validate().map_err(|e| invalid("fiber", e.to_string()))?;
        if !(self.tolerances.holonomy > 0.0) {
            return Err(invalid("tolerances.holonomy", "must be positive"));
        }
        if self.truncation.max_n < 8 {
            return Err(invalid("truncation.max_n", "must be at least 8"));
        }
        if self.grid.base_resolution < 2 {
            return Err(invalid("grid.base_resolution", "must be at least 2"));
        }
        if self.grid.fiber_samples == 0 {
            return Err(invalid("grid.fiber_samples", "must be positive"));
        }
        match (&self.cocycle.a, &self.cocycle.b, &self.phi) {
            (Some(_), _, Some(_)) => {
                return Err(invalid("cocycle.a", "must be omitted when phi synthesizes it from cocycle.b"))
            }
            (None, None, _) => return Err(invalid("cocycle", "needs a, or b together with phi")),
            (None, Some(_), None) => return Err(invalid("cocycle.a", "missing; give it or a phi to synthesize it")),
            _ => {}
        }
        for (path, spec) in [("cocycle.a", &self.cocycle.a), ("cocycle.b", &self.cocycle.b)] {
            if let Some(s) = spec {
                s.family.validate().map_err(|e| invalid(path, e.to_string()))?;
            }
        }
        if let Some(phi) = &self.phi {
            phi.validate().map_err(|e| invalid("phi", e.to_string()))?;
        }
        Ok(())
    }

    pub fn base_map(&self) -> Result<AnosovBase, LabError> {
        AnosovBase::new(self.base.matrix, self.base.r_loc).map_err(|e| invalid("base", e.to_string()))
    }

    pub fn fiber_config(&self) -> DiffMetricConfig {
        DiffMetricConfig {
            epsilon0: self.fiber.epsilon0,
            delta0: self.fiber.delta0,
            inversion_tol: self.tolerances.inversion,
            grid_size: self.fiber.grid_size,
        }
    }

    pub fn holonomy_config(&self) -> HolonomyConfig {
        HolonomyConfig { tol: self.tolerances.holonomy, max_n: self.truncation.max_n, ..HolonomyConfig::default() }
    }

    fn generator(&self, path: &str, spec: &GeneratorSpec) -> Result<CocycleGenerator, LabError> {
        CocycleGenerator::with_fiber(self.base_map()?, spec.family.clone(), spec.q, self.fiber_config())
            .map_err(|e| invalid(path, e.to_string()))
    }

    /// `A`, given directly or synthesized from `B` and `Φ`.
    pub fn generator_a(&self) -> Result<CocycleGenerator, LabError> {
        match (&self.cocycle.a, &self.cocycle.b, &self.phi) {
            (Some(a), _, _) => self.generator("cocycle.a", a),
            (None, Some(b), Some(phi)) => synthesize_cohomologous(&self.generator("cocycle.b", b)?, phi.clone())
                .map_err(|e| invalid("phi", e.to_string())),
            _ => Err(invalid("cocycle.a", "missing")),
        }
    }

    pub fn generator_b(&self) -> Result<Option<CocycleGenerator>, LabError> {
        self.cocycle.b.as_ref().map(|b| self.generator("cocycle.b", b)).transpose()
    }

    /// A minimal config: the perturbed rotation with `ε = 0.1` and every default.
    pub fn example() -> Self {
        use holonomy_core::cocycle::TrigPoly2;
        let family = Family::PerturbedRotation {
            alpha: TrigPoly2::constant(0.1).with_cos([1, 0], 0.05),
            eps: TrigPoly2::constant(0.1),
            phase: TrigPoly2::default().with_sin([0, 1], 0.3).with_cos([1, 1], 0.1),
        };
        Self {
            seed: 1,
            base: BaseConfig::default(),
            fiber: FiberConfig::default(),
            cocycle: CocycleConfig { a: Some(GeneratorSpec { q: 2.0, family }), b: None },
            phi: None,
            tolerances: Tolerances::default(),
            truncation: Truncation::default(),
            averaging: Averaging::default(),
            grid: GridConfig::default(),
            samples: SampleConfig::default(),
            gates: Gates::default(),
        }
    }
}
