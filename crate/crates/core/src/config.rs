//! JSON experiment schema. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::dominance::{gaussian_grid_kernel, DominanceSettings, PairSpec};
use crate::geometry::{Density, Space};
use crate::models::kernel::ginibre_kernel;
use crate::models::{Alpha, Condition, CountDistribution, GibbsPairwise, Model, PairPotential};
use crate::transforms::Transform;
use crate::{Error, Result};

/// The only schema version this build reads.
pub const SCHEMA: &str = "steinpp/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub seed: u64,
    #[serde(default)]
    pub models: Vec<NamedModel>,
    #[serde(default)]
    pub samples: Vec<SampleSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub bounds: Option<BoundsSpec>,
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the line and column of the fault.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(Error::Config(format!("schema {:?} is not supported (expected {SCHEMA:?})", cfg.schema)));
        }
        let mut ids = std::collections::BTreeSet::new();
        for m in &cfg.models {
            if !ids.insert(m.id.as_str()) {
                return Err(Error::Config(format!("duplicate model id {:?}", m.id)));
            }
        }
        let known = |id: &str| ids.contains(id);
        for s in &cfg.samples {
            if !known(&s.model) {
                return Err(Error::Config(format!("sample refers to unknown model {:?}", s.model)));
            }
        }
        for c in &cfg.checks {
            if let Some(m) = c.model() {
                if !known(m) {
                    return Err(Error::Config(format!("check {:?} refers to unknown model {m:?}", c.id())));
                }
            }
        }
        Ok(cfg)
    }

    pub fn model(&self, id: &str) -> Result<&NamedModel> {
        self.models
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::Config(format!("unknown model {id:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedModel {
    pub id: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
}

impl NamedModel {
    /// The base model wrapped in its transforms, outermost last.
    pub fn build(&self) -> Result<Model> {
        let mut m = self.model.build()?;
        for t in &self.transforms {
            m = Model::transformed(m, t.build()?);
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    UnitBox { dim: usize },
    Disk { center: [f64; 2], radius: f64 },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<Space> {
        match self {
            SpaceSpec::Box { lower, upper } => Space::new_box(lower, upper),
            SpaceSpec::UnitBox { dim } => {
                if !(1..=3).contains(dim) {
                    return Err(Error::Config(format!("unit box dimension {dim}")));
                }
                Ok(Space::unit_box(*dim))
            }
            SpaceSpec::Disk { center, radius } => Space::disk(*center, *radius),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountsSpec {
    Poisson { mean: f64 },
    Geometric { ratio: f64 },
    Table { probs: Vec<f64> },
}

impl CountsSpec {
    pub fn build(&self) -> Result<CountDistribution> {
        match self {
            CountsSpec::Poisson { mean } => CountDistribution::poisson(*mean),
            CountsSpec::Geometric { ratio } => CountDistribution::geometric(*ratio),
            CountsSpec::Table { probs } => CountDistribution::from_probs(probs.clone()),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn four() -> usize {
    4
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Poisson {
        space: SpaceSpec,
        #[serde(default = "one")]
        intensity: f64,
    },
    Binomial {
        space: SpaceSpec,
        n: usize,
    },
    /// Purely random process with uniform locations.
    Prpp {
        space: SpaceSpec,
        counts: CountsSpec,
    },
    Hardcore {
        space: SpaceSpec,
        #[serde(default = "one")]
        lambda: f64,
        r: f64,
    },
    Bounded {
        space: SpaceSpec,
        #[serde(default = "one")]
        lambda: f64,
        n: usize,
    },
    /// Pairwise Gibbs with constant `Ψ₁` and a step `Ψ₂`.
    Gibbs {
        space: SpaceSpec,
        #[serde(default = "one")]
        theta: f64,
        #[serde(default)]
        psi1: f64,
        height: f64,
        range: f64,
    },
    /// Gaussian-kernel DPP on the `per_axis × per_axis` grid of the unit
    /// square; `n > 1` gives the `(−1/n)` process.
    GaussianDpp {
        #[serde(default = "four")]
        per_axis: usize,
        scale: f64,
        width: f64,
        #[serde(default = "one_usize")]
        n: usize,
    },
    /// Ginibre kernel on a polar grid over a centred disk.
    Ginibre {
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default = "one")]
        beta: f64,
        radius: f64,
        rings: usize,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Poisson { space, intensity } => Model::poisson(space.build()?, Density::constant(*intensity)),
            ModelSpec::Binomial { space, n } => Model::binomial(space.build()?, *n, Density::constant(1.0)),
            ModelSpec::Prpp { space, counts } => {
                Model::purely_random(space.build()?, counts.build()?, Density::constant(1.0))
            }
            ModelSpec::Hardcore { space, lambda, r } => {
                Model::conditional(space.build()?, Density::constant(*lambda), Condition::Hardcore(*r))
            }
            ModelSpec::Bounded { space, lambda, n } => {
                Model::conditional(space.build()?, Density::constant(*lambda), Condition::Bounded(*n))
            }
            ModelSpec::Gibbs { space, theta, psi1, height, range } => Ok(Model::Gibbs(GibbsPairwise::new(
                space.build()?,
                *theta,
                Density::constant(*psi1),
                PairPotential::Step { height: *height, range: *range },
            )?)),
            ModelSpec::GaussianDpp { per_axis, scale, width, n } => {
                let k = gaussian_grid_kernel(*per_axis, *scale, *width)?;
                let alpha = if *n <= 1 { Alpha::MinusOne } else { Alpha::MinusOneOver(*n as u32) };
                Ok(Model::Dpp(k.with_alpha(alpha)?))
            }
            ModelSpec::Ginibre { gamma, beta, radius, rings } => {
                let disk = Space::disk([0.0, 0.0], *radius)?;
                Ok(Model::Dpp(ginibre_kernel(*gamma, *beta, &disk, *rings)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    Restrict { lower: Vec<f64>, upper: Vec<f64> },
    Thin { beta: f64 },
    Rescale { eps: f64 },
    Superpose { models: Vec<ModelSpec> },
}

impl TransformSpec {
    pub fn build(&self) -> Result<Transform> {
        Ok(match self {
            TransformSpec::Restrict { lower, upper } => Transform::Restrict(Space::new_box(lower, upper)?),
            TransformSpec::Thin { beta } => {
                if !(0.0..=1.0).contains(beta) {
                    return Err(Error::Config(format!("thinning probability {beta} not in [0,1]")));
                }
                Transform::Thin(Density::constant(*beta))
            }
            TransformSpec::Rescale { eps } => Transform::Rescale(*eps),
            TransformSpec::Superpose { models } => {
                Transform::Superpose(models.iter().map(|m| m.build()).collect::<Result<_>>()?)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub model: String,
    #[serde(default = "one_usize")]
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// GNZ identity for `u ≡ 1` and `u(x, φ) = φ(A)` with `A` the lower
    /// half of the bounding box. `evaluator` replaces the model's own
    /// intensity.
    Gnz {
        id: String,
        model: String,
        #[serde(default)]
        evaluator: Option<ModelSpec>,
        n_samples: usize,
        #[serde(default)]
        resolution: Option<usize>,
    },
    Lemmas {
        id: String,
        model: String,
        n_samples: usize,
        #[serde(default = "yes")]
        weakly_repulsive: bool,
    },
    /// Semigroup, commutation, invariance, rate and stationarity checks for
    /// a constant-intensity target on the unit square.
    Glauber {
        id: String,
        #[serde(default = "one")]
        intensity: f64,
        n_samples: usize,
    },
}

impl CheckSpec {
    pub fn id(&self) -> &str {
        match self {
            CheckSpec::Gnz { id, .. } | CheckSpec::Lemmas { id, .. } | CheckSpec::Glauber { id, .. } => id,
        }
    }

    pub fn model(&self) -> Option<&str> {
        match self {
            CheckSpec::Gnz { model, .. } | CheckSpec::Lemmas { model, .. } => Some(model),
            CheckSpec::Glauber { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default)]
    pub settings: DominanceSettings,
    /// Defaults to the eight-pair suite.
    #[serde(default = "PairSpec::suite")]
    pub pairs: Vec<PairSpec>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": "steinpp/1",
        "seed": 7,
        "models": [
            {"id": "pois", "model": {"family": "poisson", "space": {"kind": "unit_box", "dim": 2}}},
            {"id": "hc", "model": {"family": "hardcore", "space": {"kind": "unit_box", "dim": 2}, "r": 0.1},
             "transforms": [{"op": "thin", "beta": 0.5}]}
        ],
        "samples": [{"model": "pois"}],
        "checks": [{"kind": "gnz", "id": "g", "model": "pois", "n_samples": 100}],
        "bounds": {"pairs": [{"pair": "bounded_zero"}]}
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.samples[0].replicas, 1);
        assert_eq!(cfg.model("hc").unwrap().build().unwrap().family(), "transformed");
        assert_eq!(cfg.bounds.unwrap().settings, DominanceSettings::default());
    }

    #[test]
    fn unknown_key_reports_line() {
        let bad = MINIMAL.replace("\"n_samples\": 100", "\"n_samples\": 100, \"colour\": 1");
        let err = ExperimentConfig::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("line"), "{err}");
    }

    #[test]
    fn rejects_wrong_schema_and_dangling_ids() {
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("steinpp/1", "steinpp/0")).is_err());
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"model\": \"pois\"}", "\"model\": \"nope\"}")).is_err());
    }

    #[test]
    fn default_bounds_are_the_suite() {
        let b: BoundsSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(b.pairs.len(), 8);
    }
}
