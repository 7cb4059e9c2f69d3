//! Experiment configuration, validation and the published JSON schema.

use std::path::{Path, PathBuf};

use plaplab_core::estimate::{Thresholds, DEFAULT_T1, DEFAULT_T2};
use plaplab_core::forcing::Profile;
use plaplab_core::grid::{build_domain, DomainShape, DomainSpec};
use plaplab_core::operators::derive_exponents;
use plaplab_core::Domain;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Polygon tiled by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeConfig {
    Interval {
        lo: f64,
        hi: f64,
    },
    Rectangle {
        lo: [f64; 2],
        hi: [f64; 2],
    },
    /// Rectangle with the block above and right of `cut` removed.
    LShape {
        lo: [f64; 2],
        hi: [f64; 2],
        cut: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub shape: ShapeConfig,
    pub h: f64,
    /// Components of the unknown (1 or 2).
    #[serde(default = "one")]
    pub ncomp: usize,
    /// Centre of the balls `B_R`.
    #[serde(default)]
    pub origin: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExponentConfig {
    pub p: f64,
    pub r: f64,
    pub eps: f64,
}

/// Forcing data: an analytic profile in the first component, or a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingSpec {
    Zero,
    Constant {
        value: f64,
    },
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `amplitude |x - origin|^(-alpha)`.
    RadialSingularity {
        alpha: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// A field envelope written by `solve` or by hand; relative paths resolve against the config file.
    File {
        path: PathBuf,
    },
}

impl ForcingSpec {
    pub fn profile(&self) -> Option<Profile> {
        Some(match *self {
            ForcingSpec::Zero => Profile::Zero,
            ForcingSpec::Constant { value } => Profile::Constant { value },
            ForcingSpec::GaussianBump { amplitude, width, center } => {
                Profile::GaussianBump { amplitude, width, center }
            }
            ForcingSpec::RadialSingularity { alpha, amplitude } => Profile::RadialSingularity { alpha, amplitude },
            ForcingSpec::File { .. } => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    /// Gradient-rank data `f`.
    pub f: ForcingSpec,
    /// Scalar-rank data `g`.
    pub g: ForcingSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Minimum relative growth of the unweighted energy for a divergence verdict.
    pub t1: f64,
    /// Maximum last-two relative change of the weighted energy for a boundedness verdict.
    pub t2: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { t1: DEFAULT_T1, t2: DEFAULT_T2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WhitneyConfig {
    /// Lattice cells per side of the 2D masks.
    pub cells: usize,
    /// Seeded random block masks on top of the named ones.
    pub random_masks: usize,
}

impl Default for WhitneyConfig {
    fn default() -> Self {
        WhitneyConfig { cells: 32, random_masks: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    /// Random balls in the Muckenhoupt estimate (the suite also runs four times as many).
    pub ball_samples: usize,
    /// `lambda` points of the level-set diagnostic.
    pub lambda_points: usize,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig { ball_samples: 500, lambda_points: 4000 }
    }
}

/// Everything a run needs; the verb chooses the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub exponents: ExponentConfig,
    pub forcing: ForcingConfig,
    pub k_schedule: Vec<f64>,
    pub delta: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    /// Exponent of `f = |x|^-alpha e_1` in `blowup`.
    #[serde(default = "default_alpha")]
    pub blowup_alpha: f64,
    #[serde(default)]
    pub whitney: WhitneyConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_max_iters() -> usize {
    20_000
}

fn default_alpha() -> f64 {
    1.05
}

impl Default for ExperimentConfig {
    /// The blow-up setup: `p = 2`, `r = 3`, `eps = 1/4`, `f = |x|^-1.05 e_1` on a 64 x 64 grid.
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainConfig {
                shape: ShapeConfig::Rectangle { lo: [-1.0, -1.0], hi: [1.0, 1.0] },
                h: 1.0 / 32.0,
                ncomp: 1,
                origin: [0.0, 0.0],
            },
            exponents: ExponentConfig { p: 2.0, r: 3.0, eps: 0.25 },
            forcing: ForcingConfig {
                f: ForcingSpec::RadialSingularity { alpha: 1.05, amplitude: 1.0 },
                g: ForcingSpec::Zero,
            },
            k_schedule: vec![2.0, 8.0, 32.0, 128.0],
            delta: 1.0,
            radius: 0.5,
            tol: 1e-8,
            max_iters: default_max_iters(),
            rng_seed: 0,
            output_dir: None,
            thresholds: ThresholdConfig::default(),
            blowup_alpha: default_alpha(),
            whitney: WhitneyConfig::default(),
            weights: WeightsConfig::default(),
        }
    }
}

/// One violated constraint, addressed by its path in the config document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    pub fn domain_spec(&self) -> DomainSpec<f64> {
        let shape = match self.domain.shape {
            ShapeConfig::Interval { lo, hi } => DomainShape::Interval { lo, hi },
            ShapeConfig::Rectangle { lo, hi } => DomainShape::Rectangle { lo, hi },
            ShapeConfig::LShape { lo, hi, cut } => DomainShape::LShape { lo, hi, cut },
        };
        DomainSpec::new(shape, self.domain.h, self.domain.ncomp).with_origin(self.domain.origin)
    }

    /// Every violated constraint, in document order; empty for a valid config.
    ///
    /// Checks run through the same constructors the pipelines use, so the messages match
    /// what a run would report.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |path: &str, message: String| out.push(Violation { path: path.into(), message });

        let dom = build_domain(&self.domain_spec());
        if let Err(e) = &dom {
            bad("domain", e.to_string());
        }
        let e = self.exponents;
        if let Err(err) = derive_exponents(e.p, e.r, e.eps) {
            let path = if !(e.p > 1.0) {
                "exponents.p"
            } else if !(e.r > e.p) {
                "exponents.r"
            } else {
                "exponents.eps"
            };
            bad(path, err.to_string());
        }
        for (name, spec) in [("forcing.f", &self.forcing.f), ("forcing.g", &self.forcing.g)] {
            match spec {
                ForcingSpec::GaussianBump { width, .. } if !(*width > 0.0) => {
                    bad(&format!("{name}.width"), format!("must be positive, got {width}"))
                }
                ForcingSpec::RadialSingularity { alpha, .. } if !(*alpha > 0.0) || !alpha.is_finite() => {
                    bad(&format!("{name}.alpha"), format!("must be positive, got {alpha}"))
                }
                ForcingSpec::File { path } if path.as_os_str().is_empty() => {
                    bad(&format!("{name}.path"), "must not be empty".into())
                }
                _ => {}
            }
        }
        if self.k_schedule.is_empty() {
            bad("k_schedule", "must list at least one level".into());
        }
        if self.k_schedule.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
            bad("k_schedule", "levels must be positive and finite".into());
        }
        if self.k_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            bad("k_schedule", "levels must be strictly increasing".into());
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            bad("delta", format!("must lie in (0, 1], got {}", self.delta));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            bad("R", format!("must be positive, got {}", self.radius));
        } else if let Ok(d) = &dom {
            if !d.ball_within_box(2.0 * self.radius) {
                bad("R", format!("B_2R with R = {} leaves the grid's bounding box", self.radius));
            }
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            bad("tol", format!("must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            bad("max_iters", "must be at least 1".into());
        }
        if !(self.thresholds.t1 > 0.0) {
            bad("thresholds.t1", format!("must be positive, got {}", self.thresholds.t1));
        }
        if !(self.thresholds.t2 > 0.0) {
            bad("thresholds.t2", format!("must be positive, got {}", self.thresholds.t2));
        }
        if !(self.blowup_alpha > 0.0) {
            bad("blowup_alpha", format!("must be positive, got {}", self.blowup_alpha));
        }
        if !(4..=1024).contains(&self.whitney.cells) {
            bad("whitney.cells", format!("must lie in 4..=1024, got {}", self.whitney.cells));
        }
        if self.weights.ball_samples == 0 {
            bad("weights.ball_samples", "must be at least 1".into());
        }
        if self.weights.lambda_points < 2 {
            bad("weights.lambda_points", "must be at least 2".into());
        }
        out
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds { t1: self.thresholds.t1, t2: self.thresholds.t2 }
    }

    /// Built domain; call only after [`validate`](Self::validate) succeeded.
    pub fn domain(&self) -> plaplab_core::Result<Domain> {
        build_domain(&self.domain_spec())
    }

    /// Resolves file forcing paths against `base` (the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        for spec in [&mut self.forcing.f, &mut self.forcing.g] {
            if let ForcingSpec::File { path } = spec {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }
}

/// JSON schema of [`ExperimentConfig`].
pub fn schema_json() -> String {
    serde_json::to_string_pretty(&schemars::schema_for!(ExperimentConfig)).expect("schema serialises") + "\n"
}
