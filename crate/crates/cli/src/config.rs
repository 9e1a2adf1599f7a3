//! Project configuration: one TOML file whose values command flags override.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kpls_retarget::evaluation::{ComponentChoice, WorldConfig, DEFAULT_P_MAX};
use kpls_retarget::retarget::{Method, TrainOptions};
use kpls_retarget::KernelSpec;
use serde::Deserialize;

/// Component count: a fixed number or leave-one-out selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Components {
    Fixed(usize),
    Named(ComponentsKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentsKeyword {
    Auto,
}

impl Components {
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Components::Named(ComponentsKeyword::Auto));
        }
        match s.parse::<usize>() {
            Ok(p) if p > 0 => Ok(Components::Fixed(p)),
            _ => bail!("components must be a positive integer or \"auto\", got {s:?}"),
        }
    }
}

/// Kernel family as written in configs and flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
    Polynomial,
}

/// Everything a command may need. All fields are optional in the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub seed: Option<u64>,
    pub kernel: Option<KernelKind>,
    /// Gaussian width. When absent it is chosen by leave-one-out among
    /// multiples of the median pairwise distance, or is the median itself
    /// with a fixed component count.
    pub sigma: Option<f64>,
    pub degree: Option<u32>,
    pub offset: Option<f64>,
    pub components: Option<Components>,
    pub p_max: Option<usize>,
    pub remove_rotation: Option<bool>,
    /// Methods compared by `eval-cyclic`, by label.
    pub methods: Option<Vec<String>>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub rig_a: Option<PathBuf>,
    pub sequence: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub frames_csv: Option<PathBuf>,
    pub world_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub world: Option<WorldConfig>,
}

impl ProjectConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: Self =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if let Some(p) = config.p_max {
            if p == 0 {
                bail!("p_max must be positive in {}", path.display());
            }
        }
        Ok(config)
    }

    pub fn components(&self) -> Components {
        self.components
            .unwrap_or(Components::Named(ComponentsKeyword::Auto))
    }

    pub fn p_max(&self) -> usize {
        self.p_max.unwrap_or(DEFAULT_P_MAX)
    }

    pub fn component_choice(&self) -> ComponentChoice {
        match self.components() {
            Components::Fixed(p) => ComponentChoice::Fixed(p),
            Components::Named(ComponentsKeyword::Auto) => ComponentChoice::LeaveOneOut {
                p_max: self.p_max(),
            },
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            remove_rotation: self.remove_rotation.unwrap_or(true),
        }
    }

    /// Regression method described by the kernel settings.
    pub fn method(&self) -> Result<Method> {
        let method = match self.kernel.unwrap_or(KernelKind::Rbf) {
            KernelKind::Linear => Method::Kpls {
                kernel: KernelSpec::Linear,
            },
            KernelKind::Rbf => match self.sigma {
                Some(sigma) => Method::Kpls {
                    kernel: KernelSpec::Rbf { sigma },
                },
                None => Method::KplsRbfMedian,
            },
            KernelKind::Polynomial => Method::Kpls {
                kernel: KernelSpec::Polynomial {
                    degree: self.degree.unwrap_or(2),
                    offset: self.offset.unwrap_or(1.0),
                },
            },
        };
        if let Method::Kpls { kernel } = &method {
            kernel.validate()?;
        }
        Ok(method)
    }

    /// Methods for `eval-cyclic`; the configured kernel method comes first by default.
    pub fn eval_methods(&self) -> Result<Vec<Method>> {
        let Some(labels) = &self.methods else {
            return Ok(vec![
                self.method()?,
                Method::LinearPls,
                Method::RbfInterpolation,
            ]);
        };
        if labels.is_empty() {
            bail!("methods must not be empty");
        }
        labels.iter().map(|l| self.method_by_label(l)).collect()
    }

    fn method_by_label(&self, label: &str) -> Result<Method> {
        Ok(match label {
            "kpls_rbf" => match self.sigma {
                Some(sigma) => Method::Kpls {
                    kernel: KernelSpec::Rbf { sigma },
                },
                None => Method::KplsRbfMedian,
            },
            "kpls_linear" => Method::Kpls {
                kernel: KernelSpec::Linear,
            },
            "kpls_polynomial" => Method::Kpls {
                kernel: KernelSpec::Polynomial {
                    degree: self.degree.unwrap_or(2),
                    offset: self.offset.unwrap_or(1.0),
                },
            },
            "linear_pls" => Method::LinearPls,
            "rbf_interp" => Method::RbfInterpolation,
            other => bail!(
                "unknown method {other:?}; expected kpls_rbf, kpls_linear, kpls_polynomial, linear_pls or rbf_interp"
            ),
        })
    }

    pub fn require<'a>(value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .with_context(|| format!("missing required path `{name}` (flag or config)"))
    }
}

/// `flag.or(config)` for every field pair.
macro_rules! override_fields {
    ($config:expr, $flags:expr; $($field:ident),* $(,)?) => {
        $(
            if let Some(v) = $flags.$field.clone() {
                $config.$field = Some(v.into());
            }
        )*
    };
}
pub(crate) use override_fields;
