//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are skipped. Lists are comma
//! separated. Every key must be consumed by some reader; [`KeyValues::finish`]
//! reports the ones nobody asked for.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{ExperimentConfig, HarnessError, LambdaGrid};
use crate::process_models::CarModel;
use crate::kernels::Kernel;
use crate::sampling::SchemeKind;

#[derive(Debug, Default, Clone)]
pub struct KeyValues {
    source: Option<PathBuf>,
    entries: BTreeMap<String, (usize, String)>,
    used: RefCell<BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str, source: Option<&Path>) -> Result<Self, HarnessError> {
        let origin = || source.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<config>"));
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Parse {
                    path: origin(),
                    line: i + 1,
                    message: format!("expected key=value, found '{line}'"),
                });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(HarnessError::Parse {
                    path: origin(),
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            if entries.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
                return Err(HarnessError::Parse {
                    path: origin(),
                    line: i + 1,
                    message: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(Self {
            source: source.map(Path::to_path_buf),
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, Some(path))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let (_, v) = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        raw.parse::<T>().map(Some).map_err(|e| self.bad(key, &e.to_string()))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| self.bad(key, &format!("'{s}': {e}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn bad(&self, key: &str, message: &str) -> HarnessError {
        let line = self.entries.get(key).map(|(l, _)| *l).unwrap_or(0);
        HarnessError::Parse {
            path: self.source.clone().unwrap_or_else(|| PathBuf::from("<config>")),
            line,
            message: format!("{key}: {message}"),
        }
    }

    /// Error on keys that no reader consumed.
    pub fn finish(&self) -> Result<(), HarnessError> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(k.as_str())) {
            Some((key, (line, _))) => Err(HarnessError::Parse {
                path: self.source.clone().unwrap_or_else(|| PathBuf::from("<config>")),
                line: *line,
                message: format!("unknown key '{key}'"),
            }),
            None => Ok(()),
        }
    }

    /// The model from `alphas` and `sigma`, falling back to `base`.
    pub fn model(&self, base: &CarModel) -> Result<CarModel, HarnessError> {
        let alphas = self.get_list::<f64>("alphas")?;
        let sigma = self.get::<f64>("sigma")?;
        if alphas.is_none() && sigma.is_none() {
            return Ok(base.clone());
        }
        let alphas = alphas.unwrap_or_else(|| base.alphas().to_vec());
        let sigma = sigma.unwrap_or(base.sigma());
        CarModel::new(alphas, sigma).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Overlay every recognised experiment key onto `config`.
    pub fn apply_experiment(&self, config: &mut ExperimentConfig) -> Result<(), HarnessError> {
        config.model = self.model(&config.model)?;
        if let Some(v) = self.get_list::<SchemeKind>("schemes")? {
            config.schemes = v;
        }
        if let Some(v) = self.get_list::<usize>("n_values")? {
            config.n_values = v;
        }
        if let Some(v) = self.get("replications")? {
            config.replications = v;
        }
        if let Some(v) = self.get("seed")? {
            config.seed = v;
        }
        for (key, slot) in [
            ("p", &mut config.p),
            ("q", &mut config.q),
            ("P", &mut config.rate_p),
            ("Q", &mut config.rate_q),
            ("R", &mut config.rate_r),
            ("poisson_rho", &mut config.poisson_rho),
        ] {
            if let Some(v) = self.get::<f64>(key)? {
                *slot = v;
            }
        }
        if let Some(v) = self.get::<Kernel>("kernel")? {
            config.kernel = v;
        }
        if let Some(v) = self.raw("output_dir") {
            config.output_dir = PathBuf::from(v);
        }
        if let Some(points) = self.get_list::<f64>("lambdas")? {
            config.lambda_grid = LambdaGrid::Explicit(points);
        }
        let (min, max, steps) = match config.lambda_grid {
            LambdaGrid::Uniform { min, max, steps } => (min, max, steps),
            LambdaGrid::Explicit(ref v) => (
                v.first().copied().unwrap_or(0.0),
                v.last().copied().unwrap_or(0.0),
                v.len(),
            ),
        };
        let lmin = self.get::<f64>("lambda_min")?;
        let lmax = self.get::<f64>("lambda_max")?;
        let lsteps = self.get::<usize>("lambda_steps")?;
        if lmin.is_some() || lmax.is_some() || lsteps.is_some() {
            config.lambda_grid = LambdaGrid::Uniform {
                min: lmin.unwrap_or(min),
                max: lmax.unwrap_or(max),
                steps: lsteps.unwrap_or(steps),
            };
        }
        Ok(())
    }
}
