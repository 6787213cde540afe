//! Flat `section.key = value` configuration files.
//!
//! No nesting, no quoting: one assignment per line, `#` starts a comment.
//! Every key is validated before any computation starts and unknown keys are
//! rejected, so a typo fails the run instead of silently using a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use banach_ar::estimator::TruncationRule;
use banach_ar::diagnostics::TrackedMetric;
use banach_ar::gelfand::Weights;
use banach_ar::process::{build_model, ArbModel, ModelConfig};
use banach_ar::wavelet::{besov_weights, bessel_eigen_profile, WaveletBasis, WaveletFamily};

#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Geometric { ratio: f64, scale: f64 },
    Power { exponent: f64, scale: f64 },
    Bessel { gamma: f64, scale: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightsKind {
    Uniform,
    Besov,
}

#[derive(Clone, Debug)]
pub struct ModelSection {
    pub m: usize,
    pub profile: Profile,
    pub weights: WeightsKind,
    /// Wavelet layout backing besov weights and the bessel profile.
    pub wavelet_j: u32,
    pub wavelet_j_max: u32,
    pub beta: f64,
    pub rho: Vec<f64>,
    pub rho_band: Option<Vec<f64>>,
    pub rho_max: f64,
}

#[derive(Clone, Debug)]
pub struct SimulationSection {
    pub n: usize,
    /// None means the model's default geometric-forgetting burn-in.
    pub burn_in: Option<usize>,
    pub master_seed: u64,
}

#[derive(Clone, Debug)]
pub struct EstimationSection {
    pub rule: TruncationRule,
}

#[derive(Clone, Debug)]
pub struct ExperimentSection {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub tracked: TrackedMetric,
    pub eta: Option<f64>,
    pub n_min: usize,
}

#[derive(Clone, Debug)]
pub struct AuditSection {
    pub perfect_moments: bool,
}

#[derive(Clone, Debug)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub precision: usize,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelSection,
    pub simulation: SimulationSection,
    pub estimation: EstimationSection,
    pub experiment: ExperimentSection,
    pub audit: AuditSection,
    pub output: OutputSection,
}

fn parse_lines(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `section.key = value`", idx + 1))?;
        let key = key.trim().to_string();
        if !key.contains('.') {
            bail!("line {}: key `{key}` is missing its section prefix", idx + 1);
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("line {}: duplicate key `{key}`", idx + 1);
        }
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "model.m",
    "model.profile",
    "model.ratio",
    "model.scale",
    "model.exponent",
    "model.gamma",
    "model.wavelet_j",
    "model.wavelet_jmax",
    "model.beta",
    "model.weights",
    "model.rho",
    "model.rho_band",
    "model.rho_max",
    "simulation.n",
    "simulation.burn_in",
    "simulation.master_seed",
    "estimation.rule",
    "estimation.c1",
    "estimation.c0",
    "estimation.theta",
    "experiment.n_grid",
    "experiment.replicates",
    "experiment.tracked",
    "experiment.eta",
    "experiment.n_min",
    "audit.perfect_moments",
    "output.dir",
    "output.precision",
];

struct Reader {
    map: BTreeMap<String, String>,
}

impl Reader {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<T>()
                .map_err(|e| anyhow!("key `{key}`: cannot parse `{v}` ({e})")),
        }
    }

    fn parse_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<f64>()
                        .map_err(|e| anyhow!("key `{key}`: cannot parse `{part}` ({e})"))
                })
                .collect(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        RunConfig::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<RunConfig> {
        let map = parse_lines(text)?;
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("unknown config key `{key}`");
            }
        }
        let r = Reader { map };

        let m: usize = r.parse("model.m", 8)?;
        if m < 2 {
            bail!("model.m must be at least 2, got {m}");
        }
        let profile = match r.get("model.profile").unwrap_or("geometric") {
            "geometric" => Profile::Geometric {
                ratio: r.parse("model.ratio", 0.5)?,
                scale: r.parse("model.scale", 0.5)?,
            },
            "power" => Profile::Power {
                exponent: r.parse("model.exponent", 2.0)?,
                scale: r.parse("model.scale", 0.5)?,
            },
            "bessel" => Profile::Bessel {
                gamma: r.parse("model.gamma", 1.0)?,
                scale: r.parse("model.scale", 0.5)?,
            },
            other => bail!("model.profile must be geometric, power, or bessel; got `{other}`"),
        };
        let weights = match r.get("model.weights").unwrap_or("uniform") {
            "uniform" => WeightsKind::Uniform,
            "besov" => WeightsKind::Besov,
            other => bail!("model.weights must be uniform or besov; got `{other}`"),
        };
        let wavelet_j: u32 = r.parse("model.wavelet_j", 1)?;
        let wavelet_j_max: u32 = r.parse("model.wavelet_jmax", {
            // Layout of total size m when m is a power of two.
            let mut j = wavelet_j;
            while (1usize << (j + 1)) < m {
                j += 1;
            }
            j
        })?;
        let beta: f64 = r.parse("model.beta", 1.0)?;
        let rho_list = r.parse_list("model.rho", &[0.5])?;
        let rho = if rho_list.len() == 1 {
            vec![rho_list[0]; m]
        } else if rho_list.len() == m {
            rho_list
        } else {
            bail!(
                "model.rho must be a scalar or a list of length {m}, got {} entries",
                rho_list.len()
            );
        };
        let rho_band = match r.get("model.rho_band") {
            None => None,
            Some(_) => {
                let band = r.parse_list("model.rho_band", &[])?;
                let band = if band.len() == 1 {
                    vec![band[0]; m - 1]
                } else if band.len() == m - 1 {
                    band
                } else {
                    bail!(
                        "model.rho_band must be a scalar or a list of length {}, got {}",
                        m - 1,
                        band.len()
                    );
                };
                Some(band)
            }
        };
        let rho_max: f64 = r.parse("model.rho_max", 0.95)?;

        let n: usize = r.parse("simulation.n", 4096)?;
        let burn_in = match r.get("simulation.burn_in") {
            None => None,
            Some("auto") => None,
            Some(v) => Some(
                v.parse::<usize>()
                    .map_err(|e| anyhow!("key `simulation.burn_in`: cannot parse `{v}` ({e})"))?,
            ),
        };
        let master_seed: u64 = r.parse("simulation.master_seed", 1)?;

        let rule = match r.get("estimation.rule").unwrap_or("log") {
            "log" => TruncationRule::Log {
                c1: r.parse("estimation.c1", 0.5)?,
                c0: r.parse("estimation.c0", 0.0)?,
            },
            "power" => TruncationRule::Power {
                theta: r.parse("estimation.theta", 0.35)?,
            },
            other => bail!("estimation.rule must be log or power; got `{other}`"),
        };

        let n_grid: Vec<usize> = match r.get("experiment.n_grid") {
            None => vec![256, 1024, 4096],
            Some(v) => v
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<usize>()
                        .map_err(|e| anyhow!("key `experiment.n_grid`: cannot parse `{part}` ({e})"))
                })
                .collect::<Result<_>>()?,
        };
        let replicates: usize = r.parse("experiment.replicates", 10)?;
        let tracked = {
            let name = r.get("experiment.tracked").unwrap_or("cov_hs");
            TrackedMetric::parse(name)
                .ok_or_else(|| anyhow!("experiment.tracked: unknown metric `{name}`"))?
        };
        let eta = match r.get("experiment.eta") {
            None => None,
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|e| anyhow!("key `experiment.eta`: cannot parse `{v}` ({e})"))?,
            ),
        };
        let n_min: usize = r.parse("experiment.n_min", 512)?;

        let perfect_moments: bool = r.parse("audit.perfect_moments", false)?;

        let dir = PathBuf::from(r.get("output.dir").unwrap_or("out"));
        let precision: usize = r.parse("output.precision", 17)?;
        if !(2..=17).contains(&precision) {
            bail!("output.precision must lie in 2..=17, got {precision}");
        }

        Ok(RunConfig {
            model: ModelSection {
                m,
                profile,
                weights,
                wavelet_j,
                wavelet_j_max,
                beta,
                rho,
                rho_band,
                rho_max,
            },
            simulation: SimulationSection {
                n,
                burn_in,
                master_seed,
            },
            estimation: EstimationSection { rule },
            experiment: ExperimentSection {
                n_grid,
                replicates,
                tracked,
                eta,
                n_min,
            },
            audit: AuditSection { perfect_moments },
            output: OutputSection { dir, precision },
        })
    }

    /// Normalized echo of the effective configuration.
    pub fn echo(&self, seed_override: Option<u64>) -> String {
        let mut out = String::new();
        let ms = &self.model;
        out.push_str(&format!("model.m = {}\n", ms.m));
        match &ms.profile {
            Profile::Geometric { ratio, scale } => {
                out.push_str("model.profile = geometric\n");
                out.push_str(&format!("model.ratio = {ratio}\n"));
                out.push_str(&format!("model.scale = {scale}\n"));
            }
            Profile::Power { exponent, scale } => {
                out.push_str("model.profile = power\n");
                out.push_str(&format!("model.exponent = {exponent}\n"));
                out.push_str(&format!("model.scale = {scale}\n"));
            }
            Profile::Bessel { gamma, scale } => {
                out.push_str("model.profile = bessel\n");
                out.push_str(&format!("model.gamma = {gamma}\n"));
                out.push_str(&format!("model.scale = {scale}\n"));
            }
        }
        out.push_str(&format!(
            "model.weights = {}\n",
            match ms.weights {
                WeightsKind::Uniform => "uniform",
                WeightsKind::Besov => "besov",
            }
        ));
        out.push_str(&format!("model.wavelet_j = {}\n", ms.wavelet_j));
        out.push_str(&format!("model.wavelet_jmax = {}\n", ms.wavelet_j_max));
        out.push_str(&format!("model.beta = {}\n", ms.beta));
        out.push_str(&format!(
            "model.rho = {}\n",
            ms.rho
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
        if let Some(band) = &ms.rho_band {
            out.push_str(&format!(
                "model.rho_band = {}\n",
                band.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ));
        }
        out.push_str(&format!("model.rho_max = {}\n", ms.rho_max));
        out.push_str(&format!("simulation.n = {}\n", self.simulation.n));
        match self.simulation.burn_in {
            None => out.push_str("simulation.burn_in = auto\n"),
            Some(b) => out.push_str(&format!("simulation.burn_in = {b}\n")),
        }
        let seed = seed_override.unwrap_or(self.simulation.master_seed);
        out.push_str(&format!("simulation.master_seed = {seed}\n"));
        match self.estimation.rule {
            TruncationRule::Log { c1, c0 } => {
                out.push_str("estimation.rule = log\n");
                out.push_str(&format!("estimation.c1 = {c1}\n"));
                out.push_str(&format!("estimation.c0 = {c0}\n"));
            }
            TruncationRule::Power { theta } => {
                out.push_str("estimation.rule = power\n");
                out.push_str(&format!("estimation.theta = {theta}\n"));
            }
        }
        out.push_str(&format!(
            "experiment.n_grid = {}\n",
            self.experiment
                .n_grid
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
        out.push_str(&format!(
            "experiment.replicates = {}\n",
            self.experiment.replicates
        ));
        out.push_str(&format!(
            "experiment.tracked = {}\n",
            self.experiment.tracked.name()
        ));
        if let Some(eta) = self.experiment.eta {
            out.push_str(&format!("experiment.eta = {eta}\n"));
        }
        out.push_str(&format!("experiment.n_min = {}\n", self.experiment.n_min));
        out.push_str(&format!(
            "audit.perfect_moments = {}\n",
            self.audit.perfect_moments
        ));
        out.push_str(&format!("output.dir = {}\n", self.output.dir.display()));
        out.push_str(&format!("output.precision = {}\n", self.output.precision));
        out
    }
}

/// Build the weights and covariance spectrum, then the validated model.
/// Nothing is written to disk before this returns successfully.
pub fn model_from_config(cfg: &RunConfig) -> Result<ArbModel> {
    let ms = &cfg.model;
    let weights = match ms.weights {
        WeightsKind::Uniform => Weights::uniform(ms.m)?,
        WeightsKind::Besov => {
            let (_, w) = besov_weights(ms.wavelet_j, ms.wavelet_j_max, ms.beta)?;
            if w.dim() != ms.m {
                bail!(
                    "besov weights for levels {}..={} have dimension {}, but model.m = {}",
                    ms.wavelet_j,
                    ms.wavelet_j_max,
                    w.dim(),
                    ms.m
                );
            }
            w
        }
    };
    let eigenvalues: Vec<f64> = match &ms.profile {
        Profile::Geometric { ratio, scale } => {
            (0..ms.m).map(|j| scale * ratio.powi(j as i32)).collect()
        }
        Profile::Power { exponent, scale } => (1..=ms.m)
            .map(|j| scale * (j as f64).powf(-exponent))
            .collect(),
        Profile::Bessel { gamma, scale } => {
            let basis = WaveletBasis::new(WaveletFamily::Haar, ms.wavelet_j, ms.wavelet_j_max)?;
            let values = bessel_eigen_profile(*gamma, &basis, *scale)?;
            if values.len() != ms.m {
                bail!(
                    "bessel profile for levels {}..={} has dimension {}, but model.m = {}",
                    ms.wavelet_j,
                    ms.wavelet_j_max,
                    values.len(),
                    ms.m
                );
            }
            values
        }
    };
    let model = build_model(ModelConfig {
        weights,
        eigenvalues,
        rho_diag: ms.rho.clone(),
        rho_band: ms.rho_band.clone(),
        rho_max: ms.rho_max,
        frame: None,
    })?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::from_str("model.m = 4\noutput.dir = /tmp/x\n").unwrap();
        assert_eq!(cfg.model.m, 4);
        assert_eq!(cfg.model.rho, vec![0.5; 4]);
        assert_eq!(cfg.output.precision, 17);
        let model = model_from_config(&cfg).unwrap();
        assert_eq!(model.dim(), 4);
    }

    #[test]
    fn rejects_unknown_key() {
        assert!(RunConfig::from_str("model.unknown = 3\n").is_err());
    }

    #[test]
    fn rejects_bad_rho_length() {
        assert!(RunConfig::from_str("model.m = 4\nmodel.rho = 0.1,0.2\n").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = RunConfig::from_str("# header\n\nmodel.m = 4 # inline\n").unwrap();
        assert_eq!(cfg.model.m, 4);
    }

    #[test]
    fn non_stationary_rho_fails_at_model_build() {
        let cfg = RunConfig::from_str("model.m = 4\nmodel.rho = 1.0\n").unwrap();
        let err = model_from_config(&cfg).unwrap_err();
        assert!(err.to_string().contains("stationarity"));
    }
}
