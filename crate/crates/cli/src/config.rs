use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use cogscreen::examination::{ExaminationConfig, VerifierConfig};
use cogscreen::gateway::Sampling;
use cogscreen::inference::{SvmParams, ZeroShotMode};
use cogscreen::norms::{HklltNormTable, NormTable};
use cogscreen::pipeline::NormSet;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// OpenAI-compatible HTTP endpoint from the environment
    Live,
    /// Scripted responses keyed by request fingerprint
    Mock,
    /// Replays the gold extractions stored in the sessions
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Inclusive,
    Strict,
}

impl From<BoundaryMode> for ZeroShotMode {
    fn from(m: BoundaryMode) -> Self {
        match m {
            BoundaryMode::Inclusive => ZeroShotMode::Inclusive,
            BoundaryMode::Strict => ZeroShotMode::Strict,
        }
    }
}

/// Settings shared by every subcommand. Loaded from TOML, then overridden
/// by whatever flags were given.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub mock_script: Option<PathBuf>,
    pub model: Option<String>,
    pub examiner_temperature: f64,
    pub verifier_temperature: f64,
    pub n_max: u32,
    pub grounding: bool,
    pub llm_verify: bool,
    pub moca_norms: Option<PathBuf>,
    pub moca_norms_sha256: Option<String>,
    pub hkllt_norms: Option<PathBuf>,
    pub hkllt_norms_sha256: Option<String>,
    pub zero_shot_mode: BoundaryMode,
    pub classifier_model: Option<PathBuf>,
    pub include_demographics: bool,
    pub svm_c: f64,
    pub concurrency: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let verifier = VerifierConfig::default();
        RunConfig {
            backend: BackendKind::Oracle,
            mock_script: None,
            model: None,
            examiner_temperature: Sampling::examiner().temperature,
            verifier_temperature: Sampling::verifier().temperature,
            n_max: verifier.n_max,
            grounding: verifier.grounding,
            llm_verify: verifier.llm_verify,
            moca_norms: None,
            moca_norms_sha256: None,
            hkllt_norms: None,
            hkllt_norms_sha256: None,
            zero_shot_mode: BoundaryMode::Inclusive,
            classifier_model: None,
            include_demographics: true,
            svm_c: SvmParams::default().c,
            concurrency: 4,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parse a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.mock_script, &mut cfg.moca_norms, &mut cfg.hkllt_norms, &mut cfg.classifier_model]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.examination().examiner_sampling.validate().context("examiner_temperature")?;
        self.examination().verifier_sampling.validate().context("verifier_temperature")?;
        if self.concurrency == 0 {
            bail!("concurrency must be at least 1");
        }
        if !(self.svm_c.is_finite() && self.svm_c > 0.0) {
            bail!("svm_c must be positive, got {}", self.svm_c);
        }
        let paths = [
            ("mock_script", &self.mock_script),
            ("moca_norms", &self.moca_norms),
            ("hkllt_norms", &self.hkllt_norms),
            ("classifier_model", &self.classifier_model),
        ];
        for (key, path) in paths {
            if let Some(p) = path {
                if !p.exists() {
                    bail!("{key}: {} does not exist", p.display());
                }
            }
        }
        if self.backend == BackendKind::Mock && self.mock_script.is_none() {
            bail!("backend \"mock\" needs mock_script");
        }
        Ok(())
    }

    pub fn examination(&self) -> ExaminationConfig {
        ExaminationConfig {
            verifier: VerifierConfig { n_max: self.n_max, grounding: self.grounding, llm_verify: self.llm_verify },
            examiner_sampling: Sampling { temperature: self.examiner_temperature, ..Sampling::examiner() },
            verifier_sampling: Sampling { temperature: self.verifier_temperature, ..Sampling::verifier() },
        }
    }

    pub fn norms(&self) -> Result<NormSet> {
        let mut set = NormSet::default();
        if let Some(p) = &self.moca_norms {
            set.moca = NormTable::load(p, self.moca_norms_sha256.as_deref())
                .with_context(|| format!("loading MoCA-SL norms {}", p.display()))?;
        }
        if let Some(p) = &self.hkllt_norms {
            set.hkllt = HklltNormTable::load(p, self.hkllt_norms_sha256.as_deref())
                .with_context(|| format!("loading HKLLT norms {}", p.display()))?;
        }
        Ok(set)
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams { c: self.svm_c, ..SvmParams::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_agent_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.examiner_temperature, 0.3);
        assert_eq!(cfg.verifier_temperature, 0.1);
        assert_eq!(cfg.n_max, 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_temperatures() {
        assert!(toml::from_str::<RunConfig>("nmax = 2").is_err());
        let cfg: RunConfig = toml::from_str("examiner_temperature = 3.5").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mock_backend_requires_script() {
        let cfg: RunConfig = toml::from_str("backend = \"mock\"").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("mock_script"));
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "classifier_model = \"model.json\"\nout = \"results\"\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.classifier_model.unwrap(), dir.path().join("model.json"));
        assert_eq!(cfg.out, dir.path().join("results"));
    }
}
