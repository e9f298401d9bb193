//! Run configuration: an optional TOML file, overridden by flags.
//!
//! ```toml
//! mode = "refevo"            # naive | flow | fixed-tb | refevo
//! modes = ["fixed-tb", "refevo"]
//! toolchain = "cxx"
//! out = "out"
//! seed = 7
//! jobs = 4
//!
//! [provider]                 # omitted: mock, script next to each spec
//! kind = "http"
//! endpoint = "https://llm.example/v1/chat/completions"
//! model_name = "some-model"
//! api_key_env = "REFEVO_API_KEY"
//!
//! [session.planner.simple]
//! max_iterations = 4
//! token_budget = 60000
//!
//! [coevo]
//! p_arbiter_detect = 0.8
//! ```
//!
//! Secrets never appear here: the bearer token is read from the variable
//! named by `provider.api_key_env`.

use std::path::{Path, PathBuf};

use coevo_core::analytics::CoEvoParams;
use coevo_core::evo::SessionConfig;
use coevo_core::gateway::ProviderConfig;
use coevo_core::session::PolicyName;
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

fn mode_from_str<'de, D: Deserializer<'de>>(d: D) -> Result<PolicyName, D::Error> {
    String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
}

fn modes_from_str<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<PolicyName>, D::Error> {
    Vec::<String>::deserialize(d)?
        .iter()
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .collect()
}

/// Partial co-evolution parameters; unset fields keep their defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoEvoOverrides {
    pub p_model_flaw: Option<f64>,
    pub p_shared_hallucination: Option<f64>,
    pub p_indep_tb_flaw: Option<f64>,
    pub p_arbiter_detect: Option<f64>,
    pub max_rounds: Option<u32>,
    pub trials: Option<u64>,
}

impl CoEvoOverrides {
    /// Fields set in `other` win.
    pub fn or(self, other: CoEvoOverrides) -> CoEvoOverrides {
        CoEvoOverrides {
            p_model_flaw: other.p_model_flaw.or(self.p_model_flaw),
            p_shared_hallucination: other.p_shared_hallucination.or(self.p_shared_hallucination),
            p_indep_tb_flaw: other.p_indep_tb_flaw.or(self.p_indep_tb_flaw),
            p_arbiter_detect: other.p_arbiter_detect.or(self.p_arbiter_detect),
            max_rounds: other.max_rounds.or(self.max_rounds),
            trials: other.trials.or(self.trials),
        }
    }

    pub fn params(&self, seed: u64) -> CoEvoParams {
        let d = CoEvoParams::default();
        CoEvoParams {
            p_model_flaw: self.p_model_flaw.unwrap_or(d.p_model_flaw),
            p_shared_hallucination: self.p_shared_hallucination.unwrap_or(d.p_shared_hallucination),
            p_indep_tb_flaw: self.p_indep_tb_flaw.unwrap_or(d.p_indep_tb_flaw),
            p_arbiter_detect: self.p_arbiter_detect.unwrap_or(d.p_arbiter_detect),
            max_rounds: self.max_rounds.unwrap_or(d.max_rounds),
            trials: self.trials.unwrap_or(d.trials),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_mode", deserialize_with = "mode_from_str")]
    pub mode: PolicyName,
    /// Modes swept by `bench`.
    #[serde(default = "all_modes", deserialize_with = "modes_from_str")]
    pub modes: Vec<PolicyName>,
    /// Absent means the mock provider with a script beside each spec.
    #[serde(default)]
    pub provider: Option<ProviderConfig>,
    #[serde(default = "default_toolchain")]
    pub toolchain: String,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub coevo: CoEvoOverrides,
}

fn default_mode() -> PolicyName {
    PolicyName::Refevo
}

fn all_modes() -> Vec<PolicyName> {
    PolicyName::ALL.to_vec()
}

fn default_toolchain() -> String {
    "cxx".into()
}

fn default_out() -> PathBuf {
    "out".into()
}

fn default_seed() -> u64 {
    42
}

fn default_jobs() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: default_mode(),
            modes: all_modes(),
            provider: None,
            toolchain: default_toolchain(),
            session: SessionConfig::default(),
            out: default_out(),
            seed: default_seed(),
            jobs: default_jobs(),
            coevo: CoEvoOverrides::default(),
        }
    }
}

const SECRET_HINTS: [&str; 4] = ["api_key", "token", "secret", "password"];

/// Rejects keys that look like credentials, at any depth.
fn reject_secrets(path: &Path, value: &toml::Value, prefix: &str) -> Result<(), CliError> {
    if let toml::Value::Table(t) = value {
        for (k, v) in t {
            let key = k.to_lowercase();
            let allowed = key == "api_key_env" || key.ends_with("_tokens") || key == "token_budget";
            if !allowed && SECRET_HINTS.iter().any(|h| key.contains(h)) {
                return Err(CliError::input(
                    path,
                    format!(
                        "`{prefix}{k}` looks like a credential; secrets are read only from the environment \
                         variable named by provider.api_key_env"
                    ),
                ));
            }
            reject_secrets(path, v, &format!("{prefix}{k}."))?;
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let value: toml::Value = toml::from_str(&text).map_err(|e| CliError::input(path, e.message()))?;
        reject_secrets(path, &value, "")?;
        let cfg: RunConfig = value.try_into().map_err(|e: toml::de::Error| CliError::input(path, e.message()))?;
        cfg.validate().map_err(|m| CliError::input(path, m))?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<RunConfig, CliError> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.jobs == 0 {
            return Err("jobs must be at least 1".into());
        }
        if self.modes.is_empty() {
            return Err("modes must name at least one mode".into());
        }
        if let Some(p) = &self.provider {
            if p.kind == coevo_core::gateway::ProviderKind::Http {
                p.validate().map_err(|e| e.to_string())?;
            }
        }
        self.session.context.validate().map_err(|e| e.to_string())
    }

    /// The effective configuration as echoed into outputs. The output
    /// directory is left out so reports do not depend on where they land.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("out");
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let (_d, p) = write("mode = \"fixed-tb\"\nmodes = [\"flow\", \"refevo\"]\n[coevo]\np_arbiter_detect = 0.5\n");
        let c = RunConfig::load(&p).unwrap();
        assert_eq!(c.mode, PolicyName::FixedTb);
        assert_eq!(c.modes, [PolicyName::FlowOnly, PolicyName::Refevo]);
        assert_eq!(c.coevo.params(1).p_arbiter_detect, 0.5);
        assert_eq!(c.coevo.params(1).p_model_flaw, 0.5);
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn credentials_are_refused() {
        let (_d, p) = write("[provider]\nkind = \"http\"\napi_key = \"sk-123\"\n");
        let e = RunConfig::load(&p).unwrap_err().to_string();
        assert!(e.contains("provider.api_key"), "{e}");
        assert!(!e.contains("sk-123"));
    }

    #[test]
    fn unknown_keys_and_modes_are_errors() {
        let (_d, p) = write("colour = 1\n");
        assert!(RunConfig::load(&p).is_err());
        let (_d, p) = write("mode = \"greedy\"\n");
        assert!(RunConfig::load(&p).unwrap_err().to_string().contains("greedy"));
        let (_d, p) = write("[session.context.budgets]\ntotal = 100\nsummary_max = 10\nworkspace_max = 50\nextra = 1\n");
        assert!(RunConfig::load(&p).unwrap_err().to_string().contains("extra"));
    }

    #[test]
    fn echo_round_trips_without_out() {
        let c = RunConfig::default();
        let v = c.echo();
        assert!(v.get("out").is_none());
        assert_eq!(v["mode"], "refevo");
    }
}
