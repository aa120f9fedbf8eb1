//! Provider settings from flags, environment and a TOML file, in that
//! order of precedence.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use serde::Deserialize;

use modelassist_core::gateway::{CompletionProvider, Gateway, HttpProvider, HttpProviderConfig, MockProvider};

use crate::CliError;

pub const ENV_URL: &str = "MODELASSIST_PROVIDER_URL";
pub const ENV_KEY: &str = "MODELASSIST_API_KEY";
pub const ENV_MODEL: &str = "MODELASSIST_MODEL";
pub const ENV_TIMEOUT: &str = "MODELASSIST_TIMEOUT_SECS";
pub const ENV_MOCK: &str = "MODELASSIST_MOCK";

const DEFAULT_TIMEOUT_SECS: u64 = 30;

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub provider_url: Option<String>,
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: Option<u64>,
    /// Mock fixture file or directory; replaces the live provider.
    pub mock: Option<PathBuf>,
}

impl Settings {
    /// Fields of `self` win; gaps are filled from `lower`.
    fn or(self, lower: Settings) -> Settings {
        Settings {
            provider_url: self.provider_url.or(lower.provider_url),
            api_key: self.api_key.or(lower.api_key),
            model: self.model.or(lower.model),
            timeout_secs: self.timeout_secs.or(lower.timeout_secs),
            mock: self.mock.or(lower.mock),
        }
    }

    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> Result<Settings, CliError> {
        let timeout_secs = match var(ENV_TIMEOUT) {
            Some(t) => Some(
                t.trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("{ENV_TIMEOUT}: not a number of seconds: {t:?}")))?,
            ),
            None => None,
        };
        Ok(Settings {
            provider_url: var(ENV_URL),
            api_key: var(ENV_KEY),
            model: var(ENV_MODEL),
            timeout_secs,
            mock: var(ENV_MOCK).map(PathBuf::from),
        })
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProviderArgs {
    /// Base URL of a text-completion endpoint, e.g. http://localhost:8000/v1
    #[arg(long)]
    pub provider_url: Option<String>,
    #[arg(long)]
    pub api_key: Option<String>,
    /// Model name sent to the provider
    #[arg(long)]
    pub model: Option<String>,
    /// Per-call timeout in seconds
    #[arg(long)]
    pub timeout: Option<u64>,
    /// Recorded responses: a fixture file or a directory of *.mock.json
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// TOML file with provider_url, api_key, model, timeout_secs, mock
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ProviderArgs {
    fn flags(&self) -> Settings {
        Settings {
            provider_url: self.provider_url.clone(),
            api_key: self.api_key.clone(),
            model: self.model.clone(),
            timeout_secs: self.timeout,
            mock: self.mock.clone(),
        }
    }

    pub fn resolve(&self, var: impl Fn(&str) -> Option<String>) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        Ok(self.flags().or(Settings::from_env(var)?).or(file))
    }
}

pub fn process_env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

/// Mock provider when a fixture is configured, the HTTP provider when a
/// URL is, otherwise a configuration error.
pub fn build_gateway(settings: &Settings) -> Result<Gateway, CliError> {
    let provider: Arc<dyn CompletionProvider> = if let Some(path) = &settings.mock {
        Arc::new(MockProvider::load(path).map_err(|e| CliError::config(format!("mock fixtures: {e}")))?)
    } else if let Some(url) = &settings.provider_url {
        let config = HttpProviderConfig {
            base_url: url.clone(),
            api_key: settings.api_key.clone(),
            timeout: Duration::from_secs(settings.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS)),
        };
        Arc::new(HttpProvider::new(config).map_err(|e| CliError::config(format!("provider: {e:?}")))?)
    } else {
        return Err(CliError::config(format!(
            "no provider configured: pass --mock or --provider-url, or set {ENV_URL}"
        )));
    };
    let mut gateway = Gateway::new(provider);
    if let Some(model) = &settings.model {
        gateway = gateway.with_model_name(model);
    }
    Ok(gateway)
}
