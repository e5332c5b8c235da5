//! Service configuration: one TOML file plus environment overrides for the
//! address, data paths and API token.

use std::path::{Path, PathBuf};

use pedal_core::SchedulerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::ingest::{IngestOptions, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Directory for the journal and other session files.
    pub data_dir: PathBuf,
    /// Corpus loaded at startup; without one the service waits for an upload.
    pub corpus: Option<PathBuf>,
    /// Journal file name, relative to `data_dir` unless absolute.
    pub journal: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub schema: String,
    pub source_lang: String,
    pub target_lang: String,
    pub has_header: bool,
    pub skip_malformed: bool,
    /// Bearer token required on every endpoint but `/health`.
    pub api_token: Option<String>,
    /// Seconds before an unanswered task returns to the queue.
    pub lease_timeout_secs: u64,
    pub scheduler: SchedulerConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let ingest = IngestOptions::default();
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("pedal-data"),
            corpus: None,
            journal: PathBuf::from("journal.log"),
            embeddings: None,
            schema: ingest.schema.to_string(),
            source_lang: ingest.source_lang,
            target_lang: ingest.target_lang,
            has_header: false,
            skip_malformed: false,
            api_token: None,
            lease_timeout_secs: 30 * 60,
            scheduler: SchedulerConfig::default(),
        }
    }
}

/// Environment variables read by [`ServiceConfig::apply_env`].
pub const ENV_VARS: [&str; 7] = [
    "PEDAL_HOST",
    "PEDAL_PORT",
    "PEDAL_DATA_DIR",
    "PEDAL_CORPUS",
    "PEDAL_JOURNAL",
    "PEDAL_EMBEDDINGS",
    "PEDAL_API_TOKEN",
];

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ServiceConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        Self::from_toml(&text)
    }

    /// Applies overrides from `lookup` (normally `std::env::var`).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(v) = lookup("PEDAL_HOST") {
            self.host = v;
        }
        if let Some(v) = lookup("PEDAL_PORT") {
            self.port = v.parse().map_err(|_| Error::Config(format!("PEDAL_PORT={v:?} is not a port")))?;
        }
        if let Some(v) = lookup("PEDAL_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = lookup("PEDAL_CORPUS") {
            self.corpus = Some(v.into());
        }
        if let Some(v) = lookup("PEDAL_JOURNAL") {
            self.journal = v.into();
        }
        if let Some(v) = lookup("PEDAL_EMBEDDINGS") {
            self.embeddings = Some(v.into());
        }
        if let Some(v) = lookup("PEDAL_API_TOKEN") {
            self.api_token = Some(v).filter(|t| !t.is_empty());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.ingest_options()?;
        self.scheduler.validate()?;
        if self.lease_timeout_secs == 0 {
            return Err(Error::Config("lease_timeout_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn ingest_options(&self) -> Result<IngestOptions> {
        Ok(IngestOptions {
            schema: self.schema.parse::<Schema>()?,
            source_lang: self.source_lang.clone(),
            target_lang: self.target_lang.clone(),
            has_header: self.has_header,
            skip_malformed: self.skip_malformed,
        })
    }

    pub fn journal_path(&self) -> PathBuf {
        self.data_dir.join(&self.journal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pedal_core::Policy;

    #[test]
    fn file_then_env() {
        let mut c = ServiceConfig::from_toml(
            r#"
            port = 9000
            corpus = "c.tsv"
            [scheduler]
            policy = "random"
            seed = 4
            "#,
        )
        .unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.scheduler.policy, Policy::Random);
        assert_eq!(c.scheduler.warmup, 25);
        c.apply_env(|k| match k {
            "PEDAL_PORT" => Some("9100".into()),
            "PEDAL_DATA_DIR" => Some("/srv/pedal".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.port, 9100);
        assert_eq!(c.journal_path(), PathBuf::from("/srv/pedal/journal.log"));
        assert!(c.apply_env(|k| (k == "PEDAL_PORT").then(|| "x".into())).is_err());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ServiceConfig::from_toml("bogus = 1").is_err());
        assert!(ServiceConfig::from_toml("schema = \"hyp\"").is_err());
        assert!(ServiceConfig::from_toml("[scheduler]\nrescore_interval = 0").is_err());
    }
}
