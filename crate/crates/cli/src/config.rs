//! Run configuration: a JSON file overridden by command-line flags.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mmif_core::evalrun::{Metric, Strictness};
use mmif_core::judge::client::config_digest;
use mmif_core::judge::{ClientConfig, ClientMode, GenerationClient};
use mmif_core::taxonomy::Taxonomy;
use serde::{Deserialize, Serialize};

use crate::{CliError, GlobalArgs};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfigs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judge: Option<ClientConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ClientConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<ClientConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<PathBuf>,
    pub clients: ClientConfigs,
    pub parallelism: usize,
    pub strictness: Strictness,
    pub metric: Metric,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            taxonomy: None,
            clients: ClientConfigs::default(),
            parallelism: 1,
            strictness: Strictness::Strict,
            metric: Metric::Fraction,
            seed: 0,
        }
    }
}

fn relative_to(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn load_client(path: &Path) -> Result<ClientConfig, CliError> {
    ClientConfig::load(path).map_err(|e| CliError::Validation(e.to_string()))
}

impl RunConfig {
    /// Merge the config file (if any) with flags; flags win.
    pub fn resolve(g: &GlobalArgs) -> Result<Self, CliError> {
        let mut cfg = match &g.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                let mut cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                let base = path.parent();
                cfg.taxonomy = cfg.taxonomy.map(|t| relative_to(base, t));
                for c in [&mut cfg.clients.judge, &mut cfg.clients.model, &mut cfg.clients.generator]
                    .into_iter()
                    .flatten()
                {
                    c.fixtures = c.fixtures.take().map(|f| relative_to(base, f));
                }
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(t) = &g.taxonomy {
            cfg.taxonomy = Some(t.clone());
        }
        if let Some(p) = &g.judge {
            cfg.clients.judge = Some(load_client(p)?);
        }
        if let Some(p) = &g.model {
            cfg.clients.model = Some(load_client(p)?);
        }
        if let Some(p) = &g.generator {
            cfg.clients.generator = Some(load_client(p)?);
        }
        if let Some(f) = &g.stub_fixtures {
            for slot in [&mut cfg.clients.judge, &mut cfg.clients.model, &mut cfg.clients.generator] {
                if slot.is_none() {
                    *slot = Some(ClientConfig::stub(f.clone()));
                }
            }
        }
        if let Some(p) = g.parallelism {
            cfg.parallelism = p;
        }
        if let Some(s) = g.strictness {
            cfg.strictness = s.into();
        }
        if let Some(m) = g.metric {
            cfg.metric = m.into();
        }
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.parallelism == 0 {
            return Err(CliError::Validation("parallelism must be at least 1".into()));
        }
        for (role, c) in self.roles() {
            if c.mode == ClientMode::Stub && c.fixtures.is_none() {
                return Err(CliError::Validation(format!("{role} client is in stub mode without a fixture file")));
            }
        }
        Ok(())
    }

    fn roles(&self) -> Vec<(&'static str, &ClientConfig)> {
        let c = &self.clients;
        [("judge", &c.judge), ("model", &c.model), ("generator", &c.generator)]
            .into_iter()
            .filter_map(|(r, c)| c.as_ref().map(|c| (r, c)))
            .collect()
    }

    pub fn taxonomy(&self) -> Result<Taxonomy, CliError> {
        match &self.taxonomy {
            Some(p) => Taxonomy::with_override_file(p).map_err(|e| CliError::Validation(e.to_string())),
            None => Ok(Taxonomy::builtin()),
        }
    }

    pub fn digest(&self) -> String {
        let map: HashMap<&str, &ClientConfig> = self.roles().into_iter().collect();
        config_digest(&map)
    }

    pub fn build(&self, role: &str) -> Result<Option<Arc<dyn GenerationClient>>, CliError> {
        let cfg = match role {
            "judge" => &self.clients.judge,
            "model" => &self.clients.model,
            "generator" => &self.clients.generator,
            _ => unreachable!("unknown client role {role}"),
        };
        cfg.as_ref()
            .map(|c| c.build().map_err(|e| CliError::Validation(format!("{role} client: {e}"))))
            .transpose()
    }
}
