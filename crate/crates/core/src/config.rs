//! Configuration file loading.
//!
//! One TOML file describes the MCP endpoints, the embedding provider, the
//! tokenizer, and the gateway settings. Relative paths inside the file
//! (transcripts, enrichment sidecar, vocabulary) resolve against the
//! config file's own directory, so a checked-in fixture config works from
//! any working directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::embedding::{ProviderKind, ProviderSpec};
use crate::mcp::{DiscoveryMode, ServerEndpoint, TransportKind};
use crate::tokens::TokenizerSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Fully resolved application configuration.
#[derive(Debug, Clone)]
pub struct AppConfig {
    pub endpoints: Vec<ServerEndpoint>,
    pub discovery_mode: DiscoveryMode,
    pub provider: ProviderSpec,
    pub tokenizer: TokenizerSpec,
    pub enrichment_path: Option<PathBuf>,
    pub gateway: GatewaySettings,
}

/// Settings for the long-running HTTP service.
#[derive(Debug, Clone)]
pub struct GatewaySettings {
    pub listen: String,
    pub default_k: usize,
    pub default_threshold: Option<f32>,
    pub cache_enabled: bool,
    pub cache_capacity: usize,
    /// When false, selection requests answer 503 while a reindex is in
    /// flight instead of serving the outgoing snapshot.
    pub serve_during_reindex: bool,
    /// Environment variable holding the static bearer token, if requests
    /// must be authenticated.
    pub auth_token_env: Option<String>,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:7333".into(),
            default_k: 3,
            default_threshold: None,
            cache_enabled: true,
            cache_capacity: 1024,
            serve_during_reindex: true,
            auth_token_env: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    servers: Vec<ServerEntry>,
    #[serde(default)]
    discovery: DiscoverySection,
    provider: ProviderSection,
    #[serde(default)]
    tokenizer: TokenizerSection,
    #[serde(default)]
    enrichment: Option<EnrichmentSection>,
    #[serde(default)]
    gateway: GatewaySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerEntry {
    server_id: String,
    transport: TransportKind,
    address: String,
    display_name: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscoverySection {
    mode: Option<DiscoveryMode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProviderSection {
    provider_id: Option<String>,
    kind: String,
    dimension: usize,
    model_name: Option<String>,
    url: Option<String>,
    auth_token_env: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenizerSection {
    kind: Option<String>,
    chars_per_token: Option<u32>,
    vocab_path: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnrichmentSection {
    path: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GatewaySection {
    listen: Option<String>,
    default_k: Option<usize>,
    default_threshold: Option<f32>,
    serve_during_reindex: Option<bool>,
    auth_token_env: Option<String>,
    #[serde(default)]
    cache: CacheSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheSection {
    enabled: Option<bool>,
    capacity: Option<usize>,
}

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<AppConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let file: ConfigFile = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve(file, base)
}

fn resolve(file: ConfigFile, base: &Path) -> Result<AppConfig, ConfigError> {
    let mut endpoints = Vec::with_capacity(file.servers.len());
    for entry in file.servers {
        let address = match entry.transport {
            // transcripts live next to the config file
            TransportKind::Replay => resolve_path(base, &entry.address)
                .to_string_lossy()
                .into_owned(),
            _ => entry.address,
        };
        let endpoint = ServerEndpoint {
            display_name: entry
                .display_name
                .unwrap_or_else(|| entry.server_id.clone()),
            server_id: entry.server_id,
            transport: entry.transport,
            address,
        };
        endpoint
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        endpoints.push(endpoint);
    }

    let provider = resolve_provider(file.provider)?;
    let tokenizer = resolve_tokenizer(file.tokenizer, base)?;

    let gateway = GatewaySettings {
        listen: file
            .gateway
            .listen
            .unwrap_or_else(|| GatewaySettings::default().listen),
        default_k: file.gateway.default_k.unwrap_or(3),
        default_threshold: file.gateway.default_threshold,
        cache_enabled: file.gateway.cache.enabled.unwrap_or(true),
        cache_capacity: file.gateway.cache.capacity.unwrap_or(1024),
        serve_during_reindex: file.gateway.serve_during_reindex.unwrap_or(true),
        auth_token_env: file.gateway.auth_token_env,
    };
    if gateway.default_k == 0 {
        return Err(ConfigError::Invalid("gateway.default_k must be >= 1".into()));
    }

    Ok(AppConfig {
        endpoints,
        discovery_mode: file.discovery.mode.unwrap_or(DiscoveryMode::Strict),
        provider,
        tokenizer,
        enrichment_path: file.enrichment.map(|e| resolve_path(base, &e.path)),
        gateway,
    })
}

fn resolve_provider(section: ProviderSection) -> Result<ProviderSpec, ConfigError> {
    if section.dimension == 0 {
        return Err(ConfigError::Invalid("provider.dimension must be >= 1".into()));
    }
    match section.kind.as_str() {
        "reference-local" => Ok(ProviderSpec {
            provider_id: section.provider_id.unwrap_or_else(|| "reference".into()),
            kind: ProviderKind::ReferenceLocal {
                dimension: section.dimension,
            },
        }),
        "remote-http" => {
            let model_name = section.model_name.ok_or_else(|| {
                ConfigError::Invalid("provider.model_name is required for remote-http".into())
            })?;
            let url = section.url.ok_or_else(|| {
                ConfigError::Invalid("provider.url is required for remote-http".into())
            })?;
            Ok(ProviderSpec {
                provider_id: section.provider_id.unwrap_or_else(|| model_name.clone()),
                kind: ProviderKind::RemoteHttp {
                    dimension: section.dimension,
                    model_name,
                    url,
                    auth_token_env: section.auth_token_env,
                },
            })
        }
        other => Err(ConfigError::Invalid(format!(
            "provider.kind `{other}` is not reference-local or remote-http"
        ))),
    }
}

fn resolve_tokenizer(section: TokenizerSection, base: &Path) -> Result<TokenizerSpec, ConfigError> {
    match section.kind.as_deref() {
        None | Some("whitespace-punct") => Ok(TokenizerSpec::WhitespacePunct),
        Some("approximate-chars") => Ok(TokenizerSpec::ApproximateChars {
            chars_per_token: section.chars_per_token.unwrap_or(4),
        }),
        Some("external-vocab") => {
            let raw = section.vocab_path.ok_or_else(|| {
                ConfigError::Invalid("tokenizer.vocab_path is required for external-vocab".into())
            })?;
            Ok(TokenizerSpec::ExternalVocab {
                vocab_path: resolve_path(base, &raw),
            })
        }
        Some(other) => Err(ConfigError::Invalid(format!(
            "tokenizer.kind `{other}` is unknown"
        ))),
    }
}

fn resolve_path(base: &Path, raw: &str) -> PathBuf {
    let path = Path::new(raw);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
