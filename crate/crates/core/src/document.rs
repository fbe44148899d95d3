//! Rendering of tool schemas into the text documents that get embedded.
//!
//! The document is a fixed four-line template:
//!
//! ```text
//! Tool: {name}
//! Purpose: {description}
//! Capabilities: {expanded description}
//! Parameters: {name} ({type}, required|optional): {description}; ...
//! ```
//!
//! The capabilities line carries an optional enrichment text (a sidecar
//! table keyed by tool) and repeats the raw description when none is
//! provided. Tools without parameters render `Parameters: none`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::mcp::{ToolKey, ToolSchema};

#[derive(Debug, Error)]
pub enum EnrichmentError {
    #[error("failed to read enrichment table {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("enrichment table {path}: {reason}")]
    Malformed { path: String, reason: String },
}

/// The rendered semantic text representation of one tool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolDocument {
    pub tool_key: ToolKey,
    pub text: String,
    pub enrichment_used: bool,
}

/// Sidecar table mapping namespaced tool keys to expanded descriptions.
#[derive(Debug, Clone, Default)]
pub struct EnrichmentTable {
    entries: BTreeMap<ToolKey, String>,
}

impl EnrichmentTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: ToolKey, text: impl Into<String>) {
        self.entries.insert(key, text.into());
    }

    pub fn get(&self, key: &ToolKey) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads a JSON object mapping `"server_id.name"` to enrichment text.
    pub fn load(path: &Path) -> Result<Self, EnrichmentError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| EnrichmentError::Unreadable {
            path: display.clone(),
            reason: e.to_string(),
        })?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| EnrichmentError::Malformed {
                path: display.clone(),
                reason: e.to_string(),
            })?;
        let object = value
            .as_object()
            .ok_or_else(|| EnrichmentError::Malformed {
                path: display.clone(),
                reason: "top level must be an object".into(),
            })?;
        let mut table = Self::empty();
        for (raw_key, entry) in object {
            let key: ToolKey = raw_key.parse().map_err(|e| EnrichmentError::Malformed {
                path: display.clone(),
                reason: e,
            })?;
            let enrichment = entry
                .as_str()
                .ok_or_else(|| EnrichmentError::Malformed {
                    path: display.clone(),
                    reason: format!("value for `{raw_key}` must be a string"),
                })?;
            table.insert(key, enrichment);
        }
        Ok(table)
    }
}

/// Render one tool into its embedding document. Rendering is a pure
/// function of the schema and the enrichment text: the same inputs always
/// produce identical bytes.
pub fn render(tool: &ToolSchema, enrichment: Option<&str>) -> ToolDocument {
    let capabilities = enrichment.unwrap_or(&tool.description);
    let mut parameters = String::new();
    if tool.parameters.is_empty() {
        parameters.push_str("none");
    } else {
        for (i, param) in tool.parameters.iter().enumerate() {
            if i > 0 {
                parameters.push_str("; ");
            }
            let requirement = if param.required { "required" } else { "optional" };
            let _ = write!(
                parameters,
                "{} ({}, {}): {}",
                param.name, param.type_name, requirement, param.description
            );
        }
    }
    let text = format!(
        "Tool: {}\nPurpose: {}\nCapabilities: {}\nParameters: {}",
        tool.name, tool.description, capabilities, parameters
    );
    ToolDocument {
        tool_key: tool.key(),
        text,
        enrichment_used: enrichment.is_some(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcp::ParameterSpec;
    use std::io::Write as _;

    fn tool(name: &str, description: &str, parameters: Vec<ParameterSpec>) -> ToolSchema {
        ToolSchema {
            server_id: "clock".into(),
            name: name.into(),
            description: description.into(),
            parameters,
            raw_schema_text: "{}".into(),
        }
    }

    #[test]
    fn renders_parameterless_tool_with_description_repeated() {
        let doc = render(&tool("get_time", "Returns current time", vec![]), None);
        assert_eq!(
            doc.text,
            "Tool: get_time\nPurpose: Returns current time\nCapabilities: Returns current time\nParameters: none"
        );
        assert!(!doc.enrichment_used);
    }

    #[test]
    fn rendering_is_deterministic() {
        let t = tool("get_time", "Returns current time", vec![]);
        assert_eq!(render(&t, None).text, render(&t, None).text);
    }

    #[test]
    fn renders_parameters_and_enrichment() {
        let t = tool(
            "get_weather",
            "Fetch the weather",
            vec![
                ParameterSpec {
                    name: "city".into(),
                    type_name: "string".into(),
                    description: "City name".into(),
                    required: true,
                },
                ParameterSpec {
                    name: "units".into(),
                    type_name: "string".into(),
                    description: "Metric or imperial".into(),
                    required: false,
                },
            ],
        );
        let doc = render(&t, Some("Current conditions and forecasts worldwide"));
        assert_eq!(
            doc.text,
            "Tool: get_weather\nPurpose: Fetch the weather\nCapabilities: Current conditions and forecasts worldwide\nParameters: city (string, required): City name; units (string, optional): Metric or imperial"
        );
        assert!(doc.enrichment_used);
    }

    #[test]
    fn template_is_exactly_four_prefixed_lines() {
        let t = tool("get_time", "Returns current time", vec![]);
        let doc = render(&t, Some("Timezone-aware clock reads"));
        let lines: Vec<&str> = doc.text.split('\n').collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("Tool: "));
        assert!(lines[1].starts_with("Purpose: "));
        assert!(lines[2].starts_with("Capabilities: "));
        assert!(lines[3].starts_with("Parameters: "));
    }

    #[test]
    fn distinct_tools_with_distinct_descriptions_render_distinct_documents() {
        let a = render(&tool("read_file", "Read a file from disk", vec![]), None);
        let b = render(&tool("write_file", "Write a file to disk", vec![]), None);
        assert_ne!(a.text, b.text);
    }

    #[test]
    fn enrichment_table_loads_and_resolves() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{"clock.get_time": "Reads wall-clock time in any timezone"}}"#
        )
        .unwrap();
        let table = EnrichmentTable::load(file.path()).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(
            table.get(&ToolKey::new("clock", "get_time")),
            Some("Reads wall-clock time in any timezone")
        );
        assert_eq!(table.get(&ToolKey::new("clock", "other")), None);
    }

    #[test]
    fn enrichment_table_rejects_bad_shapes() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"not-namespaced": "text"}}"#).unwrap();
        assert!(matches!(
            EnrichmentTable::load(file.path()),
            Err(EnrichmentError::Malformed { .. })
        ));
        assert!(matches!(
            EnrichmentTable::load(Path::new("/nonexistent/enrichment.json")),
            Err(EnrichmentError::Unreadable { .. })
        ));
    }
}
