//! Device catalog listing.

use pqsim_core::devices::DeviceRegistry;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub parameters: &'static str,
    pub devices: &'static str,
}

/// Registered kinds whose name contains `filter` (case-insensitive).
pub fn catalog(filter: Option<&str>) -> Vec<CatalogEntry> {
    let registry = DeviceRegistry::with_catalog();
    let kinds = match filter {
        Some(f) => registry.filter(f),
        None => registry.kinds(),
    };
    kinds
        .into_iter()
        .map(|k| CatalogEntry {
            kind: k.name(),
            parameters: k.params(),
            devices: k.acronyms(),
        })
        .collect()
}

pub fn render_text(entries: &[CatalogEntry]) -> String {
    let width = entries.iter().map(|e| e.kind.len()).max().unwrap_or(0);
    entries
        .iter()
        .map(|e| format!("{:width$}  [{}]  {}\n", e.kind, e.devices, e.parameters))
        .collect()
}

pub fn render_json(entries: &[CatalogEntry]) -> String {
    serde_json::to_string_pretty(entries).expect("catalog serialises") + "\n"
}
