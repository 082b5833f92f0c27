//! Code → message → fix-hint table for syntax diagnostics.
//!
//! The default catalog is compiled in from `catalog.toml`; course authors can
//! load a reworded copy with [`Catalog::from_toml_str`].

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub message: String,
    pub hint: String,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("catalog lacks an entry for {0}")]
    MissingCode(&'static str),
}

/// Every code the reader can emit.
pub const CODES: &[&str] = &[
    "E-MISSING-PERIOD",
    "E-UNBALANCED-PAREN",
    "E-OPERATOR-CLASH",
    "E-VAR-AS-FUNCTOR",
    "E-SINGLETON-VAR",
    "E-UNEXPECTED-EOF",
    "E-UNEXPECTED-TOKEN",
    "E-MISSING-COMMA",
    "E-UNTERMINATED-COMMENT",
    "E-UNTERMINATED-QUOTE",
    "E-BAD-CHAR",
    "E-BAD-NUMBER",
    "E-NOT-CALLABLE",
    "E-BUILTIN-REDEFINED",
    "E-DIRECTIVE",
    "E-UNSUPPORTED",
    "E-TOO-DEEP",
];

impl Catalog {
    pub fn from_toml_str(text: &str) -> Result<Catalog, CatalogError> {
        let entries: BTreeMap<String, CatalogEntry> = toml::from_str(text)?;
        if let Some(missing) = CODES.iter().find(|c| !entries.contains_key(**c)) {
            return Err(CatalogError::MissingCode(missing));
        }
        Ok(Catalog { entries })
    }

    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            Catalog::from_toml_str(include_str!("catalog.toml"))
                .expect("bundled diagnostic catalog is valid")
        })
    }

    pub fn get(&self, code: &str) -> Option<&CatalogEntry> {
        self.entries.get(code)
    }

    /// Renders the message and hint for `code` with `{key}` placeholders
    /// filled from `args`.
    pub fn render(&self, code: &str, args: &[(&str, &str)]) -> (String, Option<String>) {
        match self.entries.get(code) {
            Some(e) => (fill(&e.message, args), Some(fill(&e.hint, args))),
            None => (code.to_string(), None),
        }
    }
}

fn fill(template: &str, args: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in args {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}
