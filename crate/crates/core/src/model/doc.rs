//! Benchmark document schema.
//!
//! A benchmark is a TOML document with these top-level keys:
//!
//! | key         | type                          | required |
//! |-------------|-------------------------------|----------|
//! | `name`      | string                        | no       |
//! | `entry`     | function name                 | yes      |
//! | `functions` | table of function name → body | yes      |
//! | `targets`   | list of `file:line`           | no       |
//! | `witness`   | hex byte string               | no       |
//! | `vfg_edges` | list of `[file:line, file:line]` pairs | no |
//! | `seeds`     | list of hex byte strings      | no       |
//!
//! Each function holds `file`, `params`, `blocks`, and optionally
//! `entry_block` (defaults to the first block) and `source`, a list of
//! `[line, text]` pairs giving the source lines shown in code slices.
//!
//! Statements are tables with a `line` and a `kind` of `assign` (`var`,
//! `expr`), `call` (`callee`, `args`), `crash_if` (`cond`) or `nop`.
//! Terminators are `{ kind = "goto", target }`,
//! `{ kind = "branch", cond, then, else }` or `{ kind = "return" }`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::LoadError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub entry: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vfg_edges: Option<Vec<(String, String)>>,
    pub functions: BTreeMap<String, FunctionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDoc {
    pub file: String,
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_block: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source: Vec<(u32, String)>,
    pub blocks: Vec<BlockDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    pub id: String,
    #[serde(default)]
    pub statements: Vec<StatementDoc>,
    pub terminator: TerminatorDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StatementDoc {
    Assign { line: u32, var: String, expr: String },
    Call {
        line: u32,
        callee: String,
        #[serde(default)]
        args: Vec<String>,
    },
    CrashIf { line: u32, cond: String },
    Nop { line: u32 },
}

impl StatementDoc {
    pub fn line(&self) -> u32 {
        match self {
            StatementDoc::Assign { line, .. }
            | StatementDoc::Call { line, .. }
            | StatementDoc::CrashIf { line, .. }
            | StatementDoc::Nop { line } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminatorDoc {
    Goto {
        target: String,
    },
    Branch {
        cond: String,
        then: String,
        #[serde(rename = "else")]
        otherwise: String,
    },
    Return,
}

impl BenchmarkDoc {
    /// Parses TOML text, reporting the key path of the first schema violation.
    pub fn from_toml_str(text: &str) -> Result<Self, LoadError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| LoadError::parse("<document>", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            LoadError::parse(path, inner.message().to_string())
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("benchmark documents always serialize")
    }
}
