// SPDX-License-Identifier: Apache-2.0

//! The problem catalog: 30 CWE-targeted design problems with port contracts,
//! property templates and hand-written reference and vulnerable designs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::property::{parse_property, PropertyAst};
use crate::sv::{tokenize, TokenKind};
use crate::ts::TransitionSystem;
use crate::Diagnostic;

/// CWE ids in catalog order.
pub const CWE_IDS: [u32; 10] = [1209, 1223, 1254, 1261, 1234, 1280, 1299, 1276, 1302, 1258];

const CATALOG_TOML: &str = include_str!("../../catalog/problems.toml");

macro_rules! designs {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../catalog/designs/", $name)))),*]
    };
}

static DESIGNS: &[(&str, &str)] = designs![
    "cwe1209_basic_ref.sv",
    "cwe1209_basic_vuln.sv",
    "cwe1209_intermediate_ref.sv",
    "cwe1209_intermediate_vuln.sv",
    "cwe1209_advanced_ref.sv",
    "cwe1209_advanced_vuln.sv",
    "cwe1223_basic_ref.sv",
    "cwe1223_basic_vuln.sv",
    "cwe1223_intermediate_ref.sv",
    "cwe1223_intermediate_vuln.sv",
    "cwe1223_advanced_ref.sv",
    "cwe1223_advanced_vuln.sv",
    "cwe1254_basic_ref.sv",
    "cwe1254_basic_vuln.sv",
    "cwe1254_intermediate_ref.sv",
    "cwe1254_intermediate_vuln.sv",
    "cwe1254_advanced_ref.sv",
    "cwe1254_advanced_vuln.sv",
    "cwe1261_basic_ref.sv",
    "cwe1261_basic_vuln.sv",
    "cwe1261_basic_harness.sv",
    "cwe1261_intermediate_ref.sv",
    "cwe1261_intermediate_vuln.sv",
    "cwe1261_intermediate_harness.sv",
    "cwe1261_advanced_ref.sv",
    "cwe1261_advanced_vuln.sv",
    "cwe1261_advanced_harness.sv",
    "cwe1234_basic_ref.sv",
    "cwe1234_basic_vuln.sv",
    "cwe1234_intermediate_ref.sv",
    "cwe1234_intermediate_vuln.sv",
    "cwe1234_advanced_ref.sv",
    "cwe1234_advanced_vuln.sv",
    "cwe1280_basic_ref.sv",
    "cwe1280_basic_vuln.sv",
    "cwe1280_intermediate_ref.sv",
    "cwe1280_intermediate_vuln.sv",
    "cwe1280_advanced_ref.sv",
    "cwe1280_advanced_vuln.sv",
    "cwe1299_basic_ref.sv",
    "cwe1299_basic_vuln.sv",
    "cwe1299_intermediate_ref.sv",
    "cwe1299_intermediate_vuln.sv",
    "cwe1299_advanced_ref.sv",
    "cwe1299_advanced_vuln.sv",
    "cwe1276_basic_ref.sv",
    "cwe1276_basic_vuln.sv",
    "cwe1276_intermediate_ref.sv",
    "cwe1276_intermediate_vuln.sv",
    "cwe1276_advanced_ref.sv",
    "cwe1276_advanced_vuln.sv",
    "cwe1302_basic_ref.sv",
    "cwe1302_basic_vuln.sv",
    "cwe1302_intermediate_ref.sv",
    "cwe1302_intermediate_vuln.sv",
    "cwe1302_advanced_ref.sv",
    "cwe1302_advanced_vuln.sv",
    "cwe1258_basic_ref.sv",
    "cwe1258_basic_vuln.sv",
    "cwe1258_intermediate_ref.sv",
    "cwe1258_intermediate_vuln.sv",
    "cwe1258_advanced_ref.sv",
    "cwe1258_advanced_vuln.sv",
];

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown CWE id {0}")]
    UnknownCwe(u32),
    #[error("unknown difficulty `{0}`")]
    UnknownDifficulty(String),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("catalog parse error: {0}")]
    Parse(String),
    #[error("invalid catalog: {0}")]
    Invalid(String),
    #[error("{problem}: property template `{template}`: {message}")]
    Template { problem: String, template: String, message: String },
    #[error("{problem}: property does not resolve: {diag}")]
    Property { problem: String, diag: Diagnostic },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Basic,
    Intermediate,
    Advanced,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Basic, Difficulty::Intermediate, Difficulty::Advanced];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Basic => "basic",
            Difficulty::Intermediate => "intermediate",
            Difficulty::Advanced => "advanced",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(Difficulty::Basic),
            "intermediate" => Ok(Difficulty::Intermediate),
            "advanced" => Ok(Difficulty::Advanced),
            _ => Err(CatalogError::UnknownDifficulty(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub dir: Direction,
    #[serde(default = "one")]
    pub width: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Submodule owning the port, if not the top.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
}

fn one() -> u32 {
    1
}

impl Port {
    /// Name as referenced from a property.
    pub fn reference(&self) -> String {
        match &self.module {
            Some(m) => format!("{m}.{}", self.name),
            None => self.name.clone(),
        }
    }

    fn prompt_text(&self) -> String {
        match (&self.note, self.width) {
            (Some(n), 1) => format!("{} ({n})", self.name),
            (Some(n), w) => format!("{} ({w} bits, {n})", self.name),
            (None, 1) => self.name.clone(),
            (None, w) => format!("{} ({w} bits)", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyTemplate {
    #[serde(default)]
    pub id: String,
    pub doc: String,
    pub text: String,
}

impl PropertyTemplate {
    /// Hole names in order of first appearance.
    pub fn holes(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, _) in scan_holes(&self.text) {
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    /// Fills every `{hole}` from `params`.
    pub fn fill(&self, params: &BTreeMap<String, String>) -> Result<String, String> {
        let mut out = String::new();
        let mut last = 0;
        for (name, range) in scan_holes(&self.text) {
            let value = params.get(&name).ok_or_else(|| format!("missing parameter `{name}`"))?;
            out.push_str(&self.text[last..range.start]);
            out.push_str(value);
            last = range.end;
        }
        out.push_str(&self.text[last..]);
        Ok(out)
    }
}

fn scan_holes(text: &str) -> Vec<(String, std::ops::Range<usize>)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                out.push((text[i + 1..j].to_string(), i..j + 1));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(rename = "cwe")]
    pub cwe_id: u32,
    pub difficulty: Difficulty,
    pub title: String,
    pub description: String,
    #[serde(rename = "module")]
    pub module_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<String>,
    pub ports: Vec<Port>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructions: Option<Vec<String>>,
    #[serde(rename = "template")]
    pub property_template_id: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    pub reference: String,
    pub vulnerable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harness: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<String>,
    #[serde(skip)]
    sources: Sources,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Sources {
    reference: String,
    vulnerable: String,
    harness: Option<String>,
}

impl ProblemSpec {
    /// Stable id, e.g. `cwe1209-basic`.
    pub fn id(&self) -> String {
        format!("cwe{}-{}", self.cwe_id, self.difficulty)
    }

    /// Module elaborated as the top when checking.
    pub fn top_module(&self) -> &str {
        self.top.as_deref().unwrap_or(&self.module_name)
    }

    pub fn reference_source(&self) -> &str {
        &self.sources.reference
    }

    pub fn vulnerable_source(&self) -> &str {
        &self.sources.vulnerable
    }

    pub fn harness_source(&self) -> Option<&str> {
        self.sources.harness.as_deref()
    }

    /// `design` with the harness appended, ready for elaboration under `top_module()`.
    pub fn checkable_source(&self, design: &str) -> String {
        match self.harness_source() {
            Some(h) => format!("{design}\n{h}"),
            None => design.to_string(),
        }
    }

    /// Port-contract line as it appears in the prompt.
    pub fn port_line(&self) -> String {
        let list = |dir: Direction| {
            self.ports
                .iter()
                .filter(|p| p.dir == dir && p.module.is_none())
                .map(Port::prompt_text)
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!("Inputs: {} and Outputs: {}.", list(Direction::Input), list(Direction::Output))
    }

    /// Spec-specific instructions, before the fixed rules.
    pub fn spec_instructions(&self) -> Vec<String> {
        if let Some(v) = &self.instructions {
            return v.clone();
        }
        let mut out = vec![self.port_line()];
        out.extend(self.notes.iter().cloned());
        out.push(format!("Module name should be {}.", self.module_name));
        out
    }

    /// Names a property may reference.
    pub fn allowed_names(&self) -> BTreeSet<String> {
        self.ports.iter().map(Port::reference).chain(self.probes.iter().cloned()).collect()
    }
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    template: BTreeMap<String, PropertyTemplate>,
    problem: Vec<ProblemSpec>,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    templates: BTreeMap<String, PropertyTemplate>,
    problems: Vec<ProblemSpec>,
}

impl Catalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            Catalog::from_toml(CATALOG_TOML, |name| {
                DESIGNS.iter().find(|(n, _)| *n == name).map(|(_, s)| s.to_string())
            })
            .expect("builtin catalog is valid")
        })
    }

    /// Parses and validates a catalog; `load` resolves design file names.
    pub fn from_toml(text: &str, load: impl Fn(&str) -> Option<String>) -> Result<Catalog, CatalogError> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        let mut templates = file.template;
        for (id, t) in templates.iter_mut() {
            t.id = id.clone();
        }
        let mut seen = BTreeSet::new();
        let mut problems = file.problem;
        for p in problems.iter_mut() {
            if !CWE_IDS.contains(&p.cwe_id) {
                return Err(CatalogError::UnknownCwe(p.cwe_id));
            }
            if !seen.insert((p.cwe_id, p.difficulty)) {
                return Err(CatalogError::Invalid(format!("duplicate problem {}", p.id())));
            }
            let t = templates.get(&p.property_template_id).ok_or_else(|| CatalogError::Template {
                problem: p.id(),
                template: p.property_template_id.clone(),
                message: "no such template".into(),
            })?;
            for h in t.holes() {
                if !p.params.contains_key(&h) {
                    return Err(CatalogError::Template {
                        problem: p.id(),
                        template: t.id.clone(),
                        message: format!("missing parameter `{h}`"),
                    });
                }
            }
            let get = |name: &str| {
                load(name).ok_or_else(|| CatalogError::Invalid(format!("{}: design file `{name}` not found", p.id())))
            };
            p.sources = Sources {
                reference: get(&p.reference)?,
                vulnerable: get(&p.vulnerable)?,
                harness: p.harness.as_deref().map(get).transpose()?,
            };
        }
        let rank = |p: &ProblemSpec| (CWE_IDS.iter().position(|&c| c == p.cwe_id).unwrap_or(usize::MAX), p.difficulty);
        problems.sort_by_key(rank);
        Ok(Catalog { templates, problems })
    }

    pub fn problems(&self) -> &[ProblemSpec] {
        &self.problems
    }

    pub fn template(&self, id: &str) -> Option<&PropertyTemplate> {
        self.templates.get(id)
    }

    pub fn templates(&self) -> impl Iterator<Item = &PropertyTemplate> {
        self.templates.values()
    }

    /// Problems matching every given filter, in catalog order.
    pub fn list(&self, cwe: Option<u32>, difficulty: Option<Difficulty>) -> Result<Vec<&ProblemSpec>, CatalogError> {
        if let Some(c) = cwe {
            if !CWE_IDS.contains(&c) {
                return Err(CatalogError::UnknownCwe(c));
            }
        }
        Ok(self
            .problems
            .iter()
            .filter(|p| cwe.is_none_or(|c| p.cwe_id == c) && difficulty.is_none_or(|d| p.difficulty == d))
            .collect())
    }

    /// Looks a problem up by `cweNNNN-difficulty`.
    pub fn get(&self, id: &str) -> Result<&ProblemSpec, CatalogError> {
        self.problems.iter().find(|p| p.id() == id).ok_or_else(|| CatalogError::UnknownProblem(id.to_string()))
    }

    /// Filled property text for `spec`, checked against its port contract.
    pub fn property_text(&self, spec: &ProblemSpec) -> Result<String, CatalogError> {
        let t = self.template(&spec.property_template_id).ok_or_else(|| CatalogError::Template {
            problem: spec.id(),
            template: spec.property_template_id.clone(),
            message: "no such template".into(),
        })?;
        let text = t.fill(&spec.params).map_err(|message| CatalogError::Template {
            problem: spec.id(),
            template: t.id.clone(),
            message,
        })?;
        let allowed = spec.allowed_names();
        for name in referenced_names(&text) {
            if !allowed.contains(&name) {
                return Err(CatalogError::Template {
                    problem: spec.id(),
                    template: t.id.clone(),
                    message: format!("`{name}` is not in the port contract"),
                });
            }
        }
        Ok(text)
    }

    /// Instantiates the property of `spec` against an elaborated design.
    pub fn instantiate_property(&self, spec: &ProblemSpec, ts: &TransitionSystem) -> Result<PropertyAst, CatalogError> {
        let text = self.property_text(spec)?;
        parse_property(&text, ts).map_err(|diag| CatalogError::Property { problem: spec.id(), diag })
    }
}

/// Signal names in a property, with dotted paths joined.
fn referenced_names(text: &str) -> Vec<String> {
    let (toks, _) = tokenize(text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        if t.kind == TokenKind::Identifier && !t.text.starts_with('$') {
            let mut name = t.text.clone();
            while i + 2 < toks.len() && toks[i + 1].text == "." && toks[i + 2].kind == TokenKind::Identifier {
                name.push('.');
                name.push_str(&toks[i + 2].text);
                i += 2;
            }
            if !out.contains(&name) {
                out.push(name);
            }
        }
        i += 1;
    }
    out
}

/// Problems of the builtin catalog matching every given filter.
pub fn list_problems(cwe: Option<u32>, difficulty: Option<Difficulty>) -> Result<Vec<&'static ProblemSpec>, CatalogError> {
    Catalog::builtin().list(cwe, difficulty)
}

/// Property of a builtin problem against an elaborated design.
pub fn instantiate_property(spec: &ProblemSpec, ts: &TransitionSystem) -> Result<PropertyAst, CatalogError> {
    Catalog::builtin().instantiate_property(spec, ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holes_fill() {
        let t = PropertyTemplate { id: "t".into(), doc: String::new(), text: "a {x} b {y} {x} {count_out, d}".into() };
        assert_eq!(t.holes(), vec!["x", "y"]);
        let params = BTreeMap::from([("x".to_string(), "1".to_string()), ("y".to_string(), "{p, q}".to_string())]);
        assert_eq!(t.fill(&params).unwrap(), "a 1 b {p, q} 1 {count_out, d}");
        assert!(t.fill(&BTreeMap::new()).is_err());
    }

    #[test]
    fn names_join_paths() {
        assert_eq!(
            referenced_names("a.b == ($past(c, 2) && 8'h03 == d)"),
            vec!["a.b".to_string(), "c".to_string(), "d".to_string()]
        );
    }

    #[test]
    fn difficulty_round_trip() {
        for d in Difficulty::ALL {
            assert_eq!(d.as_str().parse::<Difficulty>().unwrap(), d);
        }
        assert!("expert".parse::<Difficulty>().is_err());
    }
}
