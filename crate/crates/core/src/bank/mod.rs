//! Assessment item bank: loading, validation, and content rendering.
//!
//! # File format
//!
//! A bank is a JSON object with a required `version` and an `items` array.
//! Each item is one object:
//!
//! ```json
//! {
//!   "id": "rc-01",
//!   "construct": "reading",
//!   "kind": "MULTIPLE_CHOICE",
//!   "a": 1.2,
//!   "b": -0.4,
//!   "template": {
//!     "blocks": [{ "text": "Read: {passage}", "caption": "a fox in a field" }],
//!     "slots": { "passage": "The fox..." }
//!   },
//!   "answer_key": 1,
//!   "options": ["A cat", "A fox"]
//! }
//! ```
//!
//! `answer_key` depends on `kind`: an option index for `MULTIPLE_CHOICE`, the
//! expected string for `DIGIT_SPAN`, `PATTERN`, `TIMED_MATCH` and `FREE_TEXT`,
//! and `{"scale": "...", "reverse": false}` for `LIKERT`.

mod render;
mod responses;

pub use render::{
    render_item, ContentProvider, MediaUnit, Modality, RenderedBlock, RenderedContent, Screen,
    TemplateProvider, MIN_MEDIA_UNITS,
};
pub use responses::{load_response_matrix, parse_response_matrix, ResponseMatrix};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::irt::ItemParams;

pub const BANK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BankError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported bank version {0}")]
    Version(u32),
    #[error("duplicate item id {0}")]
    DuplicateId(String),
    #[error("item {item}: {reason}")]
    Invalid { item: String, reason: String },
    #[error("item {item}: construct {construct} is not configured")]
    UnknownConstruct { item: String, construct: String },
    #[error("item {item}: unresolved template slot {{{slot}}}")]
    UnresolvedSlot { item: String, slot: String },
    #[error("render of {item} violates {reason}")]
    RenderInvariant { item: String, reason: String },
    #[error("response matrix: {0}")]
    Matrix(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ItemKind {
    MultipleChoice,
    DigitSpan,
    Pattern,
    TimedMatch,
    Likert,
    FreeText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlotValue {
    Number(f64),
    Text(String),
    List(Vec<String>),
}

impl SlotValue {
    fn render(&self) -> String {
        match self {
            SlotValue::Number(n) => n.to_string(),
            SlotValue::Text(t) => t.clone(),
            SlotValue::List(items) => items.join(" "),
        }
    }
}

/// One content unit of an item before media assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBlock {
    pub text: String,
    /// Lower-complexity wording used when requested complexity is negative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simple: Option<String>,
    /// Caption for the image representation of this block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub blocks: Vec<TemplateBlock>,
    #[serde(default)]
    pub slots: BTreeMap<String, SlotValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnswerKey {
    Choice(usize),
    Exact(String),
    Scale { scale: String, reverse: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ItemRecord", into = "ItemRecord")]
pub struct Item {
    pub id: String,
    pub construct: String,
    pub kind: ItemKind,
    pub params: ItemParams,
    pub template: Template,
    pub answer_key: AnswerKey,
    pub options: Vec<String>,
}

/// On-disk shape of an item.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemRecord {
    id: String,
    construct: String,
    kind: ItemKind,
    a: f64,
    b: f64,
    template: Template,
    answer_key: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    options: Vec<String>,
}

impl TryFrom<ItemRecord> for Item {
    type Error = String;

    fn try_from(r: ItemRecord) -> Result<Self, String> {
        if r.id.trim().is_empty() {
            return Err("empty item id".into());
        }
        let params = ItemParams::new(r.a, r.b).map_err(|e| format!("{}: {e}", r.id))?;
        if r.template.blocks.is_empty() {
            return Err(format!("{}: template has no blocks", r.id));
        }
        let answer_key = match r.kind {
            ItemKind::MultipleChoice => {
                if r.options.len() < 2 {
                    return Err(format!("{}: multiple choice needs at least 2 options", r.id));
                }
                let idx = r
                    .answer_key
                    .as_u64()
                    .ok_or_else(|| format!("{}: answer_key must be one option index", r.id))?
                    as usize;
                if idx >= r.options.len() {
                    return Err(format!("{}: answer_key {idx} out of range", r.id));
                }
                AnswerKey::Choice(idx)
            }
            ItemKind::Likert => {
                let scale = r.answer_key.get("scale").and_then(|v| v.as_str()).ok_or_else(
                    || format!("{}: likert answer_key needs a scale name", r.id),
                )?;
                let reverse = r.answer_key.get("reverse").and_then(|v| v.as_bool()).unwrap_or(false);
                AnswerKey::Scale { scale: scale.to_string(), reverse }
            }
            _ => {
                let s = r
                    .answer_key
                    .as_str()
                    .ok_or_else(|| format!("{}: answer_key must be a string", r.id))?;
                AnswerKey::Exact(s.to_string())
            }
        };
        Ok(Item {
            id: r.id,
            construct: r.construct,
            kind: r.kind,
            params,
            template: r.template,
            answer_key,
            options: r.options,
        })
    }
}

impl From<Item> for ItemRecord {
    fn from(item: Item) -> Self {
        let answer_key = match item.answer_key {
            AnswerKey::Choice(i) => serde_json::json!(i),
            AnswerKey::Exact(s) => serde_json::json!(s),
            AnswerKey::Scale { scale, reverse } => {
                serde_json::json!({ "scale": scale, "reverse": reverse })
            }
        };
        ItemRecord {
            id: item.id,
            construct: item.construct,
            kind: item.kind,
            a: item.params.a,
            b: item.params.b,
            template: item.template,
            answer_key,
            options: item.options,
        }
    }
}

fn normalize_answer(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect()
}

impl Item {
    /// A minimal two-option item; handy for tests and synthetic banks.
    pub fn multiple_choice(id: &str, construct: &str, params: ItemParams) -> Self {
        Item {
            id: id.to_string(),
            construct: construct.to_string(),
            kind: ItemKind::MultipleChoice,
            params,
            template: Template {
                blocks: vec![TemplateBlock {
                    text: format!("Question {id}"),
                    simple: None,
                    caption: None,
                }],
                slots: BTreeMap::new(),
            },
            answer_key: AnswerKey::Choice(0),
            options: vec!["yes".into(), "no".into()],
        }
    }

    /// Whether the item takes part in adaptive (IRT) selection.
    pub fn is_adaptive(&self) -> bool {
        self.kind != ItemKind::Likert
    }

    /// Score a raw answer. `None` for Likert items, which have no key.
    pub fn is_correct(&self, answer: &str) -> Option<bool> {
        match &self.answer_key {
            AnswerKey::Choice(idx) => {
                let answer = answer.trim();
                let by_index = answer.parse::<usize>().ok().map(|i| i == *idx);
                let by_text = self
                    .options
                    .iter()
                    .position(|o| normalize_answer(o) == normalize_answer(answer))
                    .map(|i| i == *idx);
                // option text first, so numeric option labels are not read as indices
                Some(by_text.or(by_index).unwrap_or(false))
            }
            AnswerKey::Exact(expected) => {
                Some(normalize_answer(expected) == normalize_answer(answer))
            }
            AnswerKey::Scale { .. } => None,
        }
    }

    /// Likert scale name and 1..=5 value (reverse-keyed items flipped).
    pub fn likert_value(&self, answer: &str) -> Option<(String, f64)> {
        match &self.answer_key {
            AnswerKey::Scale { scale, reverse } => {
                let v: u8 = answer.trim().parse().ok()?;
                if !(1..=5).contains(&v) {
                    return None;
                }
                let v = if *reverse { 6 - v } else { v };
                Some((scale.clone(), f64::from(v)))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BankFile {
    version: u32,
    items: Vec<Item>,
}

/// Immutable, validated collection of items.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemBank {
    version: u32,
    items: Vec<Item>,
    index: HashMap<String, usize>,
}

impl ItemBank {
    pub fn new(items: Vec<Item>) -> Result<Self, BankError> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.id.clone(), i).is_some() {
                return Err(BankError::DuplicateId(item.id.clone()));
            }
        }
        Ok(Self { version: BANK_FORMAT_VERSION, items, index })
    }

    pub fn from_json_str(text: &str) -> Result<Self, BankError> {
        let file: BankFile = serde_json::from_str(text).map_err(|e| BankError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.version != BANK_FORMAT_VERSION {
            return Err(BankError::Version(file.version));
        }
        Self::new(file.items)
    }

    pub fn to_json_string(&self) -> String {
        let file = BankFile { version: self.version, items: self.items.clone() };
        serde_json::to_string_pretty(&file).expect("bank serializes")
    }

    /// Reject items whose construct is not in `constructs`.
    pub fn require_constructs(&self, constructs: &[String]) -> Result<(), BankError> {
        let known: HashSet<&str> = constructs.iter().map(String::as_str).collect();
        match self.items.iter().find(|i| !known.contains(i.construct.as_str())) {
            Some(item) => Err(BankError::UnknownConstruct {
                item: item.id.clone(),
                construct: item.construct.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Distinct constructs in first-appearance order.
    pub fn constructs(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.items
            .iter()
            .filter(|i| seen.insert(i.construct.as_str()))
            .map(|i| i.construct.clone())
            .collect()
    }
}

/// Read and validate a bank file.
pub fn load_bank(path: impl AsRef<Path>) -> Result<ItemBank, BankError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| BankError::Io { path: path.display().to_string(), source })?;
    ItemBank::from_json_str(&text)
}

/// The 60-item sample bank shipped with the crate.
pub fn sample_bank() -> ItemBank {
    ItemBank::from_json_str(include_str!("../../data/sample_bank.json"))
        .expect("bundled bank is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    TooEasy,
    TooDifficult,
    LowDiscrimination,
    HighDiscrimination,
    LowCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankFlag {
    /// Offending item; `None` for construct-level flags.
    pub item: Option<String>,
    pub construct: String,
    pub reason: FlagReason,
    pub detail: String,
}

/// Psychometric review of a bank: difficulty outside `[-4, 4]`,
/// discrimination outside `[0.2, 3]`, and constructs with fewer than three
/// items. Constructs listed in `constructs` but absent from the bank are
/// flagged too.
pub fn validate_bank(bank: &ItemBank, constructs: &[String]) -> Vec<BankFlag> {
    let mut flags = Vec::new();
    for item in bank.items().iter().filter(|i| i.is_adaptive()) {
        let mut flag = |reason, detail: String| {
            flags.push(BankFlag {
                item: Some(item.id.clone()),
                construct: item.construct.clone(),
                reason,
                detail,
            })
        };
        let ItemParams { a, b } = item.params;
        if b > 4.0 {
            flag(FlagReason::TooDifficult, format!("b = {b} > 4"));
        } else if b < -4.0 {
            flag(FlagReason::TooEasy, format!("b = {b} < -4"));
        }
        if a < 0.2 {
            flag(FlagReason::LowDiscrimination, format!("a = {a} < 0.2"));
        } else if a > 3.0 {
            flag(FlagReason::HighDiscrimination, format!("a = {a} > 3"));
        }
    }
    let mut counts: BTreeMap<String, usize> =
        constructs.iter().map(|c| (c.clone(), 0)).collect();
    for item in bank.items() {
        *counts.entry(item.construct.clone()).or_default() += 1;
    }
    for (construct, n) in counts {
        if n < 3 {
            flags.push(BankFlag {
                item: None,
                construct,
                reason: FlagReason::LowCoverage,
                detail: format!("{n} items, need at least 3"),
            });
        }
    }
    flags
}
