//! Prompt construction from the shipped templates and parsing of model
//! completions back into reasoning text, layouts and judge scores.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scene::{layout_from_value, Layout, SceneError, TaskSpec};

pub const GENERATE_SYSTEM: &str = include_str!("../templates/generate.system.txt");
pub const GENERATE_USER: &str = include_str!("../templates/generate.user.txt");
pub const EDIT_SYSTEM: &str = include_str!("../templates/edit.system.txt");
pub const EDIT_USER: &str = include_str!("../templates/edit.user.txt");
pub const JUDGE_SYSTEM: &str = include_str!("../templates/judge.system.txt");
pub const JUDGE_USER: &str = include_str!("../templates/judge.user.txt");
pub const SUMMARIZE_SYSTEM: &str = include_str!("../templates/summarize.system.txt");
pub const SUMMARIZE_USER: &str = include_str!("../templates/summarize.user.txt");

/// Bumped whenever a template file changes.
pub const TEMPLATE_VERSION: &str = "1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("object `{0}` has no bounding box size; resolve sizes first")]
    UnresolvedSize(String),
    #[error("unsupported edit instruction `{0}`: only additions (add/place/put) and removals (remove/delete/take) are supported")]
    UnsupportedEdit(String),
    #[error("template placeholder `{0}` has no value")]
    MissingPlaceholder(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("completion has no <answer> or [Design] block")]
    NoAnswerBlock,
    #[error("malformed layout at byte {offset}: {message}")]
    MalformedLayout { offset: usize, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("malformed score block: {0}")]
    MalformedScore(String),
    #[error("`{field}` = {value} is outside 0..=10")]
    Range { field: String, value: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Generate,
    Edit,
    Judge,
    Summarize,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Generate => "generate",
            TemplateId::Edit => "edit",
            TemplateId::Judge => "judge",
            TemplateId::Summarize => "summarize",
        }
    }
}

impl std::str::FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generate" => Ok(Self::Generate),
            "edit" => Ok(Self::Edit),
            "judge" => Ok(Self::Judge),
            "summarize" => Ok(Self::Summarize),
            _ => Err(format!("unknown template `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Add,
    Remove,
}

/// The structured input a prompt was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundInput {
    Task {
        task: TaskSpec,
    },
    Edit {
        layout: Layout,
        instruction: String,
        edit: EditKind,
    },
    Judge {
        layout: Layout,
        preferences: String,
    },
    Summary {
        layout: Layout,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: TemplateId,
    pub system_text: String,
    pub user_text: String,
    pub bound: BoundInput,
}

impl PromptBundle {
    /// Hex SHA-256 over the template id and both message texts.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.template_id.as_str().as_bytes());
        h.update([0]);
        h.update(self.system_text.as_bytes());
        h.update([0]);
        h.update(self.user_text.as_bytes());
        hex::encode(h.finalize())
    }

    /// System and user text as one block, as written to exports.
    pub fn full_text(&self) -> String {
        format!("{}\n{}", self.system_text.trim_end(), self.user_text)
    }
}

/// Substitutes `{{name}}` slots. Substituted values are not rescanned.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let Some(len) = rest[start + 2..].find("}}") else {
            break;
        };
        let name = &rest[start + 2..start + 2 + len];
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            out.push_str(&rest[..start + 2]);
            rest = &rest[start + 2..];
            continue;
        }
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::MissingPlaceholder(name.to_string()))?;
        out.push_str(&rest[..start]);
        out.push_str(value);
        rest = &rest[start + 2 + len + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

fn room_area_json(layout_floor: &crate::scene::FloorPlan) -> String {
    let verts: Vec<[f64; 2]> = layout_floor.vertices().iter().map(|p| [p.x, p.y]).collect();
    json!({ "floor_vertices": verts, "area_m2": round6(layout_floor.area()) }).to_string()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Generation prompt for a task whose sizes are all resolved.
pub fn build_generation_prompt(task: &TaskSpec) -> Result<PromptBundle, PromptError> {
    let mut rows = Vec::with_capacity(task.objects.len());
    for o in &task.objects {
        let size = o
            .size
            .ok_or_else(|| PromptError::UnresolvedSize(o.description.clone()))?;
        rows.push(
            json!({
                "description": o.description,
                "quantity": o.quantity,
                "bbox": { "width": size.width, "depth": size.depth, "height": size.height },
            })
            .to_string(),
        );
    }
    let objects = format!("[\n  {}\n]", rows.join(",\n  "));
    let user_text = render(
        GENERATE_USER,
        &[
            ("room_type", task.room_type.display_name()),
            ("room_area", &room_area_json(&task.floor)),
            ("objects", &objects),
        ],
    )?;
    Ok(PromptBundle {
        template_id: TemplateId::Generate,
        system_text: GENERATE_SYSTEM.to_string(),
        user_text,
        bound: BoundInput::Task { task: task.clone() },
    })
}

/// Classifies an edit instruction by its leading verb. A leading "please" is skipped.
pub fn classify_edit(instruction: &str) -> Option<EditKind> {
    let mut words = instruction
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty());
    let mut verb = words.next()?;
    if verb == "please" {
        verb = words.next()?;
    }
    match verb.as_str() {
        "add" | "place" | "put" => Some(EditKind::Add),
        "remove" | "delete" | "take" => Some(EditKind::Remove),
        _ => None,
    }
}

pub fn build_edit_prompt(layout: &Layout, instruction: &str) -> Result<PromptBundle, PromptError> {
    let edit = classify_edit(instruction).ok_or_else(|| PromptError::UnsupportedEdit(instruction.to_string()))?;
    let directive = match edit {
        EditKind::Add => "Add the object(s) the [Instruction] asks for. Give each new object a new unique instance_id, its description, a bbox with width, depth and height in meters, coordinates and a rotation, placing it where the instruction indicates.",
        EditKind::Remove => "Remove the object(s) the [Instruction] refers to from the layout. Do not add any new objects.",
    };
    let layout_json = crate::scene::serialize_layout(layout);
    let user_text = render(
        EDIT_USER,
        &[
            ("directive", directive),
            ("room_type", layout.room_type.display_name()),
            ("layout", &layout_json),
            ("instruction", instruction.trim()),
        ],
    )?;
    Ok(PromptBundle {
        template_id: TemplateId::Edit,
        system_text: EDIT_SYSTEM.to_string(),
        user_text,
        bound: BoundInput::Edit {
            layout: layout.clone(),
            instruction: instruction.to_string(),
            edit,
        },
    })
}

pub fn build_judge_prompt(layout: &Layout, preferences: &str) -> PromptBundle {
    let layout_json = crate::scene::serialize_layout(layout);
    let user_text = render(
        JUDGE_USER,
        &[("preferences", preferences), ("layout", &layout_json)],
    )
    .expect("judge template slots are fixed");
    PromptBundle {
        template_id: TemplateId::Judge,
        system_text: JUDGE_SYSTEM.to_string(),
        user_text,
        bound: BoundInput::Judge {
            layout: layout.clone(),
            preferences: preferences.to_string(),
        },
    }
}

pub fn build_summary_prompt(layout: &Layout) -> PromptBundle {
    let rows: Vec<String> = layout
        .objects
        .iter()
        .map(|o| {
            let p = o.placement.position;
            json!({
                "instance_id": o.instance_id,
                "description": o.description,
                "bbox": { "width": o.size.width, "depth": o.size.depth, "height": o.size.height },
                "coordinates": { "x": p.x, "y": p.y, "z": p.z },
                "rotate": { "angle": o.placement.rotation() },
            })
            .to_string()
        })
        .collect();
    let objects = format!("[\n  {}\n]", rows.join(",\n  "));
    let user_text = render(
        SUMMARIZE_USER,
        &[
            ("room_type", &layout.room_type.display_name().to_lowercase()),
            ("room_area", &room_area_json(&layout.floor)),
            ("objects", &objects),
        ],
    )
    .expect("summary template slots are fixed");
    PromptBundle {
        template_id: TemplateId::Summarize,
        system_text: SUMMARIZE_SYSTEM.to_string(),
        user_text,
        bound: BoundInput::Summary {
            layout: layout.clone(),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionParse {
    pub reasoning: String,
    pub layout: Layout,
    pub raw: String,
}

/// Renders reasoning and a layout in the tagged response format.
pub fn format_completion(reasoning: &str, layout: &Layout) -> String {
    format!(
        "<reasoning>\n[Reason]\n{}\n[/Reason]\n</reasoning>\n<answer>\n[Design]\n{}\n[/Design]\n</answer>\n",
        reasoning.trim(),
        crate::scene::serialize_layout(layout)
    )
}

/// Byte range of the text between `open` and `close` (ASCII, case-insensitive).
/// A missing closing tag extends the range to the end of the text.
fn tagged<'a>(text: &'a str, lower: &str, open: &str, close: &str) -> Option<(usize, &'a str)> {
    let start = lower.find(open)? + open.len();
    let end = lower[start..].find(close).map_or(text.len(), |e| start + e);
    Some((start, &text[start..end]))
}

fn strip_markers(s: &str, markers: &[&str]) -> String {
    let mut out = s.to_string();
    for m in markers {
        loop {
            let lower = out.to_ascii_lowercase();
            match lower.find(m) {
                Some(i) => out.replace_range(i..i + m.len(), ""),
                None => break,
            }
        }
    }
    out.trim().to_string()
}

fn extract_reasoning(text: &str, lower: &str) -> String {
    let inner = tagged(text, lower, "<reasoning>", "</reasoning>")
        .or_else(|| tagged(text, lower, "[reason]", "[/reason]"));
    match inner {
        Some((_, s)) => strip_markers(s, &["[reason]", "[/reason]"]),
        None => String::new(),
    }
}

#[derive(Debug)]
enum Scan {
    /// Balanced span `[start, end)`.
    Closed(usize),
    /// Mismatched closer.
    Broken,
    /// Ran off the end of the input.
    Truncated,
}

/// Finds the end of the JSON-like value opening at `start`, respecting strings.
fn scan_balanced(bytes: &[u8], start: usize) -> Scan {
    let mut stack: Vec<u8> = Vec::new();
    let mut i = start;
    let mut in_string = false;
    while i < bytes.len() {
        let b = bytes[i];
        if in_string {
            match b {
                b'\\' => i += 1,
                b'"' => in_string = false,
                _ => {}
            }
        } else {
            match b {
                b'"' => in_string = true,
                b'{' => stack.push(b'}'),
                b'[' => stack.push(b']'),
                b'}' | b']' => {
                    if stack.pop() != Some(b) {
                        return Scan::Broken;
                    }
                    if stack.is_empty() {
                        return Scan::Closed(i + 1);
                    }
                }
                _ => {}
            }
        }
        i += 1;
    }
    Scan::Truncated
}

/// JSON values found in `text`, in order, with their byte offsets. Spans
/// that parse are skipped over as a whole.
fn json_values(text: &str) -> (Vec<(usize, Value)>, Vec<(usize, String)>) {
    let bytes = text.as_bytes();
    let mut values = Vec::new();
    let mut failures = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'{' && bytes[i] != b'[' {
            i += 1;
            continue;
        }
        match scan_balanced(bytes, i) {
            Scan::Closed(end) => match serde_json::from_str::<Value>(&text[i..end]) {
                Ok(v) => {
                    values.push((i, v));
                    i = end;
                    continue;
                }
                Err(e) => failures.push((i, format!("invalid JSON: {e}"))),
            },
            Scan::Truncated => failures.push((i, "unterminated JSON value".to_string())),
            Scan::Broken => failures.push((i, "mismatched brackets".to_string())),
        }
        i += 1;
    }
    (values, failures)
}

/// Unwraps payloads that echo the input next to the layout.
fn unwrap_echo(v: &Value) -> &Value {
    for key in ["layout", "design", "answer", "output"] {
        if let Some(inner) = v.get(key) {
            if inner.is_object() || inner.is_array() {
                return inner;
            }
        }
    }
    v
}

fn parse_with(text: &str, task: Option<&TaskSpec>) -> Result<CompletionParse, ParseError> {
    let lower = text.to_ascii_lowercase();
    let reasoning = extract_reasoning(text, &lower);
    let (offset, answer) = tagged(text, &lower, "<answer>", "</answer>")
        .or_else(|| tagged(text, &lower, "[design]", "[/design]"))
        .ok_or(ParseError::NoAnswerBlock)?;
    let (values, failures) = json_values(answer);
    let mut first_error: Option<(usize, String)> = None;
    for (pos, v) in &values {
        match layout_from_value(unwrap_echo(v), task) {
            Ok(layout) => {
                return Ok(CompletionParse {
                    reasoning,
                    layout,
                    raw: text.to_string(),
                })
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some((*pos, e.to_string()));
                }
            }
        }
    }
    let (pos, message) = first_error
        .into_iter()
        .chain(failures)
        .min_by_key(|(pos, _)| *pos)
        .unwrap_or((0, "no JSON layout found".to_string()));
    Err(ParseError::MalformedLayout {
        offset: offset + pos,
        message,
    })
}

/// Parses a completion whose answer holds a full layout document.
pub fn parse_completion(text: &str) -> Result<CompletionParse, ParseError> {
    parse_with(text, None)
}

/// Parses a completion for `task`: the answer may omit the room, floor,
/// instance ids and boxes, which are filled in from the task.
pub fn parse_completion_for_task(text: &str, task: &TaskSpec) -> Result<CompletionParse, ParseError> {
    parse_with(text, Some(task))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub functionality: u8,
    pub layout: u8,
    pub aesthetics: u8,
    pub overall: u8,
    pub comments: String,
}

pub fn parse_judge(text: &str) -> Result<JudgeScore, JudgeError> {
    let (values, _) = json_values(text);
    let obj = find_score_object(values.iter().map(|(_, v)| v))
        .ok_or_else(|| JudgeError::MalformedScore("no object with `functionality_score`".into()))?;
    let score = |field: &str| -> Result<u8, JudgeError> {
        let v = obj
            .get(field)
            .ok_or_else(|| JudgeError::MalformedScore(format!("missing `{field}`")))?;
        let n = v
            .as_i64()
            .ok_or_else(|| JudgeError::MalformedScore(format!("`{field}` is not an integer")))?;
        if !(0..=10).contains(&n) {
            return Err(JudgeError::Range {
                field: field.to_string(),
                value: n,
            });
        }
        Ok(n as u8)
    };
    let comments = obj
        .get("comments")
        .and_then(Value::as_str)
        .ok_or_else(|| JudgeError::MalformedScore("missing `comments`".into()))?
        .to_string();
    Ok(JudgeScore {
        functionality: score("functionality_score")?,
        layout: score("layout_score")?,
        aesthetics: score("aesthetics_score")?,
        overall: score("overall_score")?,
        comments,
    })
}

fn find_score_object<'a>(values: impl Iterator<Item = &'a Value>) -> Option<&'a Value> {
    fn search(v: &Value) -> Option<&Value> {
        match v {
            Value::Object(m) if m.contains_key("functionality_score") => Some(v),
            Value::Object(m) => m.values().find_map(search),
            Value::Array(a) => a.iter().find_map(search),
            _ => None,
        }
    }
    values.into_iter().find_map(search)
}

/// A scene error surfaced while converting a parsed answer.
impl From<SceneError> for ParseError {
    fn from(e: SceneError) -> Self {
        ParseError::MalformedLayout {
            offset: 0,
            message: e.to_string(),
        }
    }
}
