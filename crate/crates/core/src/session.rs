//! Editing sessions and the JSON shapes exchanged with the service.

use serde::{Deserialize, Serialize};

use crate::eval::ValidationReport;
use crate::scene::{Layout, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Generate,
    Edit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub kind: EntryKind,
    /// Empty for the initial generation.
    pub instruction: String,
    pub layout: Layout,
    pub report: ValidationReport,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub task: TaskSpec,
    pub history: Vec<HistoryEntry>,
}

impl Session {
    pub fn new(session_id: impl Into<String>, task: TaskSpec) -> Self {
        Self {
            session_id: session_id.into(),
            task,
            history: Vec::new(),
        }
    }

    pub fn current_layout(&self) -> Option<&Layout> {
        self.history.last().map(|e| &e.layout)
    }

    pub fn instructions(&self) -> impl Iterator<Item = &str> {
        self.history.iter().filter(|e| e.kind == EntryKind::Edit).map(|e| e.instruction.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub task: TaskSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRequest {
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
}

/// Response to generate and edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub layout: Layout,
    pub report: ValidationReport,
    pub reasoning: String,
    pub history_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

/// One line of the write-ahead log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Create { session_id: String, task: TaskSpec },
    Append { session_id: String, entry: HistoryEntry },
}
