use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::RecordId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnfinishedTask {
    pub task_id: String,
    pub description: String,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fact {
    pub statement: String,
    pub supporting_record_ids: Vec<RecordId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvisionalJudgment {
    pub statement: String,
    pub uncertainty_tag: String,
}

/// What a terminating instance leaves for its successor. Stored as the
/// canonical JSON content of one T3 record.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverNote {
    #[serde(default)]
    pub unfinished_tasks: Vec<UnfinishedTask>,
    #[serde(default)]
    pub open_questions: Vec<String>,
    #[serde(default)]
    pub cognitive_state: String,
    #[serde(default)]
    pub flagged_ambiguities: Vec<String>,
    #[serde(default)]
    pub facts: Vec<Fact>,
    #[serde(default)]
    pub provisional_judgments: Vec<ProvisionalJudgment>,
}

impl HandoverNote {
    pub fn is_empty(&self) -> bool {
        self.unfinished_tasks.is_empty() && self.facts.is_empty() && self.open_questions.is_empty()
    }

    /// Structural problems, independent of the ledger. `exists` reports
    /// whether a cited record is in the citizen's ledger.
    pub fn problems(&self, exists: impl Fn(&RecordId) -> bool) -> Vec<String> {
        let mut out = Vec::new();
        let mut task_ids = BTreeSet::new();
        for t in &self.unfinished_tasks {
            if t.task_id.trim().is_empty() || t.status.trim().is_empty() {
                out.push("every task needs a task_id and a status".to_string());
            }
            if !task_ids.insert(t.task_id.as_str()) {
                out.push(format!("duplicate task_id {:?}", t.task_id));
            }
        }
        for f in &self.facts {
            if f.statement.trim().is_empty() {
                out.push("fact with an empty statement".to_string());
            }
            if f.supporting_record_ids.is_empty() {
                out.push(format!("fact {:?} cites no supporting record", f.statement));
            }
            for r in &f.supporting_record_ids {
                if !exists(r) {
                    out.push(format!("fact {:?} cites unknown record {r}", f.statement));
                }
            }
        }
        let facts: BTreeSet<&str> = self.facts.iter().map(|f| f.statement.trim()).collect();
        for j in &self.provisional_judgments {
            if j.uncertainty_tag.trim().is_empty() {
                out.push(format!("judgment {:?} has no uncertainty tag", j.statement));
            }
            if facts.contains(j.statement.trim()) {
                out.push(format!("{:?} is listed as both fact and judgment", j.statement));
            }
        }
        out
    }
}
