use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::HandoverNote;
use crate::ids::{CaseId, CitizenId, PrincipalId, RecordId};
use crate::time::Timestamp;

/// Fraction of factual queries a successor must answer, rounded up.
pub const PASS_NUMERATOR: usize = 4;
pub const PASS_DENOMINATOR: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseVerdict {
    Provisional,
    Passed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum QueryKind {
    TaskStatus { task_id: String },
    Fact { index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactualQuery {
    pub query_id: String,
    pub kind: QueryKind,
    pub prompt: String,
    pub expected: String,
}

impl FactualQuery {
    /// Task status answers match exactly after trimming; fact answers must
    /// contain the statement, case-folded.
    pub fn accepts(&self, answer: &str) -> bool {
        match self.kind {
            QueryKind::TaskStatus { .. } => answer.trim() == self.expected.trim(),
            QueryKind::Fact { .. } => {
                let want = self.expected.trim().to_lowercase();
                !want.is_empty() && answer.to_lowercase().contains(&want)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Answer {
    pub query_id: String,
    pub answer: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternCitation {
    pub record_id: RecordId,
    pub application_context: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactualCheck {
    pub queries: Vec<FactualQuery>,
    pub answered: usize,
    pub required: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCheck {
    pub cited_record_id: Option<RecordId>,
    pub application_context: Option<String>,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InheritanceChecks {
    pub factual: FactualCheck,
    pub pattern: PatternCheck,
    pub audit: bool,
}

impl InheritanceChecks {
    pub fn all_satisfied(&self) -> bool {
        self.factual.answered >= self.factual.required && self.pattern.satisfied && self.audit
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InheritanceCase {
    pub case_id: CaseId,
    pub citizen_id: CitizenId,
    pub predecessor_instance: PrincipalId,
    pub successor_instance: PrincipalId,
    pub handover_record_id: RecordId,
    pub checks: InheritanceChecks,
    pub verdict: CaseVerdict,
    pub opened_at: Timestamp,
    /// Set when a retry replaces this case.
    #[serde(default)]
    pub closed: bool,
}

impl InheritanceCase {
    pub fn accepts_verification(&self) -> bool {
        !self.closed && matches!(self.verdict, CaseVerdict::Provisional | CaseVerdict::Failed)
    }
}

/// One query per unfinished task (its status) and one per fact.
pub fn generate_queries(note: &HandoverNote) -> Vec<FactualQuery> {
    let tasks = note.unfinished_tasks.iter().map(|t| {
        (
            QueryKind::TaskStatus { task_id: t.task_id.clone() },
            format!("What is the status of task {} ({})?", t.task_id, t.description),
            t.status.clone(),
        )
    });
    let facts = note.facts.iter().enumerate().map(|(i, f)| {
        let cites: Vec<&str> = f.supporting_record_ids.iter().map(|r| r.as_str()).collect();
        (
            QueryKind::Fact { index: i },
            format!("State the fact supported by records {}.", cites.join(", ")),
            f.statement.clone(),
        )
    });
    tasks
        .chain(facts)
        .enumerate()
        .map(|(i, (kind, prompt, expected))| FactualQuery {
            query_id: format!("q{}", i + 1),
            kind,
            prompt,
            expected,
        })
        .collect()
}

pub fn required_answers(queries: usize) -> usize {
    (queries * PASS_NUMERATOR).div_ceil(PASS_DENOMINATOR)
}

/// Number of distinct queries answered correctly, or the first unknown
/// query id.
pub fn count_correct(queries: &[FactualQuery], answers: &[Answer]) -> Result<usize, String> {
    let mut correct = BTreeSet::new();
    for a in answers {
        let q = queries
            .iter()
            .find(|q| q.query_id == a.query_id)
            .ok_or_else(|| a.query_id.clone())?;
        if q.accepts(&a.answer) {
            correct.insert(q.query_id.as_str());
        }
    }
    Ok(correct.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifecycle::{Fact, UnfinishedTask};

    fn note(tasks: usize, facts: usize) -> HandoverNote {
        HandoverNote {
            unfinished_tasks: (0..tasks)
                .map(|i| UnfinishedTask {
                    task_id: format!("t{i}"),
                    description: "d".into(),
                    status: "in progress".into(),
                })
                .collect(),
            facts: (0..facts)
                .map(|i| Fact {
                    statement: format!("Fact number {i}"),
                    supporting_record_ids: vec![RecordId::new("r")],
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn three_tasks_two_facts() {
        let qs = generate_queries(&note(3, 2));
        assert_eq!(qs.len(), 5);
        assert_eq!(required_answers(qs.len()), 4);
    }

    #[test]
    fn threshold_is_ceiling_of_eighty_percent() {
        for n in 0..60usize {
            let oracle = (0..=n).find(|k| 5 * k >= 4 * n).unwrap();
            assert_eq!(required_answers(n), oracle, "n={n}");
        }
    }

    #[test]
    fn matching_rules() {
        let qs = generate_queries(&note(1, 1));
        assert!(qs[0].accepts("  in progress "));
        assert!(!qs[0].accepts("In Progress"));
        assert!(qs[1].accepts("I recall that FACT NUMBER 0 holds"));
        assert!(!qs[1].accepts("fact number"));
    }

    #[test]
    fn counting_dedups_and_rejects_unknown_ids() {
        let qs = generate_queries(&note(2, 0));
        let a = |q: &str, s: &str| Answer { query_id: q.into(), answer: s.into() };
        assert_eq!(count_correct(&qs, &[a("q1", "in progress"), a("q1", "in progress")]), Ok(1));
        assert_eq!(count_correct(&qs, &[a("q7", "x")]), Err("q7".into()));
    }
}
