//! Session lifecycle, screening and aggregation over an append-only event log.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use accent_eval_core::stats::{preference_test, PreferenceResult, PreferenceSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ListenError;
use crate::model::{
    merge_spans, Choice, HighlightSpan, ItemAnswer, ItemKind, OrderEntry, ScreeningOverride, ScreeningReason,
    ScreeningResult, Submission, TestDefinition,
};

type Result<T> = std::result::Result<T, ListenError>;

/// One line of the on-disk log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    TestCreated {
        definition: TestDefinition,
    },
    SessionCreated {
        token: String,
        test_id: String,
        listener_id: String,
        order: Vec<OrderEntry>,
        #[serde(default)]
        listener_metadata: BTreeMap<String, String>,
    },
    ItemSubmitted {
        token: String,
        answer: ItemAnswer,
    },
    Finalized {
        token: String,
        submission: Submission,
    },
    ScreeningOverridden {
        submission_id: String,
        #[serde(rename = "override")]
        decision: ScreeningOverride,
    },
}

#[derive(Debug, Clone)]
struct Session {
    test_id: String,
    listener_id: String,
    order: Vec<OrderEntry>,
    listener_metadata: BTreeMap<String, String>,
    answers: Vec<ItemAnswer>,
    submission_id: Option<String>,
}

impl Session {
    fn answered(&self, item_id: &str) -> bool {
        self.answers.iter().any(|a| a.item_id == item_id)
    }
}

#[derive(Debug, Default)]
struct State {
    tests: BTreeMap<String, TestDefinition>,
    sessions: HashMap<String, Session>,
    /// (test_id, listener_id) and (exclusive group, listener_id) already taken.
    taken: HashSet<(String, String)>,
    submissions: BTreeMap<String, Submission>,
    /// Finalization order.
    submission_order: Vec<String>,
}

impl State {
    fn apply(&mut self, event: Event) {
        match event {
            Event::TestCreated { definition } => {
                self.tests.insert(definition.test_id.clone(), definition);
            }
            Event::SessionCreated {
                token,
                test_id,
                listener_id,
                order,
                listener_metadata,
            } => {
                self.taken.insert((test_id.clone(), listener_id.clone()));
                if let Some(g) = self.tests.get(&test_id).and_then(|t| t.exclusive_group.clone()) {
                    self.taken.insert((group_key(&g), listener_id.clone()));
                }
                self.sessions.insert(
                    token,
                    Session {
                        test_id,
                        listener_id,
                        order,
                        listener_metadata,
                        answers: Vec::new(),
                        submission_id: None,
                    },
                );
            }
            Event::ItemSubmitted { token, answer } => {
                if let Some(s) = self.sessions.get_mut(&token) {
                    s.answers.push(answer);
                }
            }
            Event::Finalized { token, submission } => {
                if let Some(s) = self.sessions.get_mut(&token) {
                    s.submission_id = Some(submission.submission_id.clone());
                }
                self.submission_order.push(submission.submission_id.clone());
                self.submissions.insert(submission.submission_id.clone(), submission);
            }
            Event::ScreeningOverridden { submission_id, decision } => {
                if let Some(s) = self.submissions.get_mut(&submission_id) {
                    s.manual_override = Some(decision);
                }
            }
        }
    }
}

fn group_key(group: &str) -> String {
    format!("group:{group}")
}

/// Screen position draw: true when candidate B is shown in slot A.
pub fn ab_swapped(test_seed: u64, item_seed: u64, listener_id: &str, item_id: &str) -> bool {
    let mut h = Sha256::new();
    h.update(test_seed.to_le_bytes());
    h.update(item_seed.to_le_bytes());
    h.update(listener_id.as_bytes());
    h.update([0u8]);
    h.update(item_id.as_bytes());
    h.finalize()[0] & 1 == 1
}

/// Real items in definition order, attention items spread evenly between them.
pub fn presentation_order(def: &TestDefinition, listener_id: &str) -> Vec<OrderEntry> {
    let n = def.items.len();
    let m = def.attention_items.len();
    let entry = |item: &crate::model::XabItem, kind| OrderEntry {
        item_id: item.item_id.clone(),
        kind,
        swapped: ab_swapped(def.seed, item.ab_assignment_seed, listener_id, &item.item_id),
    };
    let mut order = Vec::with_capacity(n + m);
    let mut next_attention = 0;
    for (i, item) in def.items.iter().enumerate() {
        while next_attention < m && (next_attention + 1) * n / (m + 1) == i {
            order.push(entry(&def.attention_items[next_attention].item, ItemKind::Attention));
            next_attention += 1;
        }
        order.push(entry(item, ItemKind::Real));
    }
    for a in &def.attention_items[next_attention..] {
        order.push(entry(&a.item, ItemKind::Attention));
    }
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub token: String,
    pub test_id: String,
    pub listener_id: String,
    pub item_order: Vec<String>,
}

/// What the listener sees next. Candidate slots are already randomized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextItem {
    pub done: bool,
    pub position: usize,
    pub total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub item: Option<ItemView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aid_prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub item_id: String,
    pub instructions: String,
    pub reference_audio_id: String,
    pub a_audio_id: String,
    pub b_audio_id: String,
    pub transcript: Option<String>,
    pub require_highlight: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListenerPreference {
    pub listener_id: String,
    pub submission_id: String,
    pub valid: bool,
    /// Share of real items on which candidate A was chosen.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub test_id: String,
    pub only_valid: bool,
    pub listeners: Vec<ListenerPreference>,
    /// Per item, per transcript character: number of submissions highlighting it.
    pub highlight_histogram: BTreeMap<String, Vec<u32>>,
    /// `None` when no submission qualifies.
    pub stats: Option<PreferenceResult>,
}

impl Aggregate {
    pub fn preference_set(&self) -> Option<PreferenceSet> {
        PreferenceSet::new(self.listeners.iter().map(|l| l.proportion).collect()).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub test_id: String,
    pub valid_count: usize,
    pub invalid_count: usize,
    /// invalid / (valid + invalid); `None` before the first submission.
    pub rejection_rate: Option<f64>,
    pub target: u32,
    pub complete: bool,
}

struct Inner {
    state: State,
    log: Option<BufWriter<File>>,
}

impl Inner {
    fn commit(&mut self, event: Event) -> Result<()> {
        if let Some(log) = &mut self.log {
            let line = serde_json::to_string(&event).map_err(std::io::Error::other)?;
            writeln!(log, "{line}")?;
            log.flush()?;
        }
        self.state.apply(event);
        Ok(())
    }
}

/// The listening-test store. All mutations go through one writer.
pub struct ListenService {
    inner: Mutex<Inner>,
}

impl Default for ListenService {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl ListenService {
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(Inner {
                state: State::default(),
                log: None,
            }),
        }
    }

    /// Replays an existing log (if any) and appends new events to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut state = State::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line).map_err(|e| ListenError::CorruptLog {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
                state.apply(event);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        log::info!(
            "opened store {} with {} tests, {} submissions",
            path.display(),
            state.tests.len(),
            state.submissions.len()
        );
        Ok(Self {
            inner: Mutex::new(Inner {
                state,
                log: Some(BufWriter::new(file)),
            }),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        // a panic mid-operation leaves state untouched because events apply last
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn create_test(&self, definition: TestDefinition) -> Result<()> {
        definition.validate()?;
        let mut inner = self.lock();
        if inner.state.tests.contains_key(&definition.test_id) {
            return Err(ListenError::Conflict(format!("test {:?} already exists", definition.test_id)));
        }
        inner.commit(Event::TestCreated { definition })
    }

    pub fn test(&self, test_id: &str) -> Option<TestDefinition> {
        self.lock().state.tests.get(test_id).cloned()
    }

    pub fn create_session(&self, test_id: &str, listener_id: &str) -> Result<SessionInfo> {
        self.create_session_with(test_id, listener_id, BTreeMap::new())
    }

    /// As [`Self::create_session`], keeping opaque recruitment metadata with the submission.
    pub fn create_session_with(
        &self,
        test_id: &str,
        listener_id: &str,
        listener_metadata: BTreeMap<String, String>,
    ) -> Result<SessionInfo> {
        if listener_id.trim().is_empty() {
            return Err(ListenError::Validation("listener_id is empty".into()));
        }
        let mut inner = self.lock();
        let def = inner
            .state
            .tests
            .get(test_id)
            .ok_or_else(|| ListenError::NotFound(format!("test {test_id:?}")))?;
        if inner.state.taken.contains(&(test_id.to_string(), listener_id.to_string())) {
            return Err(ListenError::Conflict(format!(
                "listener {listener_id:?} already has a session for test {test_id:?}"
            )));
        }
        if let Some(g) = &def.exclusive_group {
            if inner.state.taken.contains(&(group_key(g), listener_id.to_string())) {
                return Err(ListenError::Conflict(format!(
                    "listener {listener_id:?} already took a test in group {g:?}"
                )));
            }
        }
        let order = presentation_order(def, listener_id);
        let mut h = Sha256::new();
        h.update(test_id.as_bytes());
        h.update([0u8]);
        h.update(listener_id.as_bytes());
        h.update(def.seed.to_le_bytes());
        let token = hex::encode(&h.finalize()[..16]);
        let info = SessionInfo {
            token: token.clone(),
            test_id: test_id.to_string(),
            listener_id: listener_id.to_string(),
            item_order: order.iter().map(|e| e.item_id.clone()).collect(),
        };
        inner.commit(Event::SessionCreated {
            token,
            test_id: test_id.to_string(),
            listener_id: listener_id.to_string(),
            order,
            listener_metadata,
        })?;
        Ok(info)
    }

    pub fn next_item(&self, token: &str) -> Result<NextItem> {
        let inner = self.lock();
        let session = inner
            .state
            .sessions
            .get(token)
            .ok_or_else(|| ListenError::NotFound(format!("session {token:?}")))?;
        let def = &inner.state.tests[&session.test_id];
        let total = session.order.len();
        let pending = session.order.iter().position(|e| !session.answered(&e.item_id));
        let Some(pos) = pending else {
            return Ok(NextItem {
                done: true,
                position: total,
                total,
                item: None,
                aid_prompt: def.aid_question.as_ref().map(|q| q.prompt.clone()),
            });
        };
        let entry = &session.order[pos];
        let (item, _) = def.find_item(&entry.item_id).expect("order only holds known items");
        let (a, b) = if entry.swapped {
            (&item.candidate_b_audio_id, &item.candidate_a_audio_id)
        } else {
            (&item.candidate_a_audio_id, &item.candidate_b_audio_id)
        };
        Ok(NextItem {
            done: false,
            position: pos,
            total,
            item: Some(ItemView {
                item_id: item.item_id.clone(),
                instructions: def.instructions.clone(),
                reference_audio_id: item.reference_audio_id.clone(),
                a_audio_id: a.clone(),
                b_audio_id: b.clone(),
                transcript: def.variant.show_transcript.then(|| item.transcript.clone()),
                // same flag for every slot so attention items are not recognizable
                require_highlight: def.variant.require_highlight,
            }),
            aid_prompt: None,
        })
    }

    pub fn submit_item(
        &self,
        token: &str,
        item_id: &str,
        screen_choice: Choice,
        highlights: &[HighlightSpan],
        elapsed_ms: u64,
    ) -> Result<ItemAnswer> {
        let mut inner = self.lock();
        let session = inner
            .state
            .sessions
            .get(token)
            .ok_or_else(|| ListenError::NotFound(format!("session {token:?}")))?;
        if session.submission_id.is_some() {
            return Err(ListenError::Conflict("session already finalized".into()));
        }
        let entry = session
            .order
            .iter()
            .find(|e| e.item_id == item_id)
            .ok_or_else(|| ListenError::NotFound(format!("item {item_id:?} in this session")))?;
        if session.answered(item_id) {
            return Err(ListenError::Conflict(format!("item {item_id:?} already answered; revisions are not allowed")));
        }
        let def = &inner.state.tests[&session.test_id];
        let (item, expected) = def.find_item(item_id).expect("order only holds known items");
        let len = item.transcript_len();
        if !highlights.is_empty() && !def.variant.show_transcript {
            return Err(ListenError::Validation("highlights need a visible transcript".into()));
        }
        if let Some(bad) = highlights
            .iter()
            .find(|s| s.char_start >= s.char_end || s.char_end > len)
        {
            return Err(ListenError::Validation(format!(
                "span ({}, {}) invalid for a transcript of {len} characters",
                bad.char_start, bad.char_end
            )));
        }
        let merged = merge_spans(highlights);
        if def.variant.require_highlight && entry.kind == ItemKind::Real && merged.is_empty() {
            return Err(ListenError::Validation(
                "require_highlight: at least one highlighted span is required on this item".into(),
            ));
        }
        let choice = if entry.swapped { screen_choice.flipped() } else { screen_choice };
        let answer = ItemAnswer {
            item_id: item_id.to_string(),
            screen_choice,
            choice,
            swapped: entry.swapped,
            elapsed_ms,
            highlights: merged,
            attention_passed: expected.map(|e| e == choice),
        };
        inner.commit(Event::ItemSubmitted {
            token: token.to_string(),
            answer: answer.clone(),
        })?;
        Ok(answer)
    }

    pub fn finalize(&self, token: &str, aid_answer: &str) -> Result<Submission> {
        self.finalize_at(token, aid_answer, chrono::Utc::now().to_rfc3339())
    }

    pub fn finalize_at(&self, token: &str, aid_answer: &str, completed_at: String) -> Result<Submission> {
        let mut inner = self.lock();
        let session = inner
            .state
            .sessions
            .get(token)
            .ok_or_else(|| ListenError::NotFound(format!("session {token:?}")))?;
        if session.submission_id.is_some() {
            return Err(ListenError::Conflict("session already finalized".into()));
        }
        let missing = session.order.iter().filter(|e| !session.answered(&e.item_id)).count();
        if missing > 0 {
            return Err(ListenError::State(format!("{missing} item(s) still unanswered")));
        }
        let def = &inner.state.tests[&session.test_id];
        let mut reasons = Vec::new();
        let failed: Vec<String> = session
            .answers
            .iter()
            .filter(|a| a.attention_passed == Some(false))
            .map(|a| a.item_id.clone())
            .collect();
        if !failed.is_empty() {
            reasons.push(ScreeningReason::AttentionFailed { item_ids: failed });
        }
        if let Some(aid) = &def.aid_question {
            let answer = aid_answer.to_lowercase();
            if !aid.accepted_keywords.iter().any(|k| answer.contains(k.as_str())) {
                reasons.push(ScreeningReason::AidFailed {
                    aid_answer: aid_answer.to_string(),
                });
            }
        }
        let submission_id = format!("sub-{}", &token[..token.len().min(16)]);
        let submission = Submission {
            submission_id,
            test_id: session.test_id.clone(),
            listener_id: session.listener_id.clone(),
            answers: session.answers.clone(),
            aid_answer: aid_answer.to_string(),
            screening: ScreeningResult {
                valid: reasons.is_empty(),
                reasons,
            },
            completed_at,
            manual_override: None,
            listener_metadata: session.listener_metadata.clone(),
        };
        inner.commit(Event::Finalized {
            token: token.to_string(),
            submission: submission.clone(),
        })?;
        Ok(submission)
    }

    /// Records a manual adjudication; the automatic screening result is kept alongside.
    pub fn override_screening(&self, submission_id: &str, decision: ScreeningOverride) -> Result<Submission> {
        let mut inner = self.lock();
        if !inner.state.submissions.contains_key(submission_id) {
            return Err(ListenError::NotFound(format!("submission {submission_id:?}")));
        }
        inner.commit(Event::ScreeningOverridden {
            submission_id: submission_id.to_string(),
            decision,
        })?;
        Ok(inner.state.submissions[submission_id].clone())
    }

    pub fn submission(&self, submission_id: &str) -> Option<Submission> {
        self.lock().state.submissions.get(submission_id).cloned()
    }

    pub fn submissions(&self, test_id: &str) -> Vec<Submission> {
        let inner = self.lock();
        inner
            .state
            .submission_order
            .iter()
            .map(|id| &inner.state.submissions[id])
            .filter(|s| s.test_id == test_id)
            .cloned()
            .collect()
    }

    pub fn aggregate(&self, test_id: &str, only_valid: bool) -> Result<Aggregate> {
        let def = self
            .test(test_id)
            .ok_or_else(|| ListenError::NotFound(format!("test {test_id:?}")))?;
        let real: HashSet<&str> = def.items.iter().map(|i| i.item_id.as_str()).collect();
        let mut histogram: BTreeMap<String, Vec<u32>> = def
            .items
            .iter()
            .map(|i| (i.item_id.clone(), vec![0; i.transcript_len()]))
            .collect();
        let mut listeners = Vec::new();
        for sub in self.submissions(test_id) {
            let valid = sub.is_valid();
            if only_valid && !valid {
                continue;
            }
            let answers: Vec<&ItemAnswer> = sub.answers.iter().filter(|a| real.contains(a.item_id.as_str())).collect();
            let chose_a = answers.iter().filter(|a| a.choice == Choice::A).count();
            listeners.push(ListenerPreference {
                listener_id: sub.listener_id.clone(),
                submission_id: sub.submission_id.clone(),
                valid,
                proportion: chose_a as f64 / answers.len() as f64,
            });
            for a in answers {
                let counts = histogram.get_mut(&a.item_id).expect("real item");
                for span in &a.highlights {
                    for c in &mut counts[span.char_start..span.char_end] {
                        *c += 1;
                    }
                }
            }
        }
        let mut agg = Aggregate {
            test_id: test_id.to_string(),
            only_valid,
            listeners,
            highlight_histogram: histogram,
            stats: None,
        };
        agg.stats = agg.preference_set().map(|s| preference_test(&s));
        Ok(agg)
    }

    pub fn progress(&self, test_id: &str) -> Result<Progress> {
        let def = self
            .test(test_id)
            .ok_or_else(|| ListenError::NotFound(format!("test {test_id:?}")))?;
        let subs = self.submissions(test_id);
        let valid_count = subs.iter().filter(|s| s.is_valid()).count();
        let invalid_count = subs.len() - valid_count;
        Ok(Progress {
            test_id: test_id.to_string(),
            valid_count,
            invalid_count,
            rejection_rate: (!subs.is_empty()).then(|| invalid_count as f64 / subs.len() as f64),
            target: def.target_valid_submissions,
            complete: valid_count >= def.target_valid_submissions as usize,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AidQuestion, AttentionItem, Variant, XabItem};

    fn item(id: &str, transcript: &str) -> XabItem {
        XabItem {
            item_id: id.into(),
            reference_audio_id: format!("{id}-x"),
            candidate_a_audio_id: format!("{id}-copysyn"),
            candidate_b_audio_id: format!("{id}-xtts"),
            transcript: transcript.into(),
            ab_assignment_seed: 0,
        }
    }

    fn definition(n: usize, attention: usize, variant: Variant) -> TestDefinition {
        TestDefinition {
            test_id: "t1".into(),
            variant,
            instructions: "Pick the candidate closer in accent to X.".into(),
            items: (0..n).map(|i| item(&format!("i{i}"), "a wee bit of butter")).collect(),
            attention_items: (0..attention)
                .map(|i| AttentionItem {
                    item: item(&format!("att{i}"), "same accent here"),
                    expected: Choice::A,
                })
                .collect(),
            aid_question: Some(AidQuestion {
                prompt: "Where is the reference speaker from?".into(),
                accepted_keywords: ["scotland", "scottish", "edinburgh", "glasgow", "scots"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
            }),
            target_valid_submissions: 2,
            seed: 99,
            exclusive_group: None,
        }
    }

    fn span(a: usize, b: usize) -> HighlightSpan {
        HighlightSpan {
            char_start: a,
            char_end: b,
        }
    }

    /// Answers every item so that the underlying choice is `want(item_id)`.
    fn run_listener(svc: &ListenService, listener: &str, want: impl Fn(&str) -> Choice, aid: &str) -> Submission {
        let info = svc.create_session("t1", listener).unwrap();
        let def = svc.test("t1").unwrap();
        loop {
            let next = svc.next_item(&info.token).unwrap();
            let Some(view) = next.item else { break };
            let (it, _) = def.find_item(&view.item_id).unwrap();
            let target = want(&view.item_id);
            let target_audio = match target {
                Choice::A => &it.candidate_a_audio_id,
                Choice::B => &it.candidate_b_audio_id,
            };
            let screen = if &view.a_audio_id == target_audio { Choice::A } else { Choice::B };
            let spans = if view.require_highlight { vec![span(2, 5)] } else { vec![] };
            svc.submit_item(&info.token, &view.item_id, screen, &spans, 1200).unwrap();
        }
        svc.finalize_at(&info.token, aid, "2026-01-01T00:00:00Z".into()).unwrap()
    }

    #[test]
    fn duplicate_and_unknown() {
        let svc = ListenService::in_memory();
        svc.create_test(definition(2, 0, Variant::default())).unwrap();
        svc.create_session("t1", "l1").unwrap();
        assert!(matches!(svc.create_session("t1", "l1"), Err(ListenError::Conflict(_))));
        assert!(matches!(svc.create_session("nope", "l1"), Err(ListenError::NotFound(_))));
        assert!(matches!(svc.create_test(definition(2, 0, Variant::default())), Err(ListenError::Conflict(_))));
    }

    #[test]
    fn exclusive_group_blocks_overlap() {
        let svc = ListenService::in_memory();
        let mut a = definition(1, 0, Variant::default());
        a.exclusive_group = Some("p252".into());
        let mut b = a.clone();
        b.test_id = "t2".into();
        svc.create_test(a).unwrap();
        svc.create_test(b).unwrap();
        svc.create_session("t1", "l1").unwrap();
        assert!(matches!(svc.create_session("t2", "l1"), Err(ListenError::Conflict(_))));
        svc.create_session("t2", "l2").unwrap();
    }

    #[test]
    fn attention_items_are_spread() {
        let def = definition(6, 2, Variant::default());
        let order = presentation_order(&def, "l1");
        let ids: Vec<&str> = order.iter().map(|e| e.item_id.as_str()).collect();
        assert_eq!(ids, ["i0", "i1", "att0", "i2", "i3", "att1", "i4", "i5"]);
        assert_eq!(presentation_order(&def, "l1"), order);
    }

    #[test]
    fn positions_differ_between_listeners_but_systems_do_not() {
        let def = definition(40, 0, Variant::default());
        let a = presentation_order(&def, "alice");
        let b = presentation_order(&def, "bob");
        assert!(a.iter().zip(&b).any(|(x, y)| x.swapped != y.swapped));
        assert!(a.iter().any(|e| e.swapped) && a.iter().any(|e| !e.swapped));
        let svc = ListenService::in_memory();
        svc.create_test(def).unwrap();
        let sa = run_listener(&svc, "alice", |_| Choice::A, "scottish");
        let sb = run_listener(&svc, "bob", |_| Choice::A, "scottish");
        assert!(sa.answers.iter().chain(&sb.answers).all(|x| x.choice == Choice::A));
        // round trip through the stored swap flag
        for ans in sa.answers.iter().chain(&sb.answers) {
            let back = if ans.swapped { ans.screen_choice.flipped() } else { ans.screen_choice };
            assert_eq!(back, ans.choice);
        }
    }

    #[test]
    fn highlight_rules() {
        let svc = ListenService::in_memory();
        svc.create_test(definition(
            2,
            1,
            Variant {
                show_transcript: true,
                require_highlight: true,
            },
        ))
        .unwrap();
        let s = svc.create_session("t1", "l1").unwrap();
        let err = svc.submit_item(&s.token, "i0", Choice::A, &[], 10).unwrap_err();
        assert!(matches!(&err, ListenError::Validation(m) if m.contains("require_highlight")));
        assert!(matches!(
            svc.submit_item(&s.token, "i0", Choice::A, &[span(3, 200)], 10),
            Err(ListenError::Validation(_))
        ));
        assert!(matches!(
            svc.submit_item(&s.token, "i0", Choice::A, &[span(3, 3)], 10),
            Err(ListenError::Validation(_))
        ));
        let ans = svc.submit_item(&s.token, "i0", Choice::A, &[span(2, 5), span(4, 8)], 10).unwrap();
        assert_eq!(ans.highlights, [span(2, 8)]);
        assert!(matches!(
            svc.submit_item(&s.token, "i0", Choice::B, &[span(0, 1)], 10),
            Err(ListenError::Conflict(_))
        ));
        // attention items do not demand a highlight
        svc.submit_item(&s.token, "att0", Choice::A, &[], 10).unwrap();
    }

    #[test]
    fn screening_outcomes() {
        let svc = ListenService::in_memory();
        svc.create_test(definition(3, 2, Variant::default())).unwrap();
        let ok = run_listener(&svc, "l1", |_| Choice::A, "Scottish, maybe Edinburgh");
        assert!(ok.screening.valid && ok.screening.reasons.is_empty());
        let aid = run_listener(&svc, "l2", |_| Choice::A, "Southern England");
        assert!(!aid.screening.valid);
        assert_eq!(
            aid.screening.reasons,
            [ScreeningReason::AidFailed {
                aid_answer: "Southern England".into()
            }]
        );
        let att = run_listener(&svc, "l3", |id| if id == "att1" { Choice::B } else { Choice::A }, "glasgow");
        assert_eq!(
            att.screening.reasons,
            [ScreeningReason::AttentionFailed {
                item_ids: vec!["att1".into()]
            }]
        );
        let p = svc.progress("t1").unwrap();
        assert_eq!((p.valid_count, p.invalid_count), (1, 2));
    }

    #[test]
    fn finalize_rules() {
        let svc = ListenService::in_memory();
        svc.create_test(definition(2, 0, Variant::default())).unwrap();
        let s = svc.create_session("t1", "l1").unwrap();
        svc.submit_item(&s.token, "i0", Choice::A, &[], 10).unwrap();
        assert!(matches!(svc.finalize(&s.token, "scots"), Err(ListenError::State(_))));
        svc.submit_item(&s.token, "i1", Choice::A, &[], 10).unwrap();
        svc.finalize(&s.token, "scots").unwrap();
        assert!(matches!(svc.finalize(&s.token, "scots"), Err(ListenError::Conflict(_))));
        assert!(matches!(
            svc.submit_item(&s.token, "i1", Choice::A, &[], 10),
            Err(ListenError::Conflict(_))
        ));
        assert!(svc.next_item(&s.token).unwrap().done);
    }

    #[test]
    fn manual_override_is_separate() {
        let svc = ListenService::in_memory();
        svc.create_test(definition(1, 0, Variant::default())).unwrap();
        let sub = run_listener(&svc, "l1", |_| Choice::A, "somewhere up north, near Aberdeen");
        assert!(!sub.is_valid());
        let after = svc
            .override_screening(
                &sub.submission_id,
                ScreeningOverride {
                    valid: true,
                    note: "Aberdeen is in Scotland".into(),
                },
            )
            .unwrap();
        assert!(after.is_valid());
        assert!(!after.screening.valid);
        assert_eq!(svc.progress("t1").unwrap().valid_count, 1);
    }

    #[test]
    fn aggregation_examples() {
        let svc = ListenService::in_memory();
        svc.create_test(definition(8, 1, Variant::default())).unwrap();
        for (name, k) in [("l1", 4), ("l2", 6), ("l3", 8)] {
            run_listener(
                &svc,
                name,
                move |id| {
                    let idx: usize = id.trim_start_matches('i').parse().unwrap_or(0);
                    if id.starts_with("att") || idx < k {
                        Choice::A
                    } else {
                        Choice::B
                    }
                },
                "edinburgh",
            );
        }
        run_listener(&svc, "l4", |_| Choice::B, "london");
        let all = svc.aggregate("t1", false).unwrap();
        let valid = svc.aggregate("t1", true).unwrap();
        let props: Vec<f64> = valid.listeners.iter().map(|l| l.proportion).collect();
        assert_eq!(props, [0.5, 0.75, 1.0]);
        assert_eq!(all.listeners.len(), 4);
        for l in &valid.listeners {
            assert!(all.listeners.contains(l));
        }
        assert_eq!(valid.stats.unwrap().mean_pct, 75.0);
    }

    #[test]
    fn highlight_histogram_overlay() {
        let svc = ListenService::in_memory();
        let mut def = definition(
            1,
            0,
            Variant {
                show_transcript: true,
                require_highlight: true,
            },
        );
        def.items[0].transcript = "abcdef".into();
        svc.create_test(def).unwrap();
        for (l, s) in [("l1", span(0, 3)), ("l2", span(2, 4))] {
            let info = svc.create_session("t1", l).unwrap();
            svc.submit_item(&info.token, "i0", Choice::A, &[s], 5).unwrap();
            svc.finalize(&info.token, "scotland").unwrap();
        }
        let agg = svc.aggregate("t1", true).unwrap();
        assert_eq!(agg.highlight_histogram["i0"], [1, 1, 2, 1, 0, 0]);
    }

    #[test]
    fn progress_rates() {
        let svc = ListenService::in_memory();
        svc.create_test(definition(1, 0, Variant::default())).unwrap();
        let p = svc.progress("t1").unwrap();
        assert_eq!(p.rejection_rate, None);
        for i in 0..15 {
            run_listener(&svc, &format!("v{i}"), |_| Choice::A, "scottish");
        }
        for i in 0..5 {
            run_listener(&svc, &format!("x{i}"), |_| Choice::A, "no idea");
        }
        let p = svc.progress("t1").unwrap();
        assert_eq!(format!("{:.1}%", 100.0 * p.rejection_rate.unwrap()), "25.0%");
        assert!(p.complete);
    }

    #[test]
    fn log_replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        {
            let svc = ListenService::open(&path).unwrap();
            svc.create_test(definition(2, 1, Variant::default())).unwrap();
            run_listener(&svc, "l1", |_| Choice::A, "scottish");
            let s = svc.create_session("t1", "l2").unwrap();
            svc.submit_item(&s.token, "i0", Choice::B, &[], 3).unwrap();
        }
        let svc = ListenService::open(&path).unwrap();
        assert_eq!(svc.progress("t1").unwrap().valid_count, 1);
        assert!(matches!(svc.create_session("t1", "l2"), Err(ListenError::Conflict(_))));
        let s = svc.create_session("t1", "l3").unwrap();
        assert_eq!(svc.next_item(&s.token).unwrap().position, 0);
        std::fs::write(&path, "{not json}\n").unwrap();
        assert!(matches!(ListenService::open(&path), Err(ListenError::CorruptLog { line: 1, .. })));
    }
}
