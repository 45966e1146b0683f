//! User histories: new/returning user detection, pattern suggestions,
//! navigation capture and durable session records.
//!
//! The store is one JSON document, `{"version": 1, "users": [...]}`.
//! Writes go to a temporary sibling file that is renamed over the store
//! while an exclusive lock is held on `<store>.lock`.

use crate::cluster::Algorithm;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile store {path} is corrupt: {reason}")]
    CorruptStore { path: PathBuf, reason: String },
    #[error("cannot read profile store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to persist profile store {path}: {source}")]
    PersistFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("session {0} is closed")]
    SessionClosed(String),
    #[error("user id must not be empty")]
    EmptyUserId,
    #[error("objective must not be empty")]
    EmptyObjective,
}

/// Lowercase, split on non-alphanumerics, drop tokens shorter than two
/// characters, de-duplicate keeping first occurrence.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    text.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= 2)
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    let a: BTreeSet<&String> = a.iter().collect();
    let b: BTreeSet<&String> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigationEvent {
    pub kind: String,
    pub payload: String,
}

impl NavigationEvent {
    pub fn new(kind: impl Into<String>, payload: impl Into<String>) -> Self {
        Self { kind: kind.into(), payload: payload.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub objective: String,
    pub objective_tokens: Vec<String>,
    pub selected_attributes: Vec<String>,
    pub algorithm_used: Option<Algorithm>,
    pub k_used: Option<usize>,
    pub quality_summary: Option<f64>,
    pub accepted: bool,
    #[serde(default)]
    pub navigation: Vec<NavigationEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub sessions: Vec<SessionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub source_session: String,
    pub source_user: String,
    pub objective: String,
    pub selected_attributes: Vec<String>,
    pub algorithm_used: Option<Algorithm>,
    pub k_used: Option<usize>,
    pub accepted: bool,
    pub relevance: f64,
    #[serde(skip)]
    timestamp: Option<DateTime<Utc>>,
}

/// Blend used to rank a returning user's own sessions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelevanceWeights {
    pub jaccard: f64,
    pub recency: f64,
    pub accepted: f64,
    pub half_life_days: f64,
    pub max_suggestions: usize,
}

impl Default for RelevanceWeights {
    fn default() -> Self {
        Self { jaccard: 0.6, recency: 0.3, accepted: 0.1, half_life_days: 30.0, max_suggestions: 5 }
    }
}

impl RelevanceWeights {
    /// Exponential decay: 1 for a session recorded at `now`, 0.5 one half-life earlier.
    pub fn recency(&self, then: DateTime<Utc>, now: DateTime<Utc>) -> f64 {
        let age_days = ((now - then).num_milliseconds().max(0) as f64) / 86_400_000.0;
        0.5f64.powf(age_days / self.half_life_days)
    }

    pub fn relevance(&self, overlap: f64, recency: f64, accepted: bool) -> f64 {
        self.jaccard * overlap + self.recency * recency + if accepted { self.accepted } else { 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionContext {
    pub session_id: String,
    pub user_id: String,
    pub objective: String,
    pub objective_tokens: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub returning_user: bool,
    pub login: NavigationEvent,
    events: Vec<NavigationEvent>,
    open: bool,
}

impl SessionContext {
    pub fn events(&self) -> &[NavigationEvent] {
        &self.events
    }

    pub fn is_open(&self) -> bool {
        self.open
    }
}

/// Append to the session's navigation log; returns the new log length.
pub fn record_navigation(session: &mut SessionContext, event: NavigationEvent) -> Result<usize, ProfileError> {
    if !session.open {
        return Err(ProfileError::SessionClosed(session.session_id.clone()));
    }
    session.events.push(event);
    Ok(session.events.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub selected_attributes: Vec<String>,
    pub algorithm_used: Option<Algorithm>,
    pub k_used: Option<usize>,
    pub quality_summary: Option<f64>,
    pub accepted: bool,
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    version: u32,
    users: Vec<UserProfile>,
}

#[derive(Debug, Clone)]
pub struct ProfileStore {
    path: PathBuf,
    users: Vec<UserProfile>,
    weights: RelevanceWeights,
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".lock");
    path.with_file_name(name)
}

fn corrupt(path: &Path, reason: impl Into<String>) -> ProfileError {
    ProfileError::CorruptStore { path: path.to_path_buf(), reason: reason.into() }
}

/// Load a store; an absent file is an empty store.
pub fn open_store(path: &Path) -> Result<ProfileStore, ProfileError> {
    ProfileStore::open(path)
}

impl ProfileStore {
    pub fn open(path: &Path) -> Result<Self, ProfileError> {
        let mut store = Self { path: path.to_path_buf(), users: Vec::new(), weights: RelevanceWeights::default() };
        if !path.exists() {
            return Ok(store);
        }
        let io_err = |source| ProfileError::Io { path: path.to_path_buf(), source };
        let lock = OpenOptions::new().create(true).truncate(false).write(true).open(lock_path(path)).map_err(io_err)?;
        lock.lock_shared().map_err(io_err)?;
        let text = fs::read_to_string(path).map_err(io_err)?;
        drop(lock);

        let file: StoreFile = serde_json::from_str(&text).map_err(|e| corrupt(path, e.to_string()))?;
        if file.version != STORE_VERSION {
            return Err(corrupt(path, format!("unsupported version {}", file.version)));
        }
        for profile in &file.users {
            if profile.sessions.iter().any(|s| s.user_id != profile.user_id) {
                return Err(corrupt(path, format!("foreign session under user {:?}", profile.user_id)));
            }
            if profile.sessions.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
                return Err(corrupt(path, format!("sessions of {:?} out of order", profile.user_id)));
            }
        }
        store.users = file.users;
        Ok(store)
    }

    pub fn with_weights(mut self, weights: RelevanceWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn users(&self) -> &[UserProfile] {
        &self.users
    }

    pub fn profile(&self, user_id: &str) -> Option<&UserProfile> {
        self.users.iter().find(|p| p.user_id == user_id)
    }

    pub fn history(&self, user_id: &str) -> &[SessionRecord] {
        self.profile(user_id).map_or(&[], |p| &p.sessions)
    }

    pub fn begin_session(
        &self,
        user_id: &str,
        objective: &str,
    ) -> Result<(SessionContext, Vec<PatternSummary>), ProfileError> {
        self.begin_session_at(user_id, objective, Utc::now())
    }

    /// Open a session and gather suggestions.
    ///
    /// Returning users get their own sessions ranked by
    /// [`RelevanceWeights::relevance`]. New users get other users' sessions
    /// with a non-zero objective overlap, ranked by Jaccard similarity.
    /// Ties go to the newer session, then the smaller session id.
    pub fn begin_session_at(
        &self,
        user_id: &str,
        objective: &str,
        now: DateTime<Utc>,
    ) -> Result<(SessionContext, Vec<PatternSummary>), ProfileError> {
        if user_id.trim().is_empty() {
            return Err(ProfileError::EmptyUserId);
        }
        if objective.trim().is_empty() {
            return Err(ProfileError::EmptyObjective);
        }
        let tokens = tokenize(objective);
        let own = self.history(user_id);
        let returning = !own.is_empty();

        let summarize = |s: &SessionRecord, relevance: f64| PatternSummary {
            source_session: s.session_id.clone(),
            source_user: s.user_id.clone(),
            objective: s.objective.clone(),
            selected_attributes: s.selected_attributes.clone(),
            algorithm_used: s.algorithm_used,
            k_used: s.k_used,
            accepted: s.accepted,
            relevance,
            timestamp: Some(s.timestamp),
        };
        let mut suggestions: Vec<PatternSummary> = if returning {
            own.iter()
                .map(|s| {
                    let overlap = jaccard(&tokens, &s.objective_tokens);
                    let relevance = self.weights.relevance(overlap, self.weights.recency(s.timestamp, now), s.accepted);
                    summarize(s, relevance)
                })
                .collect()
        } else {
            self.users
                .iter()
                .flat_map(|p| &p.sessions)
                .filter_map(|s| {
                    let overlap = jaccard(&tokens, &s.objective_tokens);
                    (overlap > 0.0).then(|| summarize(s, overlap))
                })
                .collect()
        };
        suggestions.sort_by(|a, b| {
            b.relevance
                .partial_cmp(&a.relevance)
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.timestamp.cmp(&a.timestamp))
                .then_with(|| a.source_session.cmp(&b.source_session))
        });
        suggestions.truncate(self.weights.max_suggestions);

        let session_id = {
            let mut h = Sha256::new();
            h.update(user_id.as_bytes());
            h.update([0]);
            h.update(objective.as_bytes());
            h.update([0]);
            h.update(now.to_rfc3339().as_bytes());
            h.update(own.len().to_le_bytes());
            hex::encode(&h.finalize()[..8])
        };
        let context = SessionContext {
            session_id,
            user_id: user_id.to_string(),
            objective: objective.to_string(),
            objective_tokens: tokens,
            started_at: now,
            returning_user: returning,
            login: NavigationEvent::new("login", if returning { "returning" } else { "new" }),
            events: Vec::new(),
            open: true,
        };
        Ok((context, suggestions))
    }

    pub fn commit_session(
        &mut self,
        session: &mut SessionContext,
        outcome: SessionOutcome,
    ) -> Result<SessionRecord, ProfileError> {
        self.commit_session_at(session, outcome, Utc::now())
    }

    /// Append the finished session to the user's profile and persist.
    ///
    /// On a write failure the in-memory store is left as it was and the
    /// session stays open.
    pub fn commit_session_at(
        &mut self,
        session: &mut SessionContext,
        outcome: SessionOutcome,
        now: DateTime<Utc>,
    ) -> Result<SessionRecord, ProfileError> {
        if !session.open {
            return Err(ProfileError::SessionClosed(session.session_id.clone()));
        }
        let last = self.history(&session.user_id).last().map(|s| s.timestamp);
        let timestamp = last.map_or(now, |t| t.max(now));
        let mut navigation = vec![session.login.clone()];
        navigation.extend(session.events.iter().cloned());
        let record = SessionRecord {
            session_id: session.session_id.clone(),
            user_id: session.user_id.clone(),
            timestamp,
            objective: session.objective.clone(),
            objective_tokens: session.objective_tokens.clone(),
            selected_attributes: outcome.selected_attributes,
            algorithm_used: outcome.algorithm_used,
            k_used: outcome.k_used,
            quality_summary: outcome.quality_summary,
            accepted: outcome.accepted,
            navigation,
        };

        let mut users = self.users.clone();
        match users.iter_mut().find(|p| p.user_id == record.user_id) {
            Some(p) => p.sessions.push(record.clone()),
            None => users.push(UserProfile { user_id: record.user_id.clone(), sessions: vec![record.clone()] }),
        }
        persist(&self.path, &users)?;
        self.users = users;
        session.open = false;
        Ok(record)
    }
}

fn persist(path: &Path, users: &[UserProfile]) -> Result<(), ProfileError> {
    let fail = |source| ProfileError::PersistFailure { path: path.to_path_buf(), source };
    let doc = serde_json::to_string_pretty(&StoreFile { version: STORE_VERSION, users: users.to_vec() })
        .expect("store serializes");
    let lock = OpenOptions::new().create(true).truncate(false).write(true).open(lock_path(path)).map_err(fail)?;
    lock.lock().map_err(fail)?;

    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let write = || -> std::io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(doc.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    let result = write();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t(day: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2026, 1, day, 12, 0, 0).unwrap()
    }

    fn outcome(attrs: &[&str], accepted: bool) -> SessionOutcome {
        SessionOutcome {
            selected_attributes: attrs.iter().map(|s| s.to_string()).collect(),
            algorithm_used: Some(Algorithm::KPrototypes),
            k_used: Some(3),
            quality_summary: Some(0.4),
            accepted,
        }
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Semester  performance, semester-wise! a"), vec!["semester", "performance", "wise"]);
        assert!(tokenize("a b c").is_empty());
    }

    #[test]
    fn jaccard_by_hand() {
        let a = tokenize("semester performance lab");
        let b = tokenize("semester performance year");
        assert_eq!(jaccard(&a, &b), 0.5);
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&[], &[]), 0.0);
    }

    #[test]
    fn absent_file_is_empty_store() {
        let dir = tempfile::tempdir().unwrap();
        let store = open_store(&dir.path().join("p.json")).unwrap();
        assert!(store.users().is_empty());
        let (ctx, suggestions) = store.begin_session_at("bob", "anything", t(1)).unwrap();
        assert!(suggestions.is_empty());
        assert!(ctx.is_open());
        assert!(!ctx.returning_user);
        assert_eq!(ctx.login.payload, "new");
    }

    #[test]
    fn two_users_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let mut store = open_store(&path).unwrap();
        for (user, day) in [("alice", 1), ("bob", 2)] {
            let (mut ctx, _) = store.begin_session_at(user, "semester performance", t(day)).unwrap();
            record_navigation(&mut ctx, NavigationEvent::new("view", "ranks")).unwrap();
            store.commit_session_at(&mut ctx, outcome(&["SEMESTER"], true), t(day)).unwrap();
        }
        let reopened = open_store(&path).unwrap();
        assert_eq!(reopened.users().len(), 2);
        assert_eq!(reopened.users(), store.users());
        assert_eq!(reopened.history("alice")[0].navigation.len(), 2);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let mut store = open_store(&path).unwrap();
        let (mut ctx, _) = store.begin_session_at("alice", "x y", t(1)).unwrap();
        store.commit_session_at(&mut ctx, outcome(&["A"], false), t(1)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(open_store(&path), Err(ProfileError::CorruptStore { .. })));
        fs::write(&path, r#"{"version": 2, "users": []}"#).unwrap();
        assert!(matches!(open_store(&path), Err(ProfileError::CorruptStore { .. })));
    }

    #[test]
    fn navigation_log_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir.path().join("p.json")).unwrap();
        let (mut ctx, _) = store.begin_session_at("alice", "marks", t(1)).unwrap();
        let ev = NavigationEvent::new("click", "SEMESTER");
        record_navigation(&mut ctx, ev.clone()).unwrap();
        record_navigation(&mut ctx, ev.clone()).unwrap();
        assert_eq!(record_navigation(&mut ctx, NavigationEvent::new("open", "chart")).unwrap(), 3);
        assert_eq!(ctx.events()[0], ev);
        assert_eq!(ctx.events()[1], ev);
        assert_eq!(ctx.events()[2].kind, "open");
        store.commit_session_at(&mut ctx, outcome(&["A"], false), t(1)).unwrap();
        assert!(matches!(record_navigation(&mut ctx, ev), Err(ProfileError::SessionClosed(_))));
        assert!(matches!(
            store.commit_session_at(&mut ctx, outcome(&["A"], false), t(2)),
            Err(ProfileError::SessionClosed(_))
        ));
    }

    #[test]
    fn returning_user_sees_own_pattern_first() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir.path().join("p.json")).unwrap();
        let (mut ctx, _) = store.begin_session_at("alice", "semester performance", t(1)).unwrap();
        store.commit_session_at(&mut ctx, outcome(&["SEMESTER", "PASS_PERCENTAGE"], true), t(1)).unwrap();
        let (ctx, suggestions) = store.begin_session_at("alice", "semester performance", t(2)).unwrap();
        assert!(ctx.returning_user);
        assert_eq!(suggestions[0].source_session, store.history("alice")[0].session_id);
        assert_eq!(suggestions[0].selected_attributes, vec!["SEMESTER", "PASS_PERCENTAGE"]);
    }

    #[test]
    fn new_user_gets_similar_patterns_by_jaccard() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir.path().join("p.json")).unwrap();
        let (mut ctx, _) = store.begin_session_at("alice", "semester performance year", t(1)).unwrap();
        store.commit_session_at(&mut ctx, outcome(&["SEMESTER"], true), t(1)).unwrap();
        let (mut ctx, _) = store.begin_session_at("carol", "library loans", t(1)).unwrap();
        store.commit_session_at(&mut ctx, outcome(&["ISSUE_DATE"], true), t(1)).unwrap();

        let (_, suggestions) = store.begin_session_at("bob", "semester performance lab", t(3)).unwrap();
        assert_eq!(suggestions.len(), 1, "zero-overlap sessions are never suggested");
        assert_eq!(suggestions[0].source_user, "alice");
        assert_eq!(suggestions[0].relevance, 0.5);
    }

    #[test]
    fn accepted_pattern_outranks_unaccepted_of_same_age() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir.path().join("p.json")).unwrap();
        for accepted in [false, true] {
            let (mut ctx, _) = store.begin_session_at("alice", "semester marks", t(1)).unwrap();
            store.commit_session_at(&mut ctx, outcome(&["SEMESTER"], accepted), t(1)).unwrap();
        }
        let now = t(4);
        let (_, suggestions) = store.begin_session_at("alice", "semester marks", now).unwrap();
        let w = RelevanceWeights::default();
        let rec = w.recency(t(1), now);
        assert!((suggestions[0].relevance - (0.6 + 0.3 * rec + 0.1)).abs() < 1e-12);
        assert!((suggestions[1].relevance - (0.6 + 0.3 * rec)).abs() < 1e-12);
        assert!(suggestions[0].accepted);
    }

    #[test]
    fn sessions_stay_in_time_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir.path().join("p.json")).unwrap();
        let (mut a, _) = store.begin_session_at("alice", "x marks", t(5)).unwrap();
        store.commit_session_at(&mut a, outcome(&["A"], false), t(5)).unwrap();
        // A clock that runs backwards must not break the ordering.
        let (mut b, _) = store.begin_session_at("alice", "x marks", t(3)).unwrap();
        store.commit_session_at(&mut b, outcome(&["A"], false), t(3)).unwrap();
        let h = store.history("alice");
        assert_eq!(h.len(), 2);
        assert!(h[0].timestamp <= h[1].timestamp);
        assert_ne!(h[0].session_id, h[1].session_id);
    }

    #[test]
    fn persist_failure_leaves_memory_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("not_a_dir");
        fs::write(&blocker, "x").unwrap();
        let mut store = open_store(&blocker.join("p.json")).unwrap();
        let (mut ctx, _) = store.begin_session_at("alice", "x marks", t(1)).unwrap();
        let err = store.commit_session_at(&mut ctx, outcome(&["A"], false), t(1)).unwrap_err();
        assert!(matches!(err, ProfileError::PersistFailure { .. }));
        assert!(store.users().is_empty());
        assert!(ctx.is_open());
    }

    #[test]
    fn rejects_empty_inputs() {
        let store = ProfileStore::open(Path::new("/nonexistent/p.json")).unwrap();
        assert!(matches!(store.begin_session_at("", "x", t(1)), Err(ProfileError::EmptyUserId)));
        assert!(matches!(store.begin_session_at("u", " ", t(1)), Err(ProfileError::EmptyObjective)));
    }

    #[test]
    fn relevance_is_monotone() {
        let w = RelevanceWeights::default();
        for i in 0..=10 {
            let lo = i as f64 / 10.0;
            for r in [0.0, 0.3, 1.0] {
                assert!(w.relevance(lo, r, true) >= w.relevance(lo, r, false));
                if i < 10 {
                    assert!(w.relevance(lo + 0.1, r, false) >= w.relevance(lo, r, false));
                }
            }
        }
        assert!((w.recency(t(1), t(31)) - 0.5).abs() < 1e-12);
    }
}
