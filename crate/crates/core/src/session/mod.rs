//! Customization sessions: present a pair, accept a choice, repeat, export.
//!
//! A [`Studio`] owns every live session. Each session sits behind its own
//! mutex; finished voice files live in a separate lock-free map, as does the
//! rendered-audio cache. Sessions are written through to a [`SessionStore`]
//! and rebuilt from it on first access after a restart.

mod clock;
mod store;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use dashmap::DashMap;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::VoiceSpace;
use crate::evolution::{
    initial_population, select_and_advance, EvolutionConfig, EvolutionError, IndividualId,
    Judgment, Population,
};
use crate::rng::{EvoRng, STREAM_EVOLUTION};
use crate::synth::{
    encode_wav, synthesize, validate_sample_rate, validate_text, AudioClip, BackendRegistry,
    SynthError, SynthesisRequest, DEFAULT_SAMPLE_RATE, PARAMETRIC_V1,
};
use crate::voicefile::{truncate_to_millis, VoiceFile, VoiceFileError};

pub use clock::{Clock, FixedClock, SystemClock};
pub use store::{FileStore, LineageRecord, MemoryStore, SessionHeader, SessionStore, StoreError, StoredSession};

/// Sentence spoken by every clip unless a session overrides it.
pub const DEFAULT_TEXT: &str = "The five boxing wizards jump quickly over the lazy dog.";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("session is {status}: {message}")]
    State { status: SessionStatus, message: String },
    #[error("{0}")]
    Internal(String),
}

impl SessionError {
    /// Stable machine-readable category.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Validation(_) => "validation",
            Self::NotFound(_) => "not_found",
            Self::Conflict(_) => "conflict",
            Self::State { .. } => "state",
            Self::Internal(_) => "internal",
        }
    }
}

impl From<EvolutionError> for SessionError {
    fn from(e: EvolutionError) -> Self {
        match e {
            EvolutionError::Config(m) => Self::Validation(m),
            EvolutionError::UnknownIndividual(id) => {
                Self::Conflict(format!("individual {id} is not in the current pair"))
            }
            other => Self::Internal(other.to_string()),
        }
    }
}

impl From<StoreError> for SessionError {
    fn from(e: StoreError) -> Self {
        Self::Internal(e.to_string())
    }
}

impl From<VoiceFileError> for SessionError {
    fn from(e: VoiceFileError) -> Self {
        Self::Internal(e.to_string())
    }
}

fn synth_internal(e: SynthError) -> SessionError {
    SessionError::Internal(e.to_string())
}

/// 128-bit random token rendered as 32 lowercase hex digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SessionId(String);

impl SessionId {
    pub fn generate() -> Self {
        Self(uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for SessionId {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 32 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Self(s.to_owned()))
        } else {
            Err(SessionError::NotFound(format!("no session {s:?}")))
        }
    }
}

impl TryFrom<String> for SessionId {
    type Error = SessionError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SessionId> for String {
    fn from(id: SessionId) -> Self {
        id.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Finished,
    Abandoned,
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Active => "active",
            Self::Finished => "finished",
            Self::Abandoned => "abandoned",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(flatten)]
    pub evolution: EvolutionConfig,
    /// Auto-finish once this generation is reached.
    #[serde(default)]
    pub max_generations: Option<u64>,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        self.evolution.validate()?;
        if self.evolution.lambda != 1 {
            return Err(SessionError::Validation(format!(
                "sessions present exactly two voices; lambda must be 1, got {}",
                self.evolution.lambda
            )));
        }
        if self.max_generations == Some(0) {
            return Err(SessionError::Validation("max_generations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Partial configuration supplied by a client; unset fields take defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub lambda: Option<usize>,
    pub epsilon: Option<f64>,
    pub sigma_scale: Option<f64>,
    pub restart_scale: Option<f64>,
    pub rng_seed: Option<u64>,
    pub max_generations: Option<u64>,
}

impl ConfigOverrides {
    /// Applies the overrides; a missing `rng_seed` is drawn at random.
    pub fn resolve(&self) -> SessionConfig {
        let d = EvolutionConfig::default();
        SessionConfig {
            evolution: EvolutionConfig {
                lambda: self.lambda.unwrap_or(d.lambda),
                epsilon: self.epsilon.unwrap_or(d.epsilon),
                sigma_scale: self.sigma_scale.unwrap_or(d.sigma_scale),
                restart_scale: self.restart_scale.unwrap_or(d.restart_scale),
                rng_seed: self.rng_seed.unwrap_or_else(rand::random),
            },
            max_generations: self.max_generations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    #[serde(default)]
    pub config: ConfigOverrides,
    #[serde(default)]
    pub text: Option<String>,
}

/// A judgment as submitted by a client. `generation`, when present, pins the
/// judgment to the pair it was made on; without it a repeated choice of the
/// surviving parent is indistinguishable from a fresh one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub chosen: IndividualId,
    #[serde(default)]
    pub generation: Option<u64>,
}

impl From<Judgment> for Submission {
    fn from(j: Judgment) -> Self {
        Self {
            chosen: j.chosen,
            generation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub population: Population<f64>,
    pub judgment: Judgment,
}

/// Live session state. `history.len() == population.generation` always.
#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: SessionId,
    pub status: SessionStatus,
    pub config: SessionConfig,
    pub population: Population<f64>,
    pub history: Vec<HistoryEntry>,
    pub text: String,
    pub backend: String,
    pub sample_rate: u32,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    rng: EvoRng,
}

impl Session {
    /// Both voices on offer, parent first.
    pub fn pair(&self) -> [IndividualId; 2] {
        [self.population.parent.id, self.population.offspring[0].id]
    }

    pub fn generation(&self) -> u64 {
        self.population.generation
    }

    /// The chosen ids in order.
    pub fn transcript(&self) -> Vec<Judgment> {
        self.history.iter().map(|h| h.judgment).collect()
    }

    /// Genes of `id` from the current population or any earlier one.
    pub fn find(&self, id: IndividualId) -> Option<&crate::evolution::Individual<f64>> {
        self.population
            .get(id)
            .or_else(|| self.history.iter().rev().find_map(|h| h.population.get(id)))
    }

    pub fn header(&self) -> SessionHeader {
        SessionHeader {
            session_id: self.session_id.clone(),
            status: self.status,
            config: self.config,
            text: self.text.clone(),
            backend: self.backend.clone(),
            sample_rate: self.sample_rate,
            created_at: self.created_at,
            updated_at: self.updated_at,
            finished_at: self.finished_at,
        }
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.session_id.clone(),
            status: self.status,
            generation: self.generation(),
            pair: self.pair(),
            config: self.config,
            text: self.text.clone(),
            created_at: self.created_at,
            updated_at: self.updated_at,
        }
    }

    fn require_active(&self, action: &str) -> Result<(), SessionError> {
        match self.status {
            SessionStatus::Active => Ok(()),
            status => Err(SessionError::State {
                status,
                message: format!("cannot {action}"),
            }),
        }
    }

    /// Rebuilds the population from the seeds and the recorded transcript and
    /// checks it matches the live one bit for bit.
    pub fn verify_replay(&self, space: &VoiceSpace) -> Result<bool, SessionError> {
        let (population, history, rng) = replay(space, &self.config, &self.transcript())?;
        Ok(population == self.population && history == self.history && rng.state() == self.rng.state())
    }
}

/// Snapshot handed to API layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub status: SessionStatus,
    pub generation: u64,
    pub pair: [IndividualId; 2],
    pub config: SessionConfig,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

/// Runs `transcript` from the seed population.
pub fn replay(
    space: &VoiceSpace,
    config: &SessionConfig,
    transcript: &[Judgment],
) -> Result<(Population<f64>, Vec<HistoryEntry>, EvoRng), SessionError> {
    let mut population = initial_population(space.low_seed.clone(), space.high_seed.clone(), &config.evolution)?;
    let mut rng = EvoRng::new(config.evolution.rng_seed, STREAM_EVOLUTION);
    let mut history = Vec::with_capacity(transcript.len());
    for judgment in transcript {
        let next = select_and_advance(&population, judgment, &config.evolution, &space.pca, &mut rng)?;
        history.push(HistoryEntry {
            population: std::mem::replace(&mut population, next),
            judgment: *judgment,
        });
    }
    Ok((population, history, rng))
}

/// A rendered clip plus its strong validator.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedAudio {
    pub clip: AudioClip,
    pub wav: Vec<u8>,
    /// Quoted hex SHA-256 of `wav`.
    pub etag: String,
}

impl RenderedAudio {
    pub fn from_clip(clip: AudioClip) -> Result<Self, SynthError> {
        let wav = encode_wav(&clip)?;
        let etag = format!("\"{:x}\"", Sha256::digest(&wav));
        Ok(Self { clip, wav, etag })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudioSettings {
    pub default_text: String,
    pub sample_rate: u32,
    pub backend: String,
}

impl Default for StudioSettings {
    fn default() -> Self {
        Self {
            default_text: DEFAULT_TEXT.to_owned(),
            sample_rate: DEFAULT_SAMPLE_RATE,
            backend: PARAMETRIC_V1.to_owned(),
        }
    }
}

type AudioKey = (SessionId, IndividualId);

/// Session engine shared by every front end.
pub struct Studio {
    space: Arc<VoiceSpace>,
    backends: BackendRegistry,
    store: Arc<dyn SessionStore>,
    clock: Arc<dyn Clock>,
    settings: StudioSettings,
    sessions: DashMap<SessionId, Arc<Mutex<Session>>>,
    finished: DashMap<SessionId, Arc<VoiceFile>>,
    audio: DashMap<AudioKey, Arc<RenderedAudio>>,
}

impl fmt::Debug for Studio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Studio")
            .field("settings", &self.settings)
            .field("sessions", &self.sessions.len())
            .field("cached_clips", &self.audio.len())
            .finish()
    }
}

impl Studio {
    pub fn new(
        space: Arc<VoiceSpace>,
        backends: BackendRegistry,
        store: Arc<dyn SessionStore>,
        clock: Arc<dyn Clock>,
        settings: StudioSettings,
    ) -> Result<Self, SessionError> {
        validate_text(&settings.default_text).map_err(|e| SessionError::Validation(e.to_string()))?;
        validate_sample_rate(settings.sample_rate).map_err(|e| SessionError::Validation(e.to_string()))?;
        backends
            .get(&settings.backend)
            .map_err(|e| SessionError::Validation(e.to_string()))?;
        Ok(Self {
            space,
            backends,
            store,
            clock,
            settings,
            sessions: DashMap::new(),
            finished: DashMap::new(),
            audio: DashMap::new(),
        })
    }

    /// Reference voice space, default backends, in-memory store, wall clock.
    pub fn in_memory() -> Self {
        Self::new(
            Arc::new(VoiceSpace::reference()),
            BackendRegistry::default(),
            Arc::new(MemoryStore::default()),
            Arc::new(SystemClock),
            StudioSettings::default(),
        )
        .expect("default settings are valid")
    }

    pub fn space(&self) -> &VoiceSpace {
        &self.space
    }

    pub fn settings(&self) -> &StudioSettings {
        &self.settings
    }

    fn now(&self) -> DateTime<Utc> {
        truncate_to_millis(self.clock.now())
    }

    pub fn create_session(&self, request: NewSession) -> Result<SessionView, SessionError> {
        let config = request.config.resolve();
        config.validate()?;
        let text = request.text.unwrap_or_else(|| self.settings.default_text.clone());
        validate_text(&text).map_err(|e| SessionError::Validation(e.to_string()))?;
        let (population, history, rng) = replay(&self.space, &config, &[])?;
        let now = self.now();
        let session = Session {
            session_id: SessionId::generate(),
            status: SessionStatus::Active,
            config,
            population,
            history,
            text,
            backend: self.settings.backend.clone(),
            sample_rate: self.settings.sample_rate,
            created_at: now,
            updated_at: now,
            finished_at: None,
            rng,
        };
        self.store.put_header(&session.header())?;
        let view = session.view();
        self.sessions
            .insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(view)
    }

    fn handle(&self, id: &SessionId) -> Result<Arc<Mutex<Session>>, SessionError> {
        if let Some(h) = self.sessions.get(id) {
            return Ok(Arc::clone(&h));
        }
        let stored = self
            .store
            .load(id)?
            .ok_or_else(|| SessionError::NotFound(format!("no session {id}")))?;
        let session = self.restore(stored)?;
        let entry = self
            .sessions
            .entry(id.clone())
            .or_insert_with(|| Arc::new(Mutex::new(session)));
        Ok(Arc::clone(&entry))
    }

    fn restore(&self, stored: StoredSession) -> Result<Session, SessionError> {
        let StoredSession { header, lineage } = stored;
        let transcript: Vec<Judgment> = lineage.iter().map(|r| r.judgment).collect();
        let (population, history, rng) = replay(&self.space, &header.config, &transcript)?;
        if let Some((n, r)) = lineage
            .iter()
            .enumerate()
            .find(|(n, r)| r.generation != *n as u64)
        {
            return Err(SessionError::Internal(format!(
                "lineage record {n} claims generation {}",
                r.generation
            )));
        }
        let updated_at = lineage
            .last()
            .map_or(header.updated_at, |r| r.at.max(header.updated_at));
        Ok(Session {
            session_id: header.session_id,
            status: header.status,
            config: header.config,
            population,
            history,
            text: header.text,
            backend: header.backend,
            sample_rate: header.sample_rate,
            created_at: header.created_at,
            updated_at,
            finished_at: header.finished_at,
            rng,
        })
    }

    /// Locks and clones the current state.
    pub fn session(&self, id: &SessionId) -> Result<Session, SessionError> {
        Ok(self.handle(id)?.lock().clone())
    }

    pub fn view(&self, id: &SessionId) -> Result<SessionView, SessionError> {
        Ok(self.handle(id)?.lock().view())
    }

    pub fn current_pair(&self, id: &SessionId) -> Result<[IndividualId; 2], SessionError> {
        let handle = self.handle(id)?;
        let s = handle.lock();
        s.require_active("present a pair")?;
        Ok(s.pair())
    }

    /// Rendered audio for any individual the session has ever presented.
    pub fn audio(&self, id: &SessionId, individual: IndividualId) -> Result<Arc<RenderedAudio>, SessionError> {
        let key = (id.clone(), individual);
        if let Some(hit) = self.audio.get(&key) {
            return Ok(Arc::clone(&hit));
        }
        let (genes, text, backend, sample_rate) = {
            let handle = self.handle(id)?;
            let s = handle.lock();
            let ind = s
                .find(individual)
                .ok_or_else(|| SessionError::NotFound(format!("session {id} has no individual {individual}")))?;
            (ind.genes.clone(), s.text.clone(), s.backend.clone(), s.sample_rate)
        };
        let embedding = self
            .space
            .pca
            .inverse(&genes)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        let rendered = Arc::new(self.render(embedding, &text, &backend, sample_rate)?);
        Ok(Arc::clone(&self.audio.entry(key).or_insert(rendered)))
    }

    fn render(
        &self,
        embedding: crate::pca::Embedding<f64>,
        text: &str,
        backend: &str,
        sample_rate: u32,
    ) -> Result<RenderedAudio, SessionError> {
        let backend = self.backends.get(backend).map_err(synth_internal)?;
        let request = SynthesisRequest::new(embedding, text, sample_rate).map_err(synth_internal)?;
        let clip = synthesize(&request, backend.as_ref()).map_err(synth_internal)?;
        RenderedAudio::from_clip(clip).map_err(synth_internal)
    }

    /// Renders a voice file's embedding with this studio's backends.
    pub fn render_voicefile(&self, voice: &VoiceFile, text: &str, sample_rate: u32) -> Result<RenderedAudio, SessionError> {
        validate_text(text).map_err(|e| SessionError::Validation(e.to_string()))?;
        validate_sample_rate(sample_rate).map_err(|e| SessionError::Validation(e.to_string()))?;
        self.render(voice.embedding.clone(), text, &voice.backend_hint, sample_rate)
    }

    pub fn submit_judgment(&self, id: &SessionId, submission: impl Into<Submission>) -> Result<SessionView, SessionError> {
        let submission = submission.into();
        let judgment = Judgment {
            chosen: submission.chosen,
        };
        let handle = self.handle(id)?;
        let mut s = handle.lock();
        s.require_active("accept a judgment")?;
        if let Some(g) = submission.generation.filter(|&g| g != s.generation()) {
            return Err(SessionError::Conflict(format!(
                "judgment was made at generation {g}, session is at generation {}; refresh the pair",
                s.generation()
            )));
        }
        if !s.pair().contains(&judgment.chosen) {
            return Err(SessionError::Conflict(format!(
                "individual {} is not in the current pair {:?} at generation {}; refresh the pair",
                judgment.chosen,
                s.pair().map(|i| i.0),
                s.generation()
            )));
        }
        let mut rng = s.rng.clone();
        let next = select_and_advance(&s.population, &judgment, &s.config.evolution, &self.space.pca, &mut rng)?;
        let now = self.now();
        self.store.append_lineage(
            id,
            &LineageRecord {
                generation: s.generation(),
                judgment,
                at: now,
            },
        )?;
        let previous = std::mem::replace(&mut s.population, next);
        s.history.push(HistoryEntry {
            population: previous,
            judgment,
        });
        s.rng = rng;
        s.updated_at = now;
        if s.config.max_generations.is_some_and(|cap| s.generation() >= cap) {
            self.finish_locked(&mut s)?;
        }
        Ok(s.view())
    }

    fn finish_locked(&self, s: &mut Session) -> Result<Arc<VoiceFile>, SessionError> {
        let now = self.now();
        let voice = Arc::new(self.voicefile_for(s, now)?);
        s.status = SessionStatus::Finished;
        s.finished_at = Some(now);
        s.updated_at = now;
        self.store.put_header(&s.header())?;
        self.finished.insert(s.session_id.clone(), Arc::clone(&voice));
        Ok(voice)
    }

    fn voicefile_for(&self, s: &Session, at: DateTime<Utc>) -> Result<VoiceFile, SessionError> {
        let voice = VoiceFile::from_coefficients(
            &self.space.pca,
            s.population.parent.genes.clone(),
            s.generation(),
            s.config.evolution.rng_seed,
            at,
            s.backend.clone(),
        )?;
        voice.check_consistency(&self.space.pca)?;
        Ok(voice)
    }

    /// Ends the session and exports the current parent.
    pub fn finish_session(&self, id: &SessionId) -> Result<Arc<VoiceFile>, SessionError> {
        let handle = self.handle(id)?;
        let mut s = handle.lock();
        s.require_active("finish")?;
        self.finish_locked(&mut s)
    }

    /// Voice file of a finished session.
    pub fn voicefile(&self, id: &SessionId) -> Result<Arc<VoiceFile>, SessionError> {
        if let Some(v) = self.finished.get(id) {
            return Ok(Arc::clone(&v));
        }
        let handle = self.handle(id)?;
        let s = handle.lock();
        match (s.status, s.finished_at) {
            (SessionStatus::Finished, Some(at)) => {
                let voice = Arc::new(self.voicefile_for(&s, at)?);
                Ok(Arc::clone(&self.finished.entry(id.clone()).or_insert(voice)))
            }
            (status, _) => Err(SessionError::State {
                status,
                message: "no voice file until the session is finished".into(),
            }),
        }
    }

    pub fn abandon(&self, id: &SessionId) -> Result<SessionView, SessionError> {
        let handle = self.handle(id)?;
        let mut s = handle.lock();
        s.require_active("abandon")?;
        s.status = SessionStatus::Abandoned;
        s.updated_at = self.now();
        self.store.put_header(&s.header())?;
        Ok(s.view())
    }

    pub fn verify_replay(&self, id: &SessionId) -> Result<bool, SessionError> {
        let session = self.session(id)?;
        session.verify_replay(&self.space)
    }

    /// Drops in-memory state so the next access reloads from the store.
    pub fn evict(&self, id: &SessionId) {
        self.sessions.remove(id);
        self.finished.remove(id);
        self.audio.retain(|(sid, _), _| sid != id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use std::sync::OnceLock;

    fn space() -> Arc<VoiceSpace> {
        static SPACE: OnceLock<Arc<VoiceSpace>> = OnceLock::new();
        Arc::clone(SPACE.get_or_init(|| Arc::new(VoiceSpace::reference())))
    }

    fn studio_with(store: Arc<dyn SessionStore>) -> Studio {
        let t = Utc.with_ymd_and_hms(2025, 3, 1, 12, 0, 0).unwrap();
        Studio::new(
            space(),
            BackendRegistry::default(),
            store,
            Arc::new(FixedClock::stepping(t, chrono::Duration::milliseconds(250))),
            StudioSettings::default(),
        )
        .unwrap()
    }

    fn studio() -> Studio {
        studio_with(Arc::new(MemoryStore::default()))
    }

    fn seeded(seed: u64) -> NewSession {
        NewSession {
            config: ConfigOverrides {
                rng_seed: Some(seed),
                ..Default::default()
            },
            text: None,
        }
    }

    #[test]
    fn creation_defaults() {
        let st = studio();
        let v = st.create_session(seeded(1)).unwrap();
        assert_eq!(v.generation, 0);
        assert_eq!(v.status, SessionStatus::Active);
        let s = st.session(&v.session_id).unwrap();
        assert_eq!(s.population.size(), 2);
        assert!(s.population.members().all(|i| i.origin == crate::evolution::Origin::Seed));
        assert_eq!(s.population.parent.genes, st.space().low_seed);
        assert_eq!(s.population.offspring[0].genes, st.space().high_seed);
        assert_eq!(s.text, DEFAULT_TEXT);
    }

    #[test]
    fn creation_validation() {
        let st = studio();
        let bad = |o: ConfigOverrides| st.create_session(NewSession { config: o, text: None }).unwrap_err();
        assert_eq!(bad(ConfigOverrides { epsilon: Some(1.5), ..Default::default() }).code(), "validation");
        assert_eq!(bad(ConfigOverrides { lambda: Some(2), ..Default::default() }).code(), "validation");
        assert_eq!(bad(ConfigOverrides { max_generations: Some(0), ..Default::default() }).code(), "validation");
        let e = st
            .create_session(NewSession { config: Default::default(), text: Some("  ".into()) })
            .unwrap_err();
        assert_eq!(e.code(), "validation");
    }

    #[test]
    fn judgment_advances_and_detects_staleness() {
        let st = studio();
        let v = st.create_session(seeded(2)).unwrap();
        let [a, b] = v.pair;
        let v1 = st.submit_judgment(&v.session_id, Judgment { chosen: a }).unwrap();
        assert_eq!(v1.generation, 1);
        assert_eq!(v1.pair[0], a);
        assert_ne!(v1.pair[1], b);
        let e = st.submit_judgment(&v.session_id, Judgment { chosen: b }).unwrap_err();
        assert_eq!(e.code(), "conflict");
        let e = st
            .submit_judgment(&v.session_id, Judgment { chosen: IndividualId(999) })
            .unwrap_err();
        assert_eq!(e.code(), "conflict");
        assert!(v1.updated_at > v.updated_at);
    }

    #[test]
    fn chosen_clip_is_unchanged_and_new_offspring_differs() {
        let st = studio();
        let v = st.create_session(seeded(3)).unwrap();
        let [a, b] = v.pair;
        let before_a = st.audio(&v.session_id, a).unwrap();
        let before_b = st.audio(&v.session_id, b).unwrap();
        assert_eq!(st.audio(&v.session_id, a).unwrap().wav, before_a.wav);
        let v1 = st.submit_judgment(&v.session_id, Judgment { chosen: b }).unwrap();
        assert_eq!(v1.pair[0], b);
        let after_parent = st.audio(&v.session_id, v1.pair[0]).unwrap();
        let after_child = st.audio(&v.session_id, v1.pair[1]).unwrap();
        assert_eq!(after_parent.wav, before_b.wav);
        assert_ne!(after_child.wav, before_b.wav);
        // superseded individual stays retrievable
        assert_eq!(st.audio(&v.session_id, a).unwrap().etag, before_a.etag);
        assert_eq!(st.audio(&v.session_id, IndividualId(77)).unwrap_err().code(), "not_found");
    }

    #[test]
    fn finish_lifecycle() {
        let st = studio();
        let v = st.create_session(seeded(4)).unwrap();
        let voice = st.finish_session(&v.session_id).unwrap();
        assert_eq!(voice.pca_coeffs, st.space().low_seed);
        assert_eq!(voice.generations, 0);
        assert_eq!(voice.rng_seed, 4);
        assert_eq!(st.finish_session(&v.session_id).unwrap_err().code(), "state");
        assert_eq!(st.current_pair(&v.session_id).unwrap_err().code(), "state");
        assert_eq!(st.voicefile(&v.session_id).unwrap(), voice);
        let e = st.submit_judgment(&v.session_id, Judgment { chosen: v.pair[0] }).unwrap_err();
        assert!(matches!(e, SessionError::State { status: SessionStatus::Finished, .. }));
    }

    #[test]
    fn finish_after_choosing_offspring() {
        let st = studio();
        let v = st.create_session(seeded(5)).unwrap();
        st.submit_judgment(&v.session_id, Judgment { chosen: v.pair[1] }).unwrap();
        let voice = st.finish_session(&v.session_id).unwrap();
        let expected = st.space().pca.inverse(&st.space().high_seed).unwrap();
        assert_eq!(voice.embedding, expected);
        assert_eq!(voice.generations, 1);
    }

    #[test]
    fn abandon_is_terminal() {
        let st = studio();
        let v = st.create_session(seeded(6)).unwrap();
        assert_eq!(st.abandon(&v.session_id).unwrap().status, SessionStatus::Abandoned);
        assert_eq!(st.abandon(&v.session_id).unwrap_err().code(), "state");
        assert_eq!(st.finish_session(&v.session_id).unwrap_err().code(), "state");
        assert_eq!(st.voicefile(&v.session_id).unwrap_err().code(), "state");
    }

    #[test]
    fn max_generation_cap_auto_finishes() {
        let st = studio();
        let mut req = seeded(7);
        req.config.max_generations = Some(3);
        let mut v = st.create_session(req).unwrap();
        for _ in 0..3 {
            v = st.submit_judgment(&v.session_id, Judgment { chosen: v.pair[1] }).unwrap();
        }
        assert_eq!(v.status, SessionStatus::Finished);
        assert_eq!(st.voicefile(&v.session_id).unwrap().generations, 3);
    }

    #[test]
    fn unknown_and_malformed_ids() {
        let st = studio();
        assert_eq!(st.view(&SessionId::generate()).unwrap_err().code(), "not_found");
        assert_eq!("../etc".parse::<SessionId>().unwrap_err().code(), "not_found");
    }

    #[test]
    fn history_invariants_and_replay() {
        let st = studio();
        let v = st.create_session(seeded(8)).unwrap();
        let mut pair = v.pair;
        for g in 0..20u64 {
            let pick = pair[(g % 3 == 0) as usize];
            pair = st.submit_judgment(&v.session_id, Judgment { chosen: pick }).unwrap().pair;
        }
        let s = st.session(&v.session_id).unwrap();
        assert_eq!(s.history.len() as u64, s.generation());
        for (g, h) in s.history.iter().enumerate() {
            assert_eq!(h.population.generation, g as u64);
        }
        assert!(s.verify_replay(st.space()).unwrap());
    }

    #[test]
    fn file_store_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let first = studio_with(Arc::new(FileStore::open(dir.path()).unwrap()));
        let v = first.create_session(seeded(9)).unwrap();
        let mut view = v.clone();
        for _ in 0..5 {
            view = first
                .submit_judgment(&v.session_id, Judgment { chosen: view.pair[1] })
                .unwrap();
        }
        let live = first.session(&v.session_id).unwrap();
        let voice = first.finish_session(&v.session_id).unwrap();

        let second = studio_with(Arc::new(FileStore::open(dir.path()).unwrap()));
        let restored = second.session(&v.session_id).unwrap();
        assert_eq!(restored.population, live.population);
        assert_eq!(restored.history, live.history);
        assert_eq!(restored.status, SessionStatus::Finished);
        assert_eq!(second.voicefile(&v.session_id).unwrap().encode(), voice.encode());
    }

    #[test]
    fn voicefile_renders_like_session_clip() {
        let st = studio();
        let v = st.create_session(seeded(10)).unwrap();
        let v1 = st.submit_judgment(&v.session_id, Judgment { chosen: v.pair[1] }).unwrap();
        let clip = st.audio(&v.session_id, v1.pair[0]).unwrap();
        let voice = st.finish_session(&v.session_id).unwrap();
        let decoded = VoiceFile::decode(&voice.encode()).unwrap();
        let out = st
            .render_voicefile(&decoded, &st.settings().default_text, st.settings().sample_rate)
            .unwrap();
        assert_eq!(out.wav, clip.wav);
    }
}
