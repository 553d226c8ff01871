use std::sync::{Arc, OnceLock};

use chrono::{TimeZone, Utc};
use evoforge_core::corpus::VoiceSpace;
use evoforge_core::evolution::{IndividualId, Judgment};
use evoforge_core::judge::{draw_target, SimulatedJudge};
use evoforge_core::rng::{EvoRng, STREAM_JUDGE};
use evoforge_core::session::{
    replay, ConfigOverrides, FileStore, FixedClock, MemoryStore, NewSession, SessionError, Submission, SessionStore, Studio,
    StudioSettings,
};
use evoforge_core::synth::BackendRegistry;

fn space() -> Arc<VoiceSpace> {
    static SPACE: OnceLock<Arc<VoiceSpace>> = OnceLock::new();
    Arc::clone(SPACE.get_or_init(|| Arc::new(VoiceSpace::reference())))
}

fn studio(store: Arc<dyn SessionStore>) -> Studio {
    let start = Utc.with_ymd_and_hms(2025, 6, 1, 9, 30, 0).unwrap();
    Studio::new(
        space(),
        BackendRegistry::default(),
        store,
        Arc::new(FixedClock::at(start)),
        StudioSettings::default(),
    )
    .unwrap()
}

fn request(seed: u64) -> NewSession {
    NewSession {
        config: ConfigOverrides { rng_seed: Some(seed), ..Default::default() },
        text: Some("replay me please".into()),
    }
}

/// Drives a session with a simulated listener and returns its transcript.
fn drive(st: &Studio, seed: u64, steps: usize) -> (evoforge_core::session::SessionId, Vec<Judgment>) {
    let v = st.create_session(request(seed)).unwrap();
    let judge = SimulatedJudge::new(draw_target(&st.space().pca, seed), 0.1).unwrap();
    let mut rng = EvoRng::new(seed, STREAM_JUDGE);
    let mut transcript = Vec::new();
    for _ in 0..steps {
        let s = st.session(&v.session_id).unwrap();
        let j = judge.judge_population(&s.population, &mut rng);
        st.submit_judgment(&v.session_id, j).unwrap();
        transcript.push(j);
    }
    (v.session_id, transcript)
}

#[test]
fn fifty_judgment_transcript_replays_bit_exactly() {
    let original = studio(Arc::new(MemoryStore::default()));
    let (id, transcript) = drive(&original, 4242, 50);
    let live = original.session(&id).unwrap();
    assert_eq!(live.generation(), 50);
    assert_eq!(live.history.len(), 50);
    assert!(live.verify_replay(original.space()).unwrap());

    let fresh = studio(Arc::new(MemoryStore::default()));
    let v = fresh.create_session(request(4242)).unwrap();
    for j in &transcript {
        fresh.submit_judgment(&v.session_id, *j).unwrap();
    }
    let replayed = fresh.session(&v.session_id).unwrap();
    let bits = |s: &evoforge_core::session::Session| -> Vec<u64> {
        s.population.parent.genes.as_slice().iter().map(|x| x.to_bits()).collect()
    };
    assert_eq!(bits(&replayed), bits(&live));
    assert_eq!(replayed.population, live.population);

    for individual in live.pair() {
        assert_eq!(
            original.audio(&id, individual).unwrap().wav,
            fresh.audio(&v.session_id, individual).unwrap().wav
        );
    }
    let a = original.finish_session(&id).unwrap();
    let b = fresh.finish_session(&v.session_id).unwrap();
    assert_eq!(a.encode(), b.encode());

    let (population, history, _) = replay(&space(), &live.config, &transcript).unwrap();
    assert_eq!(population, live.population);
    assert_eq!(history, live.history);
}

#[test]
fn same_seed_same_pair_audio() {
    let st = studio(Arc::new(MemoryStore::default()));
    let a = st.create_session(request(1)).unwrap();
    let b = st.create_session(request(1)).unwrap();
    assert_ne!(a.session_id, b.session_id);
    for (x, y) in a.pair.iter().zip(&b.pair) {
        let ca = st.audio(&a.session_id, *x).unwrap();
        let cb = st.audio(&b.session_id, *y).unwrap();
        assert_eq!(ca.wav, cb.wav);
        assert_eq!(ca.etag, cb.etag);
    }
}

#[test]
fn duplicate_in_flight_judgments_first_wins() {
    let st = Arc::new(studio(Arc::new(MemoryStore::default())));
    let v = st.create_session(request(2)).unwrap();
    let chosen = v.pair[1];
    let outcomes: Vec<Result<_, SessionError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let st = Arc::clone(&st);
                let id = v.session_id.clone();
                scope.spawn(move || st.submit_judgment(&id, Submission { chosen, generation: Some(0) }))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(outcomes.iter().filter(|r| r.is_ok()).count(), 1);
    assert!(outcomes.iter().filter_map(|r| r.as_ref().err()).all(|e| e.code() == "conflict"));
    assert_eq!(st.view(&v.session_id).unwrap().generation, 1);
    // without a generation, re-choosing the surviving parent is a fresh choice
    st.submit_judgment(&v.session_id, Judgment { chosen }).unwrap();
    assert_eq!(st.view(&v.session_id).unwrap().generation, 2);
}

#[test]
fn sessions_progress_independently_in_parallel() {
    let st = Arc::new(studio(Arc::new(MemoryStore::default())));
    std::thread::scope(|scope| {
        for seed in 0..6u64 {
            let st = Arc::clone(&st);
            scope.spawn(move || {
                let (id, transcript) = drive(&st, 100 + seed, 15);
                let s = st.session(&id).unwrap();
                assert_eq!(s.transcript(), transcript);
                assert!(s.verify_replay(st.space()).unwrap());
            });
        }
    });
}

#[test]
fn restored_session_continues_where_it_stopped() {
    let dir = tempfile::tempdir().unwrap();
    let first = studio(Arc::new(FileStore::open(dir.path()).unwrap()));
    let (id, mut transcript) = drive(&first, 77, 12);

    let second = studio(Arc::new(FileStore::open(dir.path()).unwrap()));
    let restored = second.session(&id).unwrap();
    assert_eq!(restored.generation(), 12);
    let next = Judgment { chosen: restored.pair()[1] };
    second.submit_judgment(&id, next).unwrap();
    transcript.push(next);

    let reference = studio(Arc::new(MemoryStore::default()));
    let v = reference.create_session(request(77)).unwrap();
    for j in &transcript {
        reference.submit_judgment(&v.session_id, *j).unwrap();
    }
    assert_eq!(
        second.session(&id).unwrap().population,
        reference.session(&v.session_id).unwrap().population
    );
    assert_eq!(second.audio(&id, IndividualId(0)).unwrap().wav, reference.audio(&v.session_id, IndividualId(0)).unwrap().wav);
}
