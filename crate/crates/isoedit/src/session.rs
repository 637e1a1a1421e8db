//! Editing sessions: an immutable snapshot history with a single writer.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use isoedit_core::field::{FieldModel, ImplicitField};

use crate::error::{AppError, AppResult};

#[derive(Debug)]
struct State {
    current: Arc<FieldModel>,
    /// Intermediate field of a running operation, shown to readers.
    live: Option<Arc<FieldModel>>,
    history: VecDeque<Arc<FieldModel>>,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    depth: usize,
    busy: AtomicBool,
    state: RwLock<State>,
    /// Per-member latent codes when the field is a trained decoder.
    pub latents: Option<Vec<Vec<f64>>>,
}

impl Session {
    pub fn new(id: String, field: FieldModel, depth: usize) -> Self {
        Session {
            id,
            depth: depth.max(1),
            busy: AtomicBool::new(false),
            state: RwLock::new(State { current: Arc::new(field), live: None, history: VecDeque::new() }),
            latents: None,
        }
    }

    /// The field readers should see: the running operation's latest state, if any.
    pub fn view(&self) -> Arc<FieldModel> {
        let s = self.state.read().unwrap();
        s.live.clone().unwrap_or_else(|| s.current.clone())
    }

    /// The last committed field.
    pub fn committed(&self) -> Arc<FieldModel> {
        self.state.read().unwrap().current.clone()
    }

    pub fn history_len(&self) -> usize {
        self.state.read().unwrap().history.len()
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::Acquire)
    }

    /// Claim the session for a mutating operation.
    pub fn begin(self: &Arc<Self>) -> AppResult<WriteGuard> {
        if self.busy.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_err() {
            return Err(AppError::Busy(self.id.clone()));
        }
        Ok(WriteGuard { session: self.clone() })
    }

    pub fn undo(self: &Arc<Self>) -> AppResult<Arc<FieldModel>> {
        let _guard = self.begin()?;
        let mut s = self.state.write().unwrap();
        let prev = s.history.pop_back().ok_or_else(|| AppError::Conflict("nothing to undo".into()))?;
        s.current = prev.clone();
        Ok(prev)
    }
}

/// Exclusive right to modify a session; released on drop.
#[derive(Debug)]
pub struct WriteGuard {
    session: Arc<Session>,
}

impl WriteGuard {
    pub fn session(&self) -> &Arc<Session> {
        &self.session
    }

    pub fn preview(&self, field: FieldModel) {
        self.session.state.write().unwrap().live = Some(Arc::new(field));
    }

    /// Make `field` current, pushing the previous snapshot onto the bounded history.
    pub fn commit(self, field: FieldModel) {
        let mut s = self.session.state.write().unwrap();
        let prev = std::mem::replace(&mut s.current, Arc::new(field));
        s.history.push_back(prev);
        while s.history.len() > self.session.depth {
            s.history.pop_front();
        }
        s.live = None;
    }
}

impl Drop for WriteGuard {
    fn drop(&mut self) {
        if let Ok(mut s) = self.session.state.write() {
            s.live = None;
        }
        self.session.busy.store(false, Ordering::Release);
    }
}

#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    counter: AtomicU64,
}

impl SessionStore {
    pub fn create(&self, field: FieldModel, latents: Option<Vec<Vec<f64>>>, depth: usize) -> Arc<Session> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("s{n}-{:08x}", field.params().fingerprint() as u32);
        let mut session = Session::new(id.clone(), field, depth);
        session.latents = latents;
        let session = Arc::new(session);
        self.sessions.lock().unwrap().insert(id, session.clone());
        session
    }

    pub fn get(&self, id: &str) -> AppResult<Arc<Session>> {
        self.sessions.lock().unwrap().get(id).cloned().ok_or_else(|| AppError::UnknownSession(id.into()))
    }

    pub fn remove(&self, id: &str) -> AppResult<()> {
        self.sessions.lock().unwrap().remove(id).map(|_| ()).ok_or_else(|| AppError::UnknownSession(id.into()))
    }
}
