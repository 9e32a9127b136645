use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use cyscolor::colorizer::Colorizer;
use cyscolor::config::Config;
use cyscolor::dataset::CategoryVocab;
use cyscolor::palette_gan::PaletteGan;
use cyscolor::Palette;
use uuid::Uuid;

use crate::feedback::{ContextDigest, FeedbackLog};

/// An immutable loaded model and its version digest.
pub struct Loaded<M> {
    pub model: M,
    pub version: String,
}

pub type PaletteSlot = Arc<Loaded<PaletteGan>>;
pub type ColorizerSlot = Arc<Loaded<Colorizer>>;

#[derive(Debug, Clone)]
pub struct Session {
    pub created: Instant,
    pub digest: ContextDigest,
    pub image: Arc<Vec<u8>>,
    pub original: Palette,
    pub current: Palette,
    pub model_version: String,
    pub seed: u64,
}

pub struct Inner {
    pub config: Config,
    pub categories: CategoryVocab,
    palette: RwLock<Option<PaletteSlot>>,
    colorizer: RwLock<Option<ColorizerSlot>>,
    sessions: Mutex<HashMap<Uuid, Session>>,
    pub feedback: Mutex<FeedbackLog>,
}

#[derive(Clone)]
pub struct AppState(pub Arc<Inner>);

impl AppState {
    pub fn new(config: Config) -> cyscolor::Result<Self> {
        let categories = config.category_vocab()?;
        let feedback = FeedbackLog::open(&config.data_dir)?;
        Ok(AppState(Arc::new(Inner {
            config,
            categories,
            palette: RwLock::new(None),
            colorizer: RwLock::new(None),
            sessions: Mutex::new(HashMap::new()),
            feedback: Mutex::new(feedback),
        })))
    }

    /// Loads whichever model paths the configuration names.
    pub fn from_config(config: Config) -> cyscolor::Result<Self> {
        let state = AppState::new(config)?;
        if let Some(p) = &state.0.config.palette_model {
            state.set_palette_model(PaletteGan::load(p)?)?;
        }
        if let Some(p) = &state.0.config.colorizer_model {
            state.set_colorizer_model(Colorizer::load(p)?)?;
        }
        Ok(state)
    }

    pub fn config(&self) -> &Config {
        &self.0.config
    }

    /// Atomically replaces the palette model; requests already running keep
    /// the snapshot they started with.
    pub fn set_palette_model(&self, model: PaletteGan) -> cyscolor::Result<()> {
        let version = model.version()?;
        *self.0.palette.write().expect("model lock") = Some(Arc::new(Loaded { model, version }));
        Ok(())
    }

    pub fn set_colorizer_model(&self, model: Colorizer) -> cyscolor::Result<()> {
        let version = model.version()?;
        *self.0.colorizer.write().expect("model lock") = Some(Arc::new(Loaded { model, version }));
        Ok(())
    }

    pub fn palette_model(&self) -> Option<PaletteSlot> {
        self.0.palette.read().expect("model lock").clone()
    }

    pub fn colorizer_model(&self) -> Option<ColorizerSlot> {
        self.0.colorizer.read().expect("model lock").clone()
    }

    fn ttl(&self) -> Duration {
        Duration::from_secs(self.0.config.session_ttl_secs)
    }

    pub fn insert_session(&self, session: Session) -> Uuid {
        let id = Uuid::new_v4();
        let ttl = self.ttl();
        let mut sessions = self.0.sessions.lock().expect("session lock");
        sessions.retain(|_, s| s.created.elapsed() < ttl);
        sessions.insert(id, session);
        id
    }

    /// Copy of a live session.
    pub fn session(&self, id: &Uuid) -> Option<Session> {
        let ttl = self.ttl();
        let sessions = self.0.sessions.lock().expect("session lock");
        sessions.get(id).filter(|s| s.created.elapsed() < ttl).cloned()
    }

    /// Applies `f` to a live session under the store lock.
    pub fn update_session<T>(&self, id: &Uuid, f: impl FnOnce(&mut Session) -> T) -> Option<T> {
        let ttl = self.ttl();
        let mut sessions = self.0.sessions.lock().expect("session lock");
        sessions.get_mut(id).filter(|s| s.created.elapsed() < ttl).map(f)
    }
}
