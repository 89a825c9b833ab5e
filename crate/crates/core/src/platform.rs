//! The shared service handle: storage, object store, clock, randomness and
//! tunables. Every workflow in [`crate::accounts`], [`crate::content`],
//! [`crate::examinations`] and [`crate::messaging`] is a method on
//! [`Platform`].

use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::clock::{Clock, SystemClock};
use crate::domain::{AdminId, Principal, RegisterNumber, DEFAULT_DIGEST_ROUNDS};
use crate::error::{Error, Result};
use crate::storage::{ObjectStore, Store, StoreTx};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub session_ttl: Duration,
    pub max_upload_bytes: u64,
    /// (multiple choice, gap fill) counts.
    pub final_blueprint: (usize, usize),
    pub lecture_blueprint: (usize, usize),
    /// Duration of an unscheduled lecture test.
    pub lecture_test_minutes: u32,
    pub submission_grace: Duration,
    pub password_rounds: u32,
    pub captcha_ttl: Duration,
    pub max_delivery_attempts: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            session_ttl: Duration::hours(12),
            max_upload_bytes: 50 * 1024 * 1024,
            final_blueprint: (20, 10),
            lecture_blueprint: (5, 5),
            lecture_test_minutes: 30,
            submission_grace: Duration::seconds(5),
            password_rounds: DEFAULT_DIGEST_ROUNDS,
            captcha_ttl: Duration::minutes(10),
            max_delivery_attempts: 3,
        }
    }
}

pub struct Platform {
    store: Store,
    objects: ObjectStore,
    clock: Arc<dyn Clock>,
    rng: Mutex<ChaCha8Rng>,
    settings: Settings,
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Platform")
            .field("settings", &self.settings)
            .finish_non_exhaustive()
    }
}

impl Platform {
    pub fn new(
        store: Store,
        objects: ObjectStore,
        clock: Arc<dyn Clock>,
        rng: ChaCha8Rng,
        settings: Settings,
    ) -> Self {
        Self {
            store,
            objects,
            clock,
            rng: Mutex::new(rng),
            settings,
        }
    }

    /// A migrated in-memory database with objects under `data_root`.
    /// `seed` pins the random source; `None` seeds from the OS.
    pub fn ephemeral(
        data_root: &Path,
        clock: Arc<dyn Clock>,
        seed: Option<u64>,
        settings: Settings,
    ) -> Result<Self> {
        let store = Store::open_migrated(":memory:")?;
        let objects = ObjectStore::open(data_root)?;
        Ok(Self::new(store, objects, clock, seeded_rng(seed), settings))
    }

    pub fn with_system_clock(store: Store, objects: ObjectStore, settings: Settings) -> Self {
        Self::new(
            store,
            objects,
            Arc::new(SystemClock),
            seeded_rng(None),
            settings,
        )
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn objects(&self) -> &ObjectStore {
        &self.objects
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub(crate) fn with_rng<T>(&self, f: impl FnOnce(&mut ChaCha8Rng) -> T) -> T {
        let mut rng = self.rng.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut rng)
    }

    pub(crate) fn random_hex(&self, bytes: usize) -> String {
        use rand::RngCore;
        let mut buf = vec![0u8; bytes];
        self.with_rng(|r| r.fill_bytes(&mut buf));
        hex::encode(buf)
    }

    pub(crate) fn transaction<T>(&self, f: impl FnOnce(&StoreTx<'_>) -> Result<T>) -> Result<T> {
        self.store.transaction(f)
    }
}

pub fn seeded_rng(seed: Option<u64>) -> ChaCha8Rng {
    match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_entropy(),
    }
}

pub(crate) fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

pub(crate) fn require_admin(actor: Principal) -> Result<AdminId> {
    match actor {
        Principal::Admin(id) => Ok(id),
        Principal::User(_) => Err(Error::NotAuthorized),
    }
}

pub(crate) fn require_user(actor: Principal) -> Result<RegisterNumber> {
    match actor {
        Principal::User(am) => Ok(am),
        Principal::Admin(_) => Err(Error::NotAuthorized),
    }
}

/// Outcome of one item in a batch operation.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ItemOutcome<Id, D = ()> {
    pub id: Id,
    #[serde(flatten)]
    pub status: ItemStatus<D>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ItemStatus<D> {
    Deleted {
        #[serde(flatten)]
        detail: D,
    },
    NotFound,
    Refused {
        code: String,
    },
}

impl<Id, D> ItemOutcome<Id, D> {
    pub fn is_deleted(&self) -> bool {
        matches!(self.status, ItemStatus::Deleted { .. })
    }
}
