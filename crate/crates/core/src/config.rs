//! Operator configuration. A plain `key = value` file, overridden by
//! `SATEP_<KEY>` environment variables, overridden by `--set key=value`.
//!
//! | key | default |
//! |---|---|
//! | `listen_address` | `127.0.0.1:8080` |
//! | `data_root` | `./data` |
//! | `database_location` | `<data_root>/satep.sqlite3` |
//! | `migrations_dir` | embedded migrations |
//! | `mail_transport` | `file_sink` (or `smtp`) |
//! | `mail_dir` | `<data_root>/mail` |
//! | `smtp_host`, `smtp_port`, `smtp_user`, `smtp_secret`, `smtp_from` | port 587 |
//! | `session_ttl_hours` | 12 |
//! | `max_upload_mib` | 50 |
//! | `final_blueprint` | `20,10` |
//! | `lecture_blueprint` | `5,5` |
//! | `lecture_test_minutes` | 30 |
//! | `password_rounds` | 100000 |
//! | `static_dir` | unset |
//! | `rng_seed` | unset; needs `--allow-deterministic` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::Duration;

use crate::domain::DEFAULT_DIGEST_ROUNDS;
use crate::error::{Error, Result};
use crate::messaging::SmtpSettings;
use crate::platform::Settings;

pub const ENV_PREFIX: &str = "SATEP_";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MailConfig {
    FileSink { dir: Option<PathBuf> },
    Smtp(SmtpSettings),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub listen_address: String,
    pub data_root: PathBuf,
    pub database_location: Option<String>,
    pub migrations_dir: Option<PathBuf>,
    pub mail: MailConfig,
    pub session_ttl_hours: u32,
    pub max_upload_mib: u64,
    pub final_blueprint: (usize, usize),
    pub lecture_blueprint: (usize, usize),
    pub lecture_test_minutes: u32,
    pub password_rounds: u32,
    pub static_dir: Option<PathBuf>,
    pub rng_seed: Option<u64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:8080".into(),
            data_root: PathBuf::from("./data"),
            database_location: None,
            migrations_dir: None,
            mail: MailConfig::FileSink { dir: None },
            session_ttl_hours: 12,
            max_upload_mib: 50,
            final_blueprint: (20, 10),
            lecture_blueprint: (5, 5),
            lecture_test_minutes: 30,
            password_rounds: DEFAULT_DIGEST_ROUNDS,
            static_dir: None,
            rng_seed: None,
        }
    }
}

const KEYS: &[&str] = &[
    "listen_address",
    "data_root",
    "database_location",
    "migrations_dir",
    "mail_transport",
    "mail_dir",
    "smtp_host",
    "smtp_port",
    "smtp_user",
    "smtp_secret",
    "smtp_from",
    "session_ttl_hours",
    "max_upload_mib",
    "final_blueprint",
    "lecture_blueprint",
    "lecture_test_minutes",
    "password_rounds",
    "static_dir",
    "rng_seed",
];

/// Raw key/value layer before typing.
pub type Layer = BTreeMap<String, String>;

/// Parses the file format. `#` starts a comment line; blank lines are skipped.
pub fn parse_layer(text: &str) -> Result<Layer> {
    let mut out = Layer::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let key = k.trim().to_owned();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "line {}: unknown key {key:?}",
                n + 1
            )));
        }
        if out.insert(key.clone(), v.trim().to_owned()).is_some() {
            return Err(Error::Config(format!("line {}: {key} given twice", n + 1)));
        }
    }
    Ok(out)
}

/// `SATEP_<KEY>` variables for known keys. Other variables are ignored.
pub fn env_layer(vars: impl IntoIterator<Item = (String, String)>) -> Layer {
    vars.into_iter()
        .filter_map(|(k, v)| {
            let key = k.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase();
            KEYS.contains(&key.as_str()).then_some((key, v))
        })
        .collect()
}

/// `key=value` pairs from the command line.
pub fn flag_layer(sets: &[String]) -> Result<Layer> {
    let mut out = Layer::new();
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set {s:?}: expected key=value")))?;
        let key = k.trim().to_owned();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("--set: unknown key {key:?}")));
        }
        out.insert(key, v.trim().to_owned());
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(layer: &Layer, key: &str) -> Result<Option<T>> {
    layer
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: {v:?} is not a valid number")))
        })
        .transpose()
}

fn pair(layer: &Layer, key: &str) -> Result<Option<(usize, usize)>> {
    let Some(v) = layer.get(key) else {
        return Ok(None);
    };
    let bad = || Error::Config(format!("{key}: {v:?} is not <mc>,<gf>"));
    let (a, b) = v.split_once(',').ok_or_else(bad)?;
    Ok(Some((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    )))
}

impl Config {
    /// Later layers win. `rng_seed` is refused unless deterministic mode was asked for.
    pub fn from_layers(layers: &[Layer], allow_deterministic: bool) -> Result<Self> {
        let mut merged = Layer::new();
        for l in layers {
            merged.extend(l.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        let cfg = Self::from_layer(&merged)?;
        if cfg.rng_seed.is_some() && !allow_deterministic {
            return Err(Error::Config(
                "rng_seed is set but --allow-deterministic was not given".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// File, then process environment, then `--set` flags.
    pub fn load(file: Option<&Path>, sets: &[String], allow_deterministic: bool) -> Result<Self> {
        let mut layers = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            layers.push(parse_layer(&text)?);
        }
        layers.push(env_layer(std::env::vars()));
        layers.push(flag_layer(sets)?);
        Self::from_layers(&layers, allow_deterministic)
    }

    fn from_layer(l: &Layer) -> Result<Self> {
        let d = Config::default();
        let text = |k: &str| l.get(k).cloned();
        let mail = match l
            .get("mail_transport")
            .map(String::as_str)
            .unwrap_or("file_sink")
        {
            "file_sink" => MailConfig::FileSink {
                dir: text("mail_dir").map(PathBuf::from),
            },
            "smtp" => MailConfig::Smtp(SmtpSettings {
                host: text("smtp_host")
                    .ok_or_else(|| Error::Config("smtp_host is required for smtp".into()))?,
                port: num(l, "smtp_port")?.unwrap_or(587),
                user: text("smtp_user").unwrap_or_default(),
                secret: text("smtp_secret").unwrap_or_default(),
                from: text("smtp_from")
                    .ok_or_else(|| Error::Config("smtp_from is required for smtp".into()))?,
            }),
            other => {
                return Err(Error::Config(format!(
                    "mail_transport: {other:?} is not file_sink or smtp"
                )))
            }
        };
        Ok(Self {
            listen_address: text("listen_address").unwrap_or(d.listen_address),
            data_root: text("data_root").map(PathBuf::from).unwrap_or(d.data_root),
            database_location: text("database_location"),
            migrations_dir: text("migrations_dir").map(PathBuf::from),
            mail,
            session_ttl_hours: num(l, "session_ttl_hours")?.unwrap_or(d.session_ttl_hours),
            max_upload_mib: num(l, "max_upload_mib")?.unwrap_or(d.max_upload_mib),
            final_blueprint: pair(l, "final_blueprint")?.unwrap_or(d.final_blueprint),
            lecture_blueprint: pair(l, "lecture_blueprint")?.unwrap_or(d.lecture_blueprint),
            lecture_test_minutes: num(l, "lecture_test_minutes")?.unwrap_or(d.lecture_test_minutes),
            password_rounds: num(l, "password_rounds")?.unwrap_or(d.password_rounds),
            static_dir: text("static_dir").map(PathBuf::from),
            rng_seed: num(l, "rng_seed")?,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.listen_address.trim().is_empty() {
            return Err(Error::Config("listen_address must not be empty".into()));
        }
        for (key, v) in [
            ("session_ttl_hours", u64::from(self.session_ttl_hours)),
            ("max_upload_mib", self.max_upload_mib),
            ("lecture_test_minutes", u64::from(self.lecture_test_minutes)),
            ("password_rounds", u64::from(self.password_rounds)),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be at least 1")));
            }
        }
        for (key, (mc, gf)) in [
            ("final_blueprint", self.final_blueprint),
            ("lecture_blueprint", self.lecture_blueprint),
        ] {
            if mc + gf == 0 {
                return Err(Error::Config(format!(
                    "{key} must ask at least one question"
                )));
            }
        }
        Ok(())
    }

    /// The file format; [`parse_layer`] reads it back to an equal config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("listen_address", &self.listen_address);
        put("data_root", &self.data_root.display());
        if let Some(db) = &self.database_location {
            put("database_location", db);
        }
        if let Some(dir) = &self.migrations_dir {
            put("migrations_dir", &dir.display());
        }
        match &self.mail {
            MailConfig::FileSink { dir } => {
                put("mail_transport", &"file_sink");
                if let Some(dir) = dir {
                    put("mail_dir", &dir.display());
                }
            }
            MailConfig::Smtp(s) => {
                put("mail_transport", &"smtp");
                put("smtp_host", &s.host);
                put("smtp_port", &s.port);
                put("smtp_user", &s.user);
                put("smtp_secret", &s.secret);
                put("smtp_from", &s.from);
            }
        }
        put("session_ttl_hours", &self.session_ttl_hours);
        put("max_upload_mib", &self.max_upload_mib);
        put(
            "final_blueprint",
            &format!("{},{}", self.final_blueprint.0, self.final_blueprint.1),
        );
        put(
            "lecture_blueprint",
            &format!("{},{}", self.lecture_blueprint.0, self.lecture_blueprint.1),
        );
        put("lecture_test_minutes", &self.lecture_test_minutes);
        put("password_rounds", &self.password_rounds);
        if let Some(dir) = &self.static_dir {
            put("static_dir", &dir.display());
        }
        if let Some(seed) = self.rng_seed {
            put("rng_seed", &seed);
        }
        out
    }

    pub fn database_path(&self) -> String {
        self.database_location
            .clone()
            .unwrap_or_else(|| self.data_root.join("satep.sqlite3").display().to_string())
    }

    pub fn mail_dir(&self) -> PathBuf {
        match &self.mail {
            MailConfig::FileSink { dir: Some(dir) } => dir.clone(),
            _ => self.data_root.join("mail"),
        }
    }

    pub fn settings(&self) -> Settings {
        Settings {
            session_ttl: Duration::hours(i64::from(self.session_ttl_hours)),
            max_upload_bytes: self.max_upload_mib * 1024 * 1024,
            final_blueprint: self.final_blueprint,
            lecture_blueprint: self.lecture_blueprint,
            lecture_test_minutes: self.lecture_test_minutes,
            password_rounds: self.password_rounds,
            ..Settings::default()
        }
    }
}
