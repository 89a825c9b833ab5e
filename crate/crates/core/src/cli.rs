//! Operator commands: `serve`, `migrate`, `seed-admin`, `drain`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 storage error, 3 runtime error.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration as StdDuration;

use clap::{Args, Parser, Subcommand};
use tower_http::services::ServeDir;

use crate::clock::SystemClock;
use crate::config::{Config, MailConfig};
use crate::domain::PersonProfile;
use crate::error::Error;
use crate::messaging::{FileSink, MailTransport, SmtpRelay};
use crate::platform::{seeded_rng, Platform};
use crate::storage::{embedded_migrations, Migration, ObjectStore, Store};

pub const DRAIN_INTERVAL: StdDuration = StdDuration::from_secs(30);

#[derive(Debug, Parser)]
#[command(name = "satep", version, about = "Tele-education platform server")]
pub struct Cli {
    /// key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Permit `rng_seed`. For reproducible test runs only.
    #[arg(long, global = true)]
    pub allow_deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP server with the periodic outbox drain.
    Serve {
        /// Apply pending migrations before binding.
        #[arg(long)]
        migrate: bool,
    },
    /// Apply pending migrations.
    Migrate,
    /// Create an administrator and print its generated password once.
    SeedAdmin(SeedArgs),
    /// Deliver pending outbox mail once.
    Drain,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub surname: String,
    #[arg(long)]
    pub username: String,
    #[arg(long)]
    pub email: String,
    #[arg(long)]
    pub department: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Config = 1,
    Storage = 2,
    Runtime = 3,
}

/// Which exit code an error maps to.
pub fn classify(e: &Error) -> Failure {
    match e {
        Error::Config(_) => Failure::Config,
        Error::Storage(_) | Error::MigrationConflict { .. } => Failure::Storage,
        _ => Failure::Runtime,
    }
}

fn migrations(cfg: &Config) -> crate::Result<Vec<Migration>> {
    match &cfg.migrations_dir {
        Some(dir) => Migration::load_dir(dir).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("migrations_dir {}: {io}", dir.display())),
            other => other,
        }),
        None => Ok(embedded_migrations()),
    }
}

fn open_store(cfg: &Config) -> crate::Result<Store> {
    if !cfg.data_root.is_dir() {
        return Err(Error::Config(format!(
            "data_root {} is not a directory",
            cfg.data_root.display()
        )));
    }
    Store::open(&cfg.database_path())
}

/// Opens storage for a command. Without `migrate`, pending migrations are an error.
pub fn open_platform(cfg: &Config, migrate: bool) -> crate::Result<Platform> {
    let store = open_store(cfg)?;
    let all = migrations(cfg)?;
    if migrate {
        store.migrate(&all)?;
    } else {
        let pending = store.pending_migrations(&all)?;
        if !pending.is_empty() {
            return Err(Error::Storage(format!(
                "{} pending migration(s) {pending:?}; run `satep migrate` or pass --migrate",
                pending.len()
            )));
        }
    }
    let objects = ObjectStore::open(&cfg.data_root)?;
    Ok(Platform::new(
        store,
        objects,
        Arc::new(SystemClock),
        seeded_rng(cfg.rng_seed),
        cfg.settings(),
    ))
}

pub fn transport(cfg: &Config) -> crate::Result<Box<dyn MailTransport>> {
    Ok(match &cfg.mail {
        MailConfig::FileSink { .. } => Box::new(FileSink::new(cfg.mail_dir())?),
        MailConfig::Smtp(s) => Box::new(SmtpRelay::new(s)?),
    })
}

pub fn migrate(cfg: &Config) -> crate::Result<Vec<Migration>> {
    open_store(cfg)?.migrate(&migrations(cfg)?)
}

pub fn seed_admin(
    cfg: &Config,
    args: &SeedArgs,
) -> crate::Result<(crate::domain::AdminId, String)> {
    let platform = open_platform(cfg, false)?;
    platform.seed_admin(&PersonProfile {
        name: args.name.clone(),
        surname: args.surname.clone(),
        username: args.username.clone(),
        email: args.email.clone(),
        department: args.department.clone(),
    })
}

pub fn drain(cfg: &Config) -> crate::Result<crate::messaging::DrainReport> {
    let platform = open_platform(cfg, false)?;
    let transport = transport(cfg)?;
    platform.drain_outbox(transport.as_ref())
}

/// One pass of the background work: deliver mail, close overdue sittings.
fn housekeeping(platform: &Platform, transport: &dyn MailTransport) {
    match platform.drain_outbox(transport) {
        Ok(r) if r.sent + r.failed > 0 => {
            log::info!("outbox: {} sent, {} failed", r.sent, r.failed)
        }
        Ok(_) | Err(Error::DrainInProgress) => {}
        Err(e) => log::warn!("outbox drain: {e}"),
    }
    match platform.expire_overdue(None) {
        Ok(0) => {}
        Ok(n) => log::info!("closed {n} overdue sitting(s)"),
        Err(e) => log::warn!("expiry sweep: {e}"),
    }
}

/// Binds, prints `listening on <addr>`, and serves until `shutdown` resolves.
/// Migrations and subsystem checks finish before the socket is opened.
pub async fn serve(
    cfg: &Config,
    migrate: bool,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> crate::Result<()> {
    let platform = Arc::new(open_platform(cfg, migrate)?);
    let transport: Arc<dyn MailTransport> = Arc::from(transport(cfg)?);
    if let Some(dir) = &cfg.static_dir {
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "static_dir {} is not a directory",
                dir.display()
            )));
        }
    }

    let listener = tokio::net::TcpListener::bind(&cfg.listen_address)
        .await
        .map_err(|e| Error::Internal(format!("cannot bind {}: {e}", cfg.listen_address)))?;
    let addr = listener.local_addr()?;
    println!("listening on {addr}");
    log::info!("listening on {addr}");

    let worker = {
        let platform = platform.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(DRAIN_INTERVAL);
            loop {
                tick.tick().await;
                let (p, t) = (platform.clone(), transport.clone());
                let _ = tokio::task::spawn_blocking(move || housekeeping(&p, t.as_ref())).await;
            }
        })
    };

    let mut app = crate::api::router(platform);
    if let Some(dir) = &cfg.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    let res = axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await;
    worker.abort();
    res.map_err(|e| Error::Internal(format!("server: {e}")))
}

/// Ctrl-C, or SIGTERM on unix.
pub async fn termination() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    {
        let mut term =
            match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
                Ok(s) => s,
                Err(_) => return ctrl_c.await,
            };
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    ctrl_c.await;
    log::info!("shutting down");
}

fn execute(cli: Cli) -> crate::Result<()> {
    let cfg = Config::load(cli.config.as_deref(), &cli.set, cli.allow_deterministic)?;
    match cli.command {
        Command::Serve { migrate } => {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::Internal(format!("runtime: {e}")))?;
            rt.block_on(serve(&cfg, migrate, termination()))
        }
        Command::Migrate => {
            let applied = migrate(&cfg)?;
            if applied.is_empty() {
                println!("no pending migrations");
            }
            for m in applied {
                println!("applied {:04} {}", m.version, m.name);
            }
            Ok(())
        }
        Command::SeedAdmin(args) => {
            let (id, password) = seed_admin(&cfg, &args)?;
            println!("created administrator {} ({id})", args.username);
            println!("password: {password}");
            Ok(())
        }
        Command::Drain => {
            let report = drain(&cfg)?;
            println!("sent {} failed {}", report.sent, report.failed);
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Failure::Config as i32
            } else {
                0
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let failure = classify(&e);
            eprintln!(
                "satep: {} error: {e}",
                format!("{failure:?}").to_lowercase()
            );
            failure as i32
        }
    }
}
