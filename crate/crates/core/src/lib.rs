pub mod accounts;
pub mod api;
pub mod cli;
pub mod clock;
pub mod config;
pub mod content;
pub mod domain;
pub mod error;
pub mod examinations;
pub mod messaging;
pub mod platform;
pub mod storage;

pub use clock::{Clock, ManualClock, SystemClock};
pub use error::{Error, Result};
pub use platform::{Platform, Settings};
