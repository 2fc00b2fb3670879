//! Log-level gate driven by SPECFLOW_LOG (quiet by default).

use std::sync::OnceLock;

#[derive(PartialEq, PartialOrd, Clone, Copy)]
pub enum Level {
    Quiet = 0,
    Info = 1,
    Debug = 2,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

pub fn init() {
    let level = match std::env::var("SPECFLOW_LOG").as_deref() {
        Ok("debug") => Level::Debug,
        Ok("info") => Level::Info,
        _ => Level::Quiet,
    };
    let _ = LEVEL.set(level);
}

pub fn enabled(level: Level) -> bool {
    *LEVEL.get().unwrap_or(&Level::Quiet) >= level
}

pub fn info(msg: impl AsRef<str>) {
    if enabled(Level::Info) {
        eprintln!("[specflow] {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if enabled(Level::Debug) {
        eprintln!("[specflow:debug] {}", msg.as_ref());
    }
}
