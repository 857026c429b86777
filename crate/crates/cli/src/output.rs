use std::io::{self, Write};

use serde_json::{json, Value};
use svp_core::Error;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Verification, audit or protocol failure (exit 1).
    Rejected(String),
    /// Bad arguments or input (exit 2).
    Usage(String),
    /// Filesystem or network failure (exit 3).
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Rejected(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Rejected(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_) | Error::Transport(_) | Error::Timeout => Failure::Io(msg),
            Error::InvalidParams(_)
            | Error::Salt { .. }
            | Error::Content(_)
            | Error::UnknownLabel(_)
            | Error::Duplicate(_)
            | Error::NotFound(_)
            | Error::Entropy(_) => Failure::Usage(msg),
            _ => Failure::Rejected(msg),
        }
    }
}

pub struct Output {
    pub json: bool,
}

impl Output {
    /// Prints `human` or, in JSON mode, `value` on one line.
    pub fn emit(&self, human: impl AsRef<str>, value: Value) {
        let mut stdout = io::stdout().lock();
        if self.json {
            let _ = writeln!(stdout, "{}", svp_core::canonical::to_string(&value));
        } else {
            let _ = writeln!(stdout, "{}", human.as_ref());
        }
        let _ = stdout.flush();
    }

    pub fn failure(&self, f: &Failure) {
        if self.json {
            let v = json!({"ok": false, "exit_code": f.code(), "error": f.message()});
            println!("{}", svp_core::canonical::to_string(&v));
        } else {
            eprintln!("svp: {}", f.message());
        }
    }
}
