use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<sostest::Error> for CliError {
    fn from(e: sostest::Error) -> Self {
        use sostest::Error::*;
        let code = match e {
            DimensionMismatch { .. }
            | InvalidIndex(_)
            | DegreeOverflow { .. }
            | InvalidParameter(_)
            | NegativeValue { .. }
            | Schema(_) => EXIT_USAGE,
            IllConditioned { .. } | IterationCap { .. } | NotPsd { .. } | NotRefuted | Contradiction | TooLarge(_) => {
                EXIT_NUMERICAL
            }
        };
        CliError { code, message: e.to_string() }
    }
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

/// Writes to `out`, or stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::usage(format!("cannot write stdout: {e}")))
        }
    }
}

/// `{"command", "effective", ...body}` as pretty JSON with a trailing newline.
pub fn json_document(command: &str, effective: Map<String, Value>, body: Map<String, Value>) -> String {
    let mut doc = Map::new();
    doc.insert("command".into(), command.into());
    doc.insert("effective".into(), Value::Object(effective));
    doc.extend(body);
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json values serialize");
    s.push('\n');
    s
}
