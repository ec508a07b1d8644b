use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("cannot write {}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

/// CSV with a `#` metadata line, then `header`, then `rows` (fields in header order).
pub fn write_csv<R: Serialize>(path: &Path, hash: &str, header: &[&str], rows: &[R]) -> Result<(), Failure> {
    let mut file = File::create(path).map_err(|e| io_failure(path, e))?;
    writeln!(file, "# ain-sim {} config_hash={hash}", env!("CARGO_PKG_VERSION")).map_err(|e| io_failure(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(|e| io_failure(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
}

pub fn in_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
