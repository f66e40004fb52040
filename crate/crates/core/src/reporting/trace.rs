use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::ReportError;
use crate::engine::{StrategyKind, TraceRecord};

pub fn trace_file_name(problem: &str, strategy: StrategyKind, seed: u64) -> String {
    format!("{problem}__{strategy}__seed{seed}.jsonl")
}

/// Appends `record` as one JSON line with a single write, so readers never
/// observe half a record from a finished write.
pub fn append_trace_record(path: &Path, record: &TraceRecord) -> Result<(), ReportError> {
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| ReportError::io(path, e))?;
    f.write_all(&line).map_err(|e| ReportError::io(path, e))?;
    f.flush().map_err(|e| ReportError::io(path, e))
}

/// Reads every complete line of a trace file. A trailing line without a
/// newline is an interrupted write and is skipped.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| ReportError::BadRecord { path: path.to_path_buf(), line: i + 1, source })
        })
        .collect()
}

/// All `*.jsonl` traces in `dir`, in file-name order.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<(PathBuf, Vec<TraceRecord>)>, ReportError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ReportError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let t = read_trace(&p)?;
            Ok((p, t))
        })
        .collect()
}
