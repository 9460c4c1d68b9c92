use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PredictionRecord, RunnerError};

/// Progress of one trial as recorded in `index.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialStatus {
    pub expected: usize,
    pub written: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub trials: BTreeMap<String, TrialStatus>,
}

/// Append-only results for one run:
///
/// ```text
/// <root>/<run_id>/trials/<trial_id>.jsonl
/// <root>/<run_id>/index.json
/// <root>/<run_id>/manifest.json
/// ```
///
/// Only one writer may use a run directory at a time.
#[derive(Debug, Clone)]
pub struct ResultsStore {
    dir: PathBuf,
}

fn io_err(path: &Path, e: io::Error) -> RunnerError {
    RunnerError::Storage {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

impl ResultsStore {
    pub fn open(root: impl AsRef<Path>, run_id: &str) -> Result<Self, RunnerError> {
        let dir = root.as_ref().join(run_id);
        let trials = dir.join("trials");
        fs::create_dir_all(&trials).map_err(|e| io_err(&trials, e))?;
        Ok(Self { dir })
    }

    /// Opens an existing run directory without creating anything.
    pub fn existing(dir: impl Into<PathBuf>) -> Result<Self, RunnerError> {
        let dir = dir.into();
        if !dir.join("trials").is_dir() {
            return Err(RunnerError::Storage {
                path: dir,
                message: "not a results directory (no trials/)".into(),
            });
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn trial_path(&self, trial_id: &str) -> PathBuf {
        self.dir.join("trials").join(format!("{trial_id}.jsonl"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    fn index_path(&self) -> PathBuf {
        self.dir.join("index.json")
    }

    /// Records already written for `trial_id`. A torn final line is
    /// ignored.
    pub fn load_trial(&self, trial_id: &str) -> Result<Vec<PredictionRecord>, RunnerError> {
        let path = self.trial_path(trial_id);
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_records(&path)
    }

    /// Opens the trial file for appending, first cutting any torn final
    /// line left by an interrupted write.
    pub fn trial_writer(&self, trial_id: &str) -> Result<TrialWriter, RunnerError> {
        let path = self.trial_path(trial_id);
        if path.exists() {
            let body = fs::read(&path).map_err(|e| io_err(&path, e))?;
            let keep = body.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            if keep < body.len() {
                log::warn!("{}: dropping {} bytes of a torn record", path.display(), body.len() - keep);
                let f = OpenOptions::new().write(true).open(&path).map_err(|e| io_err(&path, e))?;
                f.set_len(keep as u64).map_err(|e| io_err(&path, e))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        Ok(TrialWriter { path, file })
    }

    pub fn index(&self) -> Result<StoreIndex, RunnerError> {
        let path = self.index_path();
        match fs::read(&path) {
            Ok(body) => serde_json::from_slice(&body).map_err(|e| RunnerError::Storage {
                path,
                message: e.to_string(),
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(StoreIndex::default()),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    pub fn write_index(&self, index: &StoreIndex) -> Result<(), RunnerError> {
        write_atomic(&self.index_path(), &serde_json::to_vec_pretty(index).expect("index serializes"))
    }

    /// Every record in the run, ordered by trial id then file order.
    pub fn load_all(&self) -> Result<Vec<PredictionRecord>, RunnerError> {
        let trials = self.dir.join("trials");
        let mut files: Vec<PathBuf> = fs::read_dir(&trials)
            .map_err(|e| io_err(&trials, e))?
            .filter_map(Result::ok)
            .map(|d| d.path())
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(read_records(&f)?);
        }
        Ok(out)
    }
}

/// Appends records to one trial file, flushing after each line.
#[derive(Debug)]
pub struct TrialWriter {
    path: PathBuf,
    file: File,
}

impl TrialWriter {
    pub fn append(&mut self, record: &PredictionRecord) -> Result<(), RunnerError> {
        let mut line = serde_json::to_vec(record).expect("record serializes");
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| io_err(&self.path, e))?;
        self.file.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Reads PredictionRecord JSONL from any file, e.g. records produced by an
/// external fine-tuning baseline. Blank lines and a torn final line are
/// skipped; any other malformed line is an error.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>, RunnerError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let body_ends_cleanly = {
        let len = file.metadata().map_err(|e| io_err(path, e))?.len();
        len == 0 || fs::read(path).map_err(|e| io_err(path, e))?.last() == Some(&b'\n')
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| io_err(path, e))?;
    let last = lines.len();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == last && !body_ends_cleanly => {
                log::warn!("{}: ignoring torn final line", path.display());
            }
            Err(e) => {
                return Err(RunnerError::Storage {
                    path: path.to_owned(),
                    message: format!("line {}: {e}", i + 1),
                })
            }
        }
    }
    Ok(out)
}

pub(crate) fn write_atomic(path: &Path, body: &[u8]) -> Result<(), RunnerError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, body).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
