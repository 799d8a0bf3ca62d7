//! Append-only transcript store.
//!
//! One JSON Lines file per `(case_id, config, perturbation)` group, one
//! record per line. Each line is the canonical form of
//!
//! ```json
//! {"prev_digest":"…","record_digest":"…","seq":N,"trial":{…}}
//! ```
//!
//! where `record_digest = sha256(prev_digest ‖ canonical(trial))` and the
//! first record of a file chains from 32 zero bytes. `seq` is global across
//! the store; a trial's `run_index` is its position inside its group file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical::{self, CanonicalizationError, Digest};
use crate::model::{AgentConfig, Trial, ValidationError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate run_id {0}")]
    DuplicateRun(String),
    #[error("invalid trial: {0}")]
    Validation(#[from] ValidationError),
    #[error("integrity check failed at seq {seq}")]
    Integrity { seq: u64 },
    #[error(transparent)]
    Canonical(#[from] CanonicalizationError),
}

/// The chain head for an empty group.
pub const CHAIN_SEED: Digest = Digest::ZERO;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreRecord {
    pub seq: u64,
    pub prev_digest: Digest,
    pub record_digest: Digest,
    pub trial: Value,
}

pub fn chain_digest(prev: &Digest, trial_bytes: &[u8]) -> Digest {
    Digest::of_parts([prev.0.as_slice(), trial_bytes])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrity {
    Ok,
    FirstBadSeq(u64),
}

impl Integrity {
    pub fn is_ok(&self) -> bool {
        matches!(self, Integrity::Ok)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrialFilter {
    pub case_id: Option<String>,
    pub config: Option<AgentConfig>,
    /// Perturbation id; `"baseline"` also matches trials with no perturbation.
    pub perturbation: Option<String>,
}

impl TrialFilter {
    pub fn case(case_id: impl Into<String>) -> Self {
        TrialFilter {
            case_id: Some(case_id.into()),
            ..Default::default()
        }
    }

    fn matches(&self, t: &Trial) -> bool {
        self.case_id.as_ref().is_none_or(|c| *c == t.case_id)
            && self
                .config
                .as_ref()
                .is_none_or(|c| c.group_key() == t.config.group_key())
            && self
                .perturbation
                .as_ref()
                .is_none_or(|p| p == perturbation_id(t))
    }
}

pub fn perturbation_id(t: &Trial) -> &str {
    t.perturbation.as_deref().unwrap_or("baseline")
}

#[derive(Debug, Default)]
struct GroupHead {
    digest: Digest,
    len: usize,
}

#[derive(Debug, Default)]
struct State {
    next_seq: u64,
    run_ids: HashSet<String>,
    heads: HashMap<PathBuf, GroupHead>,
}

#[derive(Debug)]
pub struct TranscriptStore {
    root: PathBuf,
    state: Mutex<State>,
}

impl TranscriptStore {
    /// Opens (creating if needed) a store rooted at `root`. Existing records
    /// are indexed on a best-effort basis; corruption surfaces through
    /// [`verify_integrity`](Self::verify_integrity) and
    /// [`load_trials`](Self::load_trials).
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let mut state = State::default();
        for path in group_files(&root)? {
            let bytes = fs::read(&path)?;
            let mut head = GroupHead::default();
            for line in split_lines(&bytes) {
                head.len += 1;
                let Ok(rec) = serde_json::from_slice::<StoreRecord>(line) else {
                    continue;
                };
                state.next_seq = state.next_seq.max(rec.seq + 1);
                head.digest = rec.record_digest;
                if let Some(id) = rec.trial.get("run_id").and_then(Value::as_str) {
                    state.run_ids.insert(id.to_string());
                }
            }
            state.heads.insert(path, head);
        }
        Ok(TranscriptStore {
            root,
            state: Mutex::new(state),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("store lock").run_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Path of the group file a trial belongs to.
    pub fn group_path(&self, trial: &Trial) -> PathBuf {
        let key = format!(
            "{}\u{0}{}\u{0}{}",
            trial.case_id,
            trial.config.group_key(),
            perturbation_id(trial)
        );
        let hash = Digest::of(key.as_bytes()).to_hex();
        self.root.join(format!(
            "{}.{}.{}.jsonl",
            sanitize(&trial.case_id),
            sanitize(perturbation_id(trial)),
            &hash[..12]
        ))
    }

    /// Appends a trial and returns its sequence number.
    pub fn append_trial(&self, trial: &Trial) -> Result<u64, StoreError> {
        trial.validate(None)?;
        let trial_value = serde_json::to_value(trial)
            .map_err(|e| CanonicalizationError::Parse(e.to_string()))?;
        let trial_bytes = canonical::canonicalize(&trial_value)?;
        let path = self.group_path(trial);

        let mut state = self.state.lock().expect("store lock");
        if state.run_ids.contains(&trial.run_id) {
            return Err(StoreError::DuplicateRun(trial.run_id.clone()));
        }
        let seq = state.next_seq;
        let prev = state
            .heads
            .get(&path)
            .map(|h| h.digest)
            .unwrap_or(CHAIN_SEED);
        let record = StoreRecord {
            seq,
            prev_digest: prev,
            record_digest: chain_digest(&prev, &trial_bytes),
            trial: trial_value,
        };
        let mut line = canonical::canonical_bytes_of(&record)?;
        line.push(b'\n');

        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        file.write_all(&line)?;
        file.sync_data()?;

        state.next_seq += 1;
        state.run_ids.insert(trial.run_id.clone());
        let head = state.heads.entry(path).or_default();
        head.digest = record.record_digest;
        head.len += 1;
        Ok(seq)
    }

    /// Trials matching `filter`, ordered by `(case_id, run_index)` with the
    /// group file name breaking ties.
    pub fn load_trials(&self, filter: &TrialFilter) -> Result<Vec<Trial>, StoreError> {
        let mut out: Vec<(String, usize, PathBuf, Trial)> = Vec::new();
        let mut first_bad: Option<u64> = None;
        let mut seqs = Vec::new();
        for path in group_files(&self.root)? {
            let bytes = fs::read(&path)?;
            let scan = scan_group(&bytes);
            seqs.extend(scan.seqs.iter().copied());
            if let Some(bad) = scan.first_bad {
                first_bad = Some(first_bad.map_or(bad, |b| b.min(bad)));
                continue;
            }
            for (run_index, mut trial) in scan.trials.into_iter().enumerate() {
                trial.run_index = run_index;
                if filter.matches(&trial) {
                    out.push((trial.case_id.clone(), run_index, path.clone(), trial));
                }
            }
        }
        if let Some(bad) = first_bad.into_iter().chain(check_seq_set(seqs)).min() {
            return Err(StoreError::Integrity { seq: bad });
        }
        out.sort_by(|a, b| (&a.0, a.1, &a.2).cmp(&(&b.0, b.1, &b.2)));
        Ok(out.into_iter().map(|(_, _, _, t)| t).collect())
    }

    /// Recomputes every hash chain.
    pub fn verify_integrity(&self) -> Result<Integrity, StoreError> {
        let mut first_bad: Option<u64> = None;
        let mut seqs = Vec::new();
        for path in group_files(&self.root)? {
            let scan = scan_group(&fs::read(&path)?);
            seqs.extend(scan.seqs.iter().copied());
            if let Some(bad) = scan.first_bad {
                first_bad = Some(first_bad.map_or(bad, |b| b.min(bad)));
            }
        }
        Ok(match first_bad.into_iter().chain(check_seq_set(seqs)).min() {
            None => Integrity::Ok,
            Some(seq) => Integrity::FirstBadSeq(seq),
        })
    }

    /// Group file path → records, for tooling that needs raw access.
    pub fn group_files(&self) -> Result<Vec<PathBuf>, StoreError> {
        group_files(&self.root)
    }

    /// Number of records in each group, keyed by file name.
    pub fn group_sizes(&self) -> BTreeMap<String, usize> {
        let state = self.state.lock().expect("store lock");
        state
            .heads
            .iter()
            .map(|(p, h)| {
                (
                    p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                    h.len,
                )
            })
            .collect()
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(48)
        .collect()
}

fn group_files(root: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let mut files: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

fn split_lines(bytes: &[u8]) -> impl Iterator<Item = &[u8]> {
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    body.split(|&b| b == b'\n').filter(move |_| !bytes.is_empty())
}

struct GroupScan {
    trials: Vec<Trial>,
    seqs: Vec<u64>,
    first_bad: Option<u64>,
}

/// Byte offset of the `seq` digits in a canonical record line.
fn seq_offset() -> usize {
    r#"{"prev_digest":""#.len() + 64 + r#"","record_digest":""#.len() + 64 + r#"","seq":"#.len()
}

fn seq_hint(line: &[u8], last: Option<u64>) -> u64 {
    let fallback = last.map_or(0, |s| s + 1);
    let Some(rest) = line.get(seq_offset()..) else {
        return fallback;
    };
    let digits: Vec<u8> = rest.iter().copied().take_while(u8::is_ascii_digit).collect();
    std::str::from_utf8(&digits)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(fallback)
}

fn scan_group(bytes: &[u8]) -> GroupScan {
    let mut scan = GroupScan {
        trials: Vec::new(),
        seqs: Vec::new(),
        first_bad: None,
    };
    let mut prev = CHAIN_SEED;
    let mut last_seq: Option<u64> = None;
    for line in split_lines(bytes) {
        let hint = seq_hint(line, last_seq);
        match check_record(line, &prev) {
            Some((rec, trial)) if last_seq.is_none_or(|l| rec.seq > l) => {
                scan.seqs.push(rec.seq);
                last_seq = Some(rec.seq);
                prev = rec.record_digest;
                scan.trials.push(trial);
            }
            _ => {
                scan.first_bad = Some(hint);
                return scan;
            }
        }
    }
    scan
}

/// A record is sound when its line is exactly its own canonical form, the
/// trial parses, and the chain digest recomputes from `prev`.
fn check_record(line: &[u8], prev: &Digest) -> Option<(StoreRecord, Trial)> {
    let value: Value = serde_json::from_slice(line).ok()?;
    if canonical::canonicalize(&value).ok()? != line {
        return None;
    }
    let rec: StoreRecord = serde_json::from_value(value).ok()?;
    if rec.prev_digest != *prev {
        return None;
    }
    let trial_bytes = canonical::canonicalize(&rec.trial).ok()?;
    if chain_digest(prev, &trial_bytes) != rec.record_digest {
        return None;
    }
    let trial: Trial = serde_json::from_value(rec.trial.clone()).ok()?;
    if trial.canonical_bytes().ok()? != trial_bytes {
        return None;
    }
    Some((rec, trial))
}

/// Sequence numbers must be exactly `0..n` across the store.
fn check_seq_set(mut seqs: Vec<u64>) -> Option<u64> {
    seqs.sort_unstable();
    seqs.iter()
        .enumerate()
        .find(|(i, s)| **s != *i as u64)
        .map(|(i, _)| i as u64)
}
