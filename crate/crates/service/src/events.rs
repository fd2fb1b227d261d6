//! Append-only per-session event logs and replay.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::session::{ApiError, Phase, Session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        id: String,
        preset: String,
        method: String,
        seed: u64,
    },
    Query {
        xi: usize,
    },
    Action {
        a: usize,
    },
    Finalized {
        n_demos: usize,
    },
}

/// One JSON-lines file per session under a directory.
#[derive(Debug, Clone)]
pub struct EventLog {
    dir: PathBuf,
}

impl EventLog {
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn append(&self, id: &str, event: &Event) -> io::Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path(id))?;
        let mut line = serde_json::to_string(event).map_err(io::Error::other)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_data()
    }

    /// Every stored event stream, ordered by file name.
    pub fn load_all(&self) -> io::Result<Vec<(PathBuf, Vec<Event>)>> {
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut out = Vec::with_capacity(paths.len());
        for p in paths {
            let mut events = Vec::new();
            for (i, line) in BufReader::new(File::open(&p)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(&line) {
                    Ok(e) => events.push(e),
                    // A torn final write loses only that event.
                    Err(e) => {
                        log::warn!("{}:{}: skipping unreadable event: {e}", p.display(), i + 1);
                        break;
                    }
                }
            }
            out.push((p, events));
        }
        Ok(out)
    }
}

/// Rebuild a session from its events. Posterior refreshes run in place, so
/// the result matches the live session for the same seed.
pub fn replay(events: &[Event]) -> Result<Session, ApiError> {
    let mut it = events.iter();
    let mut session = match it.next() {
        Some(Event::Created {
            id,
            preset,
            method,
            seed,
        }) => Session::create(id.clone(), preset, method, *seed)?,
        _ => return Err(ApiError::BadRequest("log does not start with creation".into())),
    };
    for e in it {
        match e {
            Event::Created { .. } => {
                return Err(ApiError::BadRequest("duplicate creation event".into()))
            }
            Event::Query { xi } => {
                session.begin_demo(*xi)?;
            }
            Event::Action { a } => {
                session.act(*a)?;
                if session.phase() == Phase::Computing {
                    let out = session.refresh_job().run();
                    session.install(out);
                }
            }
            Event::Finalized { n_demos } => {
                if *n_demos != session.n_demos() {
                    return Err(ApiError::Internal(format!(
                        "log records {n_demos} demonstrations, replay has {}",
                        session.n_demos()
                    )));
                }
            }
        }
    }
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_round_trip_through_the_log() {
        let dir = tempfile::tempdir().unwrap();
        let log = EventLog::open(dir.path()).unwrap();
        let events = vec![
            Event::Created {
                id: "abc".into(),
                preset: "structured-paper".into(),
                method: "random".into(),
                seed: 4,
            },
            Event::Query { xi: 3 },
            Event::Action { a: 4 },
            Event::Finalized { n_demos: 1 },
        ];
        for e in &events {
            log.append("abc", e).unwrap();
        }
        let loaded = log.load_all().unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].1, events);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let log = EventLog::open(dir.path()).unwrap();
        log.append("s", &Event::Query { xi: 1 }).unwrap();
        let mut f = OpenOptions::new()
            .append(true)
            .open(dir.path().join("s.jsonl"))
            .unwrap();
        f.write_all(b"{\"event\":\"act").unwrap();
        assert_eq!(log.load_all().unwrap()[0].1, vec![Event::Query { xi: 1 }]);
    }

    #[test]
    fn replay_requires_creation_first() {
        assert!(replay(&[Event::Query { xi: 0 }]).is_err());
    }
}
