//! Model-based checking of the journal store against a plain in-memory map, plus a
//! crash-restart harness that kills a child process mid-write.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use idvault::clock::{Clock, ManualClock, SharedClock, SystemClock};
use idvault::store::{JournalStore, StoreBackend, StoreError, StoreOptions};
use idvault::Values;
use proptest::prelude::*;
use serde_json::{json, Value};

pub const COLLECTIONS: [&str; 3] = ["alpha", "beta", "gamma"];
const UNIQUE: &str = "key";

#[derive(Debug, Clone)]
pub enum StoreOp {
    Insert {
        coll: usize,
        key: Option<u8>,
        n: i64,
    },
    Update {
        coll: usize,
        pick: usize,
        key: Option<Option<u8>>,
        n: Option<i64>,
        cas: Cas,
    },
    Delete {
        coll: usize,
        pick: usize,
    },
    Get {
        coll: usize,
        pick: usize,
    },
    Scan {
        coll: usize,
        start: usize,
        limit: usize,
    },
    Reopen,
    Compact {
        coll: usize,
    },
}

#[derive(Debug, Clone, Copy)]
pub enum Cas {
    None,
    Fresh,
    Stale,
}

pub fn store_op() -> impl Strategy<Value = StoreOp> {
    let coll = 0..COLLECTIONS.len();
    let key = proptest::option::of(0u8..40);
    prop_oneof![
        6 => (coll.clone(), key.clone(), any::<i64>()).prop_map(|(coll, key, n)| StoreOp::Insert { coll, key, n }),
        5 => (
            coll.clone(),
            any::<usize>(),
            proptest::option::of(key),
            proptest::option::of(any::<i64>()),
            prop_oneof![Just(Cas::None), Just(Cas::Fresh), Just(Cas::Stale)]
        )
            .prop_map(|(coll, pick, key, n, cas)| StoreOp::Update { coll, pick, key, n, cas }),
        2 => (coll.clone(), any::<usize>()).prop_map(|(coll, pick)| StoreOp::Delete { coll, pick }),
        3 => (coll.clone(), any::<usize>()).prop_map(|(coll, pick)| StoreOp::Get { coll, pick }),
        2 => (coll.clone(), 0usize..8, 0usize..12).prop_map(|(coll, start, limit)| StoreOp::Scan { coll, start, limit }),
        1 => Just(StoreOp::Reopen),
        1 => coll.prop_map(|coll| StoreOp::Compact { coll }),
    ]
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    values: Values,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
}

#[derive(Default)]
struct Model {
    colls: Vec<BTreeMap<String, Row>>,
    /// Ids ever handed out, including deleted ones, so picks also hit missing documents.
    ids: Vec<Vec<String>>,
}

impl Model {
    fn key_taken(&self, coll: usize, key: &Value, except: Option<&str>) -> bool {
        self.colls[coll]
            .iter()
            .any(|(id, row)| Some(id.as_str()) != except && row.values.get(UNIQUE) == Some(key))
    }

    fn pick(&self, coll: usize, pick: usize) -> Option<String> {
        let ids = &self.ids[coll];
        (!ids.is_empty()).then(|| ids[pick % ids.len()].clone())
    }
}

fn open(dir: Option<&Path>, clock: SharedClock) -> JournalStore {
    let store = match dir {
        Some(dir) => JournalStore::open(
            dir,
            clock,
            StoreOptions {
                sync_writes: false,
                compact_threshold: 48,
            },
        )
        .unwrap(),
        None => JournalStore::in_memory(clock),
    };
    for c in COLLECTIONS {
        store.ensure_unique_index(c, UNIQUE, false).unwrap();
    }
    store
}

fn key_value(key: u8) -> Value {
    json!(format!("k{key}"))
}

fn same(doc: &idvault::store::Document, row: &Row) -> bool {
    doc.values == row.values && doc.created_at == row.created_at && doc.updated_at == row.updated_at
}

/// Applies `ops` to a store (on disk when `dir` is given) and to the model, failing on
/// the first disagreement.
pub fn run(ops: &[StoreOp], dir: Option<&Path>) -> Result<(), String> {
    let clock = Arc::new(ManualClock::at_epoch_secs(1_700_000_000));
    let mut store = open(dir, clock.clone());
    let mut model = Model {
        colls: vec![BTreeMap::new(); COLLECTIONS.len()],
        ids: vec![Vec::new(); COLLECTIONS.len()],
    };
    for (step, op) in ops.iter().enumerate() {
        // some steps share a millisecond, some do not
        if step % 3 != 0 {
            clock.advance(Duration::milliseconds(1));
        }
        let fail = |msg: String| format!("step {step} {op:?}: {msg}");
        match op {
            StoreOp::Insert { coll, key, n } => {
                let mut values = Values::new();
                values.insert("n".into(), json!(n));
                if let Some(k) = key {
                    values.insert(UNIQUE.into(), key_value(*k));
                }
                let taken = key.is_some_and(|k| model.key_taken(*coll, &key_value(k), None));
                match (store.insert(COLLECTIONS[*coll], values.clone()), taken) {
                    (Ok(doc), false) => {
                        if model.colls[*coll]
                            .keys()
                            .next_back()
                            .is_some_and(|last| *last >= doc.id)
                        {
                            return Err(fail(format!(
                                "id {} does not sort after existing ids",
                                doc.id
                            )));
                        }
                        if doc.values != values {
                            return Err(fail("stored values differ".into()));
                        }
                        model.ids[*coll].push(doc.id.clone());
                        model.colls[*coll].insert(
                            doc.id,
                            Row {
                                values,
                                created_at: doc.created_at,
                                updated_at: doc.updated_at,
                            },
                        );
                    }
                    (Err(StoreError::UniqueViolation { .. }), true) => {}
                    (other, taken) => {
                        return Err(fail(format!("got {other:?}, key taken: {taken}")))
                    }
                }
            }
            StoreOp::Update {
                coll,
                pick,
                key,
                n,
                cas,
            } => {
                let Some(id) = model.pick(*coll, *pick) else {
                    continue;
                };
                let mut patch = Values::new();
                if let Some(n) = n {
                    patch.insert("n".into(), json!(n));
                }
                match key {
                    Some(Some(k)) => {
                        patch.insert(UNIQUE.into(), key_value(*k));
                    }
                    Some(None) => {
                        patch.insert(UNIQUE.into(), Value::Null);
                    }
                    None => {}
                }
                let current = model.colls[*coll].get(&id).cloned();
                let expected = match (cas, &current) {
                    (Cas::None, _) => None,
                    (Cas::Fresh, Some(row)) => Some(row.updated_at),
                    (Cas::Fresh, None) => Some(clock.now()),
                    (Cas::Stale, Some(row)) => Some(row.updated_at - Duration::milliseconds(1)),
                    (Cas::Stale, None) => Some(clock.now()),
                };
                let result = store.update_if(COLLECTIONS[*coll], &id, patch.clone(), expected);
                let Some(row) = current else {
                    if !matches!(result, Err(StoreError::NotFound { .. })) {
                        return Err(fail(format!("update of deleted doc gave {result:?}")));
                    }
                    continue;
                };
                if matches!(cas, Cas::Stale) {
                    if !matches!(result, Err(StoreError::Conflict { .. })) {
                        return Err(fail(format!("stale CAS gave {result:?}")));
                    }
                    continue;
                }
                let mut merged = row.values.clone();
                for (k, v) in &patch {
                    if v.is_null() {
                        merged.remove(k);
                    } else {
                        merged.insert(k.clone(), v.clone());
                    }
                }
                let collides = merged.get(UNIQUE).is_some_and(|k| {
                    row.values.get(UNIQUE) != Some(k) && model.key_taken(*coll, k, Some(&id))
                });
                match (result, collides) {
                    (Ok(doc), false) => {
                        if doc.values != merged
                            || doc.created_at != row.created_at
                            || doc.updated_at <= row.updated_at
                        {
                            return Err(fail(format!(
                                "update result {doc:?} vs merged {merged:?}"
                            )));
                        }
                        model.colls[*coll].insert(
                            id,
                            Row {
                                values: merged,
                                created_at: row.created_at,
                                updated_at: doc.updated_at,
                            },
                        );
                    }
                    (Err(StoreError::UniqueViolation { .. }), true) => {}
                    (other, collides) => {
                        return Err(fail(format!("got {other:?}, collides: {collides}")))
                    }
                }
            }
            StoreOp::Delete { coll, pick } => {
                let Some(id) = model.pick(*coll, *pick) else {
                    continue;
                };
                match (
                    store.delete(COLLECTIONS[*coll], &id),
                    model.colls[*coll].remove(&id),
                ) {
                    (Ok(doc), Some(row)) if same(&doc, &row) => {}
                    (Err(StoreError::NotFound { .. }), None) => {}
                    (got, want) => {
                        return Err(fail(format!("delete gave {got:?}, model had {want:?}")))
                    }
                }
            }
            StoreOp::Get { coll, pick } => {
                let Some(id) = model.pick(*coll, *pick) else {
                    continue;
                };
                let got = store
                    .get(COLLECTIONS[*coll], &id)
                    .map_err(|e| fail(e.to_string()))?;
                let want = model.colls[*coll].get(&id);
                let agree = match (&got, want) {
                    (Some(doc), Some(row)) => same(doc, row),
                    (None, None) => true,
                    _ => false,
                };
                if !agree {
                    return Err(fail(format!("get gave {got:?}, model has {want:?}")));
                }
            }
            StoreOp::Scan { coll, start, limit } => {
                let got: Vec<String> = store
                    .scan(COLLECTIONS[*coll], *limit, *start, None)
                    .map_err(|e| fail(e.to_string()))?
                    .into_iter()
                    .map(|d| d.id)
                    .collect();
                let want: Vec<String> = model.colls[*coll]
                    .keys()
                    .skip(*start)
                    .take(*limit)
                    .cloned()
                    .collect();
                if got != want {
                    return Err(fail(format!("scan gave {got:?}, model {want:?}")));
                }
                let count = store
                    .count(COLLECTIONS[*coll])
                    .map_err(|e| fail(e.to_string()))?;
                if count != model.colls[*coll].len() {
                    return Err(fail(format!(
                        "count {count} vs {}",
                        model.colls[*coll].len()
                    )));
                }
            }
            StoreOp::Reopen => {
                if dir.is_some() {
                    drop(store);
                    store = open(dir, clock.clone());
                }
            }
            StoreOp::Compact { coll } => {
                store
                    .compact(COLLECTIONS[*coll])
                    .map_err(|e| fail(e.to_string()))?;
            }
        }
    }
    // Final full comparison, after one more restart for on-disk stores.
    if dir.is_some() {
        drop(store);
        store = open(dir, clock.clone());
    }
    for (i, c) in COLLECTIONS.iter().enumerate() {
        let docs = store
            .scan(c, usize::MAX, 0, None)
            .map_err(|e| e.to_string())?;
        if docs.len() != model.colls[i].len()
            || !docs
                .iter()
                .all(|d| model.colls[i].get(&d.id).is_some_and(|r| same(d, r)))
        {
            return Err(format!("final state of {c} differs from the model"));
        }
    }
    Ok(())
}

pub const CRASH_ENV: &str = "IDVAULT_CRASH_CHILD";
const COUNTERS: usize = 8;

/// Child side: keeps writing until it aborts itself. After each acknowledged write it
/// appends `<id> <n>` to the ack file.
pub fn crash_child(dir: &Path, acks: &Path, abort_after: usize) -> ! {
    let store = JournalStore::open(dir, Arc::new(SystemClock), StoreOptions::default()).unwrap();
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(acks)
        .unwrap();
    let mut ids: Vec<(String, i64)> = store
        .scan("counters", usize::MAX, 0, None)
        .unwrap()
        .into_iter()
        .map(|d| (d.id, d.values["n"].as_i64().unwrap()))
        .collect();
    for i in 0.. {
        if i == abort_after {
            std::process::abort();
        }
        if ids.len() < COUNTERS {
            let doc = store
                .insert("counters", super::vars(json!({"n": 0})))
                .unwrap();
            writeln!(log, "{} 0", doc.id).unwrap();
            ids.push((doc.id, 0));
        } else {
            let slot = i % ids.len();
            let (id, n) = &mut ids[slot];
            *n += 1;
            store
                .update("counters", id, super::vars(json!({"n": *n})))
                .unwrap();
            writeln!(log, "{id} {n}").unwrap();
        }
        log.flush().unwrap();
    }
    unreachable!()
}

/// Parent side: runs `rounds` child processes that each die mid-stream, then checks
/// that every acknowledged write survived.
pub fn crash_restart(test_binary: &Path, test_name: &str, rounds: usize) -> Result<usize, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let acks: PathBuf = dir.path().join("acks.txt");
    let data = dir.path().join("store");
    for round in 0..rounds {
        let status = std::process::Command::new(test_binary)
            .args(["--exact", test_name, "--nocapture", "--test-threads=1"])
            .env(
                CRASH_ENV,
                format!("{}|{}|{}", data.display(), acks.display(), 20 + round * 7),
            )
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if status.success() {
            return Err(format!(
                "round {round}: child exited cleanly instead of crashing"
            ));
        }
        // A torn frame left behind by a crash mid-append must be ignored on replay.
        if round % 2 == 1 {
            let journal = data.join("counters.journal");
            let mut f = std::fs::OpenOptions::new()
                .append(true)
                .open(&journal)
                .map_err(|e| e.to_string())?;
            f.write_all(b"57 {\"op\":\"put\",\"doc\":{\"collec")
                .map_err(|e| e.to_string())?;
        }
        let mut last: BTreeMap<String, i64> = BTreeMap::new();
        let reader =
            std::io::BufReader::new(std::fs::File::open(&acks).map_err(|e| e.to_string())?);
        for line in reader.lines() {
            let line = line.map_err(|e| e.to_string())?;
            let (id, n) = line.split_once(' ').ok_or("bad ack line")?;
            last.insert(id.to_string(), n.parse().map_err(|_| "bad ack count")?);
        }
        let store = JournalStore::open(&data, Arc::new(SystemClock), StoreOptions::default())
            .map_err(|e| e.to_string())?;
        for (id, n) in &last {
            let doc = store
                .get("counters", id)
                .map_err(|e| e.to_string())?
                .ok_or_else(|| format!("round {round}: acknowledged document {id} lost"))?;
            let stored = doc.values["n"].as_i64().unwrap();
            if stored != *n {
                return Err(format!(
                    "round {round}: {id} has n={stored}, acknowledged {n}"
                ));
            }
        }
    }
    Ok(rounds)
}

/// Entry point for the child half: call from a test named `test_name`.
pub fn maybe_run_crash_child() {
    if let Ok(setup) = std::env::var(CRASH_ENV) {
        let parts: Vec<&str> = setup.split('|').collect();
        crash_child(
            Path::new(parts[0]),
            Path::new(parts[1]),
            parts[2].parse().unwrap(),
        );
    }
}
