//! Append-only collection journal.
//!
//! Each record is framed as `<payload-len> <payload-json> <crc32-hex>\n`, where the length
//! counts payload bytes and the CRC32 covers the payload. Replay stops at the first frame
//! that is incomplete or fails its checksum and truncates the file there, so a crash in
//! the middle of an append leaves either the whole record or none of it.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Document, StoreError};
use crate::fsutil::sync_dir;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum JournalRecord {
    Put { doc: Document },
    Del { id: String },
}

pub struct Journal {
    path: PathBuf,
    file: File,
    records: usize,
    sync: bool,
}

pub fn encode_frame(record: &JournalRecord) -> Vec<u8> {
    let payload = serde_json::to_vec(record).expect("journal records always serialize");
    let crc = crc32fast::hash(&payload);
    let mut frame = Vec::with_capacity(payload.len() + 24);
    frame.extend_from_slice(payload.len().to_string().as_bytes());
    frame.push(b' ');
    frame.extend_from_slice(&payload);
    frame.extend_from_slice(format!(" {crc:08x}\n").as_bytes());
    frame
}

/// Decodes the frame starting at `buf[0]`, returning the record and the frame length.
fn decode_frame(buf: &[u8]) -> Option<(JournalRecord, usize)> {
    let space = buf.iter().take(21).position(|b| *b == b' ')?;
    let len: usize = std::str::from_utf8(&buf[..space]).ok()?.parse().ok()?;
    let payload_start = space + 1;
    let payload_end = payload_start.checked_add(len)?;
    let frame_end = payload_end.checked_add(10)?;
    if buf.len() < frame_end || buf[payload_end] != b' ' || buf[frame_end - 1] != b'\n' {
        return None;
    }
    let crc_text = std::str::from_utf8(&buf[payload_end + 1..frame_end - 1]).ok()?;
    let crc = u32::from_str_radix(crc_text, 16).ok()?;
    let payload = &buf[payload_start..payload_end];
    if crc32fast::hash(payload) != crc {
        return None;
    }
    let record = serde_json::from_slice(payload).ok()?;
    Some((record, frame_end))
}

impl Journal {
    /// Opens or creates the journal at `path` and returns every intact record in order.
    pub fn open(path: &Path, sync: bool) -> Result<(Journal, Vec<JournalRecord>), StoreError> {
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let mut records = Vec::new();
        let mut offset = 0;
        while offset < buf.len() {
            match decode_frame(&buf[offset..]) {
                Some((record, used)) => {
                    records.push(record);
                    offset += used;
                }
                None => break,
            }
        }
        if offset < buf.len() {
            log::warn!(
                "{}: discarding {} trailing bytes of an incomplete or corrupt record",
                path.display(),
                buf.len() - offset
            );
            file.set_len(offset as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let journal = Journal {
            path: path.to_path_buf(),
            file,
            records: records.len(),
            sync,
        };
        Ok((journal, records))
    }

    pub fn append(&mut self, record: &JournalRecord) -> Result<(), StoreError> {
        let frame = encode_frame(record);
        self.file.write_all(&frame)?;
        if self.sync {
            self.file.sync_data()?;
        }
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    /// Replaces the journal with one `Put` per live document, via write-then-rename.
    pub fn compact<'a>(
        &mut self,
        live: impl Iterator<Item = &'a Document>,
    ) -> Result<(), StoreError> {
        let tmp = self.path.with_extension("journal.compact");
        let mut count = 0;
        {
            let mut out = io::BufWriter::new(File::create(&tmp)?);
            for doc in live {
                out.write_all(&encode_frame(&JournalRecord::Put { doc: doc.clone() }))?;
                count += 1;
            }
            out.flush()?;
            out.get_ref().sync_all()?;
        }
        std::fs::rename(&tmp, &self.path)?;
        if let Some(parent) = self.path.parent() {
            sync_dir(parent)?;
        }
        self.file = OpenOptions::new()
            .read(true)
            .append(true)
            .open(&self.path)?;
        self.records = count;
        Ok(())
    }
}
