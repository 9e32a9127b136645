//! Append-only feedback log. Each adjustment becomes one JSON line, synced
//! to disk before the request completes; the uploaded image is stored once
//! under its content hash.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use cyscolor::checkpoint::sha256_hex;
use cyscolor::Palette;
use serde::{Deserialize, Serialize};

pub const FEEDBACK_FILE: &str = "feedback.jsonl";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDigest {
    pub text: String,
    pub category: String,
    pub image_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub session_id: String,
    pub original_palette: Palette,
    pub adjusted_palette: Palette,
    pub context: ContextDigest,
    pub timestamp: chrono::DateTime<chrono::Utc>,
    pub model_version: String,
}

pub struct FeedbackLog {
    dir: PathBuf,
    file: File,
}

impl FeedbackLog {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir.join(IMAGE_DIR))?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(FEEDBACK_FILE))?;
        Ok(FeedbackLog {
            dir: dir.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> PathBuf {
        self.dir.join(FEEDBACK_FILE)
    }

    /// Writes `bytes` under their hash unless already present.
    pub fn store_image(&self, hash: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.dir.join(IMAGE_DIR).join(hash);
        if path.exists() {
            return Ok(());
        }
        let tmp = path.with_extension("tmp");
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(tmp, path)
    }

    pub fn append(&mut self, record: &FeedbackRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

pub fn image_hash(bytes: &[u8]) -> String {
    sha256_hex(bytes)
}

/// Parses every line of a feedback log.
pub fn read_feedback(path: &Path) -> std::io::Result<Vec<FeedbackRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}
