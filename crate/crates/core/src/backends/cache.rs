use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::stub::sha256_hex;
use super::CompletionResult;

/// On-disk store of labeller completions keyed by dialog id and prompt hash,
/// so each unlabeled dialog is sent to the labeller at most once per prompt.
#[derive(Debug, Clone)]
pub struct PseudoLabelCache {
    dir: PathBuf,
}

impl PseudoLabelCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(PseudoLabelCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, dialog_id: &str, prompt: &str) -> PathBuf {
        let key = sha256_hex(format!("{dialog_id}\u{0}{prompt}").as_bytes());
        self.dir.join(format!("{}.json", &key[..32]))
    }

    /// A stored completion, or `None` when absent or unreadable.
    pub fn get(&self, dialog_id: &str, prompt: &str) -> Option<CompletionResult> {
        let text = fs::read_to_string(self.path_for(dialog_id, prompt)).ok()?;
        match serde_json::from_str(&text) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("ignoring corrupt cache entry for {dialog_id}: {e}");
                None
            }
        }
    }

    /// Writes through a temporary file so readers never see partial entries.
    pub fn put(&self, dialog_id: &str, prompt: &str, completion: &CompletionResult) -> io::Result<()> {
        let path = self.path_for(dialog_id, prompt);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(completion).expect("completion serializes"))?;
        fs::rename(tmp, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::TokenLogprob;

    #[test]
    fn round_trip_and_keying() {
        let dir = tempfile::tempdir().unwrap();
        let cache = PseudoLabelCache::open(dir.path().join("c")).unwrap();
        let c = CompletionResult { text: " 1".into(), tokens: vec![TokenLogprob { text: " 1".into(), logprob: -0.2 }] };
        assert!(cache.get("a", "p").is_none());
        cache.put("a", "p", &c).unwrap();
        assert_eq!(cache.get("a", "p"), Some(c));
        assert!(cache.get("a", "q").is_none());
        assert!(cache.get("b", "p").is_none());
    }
}
