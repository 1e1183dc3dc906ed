//! On-disk propagation-kernel cache.
//!
//! One JSON file per kernel, named by a hash of the full parameter key; the
//! key is stored alongside the samples and compared exactly on load, so hash
//! collisions degrade to a rebuild, never to a wrong kernel. The format is
//! versioned: files from other versions are ignored.

use std::path::PathBuf;

use csk_core::cascade::{KernelKey, KernelStore};
use csk_core::propagation::PropagationKernel;
use serde::{Deserialize, Serialize};

pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheFile {
    format: String,
    version: u32,
    key: KernelKey,
    kernel: PropagationKernel,
}

#[derive(Debug)]
pub struct FileKernelStore {
    dir: PathBuf,
}

impl FileKernelStore {
    pub fn new(dir: PathBuf) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(FileKernelStore { dir })
    }

    fn path_for(&self, key: &KernelKey) -> PathBuf {
        // FNV-1a over the serialized key.
        let bytes = serde_json::to_vec(key).unwrap_or_default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        self.dir.join(format!("kernel-{h:016x}.json"))
    }
}

impl KernelStore for FileKernelStore {
    fn load(&mut self, key: &KernelKey) -> Option<PropagationKernel> {
        let path = self.path_for(key);
        let text = std::fs::read_to_string(&path).ok()?;
        let file: CacheFile = serde_json::from_str(&text).ok()?;
        if file.format != "csksim-kernel" || file.version != CACHE_FORMAT_VERSION {
            return None;
        }
        if &file.key != key {
            log::warn!("kernel cache collision at {}; rebuilding", path.display());
            return None;
        }
        Some(file.kernel)
    }

    fn store(&mut self, key: &KernelKey, kernel: &PropagationKernel) {
        let file = CacheFile {
            format: "csksim-kernel".into(),
            version: CACHE_FORMAT_VERSION,
            key: key.clone(),
            kernel: kernel.clone(),
        };
        let path = self.path_for(key);
        match serde_json::to_string(&file) {
            Ok(json) => {
                if let Err(e) = std::fs::write(&path, json) {
                    log::warn!("could not write kernel cache {}: {e}", path.display());
                }
            }
            Err(e) => log::warn!("could not serialize kernel: {e}"),
        }
    }
}
