use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Content-addressed file bytes at `<data_root>/objects/<sha256-hex>`.
#[derive(Debug, Clone)]
pub struct ObjectStore {
    dir: PathBuf,
}

impl ObjectStore {
    pub fn open(data_root: &Path) -> Result<Self> {
        if !data_root.is_dir() {
            return Err(Error::Config(format!(
                "data_root {} is not a directory",
                data_root.display()
            )));
        }
        let dir = data_root.join("objects");
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn digest_of(bytes: &[u8]) -> String {
        hex::encode(Sha256::digest(bytes))
    }

    fn path_for(&self, digest: &str) -> Result<PathBuf> {
        if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Internal(format!(
                "malformed object digest {digest:?}"
            )));
        }
        Ok(self.dir.join(digest))
    }

    /// Stores `bytes` if not already present and returns the digest.
    pub fn put(&self, bytes: &[u8]) -> Result<String> {
        let digest = Self::digest_of(bytes);
        let path = self.path_for(&digest)?;
        if !path.exists() {
            let tmp = self
                .dir
                .join(format!(".{digest}.{}", uuid::Uuid::new_v4().simple()));
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(digest)
    }

    pub fn get(&self, digest: &str) -> Result<Vec<u8>> {
        match std::fs::read(self.path_for(digest)?) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::not_found("stored object"))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn remove(&self, digest: &str) -> Result<()> {
        match std::fs::remove_file(self.path_for(digest)?) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, digest: &str) -> bool {
        self.path_for(digest).map(|p| p.is_file()).unwrap_or(false)
    }

    /// Number of stored objects.
    pub fn len(&self) -> Result<usize> {
        let mut n = 0;
        for entry in std::fs::read_dir(&self.dir)? {
            if !entry?.file_name().to_string_lossy().starts_with('.') {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }
}
