//! Config hashing and atomic artifact writes.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use stgibbs_core::{Error, Result};

/// SHA-256 over the command name, its result-relevant arguments and the
/// bytes of every input file. Paths themselves are not hashed, so moving
/// the inputs leaves the hash unchanged.
pub struct ConfigHash(Sha256);

impl ConfigHash {
    pub fn new(command: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"stgibbs\0");
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        let mut c = ConfigHash(h);
        c.field("command", command.as_bytes());
        c
    }

    fn field(&mut self, key: &str, bytes: &[u8]) {
        self.0.update((key.len() as u64).to_le_bytes());
        self.0.update(key.as_bytes());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    pub fn arg(&mut self, key: &str, value: impl Display) {
        self.field(key, value.to_string().as_bytes());
    }

    pub fn file(&mut self, key: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.field(key, &bytes);
        Ok(())
    }

    pub fn files(&mut self, key: &str, paths: &[PathBuf]) -> Result<()> {
        for (k, p) in paths.iter().enumerate() {
            self.file(&format!("{key}[{k}]"), p)?;
        }
        Ok(())
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place, so readers never see a partial artifact.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// `# key=value` lines identifying the run that produced an artifact.
pub fn header_lines(command: &str, hash: &str, seed: u64) -> String {
    format!("# command={command}\n# config_hash={hash}\n# seed={seed}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_args_and_file_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        std::fs::write(&a, "1").unwrap();
        let h = |v: u64| {
            let mut c = ConfigHash::new("fit");
            c.arg("seed", v);
            c.file("data", &a).unwrap();
            c.finish()
        };
        let first = h(1);
        assert_eq!(first, h(1));
        assert_ne!(first, h(2));
        std::fs::write(&a, "2").unwrap();
        assert_ne!(first, h(1));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
