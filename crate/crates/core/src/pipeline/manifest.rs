use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::StageReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to the output directory, '/'-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Every file a run wrote, with content hashes, plus stage outcomes.
///
/// Contains nothing time- or host-dependent, so identical runs produce
/// byte-identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub complete: bool,
    pub stages: Vec<StageReport>,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }
}

/// Writes files under the output root and records them.
#[derive(Debug)]
pub(crate) struct ArtifactWriter {
    root: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl ArtifactWriter {
    pub fn new(root: &Path) -> Self {
        ArtifactWriter {
            root: root.to_path_buf(),
            entries: Vec::new(),
        }
    }

    /// Delete the files an earlier run recorded in this directory's
    /// manifest, so the new manifest describes everything present.
    ///
    /// Only paths listed in that manifest are touched.
    pub fn clear_previous(&self) -> Result<()> {
        #[derive(Deserialize)]
        struct Previous {
            artifacts: Vec<ArtifactEntry>,
        }
        let path = self.root.join(Manifest::FILE_NAME);
        let Ok(text) = fs::read_to_string(&path) else {
            return Ok(());
        };
        let Ok(previous) = serde_json::from_str::<Previous>(&text) else {
            log::warn!("ignoring unreadable {}", path.display());
            return Ok(());
        };
        for entry in previous.artifacts {
            let relative = Path::new(&entry.path);
            if relative.is_absolute()
                || relative
                    .components()
                    .any(|c| !matches!(c, std::path::Component::Normal(_)))
            {
                continue;
            }
            let file = self.root.join(relative);
            match fs::remove_file(&file) {
                Ok(()) => log::debug!("removed stale {}", file.display()),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(Error::io(&file, e)),
            }
        }
        fs::remove_file(&path).map_err(|e| Error::io(&path, e))
    }

    pub fn write(&mut self, relative: &str, contents: &str) -> Result<()> {
        let path = self.root.join(relative);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        log::debug!("wrote {}", path.display());
        self.entries.retain(|e| e.path != relative);
        self.entries.push(ArtifactEntry {
            path: relative.to_string(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    pub fn finish(mut self, seed: Option<u64>, stages: Vec<StageReport>) -> Result<Manifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            seed,
            complete: stages.iter().all(|s| !s.status.is_failure()),
            stages,
            artifacts: self.entries,
        };
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.root.join(Manifest::FILE_NAME);
        fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}
