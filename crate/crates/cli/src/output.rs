use std::fs;
use std::path::{Path, PathBuf};

use proxitrace_core::report::{sha256_hex, RunManifest};

use crate::error::CliError;

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

/// Output directory plus the manifest that records what went into it.
pub struct Outputs {
    dir: PathBuf,
    pub manifest: RunManifest,
}

impl Outputs {
    pub fn create(dir: &Path, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            manifest: RunManifest::start(command, std::env::args().skip(1).collect()),
        })
    }

    /// Reads a data input and records its digest.
    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = read(path)?;
        self.manifest.add_input(path.display().to_string(), &bytes);
        Ok(bytes)
    }

    /// Reads the command's config file and records its digest.
    pub fn config(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = read(path)?;
        self.manifest.config_digest = Some(sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.manifest.add_output(name, bytes);
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.manifest.finish();
        fs::write(
            self.dir.join("manifest.json"),
            self.manifest.to_json() + "\n",
        )?;
        Ok(())
    }
}
