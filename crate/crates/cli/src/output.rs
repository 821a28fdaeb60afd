//! Output directory bookkeeping. Every file goes through [`OutputTree`], which
//! records it in `outputs.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "outputs.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputManifest {
    pub command: String,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub struct OutputTree {
    root: PathBuf,
    command: String,
    files: Vec<String>,
    notes: Vec<String>,
}

impl OutputTree {
    /// Prepares `root` for writing. Files listed by an earlier run's
    /// manifest are removed; any other content is an error, so a run never
    /// leaves unlisted files behind.
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let manifest = root.join(MANIFEST);
        if manifest.exists() {
            let old: OutputManifest = serde_json::from_str(&fs::read_to_string(&manifest)?)
                .with_context(|| format!("reading {}", manifest.display()))?;
            for f in &old.files {
                let p = root.join(f);
                if p.is_file() {
                    fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
                }
            }
            fs::remove_file(&manifest)?;
        }
        if let Some(entry) = fs::read_dir(root)?.next() {
            bail!(
                "output directory {} contains files not written by this tool (e.g. {})",
                root.display(),
                entry?.file_name().to_string_lossy()
            );
        }
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            files: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.record(name);
        Ok(())
    }

    /// Registers a file that was written by other code.
    pub fn record(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    pub fn finish(mut self) -> Result<Vec<String>> {
        self.files.sort();
        self.files.dedup();
        let manifest = OutputManifest {
            command: self.command,
            files: self.files,
            notes: self.notes,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)?;
        Ok(manifest.files)
    }
}

/// In-memory CSV table. Floats are written with the shortest
/// representation that round-trips.
pub struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self { w }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).expect("in-memory write");
    }

    pub fn finish(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory write")
    }
}
