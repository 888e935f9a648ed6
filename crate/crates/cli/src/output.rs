//! Output directory handling: versioned CSV tables, JSON files and run
//! manifests, all written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Write `bytes` to a sibling temp file, then rename over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

/// CSV text with a `# schema: qnull.<name>.v1` first line.
pub fn csv_bytes<R: Serialize>(schema: &str, rows: &[R]) -> Result<Vec<u8>> {
    let mut buf = format!("# schema: qnull.{schema}.v1\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Read a CSV written by [`csv_bytes`], skipping the schema line.
#[cfg(test)]
pub fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path, schema: &str) -> Result<Vec<R>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let expected = format!("# schema: qnull.{schema}.v1");
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    anyhow::ensure!(first == expected, "{}: expected schema line '{expected}'", path.display());
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<Result<Vec<R>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Output directory of one command invocation.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn new(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(rel);
        atomic_write(&path, bytes)?;
        self.record(rel);
        Ok(path)
    }

    pub fn write_csv<R: Serialize>(&mut self, rel: &str, schema: &str, rows: &[R]) -> Result<PathBuf> {
        self.write(rel, &csv_bytes(schema, rows)?)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        self.write(rel, &json_bytes(value)?)
    }

    /// Note a file written elsewhere (e.g. by a worker thread).
    pub fn record(&mut self, rel: &str) {
        if !self.written.iter().any(|w| w == rel) {
            self.written.push(rel.to_string());
        }
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
}

/// Record of one command run. Written last, after every output it lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: RunStatus,
    pub outputs: Vec<String>,
    /// Work units already finished, for resumable commands.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub completed_cells: Vec<String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config: &impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            version: VERSION.to_string(),
            started_at: now(),
            finished_at: None,
            status: RunStatus::Running,
            outputs: Vec::new(),
            completed_cells: Vec::new(),
        })
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    pub fn load(dir: &Path, command: &str) -> Result<Option<Self>> {
        let path = dir.join(Self::file_name(command));
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Some(manifest))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        atomic_write(&dir.join(Self::file_name(&self.command)), &json_bytes(self)?)
    }

    /// Mark complete with the given outputs and write.
    pub fn finish(mut self, out: &OutputDir) -> Result<Self> {
        let mut outputs = out.written().to_vec();
        outputs.sort();
        self.outputs = outputs;
        self.status = RunStatus::Complete;
        self.finished_at = Some(now());
        self.save(out.root())?;
        Ok(self)
    }
}
