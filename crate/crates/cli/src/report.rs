use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Definitions the analysis adopts; every report repeats them.
pub const CAVEATS: [&str; 3] = [
    "nice: U is taken to be nice when the forward orbit of every boundary point of U never enters U",
    "good interval: T is good with time n when f^n maps T affinely and bijectively onto a component of U; \
     the orbit of T may visit U before time n",
    "verdicts are finite-horizon heuristics; residual decay, sampled hits and absorbing fractions are evidence, not proofs",
];

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub caveats: [&'static str; 3],
    /// Set when a hypothesis gate was overridden.
    pub watermark: Option<String>,
}

impl Header {
    pub fn new(config: &RunConfig, watermark: Option<String>) -> Self {
        Header {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: config.clone(),
            caveats: CAVEATS,
            watermark,
        }
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

/// Output directory of one run.
pub struct Bundle {
    dir: PathBuf,
    header: Header,
}

impl Bundle {
    pub fn create(dir: &Path, header: Header) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Bundle { dir: dir.to_path_buf(), header })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    /// Writes `body` with the run header merged in at the top level.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&Document { header: &self.header, body })?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn csv<R: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
