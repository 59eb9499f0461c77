use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use leafsim_core::config::RunConfig;
use leafsim_core::Foliation;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::Common;

/// Effective configuration of one run together with its output directory.
pub struct Context {
    pub cfg: RunConfig,
    pub hash: String,
    pub seed: u64,
    out: PathBuf,
}

impl Context {
    /// Loads the config, applies the command-line overrides and hashes the result.
    pub fn new(common: &Common) -> Result<Self> {
        let Some(path) = &common.config else {
            bail!("--config is required");
        };
        let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(seed) = common.seed {
            cfg.sampler.seed = seed;
            cfg.experiments.heat_tail.seed = seed;
        }
        if let Some(n) = common.paths {
            cfg.paths = n;
        }
        if let Some(t) = common.horizon {
            cfg.sampler.horizon = t;
        }
        Ok(Self::from_config(cfg, &common.out))
    }

    pub fn from_config(cfg: RunConfig, out: &Path) -> Self {
        let hash = hex::encode(Sha256::digest(cfg.to_json().as_bytes()));
        let seed = cfg.sampler.seed;
        Context { cfg, hash, seed, out: out.to_path_buf() }
    }

    pub fn foliation(&self) -> Result<Foliation> {
        self.cfg.build().with_context(|| format!("building foliation of run {}", self.cfg.name))
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, BufWriter::new(file)))
    }

    /// Writes a CSV whose first line is `# config_sha256=<hex> seed=<n>`.
    pub fn csv(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<PathBuf> {
        let (path, mut w) = self.create(name)?;
        writeln!(w, "# config_sha256={} seed={}", self.hash, self.seed)?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    /// Writes a JSON object with `config_sha256`, `seed` and `run` added to `value`.
    pub fn json(&self, name: &str, mut value: Value) -> Result<PathBuf> {
        if let Value::Object(map) = &mut value {
            map.insert("config_sha256".into(), json!(self.hash));
            map.insert("seed".into(), json!(self.seed));
            map.insert("run".into(), json!(self.cfg.name));
        }
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }
}
