//! Run configuration: file layout, flag overrides, validation and hashing.

use std::fs;
use std::path::{Path, PathBuf};

use nphmm::bases::{BasisFamily, BasisSpec};
use nphmm::model::HmmSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Either a path to an HMM JSON file (relative to the config file) or the
/// model itself.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum HmmSource {
    Path(PathBuf),
    Inline(HmmSpec),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub hmm: Option<HmmSource>,
    pub basis: Option<BasisFamily>,
    pub m: Option<usize>,
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub retries: Option<usize>,
    pub delta: Option<f64>,
    pub p_grid: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub basis: Option<BasisFamily>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub hmm: HmmSpec,
    pub basis: BasisSpec,
    /// Observations used for estimation (the first `p` of each trajectory).
    pub p: usize,
    /// Observations used for inference (the `n` following the estimation segment).
    pub n: usize,
    pub seeds: Vec<u64>,
    pub retries: usize,
    pub delta: f64,
    pub p_grid: Vec<usize>,
    #[serde(skip)]
    pub out: PathBuf,
}

pub const DEFAULT_P: usize = 60_000;
pub const DEFAULT_N: usize = 1_000;
pub const DEFAULT_M: usize = 11;
pub const DEFAULT_RETRIES: usize = 8;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_P_GRID: [usize; 3] = [4_000, 16_000, 64_000];

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> CliResult<Self> {
        let (file, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| invalid(format!("cannot read config {}: {e}", p.display())))?;
                let file: ConfigFile = serde_json::from_str(&text)
                    .map_err(|e| invalid(format!("config {}: {e}", p.display())))?;
                (file, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        Self::from_parts(file, &base, ov)
    }

    pub fn from_parts(file: ConfigFile, base: &Path, ov: &Overrides) -> CliResult<Self> {
        let hmm = match file.hmm {
            None => HmmSpec::two_beta_benchmark(),
            Some(HmmSource::Inline(h)) => h,
            Some(HmmSource::Path(p)) => {
                let full = base.join(&p);
                let text = fs::read_to_string(&full)
                    .map_err(|e| invalid(format!("cannot read model {}: {e}", full.display())))?;
                HmmSpec::from_json(&text)
                    .map_err(|e| invalid(format!("model {}: {e}", full.display())))?
            }
        };
        let family = ov.basis.or(file.basis).unwrap_or(BasisFamily::Histogram);
        let m = ov.m.or(file.m).unwrap_or(DEFAULT_M);
        let basis = BasisSpec::new(family, m).map_err(|e| invalid(e.to_string()))?;
        let seeds = if ov.seeds.is_empty() {
            file.seeds.unwrap_or_else(|| vec![1])
        } else {
            ov.seeds.clone()
        };
        let cfg = RunConfig {
            hmm,
            basis,
            p: file.p.unwrap_or(DEFAULT_P),
            n: file.n.unwrap_or(DEFAULT_N),
            seeds,
            retries: file.retries.unwrap_or(DEFAULT_RETRIES),
            delta: file.delta.unwrap_or(DEFAULT_DELTA),
            p_grid: file.p_grid.unwrap_or_else(|| DEFAULT_P_GRID.to_vec()),
            out: ov.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let k = self.hmm.k();
        if self.basis.size() < k {
            return Err(invalid(format!(
                "basis size M = {} is smaller than the state count K = {k}",
                self.basis.size()
            )));
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if self.p < 3 {
            return Err(invalid("p must be at least 3 (one observation triple)"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta = {} is outside (0, 1)", self.delta)));
        }
        if self.p_grid.is_empty() || self.p_grid.windows(2).any(|w| w[0] >= w[1]) || self.p_grid[0] == 0 {
            return Err(invalid("p_grid must be nonempty, positive and strictly increasing"));
        }
        Ok(())
    }

    /// Hash of everything that determines the simulated data: the model and
    /// the segment lengths.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            hmm: &'a HmmSpec,
            p: usize,
            n: usize,
        }
        let canonical = serde_json::to_string(&Hashed {
            hmm: &self.hmm,
            p: self.p,
            n: self.n,
        })
        .expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Short basis label used in file names, e.g. `hist11`.
    pub fn basis_tag(&self) -> String {
        format!("{}{}", self.basis.family(), self.basis.size())
    }
}
