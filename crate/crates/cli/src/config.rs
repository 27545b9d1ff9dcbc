//! Configuration plumbing: flag/file merging, canonical hashing, input
//! parsing, and output routing.
//!
//! Every run is reproducible from its effective config alone: the merged
//! config is serialized canonically and hashed, and the hash rides on
//! every emitted row.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ballfall::dynamics::{SimOptions, Tolerances};
use ballfall::mass::MassVector;
use ballfall::state::PhaseState;
use ballfall::sufficiency::RationalMasses;

use crate::CliError;

/// Per-subcommand sections of the TOML config file; each mirrors the
/// subcommand's flags one to one. Flags override file values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub simulate: Option<SimulateSection>,
    pub lyapunov: Option<LyapunovSection>,
    pub sufficiency: Option<SufficiencySection>,
    pub scan: Option<ScanSection>,
    #[serde(rename = "cone-check")]
    pub cone_check: Option<ConeCheckSection>,
    pub verify: Option<VerifySection>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub masses: Option<String>,
    pub seed: Option<u64>,
    pub q: Option<String>,
    pub v: Option<String>,
    pub events: Option<u64>,
    pub time: Option<f64>,
    pub out: Option<PathBuf>,
    pub energy_renorm_every: Option<u64>,
    pub tol_sing: Option<f64>,
    pub tol_graze: Option<f64>,
    pub tol_ord: Option<f64>,
    pub tol_energy: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    pub masses: Option<String>,
    pub seeds: Option<String>,
    pub events: Option<u64>,
    pub renorm_every: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol_sing: Option<f64>,
    pub tol_graze: Option<f64>,
    pub tol_ord: Option<f64>,
    pub tol_energy: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SufficiencySection {
    pub seq: Option<String>,
    pub masses: Option<String>,
    pub n: Option<usize>,
    pub classify: Option<bool>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub masses: Option<String>,
    pub vary_top: Option<String>,
    pub seeds: Option<String>,
    pub onset_events: Option<u64>,
    pub collisions: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeCheckSection {
    pub masses: Option<String>,
    pub seed: Option<u64>,
    pub events: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub cases: Option<usize>,
    pub seed: Option<u64>,
    pub suites: Option<String>,
    pub tol_bisect: Option<f64>,
    pub out: Option<PathBuf>,
}

/// First 16 hex digits of the SHA-256 of the canonical serialization.
pub fn config_hash<T: Serialize>(effective: &T) -> String {
    let text = toml::to_string(effective).expect("effective config serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses the mass list (`p/q` rationals or decimals) into the exact and
/// floating representations.
pub fn parse_masses(text: &str) -> Result<(RationalMasses, MassVector), CliError> {
    let exact = RationalMasses::parse(text)
        .map_err(|e| CliError::Config(format!("bad masses {text:?}: {e}")))?;
    let masses = MassVector::new(exact.to_f64())
        .map_err(|e| CliError::Config(format!("bad masses {text:?}: {e}")))?;
    Ok((exact, masses))
}

pub fn parse_f64_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad number {p:?}: {e}")))
        })
        .collect()
}

pub fn parse_seed_list(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Config(format!("bad seed {p:?}: {e}")))
        })
        .collect()
}

/// `lo:hi:steps` grid literal for the scan subcommand.
pub fn parse_grid(text: &str) -> Result<(f64, f64, usize), CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "grid literal {text:?} is not lo:hi:steps"
        )));
    }
    let lo = parts[0]
        .parse::<f64>()
        .map_err(|e| CliError::Config(format!("bad grid {text:?}: {e}")))?;
    let hi = parts[1]
        .parse::<f64>()
        .map_err(|e| CliError::Config(format!("bad grid {text:?}: {e}")))?;
    let steps = parts[2]
        .parse::<usize>()
        .map_err(|e| CliError::Config(format!("bad grid {text:?}: {e}")))?;
    if steps == 0 || hi < lo {
        return Err(CliError::Config(format!("empty grid {text:?}")));
    }
    Ok((lo, hi, steps))
}

/// Builds simulation options from resolved tolerance overrides.
pub fn sim_options(
    tol_sing: f64,
    tol_graze: f64,
    tol_ord: f64,
    tol_energy: f64,
    energy_renorm_every: u64,
) -> SimOptions {
    SimOptions {
        tol: Tolerances {
            eps_sing: tol_sing,
            eps_graze: tol_graze,
            eps_ord: tol_ord,
            energy_tol: tol_energy,
        },
        renorm: (energy_renorm_every > 0)
            .then_some(ballfall::dynamics::RenormPolicy {
                every: energy_renorm_every,
            }),
        guard: Some(Default::default()),
    }
}

/// Validates an explicit initial state against the energy surface.
pub fn explicit_state(
    q: &str,
    v: &str,
    masses: &MassVector,
    opts: &SimOptions,
) -> Result<PhaseState, CliError> {
    let q = parse_f64_list(q)?;
    let v = parse_f64_list(v)?;
    PhaseState::new(q, v, 0.0, masses, opts.tol.eps_ord, opts.tol.energy_tol)
        .map_err(|e| CliError::Config(format!("bad initial state: {e}")))
}

/// Output sink: stdout when no path is given; relative paths resolve
/// against BALLFALL_OUT_DIR when that is set.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => {
            let resolved = resolve_out_path(p);
            if let Some(parent) = resolved.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent).map_err(|e| {
                        CliError::Config(format!("cannot create {}: {e}", parent.display()))
                    })?;
                }
            }
            let file = fs::File::create(&resolved).map_err(|e| {
                CliError::Config(format!("cannot create {}: {e}", resolved.display()))
            })?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

pub fn resolve_out_path(p: &Path) -> PathBuf {
    if p.is_relative() {
        if let Ok(dir) = std::env::var("BALLFALL_OUT_DIR") {
            return PathBuf::from(dir).join(p);
        }
    }
    p.to_path_buf()
}
