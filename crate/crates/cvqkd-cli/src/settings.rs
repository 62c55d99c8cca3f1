//! Flat key-value configuration with dotted section names. A config file
//! provides defaults, `--set` entries override the file, and explicit
//! command-line flags override both.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, Result};

const KNOWN_KEYS: &[&str] = &[
    "link.t",
    "link.eps_snu",
    "link.eta",
    "link.nu_el_snu",
    "protocol.v_a",
    "protocol.beta",
    "protocol.beta_list",
    "rate.symbol_rate_hz",
    "grid.n_channels",
    "grid.spacing_ghz",
    "grid.symbol_rate_gbd",
    "grid.bits_per_symbol",
    "grid.band_start_nm",
    "grid.band_end_nm",
    "qkd.channel_bw_ghz",
    "qkd.slot_ghz",
    "qkd.max_slots_per_band",
    "cores.n_qkd",
    "cores.n_classical",
    "model.eps_floor_snu",
    "model.k_xt_snu_per_mw",
    "plan.per_channel_skr_bps",
    "sweep.axis",
    "sweep.table",
    "sweep.fit_from",
    "sweep.min_dbm",
    "sweep.max_dbm",
    "sweep.step_db",
    "sweep.step_nm",
    "fit.input",
    "calib.n_samples",
    "calib.n0",
    "calib.nu_el_snu",
    "calib.eta",
    "calib.t",
    "calib.eps_snu",
    "calib.seed",
    "output.path",
];

#[derive(Debug, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(config: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|err| {
                CliError::Io(format!("cannot read config file {}: {err}", path.display()))
            })?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Validation(format!(
                        "config line {}: expected `key = value`, got `{line}`",
                        idx + 1
                    ))
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        for entry in overrides {
            let (key, value) = entry.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("--set expects KEY=VALUE, got `{entry}`"))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Validation(format!("unknown config key `{key}`")));
            }
        }
        Ok(Settings { map })
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, "a number")
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse_with(key, "a nonnegative integer")
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, "a nonnegative integer")
    }

    pub fn u32(&self, key: &str) -> Result<Option<u32>> {
        self.parse_with(key, "a nonnegative integer")
    }

    /// Comma-separated list of numbers, e.g. `protocol.beta_list = 1.0, 0.898`.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(value) => value
                .split(',')
                .map(|item| {
                    item.trim().parse::<f64>().map_err(|_| {
                        CliError::Validation(format!(
                            "config key `{key}`: `{}` is not a number",
                            item.trim()
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    fn parse_with<T: std::str::FromStr>(&self, key: &str, wanted: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(value) => value.parse::<T>().map(Some).map_err(|_| {
                CliError::Validation(format!("config key `{key}`: `{value}` is not {wanted}"))
            }),
        }
    }
}
