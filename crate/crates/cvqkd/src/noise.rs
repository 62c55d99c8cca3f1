//! Excess-noise models driven by the classical channels that share the
//! fiber with the quantum signal.
//!
//! Two data sources are supported: a linear crosstalk model in launch
//! power, `eps(P) = eps_floor + k_xt * P_mw`, fitted by least squares to
//! measured points, and a per-wavelength table of measured excess noise
//! that is queried by linear interpolation.

use serde::Serialize;

use crate::{require_finite, Error, Result};

/// Converts a power from dBm to milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts a power from milliwatts to dBm.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// One measured excess-noise value at a classical launch power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerNoisePoint {
    pub launch_power_dbm: f64,
    pub eps_snu: f64,
}

impl PowerNoisePoint {
    pub fn validate(&self) -> Result<()> {
        require_finite("launch_power_dbm", self.launch_power_dbm)?;
        require_finite("eps_snu", self.eps_snu)?;
        if self.eps_snu < 0.0 {
            return Err(Error::InvalidParam {
                name: "eps_snu",
                value: self.eps_snu,
                constraint: "excess noise must be >= 0",
            });
        }
        Ok(())
    }
}

/// Linear excess-noise model in the launch power of the classical cores.
///
/// The floor collects power-independent noise; the slope `k_xt` captures
/// inter-core crosstalk, which scales linearly with launch power in
/// milliwatts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrosstalkModel {
    /// Excess noise at zero classical power, in shot-noise units.
    pub eps_floor_snu: f64,
    /// Crosstalk coefficient in shot-noise units per milliwatt.
    pub k_xt_snu_per_mw: f64,
}

impl CrosstalkModel {
    pub fn new(eps_floor_snu: f64, k_xt_snu_per_mw: f64) -> Result<Self> {
        let m = Self {
            eps_floor_snu,
            k_xt_snu_per_mw,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("eps_floor_snu", self.eps_floor_snu)?;
        require_finite("k_xt_snu_per_mw", self.k_xt_snu_per_mw)?;
        if self.eps_floor_snu < 0.0 {
            return Err(Error::InvalidParam {
                name: "eps_floor_snu",
                value: self.eps_floor_snu,
                constraint: "noise floor must be >= 0",
            });
        }
        if self.k_xt_snu_per_mw < 0.0 {
            return Err(Error::InvalidParam {
                name: "k_xt_snu_per_mw",
                value: self.k_xt_snu_per_mw,
                constraint: "crosstalk coefficient must be >= 0",
            });
        }
        Ok(())
    }

    /// Predicted excess noise at a total classical launch power per core.
    pub fn eval_excess_noise(&self, launch_power_dbm: f64) -> Result<f64> {
        self.validate()?;
        require_finite("launch_power_dbm", launch_power_dbm)?;
        Ok(self.eps_floor_snu + self.k_xt_snu_per_mw * dbm_to_mw(launch_power_dbm))
    }
}

/// A fitted [`CrosstalkModel`] plus fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrosstalkFit {
    pub model: CrosstalkModel,
    /// True when the unconstrained least-squares solution had a negative
    /// coefficient that was clamped to zero and the fit redone.
    pub clamped: bool,
    /// Root-mean-square residual of the returned model over the input
    /// points, in shot-noise units.
    pub residual_rms_snu: f64,
    pub n_points: usize,
}

/// Fits the linear crosstalk model to measured `(power, excess noise)`
/// points by least squares in linear power (milliwatts).
///
/// Both coefficients are kept nonnegative: a negative solution is clamped
/// to zero and the other coefficient refitted, with the outcome flagged.
pub fn fit_crosstalk_model(points: &[PowerNoisePoint]) -> Result<CrosstalkFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    for p in points {
        p.validate()?;
    }

    let n = points.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for p in points {
        let x = dbm_to_mw(p.launch_power_dbm);
        sx += x;
        sy += p.eps_snu;
        sxx += x * x;
        sxy += x * p.eps_snu;
    }

    let det = n * sxx - sx * sx;
    if det <= 1e-12 * n * sxx {
        return Err(Error::Fit(format!(
            "launch powers are degenerate across {} points; at least two distinct powers are required",
            points.len()
        )));
    }

    let mut k = (n * sxy - sx * sy) / det;
    let mut floor = (sy - k * sx) / n;
    let mut clamped = false;
    if k < 0.0 {
        k = 0.0;
        floor = sy / n;
        clamped = true;
    } else if floor < 0.0 {
        floor = 0.0;
        k = sxy / sxx;
        clamped = true;
    }

    let model = CrosstalkModel::new(floor, k)?;
    let mut ss = 0.0;
    for p in points {
        let r = p.eps_snu - (floor + k * dbm_to_mw(p.launch_power_dbm));
        ss += r * r;
    }

    Ok(CrosstalkFit {
        model,
        clamped,
        residual_rms_snu: (ss / n).sqrt(),
        n_points: points.len(),
    })
}

/// Measured excess noise as a function of quantum-channel wavelength,
/// queried by linear interpolation between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthNoiseTable {
    points: Vec<(f64, f64)>,
    /// Classical launch power the table was measured at, when known.
    pub launch_power_dbm: Option<f64>,
}

impl WavelengthNoiseTable {
    /// Builds a table from `(wavelength_nm, eps_snu)` samples. Samples are
    /// sorted by wavelength; duplicate wavelengths are rejected.
    pub fn new(mut points: Vec<(f64, f64)>, launch_power_dbm: Option<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        for &(w, e) in &points {
            require_finite("wavelength_nm", w)?;
            require_finite("eps_snu", e)?;
            if e < 0.0 {
                return Err(Error::InvalidParam {
                    name: "eps_snu",
                    value: e,
                    constraint: "excess noise must be >= 0",
                });
            }
        }
        if let Some(p) = launch_power_dbm {
            require_finite("launch_power_dbm", p)?;
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in points.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidParam {
                    name: "wavelength_nm",
                    value: pair[0].0,
                    constraint: "wavelengths must be distinct",
                });
            }
        }
        Ok(Self {
            points,
            launch_power_dbm,
        })
    }

    /// Parses a table from CSV text with the mandatory header
    /// `wavelength_nm,eps_snu`. Lines starting with `#` are comments; a
    /// comment of the form `# launch_power_dbm=<value>` records the
    /// classical launch power the measurements were taken at.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut launch_power = None;
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() {
                continue;
            }
            if let Some(comment) = s.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(value) = comment.strip_prefix("launch_power_dbm") {
                    let value = value.trim().strip_prefix('=').ok_or(Error::Csv {
                        line,
                        msg: "expected '# launch_power_dbm=<value>'".into(),
                    })?;
                    launch_power = Some(parse_field(line, "launch_power_dbm", value)?);
                }
                continue;
            }
            if !saw_header {
                expect_header(line, s, &["wavelength_nm", "eps_snu"])?;
                saw_header = true;
                continue;
            }
            let (a, b) = split_two(line, s)?;
            rows.push((
                parse_field(line, "wavelength_nm", a)?,
                parse_field(line, "eps_snu", b)?,
            ));
        }
        if !saw_header {
            return Err(Error::Csv {
                line: 0,
                msg: "missing header 'wavelength_nm,eps_snu'".into(),
            });
        }
        Self::new(rows, launch_power)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn min_nm(&self) -> f64 {
        self.points[0].0
    }

    pub fn max_nm(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Excess noise at a wavelength inside the table range, linearly
    /// interpolated. Exact at the sample points and always within the
    /// bounds of the bracketing samples.
    pub fn eps_at_wavelength(&self, wavelength_nm: f64) -> Result<f64> {
        require_finite("wavelength_nm", wavelength_nm)?;
        if wavelength_nm < self.min_nm() || wavelength_nm > self.max_nm() {
            return Err(Error::WavelengthOutOfRange {
                wavelength_nm,
                min_nm: self.min_nm(),
                max_nm: self.max_nm(),
            });
        }
        let i = self.points.partition_point(|p| p.0 <= wavelength_nm);
        if i == self.points.len() {
            return Ok(self.points[i - 1].1);
        }
        let (x0, y0) = self.points[i - 1];
        let (x1, y1) = self.points[i];
        let s = (wavelength_nm - x0) / (x1 - x0);
        let y = (1.0 - s) * y0 + s * y1;
        Ok(y.clamp(y0.min(y1), y0.max(y1)))
    }
}

/// Parses measured `(launch power, excess noise)` points from CSV text
/// with the mandatory header `power_dbm,eps_snu`. Lines starting with `#`
/// are ignored.
pub fn parse_power_csv(text: &str) -> Result<Vec<PowerNoisePoint>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if !saw_header {
            expect_header(line, s, &["power_dbm", "eps_snu"])?;
            saw_header = true;
            continue;
        }
        let (a, b) = split_two(line, s)?;
        let point = PowerNoisePoint {
            launch_power_dbm: parse_field(line, "power_dbm", a)?,
            eps_snu: parse_field(line, "eps_snu", b)?,
        };
        point.validate().map_err(|e| Error::Csv {
            line,
            msg: e.to_string(),
        })?;
        rows.push(point);
    }
    if !saw_header {
        return Err(Error::Csv {
            line: 0,
            msg: "missing header 'power_dbm,eps_snu'".into(),
        });
    }
    Ok(rows)
}

fn expect_header(line: usize, s: &str, expected: &[&str]) -> Result<()> {
    let fields: Vec<&str> = s.split(',').map(str::trim).collect();
    if fields != expected {
        return Err(Error::Csv {
            line,
            msg: format!("expected header '{}', got '{s}'", expected.join(",")),
        });
    }
    Ok(())
}

fn split_two<'a>(line: usize, s: &'a str) -> Result<(&'a str, &'a str)> {
    let fields: Vec<&str> = s.split(',').map(str::trim).collect();
    if fields.len() != 2 {
        return Err(Error::Csv {
            line,
            msg: format!("expected 2 comma-separated fields, got {}", fields.len()),
        });
    }
    Ok((fields[0], fields[1]))
}

fn parse_field(line: usize, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| Error::Csv {
        line,
        msg: format!("cannot parse {name} value '{raw}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            line,
            msg: format!("{name} value '{raw}' is not finite"),
        });
    }
    Ok(v)
}
