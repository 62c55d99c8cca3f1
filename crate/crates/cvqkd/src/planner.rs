//! Spectrum planning for quantum channels that share a multicore fiber
//! with a classical WDM system, plus the system-level sweeps and
//! launch-power limits built on the key-rate and noise models.
//!
//! Classical carriers sit on a fixed grid inside an operating band. The
//! spectral guard band between adjacent carriers, and the margins outside
//! the outermost carriers, are filled with QKD slots. Throughput
//! accounting then multiplies per-channel key rates over channels and
//! cores.

use serde::Serialize;

use crate::noise::{CrosstalkModel, WavelengthNoiseTable};
use crate::search::bisect_decreasing;
use crate::skr::{
    optimize_modulation_variance, secret_key_rate, skr_bits_per_second, AttackModel, LinkBase,
    ProtocolParams,
};
use crate::{require_finite, Error, Result};

/// Speed of light expressed so that `frequency_ghz = C / wavelength_nm`.
pub const SPEED_OF_LIGHT_NM_GHZ: f64 = 299_792_458.0;

/// Fan-out cores available in the fiber.
pub const MAX_CORES: usize = 19;

/// Width of the bracket, in dB, at which the launch-power bisection stops.
pub const LAUNCH_POWER_TOL_DB: f64 = 0.01;

/// The classical WDM system occupying the shared band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalGrid {
    /// Number of classical carriers.
    pub n_channels: usize,
    /// Carrier spacing in GHz.
    pub spacing_ghz: f64,
    /// Classical symbol rate in GBd; numerically this is also the occupied
    /// bandwidth per carrier in GHz.
    pub symbol_rate_gbd: f64,
    /// Information bits per classical symbol (per carrier, both
    /// polarizations combined).
    pub bits_per_symbol: u32,
    /// Operating band as `(start_nm, end_nm)` with `start_nm < end_nm`.
    pub band_nm: (f64, f64),
}

impl Default for ClassicalGrid {
    fn default() -> Self {
        Self {
            n_channels: 30,
            spacing_ghz: 100.0,
            symbol_rate_gbd: 24.5,
            bits_per_symbol: 8,
            band_nm: (1537.0, 1563.0),
        }
    }
}

impl ClassicalGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels < 1 {
            return Err(Error::InvalidParam {
                name: "n_channels",
                value: self.n_channels as f64,
                constraint: "at least one classical channel is required",
            });
        }
        require_finite("spacing_ghz", self.spacing_ghz)?;
        require_finite("symbol_rate_gbd", self.symbol_rate_gbd)?;
        require_finite("band_start_nm", self.band_nm.0)?;
        require_finite("band_end_nm", self.band_nm.1)?;
        if self.symbol_rate_gbd <= 0.0 {
            return Err(Error::InvalidParam {
                name: "symbol_rate_gbd",
                value: self.symbol_rate_gbd,
                constraint: "symbol rate must be > 0",
            });
        }
        if self.spacing_ghz <= self.symbol_rate_gbd {
            return Err(Error::InvalidParam {
                name: "spacing_ghz",
                value: self.spacing_ghz,
                constraint: "carrier spacing must exceed the occupied bandwidth",
            });
        }
        if self.bits_per_symbol < 1 {
            return Err(Error::InvalidParam {
                name: "bits_per_symbol",
                value: self.bits_per_symbol as f64,
                constraint: "at least one bit per symbol is required",
            });
        }
        if !(self.band_nm.0 > 0.0 && self.band_nm.0 < self.band_nm.1) {
            return Err(Error::InvalidParam {
                name: "band_nm",
                value: self.band_nm.0,
                constraint: "band must satisfy 0 < start_nm < end_nm",
            });
        }
        Ok(())
    }

    /// Spectral gap between the occupied bands of adjacent carriers, in
    /// GHz.
    pub fn guard_band_ghz(&self) -> f64 {
        self.spacing_ghz - self.symbol_rate_gbd
    }
}

/// QKD channel and slot widths used to fill the guard bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QkdGrid {
    /// Occupied bandwidth of one quantum channel in GHz.
    pub channel_bw_ghz: f64,
    /// Grid slot granted to each quantum channel in GHz.
    pub slot_ghz: f64,
    /// Cap on slots placed in any one guard band, keeping quantum channels
    /// away from the classical carrier skirts.
    pub max_slots_per_band: usize,
}

impl Default for QkdGrid {
    fn default() -> Self {
        Self {
            channel_bw_ghz: 1.0,
            slot_ghz: 5.0,
            max_slots_per_band: 11,
        }
    }
}

impl QkdGrid {
    pub fn validate(&self) -> Result<()> {
        require_finite("channel_bw_ghz", self.channel_bw_ghz)?;
        require_finite("slot_ghz", self.slot_ghz)?;
        if self.channel_bw_ghz <= 0.0 {
            return Err(Error::InvalidParam {
                name: "channel_bw_ghz",
                value: self.channel_bw_ghz,
                constraint: "channel bandwidth must be > 0",
            });
        }
        if self.slot_ghz < self.channel_bw_ghz {
            return Err(Error::InvalidParam {
                name: "slot_ghz",
                value: self.slot_ghz,
                constraint: "slot must be at least one channel bandwidth wide",
            });
        }
        if self.max_slots_per_band < 1 {
            return Err(Error::InvalidParam {
                name: "max_slots_per_band",
                value: self.max_slots_per_band as f64,
                constraint: "at least one slot per band is required",
            });
        }
        Ok(())
    }
}

/// How the fiber cores are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoreLayout {
    /// Cores carrying quantum channels.
    pub n_qkd_cores: usize,
    /// Cores loaded with the classical WDM system.
    pub n_classical_cores: usize,
}

impl Default for CoreLayout {
    fn default() -> Self {
        Self {
            n_qkd_cores: 6,
            n_classical_cores: 3,
        }
    }
}

impl CoreLayout {
    pub fn validate(&self) -> Result<()> {
        let total = self.n_qkd_cores + self.n_classical_cores;
        if total > MAX_CORES {
            return Err(Error::InvalidParam {
                name: "cores",
                value: total as f64,
                constraint: "assigned cores exceed the fiber core count",
            });
        }
        Ok(())
    }
}

/// Result of slotting quantum channels into the guard bands of the
/// classical grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumPlan {
    /// Guard bands available for quantum channels: one between each pair
    /// of adjacent carriers and one outside each outermost carrier.
    pub bands: usize,
    /// Slots actually placed per band after the per-band cap.
    pub slots_per_band: usize,
    /// Slots that would fit per band from the guard width alone.
    pub slots_per_band_unclamped: usize,
    /// Total quantum channels: `bands * slots_per_band`.
    pub channels: usize,
    pub guard_band_ghz: f64,
    /// Classical carrier frequencies in GHz, ascending.
    pub carrier_freqs_ghz: Vec<f64>,
    /// Quantum channel center frequencies in GHz, ascending.
    pub slot_centers_ghz: Vec<f64>,
}

/// Places QKD slots in every guard band of the classical grid.
///
/// Carriers are centered in the operating band. Each inner guard band gets
/// a centered block of slots; the two outer bands get the same number of
/// slots stacked directly against the outermost carriers. A guard band
/// narrower than one slot produces an empty plan rather than an error.
pub fn allocate_qkd_slots(classical: &ClassicalGrid, qkd: &QkdGrid) -> Result<SpectrumPlan> {
    classical.validate()?;
    qkd.validate()?;

    let guard_ghz = classical.guard_band_ghz();
    let unclamped = (guard_ghz / qkd.slot_ghz).floor() as usize;
    let slots = unclamped.min(qkd.max_slots_per_band);
    let bands = classical.n_channels + 1;

    let f_hi = SPEED_OF_LIGHT_NM_GHZ / classical.band_nm.0;
    let f_lo = SPEED_OF_LIGHT_NM_GHZ / classical.band_nm.1;
    let carrier_span = (classical.n_channels - 1) as f64 * classical.spacing_ghz;
    let margin = 0.5 * (f_hi - f_lo - carrier_span);
    if margin < 0.0 {
        return Err(Error::InvalidParam {
            name: "band_nm",
            value: carrier_span,
            constraint: "classical carriers do not fit inside the operating band",
        });
    }
    let carrier_freqs_ghz: Vec<f64> = (0..classical.n_channels)
        .map(|i| f_lo + margin + i as f64 * classical.spacing_ghz)
        .collect();

    let half_occupied = 0.5 * classical.symbol_rate_gbd;
    let block = slots as f64 * qkd.slot_ghz;
    let mut slot_centers_ghz = Vec::with_capacity(bands * slots);

    let low_edge = carrier_freqs_ghz[0] - half_occupied;
    for k in 0..slots {
        slot_centers_ghz.push(low_edge - block + (k as f64 + 0.5) * qkd.slot_ghz);
    }
    let pad = 0.5 * (guard_ghz - block);
    for pair in carrier_freqs_ghz.windows(2) {
        let gap_lo = pair[0] + half_occupied;
        for k in 0..slots {
            slot_centers_ghz.push(gap_lo + pad + (k as f64 + 0.5) * qkd.slot_ghz);
        }
    }
    let high_edge = carrier_freqs_ghz[classical.n_channels - 1] + half_occupied;
    for k in 0..slots {
        slot_centers_ghz.push(high_edge + (k as f64 + 0.5) * qkd.slot_ghz);
    }

    Ok(SpectrumPlan {
        bands,
        slots_per_band: slots,
        slots_per_band_unclamped: unclamped,
        channels: bands * slots,
        guard_band_ghz: guard_ghz,
        carrier_freqs_ghz,
        slot_centers_ghz,
    })
}

/// Per-channel secret key rates entering the aggregate.
#[derive(Debug, Clone, Copy)]
pub enum ChannelRates<'a> {
    /// Every channel delivers the same rate in bits/s.
    Uniform(f64),
    /// One rate in bits/s per plan channel, in slot order.
    PerChannel(&'a [f64]),
}

/// Total secret key throughput of the plan in bits/s, summed over
/// channels and multiplied by the number of QKD cores.
pub fn aggregate_skr(plan: &SpectrumPlan, rates: ChannelRates<'_>, n_qkd_cores: usize) -> Result<f64> {
    let per_core = match rates {
        ChannelRates::Uniform(rate) => {
            require_finite("rate_bps", rate)?;
            if rate < 0.0 {
                return Err(Error::InvalidParam {
                    name: "rate_bps",
                    value: rate,
                    constraint: "per-channel rate must be >= 0",
                });
            }
            plan.channels as f64 * rate
        }
        ChannelRates::PerChannel(rates) => {
            if rates.len() != plan.channels {
                return Err(Error::InvalidParam {
                    name: "rates",
                    value: rates.len() as f64,
                    constraint: "one rate per plan channel is required",
                });
            }
            let mut sum = 0.0;
            for &rate in rates {
                require_finite("rate_bps", rate)?;
                if rate < 0.0 {
                    return Err(Error::InvalidParam {
                        name: "rate_bps",
                        value: rate,
                        constraint: "per-channel rate must be >= 0",
                    });
                }
                sum += rate;
            }
            sum
        }
    };
    Ok(per_core * n_qkd_cores as f64)
}

/// Total classical throughput in bits/s over the loaded cores.
pub fn classical_throughput(classical: &ClassicalGrid, n_classical_cores: usize) -> Result<f64> {
    classical.validate()?;
    Ok(classical.n_channels as f64
        * classical.symbol_rate_gbd
        * 1e9
        * classical.bits_per_symbol as f64
        * n_classical_cores as f64)
}

/// Largest classical launch power per core, in dBm, at which the link
/// still yields a nonnegative key rate under the crosstalk model.
///
/// Returns positive infinity when the model has no power dependence
/// (`k_xt = 0`) but the link is otherwise feasible, and an
/// infeasible-link error when even the zero-power noise floor kills the
/// key.
pub fn max_launch_power(
    model: &CrosstalkModel,
    proto: &ProtocolParams,
    base: &LinkBase,
    attack: AttackModel,
) -> Result<f64> {
    model.validate()?;
    proto.validate()?;
    base.validate()?;

    let rate_at_eps = |eps: f64| -> Result<f64> {
        let link = base.with_eps(eps)?;
        Ok(secret_key_rate(proto, &link, attack)?.skr_per_symbol)
    };

    let floor_rate = rate_at_eps(model.eps_floor_snu)?;
    if floor_rate <= 0.0 {
        return Err(Error::InfeasibleLink(format!(
            "key rate {floor_rate} bits/symbol at the zero-power noise floor for {attack} attack"
        )));
    }
    if model.k_xt_snu_per_mw == 0.0 {
        return Ok(f64::INFINITY);
    }

    let rate_at_dbm = |p: f64| -> f64 {
        model
            .eval_excess_noise(p)
            .and_then(rate_at_eps)
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut lo = -30.0;
    while rate_at_dbm(lo) <= 0.0 {
        lo -= 20.0;
        if lo < -400.0 {
            return Err(Error::InfeasibleLink(
                "no launch power with a positive key rate".into(),
            ));
        }
    }
    let mut hi = lo + 10.0;
    while rate_at_dbm(hi) > 0.0 {
        hi += 10.0;
        if hi > 400.0 {
            return Ok(f64::INFINITY);
        }
    }

    Ok(bisect_decreasing(
        rate_at_dbm,
        lo,
        hi,
        0.0,
        LAUNCH_POWER_TOL_DB,
        200,
    ))
}

/// Modulation-variance policy applied at every sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    /// Use the given `v_a` everywhere.
    Fixed(f64),
    /// Re-optimize `v_a` per point and per attack/reconciliation
    /// combination.
    Optimized,
}

/// What the sweep coordinate means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Wavelength,
    Power,
}

impl SweepAxis {
    pub fn column_name(self) -> &'static str {
        match self {
            SweepAxis::Wavelength => "wavelength_nm",
            SweepAxis::Power => "power_dbm",
        }
    }
}

/// Key throughput of one sweep sample for the four combinations of attack
/// model and reconciliation efficiency. Negative per-symbol rates are
/// reported as zero bits/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSet {
    pub skr_coll_ideal_bps: f64,
    pub skr_ind_ideal_bps: f64,
    pub skr_coll_beta_bps: f64,
    pub skr_ind_beta_bps: f64,
}

/// One sweep sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Wavelength in nm or launch power in dBm, depending on the axis.
    pub coordinate: f64,
    pub eps_snu: f64,
    #[serde(flatten)]
    pub rates: RateSet,
}

/// Mean throughput over the sweep points that deliver a positive key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanOverPositive {
    /// Zero when no point delivers a positive key.
    pub mean_bps: f64,
    pub n_positive: usize,
}

/// Per-combination positive-key means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSummary {
    pub coll_ideal: MeanOverPositive,
    pub ind_ideal: MeanOverPositive,
    pub coll_beta: MeanOverPositive,
    pub ind_beta: MeanOverPositive,
}

/// A completed sweep over wavelength or launch power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Non-ideal reconciliation efficiency used for the `beta` columns.
    pub beta: f64,
    pub symbol_rate_hz: f64,
    pub points: Vec<SweepPoint>,
    pub summary: RateSummary,
}

impl SweepResult {
    /// Renders the sweep as CSV with a fixed column order. The first
    /// column is named after the sweep axis.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(self.axis.column_name());
        out.push_str(
            ",eps_snu,skr_coll_ideal_bps,skr_ind_ideal_bps,skr_coll_beta_bps,skr_ind_beta_bps\n",
        );
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.coordinate,
                p.eps_snu,
                p.rates.skr_coll_ideal_bps,
                p.rates.skr_ind_ideal_bps,
                p.rates.skr_coll_beta_bps,
                p.rates.skr_ind_beta_bps
            ));
        }
        out
    }
}

/// Sweeps the quantum channel across a measured wavelength/noise table.
///
/// With `step_nm = None` the table's own sample wavelengths are used;
/// otherwise the table is resampled on a regular grid from its minimum to
/// its maximum wavelength.
pub fn sweep_wavelength(
    table: &WavelengthNoiseTable,
    base: &LinkBase,
    beta: f64,
    modulation: Modulation,
    symbol_rate_hz: f64,
    step_nm: Option<f64>,
) -> Result<SweepResult> {
    let wavelengths = match step_nm {
        None => table.points().iter().map(|p| p.0).collect(),
        Some(step) => {
            require_finite("step_nm", step)?;
            if step <= 0.0 {
                return Err(Error::InvalidParam {
                    name: "step_nm",
                    value: step,
                    constraint: "wavelength step must be > 0",
                });
            }
            regular_grid(table.min_nm(), table.max_nm(), step)
        }
    };
    let mut coords_eps = Vec::with_capacity(wavelengths.len());
    for w in wavelengths {
        coords_eps.push((w, table.eps_at_wavelength(w)?));
    }
    run_sweep(
        SweepAxis::Wavelength,
        coords_eps,
        base,
        beta,
        modulation,
        symbol_rate_hz,
    )
}

/// Sweeps the classical launch power through a crosstalk model on a
/// regular dBm grid.
pub fn sweep_power(
    model: &CrosstalkModel,
    base: &LinkBase,
    beta: f64,
    modulation: Modulation,
    symbol_rate_hz: f64,
    min_dbm: f64,
    max_dbm: f64,
    step_db: f64,
) -> Result<SweepResult> {
    model.validate()?;
    require_finite("min_dbm", min_dbm)?;
    require_finite("max_dbm", max_dbm)?;
    require_finite("step_db", step_db)?;
    if max_dbm < min_dbm {
        return Err(Error::InvalidParam {
            name: "max_dbm",
            value: max_dbm,
            constraint: "power range must satisfy min_dbm <= max_dbm",
        });
    }
    if step_db <= 0.0 {
        return Err(Error::InvalidParam {
            name: "step_db",
            value: step_db,
            constraint: "power step must be > 0",
        });
    }
    let mut coords_eps = Vec::new();
    for p in regular_grid(min_dbm, max_dbm, step_db) {
        coords_eps.push((p, model.eval_excess_noise(p)?));
    }
    run_sweep(
        SweepAxis::Power,
        coords_eps,
        base,
        beta,
        modulation,
        symbol_rate_hz,
    )
}

/// Inclusive regular grid; the endpoint is kept when it lands within
/// round-off of a step.
fn regular_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let x = min + k as f64 * step;
        if x > max {
            if x - max < 1e-9 * step.max(1.0) && grid.last() != Some(&max) {
                grid.push(max);
            }
            break;
        }
        grid.push(x);
        k += 1;
    }
    grid
}

fn run_sweep(
    axis: SweepAxis,
    coords_eps: Vec<(f64, f64)>,
    base: &LinkBase,
    beta: f64,
    modulation: Modulation,
    symbol_rate_hz: f64,
) -> Result<SweepResult> {
    base.validate()?;
    ProtocolParams::new(0.0, beta)?;
    if let Modulation::Fixed(v_a) = modulation {
        ProtocolParams::new(v_a, beta)?;
    }

    let rate_for = |eps: f64, attack: AttackModel, b: f64| -> Result<f64> {
        let link = base.with_eps(eps)?;
        let result = match modulation {
            Modulation::Fixed(v_a) => {
                let proto = ProtocolParams::new(v_a, b)?;
                secret_key_rate(&proto, &link, attack)?
            }
            Modulation::Optimized => optimize_modulation_variance(&link, b, attack)?.result,
        };
        skr_bits_per_second(&result, symbol_rate_hz)
    };

    let mut points = Vec::with_capacity(coords_eps.len());
    for (coordinate, eps_snu) in coords_eps {
        points.push(SweepPoint {
            coordinate,
            eps_snu,
            rates: RateSet {
                skr_coll_ideal_bps: rate_for(eps_snu, AttackModel::Collective, 1.0)?,
                skr_ind_ideal_bps: rate_for(eps_snu, AttackModel::Individual, 1.0)?,
                skr_coll_beta_bps: rate_for(eps_snu, AttackModel::Collective, beta)?,
                skr_ind_beta_bps: rate_for(eps_snu, AttackModel::Individual, beta)?,
            },
        });
    }

    let summary = RateSummary {
        coll_ideal: mean_over_positive(&points, |r| r.skr_coll_ideal_bps),
        ind_ideal: mean_over_positive(&points, |r| r.skr_ind_ideal_bps),
        coll_beta: mean_over_positive(&points, |r| r.skr_coll_beta_bps),
        ind_beta: mean_over_positive(&points, |r| r.skr_ind_beta_bps),
    };

    Ok(SweepResult {
        axis,
        beta,
        symbol_rate_hz,
        points,
        summary,
    })
}

fn mean_over_positive(points: &[SweepPoint], pick: impl Fn(&RateSet) -> f64) -> MeanOverPositive {
    let mut sum = 0.0;
    let mut n_positive = 0;
    for p in points {
        let r = pick(&p.rates);
        if r > 0.0 {
            sum += r;
            n_positive += 1;
        }
    }
    MeanOverPositive {
        mean_bps: if n_positive > 0 { sum / n_positive as f64 } else { 0.0 },
        n_positive,
    }
}
