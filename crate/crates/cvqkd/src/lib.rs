//! Continuous-variable QKD link analysis for multicore fiber systems that
//! carry classical WDM traffic alongside quantum channels.
//!
//! The crate is organised around four concerns:
//!
//! - [`skr`]: Gaussian-modulation secret key rates against individual and
//!   collective attacks, including modulation-variance optimization and the
//!   maximum tolerable excess noise of a link.
//! - [`noise`]: excess noise as a function of classical launch power
//!   (a linear inter-core crosstalk model fitted to measurements) and of
//!   wavelength (an interpolated measurement table).
//! - [`homodyne`]: a Monte Carlo model of the three-stage homodyne
//!   calibration procedure used to measure excess noise, plus the
//!   corresponding estimators and their standard errors.
//! - [`planner`]: spectrum allocation of QKD channels between classical
//!   WDM carriers, aggregate throughput accounting, and launch-power /
//!   wavelength sweeps that tie the other modules together.
//!
//! All variances are expressed in shot-noise units (SNU) unless a name says
//! otherwise. Information quantities are in bits per symbol.

pub mod homodyne;
pub mod noise;
pub mod planner;
mod search;
pub mod skr;

pub use homodyne::{
    estimate_excess_noise, estimate_variance, simulate_stage, standard_errors,
    CalibrationStandardErrors, ExcessNoiseEstimate, MeasurementConfig, Stage, StageSamples,
};
pub use noise::{
    dbm_to_mw, fit_crosstalk_model, mw_to_dbm, parse_power_csv, CrosstalkFit, CrosstalkModel,
    PowerNoisePoint, WavelengthNoiseTable,
};
pub use planner::{
    aggregate_skr, allocate_qkd_slots, classical_throughput, max_launch_power, sweep_power,
    sweep_wavelength, ChannelRates, ClassicalGrid, CoreLayout, Modulation, QkdGrid, SpectrumPlan,
    SweepResult,
};
pub use skr::{
    chi_hom, chi_line, chi_tot, eve_info_individual, g_func, holevo_bound, max_tolerable_excess_noise,
    mutual_info_ab, optimize_modulation_variance, secret_key_rate, skr_bits_per_second,
    symplectic_eigenvalues, AttackModel, EigenIntermediates, LinkBase, LinkParams, NoiseBreakdown,
    ProtocolParams, SkrResult, VaOptimum,
};

/// Errors produced by link analysis, calibration, and planning routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its physical or mathematical domain.
    #[error("{name} = {value} is out of domain: {constraint}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// An intermediate quantity left its physical range by more than the
    /// floating-point tolerance, which signals an invalid covariance state
    /// rather than round-off.
    #[error("numerical domain violation: {what} = {value}")]
    NumericalDomain { what: &'static str, value: f64 },

    /// The crosstalk model could not be fitted to the supplied points.
    #[error("crosstalk fit failed: {0}")]
    Fit(String),

    /// Too few samples or data points for the requested estimate.
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The calibration stages are inconsistent, e.g. the shot-noise stage
    /// does not rise above the electrical-noise stage.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// The link cannot produce a positive key even at zero excess noise,
    /// so the requested threshold does not exist.
    #[error("infeasible link: {0}")]
    InfeasibleLink(String),

    /// A query fell outside the range covered by a measurement table.
    #[error("wavelength {wavelength_nm} nm is outside the table range [{min_nm}, {max_nm}] nm")]
    WavelengthOutOfRange {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    /// A CSV record could not be parsed.
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            value,
            constraint: "must be finite",
        })
    }
}
