//! Monte Carlo model of the three-stage homodyne calibration used to
//! measure excess noise.
//!
//! The receiver is characterised by recording quadrature samples in three
//! configurations: local oscillator off (electrical noise only), local
//! oscillator on with the quantum input blocked (shot plus electrical
//! noise), and local oscillator on with the fiber connected while the
//! classical cores are loaded (crosstalk plus shot plus electrical noise).
//! Each stage draws zero-mean Gaussian samples whose variance follows the
//! detector model with shot-noise variance `n0` in raw detector units:
//!
//! - electrical only: `nu_el * n0`
//! - shot + electrical: `(1 + nu_el) * n0`
//! - crosstalk + shot + electrical: `(1 + nu_el + eta * t * eps) * n0`
//!
//! The estimators invert that model: `n0_hat = v_shot - v_el` and
//! `eps_hat = (v_total - v_shot) / (eta * t * n0_hat)`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::{require_finite, Error, Result};

/// The three detector configurations recorded during calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ElectricalOnly,
    ShotPlusElectrical,
    CrosstalkPlusShotPlusElectrical,
}

impl Stage {
    /// Independent RNG stream per stage, so stages are uncorrelated while
    /// the whole run remains reproducible from one seed.
    fn stream_index(self) -> u64 {
        match self {
            Stage::ElectricalOnly => 0,
            Stage::ShotPlusElectrical => 1,
            Stage::CrosstalkPlusShotPlusElectrical => 2,
        }
    }
}

/// Settings for one simulated calibration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementConfig {
    /// Samples recorded per stage, at least 2.
    pub n_samples: usize,
    /// Shot-noise variance in raw detector units, `> 0`.
    pub n0: f64,
    /// Electrical noise in shot-noise units, `>= 0`.
    pub nu_el_snu: f64,
    /// Detection efficiency in `(0, 1]`.
    pub eta: f64,
    /// Channel transmittance in `(0, 1]`.
    pub t: f64,
    /// Excess noise planted in the crosstalk stage, `>= 0`.
    pub eps_snu: f64,
    /// RNG seed; every stage derives its own stream from it.
    pub seed: u64,
}

impl MeasurementConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.n_samples,
            });
        }
        require_finite("n0", self.n0)?;
        require_finite("nu_el", self.nu_el_snu)?;
        require_finite("eps", self.eps_snu)?;
        require_finite("eta", self.eta)?;
        require_finite("t", self.t)?;
        if self.n0 <= 0.0 {
            return Err(Error::InvalidParam {
                name: "n0",
                value: self.n0,
                constraint: "shot-noise variance must be > 0",
            });
        }
        if self.nu_el_snu < 0.0 {
            return Err(Error::InvalidParam {
                name: "nu_el",
                value: self.nu_el_snu,
                constraint: "electrical noise must be >= 0",
            });
        }
        if self.eps_snu < 0.0 {
            return Err(Error::InvalidParam {
                name: "eps",
                value: self.eps_snu,
                constraint: "excess noise must be >= 0",
            });
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParam {
                name: "eta",
                value: self.eta,
                constraint: "detection efficiency must be in (0, 1]",
            });
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::InvalidParam {
                name: "t",
                value: self.t,
                constraint: "transmittance must be in (0, 1]",
            });
        }
        Ok(())
    }

    /// Population variance of one stage under the detector model, in raw
    /// detector units.
    pub fn stage_variance(&self, stage: Stage) -> f64 {
        match stage {
            Stage::ElectricalOnly => self.nu_el_snu * self.n0,
            Stage::ShotPlusElectrical => (1.0 + self.nu_el_snu) * self.n0,
            Stage::CrosstalkPlusShotPlusElectrical => {
                (1.0 + self.nu_el_snu + self.eta * self.t * self.eps_snu) * self.n0
            }
        }
    }
}

/// Samples recorded in one detector configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSamples {
    pub stage: Stage,
    pub samples: Vec<f64>,
}

/// Draws the quadrature record of one calibration stage.
///
/// Reproducible: the same config and seed give the same samples, and each
/// stage uses its own RNG stream. A zero-variance stage yields an all-zero
/// record.
pub fn simulate_stage(cfg: &MeasurementConfig, stage: Stage) -> Result<StageSamples> {
    cfg.validate()?;
    let variance = cfg.stage_variance(stage);
    let samples = if variance == 0.0 {
        vec![0.0; cfg.n_samples]
    } else {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stage.stream_index());
        let normal = Normal::new(0.0, variance.sqrt()).map_err(|_| Error::InvalidParam {
            name: "stage variance",
            value: variance,
            constraint: "must be finite and >= 0",
        })?;
        (0..cfg.n_samples).map(|_| normal.sample(&mut rng)).collect()
    };
    Ok(StageSamples { stage, samples })
}

/// Unbiased sample variance of a stage record (zero-mean is not assumed).
pub fn estimate_variance(samples: &StageSamples) -> Result<f64> {
    let n = samples.samples.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = samples.samples.iter().sum::<f64>() / n as f64;
    let ss = samples
        .samples
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<f64>();
    Ok(ss / (n - 1) as f64)
}

/// Excess noise recovered from the three stage variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcessNoiseEstimate {
    /// Estimated excess noise in shot-noise units.
    pub eps_snu: f64,
    /// Estimated shot-noise variance `v_shot - v_el` in raw detector units.
    pub n0_hat: f64,
    /// True when the raw excess-noise numerator was negative and the
    /// estimate was clamped to zero.
    pub clamped: bool,
}

/// Inverts the three-stage detector model.
///
/// `v_el`, `v_shot`, and `v_total` are the estimated variances of the
/// three stages in raw detector units. The shot-noise stage must rise
/// above the electrical-noise stage; a total variance below the shot-noise
/// stage clamps the excess-noise estimate to zero with a flag.
pub fn estimate_excess_noise(
    v_el: f64,
    v_shot: f64,
    v_total: f64,
    eta: f64,
    t: f64,
) -> Result<ExcessNoiseEstimate> {
    require_finite("v_el", v_el)?;
    require_finite("v_shot", v_shot)?;
    require_finite("v_total", v_total)?;
    require_finite("eta", eta)?;
    require_finite("t", t)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParam {
            name: "eta",
            value: eta,
            constraint: "detection efficiency must be in (0, 1]",
        });
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidParam {
            name: "t",
            value: t,
            constraint: "transmittance must be in (0, 1]",
        });
    }

    let n0_hat = v_shot - v_el;
    if n0_hat <= 0.0 {
        return Err(Error::Calibration(format!(
            "shot-noise stage variance {v_shot} does not rise above the electrical stage {v_el}"
        )));
    }

    let numerator = v_total - v_shot;
    if numerator < 0.0 {
        return Ok(ExcessNoiseEstimate {
            eps_snu: 0.0,
            n0_hat,
            clamped: true,
        });
    }
    Ok(ExcessNoiseEstimate {
        eps_snu: numerator / (eta * t * n0_hat),
        n0_hat,
        clamped: false,
    })
}

/// Delta-method standard errors of the calibration estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationStandardErrors {
    pub n0_se: f64,
    pub nu_el_se: f64,
    pub eps_se: f64,
}

/// Propagates the sampling noise of the three stage variances through the
/// calibration estimators.
///
/// Each stage variance estimate of a Gaussian record has sampling variance
/// `2 v^2 / (n - 1)`; the estimator gradients then give first-order
/// standard errors for `n0_hat`, `nu_el_hat = v_el / n0_hat`, and
/// `eps_hat`.
pub fn standard_errors(
    v_el: f64,
    v_shot: f64,
    v_total: f64,
    eta: f64,
    t: f64,
    n_samples: usize,
) -> Result<CalibrationStandardErrors> {
    if n_samples < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: n_samples,
        });
    }
    let est = estimate_excess_noise(v_el, v_shot, v_total, eta, t)?;
    let n0 = est.n0_hat;
    let m = (n_samples - 1) as f64;
    let var_el = 2.0 * v_el * v_el / m;
    let var_shot = 2.0 * v_shot * v_shot / m;
    let var_total = 2.0 * v_total * v_total / m;

    let n0_se = (var_shot + var_el).sqrt();

    let d_nu_el = 1.0 / n0 + v_el / (n0 * n0);
    let d_nu_shot = -v_el / (n0 * n0);
    let nu_el_se = (d_nu_el * d_nu_el * var_el + d_nu_shot * d_nu_shot * var_shot).sqrt();

    let excess = v_total - v_shot;
    let d_eps_total = 1.0 / (eta * t * n0);
    let d_eps_shot = -(n0 + excess) / (eta * t * n0 * n0);
    let d_eps_el = excess / (eta * t * n0 * n0);
    let eps_se = (d_eps_total * d_eps_total * var_total
        + d_eps_shot * d_eps_shot * var_shot
        + d_eps_el * d_eps_el * var_el)
        .sqrt();

    Ok(CalibrationStandardErrors {
        n0_se,
        nu_el_se,
        eps_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        let scale = expected.abs().max(1.0);
        assert!(
            (actual - expected).abs() <= tol * scale,
            "actual {actual:.17e} vs expected {expected:.17e} (tol {tol:e})"
        );
    }

    fn reference_cfg(n_samples: usize, eps_snu: f64, seed: u64) -> MeasurementConfig {
        MeasurementConfig {
            n_samples,
            n0: 1.0,
            nu_el_snu: 0.08,
            eta: 0.7,
            t: 0.2,
            eps_snu,
            seed,
        }
    }

    #[test]
    fn stage_variances_follow_the_detector_model() {
        let cfg = reference_cfg(10, 0.05, 1);
        assert_close(cfg.stage_variance(Stage::ElectricalOnly), 0.08, 1e-15);
        assert_close(cfg.stage_variance(Stage::ShotPlusElectrical), 1.08, 1e-15);
        assert_close(
            cfg.stage_variance(Stage::CrosstalkPlusShotPlusElectrical),
            1.087,
            1e-15,
        );
    }

    #[test]
    fn simulation_is_reproducible_and_stages_are_independent() {
        let cfg = reference_cfg(64, 0.05, 42);
        let a = simulate_stage(&cfg, Stage::ShotPlusElectrical).unwrap();
        let b = simulate_stage(&cfg, Stage::ShotPlusElectrical).unwrap();
        assert_eq!(a.samples, b.samples);

        let c = simulate_stage(&cfg, Stage::CrosstalkPlusShotPlusElectrical).unwrap();
        assert_ne!(a.samples, c.samples);

        let other_seed = reference_cfg(64, 0.05, 43);
        let d = simulate_stage(&other_seed, Stage::ShotPlusElectrical).unwrap();
        assert_ne!(a.samples, d.samples);
    }

    #[test]
    fn zero_variance_stage_is_all_zeros() {
        let mut cfg = reference_cfg(16, 0.0, 7);
        cfg.nu_el_snu = 0.0;
        let rec = simulate_stage(&cfg, Stage::ElectricalOnly).unwrap();
        assert!(rec.samples.iter().all(|&x| x == 0.0));
        assert_eq!(estimate_variance(&rec).unwrap(), 0.0);
    }

    #[test]
    fn variance_estimator_matches_hand_computed_records() {
        let rec = StageSamples {
            stage: Stage::ElectricalOnly,
            samples: vec![-1.0, 1.0],
        };
        assert_eq!(estimate_variance(&rec).unwrap(), 2.0);

        let constant = StageSamples {
            stage: Stage::ElectricalOnly,
            samples: vec![3.25; 5],
        };
        assert_eq!(estimate_variance(&constant).unwrap(), 0.0);

        let short = StageSamples {
            stage: Stage::ElectricalOnly,
            samples: vec![1.0],
        };
        assert!(matches!(
            estimate_variance(&short),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn simulated_variance_concentrates_near_the_model() {
        let cfg = reference_cfg(200_000, 0.05, 12345);
        let rec = simulate_stage(&cfg, Stage::ShotPlusElectrical).unwrap();
        let v = estimate_variance(&rec).unwrap();
        let sd = 1.08 * (2.0 / (cfg.n_samples as f64 - 1.0)).sqrt();
        assert!(
            (v - 1.08).abs() < 5.0 * sd,
            "v = {v}, expected 1.08 +- {:.2e}",
            5.0 * sd
        );
    }

    #[test]
    fn exact_population_variances_invert_to_the_planted_noise() {
        let cfg = reference_cfg(10, 0.05, 1);
        let est = estimate_excess_noise(
            cfg.stage_variance(Stage::ElectricalOnly),
            cfg.stage_variance(Stage::ShotPlusElectrical),
            cfg.stage_variance(Stage::CrosstalkPlusShotPlusElectrical),
            cfg.eta,
            cfg.t,
        )
        .unwrap();
        assert!(!est.clamped);
        assert_close(est.n0_hat, 1.0, 1e-14);
        assert_close(est.eps_snu, 0.05, 1e-12);
    }

    #[test]
    fn low_total_variance_clamps_the_estimate_to_zero() {
        let est = estimate_excess_noise(0.08, 1.08, 1.07, 0.7, 0.2).unwrap();
        assert!(est.clamped);
        assert_eq!(est.eps_snu, 0.0);
    }

    #[test]
    fn unresolved_shot_noise_is_a_calibration_error() {
        let err = estimate_excess_noise(1.08, 1.08, 1.09, 0.7, 0.2).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
        let err = estimate_excess_noise(1.2, 1.08, 1.09, 0.7, 0.2).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
    }

    #[test]
    fn standard_errors_match_reference_values() {
        let n = 1_000_000;
        for (eps, se_ref) in [(0.01, 0.0154494), (0.05, 0.0155326), (0.1, 0.0156366)] {
            let cfg = reference_cfg(n, eps, 1);
            let se = standard_errors(
                cfg.stage_variance(Stage::ElectricalOnly),
                cfg.stage_variance(Stage::ShotPlusElectrical),
                cfg.stage_variance(Stage::CrosstalkPlusShotPlusElectrical),
                cfg.eta,
                cfg.t,
                n,
            )
            .unwrap();
            assert_close(se.eps_se, se_ref, 1e-7);
        }
    }

    #[test]
    fn end_to_end_recovery_stays_within_three_standard_errors() {
        let cfg = reference_cfg(100_000, 0.05, 2026);
        let v_el = estimate_variance(&simulate_stage(&cfg, Stage::ElectricalOnly).unwrap()).unwrap();
        let v_shot =
            estimate_variance(&simulate_stage(&cfg, Stage::ShotPlusElectrical).unwrap()).unwrap();
        let v_total = estimate_variance(
            &simulate_stage(&cfg, Stage::CrosstalkPlusShotPlusElectrical).unwrap(),
        )
        .unwrap();
        let est = estimate_excess_noise(v_el, v_shot, v_total, cfg.eta, cfg.t).unwrap();
        let se = standard_errors(
            cfg.stage_variance(Stage::ElectricalOnly),
            cfg.stage_variance(Stage::ShotPlusElectrical),
            cfg.stage_variance(Stage::CrosstalkPlusShotPlusElectrical),
            cfg.eta,
            cfg.t,
            cfg.n_samples,
        )
        .unwrap();
        assert!(
            (est.eps_snu - cfg.eps_snu).abs() < 3.0 * se.eps_se,
            "eps_hat = {}, planted {}, 3se = {}",
            est.eps_snu,
            cfg.eps_snu,
            3.0 * se.eps_se
        );
    }

    #[test]
    fn variance_estimator_error_shrinks_with_sample_size() {
        let rmse = |n_samples: usize| -> f64 {
            let mut ss = 0.0;
            let trials = 100;
            for seed in 0..trials {
                let cfg = reference_cfg(n_samples, 0.05, seed);
                let rec = simulate_stage(&cfg, Stage::ShotPlusElectrical).unwrap();
                let v = estimate_variance(&rec).unwrap();
                ss += (v - 1.08) * (v - 1.08);
            }
            (ss / trials as f64).sqrt()
        };
        let ratio = rmse(20_000) / rmse(40_000);
        let expected = 2f64.sqrt();
        assert!(
            (ratio - expected).abs() < 0.2 * expected,
            "rmse ratio {ratio} vs sqrt(2)"
        );
    }

    #[test]
    fn zero_planted_noise_clamps_about_half_the_time() {
        let mut clamped = 0;
        let trials = 200;
        for seed in 0..trials {
            let cfg = reference_cfg(10_000, 0.0, 1000 + seed);
            let v_el =
                estimate_variance(&simulate_stage(&cfg, Stage::ElectricalOnly).unwrap()).unwrap();
            let v_shot =
                estimate_variance(&simulate_stage(&cfg, Stage::ShotPlusElectrical).unwrap())
                    .unwrap();
            let v_total = estimate_variance(
                &simulate_stage(&cfg, Stage::CrosstalkPlusShotPlusElectrical).unwrap(),
            )
            .unwrap();
            let est = estimate_excess_noise(v_el, v_shot, v_total, cfg.eta, cfg.t).unwrap();
            if est.clamped {
                clamped += 1;
            }
        }
        assert!(
            (70..=130).contains(&clamped),
            "clamped {clamped} of {trials} runs"
        );
    }

    #[test]
    fn config_domains_are_enforced() {
        let mut cfg = reference_cfg(1, 0.05, 1);
        assert!(cfg.validate().is_err());
        cfg = reference_cfg(10, 0.05, 1);
        cfg.n0 = 0.0;
        assert!(cfg.validate().is_err());
        cfg = reference_cfg(10, -0.01, 1);
        assert!(cfg.validate().is_err());
        cfg = reference_cfg(10, 0.05, 1);
        cfg.eta = 1.5;
        assert!(cfg.validate().is_err());
    }
}
