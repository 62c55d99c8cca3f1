use std::path::{Path, PathBuf};

use cvqkd::{
    aggregate_skr, allocate_qkd_slots, classical_throughput, estimate_excess_noise,
    estimate_variance, fit_crosstalk_model, max_tolerable_excess_noise,
    optimize_modulation_variance, parse_power_csv, secret_key_rate, simulate_stage,
    skr_bits_per_second, standard_errors, sweep_power, sweep_wavelength, symplectic_eigenvalues,
    AttackModel, ChannelRates, ClassicalGrid, CoreLayout, CrosstalkModel, LinkBase, LinkParams,
    MeasurementConfig, Modulation, ProtocolParams, QkdGrid, Stage, WavelengthNoiseTable,
};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::settings::Settings;
use crate::{CalibrateArgs, FitArgs, PlanArgs, SkrArgs, SweepArgs, SweepAxisChoice};

const DEFAULT_T: f64 = 0.2;
const DEFAULT_EPS_SNU: f64 = 0.0;
const DEFAULT_ETA: f64 = 0.7;
const DEFAULT_NU_EL_SNU: f64 = 0.08;
const DEFAULT_BETAS: [f64; 2] = [1.0, 0.898];
const DEFAULT_BETA: f64 = 0.898;
const DEFAULT_SYMBOL_RATE_HZ: f64 = 1.0e9;

fn num(flag: Option<f64>, settings: &Settings, key: &str, default: f64) -> Result<f64> {
    Ok(flag.or(settings.f64(key)?).unwrap_or(default))
}

fn opt_num(flag: Option<f64>, settings: &Settings, key: &str) -> Result<Option<f64>> {
    Ok(flag.or(settings.f64(key)?))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|err| CliError::Io(format!("cannot read {}: {err}", path.display())))
}

fn render_json(value: &Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report serialization");
    out.push('\n');
    out
}

pub fn skr(args: &SkrArgs, settings: &Settings) -> Result<String> {
    let t = num(args.t, settings, "link.t", DEFAULT_T)?;
    let eps = num(args.eps, settings, "link.eps_snu", DEFAULT_EPS_SNU)?;
    let eta = num(args.eta, settings, "link.eta", DEFAULT_ETA)?;
    let nu_el = num(args.nu_el, settings, "link.nu_el_snu", DEFAULT_NU_EL_SNU)?;
    let symbol_rate = num(
        args.symbol_rate_hz,
        settings,
        "rate.symbol_rate_hz",
        DEFAULT_SYMBOL_RATE_HZ,
    )?;
    let fixed_v_a = opt_num(args.v_a, settings, "protocol.v_a")?;
    let betas = if !args.beta.is_empty() {
        args.beta.clone()
    } else if let Some(list) = settings.f64_list("protocol.beta_list")? {
        list
    } else if let Some(beta) = settings.f64("protocol.beta")? {
        vec![beta]
    } else {
        DEFAULT_BETAS.to_vec()
    };

    let link = LinkParams::new(t, eps, eta, nu_el)?;
    let base = LinkBase::new(t, eta, nu_el)?;
    let noise = cvqkd::chi_tot(&link)?;

    let mut results = Vec::new();
    for attack in args.attack.models() {
        for &beta in &betas {
            let (proto, skr, optimized, at_edge) = match fixed_v_a {
                Some(v_a) => {
                    let proto = ProtocolParams::new(v_a, beta)?;
                    let skr = secret_key_rate(&proto, &link, attack)?;
                    (proto, skr, false, false)
                }
                None => {
                    let best = optimize_modulation_variance(&link, beta, attack)?;
                    (best.proto, best.result, true, best.at_bracket_edge)
                }
            };
            let mut row = json!({
                "attack": attack.to_string(),
                "beta": beta,
                "v_a": proto.v_a,
                "v_a_optimized": optimized,
                "at_bracket_edge": at_edge,
                "i_ab_bits_per_symbol": skr.i_ab,
                "leak_bits_per_symbol": skr.leak_eve,
                "skr_bits_per_symbol": skr.skr_per_symbol,
                "skr_bps": skr_bits_per_second(&skr, symbol_rate)?,
                "positive_key": skr.skr_per_symbol > 0.0,
            });
            if attack == AttackModel::Collective {
                row["eigenvalues"] = serde_json::to_value(symplectic_eigenvalues(&proto, &link)?)
                    .expect("eigenvalue serialization");
            }
            if args.report_max_eps {
                row["max_tolerable_eps_snu"] =
                    json!(max_tolerable_excess_noise(&proto, &base, attack)?);
            }
            results.push(row);
        }
    }

    Ok(render_json(&json!({
        "link": serde_json::to_value(link).expect("link serialization"),
        "noise": serde_json::to_value(noise).expect("noise serialization"),
        "symbol_rate_hz": symbol_rate,
        "results": results,
    })))
}

pub fn sweep(args: &SweepArgs, settings: &Settings) -> Result<String> {
    let t = num(args.t, settings, "link.t", DEFAULT_T)?;
    let eta = num(args.eta, settings, "link.eta", DEFAULT_ETA)?;
    let nu_el = num(args.nu_el, settings, "link.nu_el_snu", DEFAULT_NU_EL_SNU)?;
    let base = LinkBase::new(t, eta, nu_el)?;
    let beta = num(args.beta, settings, "protocol.beta", DEFAULT_BETA)?;
    let symbol_rate = num(
        args.symbol_rate_hz,
        settings,
        "rate.symbol_rate_hz",
        DEFAULT_SYMBOL_RATE_HZ,
    )?;
    let modulation = match opt_num(args.v_a, settings, "protocol.v_a")? {
        Some(v_a) => Modulation::Fixed(v_a),
        None => Modulation::Optimized,
    };

    let axis = match args.axis {
        Some(choice) => choice,
        None => match settings.str("sweep.axis") {
            Some("power") => SweepAxisChoice::Power,
            Some("wavelength") => SweepAxisChoice::Wavelength,
            Some(other) => {
                return Err(CliError::Validation(format!(
                    "config key `sweep.axis`: expected `power` or `wavelength`, got `{other}`"
                )))
            }
            None => {
                return Err(CliError::Validation(
                    "sweep needs an axis: pass --axis power|wavelength or set sweep.axis".into(),
                ))
            }
        },
    };

    let result = match axis {
        SweepAxisChoice::Wavelength => {
            let table_path = args
                .table
                .clone()
                .or_else(|| settings.str("sweep.table").map(PathBuf::from))
                .ok_or_else(|| {
                    CliError::Validation(
                        "wavelength sweep needs a noise table: pass --table FILE or set sweep.table"
                            .into(),
                    )
                })?;
            let table = WavelengthNoiseTable::from_csv(&read_text(&table_path)?)?;
            let step_nm = opt_num(args.step_nm, settings, "sweep.step_nm")?;
            sweep_wavelength(&table, &base, beta, modulation, symbol_rate, step_nm)?
        }
        SweepAxisChoice::Power => {
            let model = power_model(args, settings)?;
            let min_dbm = num(args.min_dbm, settings, "sweep.min_dbm", -20.0)?;
            let max_dbm = num(args.max_dbm, settings, "sweep.max_dbm", 0.0)?;
            let step_db = num(args.step_db, settings, "sweep.step_db", 1.0)?;
            sweep_power(
                &model, &base, beta, modulation, symbol_rate, min_dbm, max_dbm, step_db,
            )?
        }
    };
    Ok(result.to_csv())
}

/// The power axis takes its crosstalk model either from a measured CSV
/// (fitted on the fly) or from explicit floor/slope coefficients.
fn power_model(args: &SweepArgs, settings: &Settings) -> Result<CrosstalkModel> {
    let fit_from = args
        .fit_from
        .clone()
        .or_else(|| settings.str("sweep.fit_from").map(PathBuf::from));
    if let Some(path) = fit_from {
        let points = parse_power_csv(&read_text(&path)?)?;
        return Ok(fit_crosstalk_model(&points)?.model);
    }
    let floor = opt_num(args.eps_floor, settings, "model.eps_floor_snu")?;
    let k_xt = opt_num(args.k_xt, settings, "model.k_xt_snu_per_mw")?;
    match (floor, k_xt) {
        (Some(floor), Some(k_xt)) => Ok(CrosstalkModel::new(floor, k_xt)?),
        _ => Err(CliError::Validation(
            "power sweep needs a crosstalk model: pass --fit-from FILE, or both --eps-floor and --k-xt"
                .into(),
        )),
    }
}

pub fn plan(args: &PlanArgs, settings: &Settings) -> Result<String> {
    let defaults = ClassicalGrid::default();
    let classical = ClassicalGrid {
        n_channels: args
            .n_channels
            .or(settings.usize("grid.n_channels")?)
            .unwrap_or(defaults.n_channels),
        spacing_ghz: num(args.spacing_ghz, settings, "grid.spacing_ghz", defaults.spacing_ghz)?,
        symbol_rate_gbd: num(
            args.symbol_rate_gbd,
            settings,
            "grid.symbol_rate_gbd",
            defaults.symbol_rate_gbd,
        )?,
        bits_per_symbol: args
            .bits_per_symbol
            .or(settings.u32("grid.bits_per_symbol")?)
            .unwrap_or(defaults.bits_per_symbol),
        band_nm: (
            num(args.band_start_nm, settings, "grid.band_start_nm", defaults.band_nm.0)?,
            num(args.band_end_nm, settings, "grid.band_end_nm", defaults.band_nm.1)?,
        ),
    };
    let qkd_defaults = QkdGrid::default();
    let qkd = QkdGrid {
        channel_bw_ghz: num(
            args.channel_bw_ghz,
            settings,
            "qkd.channel_bw_ghz",
            qkd_defaults.channel_bw_ghz,
        )?,
        slot_ghz: num(args.slot_ghz, settings, "qkd.slot_ghz", qkd_defaults.slot_ghz)?,
        max_slots_per_band: args
            .max_slots_per_band
            .or(settings.usize("qkd.max_slots_per_band")?)
            .unwrap_or(qkd_defaults.max_slots_per_band),
    };
    let core_defaults = CoreLayout::default();
    let cores = CoreLayout {
        n_qkd_cores: args
            .qkd_cores
            .or(settings.usize("cores.n_qkd")?)
            .unwrap_or(core_defaults.n_qkd_cores),
        n_classical_cores: args
            .classical_cores
            .or(settings.usize("cores.n_classical")?)
            .unwrap_or(core_defaults.n_classical_cores),
    };
    cores.validate()?;

    let plan = allocate_qkd_slots(&classical, &qkd)?;
    let classical_bps = classical_throughput(&classical, cores.n_classical_cores)?;

    let mut report = json!({
        "classical_grid": serde_json::to_value(classical).expect("grid serialization"),
        "qkd_grid": serde_json::to_value(qkd).expect("grid serialization"),
        "cores": serde_json::to_value(cores).expect("layout serialization"),
        "plan": serde_json::to_value(&plan).expect("plan serialization"),
        "classical_throughput_bps": classical_bps,
    });
    let per_channel = opt_num(args.per_channel_skr_bps, settings, "plan.per_channel_skr_bps")?;
    if let Some(rate) = per_channel {
        report["aggregate_skr"] = json!({
            "per_channel_bps": rate,
            "per_core_bps": aggregate_skr(&plan, ChannelRates::Uniform(rate), 1)?,
            "total_bps": aggregate_skr(&plan, ChannelRates::Uniform(rate), cores.n_qkd_cores)?,
        });
    }
    Ok(render_json(&report))
}

pub fn fit(args: &FitArgs, settings: &Settings) -> Result<String> {
    let input = args
        .input
        .clone()
        .or_else(|| settings.str("fit.input").map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Validation("fit needs measured points: pass --input FILE or set fit.input".into())
        })?;
    let points = parse_power_csv(&read_text(&input)?)?;
    let fit = fit_crosstalk_model(&points)?;
    Ok(render_json(
        &serde_json::to_value(fit).expect("fit serialization"),
    ))
}

pub fn calibrate_sim(args: &CalibrateArgs, settings: &Settings) -> Result<String> {
    let cfg = MeasurementConfig {
        n_samples: args
            .n_samples
            .or(settings.usize("calib.n_samples")?)
            .unwrap_or(1_000_000),
        n0: num(args.n0, settings, "calib.n0", 1.0)?,
        nu_el_snu: num(args.nu_el, settings, "calib.nu_el_snu", DEFAULT_NU_EL_SNU)?,
        eta: num(args.eta, settings, "calib.eta", DEFAULT_ETA)?,
        t: num(args.t, settings, "calib.t", DEFAULT_T)?,
        eps_snu: num(args.eps, settings, "calib.eps_snu", DEFAULT_EPS_SNU)?,
        seed: args.seed.or(settings.u64("calib.seed")?).ok_or_else(|| {
            CliError::Validation(
                "calibrate-sim needs an explicit seed: pass --seed N or set calib.seed".into(),
            )
        })?,
    };

    let mut measured = [0.0; 3];
    let stages = [
        Stage::ElectricalOnly,
        Stage::ShotPlusElectrical,
        Stage::CrosstalkPlusShotPlusElectrical,
    ];
    for (slot, &stage) in measured.iter_mut().zip(&stages) {
        *slot = estimate_variance(&simulate_stage(&cfg, stage)?)?;
    }
    let [v_el, v_shot, v_total] = measured;
    let estimate = estimate_excess_noise(v_el, v_shot, v_total, cfg.eta, cfg.t)?;
    let errors = standard_errors(v_el, v_shot, v_total, cfg.eta, cfg.t, cfg.n_samples)?;

    Ok(render_json(&json!({
        "config": serde_json::to_value(cfg).expect("config serialization"),
        "stage_variances": {
            "electrical_only": {
                "measured": v_el,
                "population": cfg.stage_variance(Stage::ElectricalOnly),
            },
            "shot_plus_electrical": {
                "measured": v_shot,
                "population": cfg.stage_variance(Stage::ShotPlusElectrical),
            },
            "crosstalk_plus_shot_plus_electrical": {
                "measured": v_total,
                "population": cfg.stage_variance(Stage::CrosstalkPlusShotPlusElectrical),
            },
        },
        "estimate": serde_json::to_value(estimate).expect("estimate serialization"),
        "standard_errors": serde_json::to_value(errors).expect("error serialization"),
    })))
}
