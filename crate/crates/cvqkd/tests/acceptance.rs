//! End-to-end acceptance gate. Each test prints one `[PASS]`/`[FAIL]` line
//! (run with `--nocapture` to see them) and fails loudly if its criterion is
//! not met. The measured-curve test is data-dependent and prints `[SKIP]`
//! when no measured excess-noise tables are provided.

use std::time::Instant;

use cvqkd::{
    aggregate_skr, allocate_qkd_slots, classical_throughput, estimate_excess_noise,
    estimate_variance, fit_crosstalk_model, max_launch_power, optimize_modulation_variance,
    secret_key_rate, simulate_stage, standard_errors, sweep_wavelength, symplectic_eigenvalues,
    AttackModel, ChannelRates, ClassicalGrid, LinkBase, LinkParams, MeasurementConfig,
    Modulation, ProtocolParams, QkdGrid, Stage, WavelengthNoiseTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn report(name: &str, ok: bool, details: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {name}: {details}");
    assert!(ok, "acceptance criterion failed: {name}: {details}");
}

fn rel_close(actual: f64, expected: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol * expected.abs().max(1.0)
}

fn draw(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[test]
fn channel_plan_counts() {
    let plan = allocate_qkd_slots(&ClassicalGrid::default(), &QkdGrid::default()).unwrap();
    let ok = plan.bands == 31
        && plan.slots_per_band == 11
        && plan.slots_per_band_unclamped == 15
        && plan.channels == 341;
    report(
        "channel-plan-counts",
        ok,
        &format!(
            "{} bands x {} slots/band (unclamped {}) = {} channels",
            plan.bands, plan.slots_per_band, plan.slots_per_band_unclamped, plan.channels
        ),
    );
}

#[test]
fn aggregate_qkd_throughput() {
    let plan = allocate_qkd_slots(&ClassicalGrid::default(), &QkdGrid::default()).unwrap();
    let per_core = aggregate_skr(&plan, ChannelRates::Uniform(46.0e6), 1).unwrap();
    let six_cores = aggregate_skr(&plan, ChannelRates::Uniform(46.0e6), 6).unwrap();
    let ok = rel_close(per_core, 15.7e9, 0.01) && rel_close(six_cores, 94.2e9, 0.01);
    report(
        "aggregate-qkd-throughput",
        ok,
        &format!(
            "{:.3} Gbit/s per core (target 15.7 +/- 1%), {:.3} Gbit/s over 6 cores (target 94.2 +/- 1%)",
            per_core / 1e9,
            six_cores / 1e9
        ),
    );
}

#[test]
fn classical_throughput_totals() {
    let grid = ClassicalGrid::default();
    let three = classical_throughput(&grid, 3).unwrap();
    let twelve = classical_throughput(&grid, 12).unwrap();
    let ok = rel_close(three, 17.0e12, 0.05) && rel_close(twelve, 70.0e12, 0.01);
    report(
        "classical-throughput",
        ok,
        &format!(
            "{:.2} Tbit/s over 3 cores (target 17 +/- 5%), {:.2} Tbit/s over 12 cores (target 70 +/- 1%)",
            three / 1e12,
            twelve / 1e12
        ),
    );
}

#[test]
fn lossless_link_leaks_nothing() {
    let link = LinkParams::new(1.0, 0.0, 1.0, 0.0).unwrap();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let v_a = 10f64.powf(-3.0 + 6.0 * i as f64 / 99.0);
        let proto = ProtocolParams::new(v_a, 1.0).unwrap();
        let ind = secret_key_rate(&proto, &link, AttackModel::Individual).unwrap();
        let coll = secret_key_rate(&proto, &link, AttackModel::Collective).unwrap();
        worst = worst.max(ind.leak_eve.abs()).max(coll.leak_eve.abs());
    }
    report(
        "lossless-link-zero-leakage",
        worst <= 1e-9,
        &format!("max |leak| = {worst:.3e} over 100 modulation variances (bound 1e-9)"),
    );
}

#[test]
fn ordering_and_monotonicity() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x0b5e);
    for _ in 0..1000 {
        let t = draw(&mut rng, 0.05, 1.0);
        let eps = draw(&mut rng, 0.0, 0.3);
        let eta = draw(&mut rng, 0.3, 1.0);
        let nu_el = draw(&mut rng, 0.0, 0.3);
        let v_a = draw(&mut rng, 0.5, 50.0);
        let beta = draw(&mut rng, 0.5, 1.0);

        let link = LinkParams::new(t, eps, eta, nu_el).unwrap();
        let proto = ProtocolParams::new(v_a, beta).unwrap();
        let ind = secret_key_rate(&proto, &link, AttackModel::Individual).unwrap();
        let coll = secret_key_rate(&proto, &link, AttackModel::Collective).unwrap();
        assert!(
            coll.leak_eve + 1e-9 >= ind.leak_eve,
            "Holevo bound {} fell below Shannon leak {} at t={t} eps={eps} eta={eta} nu_el={nu_el} v_a={v_a}",
            coll.leak_eve,
            ind.leak_eve
        );
        assert!(ind.skr_per_symbol + 1e-9 >= coll.skr_per_symbol);
    }

    let base = LinkBase::new(0.2, 0.7, 0.08).unwrap();
    for attack in [AttackModel::Individual, AttackModel::Collective] {
        for &beta in &[1.0, 0.898] {
            let proto = ProtocolParams::new(10.0, beta).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..=60 {
                let eps = 0.3 * i as f64 / 60.0;
                let skr = secret_key_rate(&proto, &base.with_eps(eps).unwrap(), attack)
                    .unwrap()
                    .skr_per_symbol;
                assert!(
                    skr < prev,
                    "key rate failed to decrease strictly at eps={eps} ({attack}, beta={beta})"
                );
                prev = skr;
            }
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    report(
        "ordering-and-monotonicity",
        elapsed < 10.0,
        &format!(
            "1000 random draws ordered, 4 fixed noise grids strictly decreasing, {elapsed:.2} s (budget 10 s)"
        ),
    );
}

/// A flat re-derivation of the whole key-rate chain, written directly
/// against the closed forms with natural-log arithmetic. Kept deliberately
/// separate from the library so the two implementations can disagree.
mod direct {
    pub struct Evaluation {
        pub chi_line: f64,
        pub chi_hom: f64,
        pub chi_tot: f64,
        pub i_ab: f64,
        pub i_be: f64,
        pub a: f64,
        pub b: f64,
        pub c: f64,
        pub d: f64,
        pub lambda: [f64; 4],
        pub chi_be: f64,
        pub skr_ind: f64,
        pub skr_coll: f64,
    }

    fn lg(x: f64) -> f64 {
        x.ln() / std::f64::consts::LN_2
    }

    fn ent(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (x + 1.0) * lg(x + 1.0) - x * lg(x)
        }
    }

    pub fn evaluate(v_a: f64, beta: f64, t: f64, eps: f64, eta: f64, nu_el: f64) -> Evaluation {
        let v = v_a + 1.0;
        let chi_line = 1.0 / t - 1.0 + eps;
        let chi_hom = (1.0 + nu_el) / eta - 1.0;
        let chi_tot = chi_line + chi_hom / t;

        let i_ab = 0.5 * lg((v + chi_tot) / (1.0 + chi_tot));
        let v_b = eta * t * (v + chi_tot);
        let v_b_given_e = eta * (1.0 / (t * (1.0 / v + chi_line)) + chi_hom);
        let i_be = (0.5 * lg(v_b / v_b_given_e)).max(0.0);

        let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line) * (v + chi_line);
        let b = t * t * (v * chi_line + 1.0) * (v * chi_line + 1.0);
        let root_b = b.sqrt();
        let c = (v * root_b + t * (v + chi_line) + a * chi_hom) / (t * (v + chi_tot));
        let d = root_b * (v + root_b * chi_hom) / (t * (v + chi_tot));

        let disc12 = (a * a - 4.0 * b).max(0.0).sqrt();
        let disc34 = (c * c - 4.0 * d).max(0.0).sqrt();
        let lambda = [
            (0.5 * (a + disc12)).sqrt(),
            (0.5 * (a - disc12)).max(0.0).sqrt(),
            (0.5 * (c + disc34)).sqrt(),
            (0.5 * (c - disc34)).max(0.0).sqrt(),
        ];
        let chi_be = (ent(0.5 * (lambda[0] - 1.0)) + ent(0.5 * (lambda[1] - 1.0))
            - ent(0.5 * (lambda[2] - 1.0))
            - ent(0.5 * (lambda[3] - 1.0)))
        .max(0.0);

        Evaluation {
            chi_line,
            chi_hom,
            chi_tot,
            i_ab,
            i_be,
            a,
            b,
            c,
            d,
            lambda,
            chi_be,
            skr_ind: beta * i_ab - i_be,
            skr_coll: beta * i_ab - chi_be,
        }
    }
}

#[test]
fn closed_form_cross_check() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x0cde);
    let tol = 1e-12;
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let t = draw(&mut rng, 0.05, 1.0);
        let eps = draw(&mut rng, 0.0, 0.3);
        let eta = draw(&mut rng, 0.3, 1.0);
        let nu_el = draw(&mut rng, 0.0, 0.3);
        let v_a = draw(&mut rng, 0.5, 50.0);
        let beta = draw(&mut rng, 0.5, 1.0);

        let link = LinkParams::new(t, eps, eta, nu_el).unwrap();
        let proto = ProtocolParams::new(v_a, beta).unwrap();
        let want = direct::evaluate(v_a, beta, t, eps, eta, nu_el);

        let noise = cvqkd::chi_tot(&link).unwrap();
        let eig = symplectic_eigenvalues(&proto, &link).unwrap();
        let ind = secret_key_rate(&proto, &link, AttackModel::Individual).unwrap();
        let coll = secret_key_rate(&proto, &link, AttackModel::Collective).unwrap();

        let pairs = [
            ("chi_line", noise.chi_line_snu, want.chi_line),
            ("chi_hom", noise.chi_hom_snu, want.chi_hom),
            ("chi_tot", noise.chi_tot_snu, want.chi_tot),
            ("i_ab", ind.i_ab, want.i_ab),
            ("i_be", ind.leak_eve, want.i_be),
            ("a", eig.a_term, want.a),
            ("b", eig.b_term, want.b),
            ("c", eig.c_term, want.c),
            ("d", eig.d_term, want.d),
            ("lambda1", eig.lambda[0], want.lambda[0]),
            ("lambda2", eig.lambda[1], want.lambda[1]),
            ("lambda3", eig.lambda[2], want.lambda[2]),
            ("lambda4", eig.lambda[3], want.lambda[3]),
            ("chi_be", coll.leak_eve, want.chi_be),
            ("skr_ind", ind.skr_per_symbol, want.skr_ind),
            ("skr_coll", coll.skr_per_symbol, want.skr_coll),
        ];
        for (what, got, expect) in pairs {
            let err = (got - expect).abs() / expect.abs().max(1.0);
            worst = worst.max(err);
            assert!(
                err <= tol,
                "draw {i}: {what} mismatch, library {got:.17e} vs direct {expect:.17e} \
                 (relative error {err:.3e} at t={t} eps={eps} eta={eta} nu_el={nu_el} v_a={v_a})"
            );
        }
    }
    report(
        "closed-form-cross-check",
        true,
        &format!("16 quantities x 1000 draws agree, worst relative error {worst:.3e} (bound 1e-12)"),
    );
}

#[test]
fn calibration_recovers_planted_noise() {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, &eps) in [0.01, 0.05, 0.1].iter().enumerate() {
        let cfg = MeasurementConfig {
            n_samples: 1_000_000,
            n0: 1.0,
            nu_el_snu: 0.08,
            eta: 0.7,
            t: 0.2,
            eps_snu: eps,
            seed: 9000 + i as u64,
        };
        let v_el = estimate_variance(&simulate_stage(&cfg, Stage::ElectricalOnly).unwrap()).unwrap();
        let v_shot =
            estimate_variance(&simulate_stage(&cfg, Stage::ShotPlusElectrical).unwrap()).unwrap();
        let v_total =
            estimate_variance(&simulate_stage(&cfg, Stage::CrosstalkPlusShotPlusElectrical).unwrap())
                .unwrap();
        let est = estimate_excess_noise(v_el, v_shot, v_total, cfg.eta, cfg.t).unwrap();
        let se = standard_errors(v_el, v_shot, v_total, cfg.eta, cfg.t, cfg.n_samples).unwrap();
        let pull = (est.eps_snu - eps).abs() / se.eps_se;
        ok &= pull <= 3.0;
        lines.push(format!("eps {eps} -> {:.4} ({pull:.2} SE)", est.eps_snu));
    }
    let elapsed = started.elapsed().as_secs_f64();
    ok &= elapsed < 30.0;
    report(
        "calibration-recovery",
        ok,
        &format!("{} with 1e6 samples/stage, {elapsed:.2} s (budget 30 s)", lines.join(", ")),
    );
}

/// Reference values from the measurement campaign the toolkit models: mean
/// key rates across the band at 1 GSymbol/s, and the launch-power ceiling
/// for individual attacks with ideal reconciliation.
const REF_MEAN_BPS: [(f64, &str); 4] = [
    (100.0e6, "collective/ideal"),
    (102.0e6, "individual/ideal"),
    (46.0e6, "collective/beta=0.898"),
    (52.0e6, "individual/beta=0.898"),
];
const REF_MAX_LAUNCH_DBM: f64 = -13.0;

fn locate_input(env_key: &str, fallback: &str) -> Option<std::path::PathBuf> {
    if let Ok(path) = std::env::var(env_key) {
        return Some(std::path::PathBuf::from(path));
    }
    let repo = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let candidate = repo.join(fallback);
    candidate.exists().then_some(candidate)
}

#[test]
fn measured_curve_reproduction() {
    let base = LinkBase::new(0.2, 0.7, 0.08).unwrap();

    let wavelength_csv = locate_input("CVQKD_WAVELENGTH_NOISE_CSV", "data/wavelength_noise.csv");
    let power_csv = locate_input("CVQKD_POWER_NOISE_CSV", "data/power_noise.csv");
    if wavelength_csv.is_none() && power_csv.is_none() {
        println!(
            "[SKIP] measured-curve-reproduction: no measured excess-noise tables found \
             (set CVQKD_WAVELENGTH_NOISE_CSV / CVQKD_POWER_NOISE_CSV or add data/*.csv)"
        );
        return;
    }

    let mut details = Vec::new();
    let mut ok = true;

    if let Some(path) = wavelength_csv {
        let text = std::fs::read_to_string(&path).unwrap();
        let table = WavelengthNoiseTable::from_csv(&text).unwrap();
        let sweep =
            sweep_wavelength(&table, &base, 0.898, Modulation::Optimized, 1.0e9, None).unwrap();
        let means = [
            sweep.summary.coll_ideal.mean_bps,
            sweep.summary.ind_ideal.mean_bps,
            sweep.summary.coll_beta.mean_bps,
            sweep.summary.ind_beta.mean_bps,
        ];
        for (got, (want, label)) in means.iter().zip(REF_MEAN_BPS) {
            ok &= (got - want).abs() <= 0.10 * want;
            details.push(format!("{label} mean {:.1} Mbit/s (ref {:.0})", got / 1e6, want / 1e6));
        }
    }

    if let Some(path) = power_csv {
        let text = std::fs::read_to_string(&path).unwrap();
        let fit = fit_crosstalk_model(&cvqkd::parse_power_csv(&text).unwrap()).unwrap();
        let quiet = base.with_eps(fit.model.eps_floor_snu).unwrap();
        let proto = optimize_modulation_variance(&quiet, 1.0, AttackModel::Individual)
            .unwrap()
            .proto;
        let p_max = max_launch_power(&fit.model, &proto, &base, AttackModel::Individual).unwrap();
        ok &= (p_max - REF_MAX_LAUNCH_DBM).abs() <= 1.5;
        details.push(format!("max launch power {p_max:.2} dBm (ref {REF_MAX_LAUNCH_DBM} +/- 1.5 dB)"));
    }

    report("measured-curve-reproduction", ok, &details.join(", "));
}
