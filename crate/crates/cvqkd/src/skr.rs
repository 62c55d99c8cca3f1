//! Secret key rates for a Gaussian-modulated coherent-state protocol with
//! homodyne detection and reverse reconciliation.
//!
//! The channel is a thermal-loss link with transmittance `t` and excess
//! noise `eps` (input-referred, in shot-noise units), detected by a homodyne
//! receiver with efficiency `eta` and electrical noise `nu_el`. Key rates
//! are computed against two eavesdropper models: an individual attack,
//! bounded by Eve's Shannon information, and a collective attack, bounded
//! by the Holevo quantity evaluated from the symplectic spectrum of the
//! relevant covariance matrices.
//!
//! Everything here works in shot-noise units and bits per symbol. The
//! modulation variance `v_a` relates to the signal variance by
//! `V = v_a + 1`.

use serde::Serialize;

use crate::search::{bisect_decreasing, golden_section_max};
use crate::{require_finite, Error, Result};

/// Lower edge of the modulation-variance search bracket.
pub const VA_BRACKET_MIN: f64 = 1e-3;
/// Upper edge of the modulation-variance search bracket.
pub const VA_BRACKET_MAX: f64 = 1e3;
/// Key-rate agreement, in bits per symbol, at which the modulation-variance
/// search stops refining.
pub const VA_SEARCH_TOL_BITS: f64 = 1e-6;
/// Residual key rate, in bits per symbol, at which the excess-noise
/// threshold search accepts a root.
pub const EPS_ROOT_TOL_BITS: f64 = 1e-9;

/// Negative slack tolerated on quantities that are nonnegative in exact
/// arithmetic before they are treated as a numerical-domain violation.
const NUMERICAL_SLACK: f64 = 1e-9;

/// Eavesdropper model the key rate is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackModel {
    /// Eve measures each symbol independently; her information is the
    /// Shannon mutual information between her mode and Bob's outcome.
    Individual,
    /// Eve attacks the whole block collectively; her information is the
    /// Holevo bound.
    Collective,
}

impl std::fmt::Display for AttackModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttackModel::Individual => write!(f, "individual"),
            AttackModel::Collective => write!(f, "collective"),
        }
    }
}

impl std::str::FromStr for AttackModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "individual" => Ok(AttackModel::Individual),
            "collective" => Ok(AttackModel::Collective),
            other => Err(format!(
                "unknown attack model '{other}' (expected 'individual' or 'collective')"
            )),
        }
    }
}

/// Alice's modulation variance and the reconciliation efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    /// Modulation variance in shot-noise units; `v_a = 0` is the degenerate
    /// no-modulation limit.
    pub v_a: f64,
    /// Reconciliation efficiency in `(0, 1]`; `1` is ideal reconciliation.
    pub beta: f64,
}

impl ProtocolParams {
    pub fn new(v_a: f64, beta: f64) -> Result<Self> {
        let p = Self { v_a, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("v_a", self.v_a)?;
        require_finite("beta", self.beta)?;
        if self.v_a < 0.0 {
            return Err(Error::InvalidParam {
                name: "v_a",
                value: self.v_a,
                constraint: "modulation variance must be >= 0",
            });
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParam {
                name: "beta",
                value: self.beta,
                constraint: "reconciliation efficiency must be in (0, 1]",
            });
        }
        Ok(())
    }

    /// Signal variance `V = v_a + 1` in shot-noise units.
    pub fn v(&self) -> f64 {
        self.v_a + 1.0
    }
}

/// Channel and receiver parameters without an excess-noise value.
///
/// Threshold searches and sweeps vary `eps` while holding these fixed;
/// [`LinkBase::with_eps`] produces the full parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBase {
    /// Channel transmittance in `(0, 1]`.
    pub t: f64,
    /// Receiver (homodyne detection) efficiency in `(0, 1]`.
    pub eta: f64,
    /// Receiver electrical noise in shot-noise units, `>= 0`.
    pub nu_el_snu: f64,
}

impl LinkBase {
    pub fn new(t: f64, eta: f64, nu_el_snu: f64) -> Result<Self> {
        let b = Self { t, eta, nu_el_snu };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("t", self.t)?;
        require_finite("eta", self.eta)?;
        require_finite("nu_el", self.nu_el_snu)?;
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::InvalidParam {
                name: "t",
                value: self.t,
                constraint: "transmittance must be in (0, 1]",
            });
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParam {
                name: "eta",
                value: self.eta,
                constraint: "detection efficiency must be in (0, 1]",
            });
        }
        if self.nu_el_snu < 0.0 {
            return Err(Error::InvalidParam {
                name: "nu_el",
                value: self.nu_el_snu,
                constraint: "electrical noise must be >= 0",
            });
        }
        Ok(())
    }

    pub fn with_eps(&self, eps_snu: f64) -> Result<LinkParams> {
        LinkParams::new(self.t, eps_snu, self.eta, self.nu_el_snu)
    }
}

/// Full channel and receiver parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkParams {
    /// Channel transmittance in `(0, 1]`.
    pub t: f64,
    /// Input-referred excess noise in shot-noise units, `>= 0`.
    pub eps_snu: f64,
    /// Receiver (homodyne detection) efficiency in `(0, 1]`.
    pub eta: f64,
    /// Receiver electrical noise in shot-noise units, `>= 0`.
    pub nu_el_snu: f64,
}

impl LinkParams {
    pub fn new(t: f64, eps_snu: f64, eta: f64, nu_el_snu: f64) -> Result<Self> {
        let p = Self {
            t,
            eps_snu,
            eta,
            nu_el_snu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.base().validate()?;
        require_finite("eps", self.eps_snu)?;
        if self.eps_snu < 0.0 {
            return Err(Error::InvalidParam {
                name: "eps",
                value: self.eps_snu,
                constraint: "excess noise must be >= 0",
            });
        }
        Ok(())
    }

    pub fn base(&self) -> LinkBase {
        LinkBase {
            t: self.t,
            eta: self.eta,
            nu_el_snu: self.nu_el_snu,
        }
    }
}

/// Input-referred noise totals seen by Bob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseBreakdown {
    /// Channel noise referred to the channel input: `1/t - 1 + eps`.
    pub chi_line_snu: f64,
    /// Detection noise referred to the receiver input:
    /// `(1 + nu_el)/eta - 1`.
    pub chi_hom_snu: f64,
    /// Total noise referred to the channel input:
    /// `chi_line + chi_hom/t`.
    pub chi_tot_snu: f64,
}

/// Channel noise referred to the channel input.
pub fn chi_line(link: &LinkParams) -> Result<f64> {
    link.validate()?;
    Ok(1.0 / link.t - 1.0 + link.eps_snu)
}

/// Detection noise referred to the receiver input.
pub fn chi_hom(link: &LinkParams) -> Result<f64> {
    link.validate()?;
    Ok((1.0 + link.nu_el_snu) / link.eta - 1.0)
}

/// Total input-referred noise and its two contributions.
pub fn chi_tot(link: &LinkParams) -> Result<NoiseBreakdown> {
    let chi_line_snu = chi_line(link)?;
    let chi_hom_snu = chi_hom(link)?;
    Ok(NoiseBreakdown {
        chi_line_snu,
        chi_hom_snu,
        chi_tot_snu: chi_line_snu + chi_hom_snu / link.t,
    })
}

/// Shannon mutual information between Alice and Bob in bits per symbol.
pub fn mutual_info_ab(proto: &ProtocolParams, link: &LinkParams) -> Result<f64> {
    proto.validate()?;
    let noise = chi_tot(link)?;
    let v = proto.v();
    Ok(0.5 * ((v + noise.chi_tot_snu) / (1.0 + noise.chi_tot_snu)).log2())
}

/// Eve's Shannon information about Bob's outcome under an individual
/// attack, in bits per symbol. Nonnegative; round-off within `1e-9` below
/// zero is clamped to zero.
pub fn eve_info_individual(proto: &ProtocolParams, link: &LinkParams) -> Result<f64> {
    proto.validate()?;
    let noise = chi_tot(link)?;
    let v = proto.v();
    let v_b = link.eta * link.t * (v + noise.chi_tot_snu);
    let v_b_given_e =
        link.eta * (1.0 / (link.t * (1.0 / v + noise.chi_line_snu)) + noise.chi_hom_snu);
    let i_be = 0.5 * (v_b / v_b_given_e).log2();
    clamp_nonnegative("eve information (individual attack)", i_be)
}

/// Bosonic entropy function `g(x) = (x+1) log2(x+1) - x log2(x)` with
/// `g(0) = 0`.
pub fn g_func(x: f64) -> Result<f64> {
    require_finite("x", x)?;
    if x < 0.0 {
        return Err(Error::InvalidParam {
            name: "x",
            value: x,
            constraint: "entropy argument must be >= 0",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((x + 1.0) * (x + 1.0).log2() - x * x.log2())
}

/// Symplectic spectrum of the shared state (`lambda_1`, `lambda_2`) and of
/// Eve's state conditioned on Bob's measurement (`lambda_3`, `lambda_4`),
/// together with the quadratic-form intermediates they come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenIntermediates {
    pub a_term: f64,
    pub b_term: f64,
    pub c_term: f64,
    pub d_term: f64,
    pub lambda: [f64; 4],
}

/// Computes the four symplectic eigenvalues that enter the Holevo bound.
///
/// Discriminants that are negative within `1e-9` are treated as round-off
/// and clamped to zero; larger violations, or eigenvalues falling below
/// `1 - 1e-9`, indicate an unphysical covariance state and are reported as
/// numerical-domain errors.
pub fn symplectic_eigenvalues(proto: &ProtocolParams, link: &LinkParams) -> Result<EigenIntermediates> {
    proto.validate()?;
    let noise = chi_tot(link)?;
    let v = proto.v();
    let t = link.t;
    let chi_l = noise.chi_line_snu;
    let chi_h = noise.chi_hom_snu;
    let chi_t = noise.chi_tot_snu;

    let a_term = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_l) * (v + chi_l);
    let b_term = t * t * (v * chi_l + 1.0) * (v * chi_l + 1.0);
    let sqrt_b = b_term.sqrt();
    let denom = t * (v + chi_t);
    let c_term = (v * sqrt_b + t * (v + chi_l) + a_term * chi_h) / denom;
    let d_term = sqrt_b * (v + sqrt_b * chi_h) / denom;

    let disc12 = checked_discriminant("lambda_12 discriminant", a_term * a_term - 4.0 * b_term)?;
    let disc34 = checked_discriminant("lambda_34 discriminant", c_term * c_term - 4.0 * d_term)?;

    let lambda = [
        (0.5 * (a_term + disc12.sqrt())).max(0.0).sqrt(),
        (0.5 * (a_term - disc12.sqrt())).max(0.0).sqrt(),
        (0.5 * (c_term + disc34.sqrt())).max(0.0).sqrt(),
        (0.5 * (c_term - disc34.sqrt())).max(0.0).sqrt(),
    ];
    for &l in &lambda {
        if l < 1.0 - NUMERICAL_SLACK {
            return Err(Error::NumericalDomain {
                what: "symplectic eigenvalue",
                value: l,
            });
        }
    }

    Ok(EigenIntermediates {
        a_term,
        b_term,
        c_term,
        d_term,
        lambda,
    })
}

/// Holevo bound on Eve's information under a collective attack, in bits
/// per symbol. Nonnegative; round-off within `1e-9` below zero is clamped
/// to zero.
pub fn holevo_bound(proto: &ProtocolParams, link: &LinkParams) -> Result<f64> {
    let eig = symplectic_eigenvalues(proto, link)?;
    let [l1, l2, l3, l4] = eig.lambda;
    let chi_be = g_func(photon_arg(l1))? + g_func(photon_arg(l2))?
        - g_func(photon_arg(l3))?
        - g_func(photon_arg(l4))?;
    clamp_nonnegative("Holevo bound", chi_be)
}

/// Mean photon number `(lambda - 1)/2` of a thermal state with symplectic
/// eigenvalue `lambda`, clamped at zero for eigenvalues within round-off
/// of one.
fn photon_arg(lambda: f64) -> f64 {
    (0.5 * (lambda - 1.0)).max(0.0)
}

fn checked_discriminant(what: &'static str, disc: f64) -> Result<f64> {
    if disc >= 0.0 {
        Ok(disc)
    } else if disc >= -NUMERICAL_SLACK {
        Ok(0.0)
    } else {
        Err(Error::NumericalDomain { what, value: disc })
    }
}

fn clamp_nonnegative(what: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -NUMERICAL_SLACK {
        Ok(0.0)
    } else {
        Err(Error::NumericalDomain { what, value })
    }
}

/// Secret key rate in bits per symbol, together with its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkrResult {
    /// Alice-Bob mutual information in bits per symbol.
    pub i_ab: f64,
    /// Eve's information in bits per symbol under `attack_model`.
    pub leak_eve: f64,
    /// `beta * i_ab - leak_eve`; negative when the link cannot distill key.
    pub skr_per_symbol: f64,
    pub attack_model: AttackModel,
}

/// Secret key rate `beta * I_AB - leak` in bits per symbol.
///
/// A negative rate is a meaningful "no key" outcome, not an error.
pub fn secret_key_rate(
    proto: &ProtocolParams,
    link: &LinkParams,
    attack: AttackModel,
) -> Result<SkrResult> {
    let i_ab = mutual_info_ab(proto, link)?;
    let leak_eve = match attack {
        AttackModel::Individual => eve_info_individual(proto, link)?,
        AttackModel::Collective => holevo_bound(proto, link)?,
    };
    Ok(SkrResult {
        i_ab,
        leak_eve,
        skr_per_symbol: proto.beta * i_ab - leak_eve,
        attack_model: attack,
    })
}

/// Converts a per-symbol rate to bits per second at the given symbol rate.
/// Negative per-symbol rates yield zero.
pub fn skr_bits_per_second(result: &SkrResult, symbol_rate_hz: f64) -> Result<f64> {
    require_finite("symbol_rate_hz", symbol_rate_hz)?;
    if symbol_rate_hz <= 0.0 {
        return Err(Error::InvalidParam {
            name: "symbol_rate_hz",
            value: symbol_rate_hz,
            constraint: "symbol rate must be > 0",
        });
    }
    Ok(result.skr_per_symbol.max(0.0) * symbol_rate_hz)
}

/// Outcome of the modulation-variance search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VaOptimum {
    /// The searched `v_a` together with the `beta` it was optimized for.
    pub proto: ProtocolParams,
    /// Key rate decomposition at the returned `v_a`.
    pub result: SkrResult,
    /// False when the key rate is nonpositive over the whole bracket; the
    /// returned point is then merely the least bad one.
    pub positive_key: bool,
    /// True when the best rate sits at a bracket edge, which for an edge at
    /// [`VA_BRACKET_MAX`] means the rate is still rising there (typical for
    /// ideal reconciliation, where the rate saturates as `v_a` grows).
    pub at_bracket_edge: bool,
}

/// Number of points in the coarse log-spaced `v_a` scan.
const VA_SCAN_POINTS: usize = 61;

/// Finds the modulation variance that maximizes the secret key rate over
/// `[VA_BRACKET_MIN, VA_BRACKET_MAX]`.
///
/// A coarse log-spaced scan brackets the maximum and a golden-section
/// refinement polishes it to [`VA_SEARCH_TOL_BITS`]. When the best scan
/// point is a bracket edge the edge value is returned unrefined with
/// `at_bracket_edge` set.
pub fn optimize_modulation_variance(
    link: &LinkParams,
    beta: f64,
    attack: AttackModel,
) -> Result<VaOptimum> {
    link.validate()?;
    ProtocolParams::new(1.0, beta)?;

    let rate_at = |v_a: f64| -> f64 {
        ProtocolParams::new(v_a, beta)
            .and_then(|p| secret_key_rate(&p, link, attack))
            .map(|r| r.skr_per_symbol)
            .unwrap_or(f64::NEG_INFINITY)
    };

    let lg_min = VA_BRACKET_MIN.log10();
    let lg_max = VA_BRACKET_MAX.log10();
    let step = (lg_max - lg_min) / (VA_SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..VA_SCAN_POINTS)
        .map(|i| 10f64.powf(lg_min + step * i as f64))
        .collect();

    let mut best_idx = 0;
    let mut best_rate = f64::NEG_INFINITY;
    for (i, &v_a) in grid.iter().enumerate() {
        let r = rate_at(v_a);
        if r > best_rate {
            best_rate = r;
            best_idx = i;
        }
    }

    let (v_a, at_bracket_edge) = if best_idx == 0 {
        (VA_BRACKET_MIN, true)
    } else if best_idx == VA_SCAN_POINTS - 1 {
        (VA_BRACKET_MAX, true)
    } else {
        let (x, _) = golden_section_max(
            rate_at,
            grid[best_idx - 1],
            grid[best_idx + 1],
            VA_SEARCH_TOL_BITS,
            200,
        );
        (x, false)
    };

    let proto = ProtocolParams::new(v_a, beta)?;
    let result = secret_key_rate(&proto, link, attack)?;
    Ok(VaOptimum {
        proto,
        result,
        positive_key: result.skr_per_symbol > 0.0,
        at_bracket_edge,
    })
}

/// Largest excess noise at which the link still yields a nonnegative key
/// rate for the given protocol settings, found by bisection to
/// [`EPS_ROOT_TOL_BITS`].
///
/// Returns an infeasible-link error when the rate is already nonpositive
/// at zero excess noise.
pub fn max_tolerable_excess_noise(
    proto: &ProtocolParams,
    base: &LinkBase,
    attack: AttackModel,
) -> Result<f64> {
    proto.validate()?;
    base.validate()?;

    let rate_at = |eps: f64| -> Result<f64> {
        let link = base.with_eps(eps)?;
        Ok(secret_key_rate(proto, &link, attack)?.skr_per_symbol)
    };

    let rate_zero = rate_at(0.0)?;
    if rate_zero <= 0.0 {
        return Err(Error::InfeasibleLink(format!(
            "key rate {rate_zero} bits/symbol at zero excess noise for {attack} attack"
        )));
    }

    let mut hi = 1.0;
    while rate_at(hi)? > 0.0 && hi < 1e18 {
        hi *= 2.0;
    }

    Ok(bisect_decreasing(
        |eps| rate_at(eps).unwrap_or(f64::NEG_INFINITY),
        0.0,
        hi,
        EPS_ROOT_TOL_BITS,
        0.0,
        200,
    ))
}
