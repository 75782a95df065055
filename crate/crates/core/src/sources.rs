//! Per-pulse detection statistics for each photon source: click statistics
//! for prepare-and-measure (BB84) sources and coincidence statistics for
//! entangled-pair sources, including chains of entanglement swaps.

use serde::{Deserialize, Serialize};

use crate::channel::{dark_click_prob, db_to_transmission, fiber_transmission, ArmLoss, ChannelParams};
use crate::error::{Error, Result};

/// Detectors in one passive-modulation receiver (x, y, u, v).
pub const RECEIVER_DETECTORS: u32 = 4;

/// Photon source. `nbar` / `chi` left unset marks the parameter as free,
/// to be optimized per operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    IdealSingle,
    Poisson {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nbar: Option<f64>,
    },
    IdealEpr,
    Pdc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chi: Option<f64>,
    },
    Swap { n_swaps: u32 },
}

/// Which QKD protocol a source feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Bb84,
    Ekert,
}

impl SourceSpec {
    pub fn protocol(&self) -> Protocol {
        match self {
            SourceSpec::IdealSingle | SourceSpec::Poisson { .. } => Protocol::Bb84,
            SourceSpec::IdealEpr | SourceSpec::Pdc { .. } | SourceSpec::Swap { .. } => {
                Protocol::Ekert
            }
        }
    }

    /// True if the source has a tunable parameter that is left unset.
    pub fn needs_optimization(&self) -> bool {
        matches!(self, SourceSpec::Poisson { nbar: None } | SourceSpec::Pdc { chi: None })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::Poisson { nbar: Some(n) } if !(n > 0.0 && n.is_finite()) => {
                Err(Error::domain("nbar", n))
            }
            SourceSpec::Pdc { chi: Some(c) } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::domain("chi", c))
            }
            SourceSpec::Swap { n_swaps: 0 } => Err(Error::domain("n_swaps", 0.0)),
            _ => Ok(()),
        }
    }
}

/// Which closed form to use for the lossy down-converter coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdcFormula {
    /// Resummed exactly from the two-mode squeezed vacuum.
    #[default]
    Exact,
    /// The historical published expressions (B, C and D carry the wrong
    /// power of the loss denominator).
    AsPrinted,
}

/// Modelling choices that the physics leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    /// Ekert: each arm carries the full receiver loss. When false the
    /// receiver loss is split evenly between the two arms.
    pub receiver_loss_per_arm: bool,
    /// Swap chains: raise the all-analyzers-fired probability to the N-th
    /// power a second time, as in the literal chain formula.
    pub swap_exponent_literal: bool,
    pub pdc_formula: PdcFormula,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { receiver_loss_per_arm: true, swap_exponent_literal: false, pdc_formula: PdcFormula::Exact }
    }
}

/// Single-receiver detection statistics per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickStats {
    pub p_signal: f64,
    pub p_dark: f64,
    pub p_click: f64,
    /// Probability that more than one photon left the source.
    pub p_multi: f64,
    pub e: f64,
    /// Fraction of reconciled bits not attributable to multi-photon pulses.
    /// Non-positive means photon splitting can account for every click.
    pub beta: f64,
}

impl ClickStats {
    pub fn has_secure_bits(&self) -> bool {
        self.beta > 0.0 && self.e / self.beta < 0.5
    }
}

/// Two-receiver coincidence statistics per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceStats {
    pub p_true: f64,
    pub p_false: f64,
    pub p_coin: f64,
    pub e: f64,
}

impl CoincidenceStats {
    /// False coincidences are random bits (error 1/2); true ones carry the
    /// baseline error `mu`.
    pub fn from_parts(p_true: f64, p_false: f64, mu: f64) -> Result<Self> {
        let p_coin = p_true + p_false;
        if !(p_coin > 0.0) {
            return Err(Error::DegenerateStatistics("coincidence probability is zero".into()));
        }
        let e = (p_false / 2.0 + mu * p_true) / p_coin;
        Ok(Self { p_true, p_false, p_coin, e })
    }
}

/// Weights of the lossy down-converter state restricted to at most one
/// photon per receiver: entangled pair `a`, vacuum `b`, one unpolarized
/// photon at a given receiver `c`, two uncorrelated unpolarized photons `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdcCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PdcCoefficients {
    /// Weight left for states with two or more photons at some receiver.
    pub fn multi_photon_weight(&self) -> f64 {
        1.0 - self.a - self.b - 2.0 * self.c - self.d
    }
}

/// BB84 click statistics for an ideal single-photon or Poisson source.
pub fn bb84_stats(src: &SourceSpec, alpha: ArmLoss, p: &ChannelParams) -> Result<ClickStats> {
    let a = alpha.alpha();
    let (p_signal, p_multi) = match *src {
        SourceSpec::IdealSingle => (a, 0.0),
        SourceSpec::Poisson { nbar: Some(n) } => {
            if !(n > 0.0) {
                return Err(Error::domain("nbar", n));
            }
            (-(-a * n).exp_m1(), 1.0 - (1.0 + n) * (-n).exp())
        }
        SourceSpec::Poisson { nbar: None } => {
            return Err(Error::Config("Poisson source needs nbar (or use the optimizer)".into()))
        }
        other => {
            return Err(Error::Config(format!("{other:?} is not a prepare-and-measure source")))
        }
    };
    let p_dark = dark_click_prob(p.dark_count_prob, RECEIVER_DETECTORS)?;
    let p_click = p_signal + p_dark;
    if !(p_click > 0.0) {
        return Err(Error::DegenerateStatistics("click probability is zero".into()));
    }
    let e = (p_dark / 2.0 + p.baseline_error * p_signal) / p_click;
    let beta = (p_click - p_multi) / p_click;
    Ok(ClickStats { p_signal, p_dark, p_click, p_multi, e, beta })
}

/// Ideal pair source placed midway; `alpha_half` is the detection
/// probability of one photon over one arm.
pub fn ekert_ideal_stats(alpha_half: ArmLoss, p: &ChannelParams) -> Result<CoincidenceStats> {
    let a = alpha_half.alpha();
    let d = p.dark_count_prob;
    let p_true = a * a;
    let p_false = 8.0 * a * d + 16.0 * d * d;
    CoincidenceStats::from_parts(p_true, p_false, p.baseline_error)
}

fn pdc_common(chi: f64, alpha_half: ArmLoss) -> Result<(f64, f64, f64, f64)> {
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::domain("chi", chi));
    }
    let a = alpha_half.alpha();
    let t2 = chi.tanh().powi(2);
    let sech4 = chi.cosh().powi(-4);
    Ok((a, t2, sech4, 1.0 - a))
}

/// Down-converter coefficients resummed from
/// `exp(tanh(chi) (a_x+ b_y+ + a_y+ b_x+)) |0> / cosh^2(chi)` after loss
/// `alpha_half` on each arm.
pub fn pdc_coefficients(chi: f64, alpha_half: ArmLoss) -> Result<PdcCoefficients> {
    let (a, t2, sech4, u) = pdc_common(chi, alpha_half)?;
    // each polarization pair loses all its photons with probability
    // (1 - t2) / (1 - x)
    let x = t2 * u * u;
    let q = 1.0 - x;
    Ok(PdcCoefficients {
        a: sech4 * 2.0 * a * a * t2 / q.powi(4),
        b: sech4 / q.powi(2),
        c: sech4 * 2.0 * a * u * t2 / q.powi(3),
        d: sech4 * 4.0 * a * a * u * u * t2 * t2 / q.powi(4),
    })
}

/// The coefficients exactly as historically published, kept for comparison.
pub fn pdc_coefficients_printed(chi: f64, alpha_half: ArmLoss) -> Result<PdcCoefficients> {
    let (a, t2, sech4, u) = pdc_common(chi, alpha_half)?;
    let q = 1.0 - t2 * u * u;
    Ok(PdcCoefficients {
        a: sech4 * 2.0 * a * a * t2 / q.powi(4),
        b: sech4 / q,
        c: sech4 * 2.0 * a * u * t2 / q.powi(2),
        d: sech4 * 4.0 * a * a * u * u * t2 * t2 / (1.0 - t2 * u.powi(4)),
    })
}

pub fn pdc_coefficients_with(
    chi: f64,
    alpha_half: ArmLoss,
    formula: PdcFormula,
) -> Result<PdcCoefficients> {
    match formula {
        PdcFormula::Exact => pdc_coefficients(chi, alpha_half),
        PdcFormula::AsPrinted => pdc_coefficients_printed(chi, alpha_half),
    }
}

/// Coincidence statistics of a down-converter source. The uncorrelated
/// two-photon term `d` counts as a false coincidence; states with several
/// photons at one receiver never yield an accepted bit.
pub fn pdc_stats(
    chi: f64,
    alpha_half: ArmLoss,
    p: &ChannelParams,
    formula: PdcFormula,
) -> Result<CoincidenceStats> {
    let k = pdc_coefficients_with(chi, alpha_half, formula)?;
    let d = p.dark_count_prob;
    let p_true = k.a;
    let p_false = 16.0 * d * d * k.b + 8.0 * d * k.c + k.d;
    CoincidenceStats::from_parts(p_true, p_false, p.baseline_error)
}

/// Intermediate quantities of an entanglement-swapping chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapStats {
    pub alpha_segment: f64,
    pub alpha_endpoint: f64,
    pub p_swap_true: f64,
    pub p_swap_false: f64,
    /// Post-selected fidelity weight of one swap.
    pub g: f64,
    /// Probability that every Bell analyzer reports success.
    pub p_bell: f64,
    pub coincidence: CoincidenceStats,
}

/// Swap chain with explicit per-photon detection probabilities:
/// `alpha_segment` at the Bell analyzers and `alpha_endpoint` at Alice's
/// and Bob's receivers.
pub fn swap_stats_from_alpha(
    n_swaps: u32,
    alpha_segment: ArmLoss,
    alpha_endpoint: ArmLoss,
    d: f64,
    mu: f64,
    exponent_literal: bool,
) -> Result<SwapStats> {
    if n_swaps == 0 {
        return Err(Error::domain("n_swaps", 0.0));
    }
    let n = n_swaps as i32;
    let a = alpha_segment.alpha();
    let ae = alpha_endpoint.alpha();
    let p_swap_true = 0.5 * a * a;
    let p_swap_false = 6.0 * a * d + 12.0 * d * d;
    let p_swap = p_swap_true + p_swap_false;
    if !(p_swap > 0.0) {
        return Err(Error::DegenerateStatistics("Bell analyzer never fires".into()));
    }
    let g = p_swap_true / p_swap;
    let mut p_bell = p_swap.powi(n);
    if exponent_literal {
        p_bell = p_bell.powi(n);
    }
    let g_n = g.powi(n);
    let p_true = p_bell * g_n * ae * ae;
    let p_false = p_bell * (8.0 * ae * d + 16.0 * d * d + (1.0 - g_n) * ae * ae);
    let coincidence = CoincidenceStats::from_parts(p_true, p_false, mu)?;
    Ok(SwapStats {
        alpha_segment: a,
        alpha_endpoint: ae,
        p_swap_true,
        p_swap_false,
        g,
        p_bell,
        coincidence,
    })
}

/// Per-photon detection probabilities for `n_swaps` swaps over a fiber of
/// `total_length_km`: each of the `2N + 2` photons crosses one equal
/// segment into a detector; only Alice's and Bob's receivers add their
/// receiver loss.
pub fn swap_alphas(n_swaps: u32, total_length_km: f64, p: &ChannelParams) -> Result<(ArmLoss, ArmLoss)> {
    if n_swaps == 0 {
        return Err(Error::domain("n_swaps", 0.0));
    }
    let segments = 2.0 * n_swaps as f64 + 2.0;
    let seg = p.eta * fiber_transmission(p.sigma_db_per_km, total_length_km / segments)?;
    let end = seg * db_to_transmission(p.receiver_loss_db);
    Ok((ArmLoss::new(seg)?, ArmLoss::new(end)?))
}

pub fn swap_stats(
    n_swaps: u32,
    total_length_km: f64,
    p: &ChannelParams,
    exponent_literal: bool,
) -> Result<SwapStats> {
    let (seg, end) = swap_alphas(n_swaps, total_length_km, p)?;
    swap_stats_from_alpha(n_swaps, seg, end, p.dark_count_prob, p.baseline_error, exponent_literal)
}
