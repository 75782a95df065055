//! Secure-rate assembly for BB84 and Ekert, optimisation of the free source
//! parameter, cutoff search and sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{arm_alpha, arm_alpha_with_receiver_loss, ArmLoss, ChannelParams};
use crate::error::{Error, Result};
use crate::ratecore::{binary_entropy, tau, tau_multiphoton, EcBenchmarkTable};
use crate::sources::{
    bb84_stats, ekert_ideal_stats, pdc_stats, swap_stats, swap_stats_from_alpha, ClickStats,
    CoincidenceStats, ModelOptions, SourceSpec,
};

/// Secret bits per clock pulse. `raw` may be negative when error
/// correction leaks more than privacy amplification can absorb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateValue {
    pub raw: f64,
    pub clamped: f64,
}

impl RateValue {
    fn new(raw: f64, secure: bool) -> Self {
        let clamped = if secure { raw.max(0.0) } else { 0.0 };
        Self { raw, clamped }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Stats {
    Click(ClickStats),
    Coincidence(CoincidenceStats),
}

impl Stats {
    /// Probability that a pulse contributes a sifted-key candidate
    /// (before the 1/2 basis-matching factor).
    pub fn p_detect(&self) -> f64 {
        match self {
            Stats::Click(s) => s.p_click,
            Stats::Coincidence(s) => s.p_coin,
        }
    }

    pub fn signal_part(&self) -> f64 {
        match self {
            Stats::Click(s) => s.p_signal,
            Stats::Coincidence(s) => s.p_true,
        }
    }

    pub fn noise_part(&self) -> f64 {
        match self {
            Stats::Click(s) => s.p_dark,
            Stats::Coincidence(s) => s.p_false,
        }
    }

    pub fn error_rate(&self) -> f64 {
        match self {
            Stats::Click(s) => s.e,
            Stats::Coincidence(s) => s.e,
        }
    }

    /// Secure fraction per reconciled bit before error-correction leakage.
    pub fn secure_fraction(&self) -> Result<f64> {
        match self {
            Stats::Click(s) if s.beta > 0.0 => tau_multiphoton(s.e.min(1.0), s.beta),
            Stats::Click(_) => Ok(0.0),
            Stats::Coincidence(s) => tau(s.e),
        }
    }
}

fn ec_term(e: f64, table: &EcBenchmarkTable) -> f64 {
    let h = binary_entropy(e.clamp(0.0, 1.0)).unwrap_or(1.0);
    table.interpolate(e) * h
}

/// `p_click/2 * (beta tau(e/beta) - f(e) h(e))`.
pub fn rate_bb84(stats: &ClickStats, table: &EcBenchmarkTable) -> RateValue {
    let tau_term = if stats.beta > 0.0 {
        tau_multiphoton(stats.e.clamp(0.0, 1.0), stats.beta).unwrap_or(0.0)
    } else {
        0.0
    };
    let raw = stats.p_click / 2.0 * (tau_term - ec_term(stats.e, table));
    RateValue::new(raw, stats.has_secure_bits())
}

/// `p_coin/2 * (tau(e) - f(e) h(e))`. No multi-photon correction: the
/// collision bound holds for any source.
pub fn rate_ekert(stats: &CoincidenceStats, table: &EcBenchmarkTable) -> RateValue {
    let tau_term = tau(stats.e.max(0.0)).unwrap_or(0.0);
    let raw = stats.p_coin / 2.0 * (tau_term - ec_term(stats.e, table));
    RateValue::new(raw, stats.e < 0.5)
}

pub fn rate_of(stats: &Stats, table: &EcBenchmarkTable) -> RateValue {
    match stats {
        Stats::Click(s) => rate_bb84(s, table),
        Stats::Coincidence(s) => rate_ekert(s, table),
    }
}

/// What the sweep abscissa measures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Fiber length between Alice and Bob.
    #[default]
    DistanceKm,
    /// Total end-to-end loss (including detector efficiency), split evenly
    /// between the arms of entanglement-based schemes.
    TotalLossDb,
}

/// Search box for the tunable source parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub lo: f64,
    pub hi: f64,
}

impl ParamBox {
    pub const POISSON_NBAR: ParamBox = ParamBox { lo: 1e-4, hi: 2.0 };
    pub const PDC_CHI: ParamBox = ParamBox { lo: 1e-3, hi: 1.5 };

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

const COARSE_GRID_POINTS: usize = 64;
const GOLDEN_REL_TOL: f64 = 1e-4;
const CUTOFF_RESOLUTION: f64 = 0.5;

/// Maximiser of the secure rate over the free source parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub param: f64,
    pub rate: RateValue,
    pub stats: Option<Stats>,
    /// Set when no parameter in the box gives a positive rate.
    pub zero_rate: bool,
}

/// One evaluated abscissa of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub abscissa: f64,
    pub rate_raw: f64,
    pub rate: f64,
    pub optimal_param: Option<f64>,
    pub stats: Option<Stats>,
    pub diagnostic: Option<String>,
}

impl RatePoint {
    fn failed(abscissa: f64, err: &Error) -> Self {
        Self {
            abscissa,
            rate_raw: 0.0,
            rate: 0.0,
            optimal_param: None,
            stats: None,
            diagnostic: Some(err.to_string()),
        }
    }
}

/// Everything needed to turn a source and an abscissa into a rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    pub channel: ChannelParams,
    pub options: ModelOptions,
    pub table: EcBenchmarkTable,
    pub mode: SweepMode,
}

impl RateModel {
    pub fn new(channel: ChannelParams) -> Self {
        Self {
            channel,
            options: ModelOptions::default(),
            table: EcBenchmarkTable::default(),
            mode: SweepMode::DistanceKm,
        }
    }

    pub fn with_mode(mut self, mode: SweepMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_options(mut self, options: ModelOptions) -> Self {
        self.options = options;
        self
    }

    fn single_arm(&self, x: f64) -> Result<ArmLoss> {
        match self.mode {
            SweepMode::DistanceKm => arm_alpha(&self.channel, x),
            SweepMode::TotalLossDb => ArmLoss::from_loss_db(x),
        }
    }

    /// Detection probability of one photon over one half of an Ekert link.
    pub fn half_arm(&self, x: f64) -> Result<ArmLoss> {
        match self.mode {
            SweepMode::DistanceKm => {
                let rl = if self.options.receiver_loss_per_arm {
                    self.channel.receiver_loss_db
                } else {
                    self.channel.receiver_loss_db / 2.0
                };
                arm_alpha_with_receiver_loss(&self.channel, x / 2.0, rl)
            }
            SweepMode::TotalLossDb => ArmLoss::from_loss_db(x / 2.0),
        }
    }

    /// Detection statistics for a source whose parameters are all fixed.
    pub fn stats(&self, source: &SourceSpec, x: f64) -> Result<Stats> {
        source.validate()?;
        if !(x >= 0.0) {
            return Err(Error::domain("abscissa", x));
        }
        let p = &self.channel;
        match *source {
            SourceSpec::IdealSingle | SourceSpec::Poisson { .. } => {
                Ok(Stats::Click(bb84_stats(source, self.single_arm(x)?, p)?))
            }
            SourceSpec::IdealEpr => Ok(Stats::Coincidence(ekert_ideal_stats(self.half_arm(x)?, p)?)),
            SourceSpec::Pdc { chi: Some(chi) } => Ok(Stats::Coincidence(pdc_stats(
                chi,
                self.half_arm(x)?,
                p,
                self.options.pdc_formula,
            )?)),
            SourceSpec::Pdc { chi: None } => {
                Err(Error::Config("PDC source needs chi (or use the optimizer)".into()))
            }
            SourceSpec::Swap { n_swaps } => {
                let literal = self.options.swap_exponent_literal;
                let s = match self.mode {
                    SweepMode::DistanceKm => swap_stats(n_swaps, x, p, literal)?,
                    SweepMode::TotalLossDb => {
                        let seg = ArmLoss::from_loss_db(x / (2.0 * n_swaps as f64 + 2.0))?;
                        swap_stats_from_alpha(n_swaps, seg, seg, p.dark_count_prob, p.baseline_error, literal)?
                    }
                };
                Ok(Stats::Coincidence(s.coincidence))
            }
        }
    }

    pub fn rate(&self, source: &SourceSpec, x: f64) -> Result<(RateValue, Stats)> {
        let stats = self.stats(source, x)?;
        Ok((rate_of(&stats, &self.table), stats))
    }

    /// Maximises the rate over the free parameter of `source` at `x`:
    /// logarithmic scan followed by golden-section refinement around the
    /// best scan point.
    pub fn optimize(&self, source: &SourceSpec, x: f64) -> Result<Optimum> {
        let (bounds, with_param): (ParamBox, fn(f64) -> SourceSpec) = match source {
            SourceSpec::Poisson { .. } => {
                (ParamBox::POISSON_NBAR, |v| SourceSpec::Poisson { nbar: Some(v) })
            }
            SourceSpec::Pdc { .. } => (ParamBox::PDC_CHI, |v| SourceSpec::Pdc { chi: Some(v) }),
            other => {
                return Err(Error::Config(format!("{other:?} has no free parameter to optimize")))
            }
        };
        let objective = |log_v: f64| -> f64 {
            match self.rate(&with_param(log_v.exp()), x) {
                Ok((r, _)) if r.raw.is_finite() => r.raw,
                _ => f64::NEG_INFINITY,
            }
        };

        let (llo, lhi) = (bounds.lo.ln(), bounds.hi.ln());
        let step = (lhi - llo) / (COARSE_GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..COARSE_GRID_POINTS).map(|i| llo + step * i as f64).collect();
        let values: Vec<f64> = grid.iter().map(|&g| objective(g)).collect();
        let best = values
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > values[b] { i } else { b });

        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(COARSE_GRID_POINTS - 1)];
        // tolerance on log(param) equals relative tolerance on param
        let (mut lx, mut lv) = golden_section_maximize(objective, a, b, GOLDEN_REL_TOL);
        if !(lv >= values[best]) {
            lx = grid[best];
            lv = values[best];
        }

        if !(lv > 0.0) {
            let mid = bounds.midpoint();
            let at_mid = self.rate(&with_param(mid), x).ok();
            return Ok(Optimum {
                param: mid,
                rate: RateValue { raw: at_mid.map_or(0.0, |(r, _)| r.raw), clamped: 0.0 },
                stats: at_mid.map(|(_, s)| s),
                zero_rate: true,
            });
        }
        let param = lx.exp().clamp(bounds.lo, bounds.hi);
        let (rate, stats) = self.rate(&with_param(param), x)?;
        Ok(Optimum { param, rate, stats: Some(stats), zero_rate: rate.clamped <= 0.0 })
    }

    /// Rate at `x`, optimising the free parameter when the source leaves it unset.
    pub fn evaluate(&self, source: &SourceSpec, x: f64) -> Result<RatePoint> {
        if source.needs_optimization() {
            let opt = self.optimize(source, x)?;
            Ok(RatePoint {
                abscissa: x,
                rate_raw: opt.rate.raw,
                rate: opt.rate.clamped,
                optimal_param: Some(opt.param),
                stats: opt.stats,
                diagnostic: opt.zero_rate.then(|| "no positive rate in parameter box".to_string()),
            })
        } else {
            let (rate, stats) = self.rate(source, x)?;
            Ok(RatePoint {
                abscissa: x,
                rate_raw: rate.raw,
                rate: rate.clamped,
                optimal_param: None,
                stats: Some(stats),
                diagnostic: None,
            })
        }
    }

    /// Largest abscissa in `[lo, hi]` with positive (optimised) rate, to
    /// within 0.5 units, found by bisection.
    pub fn cutoff(&self, source: &SourceSpec, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) {
            return Err(Error::Config(format!("cutoff search box [{lo}, {hi}] is empty")));
        }
        let positive = |x: f64| -> Result<bool> { Ok(self.evaluate(source, x)?.rate > 0.0) };
        if !positive(lo)? {
            return Err(Error::NoCoverage { lower: lo });
        }
        if positive(hi)? {
            return Err(Error::NoCutoffInBox { upper: hi });
        }
        let (mut good, mut bad) = (lo, hi);
        while bad - good > CUTOFF_RESOLUTION {
            let mid = 0.5 * (good + bad);
            if positive(mid)? {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(good)
    }
}

/// Golden-section search for the maximum of `f` on `[a, b]`.
fn golden_section_maximize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Optimal source parameter and rate at one abscissa.
pub fn optimize_source_param(model: &RateModel, source: &SourceSpec, x: f64) -> Result<Optimum> {
    model.optimize(source, x)
}

/// Cutoff distance in km for a fiber link.
pub fn cutoff_distance(model: &RateModel, source: &SourceSpec, search_km: (f64, f64)) -> Result<f64> {
    let model = model.clone().with_mode(SweepMode::DistanceKm);
    model.cutoff(source, search_km.0, search_km.1)
}

/// Evenly spaced abscissae `start, start + step, ...` not exceeding `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let Grid { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::Config("sweep grid must be finite".into()));
        }
        if !(step > 0.0) || !(start < stop) {
            return Err(Error::Config(format!(
                "empty sweep grid: start {start}, stop {stop}, step {step}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| start + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub source: SourceSpec,
    pub model: RateModel,
    pub grid: Grid,
}

/// One point per grid abscissa, in grid order. Per-point failures become
/// zero-rate points carrying a diagnostic.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<RatePoint>> {
    spec.source.validate()?;
    let xs = spec.grid.points()?;
    Ok(sweep_points(&spec.model, &spec.source, &xs))
}

pub fn sweep_points(model: &RateModel, source: &SourceSpec, xs: &[f64]) -> Vec<RatePoint> {
    xs.par_iter()
        .map(|&x| model.evaluate(source, x).unwrap_or_else(|e| RatePoint::failed(x, &e)))
        .collect()
}
