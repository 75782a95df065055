//! JSON run configuration and the tabular outputs built from it.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::protocols::{Grid, Optimum, RateModel, RatePoint, Stats, SweepMode};
use crate::ratecore::EcBenchmarkTable;
use crate::security::{ec_leakage_bits, final_key_length_with_tau, KeyBudget, SecurityParams};
use crate::sources::{ModelOptions, Protocol, SourceSpec};

pub const DEFAULT_N_TOT: u64 = 1_000_000_000;
pub const DEFAULT_CUTOFF_SEARCH_KM: [f64; 2] = [0.0, 600.0];

/// One rate curve: a labelled source for a given protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub label: String,
    pub protocol: Protocol,
    #[serde(flatten)]
    pub source: SourceSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_security() -> SecurityParams {
    SecurityParams { s: 30, t: 30 }
}

fn default_n_tot() -> u64 {
    DEFAULT_N_TOT
}

fn default_cutoff_search() -> [f64; 2] {
    DEFAULT_CUTOFF_SEARCH_KM
}

/// Everything one CLI invocation needs. Exactly one of `point` and `grid`
/// is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelParams,
    #[serde(default)]
    pub options: ModelOptions,
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    pub curves: Vec<CurveSpec>,
    #[serde(default = "default_security")]
    pub security: SecurityParams,
    /// Pulses sent, for the key budget of `rate`.
    #[serde(default = "default_n_tot")]
    pub n_tot: u64,
    /// Error-correction benchmark CSV (`e,f`), relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ec_table_csv: Option<PathBuf>,
    #[serde(default = "default_cutoff_search")]
    pub cutoff_search_km: [f64; 2],
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            for t in [cfg.ec_table_csv.as_mut(), cfg.output.path.as_mut()].into_iter().flatten() {
                if t.is_relative() {
                    *t = dir.join(&*t);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate().map_err(|e| Error::Config(format!("channel: {e}")))?;
        match (self.point, self.grid) {
            (Some(_), Some(_)) => return Err(Error::Config("set either `point` or `grid`, not both".into())),
            (None, None) => return Err(Error::Config("one of `point` or `grid` is required".into())),
            (Some(x), None) if !(x >= 0.0 && x.is_finite()) => {
                return Err(Error::Config(format!("point {x} must be a finite non-negative abscissa")))
            }
            (None, Some(g)) => {
                g.points()?;
                if g.start < 0.0 {
                    return Err(Error::Config("sweep grid must start at a non-negative abscissa".into()));
                }
            }
            _ => {}
        }
        if self.curves.is_empty() {
            return Err(Error::Config("at least one curve is required".into()));
        }
        for c in &self.curves {
            c.source.validate().map_err(|e| Error::Config(format!("curve {:?}: {e}", c.label)))?;
            if c.source.protocol() != c.protocol {
                return Err(Error::Config(format!(
                    "curve {:?}: source {:?} does not run {:?}",
                    c.label, c.source, c.protocol
                )));
            }
        }
        let [lo, hi] = self.cutoff_search_km;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!("invalid cutoff search box [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn table(&self) -> Result<EcBenchmarkTable> {
        match &self.ec_table_csv {
            Some(p) => EcBenchmarkTable::from_csv_path(p),
            None => Ok(EcBenchmarkTable::default()),
        }
    }

    pub fn model(&self) -> Result<RateModel> {
        let mut model = RateModel::new(self.channel).with_mode(self.mode).with_options(self.options);
        model.table = self.table()?;
        Ok(model)
    }

    pub fn abscissae(&self) -> Result<Vec<f64>> {
        match (self.point, self.grid) {
            (Some(x), None) => Ok(vec![x]),
            (None, Some(g)) => g.points(),
            _ => Err(Error::Config("one of `point` or `grid` is required".into())),
        }
    }

    fn require_point(&self) -> Result<f64> {
        self.point.ok_or_else(|| Error::Config("this command needs `point`, not `grid`".into()))
    }

    /// Every curve on every abscissa, in config order.
    pub fn run_sweep(&self) -> Result<Vec<CurveResult>> {
        let model = self.model()?;
        let xs = self.abscissae()?;
        Ok(self
            .curves
            .iter()
            .map(|c| CurveResult {
                label: c.label.clone(),
                source: c.source,
                points: crate::protocols::sweep_points(&model, &c.source, &xs),
            })
            .collect())
    }

    /// Rate, statistics and key budget of each curve at `point`.
    pub fn run_point(&self) -> Result<Vec<PointReport>> {
        let x = self.require_point()?;
        let model = self.model()?;
        self.curves
            .iter()
            .map(|c| {
                let point = model.evaluate(&c.source, x)?;
                let budget = match &point.stats {
                    Some(s) => Some(key_budget(s, self.n_tot, &model.table, self.security)?),
                    None => None,
                };
                Ok(PointReport { label: c.label.clone(), source: c.source, point, budget })
            })
            .collect()
    }

    /// Optimal free parameter at `point` for each curve that has one.
    pub fn run_optimize(&self) -> Result<Vec<OptimizeReport>> {
        let x = self.require_point()?;
        let model = self.model()?;
        let free: Vec<&CurveSpec> = self.curves.iter().filter(|c| c.source.needs_optimization()).collect();
        if free.is_empty() {
            return Err(Error::Config("no curve leaves `nbar` or `chi` free to optimize".into()));
        }
        free.into_iter()
            .map(|c| Ok(OptimizeReport { label: c.label.clone(), optimum: model.optimize(&c.source, x)? }))
            .collect()
    }

    /// Cutoff distance of each curve, in km.
    pub fn run_cutoff(&self) -> Vec<CutoffReport> {
        let model = match self.model() {
            Ok(m) => m.with_mode(SweepMode::DistanceKm),
            Err(e) => {
                return self
                    .curves
                    .iter()
                    .map(|c| CutoffReport { label: c.label.clone(), cutoff_km: None, diagnostic: Some(e.to_string()) })
                    .collect()
            }
        };
        let [lo, hi] = self.cutoff_search_km;
        self.curves
            .par_iter()
            .map(|c| match model.cutoff(&c.source, lo, hi) {
                Ok(km) => CutoffReport { label: c.label.clone(), cutoff_km: Some(km), diagnostic: None },
                Err(e) => CutoffReport { label: c.label.clone(), cutoff_km: None, diagnostic: Some(e.to_string()) },
            })
            .collect()
    }
}

/// Sifted-key budget after `n_tot` pulses: `n_rec = n_tot p / 2`, leakage
/// rounded up, final length floored.
pub fn key_budget(stats: &Stats, n_tot: u64, table: &EcBenchmarkTable, sec: SecurityParams) -> Result<KeyBudget> {
    let n_rec = (n_tot as f64 * stats.p_detect() / 2.0).floor() as u64;
    let e = stats.error_rate();
    let kappa = if e < 0.5 { ec_leakage_bits(n_rec, e, table)? } else { n_rec as f64 };
    let tau = stats.secure_fraction()?.clamp(0.0, 1.0);
    final_key_length_with_tau(n_rec, tau, kappa, sec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub label: String,
    pub source: SourceSpec,
    pub points: Vec<RatePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub label: String,
    pub source: SourceSpec,
    pub point: RatePoint,
    pub budget: Option<KeyBudget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub label: String,
    #[serde(flatten)]
    pub optimum: Optimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub label: String,
    pub cutoff_km: Option<f64>,
    pub diagnostic: Option<String>,
}

pub const CSV_HEADER: [&str; 9] = [
    "curve",
    "abscissa",
    "rate_raw",
    "rate_clamped",
    "optimal_param",
    "p_true_or_signal",
    "p_false_or_dark",
    "e",
    "diagnostic",
];

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Sweep table as CSV: `,` delimiter, header row, LF line endings,
/// shortest round-trip number formatting (scientific except the abscissa).
pub fn write_csv<W: Write>(results: &[CurveResult], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for curve in results {
        for p in &curve.points {
            let stats = p.stats.as_ref();
            w.write_record([
                curve.label.clone(),
                p.abscissa.to_string(),
                num(Some(p.rate_raw)),
                num(Some(p.rate)),
                num(p.optimal_param),
                num(stats.map(Stats::signal_part)),
                num(stats.map(Stats::noise_part)),
                num(stats.map(Stats::error_rate)),
                p.diagnostic.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(results: &[CurveResult]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(results, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Fiber-link example used when no file is given.
pub fn example_config() -> RunConfig {
    RunConfig {
        channel: ChannelParams::telecom_fiber(),
        options: ModelOptions::default(),
        mode: SweepMode::DistanceKm,
        point: Some(100.0),
        grid: None,
        curves: vec![CurveSpec { label: "Ekert ideal EPR".into(), protocol: Protocol::Ekert, source: SourceSpec::IdealEpr }],
        security: default_security(),
        n_tot: DEFAULT_N_TOT,
        ec_table_csv: None,
        cutoff_search_km: DEFAULT_CUTOFF_SEARCH_KM,
        output: OutputSpec::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"{
        "channel": {"sigma_db_per_km": 0.2, "eta": 0.18, "receiver_loss_db": 1.0,
                    "dark_count_prob": 5e-5, "baseline_error": 0.01},
        "grid": {"start": 0, "stop": 20, "step": 10},
        "curves": [
            {"label": "epr", "protocol": "ekert", "source": "ideal-epr"},
            {"label": "pdc", "protocol": "ekert", "source": "pdc", "chi": 0.2},
            {"label": "weak", "protocol": "bb84", "source": "poisson"}
        ]
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = RunConfig::from_json(SWEEP).unwrap();
        assert_eq!(cfg.curves[1].source, SourceSpec::Pdc { chi: Some(0.2) });
        assert_eq!(cfg.curves[2].source, SourceSpec::Poisson { nbar: None });
        assert_eq!(cfg.security, SecurityParams { s: 30, t: 30 });
        assert!(cfg.options.receiver_loss_per_arm);
        let again = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, again);
        let example = example_config();
        assert_eq!(RunConfig::from_json(&example.to_json().unwrap()).unwrap(), example);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            SWEEP.replace("\"protocol\": \"bb84\"", "\"protocol\": \"ekert\""),
            SWEEP.replace("\"step\": 10", "\"step\": 0"),
            SWEEP.replace("\"grid\"", "\"point\": 5, \"grid\""),
            SWEEP.replace("\"chi\": 0.2", "\"chi\": 0.2, \"nbar\": 1"),
            SWEEP.replace("\"eta\": 0.18", "\"eta\": 0.18, \"etta\": 1"),
            SWEEP.replace("\"eta\": 0.18", "\"eta\": 1.8"),
            "{".to_string(),
        ];
        for text in bad {
            assert!(matches!(RunConfig::from_json(&text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn csv_layout() {
        let cfg = RunConfig::from_json(SWEEP).unwrap();
        let results = cfg.run_sweep().unwrap();
        let text = csv_string(&results).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 1 + 3 * 3);
        assert!(lines[1].starts_with("epr,0,"));
        assert_eq!(text, csv_string(&cfg.run_sweep().unwrap()).unwrap());
    }

    #[test]
    fn key_budget_matches_hand_chain() {
        let mut cfg = RunConfig::from_json(SWEEP).unwrap();
        cfg.grid = None;
        cfg.point = Some(0.0);
        cfg.n_tot = 1000;
        cfg.channel = ChannelParams::new(0.2, 1.0, 0.0, 0.0, 0.0).unwrap();
        cfg.curves = vec![CurveSpec { label: "s".into(), protocol: Protocol::Bb84, source: SourceSpec::IdealSingle }];
        cfg.security = SecurityParams { s: 0, t: 0 };
        let r = cfg.run_point().unwrap();
        let b = r[0].budget.unwrap();
        assert_eq!((b.n_rec, b.r, b.kappa), (500, 500, 0.0));
        assert_eq!(r[0].point.rate, 0.5);
    }
}
