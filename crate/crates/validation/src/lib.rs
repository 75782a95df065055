//! The ten acceptance criteria of the rate library, each a function
//! returning a verdict with the measured values.

use std::path::PathBuf;

use qkdrate_core::config::csv_string;
use qkdrate_core::protocols::{cutoff_distance, optimize_source_param, rate_bb84};
use qkdrate_core::ratecore::{binary_entropy, tau};
use qkdrate_core::sources::bb84_stats;
use qkdrate_core::{security, verify};
use qkdrate_core::{ArmLoss, ChannelParams, EcBenchmarkTable, RateModel, RunConfig, SourceSpec};

const SEARCH_KM: (f64, f64) = (0.0, 600.0);

/// Verdict and a one-line measurement summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn fiber_model() -> RateModel {
    RateModel::new(ChannelParams::telecom_fiber())
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn cutoff_reproduction() -> Outcome {
    match cutoff_distance(&fiber_model(), &SourceSpec::IdealEpr, SEARCH_KM) {
        Ok(km) => outcome((155.0..=180.0).contains(&km), format!("cutoff {km:.1} km, band [155, 180] km")),
        Err(e) => outcome(false, e.to_string()),
    }
}

pub fn cutoff_ordering() -> Outcome {
    let model = fiber_model();
    let sources = [
        ("BB84 Poisson", SourceSpec::Poisson { nbar: None }),
        ("BB84 ideal", SourceSpec::IdealSingle),
        ("Ekert PDC", SourceSpec::Pdc { chi: None }),
        ("Ekert EPR", SourceSpec::IdealEpr),
    ];
    let mut km = Vec::new();
    for (name, src) in sources {
        match cutoff_distance(&model, &src, SEARCH_KM) {
            Ok(c) => km.push((name, c)),
            Err(e) => return outcome(false, format!("{name}: {e}")),
        }
    }
    let ok = km[0].1 < km[1].1 && km[1].1 < km[2].1 && km[2].1 <= km[3].1;
    let listing: Vec<String> = km.iter().map(|(n, c)| format!("{n} {c:.1}")).collect();
    outcome(ok, format!("{} km", listing.join(" < ")))
}

pub fn optimal_chi_below_one() -> Outcome {
    let model = fiber_model();
    let mut found = Vec::new();
    for d in [25.0, 50.0, 75.0, 100.0] {
        match optimize_source_param(&model, &SourceSpec::Pdc { chi: None }, d) {
            Ok(o) if !o.zero_rate => found.push((d, o.param)),
            Ok(_) => return outcome(false, format!("no positive rate at {d} km")),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let ok = found.iter().all(|&(_, chi)| chi > 0.0 && chi < 1.0);
    let listing: Vec<String> = found.iter().map(|(d, c)| format!("{d} km: {c:.4}")).collect();
    outcome(ok, format!("optimal chi {}", listing.join(", ")))
}

pub fn attack_bound() -> Outcome {
    let (gap, eps) = match verify::attack_maximum_deviation() {
        Ok(x) => x,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (excess, _) = security::attack_bound_grid_check(verify::ATTACK_GRID_POINTS);
    outcome(
        gap <= 1e-6 && excess <= 1e-9,
        format!("max |max - bound| = {gap:.2e} (at eps {eps:.2}), worst grid excess {excess:.2e}"),
    )
}

pub fn pdc_oracle() -> Outcome {
    match verify::pdc_comparison_table(8) {
        Ok(rows) => {
            let dev = rows.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
            let res = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
            outcome(
                rows.len() == 24 && dev <= 1e-6 && res < 1e-10,
                format!("{} points, max deviation {dev:.2e}, max residual {res:.2e}", rows.len()),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

pub fn dephasing() -> Outcome {
    match verify::dephasing_max_deviation() {
        Ok(d) => outcome(d < 1e-12, format!("max outcome-probability change {d:.2e}")),
        Err(e) => outcome(false, e.to_string()),
    }
}

pub fn privacy_amplification() -> Outcome {
    match verify::privacy_amp_margin() {
        Ok((margin, failures)) => {
            outcome(failures == 0, format!("{failures} failing cases, smallest margin {margin:.4e} bits"))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

pub fn multi_photon() -> Outcome {
    let min = verify::multiphoton_minimum();
    let edge: Vec<String> =
        (1..=3).map(|j| format!("({j},1)={}", security::multiphoton_ratio_bound(j, 1))).collect();
    outcome(
        min >= 1.0,
        format!("min over 2..10 = {min}; reported single-photon edge: {}", edge.join(" ")),
    )
}

pub fn trivial_limits() -> Outcome {
    let table = EcBenchmarkTable::default();
    let quiet = ChannelParams::new(0.2, 1.0, 0.0, 0.0, 0.0).expect("valid channel");
    let mut half_alpha = true;
    for a in [1.0, 0.5, 0.0143, 1e-4] {
        let s = bb84_stats(&SourceSpec::IdealSingle, ArmLoss::new(a).expect("alpha"), &quiet).expect("stats");
        half_alpha &= rate_bb84(&s, &table).clamped == a / 2.0;
    }
    let sym = (1..500)
        .map(|k| {
            let e = k as f64 / 1000.0;
            (binary_entropy(e).unwrap() - binary_entropy(1.0 - e).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    let t0 = tau(0.0).unwrap();
    let t_half = tau(0.5).unwrap();
    outcome(
        t0 == 1.0 && t_half == 0.0 && half_alpha && sym <= 1e-12,
        format!("tau(0)={t0}, tau(1/2)={t_half}, R=alpha/2 exact: {half_alpha}, h asymmetry {sym:.1e}"),
    )
}

pub fn determinism() -> Outcome {
    let cfg = match RunConfig::load(&configs_dir().join("fig3a_fiber.json")) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let run = || cfg.run_sweep().and_then(|r| csv_string(&r));
    match (run(), run()) {
        (Ok(a), Ok(b)) => outcome(a == b && !a.is_empty(), format!("{} bytes, identical: {}", a.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

/// One acceptance criterion with its runtime budget in seconds.
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub budget_secs: u64,
    pub check: fn() -> Outcome,
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "cutoff reproduction", budget_secs: 10, check: cutoff_reproduction },
    Criterion { id: 2, name: "cutoff ordering", budget_secs: 60, check: cutoff_ordering },
    Criterion { id: 3, name: "optimal chi below one", budget_secs: 30, check: optimal_chi_below_one },
    Criterion { id: 4, name: "attack-bound equivalence", budget_secs: 60, check: attack_bound },
    Criterion { id: 5, name: "PDC oracle equivalence", budget_secs: 300, check: pdc_oracle },
    Criterion { id: 6, name: "dephasing invariance", budget_secs: 60, check: dephasing },
    Criterion { id: 7, name: "privacy-amplification bound", budget_secs: 120, check: privacy_amplification },
    Criterion { id: 8, name: "multi-photon inequality", budget_secs: 1, check: multi_photon },
    Criterion { id: 9, name: "trivial limits", budget_secs: 1, check: trivial_limits },
    Criterion { id: 10, name: "determinism", budget_secs: 30, check: determinism },
];
