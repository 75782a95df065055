//! Scalar information-theoretic primitives shared by every protocol:
//! binary entropy, the error-correction cost model, the disturbance
//! measure, and the single-photon collision-probability bound.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x * log2(x)` with the convention `0 log 0 = 0`.
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Entropy of a single bit sent over a binary symmetric channel with
/// flip probability `e`.
pub fn binary_entropy(e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::domain("error rate", e));
    }
    Ok(-xlog2x(e) - xlog2x(1.0 - e))
}

/// Benchmarked inefficiency `f(e) >= 1` of a practical error-correction
/// protocol relative to the Shannon limit, tabulated against the error rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcBenchmarkTable {
    points: Vec<(f64, f64)>,
}

impl EcBenchmarkTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("error-correction table is empty".into()));
        }
        for (i, &(e, f)) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Config(format!("table row {i}: e = {e} outside [0, 1]")));
            }
            if !(f >= 1.0) {
                return Err(Error::Config(format!("table row {i}: f = {f} below 1")));
            }
            if i > 0 && e <= points[i - 1].0 {
                return Err(Error::Config(format!(
                    "table row {i}: error rates must be strictly increasing"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Reads a two-column CSV with header `e,f`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "e" || &headers[1] != "f" {
            return Err(Error::Config(format!(
                "error-correction table header must be `e,f`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for record in rdr.deserialize() {
            let (e, f): (f64, f64) = record?;
            points.push((e, f));
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("e,f\n");
        for (e, f) in &self.points {
            out.push_str(&format!("{e},{f}\n"));
        }
        out
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Piecewise-linear interpolation, clamped to the end values outside
    /// the tabulated range. Accepts any finite `e`.
    pub fn interpolate(&self, e: f64) -> f64 {
        let pts = &self.points;
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if e <= first.0 {
            return first.1;
        }
        if e >= last.0 {
            return last.1;
        }
        let k = pts.partition_point(|&(x, _)| x <= e);
        let (x0, y0) = pts[k - 1];
        let (x1, y1) = pts[k];
        if e == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (e - x0) / (x1 - x0)
    }
}

impl Default for EcBenchmarkTable {
    /// Benchmarks of the Brassard–Salvail reconciliation protocol.
    fn default() -> Self {
        Self {
            points: vec![(0.01, 1.16), (0.05, 1.16), (0.10, 1.22), (0.15, 1.35)],
        }
    }
}

/// Error-correction efficiency `f(e)` for `0 <= e < 1/2`.
pub fn ec_efficiency(e: f64, table: &EcBenchmarkTable) -> Result<f64> {
    if !(0.0..0.5).contains(&e) {
        return Err(Error::domain("error rate", e));
    }
    Ok(table.interpolate(e))
}

/// Asymptotic bits disclosed per reconciled bit, `f(e) h(e)`.
pub fn ec_leakage_per_bit(e: f64, table: &EcBenchmarkTable) -> Result<f64> {
    Ok(table.interpolate(e) * binary_entropy(e)?)
}

/// Counts gathered after reconciliation, used to estimate the disturbance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceRecord {
    pub n_rec: u64,
    pub n_err: u64,
    pub n_dual: u64,
    /// Weight given to dual-fire events; 1/2 suffices to cover
    /// multi-photon signals.
    pub w_dual: f64,
}

impl DisturbanceRecord {
    pub const DEFAULT_DUAL_WEIGHT: f64 = 0.5;

    pub fn new(n_rec: u64, n_err: u64, n_dual: u64, w_dual: f64) -> Result<Self> {
        if n_err > n_rec {
            return Err(Error::Config(format!(
                "error count {n_err} exceeds reconciled count {n_rec}"
            )));
        }
        if !(w_dual >= 0.0) {
            return Err(Error::domain("dual-fire weight", w_dual));
        }
        Ok(Self { n_rec, n_err, n_dual, w_dual })
    }
}

/// `(n_err + w_dual n_dual) / n_rec`.
pub fn disturbance(rec: &DisturbanceRecord) -> Result<f64> {
    if rec.n_rec == 0 {
        return Err(Error::domain("reconciled bit count", 0.0));
    }
    Ok((rec.n_err as f64 + rec.w_dual * rec.n_dual as f64) / rec.n_rec as f64)
}

/// Upper bound on Eve's single-photon collision probability given
/// disturbance `eps`. Saturates at 1 for `eps >= 1/2`, where Eve may hold
/// the whole key.
pub fn collision_bound(eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::domain("disturbance", eps));
    }
    if eps >= 0.5 {
        return Ok(1.0);
    }
    Ok(0.5 + 2.0 * eps - 2.0 * eps * eps)
}

/// Secure fraction per reconciled bit, `-log2 p_c(eps)`.
pub fn tau(eps: f64) -> Result<f64> {
    let pc = collision_bound(eps)?;
    Ok((-pc.log2()).max(0.0))
}

/// `tau` corrected for multi-photon emissions: `-beta log2 p_c(e / beta)`,
/// zero once `e / beta` reaches 1/2.
pub fn tau_multiphoton(e: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain("untagged fraction beta", beta));
    }
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::domain("error rate", e));
    }
    let scaled = e / beta;
    if scaled >= 0.5 {
        return Ok(0.0);
    }
    Ok(beta * tau(scaled)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn entropy_endpoints_and_midpoint() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        // 30-digit reference value
        assert_abs_diff_eq!(binary_entropy(0.11).unwrap(), 0.499_915_958_164_528, epsilon = 1e-14);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.01).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn table_values_and_interpolation() {
        let t = EcBenchmarkTable::default();
        assert_eq!(ec_efficiency(0.01, &t).unwrap(), 1.16);
        assert_eq!(ec_efficiency(0.05, &t).unwrap(), 1.16);
        assert_eq!(ec_efficiency(0.10, &t).unwrap(), 1.22);
        assert_eq!(ec_efficiency(0.15, &t).unwrap(), 1.35);
        assert_abs_diff_eq!(ec_efficiency(0.125, &t).unwrap(), 1.285, epsilon = 1e-12);
        // clamped outside the benchmarked range
        assert_eq!(ec_efficiency(0.0, &t).unwrap(), 1.16);
        assert_eq!(ec_efficiency(0.3, &t).unwrap(), 1.35);
        assert!(ec_efficiency(0.5, &t).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(matches!(EcBenchmarkTable::new(vec![]), Err(Error::Config(_))));
        assert!(EcBenchmarkTable::new(vec![(0.1, 0.9)]).is_err());
        assert!(EcBenchmarkTable::new(vec![(0.1, 1.2), (0.1, 1.3)]).is_err());
        let single = EcBenchmarkTable::new(vec![(0.1, 1.5)]).unwrap();
        assert_eq!(single.interpolate(0.0), 1.5);
        assert_eq!(single.interpolate(0.4), 1.5);
    }

    #[test]
    fn table_csv_roundtrip() {
        let t = EcBenchmarkTable::default();
        let back = EcBenchmarkTable::from_csv_reader(t.to_csv().as_bytes()).unwrap();
        assert_eq!(t, back);
        let bad = EcBenchmarkTable::from_csv_reader("x,y\n0.1,1.2\n".as_bytes());
        assert!(matches!(bad, Err(Error::Config(_))));
        let empty = EcBenchmarkTable::from_csv_reader("e,f\n".as_bytes());
        assert!(matches!(empty, Err(Error::Config(_))));
    }

    #[test]
    fn disturbance_examples() {
        let d = |n, e, dd| disturbance(&DisturbanceRecord::new(n, e, dd, 0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(d(1000, 50, 0), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(d(1000, 0, 20), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(d(100, 25, 10), 0.30, epsilon = 1e-15);
        let zero = DisturbanceRecord { n_rec: 0, n_err: 0, n_dual: 0, w_dual: 0.5 };
        assert!(disturbance(&zero).is_err());
        assert!(DisturbanceRecord::new(10, 11, 0, 0.5).is_err());
        assert!(DisturbanceRecord::new(10, 1, 0, -0.5).is_err());
    }

    #[test]
    fn collision_bound_and_tau_examples() {
        assert_eq!(collision_bound(0.0).unwrap(), 0.5);
        assert_eq!(collision_bound(0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(collision_bound(0.05).unwrap(), 0.595, epsilon = 1e-15);
        assert_eq!(collision_bound(0.7).unwrap(), 1.0);
        assert!(collision_bound(-0.01).is_err());

        assert_eq!(tau(0.0).unwrap(), 1.0);
        assert_eq!(tau(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(tau(0.05).unwrap(), 0.749_038_426_466_781, epsilon = 1e-13);
    }

    #[test]
    fn tau_multiphoton_examples() {
        assert_eq!(tau_multiphoton(0.02, 1.0).unwrap(), tau(0.02).unwrap());
        assert_abs_diff_eq!(tau_multiphoton(0.02, 1.0).unwrap(), 0.891_107_598_367_591, epsilon = 1e-13);
        assert_eq!(tau_multiphoton(0.3, 0.6).unwrap(), 0.0);
        assert_abs_diff_eq!(tau_multiphoton(0.02, 0.9).unwrap(), 0.791_786_486_491_013, epsilon = 1e-13);
        assert!(tau_multiphoton(0.02, 0.0).is_err());
        assert!(tau_multiphoton(0.02, -0.2).is_err());
    }

    proptest! {
        #[test]
        fn entropy_is_symmetric(e in 0.0f64..=1.0) {
            let diff = binary_entropy(e).unwrap() - binary_entropy(1.0 - e).unwrap();
            prop_assert!(diff.abs() <= 1e-12);
        }

        #[test]
        fn bound_monotone(a in 0.0f64..=0.5, b in 0.0f64..=0.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(collision_bound(lo).unwrap() <= collision_bound(hi).unwrap());
            prop_assert!(tau(lo).unwrap() >= tau(hi).unwrap());
        }

        #[test]
        fn multiphoton_never_helps(e in 0.0f64..=0.5, beta in 1e-6f64..=1.0) {
            prop_assert!(tau_multiphoton(e, beta).unwrap() <= tau(e).unwrap() + 1e-15);
        }
    }
}
