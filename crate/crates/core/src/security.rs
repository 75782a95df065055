//! Privacy-amplification key sizing and checks of the individual-attack
//! security argument: the symmetric single-photon attack family and its
//! collision-probability maximisation, the multi-photon dual-fire
//! inequality, and an exhaustive universal-hashing entropy oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratecore::{collision_bound, ec_leakage_per_bit, tau, EcBenchmarkTable};

/// Security margins chosen by Alice and Bob.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityParams {
    pub s: u32,
    pub t: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyBudget {
    pub n_rec: u64,
    pub tau: f64,
    pub kappa: f64,
    /// Final key length after privacy amplification.
    pub r: u64,
    /// Upper bound on Eve's expected information about the final key, bits.
    pub eve_info_bound: f64,
}

/// Bits leaked by error correction on `n_rec` bits at error rate `e`,
/// rounded up.
pub fn ec_leakage_bits(n_rec: u64, e: f64, table: &EcBenchmarkTable) -> Result<f64> {
    Ok((ec_leakage_per_bit(e, table)? * n_rec as f64).ceil())
}

/// Key budget for a given secure fraction `tau` per reconciled bit.
pub fn final_key_length_with_tau(n_rec: u64, tau: f64, kappa: f64, sec: SecurityParams) -> Result<KeyBudget> {
    if !(kappa >= 0.0) {
        return Err(Error::domain("kappa", kappa));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::domain("tau", tau));
    }
    let raw = n_rec as f64 * tau - kappa - sec.s as f64 - sec.t as f64;
    let r = if raw > 0.0 { raw.floor() as u64 } else { 0 };
    Ok(KeyBudget { n_rec, tau, kappa, r, eve_info_bound: eve_info_bound(r, sec) })
}

/// `r = max(0, floor(n_rec tau(eps) - kappa - s - t))`.
pub fn final_key_length(n_rec: u64, eps: f64, kappa: f64, sec: SecurityParams) -> Result<KeyBudget> {
    if n_rec == 0 {
        return Err(Error::domain("n_rec", 0.0));
    }
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::domain("disturbance", eps));
    }
    final_key_length_with_tau(n_rec, tau(eps)?, kappa, sec)
}

/// `2^-t r + 2^-s / ln 2`.
pub fn eve_info_bound(r: u64, sec: SecurityParams) -> f64 {
    (-(sec.t as f64)).exp2() * r as f64 + (-(sec.s as f64)).exp2() / std::f64::consts::LN_2
}

/// Markov bound on the probability that Eve's information reaches
/// `threshold` bits.
pub fn markov_leak_probability(i_e: f64, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::domain("threshold", threshold));
    }
    if !(i_e >= 0.0) {
        return Err(Error::domain("expected information", i_e));
    }
    Ok((i_e / threshold).min(1.0))
}

/// Symmetric single-photon attack with real probe projections. Norms of
/// the probe states for matching (`n_xx`) and crossed (`n_xy`)
/// polarizations, and the angles of the overlaps `<P_xx|P_yy>` and
/// `<P_xy|P_yx>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub n_xx: f64,
    pub n_xy: f64,
    pub phi_xx_yy: f64,
    pub phi_xy_yx: f64,
}

impl AttackParams {
    fn check(&self) -> Result<()> {
        if !(self.n_xx >= 0.0 && self.n_xy >= 0.0) {
            return Err(Error::domain("probe norm", self.n_xx.min(self.n_xy)));
        }
        if !(self.n_xx + self.n_xy > 0.0) {
            return Err(Error::domain("total probe norm", 0.0));
        }
        Ok(())
    }
}

fn epsilon_from_cos(n_xx: f64, n_xy: f64, c1: f64, c2: f64) -> f64 {
    (n_xx * (1.0 - c1) + n_xy * (3.0 - c2)) / (4.0 * (n_xx + n_xy))
}

fn collision_from_cos(n_xx: f64, n_xy: f64, c1: f64, c2: f64) -> f64 {
    let total = n_xx + n_xy;
    // 0/0 at the edges of the angle box: the numerator vanishes faster
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let plus = ratio((1.0 + c1) * (1.0 + c2), n_xx * (1.0 + c1) + n_xy * (1.0 + c2));
    let minus = ratio((1.0 - c1) * (1.0 - c2), n_xx * (1.0 - c1) + n_xy * (1.0 - c2));
    0.75 - (n_xx * c1 * c1 + n_xy * c2 * c2) / (4.0 * total)
        + n_xx * n_xy / (2.0 * total) * (plus + minus)
}

/// Disturbance caused by the attack.
pub fn attack_epsilon(a: &AttackParams) -> Result<f64> {
    a.check()?;
    Ok(epsilon_from_cos(a.n_xx, a.n_xy, a.phi_xx_yy.cos(), a.phi_xy_yx.cos()))
}

/// Collision probability bound for the attack after the Cauchy–Schwarz
/// step, as a function of the four attack parameters.
pub fn attack_collision(a: &AttackParams) -> Result<f64> {
    a.check()?;
    Ok(collision_from_cos(a.n_xx, a.n_xy, a.phi_xx_yy.cos(), a.phi_xy_yx.cos()))
}

/// Attack parameters normalised to unit total norm, with the crossed-pair
/// angle solved from the disturbance constraint. `None` when infeasible.
fn constrained_attack(eps: f64, w: f64, c1: f64) -> Option<(f64, f64, f64, f64)> {
    let (n_xx, n_xy) = (w, 1.0 - w);
    if n_xy <= 0.0 {
        let c1 = 1.0 - 4.0 * eps;
        return (-1.0..=1.0).contains(&c1).then_some((1.0, 0.0, c1, 1.0));
    }
    let c2 = 3.0 - (4.0 * eps - n_xx * (1.0 - c1)) / n_xy;
    (-1.0..=1.0).contains(&c2).then_some((n_xx, n_xy, c1, c2))
}

/// Maximises [`attack_collision`] over the symmetric attacks with
/// disturbance exactly `eps`. Returns the maximiser and its value.
pub fn maximize_attack_collision(eps: f64) -> Result<(AttackParams, f64)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain("disturbance", eps));
    }
    let value = |w: f64, c1: f64| -> f64 {
        match constrained_attack(eps, w, c1) {
            Some((a, b, c1, c2)) => collision_from_cos(a, b, c1, c2),
            None => f64::NEG_INFINITY,
        }
    };

    const N: usize = 201;
    let (mut best_w, mut best_c, mut best_v) = (0.0, 1.0, f64::NEG_INFINITY);
    for i in 0..N {
        let w = i as f64 / (N - 1) as f64;
        for j in 0..N {
            let c1 = -1.0 + 2.0 * j as f64 / (N - 1) as f64;
            let v = value(w, c1);
            if v > best_v {
                (best_w, best_c, best_v) = (w, c1, v);
            }
        }
    }
    if !best_v.is_finite() {
        return Err(Error::domain("disturbance (no feasible attack)", eps));
    }

    // compass search, shrinking the step on failure
    let mut step = 1.0 / (N - 1) as f64;
    while step > 1e-12 {
        let mut improved = false;
        for (dw, dc) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step), (step, step), (-step, -step), (step, -step), (-step, step)] {
            let (w, c) = ((best_w + dw).clamp(0.0, 1.0), (best_c + dc).clamp(-1.0, 1.0));
            let v = value(w, c);
            if v > best_v {
                (best_w, best_c, best_v) = (w, c, v);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let (n_xx, n_xy, c1, c2) =
        constrained_attack(eps, best_w, best_c).expect("maximiser stays feasible");
    let params = AttackParams { n_xx, n_xy, phi_xx_yy: c1.acos(), phi_xy_yx: c2.acos() };
    Ok((params, best_v))
}

/// Largest excess of [`attack_collision`] over `collision_bound(attack_epsilon)`
/// on an `n^3` grid: norm ratio log-spaced in `[1e-3, 1e3]`, both angles in
/// `[0, pi]`. Returns the excess and the attack where it occurs.
pub fn attack_bound_grid_check(n: usize) -> (f64, AttackParams) {
    assert!(n >= 2, "grid needs at least two points per axis");
    let ratio = |i: usize| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64);
    let angle = |j: usize| std::f64::consts::PI * j as f64 / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = (f64::NEG_INFINITY, AttackParams { n_xx: 0.0, n_xy: 1.0, phi_xx_yy: 0.0, phi_xy_yx: 0.0 });
            for j in 0..n {
                for k in 0..n {
                    let a = AttackParams { n_xx: ratio(i), n_xy: 1.0, phi_xx_yy: angle(j), phi_xy_yx: angle(k) };
                    let eps = attack_epsilon(&a).expect("positive norm");
                    let excess = attack_collision(&a).expect("positive norm")
                        - collision_bound(eps).expect("non-negative disturbance");
                    if excess > worst.0 {
                        worst = (excess, a);
                    }
                }
            }
            worst
        })
        .reduce_with(|x, y| if y.0 > x.0 { y } else { x })
        .expect("non-empty grid")
}

/// Lower bound on `p_D / p_rec` when Eve sends `i` photons to Alice and `j`
/// to Bob: `[(1/2 - 2^-i) / 2^-i] * [(1/2 - 2^-j) / 2^-j]`.
pub fn multiphoton_ratio_bound(i: u32, j: u32) -> f64 {
    let side = |n: u32| {
        let p = (-(n as f64)).exp2();
        (0.5 - p) / p
    };
    side(i) * side(j)
}

/// Outcome of the privacy-amplification entropy check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaCheck {
    /// `H(K|G)` averaged over the hash family.
    pub lhs: f64,
    /// `r - 2^r p_c^n / ln 2`.
    pub rhs: f64,
    pub holds: bool,
    /// Number of hash functions evaluated.
    pub functions: u64,
    pub exhaustive: bool,
}

const PA_EXHAUSTIVE_MAX_N: u32 = 6;
const PA_MAX_N: u32 = 12;
const PA_SAMPLED_SEEDS: u64 = 10_000;
const PA_SAMPLING_SEED: u64 = 0x5eed_2001;

/// Rows of the `r x n` binary Toeplitz matrix built from `n + r - 1` seed
/// bits, as bit masks over the input.
fn toeplitz_rows(seed: u64, n: u32, r: u32) -> Vec<u64> {
    (0..r)
        .map(|i| {
            (0..n).fold(0u64, |mask, j| {
                let bit = (seed >> (i + n - 1 - j)) & 1;
                mask | (bit << j)
            })
        })
        .collect()
}

fn hash_output(rows: &[u64], x: u64) -> usize {
    rows.iter()
        .enumerate()
        .fold(0usize, |y, (i, &m)| y | ((((m & x).count_ones() & 1) as usize) << i))
}

fn shannon_bits(dist: &[f64]) -> f64 {
    -dist.iter().map(|&p| crate::ratecore::xlog2x(p)).sum::<f64>()
}

/// Checks `H(K|G) >= r - 2^r p_c^n / ln 2` for a product source of `n`
/// independent bits with single-bit collision probability `per_bit_pc`,
/// hashed to `r` bits by the universal family of binary Toeplitz maps.
/// The family is enumerated completely for `n <= 6` and sampled with a
/// fixed seed for `n <= 12`.
pub fn pa_entropy_bound_check(n: u32, per_bit_pc: f64, r: u32) -> Result<PaCheck> {
    if n == 0 || n > PA_MAX_N {
        return Err(Error::Resource(format!("exhaustive oracle supports 1 <= n <= {PA_MAX_N}, got {n}")));
    }
    if r > n {
        return Err(Error::domain("output length r", r as f64));
    }
    if !(0.5..=1.0).contains(&per_bit_pc) {
        return Err(Error::domain("per-bit collision probability", per_bit_pc));
    }
    // q^2 + (1-q)^2 = p_c
    let q = 0.5 * (1.0 + (2.0 * per_bit_pc - 1.0).max(0.0).sqrt());
    let probs: Vec<f64> = (0..1u64 << n)
        .map(|x| {
            let ones = x.count_ones() as i32;
            q.powi(n as i32 - ones) * (1.0 - q).powi(ones)
        })
        .collect();

    let rhs = r as f64 - (r as f64).exp2() * per_bit_pc.powi(n as i32) / std::f64::consts::LN_2;
    if r == 0 {
        return Ok(PaCheck { lhs: 0.0, rhs, holds: 0.0 >= rhs, functions: 1, exhaustive: true });
    }

    let entropy_for = |seed: u64| -> f64 {
        let rows = toeplitz_rows(seed, n, r);
        let mut out = vec![0.0; 1 << r];
        for (x, &p) in probs.iter().enumerate() {
            out[hash_output(&rows, x as u64)] += p;
        }
        shannon_bits(&out)
    };

    let seed_bits = n + r - 1;
    let (seeds, exhaustive): (Vec<u64>, bool) = if n <= PA_EXHAUSTIVE_MAX_N {
        ((0..1u64 << seed_bits).collect(), true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(PA_SAMPLING_SEED ^ ((n as u64) << 8) ^ r as u64);
        let mask = (1u64 << seed_bits) - 1;
        ((0..PA_SAMPLED_SEEDS).map(|_| rng.random::<u64>() & mask).collect(), false)
    };
    let total: f64 = seeds.iter().map(|&s| entropy_for(s)).sum();
    let lhs = total / seeds.len() as f64;
    Ok(PaCheck { lhs, rhs, holds: lhs >= rhs - 1e-12, functions: seeds.len() as u64, exhaustive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    #[test]
    fn key_length_examples() {
        let none = SecurityParams::default();
        let b = final_key_length(1000, 0.0, 0.0, none).unwrap();
        assert_eq!(b.r, 1000);

        let table = EcBenchmarkTable::default();
        let kappa = ec_leakage_bits(1000, 0.05, &table).unwrap();
        assert_eq!(kappa, 333.0);
        let b = final_key_length(1000, 0.05, kappa, SecurityParams { s: 30, t: 30 }).unwrap();
        assert_abs_diff_eq!(b.tau, 0.749_038_426_466_781, epsilon = 1e-13);
        assert_eq!(b.r, 356);

        let b = final_key_length(100, 0.5, 0.0, none).unwrap();
        assert_eq!(b.r, 0);
        assert!(final_key_length(0, 0.1, 0.0, none).is_err());
        assert!(final_key_length(10, 0.6, 0.0, none).is_err());
    }

    #[test]
    fn eve_info_examples() {
        let sec = SecurityParams { s: 30, t: 30 };
        assert_relative_eq!(eve_info_bound(357, sec), 3.338_257_735_975_915e-7, max_relative = 1e-12);
        let sec = SecurityParams { s: 60, t: 0 };
        assert_relative_eq!(eve_info_bound(0, sec), 1.251_338_478_052_702e-18, max_relative = 1e-12);
        let sec = SecurityParams { s: 10_000, t: 0 };
        assert_eq!(eve_info_bound(0, sec), 0.0);
        assert_relative_eq!(eve_info_bound(1000, SecurityParams::default()), 1_001.442_695_040_889, max_relative = 1e-14);
    }

    #[test]
    fn eve_info_halves_with_t() {
        for t in 0..40 {
            let r = 1_000_000;
            let a = eve_info_bound(r, SecurityParams { s: 200, t });
            let b = eve_info_bound(r, SecurityParams { s: 200, t: t + 1 });
            assert_relative_eq!(b / a, 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn markov_examples() {
        assert_relative_eq!(markov_leak_probability(3.338e-7, 1.0).unwrap(), 3.338e-7);
        assert_eq!(markov_leak_probability(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(markov_leak_probability(5.0, 1.0).unwrap(), 1.0);
        assert!(markov_leak_probability(1.0, 0.0).is_err());
    }

    #[test]
    fn key_length_monotone() {
        let base = |n, eps, kappa, s, t| final_key_length(n, eps, kappa, SecurityParams { s, t }).unwrap().r;
        let mut prev = u64::MAX;
        for k in 0..=50 {
            let r = base(10_000, k as f64 * 0.01, 100.0, 10, 10);
            assert!(r <= prev);
            prev = r;
        }
        assert!(base(10_000, 0.05, 200.0, 10, 10) <= base(10_000, 0.05, 100.0, 10, 10));
        assert!(base(10_000, 0.05, 100.0, 20, 10) <= base(10_000, 0.05, 100.0, 10, 10));
        assert!(base(10_000, 0.05, 100.0, 10, 20) <= base(10_000, 0.05, 100.0, 10, 10));
        assert!(base(20_000, 0.05, 100.0, 10, 10) >= base(10_000, 0.05, 100.0, 10, 10));
    }

    #[test]
    fn attack_epsilon_examples() {
        let identity = AttackParams { n_xx: 1.0, n_xy: 0.0, phi_xx_yy: 0.0, phi_xy_yx: 0.0 };
        assert_eq!(attack_epsilon(&identity).unwrap(), 0.0);
        assert_eq!(attack_collision(&identity).unwrap(), 0.5);

        let full = AttackParams { n_xx: 1.0, n_xy: 1.0, phi_xx_yy: PI / 2.0, phi_xy_yx: PI / 2.0 };
        assert_abs_diff_eq!(attack_epsilon(&full).unwrap(), 0.5, epsilon = 1e-15);

        for eps in [0.01, 0.2, 0.5] {
            let a = AttackParams { n_xx: 1.0, n_xy: 0.0, phi_xx_yy: (1.0f64 - 2.0 * eps).acos(), phi_xy_yx: 0.3 };
            // with n_xy = 0 the disturbance is (1 - cos)/4
            assert_abs_diff_eq!(attack_epsilon(&a).unwrap(), eps / 2.0, epsilon = 1e-15);
        }

        let zero = AttackParams { n_xx: 0.0, n_xy: 0.0, phi_xx_yy: 0.0, phi_xy_yx: 0.0 };
        assert!(attack_epsilon(&zero).is_err());
        assert!(attack_collision(&zero).is_err());
    }

    #[test]
    fn stated_maximiser_reaches_the_bound() {
        for k in 1..50 {
            let eps = k as f64 * 0.01;
            let c = 1.0 - 2.0 * eps;
            let a = AttackParams { n_xx: (1.0 - eps) / eps, n_xy: 1.0, phi_xx_yy: c.acos(), phi_xy_yx: c.acos() };
            assert_abs_diff_eq!(attack_epsilon(&a).unwrap(), eps, epsilon = 1e-14);
            assert_abs_diff_eq!(attack_collision(&a).unwrap(), collision_bound(eps).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn maximisation_examples() {
        let (_, v) = maximize_attack_collision(0.05).unwrap();
        assert_abs_diff_eq!(v, 0.595, epsilon = 1e-6);

        let (a, v) = maximize_attack_collision(0.25).unwrap();
        assert_abs_diff_eq!(v, 0.875, epsilon = 1e-6);
        assert_abs_diff_eq!(a.phi_xx_yy.cos(), 0.5, epsilon = 1e-3);
        assert_abs_diff_eq!(a.phi_xy_yx.cos(), 0.5, epsilon = 1e-3);
        assert_abs_diff_eq!(a.n_xx / a.n_xy, 3.0, epsilon = 1e-2);
        assert_abs_diff_eq!(attack_epsilon(&a).unwrap(), 0.25, epsilon = 1e-12);

        let (_, v) = maximize_attack_collision(1e-6).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-5);

        assert!(maximize_attack_collision(0.0).is_err());
        assert!(maximize_attack_collision(0.5).is_err());
    }

    #[test]
    fn grid_never_beats_bound_coarse() {
        let (excess, _) = attack_bound_grid_check(50);
        assert!(excess <= 1e-9, "excess {excess}");
    }

    #[test]
    fn multiphoton_examples() {
        assert_eq!(multiphoton_ratio_bound(2, 2), 1.0);
        assert_eq!(multiphoton_ratio_bound(3, 3), 9.0);
        assert_eq!(multiphoton_ratio_bound(2, 1), 0.0);
        for i in 2..=10 {
            for j in 2..=10 {
                assert!(multiphoton_ratio_bound(i, j) >= 1.0);
            }
        }
    }

    #[test]
    fn toeplitz_structure() {
        // constant along diagonals
        let rows = toeplitz_rows(0b1011_0110, 5, 4);
        for i in 1..4 {
            for j in 1..5 {
                assert_eq!((rows[i] >> j) & 1, (rows[i - 1] >> (j - 1)) & 1);
            }
        }
    }

    #[test]
    fn pa_uniform_source() {
        let c = pa_entropy_bound_check(4, 0.5, 2).unwrap();
        assert!(c.holds);
        assert!(c.exhaustive);
        assert_eq!(c.functions, 32);
        // uniform input: H(GX) equals rank(G); the zero map drags the mean below 2
        assert!(c.lhs > 1.5 && c.lhs < 2.0);
    }

    #[test]
    fn pa_examples_and_errors() {
        assert!(pa_entropy_bound_check(6, 0.595, 2).unwrap().holds);
        let vacuous = pa_entropy_bound_check(6, 0.9, 1).unwrap();
        assert!(vacuous.rhs < 0.0 && vacuous.holds);
        let sampled = pa_entropy_bound_check(8, 0.75, 3).unwrap();
        assert!(!sampled.exhaustive && sampled.holds);
        assert_eq!(sampled.functions, 10_000);
        assert!(matches!(pa_entropy_bound_check(13, 0.5, 1), Err(Error::Resource(_))));
        assert!(pa_entropy_bound_check(4, 0.4, 1).is_err());
        assert!(pa_entropy_bound_check(4, 0.5, 5).is_err());
    }
}
