//! Brute-force occupation-number oracle for the down-converter state.
//!
//! The two-mode-pair squeezed state is expanded up to a fixed number of
//! pairs, pushed through beamsplitter loss by exact expansion of
//! creation-operator monomials, and reduced to per-photon-number sector
//! densities after tracing out the loss modes. Nothing here reuses the
//! closed forms in [`crate::sources`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ArmLoss;
use crate::error::{Error, Result};
use crate::sources::PdcCoefficients;

pub const MODES: usize = 8;

/// Occupation numbers of the eight modes, indexed by the constants below.
pub type Occupation = [u8; MODES];

pub const AX: usize = 0;
pub const AY: usize = 1;
pub const BX: usize = 2;
pub const BY: usize = 3;
pub const CX: usize = 4;
pub const CY: usize = 5;
pub const DX: usize = 6;
pub const DY: usize = 7;

/// Largest pair number the expansion accepts.
pub const DEFAULT_PAIR_CAP: u32 = 8;
const MAX_BASIS_STATES: usize = 2_000_000;

/// Tolerances for the sector decomposition checks.
pub const DECOMPOSITION_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Amplitudes over occupation-number states of the signal modes
/// `a`, `b` and loss modes `c`, `d`, both polarizations each.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: BTreeMap<Occupation, Complex64>,
    n_max: u32,
    tail_bound: f64,
}

impl FockVector {
    /// Arbitrary state from explicit amplitudes (not renormalised).
    pub fn from_amplitudes(amps: impl IntoIterator<Item = (Occupation, Complex64)>) -> Self {
        let mut map = BTreeMap::new();
        for (occ, a) in amps {
            *map.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        let n_max = map
            .keys()
            .map(|o| o.iter().map(|&n| n as u32).sum::<u32>())
            .max()
            .unwrap_or(0);
        Self { amps: map, n_max, tail_bound: 0.0 }
    }

    pub fn amplitude(&self, occ: &Occupation) -> Complex64 {
        self.amps.get(occ).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.amps.iter()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Bound on the probability weight dropped by truncation.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn norm_sqr(&self) -> f64 {
        kahan_sum(self.amps.values().map(|a| a.norm_sqr()))
    }
}

fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `exp(tanh(chi) (a_x+ b_y+ + a_y+ b_x+)) |0> / cosh^2(chi)` truncated to
/// at most `n_max` pairs.
pub fn build_pdc_state(chi: f64, n_max: u32) -> Result<FockVector> {
    if n_max == 0 {
        return Err(Error::domain("pair cap n_max", 0.0));
    }
    if n_max > DEFAULT_PAIR_CAP {
        return Err(Error::Resource(format!(
            "pair cap {n_max} exceeds the supported maximum {DEFAULT_PAIR_CAP}"
        )));
    }
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::domain("chi", chi));
    }
    let t = chi.tanh();
    let norm = chi.cosh().powi(-2);
    let mut amps = BTreeMap::new();
    // the two creation terms commute, so the exponential factorises and
    // (t a+ b+)^n / n! |0> = t^n |n, n>
    for n1 in 0..=n_max {
        for n2 in 0..=(n_max - n1) {
            let mut occ = [0u8; MODES];
            occ[AX] = n1 as u8;
            occ[BY] = n1 as u8;
            occ[AY] = n2 as u8;
            occ[BX] = n2 as u8;
            amps.insert(occ, Complex64::new(norm * t.powi((n1 + n2) as i32), 0.0));
        }
    }
    let x = t * t;
    let tail_bound = x.powi(n_max as i32 + 1) * (n_max as f64 + 2.0);
    Ok(FockVector { amps, n_max, tail_bound })
}

/// Linear map on creation operators: input mode `k` goes to
/// `sum_j coeff * out_j+`.
type ModeMap = [Vec<(usize, f64)>; MODES];

/// Applies a linear mode transformation by expanding every monomial
/// `prod_k (a_k+)^{n_k} / sqrt(n_k!)`.
fn transform_modes(
    amps: &BTreeMap<Occupation, Complex64>,
    map: &ModeMap,
) -> Result<BTreeMap<Occupation, Complex64>> {
    let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
    for (occ, &amp) in amps {
        let input_norm: f64 = occ.iter().map(|&n| factorial(n as u32)).product::<f64>().sqrt();
        // coefficients of the output creation monomial (not yet normalised)
        let mut poly: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        poly.insert([0u8; MODES], amp / input_norm);
        for (mode, &n) in occ.iter().enumerate() {
            for _ in 0..n {
                let mut next: BTreeMap<Occupation, Complex64> = BTreeMap::new();
                for (mono, &c) in &poly {
                    for &(target, coeff) in map[mode].iter().filter(|(_, c)| *c != 0.0) {
                        let mut m = *mono;
                        m[target] += 1;
                        *next.entry(m).or_default() += c * coeff;
                    }
                }
                poly = next;
            }
        }
        for (mono, c) in poly {
            let fock_norm: f64 = mono.iter().map(|&n| factorial(n as u32)).product::<f64>().sqrt();
            *out.entry(mono).or_default() += c * fock_norm;
        }
        if out.len() > MAX_BASIS_STATES {
            return Err(Error::Resource(format!(
                "mode transformation exceeded {MAX_BASIS_STATES} basis states"
            )));
        }
    }
    Ok(out)
}

fn loss_map(alpha: f64) -> ModeMap {
    let (t, r) = (alpha.sqrt(), (1.0 - alpha).sqrt());
    [
        vec![(AX, t), (CX, r)],
        vec![(AY, t), (CY, r)],
        vec![(BX, t), (DX, r)],
        vec![(BY, t), (DY, r)],
        vec![(CX, 1.0)],
        vec![(CY, 1.0)],
        vec![(DX, 1.0)],
        vec![(DY, 1.0)],
    ]
}

/// Signal-mode occupations `(a_x, a_y, b_x, b_y)`.
pub type SignalOccupation = [u8; 4];

/// Pure conditional signal state for one configuration of the loss modes.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBranch {
    pub loss: [u8; 4],
    pub signal: Vec<(SignalOccupation, Complex64)>,
}

/// Applies equal loss `alpha` to every signal mode and groups the result by
/// loss-mode occupation. Tracing the loss modes out leaves the incoherent
/// mixture of these branches.
pub fn apply_loss(state: &FockVector, alpha: ArmLoss) -> Result<Vec<LossBranch>> {
    if state.n_max() > 2 * DEFAULT_PAIR_CAP {
        return Err(Error::Resource(format!("state with {} photons is too large", state.n_max())));
    }
    let lossy = transform_modes(&state.amps, &loss_map(alpha.alpha()))?;
    let mut groups: BTreeMap<[u8; 4], Vec<(SignalOccupation, Complex64)>> = BTreeMap::new();
    for (occ, amp) in lossy {
        let loss = [occ[CX], occ[CY], occ[DX], occ[DY]];
        groups.entry(loss).or_default().push(([occ[AX], occ[AY], occ[BX], occ[BY]], amp));
    }
    Ok(groups.into_iter().map(|(loss, signal)| LossBranch { loss, signal }).collect())
}

/// Reduced density of the block with `i` photons at Alice and `j` at Bob.
/// Basis states are ordered by `a_y` count then `b_y` count, so sector
/// (1, 1) is ordered `xx, xy, yx, yy` and sector (1, 0) is `x, y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDensity {
    pub i: u8,
    pub j: u8,
    pub basis: Vec<SignalOccupation>,
    pub matrix: DMatrix<Complex64>,
}

impl SectorDensity {
    fn empty(i: u8, j: u8) -> Self {
        let mut basis = Vec::with_capacity((i as usize + 1) * (j as usize + 1));
        for ay in 0..=i {
            for by in 0..=j {
                basis.push([i - ay, ay, j - by, by]);
            }
        }
        let dim = basis.len();
        Self { i, j, basis, matrix: DMatrix::zeros(dim, dim) }
    }

    fn index(&self, occ: &SignalOccupation) -> usize {
        occ[AY] as usize * (self.j as usize + 1) + occ[BY] as usize
    }

    /// Sector probability.
    pub fn weight(&self) -> f64 {
        kahan_sum((0..self.matrix.nrows()).map(|k| self.matrix[(k, k)].re))
    }

    /// Smallest eigenvalue of the Hermitian sector matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = SymmetricEigen::new(self.matrix.clone());
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn sector_of(occ: &SignalOccupation) -> (u8, u8) {
    (occ[0] + occ[1], occ[2] + occ[3])
}

/// Loss followed by the partial trace over `c`, `d`: one density per
/// photon-number sector `(i, j)`, sorted by `(i, j)`.
pub fn apply_loss_and_trace(state: &FockVector, alpha: ArmLoss) -> Result<Vec<SectorDensity>> {
    let branches = apply_loss(state, alpha)?;
    let mut sectors: BTreeMap<(u8, u8), SectorDensity> = BTreeMap::new();
    for branch in &branches {
        let mut by_sector: BTreeMap<(u8, u8), Vec<(SignalOccupation, Complex64)>> = BTreeMap::new();
        for &(occ, amp) in &branch.signal {
            by_sector.entry(sector_of(&occ)).or_default().push((occ, amp));
        }
        for ((i, j), terms) in by_sector {
            let sector = sectors.entry((i, j)).or_insert_with(|| SectorDensity::empty(i, j));
            for &(o1, a1) in &terms {
                let r = sector.index(&o1);
                for &(o2, a2) in &terms {
                    let c = sector.index(&o2);
                    sector.matrix[(r, c)] += a1 * a2.conj();
                }
            }
        }
    }
    Ok(sectors.into_values().collect())
}

/// Coefficients recovered from the sector densities, with the residuals of
/// the structural checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdcExtraction {
    pub coefficients: PdcCoefficients,
    /// `|| rho_11 - A psi+ - D I/4 ||_F`.
    pub residual: f64,
    /// `|weight(1,0) - weight(0,1)|`.
    pub single_asymmetry: f64,
    /// `|| rho_10 - C I/2 ||_F`.
    pub single_polarization_deviation: f64,
    pub total_weight: f64,
}

fn find(sectors: &[SectorDensity], i: u8, j: u8) -> SectorDensity {
    sectors
        .iter()
        .find(|s| s.i == i && s.j == j)
        .cloned()
        .unwrap_or_else(|| SectorDensity::empty(i, j))
}

/// Reads `A`, `B`, `C`, `D` off the low sectors and verifies that they have
/// the entangled-plus-white-noise structure the closed forms assume.
pub fn extract_pdc_coefficients(sectors: &[SectorDensity]) -> Result<PdcExtraction> {
    let vac = find(sectors, 0, 0);
    let s10 = find(sectors, 1, 0);
    let s01 = find(sectors, 0, 1);
    let s11 = find(sectors, 1, 1);

    let b = vac.weight();
    let c = s10.weight();
    let single_asymmetry = (c - s01.weight()).abs();
    let half = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(c / 2.0, 0.0);
    let single_polarization_deviation = (&s10.matrix - half).norm();
    if single_asymmetry > SYMMETRY_TOL || single_polarization_deviation > SYMMETRY_TOL {
        return Err(Error::Decomposition {
            residual: single_asymmetry.max(single_polarization_deviation),
            tolerance: SYMMETRY_TOL,
        });
    }

    // psi+ = (|xy> + |yx>)/sqrt(2) in the xx, xy, yx, yy ordering
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = nalgebra::DVector::from_vec(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(0.0, 0.0),
    ]);
    let fidelity = (psi.adjoint() * &s11.matrix * &psi)[(0, 0)].re;
    let trace = s11.weight();
    let a = (4.0 * fidelity - trace) / 3.0;
    let d = trace - a;
    let model = &psi * psi.adjoint() * Complex64::new(a, 0.0)
        + DMatrix::<Complex64>::identity(4, 4) * Complex64::new(d / 4.0, 0.0);
    let residual = (&s11.matrix - model).norm();
    if residual > DECOMPOSITION_TOL {
        return Err(Error::Decomposition { residual, tolerance: DECOMPOSITION_TOL });
    }

    Ok(PdcExtraction {
        coefficients: PdcCoefficients { a, b, c, d },
        residual,
        single_asymmetry,
        single_polarization_deviation,
        total_weight: kahan_sum(sectors.iter().map(SectorDensity::weight)),
    })
}

/// Oracle coefficients for one `(chi, alpha)` point.
pub fn oracle_pdc_coefficients(chi: f64, alpha: ArmLoss, n_max: u32) -> Result<PdcExtraction> {
    let state = build_pdc_state(chi, n_max)?;
    extract_pdc_coefficients(&apply_loss_and_trace(&state, alpha)?)
}

/// Passive-modulation receivers: each photon meets a 50/50 beamsplitter,
/// then an x/y or a u/v polarizing analyser. Output modes are
/// `a:X, a:Y, a:U, a:V, b:X, b:Y, b:U, b:V`.
fn receiver_map() -> ModeMap {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        vec![(0, h), (2, 0.5), (3, 0.5)],
        vec![(1, h), (2, 0.5), (3, -0.5)],
        vec![(4, h), (6, 0.5), (7, 0.5)],
        vec![(5, h), (6, 0.5), (7, -0.5)],
        vec![],
        vec![],
        vec![],
        vec![],
    ]
}

fn click_pattern(occ: &Occupation) -> usize {
    occ.iter().enumerate().fold(0, |p, (k, &n)| if n > 0 { p | (1 << k) } else { p })
}

/// Click-pattern distribution over the eight receiver detectors for an
/// incoherent mixture of pure signal branches.
fn click_distribution<'a>(
    branches: impl IntoIterator<Item = &'a [(SignalOccupation, Complex64)]>,
) -> Result<Vec<f64>> {
    let map = receiver_map();
    let mut probs = vec![0.0; 1 << MODES];
    for branch in branches {
        let amps: BTreeMap<Occupation, Complex64> = branch
            .iter()
            .map(|(s, a)| ([s[0], s[1], s[2], s[3], 0, 0, 0, 0], *a))
            .collect();
        for (occ, amp) in transform_modes(&amps, &map)? {
            probs[click_pattern(&occ)] += amp.norm_sqr();
        }
    }
    Ok(probs)
}

/// Largest change in any detection-outcome probability when the state
/// after loss is replaced by its photon-number block-diagonal part.
pub fn dephasing_invariance_check(state: &FockVector, alpha: ArmLoss) -> Result<f64> {
    let branches = apply_loss(state, alpha)?;
    let coherent = click_distribution(branches.iter().map(|b| b.signal.as_slice()))?;

    let mut blocks: Vec<Vec<(SignalOccupation, Complex64)>> = Vec::new();
    for b in &branches {
        let mut by_sector: BTreeMap<(u8, u8), Vec<(SignalOccupation, Complex64)>> = BTreeMap::new();
        for &(occ, amp) in &b.signal {
            by_sector.entry(sector_of(&occ)).or_default().push((occ, amp));
        }
        blocks.extend(by_sector.into_values());
    }
    let dephased = click_distribution(blocks.iter().map(Vec::as_slice))?;

    Ok(coherent
        .iter()
        .zip(&dephased)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max))
}
