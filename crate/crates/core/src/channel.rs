//! Loss, transmission, and dark-count model shared by all protocols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the link and the receiving hardware.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub sigma_db_per_km: f64,
    /// Detector quantum efficiency.
    pub eta: f64,
    /// Fixed loss inside one receiver unit.
    pub receiver_loss_db: f64,
    /// Dark-count probability per detector per gate.
    pub dark_count_prob: f64,
    /// Intrinsic error rate of signal photons (optics, channel distortion).
    pub baseline_error: f64,
}

impl ChannelParams {
    pub fn new(
        sigma_db_per_km: f64,
        eta: f64,
        receiver_loss_db: f64,
        dark_count_prob: f64,
        baseline_error: f64,
    ) -> Result<Self> {
        let p = Self { sigma_db_per_km, eta, receiver_loss_db, dark_count_prob, baseline_error };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_db_per_km >= 0.0) || !self.sigma_db_per_km.is_finite() {
            return Err(Error::domain("sigma_db_per_km", self.sigma_db_per_km));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::domain("eta", self.eta));
        }
        if !(self.receiver_loss_db >= 0.0) || !self.receiver_loss_db.is_finite() {
            return Err(Error::domain("receiver_loss_db", self.receiver_loss_db));
        }
        if !(self.dark_count_prob >= 0.0 && self.dark_count_prob < 1.0) {
            return Err(Error::domain("dark_count_prob", self.dark_count_prob));
        }
        if !(self.baseline_error >= 0.0 && self.baseline_error < 0.5) {
            return Err(Error::domain("baseline_error", self.baseline_error));
        }
        Ok(())
    }

    /// 1.5 um telecom fiber: eta = 0.18, d = 5e-5, 0.2 dB/km, 1% baseline
    /// error, 1 dB receiver loss.
    pub fn telecom_fiber() -> Self {
        Self {
            sigma_db_per_km: 0.2,
            eta: 0.18,
            receiver_loss_db: 1.0,
            dark_count_prob: 5e-5,
            baseline_error: 0.01,
        }
    }

    /// Visible-wavelength free-space link with d = 5e-8.
    pub fn visible_free_space() -> Self {
        Self {
            sigma_db_per_km: 0.0,
            eta: 1.0,
            receiver_loss_db: 0.0,
            dark_count_prob: 5e-8,
            baseline_error: 0.01,
        }
    }

    pub(crate) fn receiver_transmission(&self) -> f64 {
        db_to_transmission(self.receiver_loss_db)
    }
}

/// End-to-end detection probability of one photon over one arm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmLoss(f64);

impl ArmLoss {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::domain("arm detection probability", alpha));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    /// Transmission through a loss expressed in dB.
    pub fn from_loss_db(loss_db: f64) -> Result<Self> {
        if !(loss_db >= 0.0) {
            return Err(Error::domain("loss in dB", loss_db));
        }
        Ok(Self(db_to_transmission(loss_db)))
    }
}

pub(crate) fn db_to_transmission(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// `10^(-sigma L / 10)`.
pub fn fiber_transmission(sigma_db_per_km: f64, length_km: f64) -> Result<f64> {
    if !(length_km >= 0.0) {
        return Err(Error::domain("length", length_km));
    }
    if !(sigma_db_per_km >= 0.0) {
        return Err(Error::domain("sigma_db_per_km", sigma_db_per_km));
    }
    Ok(db_to_transmission(sigma_db_per_km * length_km))
}

/// Detection probability for a photon crossing `length_km` of fiber into
/// one receiver unit: `eta * receiver transmission * fiber transmission`.
pub fn arm_alpha(p: &ChannelParams, length_km: f64) -> Result<ArmLoss> {
    let t = fiber_transmission(p.sigma_db_per_km, length_km)?;
    ArmLoss::new(p.eta * p.receiver_transmission() * t)
}

/// Like [`arm_alpha`] but with an explicit receiver loss, for splitting a
/// single receiver-loss budget across two arms.
pub fn arm_alpha_with_receiver_loss(
    p: &ChannelParams,
    length_km: f64,
    receiver_loss_db: f64,
) -> Result<ArmLoss> {
    let t = fiber_transmission(p.sigma_db_per_km, length_km)?;
    ArmLoss::new(p.eta * db_to_transmission(receiver_loss_db) * t)
}

/// Probability that a receiver with `detectors` detectors registers a dark
/// count in one gate, ignoring coincident dark counts.
pub fn dark_click_prob(d: f64, detectors: u32) -> Result<f64> {
    if detectors == 0 {
        return Err(Error::ModelValidity("receiver needs at least one detector".into()));
    }
    if !(d >= 0.0) {
        return Err(Error::domain("dark_count_prob", d));
    }
    let p = detectors as f64 * d;
    if p >= 1.0 {
        return Err(Error::ModelValidity(format!(
            "linearised dark-click probability {p} is not below 1"
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn transmission_examples() {
        assert_eq!(fiber_transmission(0.2, 0.0).unwrap(), 1.0);
        assert_relative_eq!(fiber_transmission(0.2, 50.0).unwrap(), 0.1, max_relative = 1e-14);
        assert_relative_eq!(fiber_transmission(0.2, 100.0).unwrap(), 0.01, max_relative = 1e-14);
        assert!(fiber_transmission(0.2, -1.0).is_err());
    }

    #[test]
    fn arm_alpha_examples() {
        let ideal = ChannelParams::new(0.2, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(arm_alpha(&ideal, 0.0).unwrap().alpha(), 1.0);

        let p = ChannelParams::telecom_fiber();
        assert_relative_eq!(
            arm_alpha(&p, 50.0).unwrap().alpha(),
            0.014_297_908_225_037_067,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            arm_alpha(&p, 0.0).unwrap().alpha(),
            0.142_979_082_250_370_67,
            max_relative = 1e-13
        );
    }

    #[test]
    fn dark_click_examples() {
        assert_abs_diff_eq!(dark_click_prob(5e-5, 4).unwrap(), 2e-4, epsilon = 1e-18);
        assert_eq!(dark_click_prob(0.0, 4).unwrap(), 0.0);
        assert_abs_diff_eq!(dark_click_prob(5e-8, 4).unwrap(), 2e-7, epsilon = 1e-20);
        assert!(matches!(dark_click_prob(0.3, 4), Err(Error::ModelValidity(_))));
        assert!(dark_click_prob(0.1, 0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ChannelParams::new(0.2, 0.0, 1.0, 5e-5, 0.01).is_err());
        assert!(ChannelParams::new(0.2, 0.5, 1.0, 1.0, 0.01).is_err());
        assert!(ChannelParams::new(0.2, 0.5, 1.0, 5e-5, 0.5).is_err());
        assert!(ChannelParams::new(-0.1, 0.5, 1.0, 5e-5, 0.01).is_err());
        assert!(ChannelParams::new(0.2, 0.5, -1.0, 5e-5, 0.01).is_err());
        assert!(ArmLoss::new(1.5).is_err());
    }

    proptest! {
        #[test]
        fn transmission_is_multiplicative(l1 in 0.0f64..300.0, l2 in 0.0f64..300.0) {
            let joint = fiber_transmission(0.2, l1 + l2).unwrap();
            let split = fiber_transmission(0.2, l1).unwrap() * fiber_transmission(0.2, l2).unwrap();
            prop_assert!((joint - split).abs() <= 1e-12);
        }

        #[test]
        fn alpha_monotone(l1 in 0.0f64..300.0, dl in 0.0f64..100.0, r1 in 0.0f64..5.0, dr in 0.0f64..5.0) {
            let mut p = ChannelParams::telecom_fiber();
            p.receiver_loss_db = r1;
            let base = arm_alpha(&p, l1).unwrap();
            prop_assert!(arm_alpha(&p, l1 + dl).unwrap() <= base);
            p.receiver_loss_db = r1 + dr;
            prop_assert!(arm_alpha(&p, l1).unwrap() <= base);
        }
    }
}
