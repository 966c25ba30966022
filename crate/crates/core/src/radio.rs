//! Uplink channel, rate and cost models.
//!
//! Channel power gains combine distance path loss with unit-mean exponential
//! (Rayleigh power) fading, redrawn every slot. Rates follow either NOMA with
//! perfect SIC, decoding strongest gain first, or an equal-bandwidth OMA
//! split. Time and energy follow the usual CMOS computation model plus
//! rate-limited upload of a fixed-size model.
//!
//! Unscheduled devices neither transmit nor compute: they create no
//! interference and their cost entries are absent.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::env::RoundDecision;
use crate::error::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRequirements {
    /// Required accuracy in (0, 1].
    pub acc_req: f64,
    /// Maximum tolerable round time, seconds.
    pub t_max: f64,
    /// Maximum tolerable energy per round, joules.
    pub e_max: f64,
}

impl TaskRequirements {
    pub fn validate(&self) -> Result<()> {
        if !(self.acc_req > 0.0 && self.acc_req <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "required accuracy {} outside (0, 1]",
                self.acc_req
            )));
        }
        if !(self.t_max > 0.0 && self.e_max > 0.0) {
            return Err(Error::InvalidConfig(
                "time and energy caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Static per-device parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub id: usize,
    /// Local training samples `D_n`.
    pub data_size: usize,
    /// CPU cycles per sample `c_n`.
    pub cycles_per_sample: f64,
    pub f_max: f64,
    pub p_max: f64,
    /// Effective capacitance coefficient `τ/2`.
    pub capacitance_half: f64,
    /// Uploaded model size `d_n` in bits.
    pub model_bits: f64,
    /// Metres, server at the origin.
    pub position: [f64; 2],
    pub requirements: TaskRequirements,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.data_size as f64,
            self.cycles_per_sample,
            self.f_max,
            self.p_max,
            self.capacitance_half,
            self.model_bits,
        ];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "device {}: physical parameters must be positive",
                self.id
            )));
        }
        self.requirements.validate()
    }

    pub fn distance(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }

    /// Total cycles for one local update, `c_n · D_n`.
    pub fn cycles(&self) -> f64 {
        self.cycles_per_sample * self.data_size as f64
    }
}

/// Per-slot channel state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    /// Linear power gains `|h_n|²`, indexed by device id.
    pub gains: Vec<f64>,
    pub bandwidth: f64,
    /// Noise power `σ²` over the full band, watts.
    pub noise_power: f64,
}

/// Log-distance path loss anchored at a reference distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub exponent: f64,
    /// Loss at the reference distance, dB.
    pub reference_loss_db: f64,
    pub reference_distance: f64,
}

impl PathLoss {
    /// Reference loss taken as free-space loss at `reference_distance` for
    /// the given carrier.
    pub fn from_carrier(exponent: f64, carrier_hz: f64, reference_distance: f64) -> Self {
        Self {
            exponent,
            reference_loss_db: free_space_loss_db(carrier_hz, reference_distance),
            reference_distance,
        }
    }

    /// Linear gain at `distance` metres; distances below one metre are
    /// treated as one metre.
    pub fn gain(&self, distance: f64) -> f64 {
        let d = distance.max(1.0);
        let loss_db =
            self.reference_loss_db + 10.0 * self.exponent * (d / self.reference_distance).log10();
        10f64.powf(-loss_db / 10.0)
    }
}

pub fn free_space_loss_db(carrier_hz: f64, distance: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance * carrier_hz / SPEED_OF_LIGHT).log10()
}

/// `10^(dBm/10) · 1e-3 · B`
pub fn noise_power(density_dbm_per_hz: f64, bandwidth: f64) -> f64 {
    10f64.powf(density_dbm_per_hz / 10.0) * 1e-3 * bandwidth
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub path_loss: PathLoss,
    pub bandwidth: f64,
    pub noise_density_dbm_per_hz: f64,
}

impl ChannelModel {
    pub fn noise_power(&self) -> f64 {
        noise_power(self.noise_density_dbm_per_hz, self.bandwidth)
    }

    /// Mean (fading-free) gains.
    pub fn large_scale_gains(&self, profiles: &[DeviceProfile]) -> Vec<f64> {
        profiles
            .iter()
            .map(|p| self.path_loss.gain(p.distance()))
            .collect()
    }

    /// Snapshot with explicit small-scale fading power factors.
    pub fn snapshot_with_fading(&self, profiles: &[DeviceProfile], fading: &[f64]) -> Result<ChannelSnapshot> {
        if fading.len() != profiles.len() {
            return Err(Error::dims("fading factors", profiles.len(), fading.len()));
        }
        let gains = self
            .large_scale_gains(profiles)
            .into_iter()
            .zip(fading)
            .map(|(g, f)| g * f)
            .collect();
        Ok(ChannelSnapshot {
            gains,
            bandwidth: self.bandwidth,
            noise_power: self.noise_power(),
        })
    }

    /// Fresh Rayleigh draw: each gain is path loss times an `Exp(1)` factor.
    pub fn draw<R: Rng + ?Sized>(&self, profiles: &[DeviceProfile], rng: &mut R) -> ChannelSnapshot {
        let fading: Vec<f64> = profiles
            .iter()
            .map(|_| {
                let x: f64 = Exp1.sample(rng);
                x.max(f64::MIN_POSITIVE)
            })
            .collect();
        self.snapshot_with_fading(profiles, &fading)
            .expect("one fading factor per device")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessScheme {
    Noma,
    Oma,
}

impl AccessScheme {
    pub fn rates(self, snapshot: &ChannelSnapshot, decision: &RoundDecision) -> Result<Vec<Option<f64>>> {
        match self {
            AccessScheme::Noma => noma_rates(snapshot, decision),
            AccessScheme::Oma => oma_rates(snapshot, decision),
        }
    }
}

/// Scheduled devices sorted by gain, strongest first; equal gains in id order.
pub fn sic_order(snapshot: &ChannelSnapshot, mask: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mask.len().min(snapshot.gains.len()))
        .filter(|&n| mask[n])
        .collect();
    order.sort_by(|&a, &b| {
        snapshot.gains[b]
            .partial_cmp(&snapshot.gains[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn check_decision(snapshot: &ChannelSnapshot, decision: &RoundDecision) -> Result<()> {
    let n = snapshot.gains.len();
    for (what, len) in [
        ("scheduling mask", decision.mask.len()),
        ("power vector", decision.power.len()),
        ("frequency vector", decision.freq.len()),
    ] {
        if len != n {
            return Err(Error::dims(what, n, len));
        }
    }
    Ok(())
}

/// Uplink NOMA rates under SIC.
///
/// A device decoded at position `i` sees interference from the scheduled
/// devices decoded after it. Unscheduled entries are `None`.
pub fn noma_rates(snapshot: &ChannelSnapshot, decision: &RoundDecision) -> Result<Vec<Option<f64>>> {
    check_decision(snapshot, decision)?;
    let order = sic_order(snapshot, &decision.mask);
    let mut rates = vec![None; snapshot.gains.len()];
    // walk from the last decoded device backwards, accumulating interference
    let mut interference = 0.0;
    for &n in order.iter().rev() {
        let rx = decision.power[n] * snapshot.gains[n];
        let sinr = rx / (interference + snapshot.noise_power);
        rates[n] = Some(snapshot.bandwidth * (1.0 + sinr).log2());
        interference += rx;
    }
    Ok(rates)
}

/// Equal-split OMA: each of the `N_s` scheduled devices gets `B/N_s` with the
/// noise power of its sub-band and no mutual interference.
pub fn oma_rates(snapshot: &ChannelSnapshot, decision: &RoundDecision) -> Result<Vec<Option<f64>>> {
    check_decision(snapshot, decision)?;
    let scheduled = decision.mask.iter().filter(|&&z| z).count();
    let mut rates = vec![None; snapshot.gains.len()];
    if scheduled == 0 {
        return Ok(rates);
    }
    let share = scheduled as f64;
    let sub_band = snapshot.bandwidth / share;
    let sub_noise = snapshot.noise_power / share;
    for n in 0..rates.len() {
        if decision.mask[n] {
            let snr = decision.power[n] * snapshot.gains[n] / sub_noise;
            rates[n] = Some(sub_band * (1.0 + snr).log2());
        }
    }
    Ok(rates)
}

/// Computation and communication cost of one scheduled device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceCost {
    pub t_cmp: f64,
    pub e_cmp: f64,
    pub t_com: f64,
    pub e_com: f64,
    pub rate: f64,
}

impl DeviceCost {
    pub fn time(&self) -> f64 {
        self.t_cmp + self.t_com
    }

    pub fn energy(&self) -> f64 {
        self.e_cmp + self.e_com
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// `None` for unscheduled or infeasible devices.
    pub devices: Vec<Option<DeviceCost>>,
    /// Synchronous round time: max over feasible scheduled devices.
    pub round_time: f64,
    /// Scheduled devices with zero frequency or zero rate.
    pub infeasible: Vec<usize>,
}

impl CostReport {
    pub fn is_feasible(&self) -> bool {
        self.infeasible.is_empty()
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.devices[n].map_or(0.0, |c| c.energy())
    }
}

pub fn round_costs(
    profiles: &[DeviceProfile],
    snapshot: &ChannelSnapshot,
    decision: &RoundDecision,
    scheme: AccessScheme,
) -> Result<CostReport> {
    if profiles.len() != snapshot.gains.len() {
        return Err(Error::dims("device profiles", snapshot.gains.len(), profiles.len()));
    }
    let rates = scheme.rates(snapshot, decision)?;
    let mut devices = vec![None; profiles.len()];
    let mut infeasible = Vec::new();
    let mut round_time: f64 = 0.0;
    for (n, profile) in profiles.iter().enumerate() {
        if !decision.mask[n] {
            continue;
        }
        let f = decision.freq[n];
        let rate = rates[n].unwrap_or(0.0);
        if !(f > 0.0) || !(rate > 0.0) {
            infeasible.push(n);
            continue;
        }
        let cycles = profile.cycles();
        let t_cmp = cycles / f;
        let e_cmp = profile.capacitance_half * cycles * f * f;
        let t_com = profile.model_bits / rate;
        let e_com = decision.power[n] * t_com;
        let cost = DeviceCost {
            t_cmp,
            e_cmp,
            t_com,
            e_com,
            rate,
        };
        round_time = round_time.max(cost.time());
        devices[n] = Some(cost);
    }
    Ok(CostReport {
        devices,
        round_time,
        infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshot(gains: Vec<f64>, noise: f64) -> ChannelSnapshot {
        ChannelSnapshot {
            gains,
            bandwidth: 1e6,
            noise_power: noise,
        }
    }

    fn decision(mask: Vec<bool>, power: Vec<f64>) -> RoundDecision {
        let n = mask.len();
        RoundDecision {
            mask,
            power,
            freq: vec![1e9; n],
        }
    }

    fn profile(id: usize, x: f64) -> DeviceProfile {
        DeviceProfile {
            id,
            data_size: 100,
            cycles_per_sample: 1e7,
            f_max: 1e10,
            p_max: 0.1,
            capacitance_half: 1e-28,
            model_bits: 1e6,
            position: [x, 0.0],
            requirements: TaskRequirements {
                acc_req: 0.8,
                t_max: 5.0,
                e_max: 0.5,
            },
        }
    }

    #[test]
    fn equal_distance_equal_gains() {
        let model = ChannelModel {
            path_loss: PathLoss::from_carrier(3.76, 1e9, 1.0),
            bandwidth: 1e6,
            noise_density_dbm_per_hz: -174.0,
        };
        let profiles = vec![profile(0, 100.0), profile(1, -100.0)];
        let snap = model.snapshot_with_fading(&profiles, &[1.0, 1.0]).unwrap();
        assert_eq!(snap.gains[0], snap.gains[1]);
    }

    #[test]
    fn doubling_distance_ratio() {
        let pl = PathLoss::from_carrier(3.76, 1e9, 1.0);
        let ratio = pl.gain(200.0) / pl.gain(100.0);
        assert!((ratio - 2f64.powf(-3.76)).abs() < 1e-12);
        assert!((ratio - 0.0738).abs() < 1e-4);
    }

    #[test]
    fn zero_distance_clamped() {
        let pl = PathLoss::from_carrier(3.76, 1e9, 1.0);
        assert_eq!(pl.gain(0.0), pl.gain(1.0));
        assert!(pl.gain(0.0).is_finite());
    }

    #[test]
    fn thermal_noise_over_one_megahertz() {
        let sigma2 = noise_power(-174.0, 1e6);
        let expected = 10f64.powf(-17.4) * 1e-3 * 1e6;
        assert!((sigma2 - expected).abs() <= 1e-12 * expected);
        assert!((sigma2 - 3.98e-15).abs() < 0.01e-15);
    }

    #[test]
    fn sic_order_examples() {
        let s = snapshot(vec![0.1, 0.9, 0.5], 1.0);
        assert_eq!(sic_order(&s, &[true, true, true]), vec![1, 2, 0]);
        assert_eq!(sic_order(&s, &[false, false, true]), vec![2]);
        let tied = snapshot(vec![0.3, 0.3, 0.3], 1.0);
        assert_eq!(sic_order(&tied, &[true, true, true]), vec![0, 1, 2]);
    }

    #[test]
    fn noma_single_device() {
        // p|h|²/σ² = 3
        let s = snapshot(vec![3.0], 1.0);
        let r = noma_rates(&s, &decision(vec![true], vec![1.0])).unwrap();
        assert!((r[0].unwrap() - 2e6).abs() < 1e-6);
    }

    #[test]
    fn noma_two_devices() {
        // p1|h1|² = 2σ², p2|h2|² = σ², device 0 decoded first
        let s = snapshot(vec![2.0, 1.0], 1.0);
        let r = noma_rates(&s, &decision(vec![true, true], vec![1.0, 1.0])).unwrap();
        assert!((r[0].unwrap() - 1e6).abs() < 1e-6);
        assert!((r[1].unwrap() - 1e6).abs() < 1e-6);
    }

    #[test]
    fn zero_power_zero_rate() {
        let s = snapshot(vec![2.0, 1.0], 1.0);
        let r = noma_rates(&s, &decision(vec![true, true], vec![0.0, 1.0])).unwrap();
        assert_eq!(r[0], Some(0.0));
        let r = oma_rates(&s, &decision(vec![true, true], vec![0.0, 1.0])).unwrap();
        assert_eq!(r[0], Some(0.0));
    }

    #[test]
    fn unscheduled_devices_have_no_rate_and_no_interference() {
        let s = snapshot(vec![2.0, 1.0], 1.0);
        let r = noma_rates(&s, &decision(vec![true, false], vec![1.0, 1.0])).unwrap();
        assert_eq!(r[1], None);
        assert!((r[0].unwrap() - 1e6 * 3f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn oma_examples() {
        let s = snapshot(vec![3.0], 1.0);
        let d = decision(vec![true], vec![1.0]);
        assert_eq!(oma_rates(&s, &d).unwrap(), noma_rates(&s, &d).unwrap());

        let s = snapshot(vec![3.0, 3.0], 1.0);
        let r = oma_rates(&s, &decision(vec![true, true], vec![1.0, 1.0])).unwrap();
        let expected = 0.5e6 * 7f64.log2();
        assert!((r[0].unwrap() - expected).abs() < 1e-6);
        assert_eq!(r[0], r[1]);
        assert!((r[0].unwrap() - 1.404e6).abs() < 1e3);
    }

    #[test]
    fn cost_hand_values() {
        let p = profile(0, 10.0);
        let s = snapshot(vec![3.0], 1.0);
        let d = RoundDecision {
            mask: vec![true],
            power: vec![0.1],
            freq: vec![1e9],
        };
        let c = round_costs(std::slice::from_ref(&p), &s, &d, AccessScheme::Noma).unwrap();
        let dc = c.devices[0].unwrap();
        assert_eq!(dc.t_cmp, 1.0);
        assert!((dc.e_cmp - 0.1).abs() < 1e-12);
        let rate = 1e6 * (1.0 + 0.3f64).log2();
        assert!((dc.t_com - 1e6 / rate).abs() < 1e-12);
        assert!((dc.e_com - 0.1 * 1e6 / rate).abs() < 1e-12);
        assert_eq!(c.round_time, dc.t_cmp + dc.t_com);
    }

    #[test]
    fn zero_frequency_is_infeasible() {
        let s = snapshot(vec![3.0, 1.0], 1.0);
        let d = RoundDecision {
            mask: vec![true, true],
            power: vec![0.1, 0.1],
            freq: vec![0.0, 1e9],
        };
        let c = round_costs(&[profile(0, 1.0), profile(1, 2.0)], &s, &d, AccessScheme::Noma).unwrap();
        assert_eq!(c.infeasible, vec![0]);
        assert!(!c.is_feasible());
        assert!(c.devices[0].is_none());
        assert!(c.devices[1].is_some());
    }

    #[test]
    fn mismatched_decision_rejected() {
        let s = snapshot(vec![3.0, 1.0], 1.0);
        assert!(noma_rates(&s, &decision(vec![true], vec![1.0])).is_err());
    }
}
