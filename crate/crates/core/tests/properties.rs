use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tofml::agents::ActionBounds;
use tofml::env::RoundDecision;
use tofml::harness::{build_env, ExperimentConfig};
use tofml::radio::{noma_rates, oma_rates, ChannelSnapshot, DeviceProfile, TaskRequirements};

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

/// Gains spread over several decades, as path loss produces.
fn gains(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-12.0f64..-6.0).prop_map(|e| 10f64.powf(e)), n)
}

fn case() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>, usize)> {
    gains(2..10).prop_flat_map(|g| {
        let n = g.len();
        (
            Just(g),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(1e-4f64..0.1, n),
            0..n,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rate_strictly_increases_in_own_power((g, mut mask, power, n) in case(), bump in 1.01f64..10.0) {
        mask[n] = true;
        let snap = snapshot(g, 4e-15);
        let before = noma_rates(&snap, &decision(mask.clone(), power.clone())).unwrap()[n].unwrap();
        let mut raised = power;
        raised[n] *= bump;
        let after = noma_rates(&snap, &decision(mask, raised)).unwrap()[n].unwrap();
        prop_assert!(after > before, "{before} -> {after}");
    }

    #[test]
    fn later_ranked_devices_only_interfere((g, mut mask, power, n) in case()) {
        mask[n] = true;
        let snap = snapshot(g.clone(), 4e-15);
        let base = noma_rates(&snap, &decision(mask.clone(), power.clone())).unwrap()[n].unwrap();
        for k in (0..mask.len()).filter(|&k| k != n) {
            let mut toggled = mask.clone();
            toggled[k] = !toggled[k];
            let r = noma_rates(&snap, &decision(toggled.clone(), power.clone())).unwrap()[n].unwrap();
            let ranked_after = g[k] < g[n] || (g[k] == g[n] && k > n);
            if !ranked_after {
                prop_assert_eq!(r, base);
            } else if toggled[k] {
                prop_assert!(r <= base);
            } else {
                prop_assert!(r >= base);
            }
        }
    }

    #[test]
    fn noma_sum_rate_is_order_free((g, mut mask, power, n) in case()) {
        mask[n] = true;
        let snap = snapshot(g.clone(), 4e-15);
        let rates = noma_rates(&snap, &decision(mask.clone(), power.clone())).unwrap();
        let sum: f64 = rates.iter().flatten().sum();
        let total_snr: f64 = (0..g.len()).filter(|&k| mask[k]).map(|k| power[k] * g[k] / 4e-15).sum();
        let expected = 1e6 * (1.0 + total_snr).log2();
        prop_assert!((sum - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn oma_rates_ignore_other_devices_powers((g, mut mask, power, n) in case()) {
        mask[n] = true;
        let snap = snapshot(g, 4e-15);
        let base = oma_rates(&snap, &decision(mask.clone(), power.clone())).unwrap()[n];
        let louder: Vec<f64> = power.iter().enumerate().map(|(k, &p)| if k == n { p } else { p * 3.0 }).collect();
        prop_assert_eq!(oma_rates(&snap, &decision(mask, louder)).unwrap()[n], base);
    }

    #[test]
    fn unit_actions_map_into_the_boxes(unit in prop::collection::vec(prop::num::f64::ANY, 6)) {
        let bounds = ActionBounds::new(vec![0.1, 0.2, 0.05], vec![1e9, 5e9, 1e10]).unwrap();
        let d = bounds.decision(vec![true, false, true], &unit).unwrap();
        for k in 0..3 {
            prop_assert!((0.0..=bounds.p_max[k]).contains(&d.power[k]));
            prop_assert!((0.0..=bounds.f_max[k]).contains(&d.freq[k]));
        }
    }
}

fn profiles(rng: &mut impl Rng, n: usize) -> Vec<DeviceProfile> {
    (0..n)
        .map(|id| DeviceProfile {
            id,
            data_size: 100,
            cycles_per_sample: 1e7,
            f_max: rng.random_range(1e8..1e10),
            p_max: rng.random_range(1e-3..0.2),
            capacitance_half: 1e-28,
            model_bits: 1e6,
            position: [10.0, 10.0],
            requirements: TaskRequirements {
                acc_req: 0.8,
                t_max: 5.0,
                e_max: 1.0,
            },
        })
        .collect()
}

fn wild(rng: &mut impl Rng, cap: f64) -> f64 {
    match rng.random_range(0..8) {
        0 => f64::NAN,
        1 => f64::INFINITY,
        2 => f64::NEG_INFINITY,
        3 => -rng.random_range(0.0..10.0 * cap),
        4 => cap,
        5 => cap * (1.0 + f64::EPSILON),
        _ => rng.random_range(-2.0 * cap..3.0 * cap),
    }
}

#[test]
fn clamping_holds_for_a_hundred_thousand_raw_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let prof = profiles(&mut rng, 6);
    for _ in 0..100_000 {
        let raw = RoundDecision {
            mask: (0..6).map(|_| rng.random_bool(0.5)).collect(),
            power: prof.iter().map(|p| wild(&mut rng, p.p_max)).collect(),
            freq: prof.iter().map(|p| wild(&mut rng, p.f_max)).collect(),
        };
        let executed = raw.clone().clamped(&prof).unwrap();
        assert!(executed.within_boxes(&prof), "{raw:?} -> {executed:?}");
        assert_eq!(executed.mask, raw.mask);
    }
}

#[test]
fn environment_executes_clamped_decisions() {
    let cfg = ExperimentConfig {
        devices: 3,
        slots_per_episode: 50,
        ..ExperimentConfig::default()
    };
    let mut env = build_env(&cfg).unwrap();
    env.reset(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let prof = env.profiles().to_vec();
    for _ in 0..50 {
        let raw = RoundDecision {
            mask: (0..3).map(|_| rng.random_bool(0.5)).collect(),
            power: prof.iter().map(|p| wild(&mut rng, p.p_max)).collect(),
            freq: prof.iter().map(|p| wild(&mut rng, p.f_max)).collect(),
        };
        let out = env.step(&raw).unwrap();
        assert!(out.info.decision.within_boxes(&prof));
    }
}
