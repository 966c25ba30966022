use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tofml::agents::{greedy_index, ActionBounds, AgentConfig, LearnerSeeds, Pdqn, ReplayBuffer, Transition};
use tofml::nn::{soft_blend, ParamVector};

fn transition(i: usize) -> Transition {
    let x = (i % 17) as f64 / 17.0;
    Transition {
        state: vec![x, 1.0 - x, (i % 3) as f64 / 2.0, x * x],
        cont_action: vec![0.3, 0.7, x, 1.0 - x],
        disc_action: i % 4,
        reward: (i % 5) as f64 / 4.0,
        next_state: vec![1.0 - x, x, 0.5, 0.25],
        terminal: i % 7 == 0,
    }
}

fn agent(cfg: AgentConfig) -> Pdqn {
    let bounds = ActionBounds::new(vec![0.1; 2], vec![1e9; 2]).unwrap();
    Pdqn::new(cfg, bounds, LearnerSeeds::from_master(21)).unwrap()
}

#[test]
fn replay_keeps_the_newest_capacity_items_in_order() {
    for (capacity, extra) in [(1, 5), (8, 0), (8, 3), (8, 8), (8, 21), (50, 49)] {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..capacity + extra {
            buf.push(transition(i));
        }
        assert_eq!(buf.len(), capacity);
        let kept: Vec<Transition> = buf.iter().cloned().collect();
        let expected: Vec<Transition> = (extra..capacity + extra).map(transition).collect();
        assert_eq!(kept, expected, "capacity {capacity}, extra {extra}");
    }
}

#[test]
fn replay_sampling_is_distinct_and_bounded() {
    let mut buf = ReplayBuffer::new(16);
    for i in 0..40 {
        buf.push(transition(i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!(buf.sample(&mut rng, 17).is_none());
    let batch = buf.sample(&mut rng, 16).unwrap();
    for (i, a) in batch.iter().enumerate() {
        assert!(batch[i + 1..].iter().all(|b| !std::ptr::eq(*a, *b)));
    }
}

#[test]
fn full_soft_update_copies_online_into_target() {
    let mut a = agent(AgentConfig {
        hidden: vec![12],
        soft_update: 1.0,
        ..AgentConfig::default()
    });
    let batch: Vec<Transition> = (0..8).map(transition).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    a.critic_step(&refs).unwrap();
    a.actor_step(&refs).unwrap();
    let [actor, critic, _, critic_t] = a.parameters().map(|p| p.clone());
    assert_ne!(critic, critic_t);
    a.soft_update_targets().unwrap();
    let [_, _, actor_t, critic_t] = a.parameters().map(|p| p.clone());
    assert_eq!(actor_t, actor);
    assert_eq!(critic_t, critic);
}

#[test]
fn frozen_target_td_loss_decreases_on_a_fixed_batch() {
    let mut a = agent(AgentConfig {
        hidden: vec![16],
        critic_lr: 1e-3,
        ..AgentConfig::default()
    });
    let batch: Vec<Transition> = (0..8).map(transition).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let targets = a.td_targets(&refs).unwrap();
    let losses: Vec<f64> = (0..100).map(|_| a.critic_step(&refs).unwrap()).collect();
    assert_eq!(a.td_targets(&refs).unwrap(), targets, "targets must stay frozen");
    assert!(losses[99] < losses[0], "{} -> {}", losses[0], losses[99]);
    let rising = losses.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rising <= 5, "{rising} of 99 steps increased the loss");
}

#[test]
fn soft_blend_extremes() {
    let t = ParamVector::new(vec![1.0, -2.0, 3.0]);
    let o = ParamVector::new(vec![0.5, 4.0, -1.0]);
    assert_eq!(soft_blend(&t, &o, 1.0).unwrap(), o);
    let half = soft_blend(&t, &o, 0.5).unwrap();
    assert_eq!(half.as_slice(), &[0.75, 1.0, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn greedy_head_invariant_under_positive_affine_maps(
        q in prop::collection::vec(-5.0f64..5.0, 1..64),
        scale in 0.1f64..10.0,
        shift in -10.0f64..10.0,
    ) {
        let mapped: Vec<f64> = q.iter().map(|v| scale * v + shift).collect();
        prop_assert_eq!(greedy_index(&mapped), greedy_index(&q));
    }

    #[test]
    fn replay_fifo_for_any_overflow(capacity in 1usize..40, extra in 0usize..80) {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..capacity + extra {
            buf.push(transition(i));
        }
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        let expected: Vec<f64> = (extra..capacity + extra).map(|i| transition(i).reward).collect();
        prop_assert_eq!(rewards, expected);
    }
}
