mod common;

use common::fine_tuning_accuracies;
use tofml::harness::ExperimentConfig;

#[test]
fn adaptation_beats_the_meta_model_on_every_seed() {
    let cfg = ExperimentConfig::default();
    for seed in 1..=3 {
        let (pre, post) = fine_tuning_accuracies(&cfg, seed, 30);
        println!("seed {seed}: pre {pre:.4}, post {post:.4}");
        assert!(post > pre, "seed {seed}: {pre} -> {post}");
    }
}
