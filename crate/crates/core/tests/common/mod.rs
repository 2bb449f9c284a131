#![allow(dead_code)]

use tfsynth_core::data::{
    planted_single, planted_two_mode, synthetic_task, LabelRule, SyntheticSpec, SyntheticTask, WindowConfig,
};
use tfsynth_core::dsl::FeatureSpace;

/// 30 Hz videos of 100 s with two smoothed noise features.
pub fn spec(seed: u64, two_mode: bool) -> SyntheticSpec {
    let features = FeatureSpace::new(vec!["a".into(), "b".into()]);
    let (planted, planted_params) = if two_mode {
        planted_two_mode(features.clone())
    } else {
        planted_single(features.clone())
    };
    SyntheticSpec {
        seed,
        video_id: "syn".into(),
        features,
        frames: 3000,
        fps: 30,
        window: WindowConfig::default(),
        planted,
        planted_params,
        noise_rate: 0.05,
        smoothness: 10.0,
        label_rule: if two_mode { LabelRule::AnyTerm } else { LabelRule::Logit },
    }
}

pub fn task(seed: u64, two_mode: bool) -> SyntheticTask {
    synthetic_task(&spec(seed, two_mode), 3, 1, 1).unwrap()
}
