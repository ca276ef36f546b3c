//! Instance sets and observation augmentation.

use proptest::prelude::*;

use ctxtune::context::{
    augment_observation, augment_observation_normalized, sample_instance_set, Context,
    ContextFeature, InstanceSet, InstanceSetFile, Visibility,
};
use ctxtune::envs::EnvKind;
use ctxtune::{rng, Error};

#[test]
fn varied_features_use_ten_percent_spread() {
    let expected = [
        (EnvKind::Pendulum, "g", 10.0, 1.0),
        (EnvKind::Acrobot, "link_length_1", 1.0, 0.1),
        (EnvKind::Lander, "gravity_y", -10.0, 1.0),
    ];
    for (kind, name, mu, sigma) in expected {
        let (f, m, s) = kind.varied_feature();
        assert_eq!((f.name.as_str(), m), (name, mu));
        assert!((s - sigma).abs() < 1e-15);
    }
}

#[test]
fn instance_sets_are_seeded_and_physical() {
    for kind in EnvKind::ALL {
        let (f, mu, sigma) = kind.varied_feature();
        let a = sample_instance_set(&f, mu, sigma, 100, 7).unwrap();
        let b = sample_instance_set(&f, mu, sigma, 100, 7).unwrap();
        let c = sample_instance_set(&f, mu, sigma, 100, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
        assert_eq!(a.len(), 100);
        let values = a.values();
        assert!(values.iter().all(|&v| f.is_physical(v)));
        let mean = values.iter().sum::<f64>() / 100.0;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!(
            (mean - mu).abs() < 4.0 * sigma / 10.0,
            "{kind}: mean {mean}"
        );
        assert!((sd / sigma - 1.0).abs() < 0.35, "{kind}: sd {sd}");
    }
}

#[test]
fn non_physical_draws_are_rejected() {
    let f = ContextFeature::positive("l", 1.0);
    let set = sample_instance_set(&f, 0.1, 1.0, 200, 0).unwrap();
    assert!(set.values().iter().all(|&v| v > 0.0));
    assert!(sample_instance_set(&f, -1e6, 1.0, 1, 0).is_err());
    assert!(sample_instance_set(&f, 1.0, -1.0, 1, 0).is_err());
    assert!(sample_instance_set(&f, 1.0, 1.0, 0, 0).is_err());
}

#[test]
fn round_robin_cycles_in_order() {
    let (f, mu, sigma) = EnvKind::Pendulum.varied_feature();
    let set = sample_instance_set(&f, mu, sigma, 3, 1).unwrap();
    let order: Vec<f64> = (0..7)
        .map(|e| set.round_robin(e).get("g").unwrap())
        .collect();
    let v = set.values();
    assert_eq!(order, vec![v[0], v[1], v[2], v[0], v[1], v[2], v[0]]);
    let mut r = rng::seeded(0);
    assert!(v.contains(&set.pick(&mut r).get("g").unwrap()));
    assert!(f.is_physical(set.resample(&mut r).get("g").unwrap()));
    assert_eq!(
        InstanceSet::default_only(&f).resample(&mut r).get("g"),
        Some(10.0)
    );
}

#[test]
fn files_round_trip_exactly() {
    let (f, mu, sigma) = EnvKind::Acrobot.varied_feature();
    let set = sample_instance_set(&f, mu, sigma, 50, 3).unwrap();
    let file: InstanceSetFile = serde_json::from_str(&set.to_json().unwrap()).unwrap();
    assert_eq!(InstanceSet::from_file(&file, &f).unwrap(), set);

    let wrong = ContextFeature::positive("g", 10.0);
    assert!(matches!(
        InstanceSet::from_file(&file, &wrong),
        Err(Error::InvalidArgument(_))
    ));
    let mut bad = file.clone();
    bad.values[0] = -1.0;
    assert!(InstanceSet::from_file(&bad, &f).is_err());
    bad.values.clear();
    assert!(InstanceSet::from_file(&bad, &f).is_err());
}

#[test]
fn visibility_appends_raw_or_scaled_values() {
    let ctx = Context::single("gravity_y", -12.0);
    let obs = [1.0, 2.0];
    assert_eq!(
        augment_observation(&obs, &ctx, Visibility::Hidden),
        obs.to_vec()
    );
    assert_eq!(
        augment_observation(&obs, &ctx, Visibility::Visible),
        vec![1.0, 2.0, -12.0]
    );
    let features = EnvKind::Lander.spec().features;
    assert_eq!(
        augment_observation_normalized(&obs, &ctx, Visibility::Visible, &features),
        vec![1.0, 2.0, -1.2]
    );
    assert_eq!(
        augment_observation_normalized(&obs, &ctx, Visibility::Hidden, &features),
        obs.to_vec()
    );
}

#[test]
fn contexts_validate_against_features() {
    let features = EnvKind::Pendulum.spec().features;
    Context::single("g", 9.0).validate(&features).unwrap();
    assert!(Context::single("gravity", 9.0).validate(&features).is_err());
    assert!(Context::single("g", -9.0).validate(&features).is_err());
    let c = Context::single("g", 9.0).with("g", 11.0);
    assert_eq!(c.len(), 1);
    assert_eq!(c.get("g"), Some(11.0));
    assert!(Context::empty().is_empty());
}

#[test]
fn visibility_parses_from_text() {
    assert_eq!("hidden".parse::<Visibility>().unwrap(), Visibility::Hidden);
    assert_eq!(
        "visible".parse::<Visibility>().unwrap(),
        Visibility::Visible
    );
    assert!("shown".parse::<Visibility>().is_err());
    assert_eq!(Visibility::Visible.to_string(), "visible");
}

proptest! {
    #[test]
    fn augmented_length_depends_only_on_mode(obs in prop::collection::vec(-10.0f64..10.0, 0..10), v in -20.0f64..-0.1) {
        let ctx = Context::single("gravity_y", v);
        prop_assert_eq!(augment_observation(&obs, &ctx, Visibility::Hidden).len(), obs.len());
        let vis = augment_observation(&obs, &ctx, Visibility::Visible);
        prop_assert_eq!(vis.len(), obs.len() + 1);
        prop_assert_eq!(vis[obs.len()], v);
        prop_assert_eq!(&vis[..obs.len()], &obs[..]);
    }
}
