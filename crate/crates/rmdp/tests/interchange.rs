//! Golden tests for the JSON interchange format: key layout is pinned, and
//! probability round-trips are bit-exact.

use rmdp::gamblers::{build_gamblers, GamblersConfig};
use rmdp::{validate_model, TabularModel};

#[test]
fn model_json_golden() {
    let model = TabularModel {
        num_states: 2,
        horizon: 1,
        actions: vec![vec![0], vec![0, 1]],
        reward: vec![vec![vec![0.25], vec![1.0, 0.5]]],
        kernels: vec![vec![
            vec![vec![0.1, 0.9]],
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
        ]],
    };
    let golden = concat!(
        r#"{"num_states":2,"horizon":1,"actions":[[0],[0,1]],"#,
        r#""reward":[[[0.25],[1.0,0.5]]],"#,
        r#""kernels":[[[[0.1,0.9]],[[0.5,0.5],[1.0,0.0]]]]}"#
    );
    assert_eq!(model.to_json(), golden);
    let back = TabularModel::from_json(golden).unwrap();
    assert_eq!(back, model);
}

#[test]
fn awkward_probabilities_round_trip_bit_exact() {
    // 0.1 + 0.2 style non-representable decimals must survive unchanged.
    let p = 0.1f64 + 0.2f64;
    let model = TabularModel {
        num_states: 2,
        horizon: 1,
        actions: vec![vec![0], vec![0]],
        reward: vec![vec![vec![0.0], vec![0.0]]],
        kernels: vec![vec![vec![vec![p, 1.0 - p]], vec![vec![1.0, 0.0]]]],
    };
    assert!(validate_model(&model).is_ok());
    let back = TabularModel::from_json(&model.to_json()).unwrap();
    assert_eq!(back.kernels[0][0][0][0].to_bits(), p.to_bits());
    assert_eq!(back.kernels[0][0][0][1].to_bits(), (1.0 - p).to_bits());
}

#[test]
fn gamblers_model_survives_interchange() {
    let model = build_gamblers(&GamblersConfig {
        goal: 10,
        horizon: 5,
        heads_prob: 0.6,
    })
    .unwrap();
    let back = TabularModel::from_json(&model.to_json()).unwrap();
    assert_eq!(model, back);
    assert!(validate_model(&back).is_ok());
}
