// SPDX-License-Identifier: MIT OR Apache-2.0

use approx::assert_abs_diff_eq;
use cpdnet::cusum::{cusum_classify, cusum_star_classify, cusum_statistic, threshold, ThresholdKind};
use cpdnet::eval::mer;
use cpdnet::nn::*;
use cpdnet::rng::{child_seed, rng_from_seed};
use cpdnet::simgen::{gen_scenario, LabelSpace, LabeledDataset, Role, Scenario, ScenarioSpec};
use cpdnet::Series;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn s(v: &[f64]) -> Series {
    Series::new(v.to_vec()).unwrap()
}

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>()
}

#[test]
fn preprocessing_examples() {
    assert_eq!(unit_scale(&s(&[2.0, 4.0, 6.0])), s(&[0.0, 0.5, 1.0]));
    assert_eq!(unit_scale(&s(&[5.0; 3])), s(&[0.0; 3]));
    let x = s(&gaussian(30, 1));
    let y = x.map(|t| 3.5 * t - 7.0).unwrap();
    for (a, b) in unit_scale(&x).iter().zip(unit_scale(&y).iter()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
    let square = Preprocess::identity().with_channels(&[Channel::Square]);
    assert_eq!(preprocess(&s(&[1.0, -2.0]), &square), vec![1.0, 4.0]);
    let lag = Preprocess::identity().with_channels(&[Channel::LagProduct]);
    assert_eq!(preprocess(&s(&[1.0, 2.0, 3.0]), &lag), vec![2.0, 6.0, 0.0]);
    assert_eq!(preprocess(&x, &Preprocess::identity()), x.to_vec());
    let both = Preprocess::identity().with_channels(&[Channel::Identity, Channel::Square]);
    assert_eq!(both.output_dim(7), 14);
}

#[test]
fn zero_network_says_no_change() {
    let arch = Architecture::new(5, &[4], 1).unwrap();
    let layers = vec![Layer::zeros(4, 5), Layer::zeros(1, 4)];
    let net = Network::new(arch, Preprocess::identity(), layers, Head::Threshold { lambda: 0.5 }).unwrap();
    for r in 0..50 {
        assert_eq!(net.classify(&s(&gaussian(5, r))).unwrap(), 0);
    }
}

/// `ReLU(x + 100) − 100`: the identity on `x > −100`.
fn identity_net(lambda: f64) -> Network {
    let arch = Architecture::new(1, &[1], 1).unwrap();
    let hidden = Layer { weights: DMatrix::from_element(1, 1, 1.0), bias: DVector::from_element(1, -100.0) };
    let out = Layer { weights: DMatrix::from_element(1, 1, 1.0), bias: DVector::from_element(1, 100.0) };
    Network::new(arch, Preprocess::identity(), vec![hidden, out], Head::Threshold { lambda }).unwrap()
}

#[test]
fn single_input_net_thresholds_its_input() {
    let net = identity_net(1.5);
    for x in [-40.0, 0.0, 1.4, 1.5, 1.6, 30.0] {
        assert_eq!(net.forward(&[x]).unwrap().label, usize::from(x > 1.5), "x = {x}");
    }
}

#[test]
fn embedded_cusum_structure() {
    let lambda = 1.0;
    let net = embed_cusum(2, lambda, CusumVariant::Full).unwrap();
    assert_eq!(net.architecture().widths, vec![2]);
    let w = &net.layers()[0].weights;
    let r = 1.0 / 2f64.sqrt();
    let rows: Vec<Vec<f64>> = (0..2).map(|i| w.row(i).iter().copied().collect()).collect();
    assert!(rows.iter().any(|row| (row[0] - r).abs() < 1e-15 && (row[1] + r).abs() < 1e-15));
    assert!(rows.iter().any(|row| (row[0] + r).abs() < 1e-15 && (row[1] - r).abs() < 1e-15));
    assert_eq!(embed_cusum(100, 3.0, CusumVariant::Star).unwrap().architecture().widths, vec![24]);
}

#[test]
fn embedded_cusum_agrees_with_direct_classifier() {
    for n in [2, 10, 100] {
        let lambda = threshold(n, ThresholdKind::Null { eps: 0.05 }).unwrap();
        let full = embed_cusum(n, lambda, CusumVariant::Full).unwrap();
        let star = embed_cusum(n, lambda, CusumVariant::Star).unwrap();
        for r in 0..1000 {
            let mut rng = rng_from_seed(child_seed(n as u64, r));
            let shift = rng.random_range(-2.0..2.0) * lambda / (n as f64).sqrt();
            let tau = rng.random_range(1..n);
            let v: Vec<f64> = gaussian(n, child_seed(77, r)).iter().enumerate().map(|(t, e)| e + if t >= tau { shift } else { 0.0 }).collect();
            let x = s(&v);
            if (cusum_statistic(&x).0 - lambda).abs() > 1e-9 {
                assert_eq!(full.classify(&x).unwrap() as u8, cusum_classify(&x, lambda).unwrap());
                assert_eq!(star.classify(&x).unwrap() as u8, cusum_star_classify(&x, lambda).unwrap());
            }
        }
    }
}

#[test]
fn embedded_glr_matches_cusum_for_mean_changes() {
    use cpdnet::glr::{glr_directions, ChangeDesign};
    let n = 12;
    let net = embed_glr(&glr_directions(&ChangeDesign::mean_change(n).unwrap()).unwrap(), 2.0).unwrap();
    for r in 0..300 {
        let x = s(&gaussian(n, r));
        if (cusum_statistic(&x).0 - 2.0).abs() > 1e-9 {
            assert_eq!(net.classify(&x).unwrap() as u8, cusum_classify(&x, 2.0).unwrap());
        }
    }
}

fn random_batch(d: usize, b: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(d, b, |_, _| StandardNormal.sample(&mut rng))
}

#[test]
fn gradient_matches_finite_differences() {
    let net = Network::init(Architecture::new(10, &[8, 8], 1).unwrap(), Preprocess::identity(), 3).unwrap();
    let x = random_batch(10, 6, 4);
    assert!(grad_check(&net, &x, &[0, 1, 1, 0, 1, 0], 1e-5).unwrap() <= 1e-4);
    let multi = Network::init(Architecture::new(10, &[8, 8], 4).unwrap(), Preprocess::identity(), 5).unwrap();
    assert!(grad_check(&multi, &x, &[1, 4, 2, 3, 3, 1], 1e-5).unwrap() <= 1e-4);
}

#[test]
fn linear_regime_gradient_is_essentially_exact() {
    // hidden biases of −3 keep every ReLU active on 0.2·N(0,1) inputs
    let mut net = Network::init(Architecture::new(4, &[3], 1).unwrap(), Preprocess::identity(), 8).unwrap();
    let layers: Vec<Layer> = net
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut l = l.clone();
            if i == 0 {
                l.bias.fill(-3.0);
            }
            l
        })
        .collect();
    net = Network::new(net.architecture().clone(), Preprocess::identity(), layers, net.head()).unwrap();
    let x = random_batch(4, 5, 9) * 0.2;
    let e = grad_check(&net, &x, &[0, 1, 0, 1, 1], 1e-5).unwrap();
    assert!(e <= 1e-8, "{e}");
}

#[test]
fn saturated_separable_batch_has_tiny_loss() {
    let net = identity_net(0.0);
    let x = DMatrix::from_row_slice(1, 4, &[-30.0, -25.0, 25.0, 30.0]);
    let (loss, _) = loss_and_gradient(&net, &x, &[0, 0, 1, 1]).unwrap();
    assert!(loss < 1e-3, "{loss}");
}

#[test]
fn duplicated_batch_leaves_loss_and_gradient_unchanged() {
    let net = Network::init(Architecture::new(6, &[5], 3).unwrap(), Preprocess::identity(), 1).unwrap();
    let x = random_batch(6, 4, 2);
    let labels = [1, 2, 3, 2];
    let mut x2 = DMatrix::zeros(6, 8);
    x2.columns_mut(0, 4).copy_from(&x);
    x2.columns_mut(4, 4).copy_from(&x);
    let (l1, g1) = loss_and_gradient(&net, &x, &labels).unwrap();
    let (l2, g2) = loss_and_gradient(&net, &x2, &[labels, labels].concat()).unwrap();
    assert_abs_diff_eq!(l1, l2, epsilon = 1e-14);
    for (a, b) in g1.values().zip(g2.values()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    }
}

fn s1(size: usize, role: Role, seed: u64) -> LabeledDataset {
    gen_scenario(&ScenarioSpec::new(Scenario::S1, 100, size, role).unwrap(), seed).unwrap()
}

#[test]
fn training_is_deterministic() {
    let data = s1(100, Role::Train, 1);
    let arch = Architecture::new(100, &[16], 1).unwrap();
    let cfg = TrainConfig { epochs: 5, ..TrainConfig::default().with_seed(4) };
    let a = train(&data, &arch, &Preprocess::identity(), &cfg).unwrap();
    let b = train(&data, &arch, &Preprocess::identity(), &cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = train(&data, &arch, &Preprocess::identity(), &cfg.with_seed(5)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn network_json_round_trip() {
    let net = Network::init(Architecture::new(7, &[5, 3], 4).unwrap(), Preprocess::unit_scale(), 11).unwrap();
    let back = Network::from_json(&net.to_json().unwrap()).unwrap();
    assert_eq!(back, net);
    assert!(Network::from_json("{\"format\":\"other\"}").is_err());
}

#[test]
fn training_from_the_cusum_embedding_does_not_degrade_it() {
    let lambda = threshold(100, ThresholdKind::Null { eps: 0.05 }).unwrap();
    let test = s1(2000, Role::Test, 900);
    for k in 0..5 {
        let init = embed_cusum(100, lambda, CusumVariant::Full).unwrap();
        let before = mer(&init, &test).unwrap().mer;
        let cfg = TrainConfig { epochs: 20, ..TrainConfig::default().with_seed(child_seed(3, k)) };
        let trained = train_from(&s1(700, Role::Train, child_seed(8, k)), init, &cfg).unwrap().network;
        let after = mer(&trained, &test).unwrap().mer;
        assert!(after <= before + 0.02, "seed {k}: {before} -> {after}");
    }
}

#[test]
fn multiclass_labels_need_a_softmax_head() {
    let data = LabeledDataset { n: 4, labels: LabelSpace::Multiclass { classes: 5 }, examples: vec![] };
    let arch = Architecture::new(4, &[3], 1).unwrap();
    assert!(train(&data, &arch, &Preprocess::identity(), &TrainConfig::default()).is_err());
    assert!(Architecture::new(4, &[3], 2).is_err());
    assert!(Architecture::new(4, &[], 1).is_err());
}
