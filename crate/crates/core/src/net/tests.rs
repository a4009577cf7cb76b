use super::*;
use crate::data::{LabeledDataset, two_moons};
use crate::linalg::DenseMatrix;
use proptest::prelude::*;

/// Independent evaluation of one subnet with explicit index loops.
fn subnet_oracle(s: &Subnet, x: &[f64]) -> Vec<f64> {
    let (hidden, half) = (s.hidden_dim(), s.half_dim());
    let mut h = vec![0.0; hidden];
    for r in 0..hidden {
        let mut acc = s.b1()[r];
        for c in 0..half {
            acc += s.w1().values()[r * half + c] * x[c];
        }
        h[r] = if acc > 0.0 { acc } else { 0.0 };
    }
    let mut out = vec![0.0; half];
    for r in 0..half {
        let mut acc = s.b2()[r];
        for c in 0..hidden {
            acc += s.w2().values()[r * hidden + c] * h[c];
        }
        out[r] = if acc > 0.0 { acc } else { 0.0 };
    }
    out
}

/// Straight-line evaluation of `y2 = x2 + F(x1); y1 = x1 + G(y2)`.
fn block_oracle(b: &CouplingBlock, x: &[f64]) -> Vec<f64> {
    let half = b.half_dim();
    let x1 = &x[..half];
    let x2 = &x[half..];
    let fx1 = subnet_oracle(b.f(), x1);
    let mut y2 = vec![0.0; half];
    for i in 0..half {
        y2[i] = x2[i] + fx1[i];
    }
    let gy2 = subnet_oracle(b.g(), &y2);
    let mut y = vec![0.0; 2 * half];
    for i in 0..half {
        y[i] = x1[i] + gy2[i];
        y[half + i] = y2[i];
    }
    y
}

fn random_vec(rng: &mut SeededRng, d: usize, sd: f64) -> Vec<f64> {
    (0..d).map(|_| rng.normal(0.0, sd)).collect()
}

/// Random model with non-zero biases so both rectifier regimes occur.
fn random_model(rng: &mut SeededRng, d: usize, blocks: usize, hidden: usize) -> InvNetModel {
    let mut m = InvNetModel::init(d, blocks, hidden, rng).unwrap();
    for block in &mut m.blocks {
        for s in [&mut block.f, &mut block.g] {
            for v in s.b1.iter_mut().chain(s.b2.iter_mut()) {
                *v = rng.normal(0.0, 0.3);
            }
        }
    }
    for v in &mut m.w {
        *v = rng.normal(0.0, 1.0);
    }
    m.b = rng.normal(0.0, 0.5);
    m
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn zero_subnets_are_identity() {
    let b = CouplingBlock::new(Subnet::zero(2, 5), Subnet::zero(2, 5)).unwrap();
    assert_eq!(b.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(b.inverse(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn constant_f_shifts_second_half() {
    let c = [0.5, 2.0];
    let b = CouplingBlock::new(Subnet::constant(2, 3, &c).unwrap(), Subnet::zero(2, 3)).unwrap();
    assert_eq!(b.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.5, 6.0]);
    assert_eq!(b.inverse(&[1.0, 2.0, 3.5, 6.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    assert!(Subnet::constant(2, 3, &[-1.0, 0.0]).is_err());
}

#[test]
fn block_matches_straight_line_oracle() {
    let mut rng = SeededRng::new(21);
    for _ in 0..50 {
        let m = random_model(&mut rng, 6, 1, 9);
        let x = random_vec(&mut rng, 6, 1.5);
        let got = m.blocks()[0].forward(&x).unwrap();
        let want = block_oracle(&m.blocks()[0], &x);
        assert!(max_abs_diff(&got, &want) < 1e-14);
    }
}

#[test]
fn block_rejects_wrong_lengths() {
    let b = CouplingBlock::new(Subnet::zero(2, 3), Subnet::zero(2, 3)).unwrap();
    assert!(matches!(b.forward(&[1.0, 2.0, 3.0]), Err(Error::Dimension { expected: 4, got: 3 })));
    assert!(b.inverse(&[1.0; 5]).is_err());
    assert!(CouplingBlock::new(Subnet::zero(2, 3), Subnet::zero(3, 3)).is_err());
}

#[test]
fn transform_composes_blocks() {
    let mut rng = SeededRng::new(4);
    let m1 = random_model(&mut rng, 8, 1, 6);
    let x = random_vec(&mut rng, 8, 1.0);
    assert_eq!(m1.transform(&x).unwrap(), m1.blocks()[0].forward(&x).unwrap());

    let m2 = random_model(&mut rng, 8, 2, 6);
    let manual = block_oracle(&m2.blocks()[1], &block_oracle(&m2.blocks()[0], &x));
    assert!(max_abs_diff(&m2.transform(&x).unwrap(), &manual) < 1e-13);
}

#[test]
fn identity_network_and_padding() {
    let m = InvNetModel::identity(3, 2, 4, vec![1.0, 1.0, 1.0, 1.0], 0.0).unwrap();
    assert!(m.padded());
    assert_eq!(m.feature_dim(), 4);
    assert_eq!(m.transform(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0, 0.0]);
    assert_eq!(m.inverse_transform(&[1.0, 2.0, 3.0, 0.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    assert!(matches!(m.transform(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    assert!(m.inverse_transform(&[1.0, 2.0, 3.0]).is_err());
}

#[test]
fn odd_dimension_round_trip() {
    let mut rng = SeededRng::new(8);
    for _ in 0..20 {
        let m = random_model(&mut rng, 7, 2, 5);
        let x = random_vec(&mut rng, 7, 1.0);
        let back = m.inverse_transform(&m.transform(&x).unwrap()).unwrap();
        assert!(max_abs_diff(&x, &back) < 1e-9);
    }
}

#[test]
fn round_trip_on_a_thousand_inputs() {
    let mut rng = SeededRng::new(99);
    let m = random_model(&mut rng, 10, 2, 16);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = random_vec(&mut rng, 10, 2.0);
        let z = m.transform(&x).unwrap();
        worst = worst.max(max_abs_diff(&x, &m.inverse_transform(&z).unwrap()));
        let zz = random_vec(&mut rng, 10, 2.0);
        let there = m.transform(&m.inverse_transform(&zz).unwrap()).unwrap();
        worst = worst.max(max_abs_diff(&zz, &there));
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn logit_examples() {
    let m = InvNetModel::identity(2, 1, 3, vec![1.0, 0.0], 0.0).unwrap();
    assert_eq!(m.logit(&[3.0, 4.0]).unwrap(), 3.0);
    assert_eq!(m.predict(&[3.0, 4.0]).unwrap(), 1);
    let m = InvNetModel::identity(2, 1, 3, vec![1.0, 0.0], -3.0).unwrap();
    assert_eq!(m.logit(&[3.0, 4.0]).unwrap(), 0.0);
    assert_eq!(m.predict(&[3.0, 4.0]).unwrap(), 0);

    let mut rng = SeededRng::new(6);
    let m = random_model(&mut rng, 4, 2, 5);
    let mut neg = m.clone();
    neg.w.iter_mut().for_each(|v| *v = -*v);
    neg.b = -neg.b;
    for _ in 0..20 {
        let x = random_vec(&mut rng, 4, 1.0);
        let (a, b) = (m.logit(&x).unwrap(), neg.logit(&x).unwrap());
        assert_eq!(a, -b);
        if a != 0.0 {
            assert_ne!(m.predict(&x).unwrap(), neg.predict(&x).unwrap());
        }
    }
}

#[test]
fn gradient_of_linear_models_is_w() {
    let w = vec![0.5, -1.5, 2.0, 0.25];
    let m = InvNetModel::identity(4, 2, 3, w.clone(), 0.1).unwrap();
    assert_eq!(m.input_gradient(&[9.0, -3.0, 0.0, 1.0]).unwrap(), w);
}

/// Central differences of the logit; `None` if a rectifier changes state
/// inside the stencil (the logit is not smooth there).
pub(super) fn finite_difference(m: &InvNetModel, x: &[f64], h: f64) -> Option<Vec<f64>> {
    let pattern = |p: &[f64]| -> Vec<bool> {
        let mut z = p.to_vec();
        if m.padded {
            z.push(0.0);
        }
        let mut bits = Vec::new();
        for b in &m.blocks {
            let half = b.half_dim();
            let (x1, x2) = z.split_at(half);
            let (fx, ft) = b.f.eval_taped(x1);
            let y2: Vec<f64> = x2.iter().zip(&fx).map(|(a, c)| a + c).collect();
            let (gy, gt) = b.g.eval_taped(&y2);
            for t in [&ft, &gt] {
                bits.extend(t.pre_hidden.iter().map(|v| *v > 0.0));
                bits.extend(t.pre_out.iter().map(|v| *v > 0.0));
            }
            let mut y: Vec<f64> = x1.iter().zip(&gy).map(|(a, c)| a + c).collect();
            y.extend_from_slice(&y2);
            z = y;
        }
        bits
    };
    let base = pattern(x);
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[i] += h;
        down[i] -= h;
        if pattern(&up) != base || pattern(&down) != base {
            return None;
        }
        g.push((m.logit(&up).unwrap() - m.logit(&down).unwrap()) / (2.0 * h));
    }
    Some(g)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(31);
    let mut checked = 0;
    while checked < 100 {
        let d = [2usize, 5, 10][checked % 3];
        let m = random_model(&mut rng, d, 2, 12);
        let x = random_vec(&mut rng, d, 1.0);
        let Some(fd) = finite_difference(&m, &x, 1e-5) else { continue };
        let g = m.input_gradient(&x).unwrap();
        let err = max_abs_diff(&g, &fd) / crate::linalg::norm2(&fd).max(1e-8);
        assert!(err < 1e-4, "relative error {err}");
        checked += 1;
    }
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(77);
    let m = random_model(&mut rng, 4, 2, 5);
    let x = random_vec(&mut rng, 4, 1.0);
    let label = 1.0;
    let tape = m.forward_taped(&x).unwrap();
    let logit = m.feature_logit(&tape.features);
    let dl = 1.0 / (1.0 + (-logit).exp()) - label;
    let mut grads = m.zeros_like();
    m.backward(&tape, dl, Some(&mut grads));
    let analytic = grads.parameter_vector();

    let loss = |model: &InvNetModel| train::bce_with_logit(model.logit(&x).unwrap(), label);
    let base = m.parameter_vector();
    let h = 1e-6;
    for k in (0..base.len()).step_by(7) {
        let mut plus = m.clone();
        let mut minus = m.clone();
        let mut delta = vec![0.0; base.len()];
        delta[k] = 1.0;
        plus.apply_update(&m.zeros_like_with(&delta), -h);
        minus.apply_update(&m.zeros_like_with(&delta), h);
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
        assert!(
            (numeric - analytic[k]).abs() < 1e-6 * (1.0 + analytic[k].abs()),
            "param {k}: {numeric} vs {}",
            analytic[k]
        );
    }
}

impl InvNetModel {
    /// Same-shaped model whose flattened parameters are `flat`.
    fn zeros_like_with(&self, flat: &[f64]) -> InvNetModel {
        let mut m = self.zeros_like();
        let mut offset = 0;
        m.for_each_parameter_mut(|p| {
            for v in p.iter_mut() {
                *v = flat[offset];
                offset += 1;
            }
        });
        m
    }
}

#[test]
fn feature_domain_classifier_is_exactly_linear() {
    let mut rng = SeededRng::new(13);
    let m = random_model(&mut rng, 6, 2, 8);
    for _ in 0..100 {
        let z = random_vec(&mut rng, 6, 2.0);
        let via_input = m.logit(&m.inverse_transform(&z).unwrap()).unwrap();
        let direct = m.feature_logit(&z);
        assert!((via_input - direct).abs() <= 1e-8 * (1.0 + direct.abs()));
    }
}

fn blobs(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = SeededRng::new(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let c = if i % 2 == 0 { -2.0 } else { 2.0 };
            vec![rng.normal(c, 0.5), rng.normal(c, 0.5)]
        })
        .collect();
    let labels = (0..n).map(|i| (i % 2) as u8).collect();
    LabeledDataset::new(DenseMatrix::from_rows(&rows).unwrap(), labels).unwrap()
}

fn accuracy(m: &InvNetModel, ds: &LabeledDataset) -> f64 {
    let correct = (0..ds.len())
        .filter(|&i| m.predict(ds.features().row(i)).unwrap() == ds.labels()[i])
        .count();
    correct as f64 / ds.len() as f64
}

#[test]
fn zero_learning_rate_keeps_initialization() {
    let ds = blobs(40, 1);
    let cfg = TrainConfig { learning_rate: 0.0, epochs: 3, hidden_dim: 8, seed: 5, ..Default::default() };
    let out = train(&ds, &cfg).unwrap();
    let init = InvNetModel::init(2, cfg.num_blocks, 8, &mut SeededRng::new(5).child("init")).unwrap();
    assert_eq!(out.model, init);
    assert_eq!(out.loss_history.len(), 3);
}

#[test]
fn separable_blobs_train_to_full_accuracy() {
    let ds = blobs(200, 2);
    let cfg = TrainConfig { learning_rate: 1e-2, epochs: 50, ..Default::default() };
    let out = train(&ds, &cfg).unwrap();
    assert_eq!(accuracy(&out.model, &ds), 1.0);
    assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
}

#[test]
fn training_is_bitwise_deterministic() {
    let ds = two_moons(100, 0.1, &mut SeededRng::new(0)).unwrap();
    let cfg = TrainConfig { epochs: 5, hidden_dim: 16, seed: 9, ..Default::default() };
    let a = train(&ds, &cfg).unwrap();
    let b = train(&ds, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.loss_history), bits(&b.loss_history));
}

#[test]
fn training_rejects_empty_dataset() {
    let ds = LabeledDataset::new(DenseMatrix::zeros(0, 2), vec![]).unwrap();
    assert!(matches!(train(&ds, &TrainConfig::default()), Err(Error::Input(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_property(seed in any::<u64>(), d in 1usize..24, blocks in 1usize..4, scale in 0.1..10.0f64) {
        let mut rng = SeededRng::new(seed);
        let m = random_model(&mut rng, d, blocks, 8);
        let x = random_vec(&mut rng, d, scale);
        let back = m.inverse_transform(&m.transform(&x).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&x, &back) < 1e-6);
    }
}
