use super::*;
use crate::data::{DatasetMeta, DomainTag, LabeledFrame, SensorFrame};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(window: usize, fc1: usize, layers: usize, hidden: usize, fc2: usize) -> RegressorConfig {
    RegressorConfig { window, fc1_out: fc1, lstm_layers: layers, lstm_hidden: hidden, fc2_out: fc2, ..RegressorConfig::default() }
}

/// Random parameters everywhere, biases included, so checks run away from
/// the ReLU kinks that an all-zero-bias init sits on.
fn generic_model(cfg: RegressorConfig, rng: &mut ChaCha8Rng) -> RegressorModel {
    let mut m = RegressorModel::zeros(cfg).unwrap();
    m.params.iter_mut().for_each(|p| *p = rng.random_range(-0.6..0.6));
    m
}

fn random_windows(rng: &mut ChaCha8Rng, n: usize, w: usize) -> Vec<Vec<[f64; 2]>> {
    (0..n).map(|_| (0..w).map(|_| [rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)]).collect()).collect()
}

#[test]
fn default_parameter_count_is_frozen() {
    // fc1 2*256+256, three LSTM layers 4*256*(256+256)+4*256 each,
    // fc2 3072*128+128, fc3 128+1.
    assert_eq!(RegressorConfig::default().param_count(), 1_970_177);
}

#[test]
fn parameter_count_matches_layout_for_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let cfg = tiny(rng.random_range(1..8), rng.random_range(1..10), rng.random_range(1..4), rng.random_range(1..10), rng.random_range(1..10));
        let m = init_model(cfg, 3).unwrap();
        assert_eq!(m.params.len(), cfg.param_count());
        assert_eq!(net::Layout::new(&cfg).total, cfg.param_count());
    }
}

#[test]
fn init_is_deterministic_and_bounded() {
    let cfg = tiny(3, 4, 2, 5, 6);
    let a = init_model(cfg, 17).unwrap();
    let b = init_model(cfg, 17).unwrap();
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, init_model(cfg, 18).unwrap().params);
    let l = net::Layout::new(&cfg);
    assert!(a.params[l.fc1_b..l.fc1_b + 4].iter().all(|&v| v == 0.0));
    assert!(a.params[l.fc1_w..l.fc1_w + 8].iter().all(|v| v.abs() <= 1.0 / 2f64.sqrt()));
    assert_eq!(a.params[l.fc3_b], 0.0);
    let lstm = &l.lstm[1];
    let w = &a.params[lstm.w_ih..lstm.b];
    assert!(w.iter().all(|v| v.abs() <= 1.0 / 5f64.sqrt()));
    assert!(w.iter().any(|v| v.abs() > 1.0 / 10f64.sqrt()));
    assert!(a.params[lstm.b..lstm.b + 20].iter().all(|&v| v == 0.0));
}

#[test]
fn zero_network_outputs_zero() {
    let m = RegressorModel::zeros(tiny(4, 3, 3, 2, 5)).unwrap();
    assert_eq!(m.forward(&[[100.0, 300.0]; 4]).unwrap(), 0.0);
    assert_eq!(m.forward(&[[0.0, 1023.0]; 4]).unwrap(), 0.0);
}

#[test]
fn forward_rejects_bad_shape_and_non_finite() {
    let m = init_model(tiny(3, 2, 1, 2, 2), 1).unwrap();
    assert_eq!(m.forward(&[[0.0; 2]; 2]).unwrap_err().kind(), "shape");
    assert_eq!(m.forward(&[[0.0, 1.0], [f64::NAN, 0.0], [0.0, 0.0]]).unwrap_err().kind(), "non-finite-input");
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

#[test]
fn matches_hand_rolled_lstm() {
    // W=2, FC1 2->2, two LSTM layers of 3, FC2 12->2, FC3 2->1.
    let cfg = tiny(2, 2, 2, 3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mat = |r: usize, c: usize| -> Vec<Vec<f64>> { (0..r).map(|_| (0..c).map(|_| rng.random_range(-0.8..0.8)).collect()).collect() };
    let w1 = mat(2, 2);
    let b1 = mat(1, 2).remove(0);
    let wih = [mat(12, 2), mat(12, 3)];
    let whh = [mat(12, 3), mat(12, 3)];
    let bl = [mat(1, 12).remove(0), mat(1, 12).remove(0)];
    let w2 = mat(2, 12);
    let b2 = mat(1, 2).remove(0);
    let w3 = mat(1, 2);
    let b3 = 0.3;

    let mut params = Vec::new();
    w1.iter().for_each(|r| params.extend(r));
    params.extend(&b1);
    for l in 0..2 {
        wih[l].iter().for_each(|r| params.extend(r));
        whh[l].iter().for_each(|r| params.extend(r));
        params.extend(&bl[l]);
    }
    w2.iter().for_each(|r| params.extend(r));
    params.extend(&b2);
    params.extend(&w3[0]);
    params.push(b3);
    assert_eq!(params.len(), cfg.param_count());
    let model = RegressorModel { config: cfg, params, norm: NormStats::identity(), label_scale: 180.0 };

    let xs = [[0.2, -0.4], [0.9, 0.1]];
    let mut seq: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| matvec(&w1, x).iter().zip(&b1).map(|(a, b)| (a + b).max(0.0)).collect())
        .collect();
    let mut last_c = Vec::new();
    for l in 0..2 {
        let mut h = vec![0.0; 3];
        let mut c = vec![0.0; 3];
        let mut hs = Vec::new();
        last_c.clear();
        for x in &seq {
            let a = matvec(&wih[l], x);
            let r = matvec(&whh[l], &h);
            let pre: Vec<f64> = (0..12).map(|k| a[k] + r[k] + bl[l][k]).collect();
            for j in 0..3 {
                let i = sig(pre[j]);
                let f = sig(pre[3 + j]);
                let g = pre[6 + j].tanh();
                let o = sig(pre[9 + j]);
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            hs.push(h.clone());
            last_c.push(c.clone());
        }
        seq = hs;
    }
    let mut feat = Vec::new();
    for t in 0..2 {
        feat.extend(&seq[t]);
        feat.extend(&last_c[t]);
    }
    let z2: Vec<f64> = matvec(&w2, &feat).iter().zip(&b2).map(|(a, b)| (a + b).max(0.0)).collect();
    let y = (w3[0][0] * z2[0] + w3[0][1] * z2[1] + b3) * 180.0;

    let got = model.forward(&xs).unwrap();
    assert!((got - y).abs() <= 1e-12, "{got} vs {y}");
}

#[test]
fn duplicate_windows_give_identical_outputs() {
    let m = init_model(tiny(3, 4, 2, 3, 4), 2).unwrap();
    let w = vec![[10.0, 20.0], [11.0, 19.0], [12.0, 18.0]];
    assert_eq!(m.forward(&w).unwrap().to_bits(), m.forward(&w).unwrap().to_bits());
}

#[test]
fn mae_cases() {
    assert_eq!(loss_mae(&[4.0, 5.0], &[4.0, 5.0]).unwrap(), 0.0);
    assert_eq!(loss_mae(&[1.0, 3.0], &[2.0, 5.0]).unwrap(), 1.5);
    assert_eq!(loss_mae(&[], &[]).unwrap_err().kind(), "empty");
    assert_eq!(loss_mae(&[1.0], &[1.0, 2.0]).unwrap_err().kind(), "shape");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..180.0)).collect();
    let y: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..180.0)).collect();
    let mut rev = 0.0;
    for i in (0..100).rev() {
        rev += (p[i] - y[i]).abs();
    }
    assert!((loss_mae(&p, &y).unwrap() - rev / 100.0).abs() <= 1e-12);
}

#[test]
fn zero_residual_gives_zero_gradient() {
    let m = init_model(tiny(3, 3, 2, 3, 3), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ws = random_windows(&mut rng, 4, 3);
    let ys: Vec<f64> = ws.iter().map(|w| m.forward(w).unwrap()).collect();
    assert!(batch_gradient(&m, &ws, &ys).unwrap().iter().all(|&g| g == 0.0));
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..24u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let cfg = tiny(rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=4));
        let m = generic_model(cfg, &mut rng);
        let ws = random_windows(&mut rng, 3, cfg.window);
        let ys: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..180.0)).collect();
        let chk = finite_difference_check(&m, &ws, &ys, 1e-5).unwrap();
        assert!(chk.max_rel_err <= 1e-4, "seed {seed} cfg {cfg:?}: {chk:?}");
    }
}

#[test]
fn negated_problem_negates_fc3_gradient() {
    let cfg = tiny(2, 3, 1, 3, 4);
    let m = init_model(cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ws = random_windows(&mut rng, 5, 2);
    let ys: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..180.0)).collect();
    let g = batch_gradient(&m, &ws, &ys).unwrap();
    let mut neg = m.clone();
    let l = net::Layout::new(&cfg);
    for p in &mut neg.params[l.fc3_w..=l.fc3_b] {
        *p = -*p;
    }
    let ys_neg: Vec<f64> = ys.iter().map(|y| -y).collect();
    let gn = batch_gradient(&neg, &ws, &ys_neg).unwrap();
    for k in l.fc3_w..=l.fc3_b {
        assert_eq!(gn[k], -g[k]);
    }
}

#[test]
fn lr_schedule() {
    let tc = TrainConfig::default();
    assert_eq!(lr_at(&tc, 0), 1e-3);
    assert!((lr_at(&tc, 1000) - 8.10672270816756e-4).abs() <= 1e-15);
    let mut prev = lr_at(&tc, 0);
    for it in [1u64, 10, 1_000, 100_000, 10_000_000, 1_000_000_000] {
        let lr = lr_at(&tc, it);
        assert!(lr < prev);
        prev = lr;
    }
    assert!(prev < 1e-6);
    let ex = TrainConfig { schedule: Schedule::Exponential, ..tc };
    assert_eq!(lr_at(&ex, 0), 1e-3);
    assert!((lr_at(&ex, 1000) - 1e-3 * 0.8f64.powf(0.3)).abs() < 1e-18);
}

#[test]
fn plain_sgd_step_is_exact() {
    let mut sgd = train::Sgd::new(3, 0.0, 0.0);
    let mut p = vec![0.3, -1.25, 7.0];
    let g = [0.1, 2.0, -0.7];
    let lr = 0.013;
    let expected: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p - lr * g).collect();
    sgd.step(&mut p, &g, lr);
    assert_eq!(p, expected);
}

fn labeled(readings: &[[f64; 2]], labels: &[f64]) -> Dataset {
    let frames = readings
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&r, &a))| LabeledFrame { frame: SensorFrame { t: i as i64, r }, angle_deg: a })
        .collect();
    Dataset::labeled(frames, DatasetMeta::new(DomainTag::Source, "test")).unwrap()
}

fn wavy(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| {
        let s = (i as f64 * 0.05).sin();
        [300.0 + 200.0 * s + rng.random_range(-5.0..5.0), 500.0 - 150.0 * s + rng.random_range(-5.0..5.0)]
    }).collect()
}

#[test]
fn learns_a_constant() {
    let ds = labeled(&wavy(400, 1), &[72.0; 400]);
    let mut m = init_model(tiny(3, 4, 1, 4, 4), 2).unwrap();
    let tc = TrainConfig { epochs: 40, seed: 2, ..TrainConfig::default() };
    let trace = train(&mut m, &ds, &tc).unwrap();
    assert_eq!(trace.supervised.len(), 40);
    assert!(trace.transfer.is_empty());
    let preds = m.predict_series(&ds).unwrap();
    let mae = loss_mae(&preds, ds.labels().unwrap()).unwrap();
    assert!(mae <= 0.5, "constant-label MAE {mae}");
}

#[test]
fn training_is_deterministic() {
    let r = wavy(200, 3);
    let y: Vec<f64> = (0..200).map(|i| 90.0 + 40.0 * (i as f64 * 0.05).sin()).collect();
    let ds = labeled(&r, &y);
    let tc = TrainConfig { epochs: 3, seed: 9, ..TrainConfig::default() };
    let run = || {
        let mut m = init_model(tiny(4, 5, 2, 4, 6), 9).unwrap();
        let t = train(&mut m, &ds, &tc).unwrap();
        (m, t)
    };
    let (a, ta) = run();
    let (b, tb) = run();
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(ta, tb);
}

#[test]
fn training_validates_inputs() {
    let ds = labeled(&wavy(3, 1), &[10.0; 3]);
    let mut m = init_model(tiny(4, 2, 1, 2, 2), 1).unwrap();
    assert_eq!(train(&mut m, &ds, &TrainConfig::default()).unwrap_err().kind(), "insufficient-data");
    let unl = crate::data::strip_labels(&labeled(&wavy(10, 1), &[10.0; 10])).unwrap();
    assert_eq!(train(&mut m, &unl, &TrainConfig::default()).unwrap_err().kind(), "labels-required");
    let bad = TrainConfig { batch: 0, ..TrainConfig::default() };
    assert_eq!(train(&mut m, &labeled(&wavy(10, 1), &[10.0; 10]), &bad).unwrap_err().kind(), "config");
}

#[test]
fn exploding_training_reports_numerical_error() {
    let ds = labeled(&wavy(64, 4), &(0..64).map(|i| (i % 180) as f64).collect::<Vec<_>>());
    let mut m = init_model(tiny(2, 3, 1, 3, 3), 1).unwrap();
    let tc = TrainConfig { lr0: 1e200, momentum: 0.0, epochs: 5, ..TrainConfig::default() };
    assert_eq!(train(&mut m, &ds, &tc).unwrap_err().kind(), "numerical");
}

#[test]
fn prediction_padding_and_cardinality() {
    let m = init_model(tiny(4, 3, 2, 3, 3), 11).unwrap();
    let r = wavy(4, 2);
    let ds = crate::data::strip_labels(&labeled(&r, &[0.0; 4])).unwrap();
    let preds = m.predict_series(&ds).unwrap();
    assert_eq!(preds.len(), 4);
    assert_eq!(preds[0], m.forward(&[r[0]; 4]).unwrap());
    assert_eq!(preds[2], m.forward(&[r[0], r[0], r[1], r[2]]).unwrap());
    assert_eq!(preds[3], m.forward(&r).unwrap());

    let flat = labeled(&[[400.0, 600.0]; 10], &[0.0; 10]);
    let p = m.predict_series(&flat).unwrap();
    assert!(p.iter().all(|&v| v == p[0]));
}

#[test]
fn model_text_round_trip_is_exact() {
    let mut m = init_model(tiny(3, 4, 2, 3, 5), 21).unwrap();
    m.norm = NormStats { lo: [12.5, 1.0 / 3.0], hi: [1000.125, 800.0 + 1e-9] };
    m.params[0] = 1e-300;
    m.params[1] = -0.0;
    let back = RegressorModel::from_text(&m.to_text()).unwrap();
    assert_eq!(back.config, m.config);
    assert_eq!(back.norm, m.norm);
    assert!(back.params.iter().zip(&m.params).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back.to_text(), m.to_text());

    let truncated: String = m.to_text().lines().take(20).collect::<Vec<_>>().join("\n");
    assert_eq!(RegressorModel::from_text(&truncated).unwrap_err().kind(), "format");
    assert_eq!(RegressorModel::from_text("nonsense").unwrap_err().kind(), "format");
}

/// True if some parameter's ±eps stencil crosses a ReLU or |·| switch: the
/// one-sided slopes then disagree by far more than curvature allows.
fn straddles_kink(m: &RegressorModel, ws: &[Vec<[f64; 2]>], ys: &[f64], eps: f64) -> bool {
    let loss = |p: &RegressorModel| -> f64 {
        ws.iter().zip(ys).map(|(w, y)| (p.forward(w).unwrap() - y).abs() / p.label_scale).sum::<f64>() / ws.len() as f64
    };
    let f0 = loss(m);
    (0..m.params.len()).any(|k| {
        let mut p = m.clone();
        p.params[k] += eps;
        let up = (loss(&p) - f0) / eps;
        p.params[k] -= 2.0 * eps;
        let down = (f0 - loss(&p)) / eps;
        (up - down).abs() > 1e-3 * up.abs().max(down.abs()).max(1e-3)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn random_tiny_gradients_agree(seed in 0u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = tiny(rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=3));
        let m = generic_model(cfg, &mut rng);
        let ws = random_windows(&mut rng, 2, cfg.window);
        let ys = [rng.random_range(0.0..180.0), rng.random_range(0.0..180.0)];
        prop_assume!(!straddles_kink(&m, &ws, &ys, 1e-5));
        let chk = finite_difference_check(&m, &ws, &ys, 1e-5).unwrap();
        prop_assert!(chk.max_rel_err <= 1e-4, "{:?} {:?}", cfg, chk);
    }

    #[test]
    fn forward_is_pure(seed in 0u64..1000, a in 0.0f64..1023.0, b in 0.0f64..1023.0) {
        let m = init_model(tiny(2, 3, 2, 2, 3), seed).unwrap();
        let w = [[a, b], [b, a]];
        prop_assert_eq!(m.forward(&w).unwrap().to_bits(), m.forward(&w).unwrap().to_bits());
    }
}


