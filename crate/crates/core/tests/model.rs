use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retromix::model::{
    backward, decoder_input, encode, forward, init_params, log_sum_exp, mixture_log_likelihood, per_latent_log_probs,
    sequence_log_prob, target_ids, DropoutMode, IncrementalDecoder, ModelConfig, ModelParams, BOS,
};

fn tiny(k: usize, seed: u64) -> ModelParams {
    init_params(&ModelConfig::tiny(12, k), seed).unwrap()
}

const X: [u32; 5] = [3, 7, 4, 9, 5];
const Y: [u32; 3] = [6, 8, 10];

#[test]
fn rows_are_normalized_and_deterministic() {
    let p = tiny(2, 1);
    let y = decoder_input(&target_ids(&Y));
    let a = forward(&p, &X, &y, 1, DropoutMode::Off).unwrap();
    for t in 0..a.len {
        let s: f64 = a.row(t).iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
    let b = forward(&p, &X, &y, 1, DropoutMode::Off).unwrap();
    assert_eq!(a, b);
    let on1 = forward(&p, &X, &y, 1, DropoutMode::On { seed: 3 }).unwrap();
    let on2 = forward(&p, &X, &y, 1, DropoutMode::On { seed: 3 }).unwrap();
    assert_eq!(on1, on2);
    assert_ne!(on1, a);
}

#[test]
fn latent_classes_change_logits() {
    let p = tiny(2, 5);
    let y = decoder_input(&target_ids(&Y));
    let a = forward(&p, &X, &y, 0, DropoutMode::Off).unwrap();
    let b = forward(&p, &X, &y, 1, DropoutMode::Off).unwrap();
    assert!(a.data.iter().zip(&b.data).any(|(u, v)| u != v));
}

#[test]
fn decoder_is_causal() {
    let p = tiny(1, 2);
    let y1 = vec![BOS, 4, 5, 6];
    let y2 = vec![BOS, 4, 9, 6];
    let a = forward(&p, &X, &y1, 0, DropoutMode::Off).unwrap();
    let b = forward(&p, &X, &y2, 0, DropoutMode::Off).unwrap();
    assert_eq!(a.row(0), b.row(0));
    assert_eq!(a.row(1), b.row(1));
    assert_ne!(a.row(2), b.row(2));
}

#[test]
fn stepwise_matches_full_pass() {
    let p = init_params(&ModelConfig::toy(20, 3), 8).unwrap();
    let x = [3, 4, 5, 6, 7, 8, 9];
    let y = target_ids(&[10, 11, 12, 13, 14]);
    for z in 0..3 {
        let full = sequence_log_prob(&p, &x, &y, z, DropoutMode::Off).unwrap();
        let enc = encode(&p, &x, DropoutMode::Off).unwrap();
        let dec = IncrementalDecoder::new(&p, &enc);
        let mut st = dec.start(z).unwrap();
        let mut prev = BOS;
        let mut sum = 0.0;
        for &t in &y {
            let row = dec.step(&mut st, prev).unwrap();
            sum += row[t as usize];
            prev = t;
        }
        assert!((sum - full).abs() < 1e-9, "{sum} vs {full}");
    }
}

#[test]
fn single_term_and_empty_targets() {
    let p = tiny(1, 3);
    let y = target_ids(&[]);
    assert_eq!(y.len(), 1);
    let lp = sequence_log_prob(&p, &X, &y, 0, DropoutMode::Off).unwrap();
    let rows = forward(&p, &X, &[BOS], 0, DropoutMode::Off).unwrap();
    assert_eq!(lp, rows.row(0)[y[0] as usize]);
    assert_eq!(sequence_log_prob(&p, &X, &[], 0, DropoutMode::Off).unwrap(), 0.0);
    let g = backward(&p, &X, &[], 0, DropoutMode::Off).unwrap();
    assert!(g.data.iter().all(|&v| v == 0.0));
}

#[test]
fn near_uniform_params_score_near_l_log_v() {
    let cfg = ModelConfig::toy(20, 1);
    let mut p = init_params(&cfg, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for v in &mut p.data {
        *v = rng.gen_range(-0.01..0.01);
    }
    let y = target_ids(&[5, 6, 7, 8, 9, 10, 11]);
    let lp = sequence_log_prob(&p, &[3, 4, 5], &y, 0, DropoutMode::Off).unwrap();
    let expect = -(y.len() as f64) * (20f64).ln();
    assert!(((lp - expect) / expect).abs() < 0.10, "{lp} vs {expect}");
}

#[test]
fn mixture_reductions() {
    let y = target_ids(&Y);
    let p1 = tiny(1, 4);
    let single = sequence_log_prob(&p1, &X, &y, 0, DropoutMode::Off).unwrap();
    let mix = mixture_log_likelihood(&p1, &X, &y, DropoutMode::Off).unwrap();
    assert_eq!(mix.to_bits(), single.to_bits());

    let mut p5 = tiny(5, 4);
    let row0 = p5.latent_row(0).to_vec();
    for z in 1..5 {
        let r = p5.latent_range(z);
        p5.data[r].copy_from_slice(&row0);
    }
    let one = sequence_log_prob(&p5, &X, &y, 3, DropoutMode::Off).unwrap();
    let mix = mixture_log_likelihood(&p5, &X, &y, DropoutMode::Off).unwrap();
    assert!((mix - one).abs() < 1e-9);

    let p3 = tiny(3, 6);
    let lps: Vec<f64> = (0..3)
        .map(|z| sequence_log_prob(&p3, &X, &y, z, DropoutMode::Off).unwrap())
        .collect();
    let direct = (lps.iter().map(|v| v.exp()).sum::<f64>() / 3.0).ln();
    let mix = mixture_log_likelihood(&p3, &X, &y, DropoutMode::Off).unwrap();
    assert!((mix - direct).abs() < 1e-12);
    assert_eq!(per_latent_log_probs(&p3, &X, &y, DropoutMode::Off).unwrap(), lps);
    assert!((log_sum_exp(&lps) - (3f64).ln() - direct).abs() < 1e-12);
}

fn finite_difference_check(dm: DropoutMode) {
    let mut p = tiny(2, 11);
    let y = target_ids(&Y);
    let z = 1;
    let g = backward(&p, &X, &y, z, dm).unwrap();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..p.data.len() {
        let orig = p.data[i];
        p.data[i] = orig + eps;
        let up = -sequence_log_prob(&p, &X, &y, z, dm).unwrap();
        p.data[i] = orig - eps;
        let down = -sequence_log_prob(&p, &X, &y, z, dm).unwrap();
        p.data[i] = orig;
        let fd = (up - down) / (2.0 * eps);
        let err = (g.data[i] - fd).abs();
        assert!(err <= 1e-6 + 1e-3 * fd.abs(), "param {i}: analytic {} vs numeric {fd}", g.data[i]);
        worst = worst.max(err);
    }
    let other = p.latent_range(0);
    assert!(g.data[other].iter().all(|&v| v == 0.0));
    assert!(worst < 1e-6);
}

#[test]
fn gradients_match_finite_differences() {
    finite_difference_check(DropoutMode::Off);
}

#[test]
fn gradients_match_finite_differences_with_fixed_dropout() {
    finite_difference_check(DropoutMode::On { seed: 21 });
}

#[test]
fn input_errors() {
    let p = tiny(2, 1);
    assert!(forward(&p, &[], &[BOS], 0, DropoutMode::Off).is_err());
    assert!(forward(&p, &[99], &[BOS], 0, DropoutMode::Off).is_err());
    assert!(forward(&p, &X, &[BOS], 2, DropoutMode::Off).is_err());
    let long = vec![3u32; 17];
    assert!(forward(&p, &long, &[BOS], 0, DropoutMode::Off).is_err());
}
