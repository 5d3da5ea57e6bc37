use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retromix::decode::{
    beam_search, canonical_reactants, mean_pairwise_token_distance, merge_pools, pairwise_distinct_fraction,
    predict_pools, predict_reactants, predict_topk, read_predictions, write_predictions, BeamConfig, Hypothesis,
    Prediction, PredictionList, StepScorer, TransitionModel,
};
use retromix::model::{forward, init_params, DropoutMode, ModelConfig, Vocab, BOS, EOS};

const SYMBOLS: [u32; 3] = [3, 4, 5];
const WIDTH: usize = 6;

fn bc(b: usize, max_len: usize) -> BeamConfig {
    BeamConfig {
        beam_width: b,
        max_len,
        alpha: 0.0,
    }
}

/// Row over ids 0..6 with zero mass on BOS and PAD.
fn row(eos: f64, a: f64, b: f64, c: f64) -> Vec<f64> {
    vec![0.0, eos, 0.0, a, b, c]
}

fn random_table(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..WIDTH)
        .map(|_| row(rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0)))
        .collect()
}

/// Every non-empty sequence up to `max_len`, scored and ranked best first.
fn exhaustive(m: &TransitionModel, z: usize, max_len: usize) -> Vec<(Vec<u32>, f64)> {
    let mut all: Vec<Vec<u32>> = SYMBOLS.iter().map(|&s| vec![s]).collect();
    let mut frontier = all.clone();
    for _ in 1..max_len {
        let mut next = Vec::new();
        for p in &frontier {
            for &s in &SYMBOLS {
                let mut q = p.clone();
                q.push(s);
                next.push(q);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    let mut scored: Vec<(Vec<u32>, f64)> = all.into_iter().map(|s| (s.clone(), m.sequence_log_prob(z, &s))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

fn greedy(m: &TransitionModel, z: usize, max_len: usize) -> Vec<u32> {
    let mut prev = BOS;
    let mut out = Vec::new();
    loop {
        let r = &m.log_probs[z][prev as usize];
        let allowed: Vec<u32> = if out.len() >= max_len {
            vec![EOS]
        } else if out.is_empty() {
            SYMBOLS.to_vec()
        } else {
            std::iter::once(EOS).chain(SYMBOLS).collect()
        };
        let best = *allowed
            .iter()
            .reduce(|a, b| if r[*b as usize] > r[*a as usize] { b } else { a })
            .unwrap();
        if best == EOS {
            return out;
        }
        out.push(best);
        prev = best;
    }
}

/// Hand-built table where stopping dominates after every symbol.
fn toy_model() -> TransitionModel {
    let table = vec![
        row(0.1, 0.5, 0.3, 0.1),
        vec![1.0; WIDTH],
        vec![1.0; WIDTH],
        row(0.8, 0.02, 0.15, 0.03),
        row(0.7, 0.2, 0.05, 0.05),
        row(0.85, 0.05, 0.05, 0.05),
    ];
    TransitionModel::from_probs(&[table], 4)
}

#[test]
fn beam_equals_exhaustive_enumeration_on_toy_table() {
    let m = toy_model();
    let oracle = exhaustive(&m, 0, 4);
    for b in [1, 2, 4] {
        let got = beam_search(&m, 0, &bc(b, 4)).unwrap();
        assert_eq!(got.len(), b);
        for (h, (seq, lp)) in got.iter().zip(&oracle) {
            assert_eq!(&h.tokens, seq, "B={b}");
            assert!((h.log_prob - lp).abs() < 1e-12);
        }
    }
}

#[test]
fn full_width_beam_is_exhaustive_on_markov_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let m = TransitionModel::from_probs(&[random_table(&mut rng)], 4);
        let oracle = exhaustive(&m, 0, 4);
        assert_eq!(oracle.len(), 120);
        let got = beam_search(&m, 0, &bc(120, 4)).unwrap();
        let got: Vec<Vec<u32>> = got.into_iter().map(|h| h.tokens).collect();
        let want: Vec<Vec<u32>> = oracle.into_iter().map(|(s, _)| s).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn beam_outputs_are_sound_on_markov_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let m = TransitionModel::from_probs(&[random_table(&mut rng)], 4);
        let best = exhaustive(&m, 0, 4)[0].1;
        for b in [1, 2, 4] {
            let got = beam_search(&m, 0, &bc(b, 4)).unwrap();
            assert!(!got.is_empty() && got.len() <= b);
            for w in got.windows(2) {
                assert!(w[0].log_prob >= w[1].log_prob);
            }
            for h in &got {
                assert!(!h.tokens.is_empty() && h.tokens.len() <= 4);
                assert!((h.log_prob - m.sequence_log_prob(0, &h.tokens)).abs() < 1e-12);
                assert!(h.log_prob <= best + 1e-12);
            }
        }
    }
}

#[test]
fn width_one_is_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let m = TransitionModel::from_probs(&[random_table(&mut rng)], 4);
        let got = beam_search(&m, 0, &bc(1, 4)).unwrap();
        assert_eq!(got[0].tokens, greedy(&m, 0, 4));
    }
}

#[test]
fn width_one_is_greedy_for_the_transformer() {
    let p = init_params(&ModelConfig::tiny(12, 2), 4).unwrap();
    let x = [3, 5, 7, 9];
    let enc = retromix::model::encode(&p, &x, DropoutMode::Off).unwrap();
    let dec = retromix::model::IncrementalDecoder::new(&p, &enc);
    for z in 0..2 {
        let got = beam_search(&dec, z, &bc(1, 8)).unwrap();
        // Full-pass greedy rollout.
        let mut prefix = vec![BOS];
        let mut out = Vec::new();
        loop {
            let lp = forward(&p, &x, &prefix, z, DropoutMode::Off).unwrap();
            let r = lp.row(prefix.len() - 1);
            let mut best = None;
            for (t, &v) in r.iter().enumerate() {
                let t = t as u32;
                let banned = t == BOS || t == 2 || (t == EOS && out.is_empty()) || (t != EOS && out.len() >= 8);
                if !banned && best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((t, v));
                }
            }
            let (t, _) = best.unwrap();
            if t == EOS {
                break;
            }
            out.push(t);
            prefix.push(t);
        }
        assert_eq!(got[0].tokens, out);
        assert!((got[0].log_prob - retromix::model::sequence_log_prob(&p, &x, &retromix::model::target_ids(&out), z, DropoutMode::Off).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn length_normalization_reranks() {
    let m = toy_model();
    let raw = beam_search(&m, 0, &bc(4, 4)).unwrap();
    let norm = beam_search(&m, 0, &BeamConfig { alpha: 1.0, ..bc(4, 4) }).unwrap();
    for w in norm.windows(2) {
        assert!(w[0].score(1.0) >= w[1].score(1.0));
    }
    assert!(raw.iter().map(|h| h.tokens.len()).sum::<usize>() <= norm.iter().map(|h| h.tokens.len()).sum::<usize>());
}

/// Many-to-one key: the sorted token multiset; sequences containing id 5 twice are
/// rejected as invalid.
fn toy_key(t: &[u32]) -> Option<String> {
    if t.iter().filter(|&&x| x == 5).count() >= 2 {
        return None;
    }
    let mut s = t.to_vec();
    s.sort();
    Some(s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(""))
}

fn pool_sort_dedup(pools: &[Vec<Hypothesis>], k: usize) -> (Vec<(String, f64, usize)>, usize) {
    let mut best: std::collections::BTreeMap<String, (f64, usize)> = Default::default();
    let mut invalid = 0;
    for h in pools.iter().flatten() {
        let Some(key) = toy_key(&h.tokens) else {
            invalid += 1;
            continue;
        };
        let e = best.entry(key).or_insert((f64::NEG_INFINITY, usize::MAX));
        if h.log_prob > e.0 || (h.log_prob == e.0 && h.z < e.1) {
            *e = (h.log_prob, h.z);
        }
    }
    let mut v: Vec<(String, f64, usize)> = best.into_iter().map(|(k, (s, z))| (k, s, z)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    (v, invalid)
}

fn three_class_model(seed: u64) -> TransitionModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables: Vec<_> = (0..3).map(|_| random_table(&mut rng)).collect();
    TransitionModel::from_probs(&tables, 4)
}

#[test]
fn merge_equals_pool_sort_dedup_oracle() {
    for seed in 0..10 {
        let m = three_class_model(seed);
        let pools = predict_pools(&m, 5, &bc(10, 4)).unwrap();
        assert_eq!(pools.len(), 3);
        assert!(pools.iter().all(|p| p.len() == 10));
        for k in [1, 3, 5, 10] {
            let got = merge_pools(&pools, k, 0.0, toy_key);
            let (want, invalid) = pool_sort_dedup(&pools, k);
            assert_eq!(got.pooled, 30);
            assert_eq!(got.invalid, invalid);
            let got: Vec<(String, f64, usize)> = got.predictions.into_iter().map(|p| (p.key, p.score, p.z)).collect();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn duplicate_sets_keep_the_best_score() {
    let pools = vec![
        vec![Hypothesis { tokens: vec![3, 4], log_prob: -1.2, z: 0 }],
        vec![Hypothesis { tokens: vec![4, 3], log_prob: -0.7, z: 1 }],
    ];
    let got = merge_pools(&pools, 10, 0.0, toy_key);
    assert_eq!(got.predictions.len(), 1);
    assert_eq!(got.predictions[0].score, -0.7);
    assert_eq!(got.predictions[0].z, 1);
}

#[test]
fn equal_scores_prefer_lower_class() {
    let pools = vec![
        vec![Hypothesis { tokens: vec![4], log_prob: -1.0, z: 0 }],
        vec![Hypothesis { tokens: vec![3], log_prob: -1.0, z: 1 }],
    ];
    let got = merge_pools(&pools, 10, 0.0, toy_key);
    let keys: Vec<&str> = got.predictions.iter().map(|p| p.key.as_str()).collect();
    assert_eq!(keys, ["4", "3"]);
}

#[test]
fn single_class_is_deduplicated_beam() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = TransitionModel::from_probs(&[random_table(&mut rng)], 4);
    let beam = beam_search(&m, 0, &bc(10, 4)).unwrap();
    let got = predict_topk(&m, 10, &bc(10, 4), toy_key).unwrap();
    let mut seen = std::collections::HashSet::new();
    let want: Vec<String> = beam.iter().filter_map(|h| toy_key(&h.tokens)).filter(|k| seen.insert(k.clone())).collect();
    let keys: Vec<String> = got.predictions.iter().map(|p| p.key.clone()).collect();
    assert_eq!(keys, want);
}

#[test]
fn growing_k_extends_the_list() {
    let m = three_class_model(4);
    let full = predict_topk(&m, 10, &bc(10, 4), toy_key).unwrap().predictions;
    for k in 1..10 {
        let part = predict_topk(&m, k, &bc(10, 4), toy_key).unwrap().predictions;
        assert_eq!(part[..], full[..part.len()]);
        assert_eq!(part.len(), k.min(full.len()));
    }
    let again = predict_topk(&m, 10, &bc(10, 4), toy_key).unwrap().predictions;
    assert_eq!(again, full);
}

#[test]
fn transformer_predictions_are_valid_canonical_sets() {
    let vocab = Vocab::from_tokens(["C", "O", "N", "c", "1", "(", ")", "=", "."]);
    let mut cfg = ModelConfig::toy(vocab.len(), 2);
    cfg.max_len = 24;
    let p = init_params(&cfg, 12).unwrap();
    let src = vocab.encode(&["C", "C", "O"]).unwrap();
    let list = predict_reactants(&p, &vocab, &src, 10, &bc(10, 20)).unwrap();
    assert_eq!(list.pooled, 20);
    assert!(list.invalid_rate() >= 0.0 && list.invalid_rate() <= 1.0);
    let mut keys = std::collections::HashSet::new();
    for w in list.predictions.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
    for pr in &list.predictions {
        assert!(keys.insert(pr.key.clone()));
        assert_eq!(canonical_reactants(&vocab, &pr.tokens).as_deref(), Some(pr.key.as_str()));
        assert!(pr.log_prob <= 0.0);
    }
    assert_eq!(predict_reactants(&p, &vocab, &src, 10, &bc(10, 20)).unwrap(), list);
}

#[test]
fn canonical_keys_reject_garbage() {
    let vocab = Vocab::from_tokens(["C", "O", "(", "1", "c", "."]);
    let ids = |t: &[&str]| vocab.encode(t).unwrap();
    assert_eq!(canonical_reactants(&vocab, &ids(&["O", "C"])), canonical_reactants(&vocab, &ids(&["C", "O"])));
    assert_eq!(canonical_reactants(&vocab, &ids(&["C", "("])), None);
    assert_eq!(canonical_reactants(&vocab, &ids(&["C", "1"])), None);
    assert_eq!(canonical_reactants(&vocab, &ids(&["c"])), None);
    assert_eq!(canonical_reactants(&vocab, &ids(&["C", ".", "c", "c", "c"])), None);
    let ring = ids(&["c", "1", "c", "c", "c", "c", "c", "1"]);
    assert_eq!(canonical_reactants(&vocab, &ring).as_deref(), Some("c1ccccc1"));
}

#[test]
fn prediction_file_round_trip() {
    let list = PredictionList {
        predictions: vec![
            Prediction { key: "CCO".into(), tokens: vec![], log_prob: -0.5, score: -0.5, z: 0 },
            Prediction { key: "CC.O".into(), tokens: vec![], log_prob: -1.25, score: -1.25, z: 2 },
        ],
        pooled: 2,
        invalid: 0,
    };
    let mut buf = Vec::new();
    write_predictions(&mut buf, "rxn7", &list).unwrap();
    write_predictions(&mut buf, "rxn8", &PredictionList::default()).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text, "rxn7\t1\t1\t-0.500000\tCCO\nrxn7\t2\t3\t-1.250000\tCC.O\n");
    let back = read_predictions(&buf[..]).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].1[1].z, 2);
    assert_eq!(back[0].1[1].smiles, "CC.O");
    assert!(read_predictions(&b"x\t0\t1\t-1\tC\n"[..]).unwrap_err().contains("line 1"));
}

#[test]
fn distinctness_statistics() {
    let k = |s: &str| Some(s.to_string());
    assert_eq!(pairwise_distinct_fraction(&[k("A"), k("A"), k("B")]), Some(2.0 / 3.0));
    assert_eq!(pairwise_distinct_fraction(&[k("A"), None]), None);
    assert_eq!(mean_pairwise_token_distance(&[vec![1, 2, 3], vec![1, 2, 4], vec![1, 2, 3]]), Some(2.0 / 3.0));
}

#[test]
fn scorer_reports_latents() {
    let m = three_class_model(1);
    assert_eq!(m.num_latents(), 3);
    assert!(beam_search(&m, 3, &bc(2, 4)).is_err());
}
