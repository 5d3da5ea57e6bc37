use proptest::prelude::*;
use retromix::augment::{random_split, toy_reactions, TOY_CLASSES};
use retromix::eval::{
    canonical_set, latent_class_matrix, topk_accuracy, unique_reaction_count, EvalReport, ExamplePredictions,
    LatentPrediction, ReactionClassifier, SyntheticOracleClassifier, TemplateProxyClassifier, DEFAULT_KS,
};
use retromix::training::make_synthetic_multimodal;

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// (gold, ranked predictions, rank of the first correct prediction by hand)
const FIXTURE: [(&str, &[&str], Option<usize>); 20] = [
    ("CCO.CBr", &["BrC.OCC"], Some(1)),
    ("CCN", &["CCO", "NCC"], Some(2)),
    ("c1ccccc1Br", &["Brc1ccccc1"], Some(1)),
    ("CC(=O)O.N", &["CC(O)=O", "N.CC(=O)O"], Some(2)),
    ("CCCl", &[], None),
    ("CCO", &["CCC", "CCN", "CC", "CO", "OCC"], Some(5)),
    ("CCO", &["C(", "OCC"], Some(2)),
    ("c1ccncc1", &["n1ccccc1"], Some(1)),
    ("CC.O", &["CCO", "C.CO", "CC.O"], Some(3)),
    ("CBr.c1ccccc1O", &["Oc1ccccc1.BrC"], Some(1)),
    (
        "CN",
        &["CC", "CCC", "CCCC", "CCCCC", "CCCCCC", "CCCCCCC", "CCCCCCCC", "CCCCCCCCC", "CCCCCCCCCC", "NC"],
        Some(10),
    ),
    ("CCCC", &["CC(C)C"], None),
    ("CC=O", &["CC=O"], Some(1)),
    ("OC(=O)c1ccccc1", &["O=C(O)c1ccccc1"], Some(1)),
    ("CCOC(C)=O", &["CCO", "CC(=O)OCC"], Some(2)),
    ("[Na+].[Cl-]", &["[Cl-].[Na+]"], Some(1)),
    ("CCBr.CCO", &["CCBr", "CCO", "CCO.CCBr"], Some(3)),
    ("C1CCCCC1", &["C1CCCC1", "c1ccccc1", "CCCCCC", "C1CCCCC1"], Some(4)),
    ("N#N", &["N=N", "NN"], None),
    ("CO.CO", &["CO"], None),
];

#[test]
fn hand_labeled_fixture() {
    let gold: Vec<String> = FIXTURE.iter().map(|f| f.0.to_string()).collect();
    let preds: Vec<Vec<String>> = FIXTURE.iter().map(|f| strings(f.1)).collect();
    let acc = topk_accuracy(&preds, &gold, &DEFAULT_KS);
    // Counted by hand from the rank column: 7, 11, 13, 14, 15 and 16 of 20.
    assert_eq!(acc, vec![0.35, 0.55, 0.65, 0.70, 0.75, 0.80]);
    // The rank column itself, one example at a time.
    for (g, p, rank) in FIXTURE {
        let a = topk_accuracy(&[strings(p)], &[g.to_string()], &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        let first = a.iter().position(|&x| x == 1.0).map(|i| i + 1);
        assert_eq!(first, rank, "{g}");
    }
}

#[test]
fn rank_three_and_empty_lists() {
    let gold = vec!["CCO".to_string()];
    let a = topk_accuracy(&[strings(&["C", "CC", "OCC"])], &gold, &DEFAULT_KS);
    assert_eq!(a, vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    let a = topk_accuracy(&[vec![]], &gold, &DEFAULT_KS);
    assert_eq!(a, vec![0.0; 6]);
}

proptest! {
    #[test]
    fn accuracy_is_monotone_in_k(ranks in prop::collection::vec(prop::option::of(0usize..12), 1..30)) {
        let gold: Vec<String> = ranks.iter().map(|_| "CCO".to_string()).collect();
        let preds: Vec<Vec<String>> = ranks
            .iter()
            .map(|r| {
                let mut v: Vec<String> = (0..12).map(|i| "C".repeat(i + 1) + "N").collect();
                if let Some(r) = r {
                    v[*r] = "OCC".to_string();
                }
                v
            })
            .collect();
        let acc = topk_accuracy(&preds, &gold, &DEFAULT_KS);
        for w in acc.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for (&k, &a) in DEFAULT_KS.iter().zip(&acc) {
            let want = ranks.iter().filter(|r| matches!(r, Some(x) if *x < k)).count() as f64 / ranks.len() as f64;
            prop_assert_eq!(a, want);
        }
    }

    #[test]
    fn member_order_never_matters(perm in Just(vec!["CCO", "c1ccccc1", "CBr"]).prop_shuffle()) {
        let gold = vec!["CBr.CCO.c1ccccc1".to_string()];
        let a = topk_accuracy(&[vec![perm.join(".")]], &gold, &[1]);
        prop_assert_eq!(a, vec![1.0]);
    }
}

/// Class = first character's position in "ABC..." for single-letter tags.
struct ByFirstChar;

impl ReactionClassifier for ByFirstChar {
    fn classify(&self, _product: &str, reactants: &str) -> usize {
        match reactants.chars().next() {
            Some(c @ 'A'..='E') => c as usize - 'A' as usize + 1,
            _ => 0,
        }
    }
    fn num_classes(&self) -> usize {
        5
    }
    fn label(&self) -> String {
        "first char".into()
    }
}

#[test]
fn unique_counts() {
    let ex = |p: &[&str]| ExamplePredictions {
        product: "P".into(),
        predictions: strings(p),
    };
    let same = ex(&["A1", "A2", "A3", "A4", "A5"]);
    let three = ex(&["A1", "B1", "C1", "A2", "B2"]);
    assert_eq!(unique_reaction_count(&[same.clone()], &ByFirstChar, 5), Some(1.0));
    assert_eq!(unique_reaction_count(&[three.clone()], &ByFirstChar, 5), Some(3.0));
    assert_eq!(unique_reaction_count(&[same, three, ex(&[])], &ByFirstChar, 5), Some(2.0));
    assert_eq!(unique_reaction_count(&[ex(&[])], &ByFirstChar, 5), None);
    // Only the first k predictions count.
    assert_eq!(unique_reaction_count(&[ex(&["A", "B", "C", "D", "E", "A"])], &ByFirstChar, 2), Some(2.0));
}

#[test]
fn matrix_rows_are_normalized_or_flagged() {
    let lp = |z: usize, r: &str| LatentPrediction {
        product: "P".into(),
        z,
        reactants: r.into(),
    };
    let items = vec![lp(0, "A"), lp(0, "A"), lp(0, "B"), lp(2, "E"), lp(2, "?")];
    let m = latent_class_matrix(&items, 3, &ByFirstChar);
    assert_eq!(m.degenerate, vec![false, true, false]);
    for (r, d) in m.rows.iter().zip(&m.degenerate) {
        let s: f64 = r.iter().sum();
        assert!(if *d { s == 0.0 } else { (s - 1.0).abs() < 1e-9 });
    }
    assert!((m.rows[0][1] - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(m.rows[2][0], 0.5);
    assert_eq!(m.row_maxima(), vec![Some(2.0 / 3.0), None, Some(0.5)]);
    let csv = m.to_csv();
    assert_eq!(csv.lines().next().unwrap(), "z,unknown,class1,class2,class3,class4,class5,degenerate");
    assert_eq!(csv.lines().nth(2).unwrap(), "2,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,1");

    let single = latent_class_matrix(&[lp(0, "C"), lp(0, "D")], 1, &ByFirstChar);
    assert_eq!(single.rows.len(), 1);
    assert!((single.rows[0].iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn synthetic_oracle_labels_modes() {
    let task = make_synthetic_multimodal(3, 30, 2);
    let clf = SyntheticOracleClassifier { task: task.clone() };
    for e in &task.examples {
        assert_eq!(clf.classify(&e.source.concat(), &e.target.concat()), e.mode + 1);
    }
    assert_eq!(clf.classify("abcd", "hhhh"), 0);
    assert_eq!(clf.num_classes(), 3);
}

#[test]
fn proxy_classifier_recovers_training_classes() {
    let data = toy_reactions(20, 3);
    let clf = TemplateProxyClassifier::fit(&data);
    assert_eq!(clf.num_classes(), TOY_CLASSES);
    for r in &data {
        assert_eq!(
            clf.classify(r.source_text(), &r.target_text()),
            r.reaction_class.unwrap() as usize,
            "{}",
            r.id
        );
    }
    assert_eq!(clf.classify("CCO", "C1CC"), 0);
    assert_eq!(clf.classify("CCO", "[Xe]"), 0);
}

#[test]
fn proxy_classifier_beats_majority_on_held_out() {
    let data = toy_reactions(40, 5);
    let split = random_split(&data, 1, 0.3);
    let clf = TemplateProxyClassifier::fit(&split.train);
    let correct = split
        .test
        .iter()
        .filter(|r| clf.classify(r.source_text(), &r.target_text()) == r.reaction_class.unwrap() as usize)
        .count();
    let mut counts = [0usize; TOY_CLASSES + 1];
    for r in &split.train {
        counts[r.reaction_class.unwrap() as usize] += 1;
    }
    let majority = (1..=TOY_CLASSES).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
    let baseline = split.test.iter().filter(|r| r.reaction_class == Some(majority as u8)).count();
    assert!(correct >= baseline, "{correct} vs {baseline}");
    assert!(correct as f64 >= 0.9 * split.test.len() as f64);
}

#[test]
fn report_formats() {
    let r = EvalReport {
        examples: 4,
        ks: DEFAULT_KS.to_vec(),
        accuracies: vec![0.25, 0.5, 0.5, 0.75, 0.75, 1.0],
        invalid_rate: 0.125,
        unique_classes: Some(2.5),
        matrix: None,
        classifier: Some("first char".into()),
    };
    let tsv = r.to_tsv();
    assert!(tsv.contains("top1\t0.250000\n"));
    assert!(tsv.contains("top10\t1.000000\n"));
    assert!(tsv.contains("invalid_rate\t0.125000\n"));
    assert!(r.to_text().contains("top-5  accuracy:  75.00%"));
    assert_eq!(canonical_set("OCC.CBr"), canonical_set("BrC.CCO"));
    assert_eq!(canonical_set("C1C"), None);
}
