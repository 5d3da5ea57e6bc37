use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use retromix::augment::{toy_reactions, ReactionExample};

fn retromix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retromix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn retromix_stdin(args: &[&str], input: &str) -> Output {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_retromix"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(out: &Output) -> &Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_records(path: &Path, records: &[ReactionExample]) {
    let text: String = records.iter().map(|r| r.to_record() + "\n").collect();
    fs::write(path, text).unwrap();
}

#[test]
fn canonicalize_merges_equivalent_strings() {
    let out = retromix_stdin(&["canonicalize"], "c1ncc2cc(F)ncc2n1\nFc1cc2cncnc2cn1\n");
    let text = String::from_utf8(ok(&out).stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], lines[1]);
}

#[test]
fn tokenize_round_trips_through_detokenize() {
    let s = "[N-]=[N+]=NCc1ccc(SCCl)cc1";
    let out = retromix_stdin(&["tokenize"], &format!("{s}\n"));
    let tokens = String::from_utf8(ok(&out).stdout.clone()).unwrap();
    assert!(tokens.split_whitespace().any(|t| t == "Cl"));
    assert!(tokens.split_whitespace().any(|t| t == "[N+]"));
    let back = retromix_stdin(&["tokenize", "--detokenize"], &tokens);
    assert_eq!(String::from_utf8(ok(&back).stdout.clone()).unwrap().trim(), s);
}

#[test]
fn augment_emits_one_record_per_breakable_bond() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("mols.txt");
    let output = dir.path().join("corpus.tsv");
    fs::write(&input, "CC(C)C\n").unwrap();
    ok(&retromix(&["augment", "--input", p(&input), "--output", p(&output), "--method", "random", "--cap", "10"]));
    let text = fs::read_to_string(&output).unwrap();
    assert_eq!(text.lines().filter(|l| !l.trim().is_empty()).count(), 3);
    let config = fs::read_to_string(dir.path().join("corpus.tsv.config")).unwrap();
    assert!(config.lines().any(|l| l == "cap=10"), "{config}");
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(retromix(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(retromix(&["augment", "--output", "x.tsv"]).status.code(), Some(1));
    assert_eq!(retromix(&["--help"]).status.code(), Some(0));

    let cfg = dir.path().join("run.config");
    fs::write(&cfg, "colour=blue\n").unwrap();
    assert_eq!(retromix(&["--config", p(&cfg), "canonicalize"]).status.code(), Some(1));

    let missing = dir.path().join("missing.txt");
    let out = dir.path().join("out.tsv");
    assert_eq!(
        retromix(&["augment", "--input", p(&missing), "--output", p(&out)]).status.code(),
        Some(2)
    );

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "CCO\nC1CC\n").unwrap();
    let o = retromix(&["augment", "--input", p(&bad), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.txt:2"), "{err}");

    let o = retromix_stdin(&["canonicalize"], "CCO\nC(C\n");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_values_are_used_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("mols.txt");
    let output = dir.path().join("corpus.tsv");
    fs::write(&input, "CCCCCC\n").unwrap();
    let cfg = dir.path().join("run.config");
    fs::write(&cfg, format!("input={}\ncap=4\nseed=3\n", p(&input))).unwrap();
    ok(&retromix(&["--config", p(&cfg), "augment", "--output", p(&output), "--cap", "2"]));
    let text = fs::read_to_string(&output).unwrap();
    assert_eq!(text.lines().count(), 2);
    let resolved = fs::read_to_string(dir.path().join("corpus.tsv.config")).unwrap();
    assert!(resolved.lines().any(|l| l == "cap=2"));
    assert!(resolved.lines().any(|l| l == "seed=3"));
}

fn accuracies(tsv: &str) -> Vec<(usize, f64)> {
    tsv.lines()
        .filter_map(|l| {
            let (key, value) = l.split_once('\t')?;
            let k = key.strip_prefix("top")?.parse().ok()?;
            Some((k, value.parse().ok()?))
        })
        .collect()
}

#[test]
fn toy_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| -> PathBuf { dir.path().join(name) };
    let data = toy_reactions(6, 11);
    let (test, train) = data.split_at(12);
    write_records(&d("all.tsv"), &data);
    write_records(&d("train.tsv"), train);
    write_records(&d("test.tsv"), test);
    let products: String = train.iter().map(|r| format!("{}\n", r.source_text())).collect();
    fs::write(d("products.txt"), products).unwrap();

    ok(&retromix(&[
        "augment", "--input", p(&d("products.txt")), "--output", p(&d("pretrain.tsv")), "--method", "random",
        "--cap", "3",
    ]));
    let small = ["--d-model", "16", "--d-ff", "32", "--n-heads", "2", "--max-len", "96"];
    let (pretrain_path, pre_dir) = (d("pretrain.tsv"), d("pre"));
    let mut args = vec![
        "--workers", "2", "pretrain", "--train", p(&pretrain_path), "--out-dir", p(&pre_dir), "--vocab-corpus",
    ];
    let vocab_files = format!("{},{}", p(&d("pretrain.tsv")), p(&d("all.tsv")));
    args.push(&vocab_files);
    args.extend(["--k", "2", "--steps", "20", "--batch-size", "8", "--warmup", "5", "--eval-interval", "10"]);
    args.extend(small);
    ok(&retromix(&args));
    assert!(d("pre/model.ckpt").exists());
    assert!(d("pre/pretrain.config").exists());
    let metrics = fs::read_to_string(d("pre/pretrain-metrics.tsv")).unwrap();
    assert!(metrics.lines().count() >= 3, "{metrics}");

    ok(&retromix(&[
        "train", "--train", p(&d("train.tsv")), "--valid", p(&d("test.tsv")), "--init", p(&d("pre/model.ckpt")),
        "--out-dir", p(&d("ft")), "--steps", "20", "--batch-size", "8", "--warmup", "5", "--eval-interval", "10",
    ]));
    let resolved = fs::read_to_string(d("ft/finetune.config")).unwrap();
    assert!(resolved.lines().any(|l| l == "k=2"), "{resolved}");

    ok(&retromix(&[
        "predict", "--model", p(&d("ft/model.ckpt")), "--input", p(&d("test.tsv")), "--output",
        p(&d("pred.tsv")), "--k", "10", "--max-len", "60", "--latent-top", "3",
    ]));
    let latent = fs::read_to_string(d("pred.tsv.latent")).unwrap();
    for line in latent.lines() {
        let z: usize = line.split('\t').nth(2).unwrap().parse().unwrap();
        assert!((1..=2).contains(&z));
    }

    ok(&retromix(&[
        "eval", "--predictions", p(&d("pred.tsv")), "--gold", p(&d("test.tsv")), "--output-prefix",
        p(&d("report")), "--classifier-train", p(&d("all.tsv")),
    ]));
    let acc = accuracies(&fs::read_to_string(d("report.tsv")).unwrap());
    assert_eq!(acc.iter().map(|a| a.0).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 10]);
    for w in acc.windows(2) {
        assert!(w[0].1 <= w[1].1, "{acc:?}");
    }
    assert!(acc.iter().all(|a| (0.0..=1.0).contains(&a.1)));
    let matrix = fs::read_to_string(d("report.matrix.csv")).unwrap();
    assert!(matrix.starts_with("z,unknown,"));
    assert_eq!(matrix.lines().count(), 3);
}
