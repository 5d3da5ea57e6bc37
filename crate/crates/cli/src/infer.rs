use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use retromix::augment::ReactionExample;
use retromix::chem::tokenize;
use retromix::decode::{canonical_reactants, merge_pools, predict_pools, read_predictions, write_predictions, BeamConfig, PredictionList};
use retromix::eval::{
    latent_class_matrix, topk_accuracy, unique_reaction_count, EvalReport, ExamplePredictions, LatentPrediction,
    ReactionClassifier, TemplateProxyClassifier, DEFAULT_KS,
};
use retromix::model::{encode, load_checkpoint, DropoutMode, IncrementalDecoder, ModelError, ModelParams, Vocab};

use crate::config::Resolver;
use crate::error::CliError;
use crate::io::{create, open, read_records, sibling};
use crate::{EvalArgs, PredictArgs};

/// Examples decoded between writes.
const CHUNK: usize = 64;

struct Decoded {
    merged: PredictionList,
    per_latent: Vec<PredictionList>,
}

fn decode_one(
    params: &ModelParams,
    vocab: &Vocab,
    r: &ReactionExample,
    k: usize,
    latent_top: usize,
    bc: &BeamConfig,
) -> Result<Decoded, ModelError> {
    let tokens = tokenize(r.source_text()).map_err(|e| ModelError::UnknownToken(e.to_string()))?;
    let src = vocab.encode(&tokens.tokens)?;
    let enc = encode(params, &src, DropoutMode::Off)?;
    let dec = IncrementalDecoder::new(params, &enc);
    let pools = predict_pools(&dec, k.max(latent_top), bc)?;
    let key = |t: &[u32]| canonical_reactants(vocab, t);
    let merged = merge_pools(&pools, k, bc.alpha, key);
    let per_latent = (0..pools.len())
        .map(|z| merge_pools(&pools[z..z + 1], latent_top, bc.alpha, key))
        .collect();
    Ok(Decoded { merged, per_latent })
}

pub fn predict(a: PredictArgs, mut cfg: Resolver) -> Result<(), CliError> {
    let model: PathBuf = cfg.required("model", a.model)?;
    let input: PathBuf = cfg.required("input", a.input)?;
    let output: PathBuf = cfg.required("output", a.output)?;
    let k = cfg.value("k", a.k, 10)?;
    let bc = BeamConfig {
        beam_width: cfg.value("beam_width", a.beam_width, 10)?,
        max_len: cfg.value("max_len", a.max_len, 200)?,
        alpha: cfg.value("alpha", a.alpha, 0.0)?,
    };
    let latent_top = cfg.value("latent_top", a.latent_top, 10)?;
    cfg.finish()?;
    bc.validate().map_err(CliError::Usage)?;
    if k == 0 || latent_top == 0 {
        return Err(CliError::Usage("--k and --latent-top must be positive".into()));
    }
    let (params, vocab) = load_checkpoint(open(&model)?).map_err(|e| CliError::Data(format!("{}: {e}", model.display())))?;
    let data = read_records(&input)?;
    let stats_path = sibling(&output, ".stats");
    let latent_path = sibling(&output, ".latent");
    let mut out = create(&output)?;
    let mut stats = create(&stats_path)?;
    let mut latent = create(&latent_path)?;
    let mut skipped = 0;
    let (mut pooled, mut invalid) = (0usize, 0usize);
    for chunk in data.chunks(CHUNK) {
        let decoded: Vec<Result<Decoded, ModelError>> = chunk
            .par_iter()
            .map(|r| decode_one(&params, &vocab, r, k, latent_top, &bc))
            .collect();
        for (r, d) in chunk.iter().zip(decoded) {
            let d = match d {
                Ok(d) => d,
                Err(e) => {
                    warn!("{}: not decoded: {e}", r.id);
                    skipped += 1;
                    Decoded {
                        merged: PredictionList::default(),
                        per_latent: Vec::new(),
                    }
                }
            };
            write_predictions(&mut out, &r.id, &d.merged).map_err(|e| CliError::io(&output, e))?;
            writeln!(stats, "{}\t{}\t{}", r.id, d.merged.pooled, d.merged.invalid)
                .map_err(|e| CliError::io(&stats_path, e))?;
            for l in &d.per_latent {
                write_predictions(&mut latent, &r.id, l).map_err(|e| CliError::io(&latent_path, e))?;
            }
            pooled += d.merged.pooled;
            invalid += d.merged.invalid;
        }
    }
    for (w, p) in [(&mut out, &output), (&mut stats, &stats_path), (&mut latent, &latent_path)] {
        w.flush().map_err(|e| CliError::io(p, e))?;
    }
    info!(
        "{} products decoded ({} skipped); invalid hypotheses {}/{}",
        data.len() - skipped,
        skipped,
        invalid,
        pooled
    );
    cfg.write(&sibling(&output, ".config"))
}

fn read_stats(path: &Path) -> Result<(usize, usize), CliError> {
    let (mut pooled, mut invalid) = (0, 0);
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let parse = |s: &str| s.parse::<usize>().map_err(|_| CliError::at(path, n + 1, "expected id, pooled, invalid"));
        if f.len() != 3 {
            return Err(CliError::at(path, n + 1, "expected id, pooled, invalid"));
        }
        pooled += parse(f[1])?;
        invalid += parse(f[2])?;
    }
    Ok((pooled, invalid))
}

fn companion(explicit: Option<PathBuf>, predictions: &Path, ext: &str) -> Option<PathBuf> {
    explicit.or_else(|| Some(sibling(predictions, ext)).filter(|p| p.exists()))
}

pub fn eval(a: EvalArgs, mut cfg: Resolver) -> Result<(), CliError> {
    let pred_path: PathBuf = cfg.required("predictions", a.predictions)?;
    let gold_path: PathBuf = cfg.required("gold", a.gold)?;
    let prefix: Option<PathBuf> = cfg.optional("output_prefix", a.output_prefix)?;
    let clf_train: Option<PathBuf> = cfg.optional("classifier_train", a.classifier_train)?;
    let stats_arg: Option<PathBuf> = cfg.optional("stats", a.stats)?;
    let latent_arg: Option<PathBuf> = cfg.optional("latent", a.latent)?;
    let unique_k = cfg.value("unique_k", a.unique_k, 5)?;
    cfg.finish()?;

    let gold = read_records(&gold_path)?;
    let preds = read_predictions(open(&pred_path)?).map_err(|e| CliError::Data(format!("{}: {e}", pred_path.display())))?;
    let mut by_id: HashMap<String, Vec<String>> = HashMap::new();
    for (id, recs) in preds {
        let mut recs = recs;
        recs.sort_by_key(|r| r.rank);
        by_id.entry(id).or_default().extend(recs.into_iter().map(|r| r.smiles));
    }
    let lists: Vec<Vec<String>> = gold.iter().map(|g| by_id.get(&g.id).cloned().unwrap_or_default()).collect();
    let answers: Vec<String> = gold.iter().map(|g| g.target_text()).collect();
    let accuracies = topk_accuracy(&lists, &answers, &DEFAULT_KS);

    let invalid_rate = match companion(stats_arg, &pred_path, ".stats") {
        Some(p) => {
            let (pooled, invalid) = read_stats(&p)?;
            if pooled == 0 {
                0.0
            } else {
                invalid as f64 / pooled as f64
            }
        }
        None => 0.0,
    };

    let clf = match &clf_train {
        Some(p) => Some(TemplateProxyClassifier::fit(&read_records(p)?)),
        None => None,
    };
    let mut unique_classes = None;
    let mut matrix = None;
    if let Some(clf) = &clf {
        let items: Vec<ExamplePredictions> = gold
            .iter()
            .zip(&lists)
            .map(|(g, l)| ExamplePredictions {
                product: g.source_text().to_string(),
                predictions: l.clone(),
            })
            .collect();
        unique_classes = unique_reaction_count(&items, clf, unique_k);
        if let Some(lp) = companion(latent_arg, &pred_path, ".latent") {
            let products: HashMap<&str, &str> = gold.iter().map(|g| (g.id.as_str(), g.source_text())).collect();
            let recs = read_predictions(open(&lp)?).map_err(|e| CliError::Data(format!("{}: {e}", lp.display())))?;
            let mut items = Vec::new();
            let mut k = 0;
            for (id, recs) in recs {
                let Some(product) = products.get(id.as_str()) else { continue };
                for r in recs {
                    k = k.max(r.z + 1);
                    items.push(LatentPrediction {
                        product: product.to_string(),
                        z: r.z,
                        reactants: r.smiles,
                    });
                }
            }
            if k > 0 {
                matrix = Some(latent_class_matrix(&items, k, clf));
            }
        }
    }
    let report = EvalReport {
        examples: gold.len(),
        ks: DEFAULT_KS.to_vec(),
        accuracies,
        invalid_rate,
        unique_classes,
        matrix,
        classifier: clf.as_ref().map(|c| c.label()),
    };
    print!("{}", report.to_text());
    if let Some(prefix) = prefix {
        let write = |ext: &str, text: String| -> Result<(), CliError> {
            let p = sibling(&prefix, ext);
            let mut w = create(&p)?;
            w.write_all(text.as_bytes()).map_err(|e| CliError::io(&p, e))?;
            w.flush().map_err(|e| CliError::io(&p, e))
        };
        write(".txt", report.to_text())?;
        write(".tsv", report.to_tsv())?;
        if let Some(m) = &report.matrix {
            write(".matrix.csv", m.to_csv())?;
        }
        cfg.write(&sibling(&prefix, ".config"))?;
    }
    Ok(())
}
