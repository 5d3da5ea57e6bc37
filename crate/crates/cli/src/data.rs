use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use log::{info, warn};
use retromix::augment::{
    build_pretrain_corpus, extract_templates, random_split, rare_subset_of, read_template_store, smiles_augment,
    template_split, write_template_store, PretrainMethod, SplitMode,
};
use retromix::chem::{self, canonicalize_smiles, detokenize};

use crate::config::Resolver;
use crate::error::CliError;
use crate::io::{create, open, read_molecules, read_records, sibling, write_records};
use crate::{AugmentArgs, SplitArgs, TemplatesArgs};

fn filter_lines(f: impl Fn(&str) -> Result<String, String>) -> Result<(), CliError> {
    let stdin = io::stdin();
    let mut out = io::BufWriter::new(io::stdout().lock());
    for (n, line) in stdin.lock().lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("stdin: {e}")))?;
        let line = line.trim();
        let text = if line.is_empty() {
            String::new()
        } else {
            f(line).map_err(|e| CliError::Data(format!("stdin:{}: {e}", n + 1)))?
        };
        writeln!(out, "{text}").map_err(|e| CliError::Data(format!("stdout: {e}")))?;
    }
    out.flush().map_err(|e| CliError::Data(format!("stdout: {e}")))
}

pub fn canonicalize() -> Result<(), CliError> {
    filter_lines(|s| canonicalize_smiles(s).map_err(|e| e.to_string()))
}

pub fn tokenize(reverse: bool) -> Result<(), CliError> {
    if reverse {
        filter_lines(|s| Ok(detokenize(&s.split_whitespace().collect::<Vec<_>>())))
    } else {
        filter_lines(|s| chem::tokenize(s).map(|t| t.tokens.join(" ")).map_err(|e| e.to_string()))
    }
}

pub fn augment(a: AugmentArgs, mut cfg: Resolver) -> Result<(), CliError> {
    let input: PathBuf = cfg.required("input", a.input)?;
    let output: PathBuf = cfg.required("output", a.output)?;
    let method: String = cfg.value("method", a.method, "random".into())?;
    let method: PretrainMethod = method.parse().map_err(CliError::Usage)?;
    let cap = cfg.value("cap", a.cap, 10)?;
    let templates_path: Option<PathBuf> = cfg.optional("templates", a.templates)?;
    let smiles_aug = cfg.value("smiles_aug", a.smiles_aug, 0)?;
    let seed = cfg.value("seed", a.seed, 0)?;
    cfg.finish()?;
    if cap == 0 {
        return Err(CliError::Usage("--cap must be positive".into()));
    }
    let templates = match (&method, &templates_path) {
        (PretrainMethod::Template, None) => return Err(CliError::Usage("--method template needs --templates".into())),
        (_, Some(p)) => Some(read_template_store(open(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?),
        _ => None,
    };
    let targets = read_molecules(&input)?;
    let (mut corpus, report) = build_pretrain_corpus(&targets, method, templates.as_deref(), cap, seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    for (i, reason) in &report.skipped {
        warn!("molecule {} skipped: {reason}", i + 1);
    }
    if smiles_aug > 0 {
        let extra: Vec<_> = corpus
            .iter()
            .enumerate()
            .flat_map(|(i, r)| smiles_augment(r, smiles_aug, seed ^ (i as u64).wrapping_mul(0x9e37_79b9)))
            .collect();
        corpus.extend(extra);
    }
    write_records(&output, &corpus)?;
    info!(
        "{} molecules, {} skipped, {} examples written to {}",
        report.targets,
        report.skipped.len(),
        corpus.len(),
        output.display()
    );
    cfg.write(&sibling(&output, ".config"))
}

pub fn templates(a: TemplatesArgs, mut cfg: Resolver) -> Result<(), CliError> {
    let input: PathBuf = cfg.required("input", a.input)?;
    let output: PathBuf = cfg.required("output", a.output)?;
    cfg.finish()?;
    let data = read_records(&input)?;
    let templates = extract_templates(&data);
    let covered: usize = templates.iter().map(|t| t.count).sum();
    let mut w = create(&output)?;
    write_template_store(&mut w, &templates).map_err(|e| CliError::io(&output, e))?;
    w.flush().map_err(|e| CliError::io(&output, e))?;
    info!(
        "{} templates from {} of {} reactions",
        templates.len(),
        covered,
        data.len()
    );
    cfg.write(&sibling(&output, ".config"))
}

pub fn split(a: SplitArgs, mut cfg: Resolver) -> Result<(), CliError> {
    let input: PathBuf = cfg.required("input", a.input)?;
    let out_dir: PathBuf = cfg.required("out_dir", a.out_dir)?;
    let mode: String = cfg.value("mode", a.mode, "random".into())?;
    let mode: SplitMode = mode.parse().map_err(CliError::Usage)?;
    let frac = cfg.value("test_fraction", a.test_fraction, 0.1)?;
    let rare = cfg.optional("rare_threshold", a.rare_threshold)?;
    let seed = cfg.value("seed", a.seed, 0)?;
    cfg.finish()?;
    if !(0.0..=1.0).contains(&frac) {
        return Err(CliError::Usage("--test-fraction must be in [0, 1]".into()));
    }
    let data = read_records(&input)?;
    let split = match mode {
        SplitMode::Random => random_split(&data, seed, frac),
        SplitMode::TemplateDisjoint => template_split(&data, seed, frac).map_err(|e| CliError::Data(e.to_string()))?,
    };
    write_records(&out_dir.join("train.tsv"), &split.train)?;
    write_records(&out_dir.join("test.tsv"), &split.test)?;
    if let Some(t) = rare {
        let subset = rare_subset_of(&split.test, &data, t);
        info!("{} rare test reactions", subset.len());
        write_records(&out_dir.join("test_rare.tsv"), &subset)?;
    }
    info!("{mode} split: {} train, {} test", split.train.len(), split.test.len());
    cfg.write(&out_dir.join("split.config"))
}
