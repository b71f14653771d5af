use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use flowtriage::encoding::OperationVocabulary;
use flowtriage::llm::{EndpointConfig, HttpTransport, RetryPolicy};
use flowtriage::manifest::{Manifest, Split};
use flowtriage::metrics::{
    average_precision, confusion, expected_random_baseline, pr_curve, select_operating_point,
    simulate_random_predictor, cohens_kappa, OperatingTarget,
};
use flowtriage::pipeline::{
    build_vocabulary, encode_packages, load_corpus, load_model, run_experiment, zero_shot_confusion,
    zero_shot_corpus, EmbeddingTable, ExperimentConfig, LoadedPackage, ModelArtifact, PipelineError,
    ZeroShotSettings,
};
use flowtriage::provenance::{parse_graph, validate as validate_graph};
use flowtriage::synth::{generate_corpus, SynthProfile};
use flowtriage::Exec;
use serde_json::{json, Value};

use crate::error::{io, CliError};
use crate::{
    BaselineArgs, CorpusArgs, EncodeArgs, EvaluateArgs, KappaArgs, LlmArgs, OperatingPointArgs, RankArgs, SynthArgs,
    TrainArgs, ValidateArgs,
};

type Result<T = ()> = std::result::Result<T, CliError>;

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io(path))
}

fn write_text(path: &Path, text: &str) -> Result {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    std::fs::write(path, text).map_err(io(path))
}

fn parse_split(s: Option<&str>) -> Result<Option<Split>> {
    s.map(|s| s.parse::<Split>().map_err(|e| CliError::new("usage", e))).transpose()
}

fn load(c: &CorpusArgs, exec: Exec) -> Result<(Manifest, Vec<LoadedPackage>)> {
    let m = Manifest::read(&c.manifest)?;
    let m = match parse_split(c.split.as_deref())? {
        Some(s) => m.subset(s),
        None => m,
    };
    let packages = load_corpus(&m, exec)?;
    Ok((m, packages))
}

fn load_embeddings(path: Option<&Path>) -> Result<Option<EmbeddingTable>> {
    Ok(path.map(EmbeddingTable::load).transpose()?)
}

pub fn validate(a: ValidateArgs, exec: Exec) -> Result {
    let mut paths = a.graphs;
    if let Some(m) = &a.manifest {
        let m = Manifest::read(m)?;
        paths.extend(m.rows.iter().map(|r| m.resolve(&r.graph_path)));
    }
    if paths.is_empty() {
        return Err(CliError::new("usage", "no graphs given: pass graph files or --manifest"));
    }
    let reports = exec.map(&paths, |p| {
        let parsed = std::fs::read(p)
            .map_err(|e| e.to_string())
            .and_then(|raw| parse_graph(&raw).map_err(|e| e.to_string()));
        match parsed {
            Err(message) => json!({
                "path": p, "package": null, "accepted": false,
                "violations": [{"kind": "parse", "message": message}],
            }),
            Ok(g) => {
                let r = validate_graph(&g);
                json!({"path": p, "package": r.package, "accepted": r.accepted(), "violations": r.violations})
            }
        }
    });
    let rejected = reports.iter().filter(|r| r["accepted"] == false).count();
    for r in &reports {
        println!("{r}");
    }
    if rejected > 0 {
        return Err(CliError::new("validation", format!("{rejected} of {} graphs rejected", reports.len())));
    }
    Ok(())
}

pub fn encode(a: EncodeArgs, exec: Exec) -> Result {
    let all = CorpusArgs { manifest: a.corpus.manifest.clone(), split: None };
    let (manifest, packages) = load(&all, exec)?;
    let vocab = match &a.vocab {
        Some(p) => OperationVocabulary::from_json(&read_text(p)?)?,
        None => {
            let train: Vec<&LoadedPackage> = packages.iter().filter(|p| p.row.split == Some(Split::Train)).collect();
            let source = if train.is_empty() { packages.iter().collect() } else { train };
            let corpus_id = a.corpus.manifest.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let v = build_vocabulary(&corpus_id, &source)?;
            write_text(&a.out.join("vocabulary.json"), &v.to_json())?;
            v
        }
    };
    let split = parse_split(a.corpus.split.as_deref())?;
    let chosen: Vec<&LoadedPackage> = packages.iter().filter(|p| split.is_none() || p.row.split == split).collect();
    let graphs = encode_packages(&chosen, &vocab, exec)?;
    let mut lines = String::new();
    for g in &graphs {
        lines.push_str(&serde_json::to_string(g).expect("encoded graph serializes"));
        lines.push('\n');
    }
    write_text(&a.out.join("encoded.jsonl"), &lines)?;
    print_json(&json!({
        "manifest": manifest.base_dir,
        "vocab_id": vocab.fingerprint(),
        "vocabulary_size": vocab.len(),
        "packages": graphs.len(),
    }));
    Ok(())
}

pub fn train(a: TrainArgs, exec: Exec) -> Result {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    if let Some(seeds) = a.seeds {
        cfg.seeds = seeds;
    }
    if let Some(models) = a.models {
        cfg.models = models.iter().map(|m| m.parse()).collect::<std::result::Result<_, PipelineError>>()?;
    }
    cfg.exec = exec;
    let report = run_experiment(&cfg)?;
    let (tr, va, te) = report.split_sizes;
    print_json(&json!({
        "output_dir": cfg.output_dir,
        "split_sizes": {"train": tr, "validate": va, "test": te},
        "rows": report.rows,
        "summaries": report.summaries,
    }));
    Ok(())
}

fn score_corpus(
    model: &Path,
    corpus: &CorpusArgs,
    embeddings: Option<&Path>,
    exec: Exec,
) -> Result<(ModelArtifact, Vec<flowtriage::encoding::EncodedGraph>, Option<EmbeddingTable>)> {
    let artifact = load_model(model)?;
    let (_, packages) = load(corpus, exec)?;
    if packages.is_empty() {
        return Err(CliError::new("empty_split", "no packages selected"));
    }
    let refs: Vec<&LoadedPackage> = packages.iter().collect();
    let graphs = encode_packages(&refs, &artifact.vocabulary, exec)?;
    Ok((artifact, graphs, load_embeddings(embeddings)?))
}

pub fn evaluate(a: EvaluateArgs, exec: Exec) -> Result {
    let (artifact, graphs, emb) = score_corpus(&a.model, &a.corpus, a.embeddings.as_deref(), exec)?;
    let scores = artifact.score_all(&graphs, emb.as_ref(), exec)?;
    let labels: Vec<bool> = graphs
        .iter()
        .map(|g| g.label.ok_or_else(|| PipelineError::Unlabeled(g.package_name.clone())))
        .collect::<std::result::Result<_, _>>()?;
    let verdicts: Vec<bool> = scores.iter().map(|&s| s >= artifact.threshold).collect();
    let c = confusion(&verdicts, &labels)?;
    let ap = if labels.contains(&true) { Some(average_precision(&pr_curve(&scores, &labels)?)?) } else { None };
    print_json(&json!({
        "model_id": artifact.id,
        "threshold": artifact.threshold,
        "packages": graphs.len(),
        "counts": c,
        "f1": c.f1(),
        "precision": c.precision(),
        "recall": c.recall(),
        "accuracy": c.accuracy(),
        "average_precision": ap,
    }));
    Ok(())
}

pub fn rank(a: RankArgs, exec: Exec) -> Result {
    let (artifact, graphs, emb) = score_corpus(&a.model, &a.corpus, a.embeddings.as_deref(), exec)?;
    let report = flowtriage::pipeline::rank(&artifact, &graphs, emb.as_ref(), exec)?;
    match &a.out {
        None => print!("{}", report.to_csv()),
        Some(out) => {
            write_text(out, &report.to_csv())?;
            print_json(&json!({
                "report": out,
                "model_id": report.model_id,
                "vocab_id": report.vocab_id,
                "packages": report.rows.len(),
                "top_n": report.top_n,
            }));
        }
    }
    Ok(())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Reads named columns from a CSV with a header row.
fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| CliError::new("csv", format!("{}: missing column `{c}`", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(idx.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect());
    }
    Ok(out)
}

fn bool_cell(path: &Path, row: usize, column: &str, value: &str) -> Result<bool> {
    parse_bool(value).ok_or_else(|| {
        CliError::new("csv", format!("{}: row {}: `{column}` is `{value}`, expected true or false", path.display(), row + 1))
    })
}

fn read_verdicts(path: &Path) -> Result<BTreeMap<String, bool>> {
    let mut out = BTreeMap::new();
    for (i, row) in read_columns(path, &["package", "verdict"])?.into_iter().enumerate() {
        let v = bool_cell(path, i, "verdict", &row[1])?;
        if out.insert(row[0].clone(), v).is_some() {
            return Err(CliError::new("csv", format!("{}: duplicate package `{}`", path.display(), row[0])));
        }
    }
    Ok(out)
}

pub fn kappa(a: KappaArgs) -> Result {
    let va = read_verdicts(&a.a)?;
    let vb = read_verdicts(&a.b)?;
    if !va.keys().eq(vb.keys()) {
        return Err(CliError::new("kappa", "the two files do not list the same packages"));
    }
    let (x, y): (Vec<bool>, Vec<bool>) = va.iter().map(|(k, &v)| (v, vb[k])).unzip();
    let agree = x.iter().zip(&y).filter(|(p, q)| p == q).count();
    print_json(&json!({"packages": x.len(), "agreement": agree, "kappa": cohens_kappa(&x, &y)?}));
    Ok(())
}

pub fn baseline(a: BaselineArgs) -> Result {
    let mut out = Vec::new();
    for &p in &a.p {
        let b = expected_random_baseline(p, a.pos, a.neg)?;
        let mut v = serde_json::to_value(b).expect("baseline serializes");
        if let Some(trials) = a.simulate {
            v["simulated_f1"] = json!(simulate_random_predictor(p, a.pos, a.neg, trials, a.seed));
        }
        out.push(v);
    }
    print_json(&Value::Array(out));
    Ok(())
}

pub fn operating_point(a: OperatingPointArgs) -> Result {
    let target = match (a.target.min_precision, a.target.max_fnr) {
        (Some(p), _) => OperatingTarget::MinPrecision(p),
        (_, Some(f)) => OperatingTarget::MaxFnr(f),
        _ => unreachable!("clap requires one target"),
    };
    let path = &a.scores;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in read_columns(path, &["score", "label"])?.into_iter().enumerate() {
        let s: f64 = row[0].trim().parse().map_err(|_| {
            CliError::new("csv", format!("{}: row {}: `score` is `{}`, expected a number", path.display(), i + 1, row[0]))
        })?;
        scores.push(s);
        labels.push(bool_cell(path, i, "label", &row[1])?);
    }
    print_json(&serde_json::to_value(select_operating_point(&scores, &labels, target)?).expect("serializes"));
    Ok(())
}

pub fn llm_zero_shot(a: LlmArgs, exec: Exec) -> Result {
    let mut cfg = match &a.endpoint {
        Some(p) => toml::from_str::<EndpointConfig>(&read_text(p)?)?,
        None => EndpointConfig::default(),
    };
    if let Some(url) = a.url {
        cfg.url = url;
    }
    if let Some(m) = a.llm {
        cfg.model = m;
    }
    if cfg.model.is_empty() {
        return Err(CliError::new("config", "no model name: pass --llm or set `model` in the endpoint file"));
    }
    let transport = HttpTransport::new(&cfg)?;
    let (manifest, packages) = load(&a.corpus, exec)?;
    let refs: Vec<&LoadedPackage> = packages.iter().collect();
    let settings = ZeroShotSettings {
        model: &cfg.model,
        delimiters: &cfg.think_delimiters,
        policy: RetryPolicy::default(),
        budget: a.budget,
        transcript: a.transcript.as_deref(),
    };
    let rows = zero_shot_corpus(&manifest.base_dir, &refs, &transport, &settings, &mut |d| std::thread::sleep(d))?;
    if let Some(out) = &a.out {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["package", "label", "verdict", "error"])?;
        for r in &rows {
            let opt = |b: Option<bool>| b.map(|b| b.to_string()).unwrap_or_default();
            w.write_record([r.package.clone(), opt(r.label), opt(r.verdict), r.error.clone().unwrap_or_default()])?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::new("csv", e.to_string()))?;
        write_text(out, &String::from_utf8_lossy(&bytes))?;
    }
    let failed = rows.iter().filter(|r| r.verdict.is_none()).count();
    let c = zero_shot_confusion(&rows);
    print_json(&json!({
        "model": cfg.model,
        "packages": rows.len(),
        "failed": failed,
        "counts": c,
        "f1": c.and_then(|c| c.f1()),
        "precision": c.and_then(|c| c.precision()),
        "recall": c.and_then(|c| c.recall()),
        "accuracy": c.and_then(|c| c.accuracy()),
    }));
    Ok(())
}

pub fn synth(a: SynthArgs, exec: Exec) -> Result {
    let mut profile = SynthProfile::new(a.profile, a.packages, a.seed);
    if let Some(r) = a.vuln_ratio {
        profile.vuln_ratio = r;
    }
    if let Some(n) = a.noise {
        profile.noise = n;
    }
    let manifest = generate_corpus(&profile, &a.out, exec)?;
    let vulnerable = manifest.rows.iter().filter(|r| r.label == Some(true)).count();
    let path: PathBuf = a.out.join("manifest.csv");
    print_json(&json!({"manifest": path, "packages": manifest.rows.len(), "vulnerable": vulnerable}));
    Ok(())
}
