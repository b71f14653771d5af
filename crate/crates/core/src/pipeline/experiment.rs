use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoding::EncodedGraph;
use crate::exec::Exec;
use crate::manifest::{split_dataset, Manifest, Split};
use crate::metrics::{
    average_precision, confusion, expected_random_baseline, fmt_metric, interpolate_pr, pr_curve, summarize,
    ConfusionCounts, PrPoint, SeedSummary,
};

use super::{
    build_vocabulary, encode_packages, load_corpus, persist_model, train_model, EmbeddingTable, LoadedPackage,
    ModelSpec, PipelineError, TrainSettings, TrainedModel,
};

pub const DEFAULT_SEEDS: [u64; 5] = [2025, 2026, 2027, 2028, 2029];
const PR_GRID_POINTS: usize = 101;

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_split_seed() -> u64 {
    DEFAULT_SEEDS[0]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// Declarative experiment description, usually read from TOML. Relative
/// paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Used only when the manifest has rows without a split.
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(flatten)]
    pub settings: TrainSettings,
    #[serde(skip)]
    pub exec: Exec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.manifest = base_dir.join(&cfg.manifest);
        cfg.output_dir = base_dir.join(&cfg.output_dir);
        cfg.embeddings = cfg.embeddings.map(|p| base_dir.join(p));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.models.is_empty() {
            return Err(PipelineError::Config("no models configured".into()));
        }
        if self.seeds.is_empty() {
            return Err(PipelineError::Config("no seeds configured".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(PipelineError::Config("duplicate seeds".into()));
        }
        if self.models.iter().any(|m| m.fusion) && self.embeddings.is_none() {
            return Err(PipelineError::Config("ggnn-fusion requires `embeddings`".into()));
        }
        self.settings.ggnn.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub seed: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub average_precision: Option<f64>,
    /// GGNN only.
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub f1: Option<SeedSummary>,
    pub precision: Option<SeedSummary>,
    pub recall: Option<SeedSummary>,
    pub accuracy: Option<SeedSummary>,
    pub average_precision: Option<SeedSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub vocab_id: String,
    pub split_sizes: (usize, usize, usize),
    pub test_positives: usize,
    pub rows: Vec<MetricRow>,
    pub summaries: Vec<ModelSummary>,
    /// Test-set scores per (model, seed), in test-package order.
    #[serde(skip)]
    pub test_scores: Vec<(String, u64, Vec<f64>)>,
}

fn summarize_defined(values: impl Iterator<Item = Option<f64>>) -> Option<SeedSummary> {
    let v: Vec<f64> = values.flatten().collect();
    summarize(&v).ok()
}

fn metric_row(model: &str, seed: u64, c: ConfusionCounts, ap: Option<f64>, epochs: Option<usize>) -> MetricRow {
    MetricRow {
        model: model.to_string(),
        seed,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        tn: c.tn,
        f1: c.f1(),
        precision: c.precision(),
        recall: c.recall(),
        accuracy: c.accuracy(),
        average_precision: ap,
        epochs,
    }
}

/// Trains every configured model for every seed on the train split,
/// evaluates on the test split, persists the models, and writes
/// `metrics.csv`, `summary.md`, `pr_interpolated.csv`, `vocabulary.json`
/// and `manifest.split.csv` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, PipelineError> {
    cfg.validate()?;
    let exec = cfg.exec;
    let mut manifest = Manifest::read(&cfg.manifest)?;
    if manifest.rows.iter().any(|r| r.split.is_none()) {
        manifest = split_dataset(&manifest, cfg.split_seed)?;
    }
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(PipelineError::io(out))?;
    write_split_manifest(&manifest, &out.join("manifest.split.csv"))?;

    let packages = load_corpus(&manifest, exec)?;
    let part = |s: Split| -> Vec<&LoadedPackage> { packages.iter().filter(|p| p.row.split == Some(s)).collect() };
    let (train_p, val_p, test_p) = (part(Split::Train), part(Split::Validate), part(Split::Test));
    if test_p.is_empty() {
        return Err(PipelineError::EmptySplit("test"));
    }
    let corpus_id = cfg.manifest.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let vocab = build_vocabulary(&corpus_id, &train_p)?;
    let vocab_path = out.join("vocabulary.json");
    std::fs::write(&vocab_path, vocab.to_json()).map_err(PipelineError::io(&vocab_path))?;
    let train = encode_packages(&train_p, &vocab, exec)?;
    let val = encode_packages(&val_p, &vocab, exec)?;
    let test = encode_packages(&test_p, &vocab, exec)?;
    let test_labels: Vec<bool> = test
        .iter()
        .map(|g| g.label.ok_or_else(|| PipelineError::Unlabeled(g.package_name.clone())))
        .collect::<Result<_, _>>()?;
    let embeddings = cfg.embeddings.as_deref().map(EmbeddingTable::load).transpose()?;

    let jobs: Vec<(ModelSpec, u64)> =
        cfg.models.iter().flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s))).collect();
    let results = exec.map(&jobs, |&(spec, seed)| {
        run_job(spec, seed, &train, &val, &test, &test_labels, &vocab, cfg, embeddings.as_ref())
    });

    let mut rows = Vec::new();
    let mut curves: Vec<(String, Vec<PrPoint>)> = Vec::new();
    let mut test_scores = Vec::new();
    for r in results {
        let (row, curve, scores) = r?;
        curves.push((row.model.clone(), curve));
        test_scores.push((row.model.clone(), row.seed, scores));
        rows.push(row);
    }

    let mut summaries = Vec::new();
    for spec in &cfg.models {
        let name = spec.to_string();
        let mine: Vec<&MetricRow> = rows.iter().filter(|r| r.model == name).collect();
        summaries.push(ModelSummary {
            model: name.clone(),
            f1: summarize_defined(mine.iter().map(|r| r.f1)),
            precision: summarize_defined(mine.iter().map(|r| r.precision)),
            recall: summarize_defined(mine.iter().map(|r| r.recall)),
            accuracy: summarize_defined(mine.iter().map(|r| r.accuracy)),
            average_precision: summarize_defined(mine.iter().map(|r| r.average_precision)),
        });
    }

    let report = ExperimentReport {
        vocab_id: vocab.fingerprint(),
        split_sizes: (train.len(), val.len(), test.len()),
        test_positives: test_labels.iter().filter(|&&l| l).count(),
        rows,
        summaries,
        test_scores,
    };
    write_metrics_csv(&out.join("metrics.csv"), &report.rows)?;
    write_text(&out.join("summary.md"), &summary_markdown(&report, train_positive_rate(&train)))?;
    write_text(&out.join("pr_interpolated.csv"), &interpolated_csv(&cfg.models, &curves)?)?;
    Ok(report)
}

type JobOutput = (MetricRow, Vec<PrPoint>, Vec<f64>);

#[allow(clippy::too_many_arguments)]
fn run_job(
    spec: ModelSpec,
    seed: u64,
    train: &[EncodedGraph],
    val: &[EncodedGraph],
    test: &[EncodedGraph],
    test_labels: &[bool],
    vocab: &crate::encoding::OperationVocabulary,
    cfg: &ExperimentConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<JobOutput, PipelineError> {
    let artifact = train_model(spec, seed, train, val, vocab, &cfg.settings, embeddings, cfg.exec)?;
    persist_model(&artifact, &cfg.output_dir.join("models").join(format!("{}.model", artifact.id)))?;
    let scores = artifact.score_all(test, embeddings, cfg.exec)?;
    let verdicts: Vec<bool> = scores.iter().map(|&s| s >= artifact.threshold).collect();
    let counts = confusion(&verdicts, test_labels)?;
    let curve = if test_labels.iter().any(|&l| l) { pr_curve(&scores, test_labels)? } else { Vec::new() };
    let ap = if curve.is_empty() { None } else { Some(average_precision(&curve)?) };
    let epochs = match &artifact.model {
        TrainedModel::Ggnn { model, .. } => Some(model.epochs_run),
        _ => None,
    };
    Ok((metric_row(&spec.to_string(), seed, counts, ap, epochs), curve, scores))
}

/// Copy of the split manifest with paths made absolute, so it can be used
/// from the output directory.
fn write_split_manifest(m: &Manifest, path: &Path) -> Result<(), PipelineError> {
    let absolute = |rel: &str| -> Result<String, PipelineError> {
        let p = m.resolve(rel);
        let p = std::path::absolute(&p).map_err(PipelineError::io(&p))?;
        Ok(p.to_string_lossy().into_owned())
    };
    let mut rows = m.rows.clone();
    for r in &mut rows {
        r.graph_path = absolute(&r.graph_path)?;
        r.source_path = absolute(&r.source_path)?;
    }
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(Manifest::new(base, rows)?.write(path)?)
}

fn train_positive_rate(train: &[EncodedGraph]) -> f64 {
    let pos = train.iter().filter(|g| g.label == Some(true)).count();
    pos as f64 / train.len().max(1) as f64
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(PipelineError::io(path))
}

fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<(), PipelineError> {
    let csv_err = |e: csv::Error| PipelineError::Config(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(PipelineError::io(path))
}

fn cell(s: &Option<SeedSummary>) -> String {
    match s {
        None => "-".into(),
        Some(s) => {
            let mut out = format!("{:.3}", s.mean);
            if let Some(ci) = s.ci_halfwidth {
                let _ = write!(out, " ± {ci:.3}");
            }
            match s.variance {
                Some(v) => {
                    let _ = write!(out, " (var {v:.2e})");
                }
                None => out.push_str(" (SD n/a)"),
            }
            out
        }
    }
}

fn summary_markdown(report: &ExperimentReport, p_train: f64) -> String {
    let (tr, va, te) = report.split_sizes;
    let pos = report.test_positives as u64;
    let neg = te as u64 - pos;
    let mut md = String::new();
    let _ = writeln!(md, "# Test-set results\n");
    let _ = writeln!(md, "Splits: train {tr}, validate {va}, test {te} ({pos} vulnerable, {neg} benign).");
    let _ = writeln!(md, "Vocabulary: {}.\n", report.vocab_id);
    let _ = writeln!(md, "Cells: mean over seeds, ± 2.776·SD when five seeds ran, and the sample variance. \"-\" marks a metric undefined for every seed.\n");
    let _ = writeln!(md, "| Model | Seeds | F1 | Precision | Recall | Accuracy | AP |");
    let _ = writeln!(md, "|---|---|---|---|---|---|---|");
    for s in &report.summaries {
        let seeds = report.rows.iter().filter(|r| r.model == s.model).count();
        let _ = writeln!(
            md,
            "| {} | {seeds} | {} | {} | {} | {} | {} |",
            s.model,
            cell(&s.f1),
            cell(&s.precision),
            cell(&s.recall),
            cell(&s.accuracy),
            cell(&s.average_precision)
        );
    }
    let _ = writeln!(md, "\n## Expected random baselines\n");
    let _ = writeln!(md, "| Predictor | F1 | Precision | Recall | Accuracy |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for (name, p) in [
        ("Random (P=1/2)".to_string(), 0.5),
        (format!("Random (P={p_train:.3})"), p_train),
        ("Random (P=1)".to_string(), 1.0),
        ("Random (P=0)".to_string(), 0.0),
    ] {
        if let Ok(b) = expected_random_baseline(p, pos, neg) {
            let _ = writeln!(
                md,
                "| {name} | {} | {} | {} | {} |",
                fmt_metric(b.f1, 3),
                fmt_metric(b.precision, 3),
                fmt_metric(b.recall, 3),
                fmt_metric(b.accuracy, 3)
            );
        }
    }
    md
}

fn interpolated_csv(models: &[ModelSpec], curves: &[(String, Vec<PrPoint>)]) -> Result<String, PipelineError> {
    let mut out = String::from("model,recall,mean_precision,sd_precision\n");
    for spec in models {
        let name = spec.to_string();
        let mine: Vec<Vec<PrPoint>> =
            curves.iter().filter(|(m, c)| *m == name && !c.is_empty()).map(|(_, c)| c.clone()).collect();
        if mine.is_empty() {
            continue;
        }
        let ip = interpolate_pr(&mine, PR_GRID_POINTS)?;
        for (i, r) in ip.recall.iter().enumerate() {
            let sd = ip.sd.as_ref().map(|s| s[i].to_string()).unwrap_or_default();
            let _ = writeln!(out, "{name},{r},{},{sd}", ip.mean[i]);
        }
    }
    Ok(out)
}
