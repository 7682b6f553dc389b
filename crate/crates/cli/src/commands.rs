use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use amrsynth::align::{Aligner, Alignment, AlignerConfig, MatchScore};
use amrsynth::anonymize::{anonymize_corpus, augment_corpus};
use amrsynth::corpus::{
    build_records, emit_seq2seq, gen_synthetic_pairs, pair_banks, read_alignment_lines, read_jsonl, split_corpus,
    write_jsonl, write_splits, Corpus, SyntheticConfig,
};
use amrsynth::eval::{cluster, random_baseline, time_matrix, upper_bound_gap, DistanceMatrix, MatrixMethod, ScoreReport};
use amrsynth::neural::gradcheck::grad_check;
use amrsynth::neural::{checkpoint, init_params, train, ModelConfig, ModelKind, ModelParams, PairItem, TrainConfig};
use amrsynth::penman::{extract_triples, read_bank, serialize_compact, serialize_penman, BankEntry, TokenGrid};
use amrsynth::seed;
use rand::Rng;

use crate::{AlignerArgs, AlignerKind, Cli, Command, Method, ModelOption, ModelSize};

/// Invalid flag combination; reported with exit code 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn run(cli: &Cli) -> Result<()> {
    let out = Output { cli };
    match &cli.command {
        Command::Parse(a) => {
            let entries = read_bank_file(&a.input)?;
            let graphs: Vec<Value> = entries
                .iter()
                .map(|e| {
                    let triples: Vec<[String; 3]> =
                        extract_triples(&e.graph).triples.into_iter().map(|t| [t.source, t.role, t.target]).collect();
                    json!({ "id": e.id, "penman": serialize_penman(&e.graph), "triples": triples })
                })
                .collect();
            let mut text = String::new();
            for e in &entries {
                if let Some(id) = &e.id {
                    text.push_str(&format!("# ::id {id}\n"));
                }
                let body = if a.compact { serialize_compact(&e.graph) } else { serialize_penman(&e.graph) };
                text.push_str(&body);
                text.push('\n');
                if a.triples {
                    for t in extract_triples(&e.graph).triples {
                        text.push_str(&format!("# {} {} {}\n", t.source, t.role, t.target));
                    }
                }
                text.push('\n');
            }
            out.emit(json!({ "graphs": graphs }), text.trim_end())
        }
        Command::Smatch(a) => {
            let pairs = pair_banks(&read_bank_file(&a.first)?, &read_bank_file(&a.second)?)?;
            let corpus = build_records(&pairs, &aligner(&a.aligner), cli.seed)?;
            let (mut matches, mut total_a, mut total_b) = (0, 0, 0);
            let mut rows = Vec::new();
            let mut text = String::new();
            for ((_, ga, gb), r) in pairs.iter().zip(&corpus.records) {
                matches += r.matches;
                total_a += extract_triples(ga).len();
                total_b += extract_triples(gb).len();
                rows.push(json!({
                    "id": r.id, "precision": r.precision, "recall": r.recall, "f1": r.f1,
                    "matches": r.matches, "alignment": amrsynth::align::format_pairs(&r.alignment),
                }));
                if pairs.len() > 1 {
                    text.push_str(&format!("{}\t{:.4}\t{:.4}\t{:.4}\n", r.id, r.precision, r.recall, r.f1));
                }
            }
            let total = MatchScore::from_counts(matches, total_a, total_b);
            text.push_str(&format!("Precision: {:.4}\nRecall: {:.4}\nF1: {:.4}", total.precision, total.recall, total.f1));
            out.emit(
                json!({ "pairs": rows, "precision": total.precision, "recall": total.recall, "f1": total.f1 }),
                &text,
            )
        }
        Command::Dataset(a) => {
            let pairs = pair_banks(&read_bank_file(&a.first)?, &read_bank_file(&a.second)?)?;
            let corpus = build_records(&pairs, &aligner(&a.aligner), cli.seed)?;
            corpus.check_ids()?;
            let n = corpus.len();
            match &a.split {
                Some(sizes) => {
                    if sizes.len() != 3 {
                        return Err(Usage("--split takes three counts: train,dev,test".into()).into());
                    }
                    let split = split_corpus(&corpus, (sizes[0], sizes[1], sizes[2]), seed::derive(cli.seed, &[1]))?;
                    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
                    write_splits(&split, &a.output)?;
                }
                None => write_jsonl(&corpus, &a.output)?,
            }
            out.emit(json!({ "records": n, "output": a.output }), &format!("wrote {n} records to {}", a.output.display()))
        }
        Command::Anonymize(a) => {
            let corpus = anonymize_corpus(&read_corpus(&a.input)?)?;
            write_jsonl(&corpus, &a.output)?;
            out.emit(json!({ "records": corpus.len() }), &format!("anonymized {} records", corpus.len()))
        }
        Command::Augment(a) => {
            let corpus = read_corpus(&a.input)?;
            let records = augment_corpus(&corpus.records, a.k, cli.seed, !a.keep_originals)?;
            let n = records.len();
            write_jsonl(&Corpus::new(records), &a.output)?;
            out.emit(json!({ "input": corpus.len(), "records": n }), &format!("wrote {n} records ({} in)", corpus.len()))
        }
        Command::EmitSeq2seq(a) => {
            let corpus = read_corpus(&a.input)?;
            emit_seq2seq(&corpus, BufWriter::new(create(&a.source)?), BufWriter::new(create(&a.target)?))?;
            out.emit(json!({ "records": corpus.len() }), &format!("wrote {} source/target lines", corpus.len()))
        }
        Command::Train(a) => {
            let (tr, dev) = (read_corpus(&a.train)?, read_corpus(&a.dev)?);
            let model = model_config(a.model, a.size, 0);
            let cfg = TrainConfig { epochs: a.epochs, batch_size: a.batch_size, learning_rate: a.lr, ..TrainConfig::new(model) };
            let (trained, log) = train(&tr.records, &dev.records, &cfg, cli.seed)?;
            checkpoint::save(&trained, &a.output)?;
            if let Some(path) = &a.log {
                fs::write(path, log.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            let text = format!(
                "{}best epoch {} (dev rho {})",
                log.to_csv(),
                log.best_epoch,
                log.best_rho().map(|r| format!("{r:.4}")).unwrap_or_else(|| "undefined".into())
            );
            out.emit(json!({ "train_config": cfg, "log": log }), &text)
        }
        Command::Predict(a) => {
            let model = checkpoint::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
            let corpus = read_corpus(&a.input)?;
            let preds = model.predict(&corpus.records)?;
            let gold: Vec<f64> = corpus.records.iter().map(|r| r.f1).collect();
            let report = ScoreReport::new("model", &preds, &gold)?;
            let mut text = String::from("id\tpredicted\tgold\n");
            for (r, p) in corpus.records.iter().zip(&preds) {
                text.push_str(&format!("{}\t{p:.6}\t{:.6}\n", r.id, r.f1));
            }
            text.push_str(&format!("pearson {}", fmt_rho(report.rho)));
            let rows: Vec<Value> =
                corpus.records.iter().zip(&preds).map(|(r, p)| json!({ "id": r.id, "predicted": p, "gold": r.f1 })).collect();
            out.emit(json!({ "predictions": rows, "report": report }), &text)
        }
        Command::Matrix(a) => {
            let entries = read_bank_file(&a.input)?;
            let ids: Vec<String> =
                entries.iter().enumerate().map(|(i, e)| e.id.clone().unwrap_or_else(|| format!("g{i}"))).collect();
            let graphs: Vec<_> = entries.into_iter().map(|e| e.graph).collect();
            let model = match (a.method, &a.model) {
                (Method::Score | Method::Vector, Some(path)) => {
                    Some(checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?)
                }
                (Method::Score | Method::Vector, None) => return Err(Usage("--model is required for model methods".into()).into()),
                _ => None,
            };
            let method = match (a.method, &model) {
                (Method::Oracle, _) => MatrixMethod::Oracle(aligner(&a.aligner)),
                (Method::Random, _) => MatrixMethod::Random,
                (Method::Score, Some(m)) => MatrixMethod::ScoreModel(m),
                (Method::Vector, Some(m)) => MatrixMethod::VectorModel(m),
                _ => unreachable!("model loaded above"),
            };
            let timed = time_matrix(&method, &graphs, cli.seed)?;
            let mut tsv = Vec::new();
            timed.matrix.write_tsv(&ids, &mut tsv)?;
            if let Some(path) = &a.output {
                fs::write(path, &tsv).with_context(|| format!("writing {}", path.display()))?;
            }
            let timing = json!({ "seconds": timed.seconds, "workers": cli.workers });
            let body = json!({
                "method": method.name(),
                "n": graphs.len(),
                "pairs": timed.pairs,
                "encoder_calls": timed.inference.map(|s| s.encoder_calls),
                "head_calls": timed.inference.map(|s| s.head_calls),
                "timing (not deterministic)": timing,
            });
            if cli.json {
                let rows: Vec<&[f64]> = (0..graphs.len()).map(|i| timed.matrix.row(i)).collect();
                let mut body = body;
                body["ids"] = json!(ids);
                body["matrix"] = json!(rows);
                out.emit(body, "")
            } else {
                if a.output.is_none() {
                    io::stdout().write_all(&tsv)?;
                }
                eprintln!("{} pairs by {} in {:.3}s", timed.pairs, method.name(), timed.seconds);
                Ok(())
            }
        }
        Command::Cluster(a) => {
            let (ids, m) = DistanceMatrix::read_tsv(BufReader::new(open(&a.input)?))?;
            if a.k == 0 || a.k > m.n() {
                return Err(Usage(format!("-k must be between 1 and {}", m.n())).into());
            }
            let labels = cluster(&m, a.k)?;
            let text: Vec<String> = ids.iter().zip(&labels).map(|(id, l)| format!("{id}\t{l}")).collect();
            let rows: Vec<Value> = ids.iter().zip(&labels).map(|(id, l)| json!({ "id": id, "cluster": l })).collect();
            out.emit(json!({ "labels": rows }), &text.join("\n"))
        }
        Command::Eval(a) => {
            let corpus = read_corpus(&a.input)?;
            let gold: Vec<f64> = corpus.records.iter().map(|r| r.f1).collect();
            let mut reports = Vec::new();
            if let Some(path) = &a.model {
                let model = checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
                reports.push(ScoreReport::new("model", &model.predict(&corpus.records)?, &gold)?);
            }
            if a.random {
                reports.push(ScoreReport::new("random alignment", &random_baseline(&corpus.records, cli.seed)?, &gold)?);
            }
            let mut bound = Value::Null;
            if let Some(path) = &a.alignments {
                let lines = read_alignment_lines(BufReader::new(open(path)?))?;
                let predicted = lines.iter().map(|p| Alignment::from_full(p)).collect::<amrsynth::Result<Vec<_>>>()?;
                let (g, p) = upper_bound_gap(&corpus.records, &predicted)?;
                bound = json!({ "gold": g, "predicted": p });
            }
            if reports.is_empty() && bound.is_null() {
                return Err(Usage("nothing to evaluate: pass --model, --alignments or --random".into()).into());
            }
            let mut text: Vec<String> =
                reports.iter().map(|r| format!("{}\tpearson {}\tn {}", r.predictor, fmt_rho(r.rho), r.n)).collect();
            if !bound.is_null() {
                text.push(format!("average F1 x100: gold {:.2}, predicted {:.2}", bound["gold"], bound["predicted"]));
            }
            out.emit(json!({ "reports": reports, "upper_bound": bound }), &text.join("\n"))
        }
        Command::GenSynthetic(a) => {
            let cfg = SyntheticConfig {
                min_nodes: a.min_nodes,
                max_nodes: a.max_nodes,
                min_edits: a.min_edits,
                max_edits: a.max_edits,
                aligner: aligner(&a.aligner),
                ..SyntheticConfig::default()
            };
            if let Err(e) = cfg.validate() {
                return Err(Usage(e.to_string()).into());
            }
            let corpus = gen_synthetic_pairs(a.n, &cfg, cli.seed)?;
            write_jsonl(&corpus, &a.output)?;
            out.emit(json!({ "records": corpus.len(), "synthetic_config": cfg }), &format!("wrote {} pairs", corpus.len()))
        }
        Command::GradCheck(a) => {
            let cfg = ModelConfig::tiny(kind(a.model), 16);
            let params: ModelParams<f64> = init_params(&cfg, cli.seed)?;
            let mut rng = seed::rng(seed::derive(cli.seed, &[1]));
            let mut grid = || TokenGrid {
                rows: cfg.rows,
                cols: cfg.cols,
                cells: (0..cfg.rows * cfg.cols).map(|_| rng.gen_range(0..cfg.vocab_size as u32)).collect(),
            };
            let batch: Vec<PairItem> = (0..4).map(|i| PairItem { a: grid(), b: grid(), target: 0.2 * i as f64 + 0.1 }).collect();
            let report = grad_check(&params, &batch, a.eps)?;
            let text: Vec<String> = report.groups.iter().map(|g| format!("{}\t{:.3e}\t({} entries)", g.name, g.max_rel, g.checked)).collect();
            let groups: Vec<Value> =
                report.groups.iter().map(|g| json!({ "name": g.name, "max_rel": g.max_rel, "checked": g.checked })).collect();
            out.emit(json!({ "groups": groups, "max_rel": report.max_rel, "passed": report.passed(a.tolerance) }), &text.join("\n"))?;
            if !report.passed(a.tolerance) {
                bail!("gradient check failed: max relative error {:.3e} >= {:.1e}", report.max_rel, a.tolerance);
            }
            Ok(())
        }
    }
}

struct Output<'a> {
    cli: &'a Cli,
}

impl Output<'_> {
    /// JSON (with the run config echoed) under `--json`, else `text`.
    fn emit(&self, mut body: Value, text: &str) -> Result<()> {
        let mut stdout = io::stdout().lock();
        if self.cli.json {
            body["config"] = serde_json::to_value(self.cli)?;
            writeln!(stdout, "{}", serde_json::to_string(&body)?)?;
        } else if !text.is_empty() {
            writeln!(stdout, "{text}")?;
        }
        Ok(())
    }
}

fn aligner(a: &AlignerArgs) -> AlignerConfig {
    let aligner = match a.aligner {
        AlignerKind::Exact => Aligner::Exact,
        AlignerKind::Hillclimb => Aligner::HillClimb,
    };
    AlignerConfig { aligner, restarts: a.restarts, limit: a.limit }
}

fn kind(m: ModelOption) -> ModelKind {
    match m {
        ModelOption::Score => ModelKind::Score,
        ModelOption::Vector => ModelKind::Vector,
    }
}

fn model_config(m: ModelOption, size: ModelSize, vocab: usize) -> ModelConfig {
    match size {
        ModelSize::Standard => ModelConfig::standard(kind(m), vocab),
        ModelSize::Compact => ModelConfig::compact(kind(m), vocab),
        ModelSize::Tiny => ModelConfig::tiny(kind(m), vocab),
    }
}

fn fmt_rho(rho: Option<f64>) -> String {
    rho.map(|r| format!("{r:.4}")).unwrap_or_else(|| "undefined".into())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn read_bank_file(path: &Path) -> Result<Vec<BankEntry>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_bank(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}
