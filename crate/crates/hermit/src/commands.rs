use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use hermit_core::corpus::{
    holdout_split, kfold_split, parse_conll, parse_predictions, parse_tagged, serialize_conll, serialize_tagged,
    tokenize, write_rows, AnnotatedSentence, ConvertOptions, TaggedSentence,
};
use hermit_core::evaluation::{render_records, MetricsReport};
use hermit_core::layers::PrecomputedEmbeddings;
use hermit_core::model::{Ablation, HermitModel, TriPrediction};
use hermit_core::training::{
    aggregate_results, evaluate, fit_with, grid_search, model_config, run_fold, run_fold_with_grid, FitOutcome,
    FoldResult, GridPoint, GridSpace, Hyperparameters, TuningProtocol,
};

use crate::checkpoint;
use crate::cli::{Command, ConvertArgs, CrossvalArgs, EvalArgs, TagArgs, TagFormat, TrainArgs};
use crate::embeddings;
use crate::error::{read_to_string, write_file, AppError, Context, Result};
use crate::manifest::RunManifest;
use crate::nlubm;
use crate::reports;
use crate::settings::{self, ConfigFile};

pub const CHECKPOINT_FILE: &str = "model.hmt";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn run(command: &Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(a) => train(a).map(|_| ()),
        Command::Tag(a) => tag(a, stdout),
        Command::Eval(a) => eval(a, stdout).map(|_| ()),
        Command::Crossval(a) => crossval(a, stdout),
        Command::Convert(a) => convert(a, stdout),
    }
}

fn io_out(e: std::io::Error) -> AppError {
    AppError::io("<stdout>", e)
}

pub fn load_corpus(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    parse_conll(&read_to_string(path)?).context(|| path.display().to_string())
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| AppError::io(path, e))
}

fn load_table(path: Option<&PathBuf>) -> Result<Option<Arc<PrecomputedEmbeddings>>> {
    path.map(|p| embeddings::load(p).map(Arc::new)).transpose()
}

/// Defaults, then the configuration file, then flags. Supplying an embedding
/// table switches to precomputed mode at the table's width.
fn resolve_settings(
    config: Option<&PathBuf>,
    table: Option<&PrecomputedEmbeddings>,
    ablation: Option<Ablation>,
    seed: Option<u64>,
    set: &[String],
) -> Result<(Hyperparameters, GridSpace)> {
    let file: Option<ConfigFile> = config.map(|p| settings::load_config(p)).transpose()?;
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(t) = table {
        overrides.push(("embedding".into(), "precomputed".into()));
        overrides.push(("embedding_dim".into(), t.dim().to_string()));
    }
    if let Some(a) = ablation {
        let (sa, cn, crf) = a.flags();
        overrides.push(("self_attention".into(), sa.to_string()));
        overrides.push(("shortcuts".into(), cn.to_string()));
        overrides.push(("crf".into(), crf.to_string()));
    }
    if let Some(s) = seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    for s in set {
        overrides.push(settings::parse_override(s)?);
    }
    let hyper = settings::resolve(file.as_ref(), &overrides)?;
    Ok((hyper, file.map(|f| f.grid).unwrap_or_default()))
}

fn grid_tsv(scores: &[(Vec<(String, String)>, f64)]) -> String {
    let mut s = String::from("point\tscore\n");
    for (point, score) in scores {
        let p: Vec<String> = point.iter().map(|(k, v)| format!("{k}={v}")).collect();
        s.push_str(&format!("{}\t{score}\n", p.join(",")));
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub outcome: FitOutcome,
    pub checkpoint: PathBuf,
}

pub fn train(args: &TrainArgs) -> Result<TrainSummary> {
    let table = load_table(args.embeddings.as_ref())?;
    let (mut hyper, grid) =
        resolve_settings(args.config.as_ref(), table.as_deref(), args.ablation, args.seed, &args.set)?;
    let mut manifest = RunManifest::new("train", hyper.to_pairs(), hyper.train.seed);
    let data = load_corpus(&args.data)?;
    manifest.input(&args.data)?;
    let (train, dev) = match &args.dev {
        Some(p) => {
            manifest.input(p)?;
            (data, load_corpus(p)?)
        }
        None => {
            if !(args.dev_fraction > 0.0 && args.dev_fraction < 1.0) {
                return Err(AppError::Usage("--dev-fraction must lie strictly between 0 and 1".into()));
            }
            let all: Vec<usize> = (0..data.len()).collect();
            let (t, d) = holdout_split(&all, args.dev_fraction, hyper.train.seed).context(|| "dev split".into())?;
            (
                t.iter().map(|&i| data[i].clone()).collect(),
                d.iter().map(|&i| data[i].clone()).collect(),
            )
        }
    };
    if let Some(p) = &args.embeddings {
        manifest.input(p)?;
    }
    create_dir(&args.out)?;
    if !grid.axes.is_empty() {
        let result = grid_search(&grid, &hyper, &train, &dev, table.clone()).context(|| "grid search".into())?;
        let path = args.out.join("grid.tsv");
        write_file(&path, grid_tsv(&result.scores))?;
        manifest.output(&path)?;
        hyper = result.best;
        manifest.config = hyper.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    }
    let mut everything = train.clone();
    everything.extend(dev.iter().cloned());
    let config = model_config(&hyper.model, &train, &everything);
    let mut model = HermitModel::build(config, hyper.train.seed, table).context(|| "model".into())?;
    let metric = hyper.train.dev_metric;
    let quiet = args.quiet;
    let outcome = fit_with(
        &mut model,
        &train,
        &dev,
        &hyper.train,
        |m, d| Ok(metric.value(&evaluate(m, d)?)),
        |r| {
            if !quiet {
                eprintln!("epoch {:>3}  loss {:.6}  dev {} {:.4}", r.epoch, r.train_loss, metric.name(), r.dev_metric);
            }
        },
    )
    .context(|| "training".into())?;
    let checkpoint = args.out.join(CHECKPOINT_FILE);
    checkpoint::save(&checkpoint, &model)?;
    let history = args.out.join(HISTORY_FILE);
    write_file(&history, reports::history_jsonl(&outcome.history))?;
    let report = args.out.join("report.txt");
    let dev_report = evaluate(&model, &dev).context(|| "dev evaluation".into())?;
    write_file(
        &report,
        format!("best epoch: {}\n{}", outcome.best_epoch, dev_report.render_text()),
    )?;
    let config_path = args.out.join("config.txt");
    write_file(&config_path, settings::render(&hyper))?;
    for p in [&checkpoint, &history, &report, &config_path] {
        manifest.output(p)?;
    }
    manifest.write(&args.out.join(MANIFEST_FILE))?;
    Ok(TrainSummary { outcome, checkpoint })
}

fn read_input(path: Option<&PathBuf>) -> Result<String> {
    match path {
        Some(p) => read_to_string(p),
        None => std::io::read_to_string(std::io::stdin()).map_err(|e| AppError::io("<stdin>", e)),
    }
}

pub fn tag(args: &TagArgs, stdout: &mut dyn Write) -> Result<()> {
    let table = load_table(args.embeddings.as_ref())?;
    let model = checkpoint::load(&args.model, table)?;
    let text = read_input(args.input.as_ref())?;
    let mut out = String::new();
    match args.format {
        TagFormat::Text => {
            for (i, line) in text.lines().enumerate() {
                let tokens = tokenize(line);
                if tokens.is_empty() {
                    continue;
                }
                let id = format!("line-{}", i + 1);
                let p = model.predict(&id, &tokens).context(|| id.clone())?;
                write_rows(&mut out, &id, &tokens, &[&p.da, &p.fr, &p.ar]);
            }
        }
        TagFormat::Conll => {
            let corpus = parse_conll(&text).context(|| "input".into())?;
            let tagged = corpus
                .into_iter()
                .map(|gold| {
                    let predicted = model.predict_sentence(&gold).context(|| gold.id.clone())?;
                    Ok(TaggedSentence { gold, predicted })
                })
                .collect::<Result<Vec<_>>>()?;
            out = serialize_tagged(&tagged);
        }
    }
    stdout.write_all(out.as_bytes()).map_err(io_out)
}

struct Prediction {
    id: String,
    tokens: Vec<String>,
    predicted: TriPrediction,
}

/// Column count of the first data row.
fn column_count(text: &str) -> Option<usize> {
    text.lines()
        .map(|l| l.trim_end_matches('\r'))
        .find(|l| !l.trim().is_empty() && !(l.starts_with('#') && !l.contains('\t')))
        .map(|l| l.split('\t').count())
}

fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let text = read_to_string(path)?;
    let ctx = || path.display().to_string();
    Ok(match column_count(&text) {
        None => Vec::new(),
        Some(7) => parse_tagged(&text)
            .context(ctx)?
            .into_iter()
            .map(|s| Prediction {
                id: s.gold.id,
                tokens: s.gold.tokens,
                predicted: s.predicted,
            })
            .collect(),
        Some(_) => parse_predictions(&text)
            .context(ctx)?
            .into_iter()
            .map(|s| Prediction {
                id: s.id,
                tokens: s.tokens,
                predicted: s.predicted,
            })
            .collect(),
    })
}

/// Pairs sentences by position; ids and tokens must agree.
fn align(gold: &[AnnotatedSentence], pred: &[Prediction]) -> Result<Vec<TriPrediction>> {
    for (g, p) in gold.iter().zip(pred) {
        if g.id != p.id {
            return Err(AppError::Data(format!(
                "sentence {}: prediction file has sentence {} in its place",
                g.id, p.id
            )));
        }
        if g.tokens != p.tokens {
            return Err(AppError::Data(format!("sentence {}: tokens differ between gold and predictions", g.id)));
        }
    }
    if gold.len() != pred.len() {
        let first = gold
            .get(pred.len())
            .map(|s| s.id.as_str())
            .or_else(|| pred.get(gold.len()).map(|s| s.id.as_str()))
            .unwrap_or_default();
        return Err(AppError::Data(format!(
            "gold has {} sentences but predictions have {}; first unmatched sentence {first}",
            gold.len(),
            pred.len()
        )));
    }
    Ok(pred.iter().map(|p| p.predicted.clone()).collect())
}

pub fn eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<MetricsReport> {
    let gold = load_corpus(&args.gold)?;
    let pred = load_predictions(&args.pred)?;
    let predicted = align(&gold, &pred)?;
    let report = MetricsReport::compute(&gold, &predicted).context(|| "evaluation".into())?;
    let text = report.render_text();
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let mut manifest = RunManifest::new("eval", Vec::new(), 0);
        manifest.input(&args.gold)?;
        manifest.input(&args.pred)?;
        let txt = dir.join("report.txt");
        let tsv = dir.join("metrics.tsv");
        write_file(&txt, &text)?;
        write_file(&tsv, reports::metrics_tsv(&report))?;
        manifest.output(&txt)?;
        manifest.output(&tsv)?;
        manifest.write(&dir.join(MANIFEST_FILE))?;
    }
    stdout.write_all(text.as_bytes()).map_err(io_out)?;
    Ok(report)
}

pub fn parse_protocol(s: &str) -> Result<TuningProtocol> {
    if s == "next-fold" {
        return Ok(TuningProtocol::NextFold);
    }
    s.strip_prefix("fraction:")
        .and_then(|f| f.parse::<f64>().ok())
        .filter(|f| *f > 0.0 && *f < 1.0)
        .map(TuningProtocol::TrainFraction)
        .ok_or_else(|| AppError::Usage(format!("unknown protocol {s:?}; expected next-fold or fraction:F")))
}

fn compare_runs(paths: &[PathBuf], out_dir: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    let [a, b] = paths else {
        return Err(AppError::Usage("--compare takes two folds.tsv files".into()));
    };
    let ta = reports::parse_folds_tsv(&read_to_string(a)?)?;
    let tb = reports::parse_folds_tsv(&read_to_string(b)?)?;
    let text = reports::comparison_tsv(&reports::compare(&ta, &tb)?);
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        write_file(dir.join("compare.tsv"), &text)?;
    }
    stdout.write_all(text.as_bytes()).map_err(io_out)
}

fn fold_text(fold: &FoldResult, point: Option<&Vec<(String, String)>>) -> String {
    let mut s = format!("fold: {}\nbest epoch: {}\n", fold.round, fold.best_epoch);
    if let Some(p) = point {
        let p: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v}")).collect();
        s.push_str(&format!("grid choice: {}\n", p.join(",")));
    }
    s + &fold.report.render_text()
}

type RoundOutcome = (FoldResult, Option<GridPoint>);

pub fn crossval(args: &CrossvalArgs, stdout: &mut dyn Write) -> Result<()> {
    if let Some(paths) = &args.compare {
        return compare_runs(paths, args.out.as_ref(), stdout);
    }
    let data_path = args.data.as_ref().ok_or_else(|| AppError::Usage("--data is required".into()))?;
    if args.jobs == 0 {
        return Err(AppError::Usage("--jobs must be at least 1".into()));
    }
    let protocol = parse_protocol(&args.protocol)?;
    let table = load_table(args.embeddings.as_ref())?;
    let (hyper, grid) = resolve_settings(args.config.as_ref(), table.as_deref(), args.ablation, args.seed, &args.set)?;
    let mut manifest = RunManifest::new("crossval", hyper.to_pairs(), hyper.train.seed);
    manifest.config.insert("k".into(), args.k.to_string());
    manifest.config.insert("protocol".into(), args.protocol.clone());
    let corpus = load_corpus(data_path)?;
    manifest.input(data_path)?;
    if let Some(p) = &args.embeddings {
        manifest.input(p)?;
    }
    let split = kfold_split(&corpus, args.k, hyper.train.seed).context(|| "folds".into())?;

    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, Result<RoundOutcome>)>> = Mutex::new(Vec::new());
    let run_round = |r: usize| -> Result<RoundOutcome> {
        let ctx = || format!("fold {r}");
        if grid.axes.is_empty() {
            let f = run_fold(&corpus, &split, r, &hyper, protocol, table.clone()).context(ctx)?;
            Ok((f, None))
        } else {
            let (f, g) = run_fold_with_grid(&corpus, &split, r, &hyper, protocol, table.clone(), &grid).context(ctx)?;
            Ok((f, Some(g.best_point)))
        }
    };
    std::thread::scope(|s| {
        for _ in 0..args.jobs.min(args.k) {
            s.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::SeqCst);
                if r >= args.k {
                    break;
                }
                let result = run_round(r);
                if !args.quiet {
                    if let Ok((f, _)) = &result {
                        eprintln!("fold {r}: combined f1 {:.4}", f.report.combined().f1());
                    }
                }
                done.lock().expect("fold results").push((r, result));
            });
        }
    });
    let mut done = done.into_inner().expect("fold results");
    done.sort_by_key(|(r, _)| *r);
    let mut folds = Vec::new();
    let mut points = Vec::new();
    for (_, result) in done {
        let (f, p) = result?;
        folds.push(f);
        points.push(p);
    }
    let result = aggregate_results(folds).context(|| "aggregation".into())?;

    let mut summary = String::new();
    for row in &result.aggregate {
        if matches!((row.task, row.metric), ("intent" | "entity" | "combined", "f1") | ("all", "combined_em")) {
            summary.push_str(&format!("{} {}: {}\n", row.task, row.metric, row.value));
        }
    }
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let mut written = Vec::new();
        for (f, p) in result.folds.iter().zip(&points) {
            let txt = dir.join(format!("fold-{}.txt", f.round));
            write_file(&txt, fold_text(f, p.as_ref()))?;
            let hist = dir.join(format!("fold-{}.history.jsonl", f.round));
            write_file(&hist, reports::history_jsonl(&f.history))?;
            written.extend([txt, hist]);
        }
        let folds_path = dir.join("folds.tsv");
        write_file(&folds_path, reports::folds_tsv(&result.folds))?;
        let agg_path = dir.join("aggregate.tsv");
        write_file(&agg_path, render_records(&result.aggregate))?;
        let summary_path = dir.join("summary.txt");
        write_file(&summary_path, &summary)?;
        written.extend([folds_path, agg_path, summary_path]);
        for p in &written {
            manifest.output(p)?;
        }
        manifest.write(&dir.join(MANIFEST_FILE))?;
    }
    stdout.write_all(summary.as_bytes()).map_err(io_out)
}

pub fn convert(args: &ConvertArgs, stdout: &mut dyn Write) -> Result<()> {
    let records = nlubm::parse_records(&read_to_string(&args.nlubm_in)?)?;
    let options = ConvertOptions {
        strip_final_punct: args.strip_final_punct,
    };
    let text = serialize_conll(&nlubm::convert_all(&records, options)?);
    match &args.out {
        Some(p) => write_file(p, text),
        None => stdout.write_all(text.as_bytes()).map_err(io_out),
    }
}
