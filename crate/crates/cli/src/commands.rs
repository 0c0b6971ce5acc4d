use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use semcache::client::{run_simulation, summarize, CachePolicy, SimConfig};
use semcache::metrics::{
    confusion_matrix, krippendorff_alpha_ordinal, nrmse, weighted_kappa, weighted_prf, Normalize, RatingSeries,
    Weighting,
};
use semcache::savings::{crossover, savings_curve, SavingsParams};
use semcache::scorer::{
    cost_per_comparison, published_cost_table, score_batch, GroundTruthScorer, HeuristicScorer, HttpChatTransport,
    LlmScorer, PairContext, Pipeline, Scorer, Template, TransportDescriber,
};
use semcache::server::{serve_on, ServerConfig, ServerState};
use semcache::synthetic::{generate, SynthConfig};
use semcache::{load_dataset, save_dataset, Dataset, ImageId, ScopeKey, Threshold};

use crate::manifest::RunRecorder;
use crate::{
    CostArgs, EvaluateArgs, ModelArgs, PipelineArg, ScoreArgs, ScorerKind, SimulateArgs, SynthArgs, TemplateArg,
    UsefractionArgs,
};

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn threshold(v: u8) -> Result<Threshold> {
    Threshold::new(v).with_context(|| format!("threshold {v} outside 1..=4"))
}

pub fn validate(path: &Path) -> Result<()> {
    let ds = load_dataset(path)?;
    let pairs: usize = ds.matrices().map(|m| m.inter_article_pairs().count()).sum();
    println!(
        "ok: {} websites, {} categories, {} images, {} inter-article pairs",
        ds.websites().len(),
        ds.matrices().count(),
        ds.images().len(),
        pairs
    );
    Ok(())
}

pub fn model(args: &ModelArgs) -> Result<()> {
    ensure!(args.u.len() == args.t.len(), "--u has {} values but --t has {}", args.u.len(), args.t.len());
    ensure!(args.out.is_some() || args.t.len() == 1, "several thresholds need --out <dir>");
    let recorder = RunRecorder::start("model", args, None)?;
    let xmax = args.xmax.unwrap_or(args.n);
    let mut outputs = Vec::new();
    for (&u, &t) in args.u.iter().zip(&args.t) {
        let t = threshold(t)?;
        let params = SavingsParams {
            comparisons: args.n,
            useful_fraction: [u; 4],
            image_size: args.s,
            page_weight: args.p,
            images_per_article: args.i,
            id_overhead: args.overhead,
        };
        let curve = savings_curve(&params, t, xmax)?;
        if let Some(x) = crossover(&curve) {
            eprintln!("t={t}: id overhead exceeds expected savings from X={x}");
        }
        let path = args.out.as_ref().map(|d| d.join(format!("model_t{t}.csv")));
        let mut w = csv::Writer::from_writer(writer(path.as_deref())?);
        w.write_record(["X", "p", "mu_bytes", "M_fraction"])?;
        for pt in &curve {
            w.write_record([
                pt.cached.to_string(),
                pt.hit_probability.to_string(),
                pt.savings_bytes.to_string(),
                pt.page_fraction.to_string(),
            ])?;
        }
        w.flush()?;
        outputs.extend(path);
    }
    let refs: Vec<Option<&Path>> = outputs.iter().map(|p| Some(p.as_path())).collect();
    recorder.finish(&refs)?;
    Ok(())
}

fn simulation_dataset(path: Option<&Path>) -> Result<Dataset> {
    match path {
        Some(p) => Ok(load_dataset(p)?),
        None => Ok(generate(&SynthConfig::default())),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let recorder = RunRecorder::start("simulate", args, Some(args.seed))?;
    let ds = simulation_dataset(args.dataset.as_deref())?;
    let t = threshold(args.threshold)?;
    let policy = args.lru_cap.map_or(CachePolicy::Unbounded, CachePolicy::LruCapped);

    let mut trials = csv::Writer::from_writer(writer(args.out.as_deref())?);
    trials.write_record(["fw", "ac", "trial", "exact_bytes", "semantic_bytes", "savings_pct"])?;
    let mut summaries = Vec::new();
    for &fw in &args.fw {
        for &ac in &args.ac {
            let config = SimConfig {
                websites: fw,
                requests: ac,
                trials: args.trials,
                threshold: t,
                include_overhead: args.overhead,
                seed: args.seed,
                policy,
            };
            let result = run_simulation(&ds, &config)?;
            for tr in &result.trials {
                trials.write_record([
                    fw.to_string(),
                    ac.to_string(),
                    tr.trial.to_string(),
                    tr.exact_bytes.to_string(),
                    tr.semantic_bytes.to_string(),
                    format!("{:.6}", tr.savings_pct()),
                ])?;
            }
            summaries.push(summarize(&result));
        }
    }
    trials.flush()?;

    if let Some(path) = &args.summary {
        let mut w = csv::Writer::from_writer(writer(Some(path))?);
        for s in &summaries {
            w.serialize(s)?;
        }
        w.flush()?;
    }
    recorder.finish(&[args.out.as_deref(), args.summary.as_deref()])?;
    Ok(())
}

pub fn serve(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let config: ServerConfig = toml::from_str(&text).with_context(|| format!("parsing {}", config_path.display()))?;

    let mut logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if let Some(log) = &config.log_path {
        let file = File::options()
            .create(true)
            .append(true)
            .open(log)
            .with_context(|| format!("opening {}", log.display()))?;
        logger.target(env_logger::Target::Pipe(Box::new(file)));
    }
    logger.init();

    let state = Arc::new(ServerState::from_config(&config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.bind)
            .await
            .with_context(|| format!("binding {}", config.bind))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        serve_on(state, listener).await?;
        Ok(())
    })
}

#[derive(Debug, Deserialize)]
struct PairRow {
    pair_id: String,
    website: String,
    category: String,
    image_a: u16,
    image_b: u16,
}

#[derive(Serialize)]
struct ScoreRow {
    pair_id: String,
    score: Option<u8>,
    justification: String,
}

fn load_pairs(ds: &Dataset, path: &Path) -> Result<(Vec<String>, Vec<PairContext>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut ids = Vec::new();
    let mut pairs = Vec::new();
    for row in reader.deserialize::<PairRow>() {
        let row = row?;
        let scope = ScopeKey::new(row.website, row.category);
        let image = |id: u16| {
            ds.image(&scope, ImageId(id))
                .cloned()
                .with_context(|| format!("pair {}: image {id} not in {scope}", row.pair_id))
        };
        let pair = PairContext::new(image(row.image_a)?, image(row.image_b)?)
            .with_context(|| format!("pair {}", row.pair_id))?;
        ids.push(row.pair_id);
        pairs.push(pair);
    }
    Ok((ids, pairs))
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let recorder = RunRecorder::start("score", args, None)?;
    let ds = load_dataset(&args.dataset)?;
    let (ids, pairs) = load_pairs(&ds, &args.pairs)?;

    let template = match args.template {
        TemplateArg::Base => Template::Base,
        TemplateArg::MetricDriven => Template::MetricDriven,
    };
    let judge;
    let describer;
    let llm;
    let scorer: &dyn Scorer = match args.scorer {
        ScorerKind::GroundTruth => &GroundTruthScorer { dataset: &ds },
        ScorerKind::Heuristic => &HeuristicScorer,
        ScorerKind::Llm => {
            judge = HttpChatTransport::from_env("SEMCACHE_LLM")?;
            let mut s = match args.pipeline {
                PipelineArg::Direct => LlmScorer::new(Pipeline::Direct, template, &judge),
                PipelineArg::TwoStep => {
                    describer = TransportDescriber { transport: HttpChatTransport::from_env("SEMCACHE_VISION")? };
                    LlmScorer::new(Pipeline::TwoStep, template, &judge).with_describer(&describer)
                }
            };
            s.image_base = args.image_base.clone();
            llm = s;
            &llm
        }
    };

    let results = score_batch(scorer, &pairs, args.concurrency);
    let mut w = csv::Writer::from_writer(writer(args.out.as_deref())?);
    let mut failures = 0;
    for (id, result) in ids.into_iter().zip(results) {
        let row = match result {
            Ok(r) => ScoreRow { pair_id: id, score: Some(r.score.get()), justification: r.justification },
            Err(e) => {
                failures += 1;
                log::error!("pair {id}: {e}");
                ScoreRow { pair_id: id, score: None, justification: format!("error: {e}") }
            }
        };
        w.serialize(row)?;
    }
    w.flush()?;
    recorder.finish(&[args.out.as_deref()])?;
    if failures > 0 {
        bail!("{failures} pairs could not be scored");
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct EvalRow {
    #[allow(dead_code)]
    pair_id: String,
    predicted: i64,
    truth: i64,
}

#[derive(Serialize)]
struct EvalReport {
    n: usize,
    nrmse: f64,
    kappa_linear: Option<f64>,
    kappa_quadratic: Option<f64>,
    krippendorff_alpha_ordinal: Option<f64>,
    precision_weighted: f64,
    recall_weighted: f64,
    f1_weighted: f64,
    confusion_counts: [[u64; 5]; 5],
    zero_support_classes: Vec<u8>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let recorder = RunRecorder::start("evaluate", args, None)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let rows: Vec<EvalRow> = reader.deserialize().collect::<Result<_, _>>()?;
    let predicted: Vec<i64> = rows.iter().map(|r| r.predicted).collect();
    let truth: Vec<i64> = rows.iter().map(|r| r.truth).collect();
    let series = RatingSeries::from_ints(&predicted, &truth)?;

    let (pred_scores, truth_scores): (Vec<_>, Vec<_>) = series.pairs().iter().copied().unzip();
    let prf = weighted_prf::<f64>(&series);
    let cm = confusion_matrix::<f64>(&series, Normalize::Row);
    let report = EvalReport {
        n: series.len(),
        nrmse: nrmse(&series),
        kappa_linear: weighted_kappa(&series, Weighting::Linear).ok(),
        kappa_quadratic: weighted_kappa(&series, Weighting::Quadratic).ok(),
        krippendorff_alpha_ordinal: krippendorff_alpha_ordinal(&pred_scores, &truth_scores).ok(),
        precision_weighted: prf.precision,
        recall_weighted: prf.recall,
        f1_weighted: prf.f1,
        confusion_counts: cm.counts,
        zero_support_classes: cm.zero_support_rows.clone(),
    };
    let mut out = writer(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;

    if let Some(path) = &args.confusion {
        let mut w = csv::Writer::from_writer(writer(Some(path))?);
        w.write_record(["truth", "pred_0", "pred_1", "pred_2", "pred_3", "pred_4"])?;
        for (r, row) in cm.values.iter().enumerate() {
            let mut rec = vec![r.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    recorder.finish(&[args.out.as_deref(), args.confusion.as_deref()])?;
    Ok(())
}

pub fn usefraction(args: &UsefractionArgs) -> Result<()> {
    let recorder = RunRecorder::start("usefraction", args, None)?;
    let ds = load_dataset(&args.dataset)?;
    let thresholds = args.t.iter().map(|&t| threshold(t)).collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(writer(args.out.as_deref())?);
    w.write_record(["website", "category", "t", "useful", "total", "fraction"])?;
    for &t in &thresholds {
        let (mut all_useful, mut all_total) = (0, 0);
        for m in ds.matrices() {
            let (useful, total) = semcache::metrics::useful_counts(m, t);
            all_useful += useful;
            all_total += total;
            let scope = m.scope();
            w.write_record([
                scope.website.clone(),
                scope.category.clone(),
                t.to_string(),
                useful.to_string(),
                total.to_string(),
                fraction(useful, total),
            ])?;
        }
        w.write_record([
            "*".to_string(),
            "*".to_string(),
            t.to_string(),
            all_useful.to_string(),
            all_total.to_string(),
            fraction(all_useful, all_total),
        ])?;
    }
    w.flush()?;
    recorder.finish(&[args.out.as_deref()])?;
    Ok(())
}

fn fraction(num: u64, den: u64) -> String {
    if den == 0 {
        "0".to_string()
    } else {
        format!("{:.6}", num as f64 / den as f64)
    }
}

pub fn cost(args: &CostArgs) -> Result<()> {
    let recorder = RunRecorder::start("cost", args, None)?;
    let mut w = csv::Writer::from_writer(writer(args.out.as_deref())?);
    w.write_record([
        "model",
        "input_tokens",
        "output_tokens",
        "input_cost",
        "output_cost",
        "per_comparison",
        "comparisons",
        "total",
    ])?;
    let dec = |r: &semcache::Rational| r.to_f64().unwrap_or(f64::NAN).to_string();
    for (name, mut model) in published_cost_table() {
        model.input_tokens = args.input_tokens;
        model.output_tokens = args.output_tokens;
        let per = cost_per_comparison(&model);
        let total = per.clone() * semcache::scalar::ratio(args.comparisons as i64, 1);
        w.write_record([
            name.to_string(),
            args.input_tokens.to_string(),
            args.output_tokens.to_string(),
            dec(&model.input_cost()),
            dec(&model.output_cost()),
            dec(&per),
            args.comparisons.to_string(),
            dec(&total),
        ])?;
    }
    w.flush()?;
    recorder.finish(&[args.out.as_deref()])?;
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let recorder = RunRecorder::start("synth", args, Some(args.seed))?;
    let config = SynthConfig {
        websites: args.websites,
        categories_per_website: args.categories,
        articles_per_category: args.articles,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let ds = generate(&config);
    let manifest = save_dataset(&ds, &args.out)?;
    println!("{}", manifest.display());
    recorder.finish(&[Some(&manifest)])?;
    Ok(())
}
