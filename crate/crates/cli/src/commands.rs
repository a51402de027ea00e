use std::path::Path;

use log::info;
use rayon::prelude::*;
use sldsgcn::analysis::{
    degree_distribution, influence_scores, labeled_neighbor_ratio_buckets, snowball_sample, write_bucket_stats_csv,
    write_degree_distribution_csv, write_influence_csv, write_ratio_csv,
};
use sldsgcn::checkpoint::Checkpoint;
use sldsgcn::config::RunConfig;
use sldsgcn::graph::{split, Graph};
use sldsgcn::pipeline::{evaluate as evaluate_student, run_variant, RunMetrics, TrainingContext, Variant, METRICS_SCHEMA_VERSION};
use sldsgcn::rng::{stream_rng, Stream};
use sldsgcn::stats::Summary;

use crate::args::{AblateArgs, ConfigArgs, EvaluateArgs, ProfileArgs};
use crate::output::{create_dir, write_atomic, write_csv, write_json, EvaluationDocument, SeedDocument, SummaryDocument};
use crate::{CliError, CliResult};

fn load_graph(dir: &Path) -> CliResult<Graph> {
    let (g, report) = Graph::load_with_report(dir).map_err(CliError::Data)?;
    info!("loaded {}: {report}", dir.display());
    Ok(g)
}

pub fn ingest(src: &Path, dst: &Path) -> CliResult<()> {
    let (g, report) = Graph::load_with_report(src).map_err(CliError::Data)?;
    g.save(dst).map_err(CliError::Data)?;
    write_json(&dst.join("ingest_report.json"), &report)?;
    println!("{report}");
    Ok(())
}

pub fn profile(args: &ProfileArgs) -> CliResult<()> {
    let config = args.config.resolve()?;
    let g = load_graph(&config.dataset)?;
    let seed = config.seeds[0];
    let masks = split(&g, config.label_rate, config.test_frac, seed)?;
    let dir = config.output_dir.join("profile");
    create_dir(&dir)?;

    write_csv(&dir.join("degree_distribution.csv"), &config, |w| {
        write_degree_distribution_csv(&degree_distribution(&g), w)
    })?;
    let ratios = labeled_neighbor_ratio_buckets(&g, &masks, config.training.d_max);
    write_csv(&dir.join("labeled_neighbor_ratio.csv"), &config, |w| write_ratio_csv(&ratios, w))?;

    let evaluation = match &args.checkpoint {
        Some(path) => {
            let student = Checkpoint::load(path).map_err(CliError::Data)?.into_student()?;
            let ctx = TrainingContext::new(&g, student.config.d_max);
            evaluate_student(&student, &ctx, &g, &masks)?
        }
        None => {
            info!("no checkpoint given; training a GCN baseline on seed {seed}");
            let plan = config.plan_for(Variant::Gcn);
            run_variant(&plan, &g, &masks, seed, config.label_rate, config.test_frac)?.evaluation
        }
    };
    write_csv(&dir.join("error_by_degree.csv"), &config, |w| write_bucket_stats_csv(&evaluation.buckets, w))?;

    match args.subsample {
        Some(size) => {
            let nodes = snowball_sample(&g, size, &mut stream_rng(config.influence.seed, Stream::Analysis));
            let sub = g.induced_subgraph(&nodes)?;
            let labeled: Vec<usize> = (0..sub.num_nodes()).collect();
            let report = influence_scores(&sub, &labeled, &config.influence)?;
            write_csv(&dir.join("influence.csv"), &config, |w| write_influence_csv(&sub, &report, w))?;
            write_csv(&dir.join("subsample_nodes.csv"), &config, |w| {
                use std::io::Write as _;
                writeln!(w, "node_id,original_id")?;
                nodes.iter().enumerate().try_for_each(|(i, o)| writeln!(w, "{i},{o}"))
            })?;
        }
        None => {
            let report = influence_scores(&g, &masks.train_nodes(), &config.influence)?;
            write_csv(&dir.join("influence.csv"), &config, |w| write_influence_csv(&g, &report, w))?;
        }
    }
    println!("wrote diagnostics to {}", dir.display());
    Ok(())
}

/// Trains `config.variant` on every seed, writing each seed's metrics (and
/// optionally its checkpoint) into `dir` as soon as it finishes.
fn run_seeds(config: &RunConfig, g: &Graph, dir: &Path, checkpoints: bool) -> CliResult<Vec<RunMetrics>> {
    let plan = config.plan();
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let masks = split(g, config.label_rate, config.test_frac, seed)?;
            let outcome = run_variant(&plan, g, &masks, seed, config.label_rate, config.test_frac)?;
            let m = &outcome.metrics;
            info!("{} seed {seed}: accuracy {:.4}", config.variant, m.accuracy);
            write_json(&dir.join(format!("seed_{seed}.json")), &SeedDocument::new(config, m))?;
            if checkpoints {
                let ck = Checkpoint::from_student(
                    &outcome.student,
                    config.variant,
                    &config.dataset.to_string_lossy(),
                    config.label_rate,
                    config.test_frac,
                    seed,
                )
                .with_config(config.clone());
                write_atomic(&dir.join(format!("seed_{seed}.ckpt")), &ck.encode()?)?;
            }
            Ok(outcome.metrics)
        })
        .collect()
}

pub fn train(args: &ConfigArgs) -> CliResult<()> {
    let config = args.resolve()?;
    let g = load_graph(&config.dataset)?;
    let dir = config.output_dir.join(config.variant.name());
    let runs = run_seeds(&config, &g, &dir, true)?;
    let summary = SummaryDocument::new(&config, config.variant, config.label_rate, &runs);
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{}: mean accuracy {:.4} ± {:.4} over {} seeds ({})",
        config.variant,
        summary.accuracy.mean,
        summary.accuracy.std,
        summary.accuracy.n,
        dir.display()
    );
    Ok(())
}

/// Rows of the ablation table: the pipeline ablations, then the soft-set
/// alternatives. The intersection soft set is the full pipeline, so its row
/// repeats the SL-DSGCN runs under its own name.
const ABLATION_ROWS: [(&str, Variant); 8] = [
    ("DSGCN", Variant::Dsgcn),
    ("MT-GNN", Variant::MtGnn),
    ("SL-fs", Variant::SlFs),
    ("SL-GNN", Variant::SlGnn),
    ("SL-DSGCN", Variant::SlDsgcn),
    ("soft-set-A", Variant::SoftSetA),
    ("soft-set-T", Variant::SoftSetT),
    ("soft-set-intersection", Variant::SlDsgcn),
];

pub fn ablate(args: &AblateArgs) -> CliResult<()> {
    let base = args.config.resolve()?;
    let g = load_graph(&base.dataset)?;
    let rates = args.label_rates.clone().unwrap_or_else(|| vec![base.label_rate]);
    let mut configs = Vec::new();
    for &rate in &rates {
        for variant in Variant::ABLATION {
            let config = RunConfig {
                variant,
                label_rate: rate,
                ..base.clone()
            };
            config.validate()?;
            configs.push(config);
        }
    }
    let results: Vec<Vec<RunMetrics>> = configs
        .par_iter()
        .map(|config| {
            let dir = base
                .output_dir
                .join("ablation")
                .join(format!("rate_{}", config.label_rate))
                .join(config.variant.name());
            let runs = run_seeds(config, &g, &dir, false)?;
            write_json(&dir.join("summary.json"), &SummaryDocument::new(config, config.variant, config.label_rate, &runs))?;
            Ok(runs)
        })
        .collect::<CliResult<_>>()?;

    let path = base.output_dir.join("ablation.csv");
    write_csv(&path, &base, |w| {
        use std::io::Write as _;
        writeln!(w, "variant,label_rate,seeds,mean_accuracy,std_accuracy")?;
        for &rate in &rates {
            for (name, variant) in ABLATION_ROWS {
                let (config, runs) = configs
                    .iter()
                    .zip(&results)
                    .find(|(c, _)| c.variant == variant && c.label_rate == rate)
                    .expect("every ablation variant ran at every rate");
                let acc: Vec<f64> = runs.iter().map(|m| m.accuracy).collect();
                let s = Summary::of(&acc);
                writeln!(w, "{name},{},{},{},{}", config.label_rate, s.n, s.mean, s.std)?;
            }
        }
        Ok(())
    })?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let ck = Checkpoint::load(&args.checkpoint).map_err(CliError::Data)?;
    let meta = ck.meta.clone();
    let dataset = args.dataset.clone().unwrap_or_else(|| meta.dataset.clone().into());
    let g = load_graph(&dataset)?;
    let masks = split(&g, meta.label_rate, meta.test_frac, meta.seed)?;
    let student = ck.into_student().map_err(CliError::Data)?;
    let ctx = TrainingContext::new(&g, student.config.d_max);
    let evaluation = evaluate_student(&student, &ctx, &g, &masks)?;
    let doc = EvaluationDocument {
        schema_version: METRICS_SCHEMA_VERSION,
        checkpoint: &meta,
        dataset: dataset.to_string_lossy().into_owned(),
        accuracy: evaluation.accuracy,
        buckets: &evaluation.buckets,
    };
    if let Some(path) = &args.output {
        write_json(path, &doc)?;
    }
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{text}");
    Ok(())
}
