use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hiermargin::dataset::{load_dataset, save_records};
use hiermargin::margins::MarginTable;
use hiermargin::report::{write_margin_tables, RunWriter};
use hiermargin::retrieval::{mean_mismatch_dissimilarity, recall_at_k, top_k_with_distances};
use hiermargin::sampler::draw_batch;
use hiermargin::trainer::{build_epoch_table, embed_dataset, train_with};
use hiermargin::{
    generate_synthetic, Checkpoint, Dataset, EmbedderParams, Error, FlatConfig, Gallery, Result,
    SyntheticSpec, Taxonomy, TrainConfig,
};

/// Hierarchy-aware metric learning on feature vectors.
#[derive(Parser)]
#[command(name = "hiermargin", version)]
struct Cli {
    /// Seed for every random stream; overrides `seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` training config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an embedder; writes train.log and checkpoints.
    Train(TrainArgs),
    /// Per-level Recall@k of a checkpoint; writes recall.tsv.
    Eval(EvalArgs),
    /// Nearest gallery items of one sample.
    Query(QueryArgs),
    /// Dump semantic, visual and combined margin matrices.
    Margins(MarginArgs),
    /// Tree height and node counts per depth.
    TreeStats { dataset: PathBuf },
    /// Generate a synthetic hierarchical dataset.
    Synth(SynthArgs),
    /// Print one planned mini-batch.
    SampleBatch(BatchArgs),
}

#[derive(Args)]
struct TrainArgs {
    dataset: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Use one constant margin for every class pair.
    #[arg(long)]
    fixed_margin: Option<f64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Do not echo per-step log lines.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Query samples.
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Separate gallery file; defaults to the query set with self-matches excluded.
    #[arg(long)]
    gallery: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    ks: Vec<usize>,
    /// Taxonomy depths to score; defaults to every depth down to the shallowest leaf.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<usize>,
}

#[derive(Args)]
struct QueryArgs {
    gallery: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Id of the query sample inside the gallery file.
    #[arg(long)]
    id: String,
    #[arg(short, default_value_t = 5)]
    k: usize,
}

#[derive(Args)]
struct MarginArgs {
    dataset: PathBuf,
    #[arg(long, default_value_t = 1)]
    epoch: usize,
    /// Parameters used to embed the dataset for the visual term.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    branching: Vec<usize>,
    #[arg(long)]
    samples_per_leaf: usize,
    #[arg(long)]
    feature_dim: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    level_scales: Vec<f64>,
    #[arg(long)]
    noise_scale: f64,
    /// File name inside the output directory.
    #[arg(long, default_value = "synthetic.jsonl")]
    output: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    dataset: PathBuf,
    #[arg(long, default_value_t = 1)]
    epoch: usize,
    #[arg(long, default_value_t = 0)]
    step: usize,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out_dir).map_err(|e| Error::Io {
        path: cli.out_dir.clone(),
        source: e,
    })?;
    let file_cfg = match &cli.config {
        Some(p) => FlatConfig::load(p)?,
        None => FlatConfig::default(),
    };
    let base = FlatConfig {
        seed: cli.seed,
        ..Default::default()
    };
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Train(a) => {
            let flags = FlatConfig {
                epochs: a.epochs,
                steps_per_epoch: a.steps_per_epoch,
                lr: a.lr,
                alpha: a.alpha,
                fixed_margin: a.fixed_margin,
                checkpoint_every: a.checkpoint_every,
                ..base
            };
            let cfg = file_cfg.overlay(flags).to_train_config()?;
            cmd_train(&a, &cfg, out)
        }
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Query(a) => cmd_query(&a),
        Command::Margins(a) => {
            let cfg = file_cfg.overlay(base).to_train_config()?;
            cmd_margins(&a, &cfg, out)
        }
        Command::TreeStats { dataset } => cmd_tree_stats(&dataset),
        Command::Synth(a) => cmd_synth(&a, cli.seed.or(file_cfg.seed).unwrap_or(0), out),
        Command::SampleBatch(a) => {
            let cfg = file_cfg.overlay(base).to_train_config()?;
            cmd_sample_batch(&a, &cfg)
        }
    }
}

fn load_params(path: &Path, data: &Dataset) -> Result<EmbedderParams> {
    let params = Checkpoint::load(path)?.params()?;
    if params.input_dim() != data.feature_dim {
        return Err(Error::DimMismatch {
            line: 0,
            id: path.display().to_string(),
            expected: data.feature_dim,
            got: params.input_dim(),
        });
    }
    Ok(params)
}

fn gallery_of(params: &EmbedderParams, data: &Dataset) -> Result<Gallery> {
    Gallery::new(
        embed_dataset(params, data)?,
        data.records.iter().map(|r| r.id.clone()).collect(),
        data.leaves.clone(),
    )
}

fn cmd_train(a: &TrainArgs, cfg: &TrainConfig, out: &Path) -> Result<()> {
    let (data, t) = load_dataset(&a.dataset)?;
    let mut writer = RunWriter::new(out, cfg.seed)?.echo(!a.quiet);
    let state = train_with(&data, &t, cfg, &mut writer)?;
    writer.finish(&state)?;
    write_margin_tables(out, &t, &state.margin_table)?;
    if !a.quiet {
        println!(
            "trained {} epochs, final loss {:.6}, output in {}",
            state.epoch,
            state.loss_history.last().copied().unwrap_or(0.0),
            out.display()
        );
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &Path) -> Result<()> {
    // Query and gallery share one taxonomy, so load them as one dataset.
    let (queries, gallery, t) = match &a.gallery {
        None => {
            let (d, t) = load_dataset(&a.dataset)?;
            (d.clone(), d, t)
        }
        Some(g) => {
            let (q, _) = load_dataset(&a.dataset)?;
            let (gd, _) = load_dataset(g)?;
            let nq = q.len();
            let mut records = q.records;
            records.extend(gd.records);
            let (all, t) = Dataset::from_records(q.feature_dim, records)?;
            let idx: Vec<usize> = (0..all.len()).collect();
            (all.subset(&idx[..nq]), all.subset(&idx[nq..]), t)
        }
    };
    let params = load_params(&a.checkpoint, &queries)?;
    let levels = if a.levels.is_empty() {
        let shallowest = t.leaves().iter().map(|&l| t.depth(l)).min().unwrap_or(0);
        (1..=shallowest).collect()
    } else {
        a.levels.clone()
    };
    let (q, g) = (gallery_of(&params, &queries)?, gallery_of(&params, &gallery)?);
    let report = recall_at_k(&q, &g, &t, &a.ks, &levels)?;
    let tsv = report.to_tsv();
    let path = out.join("recall.tsv");
    fs::write(&path, &tsv).map_err(|e| Error::Io { path, source: e })?;
    print!("{tsv}");
    if let Some(d) = mean_mismatch_dissimilarity(&q, &g, &t)? {
        println!("# mean nearest-mismatch dissimilarity {d:.6}");
    }
    Ok(())
}

fn cmd_query(a: &QueryArgs) -> Result<()> {
    let (data, t) = load_dataset(&a.gallery)?;
    let params = load_params(&a.checkpoint, &data)?;
    let g = gallery_of(&params, &data)?;
    let pos = g
        .position(&a.id)
        .ok_or_else(|| Error::UnknownSample(a.id.clone()))?;
    let hits = top_k_with_distances(&g.embeddings[pos], &g, a.k, Some(&a.id))?;
    for (rank, (i, d)) in hits.into_iter().enumerate() {
        println!(
            "{}\t{}\t{:.6}\t{}",
            rank + 1,
            g.ids[i],
            d,
            t.path_name(g.leaves[i])
        );
    }
    Ok(())
}

fn epoch_table(
    dataset: &Dataset,
    t: &Taxonomy,
    cfg: &TrainConfig,
    epoch: usize,
    checkpoint: Option<&Path>,
) -> Result<MarginTable> {
    match checkpoint {
        Some(p) => build_epoch_table(&load_params(p, dataset)?, dataset, t, cfg, epoch),
        None if epoch <= 1 => {
            hiermargin::margins::build_with_mode(t, &cfg.seeded_margin(), cfg.margin_mode, epoch, None)
        }
        None => Err(Error::MissingEmbeddings { epoch, class: None }),
    }
}

fn cmd_margins(a: &MarginArgs, cfg: &TrainConfig, out: &Path) -> Result<()> {
    let (data, t) = load_dataset(&a.dataset)?;
    let table = epoch_table(&data, &t, cfg, a.epoch, a.checkpoint.as_deref())?;
    for p in write_margin_tables(out, &t, &table)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_tree_stats(dataset: &Path) -> Result<()> {
    let (data, t) = load_dataset(dataset)?;
    println!("samples\t{}", data.len());
    println!("height\t{}", t.tree_height());
    println!("leaves\t{}", t.leaves().len());
    println!("nodes\t{}", t.len());
    for (depth, n) in t.counts_per_depth().into_iter().enumerate() {
        println!("depth {depth}\t{n}");
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, seed: u64, out: &Path) -> Result<()> {
    let spec = SyntheticSpec {
        branching: a.branching.clone(),
        samples_per_leaf: a.samples_per_leaf,
        feature_dim: a.feature_dim,
        level_scales: a.level_scales.clone(),
        noise_scale: a.noise_scale,
        seed,
    };
    let records = generate_synthetic(&spec)?;
    let path = out.join(&a.output);
    save_records(&path, a.feature_dim, &records)?;
    println!(
        "{} samples, {} leaves -> {}",
        records.len(),
        spec.leaf_count(),
        path.display()
    );
    Ok(())
}

fn cmd_sample_batch(a: &BatchArgs, cfg: &TrainConfig) -> Result<()> {
    let (data, t) = load_dataset(&a.dataset)?;
    let table = epoch_table(&data, &t, cfg, a.epoch, a.checkpoint.as_deref())?;
    let plan = draw_batch(
        &data.index_by_class(),
        &table,
        &cfg.seeded_sampler(),
        a.epoch,
        a.step,
    )?;
    let mut cursor = 0;
    for (n, g) in plan.groups.iter().enumerate() {
        let classes: Vec<String> = g.members.iter().map(|&c| t.path_name(c)).collect();
        let take = g.members.len() * cfg.sampler.t_prime;
        let ids: Vec<&str> = plan.samples[cursor..cursor + take]
            .iter()
            .map(|&i| data.records[i].id.as_str())
            .collect();
        cursor += take;
        println!("group {n}\t{}\t{}", classes.join(" "), ids.join(" "));
    }
    Ok(())
}
