//! `mxembed`: command-line front end.
//!
//! Exit codes: 0 on success, 1 when input or configuration is invalid,
//! 2 when a run fails (I/O, divergence).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multiplex_embed::config::RunConfig;
use multiplex_embed::eval::{self, SplitManifest};
use multiplex_embed::experiment::{self, SweepAxis};
use multiplex_embed::graph::{self, Edge, LayerStats, MultiplexNetwork};
use multiplex_embed::model::checkpoint::Checkpoint;
use multiplex_embed::model::ModelParams;
use multiplex_embed::sampler::{self, SamplerConfig};
use multiplex_embed::synth::{self, AuxLayerSpec, SynthConfig};
use multiplex_embed::trainer;
use multiplex_embed::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "mxembed",
    version,
    about = "Multiplex network embedding with auxiliary-layer under-sampling"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-layer edge counts, imbalance ratio and target density.
    Stats(StatsArgs),
    /// Under-sample the auxiliary layers once.
    Sample(SampleArgs),
    /// Generate a planted-partition multiplex network.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Link-prediction AUC on the held-out target edges.
    EvalLp(EvalArgs),
    /// Node-classification Macro/Micro F1.
    EvalNc(EvalArgs),
    /// Repeat train + link prediction over one varied parameter.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Edge file: `layer src dst` lines, optional `nodes N layers L` header.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Attribute file: `node v1 v2 ...` lines.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Label file: `node label` lines.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Edge counts per layer instead of a data file, e.g. `5000,50`.
    #[arg(long, value_delimiter = ',', conflicts_with = "data")]
    counts: Option<Vec<usize>>,
    /// Node count, required with --counts.
    #[arg(long, requires = "counts")]
    nodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    target_layer: usize,
    /// Also write a CSV row to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Take similarities from this checkpoint's target-layer embeddings;
    /// without it, freshly initialized embeddings are used.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.6)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    target_layer: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embedding dimension for the fresh-initialization case.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Write the sampled network here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-edge decisions (CSV) here.
    #[arg(long)]
    emit_decisions: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    #[arg(long, default_value_t = 4)]
    communities: usize,
    #[arg(long, default_value_t = 400)]
    target_edges: usize,
    /// Auxiliary layer as `edges:relevance`; repeat for more layers.
    #[arg(long = "aux", default_values_t = vec!["20000:0.5".to_string()])]
    aux: Vec<String>,
    #[arg(long, default_value_t = 0.9)]
    p_in: f64,
    #[arg(long, default_value_t = 0.1)]
    p_out: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge file to write.
    #[arg(long)]
    out: PathBuf,
    /// Label file to write (community ids).
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    target_layer: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Hold out 8:1:1 target-edge splits drawn with this seed.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Checkpoint file to write.
    #[arg(long)]
    out_checkpoint: Option<PathBuf>,
    /// Per-epoch loss CSV to write.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Train on the whole target layer instead of the split's training part.
    #[arg(long)]
    no_split: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Evaluate this checkpoint; without it, train from the config.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Independent runs to average (seeds offset by the run index).
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Also write CSV rows to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// keep_fraction, alpha, beta or dimension.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn load(data: &DataArgs) -> Result<MultiplexNetwork> {
    let path = data
        .data
        .as_deref()
        .ok_or_else(|| Error::Config("--data is required".into()))?;
    graph::load_multiplex(path, data.attributes.as_deref(), data.labels.as_deref())
}

impl ConfigArgs {
    /// Config file first, then explicit flags.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut set = |key: &str, v: Option<String>| match v {
            Some(v) => cfg.set(key, &v),
            None => Ok(()),
        };
        set("target_layer", self.target_layer.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("epochs", self.epochs.map(|v| v.to_string()))?;
        set("learning_rate", self.learning_rate.map(|v| v.to_string()))?;
        set("variant", self.variant.clone())?;
        set("alpha", self.alpha.map(|v| v.to_string()))?;
        set("beta", self.beta.map(|v| v.to_string()))?;
        set("split_seed", self.split_seed.map(|v| v.to_string()))?;
        if let Some(d) = self.dim {
            set("dim", Some(d.to_string()))?;
            set("attn_dim", Some(d.to_string()))?;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        for (key, path) in [
            ("data", &self.data.data),
            ("attributes", &self.data.attributes),
            ("labels", &self.data.labels),
        ] {
            if let Some(p) = path {
                cfg.set(key, &p.display().to_string())?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_from(cfg: &RunConfig) -> Result<MultiplexNetwork> {
    load(&DataArgs {
        data: cfg.data.clone(),
        attributes: cfg.attributes.clone(),
        labels: cfg.labels.clone(),
    })
}

fn stats_text(stats: &LayerStats, target: usize, num_nodes: usize) -> String {
    let mut out = String::new();
    for (l, c) in stats.edges_per_layer.iter().enumerate() {
        let tag = if l == target { " (target)" } else { "" };
        out.push_str(&format!("layer {l}{tag}: {c} edges\n"));
    }
    out.push_str(&format!("nodes: {num_nodes}\n"));
    out.push_str(&format!(
        "|E_max| = {} (layer {}), |E_min| = {} (layer {})\n",
        stats.edges_per_layer[stats.densest],
        stats.densest,
        stats.edges_per_layer[stats.sparsest],
        stats.sparsest
    ));
    out.push_str(&format!(
        "imbalance ratio mu = {:.2}\n",
        stats.imbalance_ratio
    ));
    out.push_str(&format!("target density = {:.2e}\n", stats.target_density));
    out
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let (stats, n) = match &a.counts {
        Some(counts) => {
            let n = a
                .nodes
                .ok_or_else(|| Error::Config("--nodes is required with --counts".into()))?;
            (LayerStats::from_counts(counts, a.target_layer, n)?, n)
        }
        None => {
            let net = load(&a.data)?;
            (net.compute_stats(a.target_layer)?, net.num_nodes())
        }
    };
    print!("{}", stats_text(&stats, a.target_layer, n));
    if let Some(path) = &a.csv {
        write_file(path, |w| {
            writeln!(
                w,
                "nodes,layers,target_layer,e_max,e_min,e_target,mu,density"
            )?;
            writeln!(
                w,
                "{n},{},{},{},{},{},{},{}",
                stats.edges_per_layer.len(),
                a.target_layer,
                stats.edges_per_layer[stats.densest],
                stats.edges_per_layer[stats.sparsest],
                stats.edges_per_layer[a.target_layer],
                stats.imbalance_ratio,
                stats.target_density
            )
        })?;
    }
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let net = load(&a.data)?;
    let cfg = SamplerConfig {
        alpha: a.alpha,
        beta: a.beta,
        target_layer: a.target_layer,
        seed: a.seed,
    };
    cfg.validate()?;
    let embeddings = match &a.checkpoint {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            ck.params.check_network(&net)?;
            net.check_layer(a.target_layer)?;
            ck.params.layer_embed[a.target_layer].clone()
        }
        None => {
            let mc = multiplex_embed::ModelConfig {
                dim: a.dim,
                attn_dim: a.dim,
                ..Default::default()
            };
            mc.validate()?;
            net.check_layer(a.target_layer)?;
            ModelParams::init(&net, mc, a.seed)?.layer_embed[a.target_layer].clone()
        }
    };
    let res = sampler::undersample(&net, embeddings.view(), &cfg, a.emit_decisions.is_some())?;
    for (l, (before, after)) in net
        .layers()
        .iter()
        .map(|l| l.len())
        .zip(&res.per_layer_kept)
        .enumerate()
    {
        println!("layer {l}: kept {after} of {before}");
    }
    let mu = res
        .sampled_network
        .compute_stats(a.target_layer)?
        .imbalance_ratio;
    println!("imbalance ratio after sampling: {mu:.4}");
    if let Some(path) = &a.out {
        graph::save_edges(&res.sampled_network, path)?;
    }
    if let (Some(path), Some(decisions)) = (&a.emit_decisions, &res.decisions) {
        write_file(path, |w| {
            writeln!(w, "layer,src,dst,similarity,verdict")?;
            for d in decisions {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    d.layer,
                    d.edge.0,
                    d.edge.1,
                    d.similarity,
                    d.verdict.as_str()
                )?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn parse_aux(spec: &str) -> Result<AuxLayerSpec> {
    let bad = || Error::Config(format!("--aux expects EDGES:RELEVANCE, got {spec:?}"));
    let (e, r) = spec.split_once(':').ok_or_else(bad)?;
    Ok(AuxLayerSpec {
        edges: e.trim().parse().map_err(|_| bad())?,
        relevance: r.trim().parse().map_err(|_| bad())?,
    })
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        num_nodes: a.nodes,
        num_communities: a.communities,
        target_edges: a.target_edges,
        aux_layers: a.aux.iter().map(|s| parse_aux(s)).collect::<Result<_>>()?,
        p_in: a.p_in,
        p_out: a.p_out,
        seed: a.seed,
    };
    let net = synth::generate(&cfg)?;
    graph::save_edges(&net, &a.out)?;
    if let (Some(path), Some(labels)) = (&a.labels_out, net.labels()) {
        graph::save_labels(labels, path)?;
    }
    let stats = net.compute_stats(0)?;
    print!("{}", stats_text(&stats, 0, net.num_nodes()));
    Ok(())
}

/// Training graph and excluded pairs for a config: the split's training
/// part when a split seed applies, else the whole network.
fn prepare(
    net: &MultiplexNetwork,
    cfg: &RunConfig,
    split: bool,
) -> Result<(MultiplexNetwork, Option<SplitManifest>, HashSet<Edge>)> {
    if !split {
        return Ok((net.clone(), None, HashSet::new()));
    }
    let manifest = eval::split_edges(net, cfg.train.target_layer(), (8, 1, 1), cfg.split_seed)?;
    let train_net = manifest.training_network(net)?;
    let excluded = manifest.held_out_pairs();
    Ok((train_net, Some(manifest), excluded))
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let net = load_from(&cfg)?;
    let (train_net, manifest, excluded) = prepare(&net, &cfg, !a.no_split)?;
    let outcome = trainer::train_excluding(&train_net, &cfg.model, &cfg.train, &excluded)?;
    if let Some(path) = &a.log {
        write_file(path, |w| outcome.log.write_csv(w))?;
    }
    if let Some(path) = &a.out_checkpoint {
        Checkpoint {
            params: outcome.params.clone(),
            graph: Some(
                outcome
                    .active_network
                    .layers()
                    .iter()
                    .map(|l| l.edges().to_vec())
                    .collect(),
            ),
        }
        .save(path)?;
    }
    for r in &outcome.log.epochs {
        println!(
            "epoch {}: l_pos {:.4} l_neg {:.4} l_total {:.4} kept {:?}",
            r.epoch, r.l_pos, r.l_neg, r.l_total, r.kept_per_layer
        );
    }
    if let Some(m) = &manifest {
        let report = eval::predict_links(&outcome.params, &outcome.active_network, m)?;
        println!(
            "valid AUC {:.4}, test AUC {:.4}",
            report.valid_auc.unwrap_or(f64::NAN),
            report.auc.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

/// Checkpoint parameters plus the graph they aggregate over.
fn restore(path: &Path, net: &MultiplexNetwork) -> Result<(ModelParams, MultiplexNetwork)> {
    let ck = Checkpoint::load(path)?;
    ck.params.check_network(net)?;
    let agg = match ck.graph {
        Some(layers) => net.with_layers(layers)?,
        None => net.clone(),
    };
    Ok((ck.params, agg))
}

fn cmd_eval_lp(a: &EvalArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    if a.repeats == 0 {
        return Err(Error::Config("--repeats must be ≥ 1".into()));
    }
    let net = load_from(&cfg)?;
    let mut rows = Vec::new();
    match &a.checkpoint {
        Some(path) => {
            if a.repeats != 1 {
                return Err(Error::Config(
                    "--repeats needs retraining; drop --checkpoint to average runs".into(),
                ));
            }
            let (params, agg) = restore(path, &net)?;
            let manifest =
                eval::split_edges(&net, cfg.train.target_layer(), (8, 1, 1), cfg.split_seed)?;
            let report = eval::predict_links(&params, &agg, &manifest)?;
            rows.push((
                cfg.split_seed,
                report.auc.unwrap(),
                report.valid_auc.unwrap(),
            ));
        }
        None => {
            for r in 0..a.repeats as u64 {
                let mut train = cfg.train.clone();
                train.seed = cfg.train.seed.wrapping_add(r);
                train.sampler.seed = train.seed;
                let split_seed = cfg.split_seed.wrapping_add(r);
                let run = experiment::link_prediction(&net, &cfg.model, &train, split_seed)?;
                rows.push((
                    split_seed,
                    run.report.auc.unwrap(),
                    run.report.valid_auc.unwrap(),
                ));
            }
        }
    }
    let mut text = String::new();
    let mut csv = String::from("run,split_seed,auc,valid_auc\n");
    for (k, (seed, auc, valid)) in rows.iter().enumerate() {
        text.push_str(&format!(
            "run {k} (split seed {seed}): test AUC {auc}, valid AUC {valid}\n"
        ));
        csv.push_str(&format!("{k},{seed},{auc},{valid}\n"));
    }
    let aucs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (mean, std) = eval::mean_std(&aucs);
    text.push_str(&format!(
        "test AUC {mean:.4} ± {std:.4} over {} run(s)\n",
        aucs.len()
    ));
    csv.push_str(&format!("mean,,{mean},\nstd,,{std},\n"));
    print!("{text}");
    if let Some(path) = &a.csv {
        write_file(path, |w| w.write_all(csv.as_bytes()))?;
    }
    Ok(())
}

fn cmd_eval_nc(a: &EvalArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    if a.repeats == 0 {
        return Err(Error::Config("--repeats must be ≥ 1".into()));
    }
    let net = load_from(&cfg)?;
    let labels = net
        .labels()
        .cloned()
        .ok_or_else(|| Error::Config("node classification needs --labels".into()))?;
    let mut rows = Vec::new();
    for r in 0..a.repeats as u64 {
        let split_seed = cfg.split_seed.wrapping_add(r);
        let (params, agg) = match &a.checkpoint {
            Some(path) => restore(path, &net)?,
            None => {
                let mut train = cfg.train.clone();
                train.seed = cfg.train.seed.wrapping_add(r);
                train.sampler.seed = train.seed;
                let out = trainer::train(&net, &cfg.model, &train)?;
                (out.params, out.active_network)
            }
        };
        let report = eval::classify_nodes(&params, &agg, &labels, split_seed)?;
        rows.push((
            split_seed,
            report.macro_f1.unwrap(),
            report.micro_f1.unwrap(),
        ));
    }
    let mut text = String::new();
    let mut csv = String::from("run,split_seed,macro_f1,micro_f1\n");
    for (k, (seed, ma, mi)) in rows.iter().enumerate() {
        text.push_str(&format!(
            "run {k} (split seed {seed}): Macro-F1 {ma}, Micro-F1 {mi}\n"
        ));
        csv.push_str(&format!("{k},{seed},{ma},{mi}\n"));
    }
    let macros: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let micros: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (ma_mean, ma_std) = eval::mean_std(&macros);
    let (mi_mean, mi_std) = eval::mean_std(&micros);
    text.push_str(&format!(
        "Macro-F1 {ma_mean:.4} ± {ma_std:.4}, Micro-F1 {mi_mean:.4} ± {mi_std:.4} over {} run(s)\n",
        rows.len()
    ));
    csv.push_str(&format!(
        "mean,,{ma_mean},{mi_mean}\nstd,,{ma_std},{mi_std}\n"
    ));
    print!("{text}");
    if let Some(path) = &a.csv {
        write_file(path, |w| w.write_all(csv.as_bytes()))?;
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let axis: SweepAxis = a.axis.parse()?;
    if a.repeats == 0 {
        return Err(Error::Config("--repeats must be ≥ 1".into()));
    }
    let net = load_from(&cfg)?;
    let rows = experiment::sweep(
        &net,
        &cfg.model,
        &cfg.train,
        cfg.split_seed,
        axis,
        &a.values,
        a.repeats,
    );
    match &a.out {
        Some(path) => write_file(path, |w| experiment::write_sweep_csv(&rows, w))?,
        None => {
            let mut out = std::io::stdout().lock();
            experiment::write_sweep_csv(&rows, &mut out).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Stats(a) => cmd_stats(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::EvalLp(a) => cmd_eval_lp(a),
        Command::EvalNc(a) => cmd_eval_nc(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
