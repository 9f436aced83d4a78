//! End-to-end runs: split, train on the training graph, evaluate.

use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, SplitManifest};
use crate::graph::MultiplexNetwork;
use crate::model::ModelConfig;
use crate::synth;
use crate::trainer::{self, TrainConfig, TrainOutcome};

/// Everything produced by one link-prediction run.
#[derive(Debug, Clone)]
pub struct LinkPredictionRun {
    pub manifest: SplitManifest,
    pub outcome: TrainOutcome,
    pub report: EvalReport,
}

/// Split the target layer with `split_seed`, train on the remaining graph
/// and report held-out AUC.
pub fn link_prediction(
    net: &MultiplexNetwork,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    split_seed: u64,
) -> Result<LinkPredictionRun> {
    let manifest = eval::split_edges(net, train_cfg.target_layer(), (8, 1, 1), split_seed)?;
    let train_net = manifest.training_network(net)?;
    let outcome =
        trainer::train_excluding(&train_net, model_cfg, train_cfg, &manifest.held_out_pairs())?;
    let report = eval::predict_links(&outcome.params, &outcome.active_network, &manifest)?;
    Ok(LinkPredictionRun {
        manifest,
        outcome,
        report,
    })
}

/// Run `repeats` independent link-prediction runs. Run `r` offsets both
/// the training seed and the split seed by `r`.
pub fn repeated_link_prediction(
    net: &MultiplexNetwork,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    split_seed: u64,
    repeats: usize,
) -> Result<Vec<f64>> {
    (0..repeats as u64)
        .map(|r| {
            let mut cfg = train_cfg.clone();
            cfg.seed = train_cfg.seed.wrapping_add(r);
            cfg.sampler.seed = cfg.seed;
            let run = link_prediction(net, model_cfg, &cfg, split_seed.wrapping_add(r))?;
            Ok(run.report.auc.expect("link prediction reports test AUC"))
        })
        .collect()
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Fraction of target-layer edges kept before splitting.
    KeepFraction,
    Alpha,
    Beta,
    /// Embedding and attention dimension together.
    Dimension,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep_fraction" => Ok(SweepAxis::KeepFraction),
            "alpha" => Ok(SweepAxis::Alpha),
            "beta" => Ok(SweepAxis::Beta),
            "dimension" => Ok(SweepAxis::Dimension),
            _ => Err(Error::Config(format!(
                "unknown sweep axis {s:?} (expected keep_fraction, alpha, beta or dimension)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::KeepFraction => "keep_fraction",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
            SweepAxis::Dimension => "dimension",
        })
    }
}

/// One sweep point. `error` is set when the point could not be run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub imbalance_ratio: Option<f64>,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
    pub error: Option<String>,
}

/// Header of the CSV written by [`write_sweep_csv`].
pub const SWEEP_HEADER: &str = "value,mu,auc_mean,auc_std,error";

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], w: &mut W) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        // commas and quotes would break the single-column error field
        let err = r
            .error
            .as_deref()
            .unwrap_or("")
            .replace([',', '"', '\n'], " ");
        writeln!(
            w,
            "{},{},{},{},{}",
            r.value,
            opt(r.imbalance_ratio),
            opt(r.auc_mean),
            opt(r.auc_std),
            err
        )?;
    }
    Ok(())
}

fn sweep_point(
    net: &MultiplexNetwork,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    split_seed: u64,
    axis: SweepAxis,
    value: f64,
    repeats: usize,
) -> Result<(f64, f64, f64)> {
    let mut model_cfg = *model_cfg;
    let mut train_cfg = train_cfg.clone();
    let target = train_cfg.target_layer();
    let net = match axis {
        SweepAxis::KeepFraction => synth::sparsify_target(net, target, value, train_cfg.seed)?,
        SweepAxis::Alpha => {
            train_cfg.sampler.alpha = value;
            net.clone()
        }
        SweepAxis::Beta => {
            train_cfg.sampler.beta = value;
            net.clone()
        }
        SweepAxis::Dimension => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "dimension must be a positive integer, got {value}"
                )));
            }
            model_cfg.dim = value as usize;
            model_cfg.attn_dim = value as usize;
            net.clone()
        }
    };
    model_cfg.validate()?;
    train_cfg.validate()?;
    let mu = net.compute_stats(target)?.imbalance_ratio;
    let aucs = repeated_link_prediction(&net, &model_cfg, &train_cfg, split_seed, repeats)?;
    let (mean, std) = eval::mean_std(&aucs);
    Ok((mu, mean, std))
}

/// Train and evaluate once per value. A failing point yields a row with
/// its error and the sweep moves on.
pub fn sweep(
    net: &MultiplexNetwork,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    split_seed: u64,
    axis: SweepAxis,
    values: &[f64],
    repeats: usize,
) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            match sweep_point(net, model_cfg, train_cfg, split_seed, axis, value, repeats) {
                Ok((mu, mean, std)) => SweepRow {
                    value,
                    imbalance_ratio: Some(mu),
                    auc_mean: Some(mean),
                    auc_std: Some(std),
                    error: None,
                },
                Err(e) => {
                    log::warn!("{axis} = {value}: {e}");
                    SweepRow {
                        value,
                        imbalance_ratio: None,
                        auc_mean: None,
                        auc_std: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}
