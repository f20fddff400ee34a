use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use slavgae::data::{generate_sbm, load_dataset, make_splits, read_splits, save_dataset, write_splits, SbmConfig, SplitFractions};
use slavgae::model::{Checkpoint, InstanceLimits, ObjectiveInstance};
use slavgae::train::{evaluate, train as run_training, Inference, TrainConfig};
use slavgae::{Data, MetricsReport, NodeRole, SplitAssignment};

use crate::config::{resolve, usage};
use crate::{ConfigArgs, SplitArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved-config.json";

pub const PREDICTIONS_HEADER: [&str; 3] = ["node_id", "predicted_class", "max_probability"];
pub const SWEEP_HEADER: [&str; 7] = [
    "param",
    "value",
    "seeds",
    "test_accuracy_mean",
    "test_accuracy_std",
    "test_mcc_mean",
    "test_mcc_std",
];

const GRADCHECK_EPS: f64 = 1e-5;
const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Serialize)]
struct RunMetrics {
    epochs_run: usize,
    best_epoch: Option<usize>,
    val: Option<MetricsReport>,
    test: Option<MetricsReport>,
}

fn load(data: &Path) -> anyhow::Result<Data> {
    load_dataset(data).with_context(|| format!("loading dataset {}", data.display()))
}

fn load_splits(path: &Path, ds: &Data) -> anyhow::Result<SplitAssignment> {
    read_splits(path, ds.node_count()).with_context(|| format!("loading splits {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn metrics_for(ckpt: &Checkpoint<f64>, ds: &Data, splits: &SplitAssignment, role: NodeRole) -> anyhow::Result<Option<MetricsReport>> {
    if splits.nodes_with(role).iter().all(|&i| ds.labels[i] < 0) {
        return Ok(None);
    }
    Ok(Some(evaluate(&ckpt.params, ds, splits, role)?))
}

pub fn train(data: &Path, splits_path: &Path, out: &Path, args: &ConfigArgs) -> anyhow::Result<()> {
    let cfg: TrainConfig = resolve(args.config.as_deref(), &args.sets, args.seed)?;
    cfg.validate()?;
    let ds = load(data)?;
    let splits = load_splits(splits_path, &ds)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_file(&out.join(RESOLVED_CONFIG_FILE), &(serde_json::to_string_pretty(&cfg)? + "\n"))?;

    let trained = run_training(&ds, &splits, &cfg)?;
    let ckpt = Checkpoint {
        params: trained.params,
        seed: cfg.seed,
    };
    ckpt.save(&out.join(CHECKPOINT_FILE))?;
    trained.history.write_csv(&out.join(HISTORY_FILE))?;
    let metrics = RunMetrics {
        epochs_run: trained.history.len(),
        best_epoch: trained.history.best_epoch,
        val: metrics_for(&ckpt, &ds, &splits, NodeRole::Validation)?,
        test: metrics_for(&ckpt, &ds, &splits, NodeRole::Test)?,
    };
    write_file(&out.join(METRICS_FILE), &(serde_json::to_string_pretty(&metrics)? + "\n"))?;
    eprintln!(
        "trained {} epochs (best {:?}); artifacts in {}",
        metrics.epochs_run,
        metrics.best_epoch,
        out.display()
    );
    Ok(())
}

pub fn eval(checkpoint: &Path, data: &Path, splits_path: &Path, role: &str) -> anyhow::Result<()> {
    let role: NodeRole = role.parse()?;
    let ckpt = Checkpoint::<f64>::load(checkpoint)?;
    let ds = load(data)?;
    let splits = load_splits(splits_path, &ds)?;
    let m = evaluate(&ckpt.params, &ds, &splits, role)?;
    println!("role={role} accuracy={} mcc={} count={}", m.accuracy, m.mcc, m.count);
    Ok(())
}

pub fn predict(checkpoint: &Path, data: &Path, splits_path: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let ckpt = Checkpoint::<f64>::load(checkpoint)?;
    let ds = load(data)?;
    let inference = match splits_path {
        Some(p) => Inference::for_dataset(&ds, &load_splits(p, &ds)?)?,
        None => Inference::new(&ds.graph, ds.features.clone(), ds.label_matrix_where(|_| false))?,
    };
    let pred = inference.predict(&ckpt.params)?;
    let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(PREDICTIONS_HEADER)?;
    for (i, &c) in pred.classes.iter().enumerate() {
        w.write_record([i.to_string(), c.to_string(), pred.max_probability(i).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn synth(file: Option<&Path>, sets: &[String], seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let cfg: SbmConfig = resolve(file, sets, seed)?;
    let ds = generate_sbm::<f64>(&cfg)?;
    save_dataset(&ds, out)?;
    eprintln!("wrote {} nodes, {} edges to {}", ds.node_count(), ds.graph.edge_count(), out.display());
    Ok(())
}

fn fractions(args: SplitArgs) -> SplitFractions {
    SplitFractions {
        validation: args.val_fraction,
        test: args.test_fraction,
    }
}

pub fn split(data: &Path, out: &Path, args: SplitArgs, seed: u64) -> anyhow::Result<()> {
    let ds = load(data)?;
    let splits = make_splits(&ds, fractions(args), args.labeling_rate, seed)?;
    write_splits(&splits, out)?;
    Ok(())
}

pub fn gradcheck(args: &ConfigArgs, instances: usize) -> anyhow::Result<()> {
    if instances == 0 {
        return Err(usage("--instances must be at least 1"));
    }
    let cfg: TrainConfig = resolve(args.config.as_deref(), &args.sets, args.seed)?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for k in 0..instances {
        let inst = ObjectiveInstance::<f64>::random(InstanceLimits::default(), !cfg.ablation.no_label, &mut rng)?;
        let report = inst.grad_check(GRADCHECK_EPS, GRADCHECK_TOL)?;
        println!(
            "instance={k} nodes={} coordinates={} max_relative_error={:e}",
            inst.graph.node_count(),
            report.coordinates,
            report.max_relative_error
        );
        worst = worst.max(report.max_relative_error);
    }
    if !(worst < GRADCHECK_TOL) {
        bail!("gradient check failed: max relative error {worst:e} >= {GRADCHECK_TOL:e}");
    }
    println!("ok max_relative_error={worst:e}");
    Ok(())
}

/// Which knob a sweep turns.
#[derive(Clone, Copy)]
enum SweepParam {
    Rounds,
    UnmaskProb,
    Threshold,
    LabelingRate,
}

impl SweepParam {
    fn parse(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "K" | "k" => Self::Rounds,
            "p" => Self::UnmaskProb,
            "theta" => Self::Threshold,
            "labeling_rate" => Self::LabelingRate,
            other => return Err(usage(format!("unknown sweep parameter `{other}` (K, p, theta, labeling_rate)"))),
        })
    }

    /// Config and labeling rate for one grid value.
    fn apply(self, base: &TrainConfig, rate: f64, value: f64) -> anyhow::Result<(TrainConfig, f64)> {
        let mut cfg = base.clone();
        let mut rate = rate;
        match self {
            Self::Rounds => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(usage(format!("K must be a positive integer, got {value}")));
                }
                cfg.k = value as usize;
            }
            Self::UnmaskProb => cfg.p = value,
            Self::Threshold => cfg.theta = value,
            Self::LabelingRate => rate = value,
        }
        cfg.validate()?;
        Ok((cfg, rate))
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    data: &Path,
    param: &str,
    values: &[f64],
    seeds: usize,
    split_args: SplitArgs,
    args: &ConfigArgs,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let which = SweepParam::parse(param)?;
    if seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let base: TrainConfig = resolve(args.config.as_deref(), &args.sets, args.seed)?;
    let ds = load(data)?;
    let grid = values
        .iter()
        .map(|&v| which.apply(&base, split_args.labeling_rate, v))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|g| (0..seeds as u64).map(move |j| (g, j)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(g, j)| {
            let (cfg, rate) = &grid[g];
            let seed = base.seed.wrapping_add(j);
            let cfg = TrainConfig { seed, ..cfg.clone() };
            let splits = make_splits(&ds, fractions(split_args), *rate, seed)?;
            let trained = run_training(&ds, &splits, &cfg)?;
            Ok(evaluate(&trained.params, &ds, &splits, NodeRole::Test)?)
        })
        .collect::<anyhow::Result<Vec<MetricsReport>>>()?;

    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("writing {}", p.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SWEEP_HEADER)?;
    for (g, &value) in values.iter().enumerate() {
        let chunk = &results[g * seeds..(g + 1) * seeds];
        let acc: Vec<f64> = chunk.iter().map(|m| m.accuracy).collect();
        let mcc: Vec<f64> = chunk.iter().map(|m| m.mcc).collect();
        let (am, asd) = mean_std(&acc);
        let (mm, msd) = mean_std(&mcc);
        w.write_record([
            param.to_string(),
            value.to_string(),
            seeds.to_string(),
            am.to_string(),
            asd.to_string(),
            mm.to_string(),
            msd.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn sweep_values_land_in_the_right_place() {
        let base = TrainConfig::default();
        let (c, r) = SweepParam::Rounds.apply(&base, 0.1, 4.0).unwrap();
        assert_eq!((c.k, r), (4, 0.1));
        let (c, _) = SweepParam::Threshold.apply(&base, 0.1, 0.5).unwrap();
        assert_eq!(c.theta, 0.5);
        let (c, r) = SweepParam::LabelingRate.apply(&base, 0.1, 0.3).unwrap();
        assert_eq!((c, r), (base.clone(), 0.3));
        assert!(SweepParam::Rounds.apply(&base, 0.1, 1.5).is_err());
        assert!(SweepParam::UnmaskProb.apply(&base, 0.1, 1.5).is_err());
        assert!(SweepParam::parse("lr").is_err());
    }
}
