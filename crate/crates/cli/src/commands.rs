use std::fs;
use std::path::{Path, PathBuf};

use fnn_core::dataset::{make_split, Dataset, DatasetKind, Split};
use fnn_core::engine::{
    load_checkpoint, optimal_points_csv, pretrain, run_baseline, run_experiment, BaselineConfig,
    MetricsLog, OptimalCriterion, RunOptions, RunOutput,
};
use fnn_core::mia::{losses_csv, mia_score, per_sample_losses};
use fnn_core::theory::{run_suite, Activation};
use fnn_core::{Architecture, Network, Rng};

use crate::config::{ExperimentConfig, Model};
use crate::error::CliError;
use crate::svg;

pub const DATA_DIR_ENV: &str = "FNN_DATA_DIR";
pub const METRICS_FILE: &str = "metrics.csv";
pub const OPTIMAL_FILE: &str = "optimal_points.csv";
pub const CURVE_FILE: &str = "curve.svg";
pub const CONFIG_FILE: &str = "config.txt";
pub const CHECKPOINT_DIR: &str = "checkpoints";

const STREAM_INIT: u64 = 0x494e;

/// Options shared by the commands that load a config and a dataset.
#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub subset: Option<usize>,
    pub quiet: bool,
}

/// A validated config with its data loaded and split.
pub struct Prepared {
    pub cfg: ExperimentConfig,
    pub data: Dataset,
    pub split: Split,
    pub out_dir: PathBuf,
}

pub fn architecture(model: Model) -> Architecture {
    match model {
        Model::Cnn => Architecture::default_cnn(),
        Model::Mlp => Architecture::mlp(&[1, 28, 28], &[32, 16], 10)
            .expect("fixed architecture is valid"),
    }
}

/// Directory holding the four IDX files of `kind` under the data root.
///
/// `root/<dataset>/` is preferred; a root that holds the files directly also works.
pub fn dataset_dir(root: &Path, kind: DatasetKind) -> PathBuf {
    let nested = root.join(kind.as_str());
    if nested.is_dir() {
        nested
    } else {
        root.to_path_buf()
    }
}

fn data_root(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    if let Some(dir) = &cfg.data_dir {
        return Ok(dir.clone());
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir)),
        _ => Err(CliError::Validation(format!(
            "no data directory: set data_dir in the config or {DATA_DIR_ENV}"
        ))),
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let dir = dataset_dir(&data_root(cfg)?, cfg.dataset);
    for file in Dataset::files(&dir) {
        if !file.is_file() {
            return Err(CliError::Validation(format!(
                "missing data file: {}",
                file.display()
            )));
        }
    }
    Dataset::load(cfg.dataset, &dir).map_err(|e| CliError::Validation(e.to_string()))
}

/// Loads the config, applies overrides and loads and splits the data.
pub fn prepare(settings: &RunSettings) -> Result<Prepared, CliError> {
    let mut cfg = ExperimentConfig::load(&settings.config)?;
    if let Some(seed) = settings.seed {
        cfg.override_seed(seed);
    }
    cfg.validate()?;
    let mut data = load_data(&cfg)?;
    let full = data.train.len();
    let mut per_class = cfg.forget_per_class;
    if let Some(n) = settings.subset {
        if n == 0 {
            return Err(CliError::Validation("--subset must be at least 1".into()));
        }
        if n < full {
            data.train = data.train.truncated(n);
            per_class = (cfg.forget_per_class * n / full).max(1);
        }
    }
    let split = make_split(&data.train.labels, per_class, cfg.split_seed)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let out_dir = settings.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok(Prepared {
        cfg,
        data,
        split,
        out_dir,
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))
}

fn run_options(p: &Prepared, quiet: bool) -> RunOptions {
    RunOptions {
        mia: p.cfg.mia.clone(),
        criterion: p.cfg.criterion,
        forget_layers: p.cfg.layers,
        checkpoint_dir: Some(p.out_dir.join(CHECKPOINT_DIR)),
        stop_at_first_optimal: p.cfg.stop_at_first_optimal,
        verbose: !quiet,
    }
}

fn initial_network(cfg: &ExperimentConfig) -> Network {
    Network::new(
        architecture(cfg.model),
        &mut Rng::derive(cfg.schedule.seed, &[STREAM_INIT]),
    )
}

fn write_artifacts(p: &Prepared, out: &RunOutput, title: &str) -> Result<(), CliError> {
    write(&p.out_dir.join(METRICS_FILE), out.log.to_csv())?;
    write(&p.out_dir.join(OPTIMAL_FILE), optimal_points_csv(&out.optimal_points))?;
    write(&p.out_dir.join(CONFIG_FILE), p.cfg.to_canonical())?;
    write(
        &p.out_dir.join(CURVE_FILE),
        svg::render(&out.log, &p.cfg.criterion, title),
    )?;
    let best = out
        .log
        .records
        .iter()
        .map(|r| r.test_accuracy)
        .fold(0.0, f64::max);
    println!(
        "{} epochs logged, {} optimal points, best test accuracy {best:.4}",
        out.log.len(),
        out.optimal_points.len()
    );
    println!("artifacts written to {}", p.out_dir.display());
    Ok(())
}

pub fn cmd_train(settings: &RunSettings) -> Result<(), CliError> {
    let p = prepare(settings)?;
    create_dir(&p.out_dir)?;
    let out = run_experiment(
        initial_network(&p.cfg),
        &p.data,
        &p.split,
        &p.cfg.policy,
        &p.cfg.schedule,
        &run_options(&p, settings.quiet),
    )?;
    let title = format!(
        "{} / {} policy / {} forget layer(s)",
        p.cfg.dataset, p.cfg.policy.kind, p.cfg.layers
    );
    write_artifacts(&p, &out, &title)
}

pub fn cmd_baseline(settings: &RunSettings) -> Result<(), CliError> {
    let p = prepare(settings)?;
    create_dir(&p.out_dir)?;
    let s = &p.cfg.schedule;
    let mut net = initial_network(&p.cfg);
    pretrain(&mut net, &p.data.train, p.cfg.pretrain_epochs, s.lr, s.batch_size, s.seed)?;
    let baseline = BaselineConfig {
        epochs: p.cfg.baseline_epochs(),
        lr: s.lr,
        batch_size: s.batch_size,
        finetune_on: p.cfg.finetune_on,
        seed: s.seed,
    };
    let out = run_baseline(net, &p.data, &p.split, &baseline, &run_options(&p, settings.quiet))?;
    let title = format!(
        "{} / fine-tune baseline on the {} set",
        p.cfg.dataset, p.cfg.finetune_on
    );
    write_artifacts(&p, &out, &title)
}

pub fn cmd_verify_theory(trials: usize, seed: u64, activation: Activation) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Validation("--trials must be at least 1".into()));
    }
    let report = run_suite(trials, seed, activation)?;
    for c in &report.checks {
        println!(
            "{} {:<34} trials {:>4}  value {:.3e}  threshold {:.0e}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.trials,
            c.max_deviation,
            c.threshold
        );
    }
    println!("{} random networks checked", report.networks_checked());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Check("theory checks failed".into()))
    }
}

pub fn cmd_mia(checkpoint: &Path, settings: &RunSettings) -> Result<f64, CliError> {
    let ckpt = load_checkpoint(checkpoint).map_err(|e| {
        CliError::Validation(format!("{}: {e}", checkpoint.display()))
    })?;
    let p = prepare(settings)?;
    let forget = p.data.train.subset(&p.split.forget, "forget");
    let clock = &ckpt.meta.clock;
    let forget_losses = per_sample_losses(&ckpt.network, &forget, clock)?;
    let test_losses = per_sample_losses(&ckpt.network, &p.data.test, clock)?;
    let score = mia_score(&forget_losses, &test_losses, &p.cfg.mia)?;
    println!("mia_score {:.6}", score.score);
    println!(
        "per_split {}",
        score
            .per_split
            .iter()
            .map(|s| format!("{s:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!("samples_per_side {}", score.samples_per_side);
    if let Some(out) = &settings.out {
        create_dir(out)?;
        write(&out.join("mia_losses.csv"), losses_csv(&forget_losses, &test_losses))?;
    }
    Ok(score.score)
}

pub fn cmd_plot(
    metrics: &Path,
    output: &Path,
    criterion: &OptimalCriterion,
    title: &str,
) -> Result<(), CliError> {
    let text = fs::read_to_string(metrics)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", metrics.display())))?;
    let log = MetricsLog::from_csv(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", metrics.display())))?;
    if log.is_empty() {
        return Err(CliError::Validation(format!(
            "{} has no metric rows",
            metrics.display()
        )));
    }
    write(output, svg::render(&log, criterion, title))
}
