use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::dataset::{Dataset, ImageSet, Split};
use crate::engine::checkpoint::{save_checkpoint, CheckpointMeta, SchedulePosition};
use crate::engine::metrics::{MetricsLog, MetricsRecord, Phase};
use crate::engine::objective::{objective, OptimalCriterion, OptimalPoint};
use crate::engine::schedule::{Schedule, UnlearnData};
use crate::error::{Error, Result};
use crate::forgetting::{
    assign_taus, calibrate, ForgetClock, ForgettingPolicy, TauAssignment, CALIBRATION_SIZE,
};
use crate::mia::{mia_score, MiaConfig};
use crate::nn::{evaluate, Network, EVAL_BATCH};
use crate::rng::Rng;
use crate::tensor::Tensor;

const STREAM_SHUFFLE: u64 = 0x5348;
const STREAM_CALIBRATION: u64 = 0x4341;
const STREAM_BASELINE: u64 = 0x4246;

/// Which forget layers decay during unlearning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgetLayers {
    /// Only the last forget layer; earlier ones never forget.
    One,
    /// Every forget layer.
    Two,
}

impl ForgetLayers {
    pub fn as_str(self) -> &'static str {
        match self {
            ForgetLayers::One => "one",
            ForgetLayers::Two => "two",
        }
    }
}

impl fmt::Display for ForgetLayers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ForgetLayers {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(ForgetLayers::One),
            "two" => Ok(ForgetLayers::Two),
            _ => Err(Error::Argument(format!(
                "unknown forget layer mode {s:?} (expected one or two)"
            ))),
        }
    }
}

/// Evaluation and bookkeeping settings shared by experiments and baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub mia: MiaConfig,
    pub criterion: OptimalCriterion,
    pub forget_layers: ForgetLayers,
    /// Where optimal-point and last-good checkpoints go; `None` keeps nothing.
    pub checkpoint_dir: Option<PathBuf>,
    pub stop_at_first_optimal: bool,
    /// Print one line per evaluated epoch to stderr.
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mia: MiaConfig::default(),
            criterion: OptimalCriterion::default(),
            forget_layers: ForgetLayers::Two,
            checkpoint_dir: None,
            stop_at_first_optimal: false,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: MetricsLog,
    pub optimal_points: Vec<OptimalPoint>,
    pub network: Network,
}

pub const LAST_GOOD_CHECKPOINT: &str = "last_good.ckpt";

pub fn optimal_checkpoint_name(global_epoch: usize) -> String {
    format!("optimal_epoch_{global_epoch:03}.ckpt")
}

/// One pass of minibatch SGD over `order`; returns the sample-weighted mean loss.
///
/// Stops early and returns the non-finite loss if a batch diverges.
pub fn train_epoch(
    net: &mut Network,
    images: &Tensor,
    labels: &[u8],
    order: &[usize],
    batch_size: usize,
    lr: f64,
    clock: &ForgetClock,
) -> Result<f64> {
    if order.is_empty() {
        return Err(Error::Argument("cannot train on an empty set".into()));
    }
    let mut total = 0.0;
    let mut ys = Vec::with_capacity(batch_size);
    for chunk in order.chunks(batch_size.max(1)) {
        let batch = images.select_rows(chunk);
        ys.clear();
        ys.extend(chunk.iter().map(|&i| labels[i]));
        let loss = net.loss_and_grad(&batch, &ys, clock)?;
        if !loss.is_finite() {
            return Ok(loss);
        }
        net.params_mut().sgd_step(lr);
        total += loss * chunk.len() as f64;
    }
    Ok(total / order.len() as f64)
}

/// Per-epoch evaluation, logging and checkpointing.
struct Tracker<'a> {
    opts: &'a RunOptions,
    test: &'a ImageSet,
    forget: &'a ImageSet,
    started: Instant,
    log: MetricsLog,
    optimal: Vec<OptimalPoint>,
    last_good: Option<PathBuf>,
}

impl<'a> Tracker<'a> {
    fn new(opts: &'a RunOptions, test: &'a ImageSet, forget: &'a ImageSet) -> Result<Self> {
        opts.mia.validate()?;
        if let Some(dir) = &opts.checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|source| Error::IoAt {
                path: dir.clone(),
                offset: 0,
                source,
            })?;
        }
        Ok(Self {
            opts,
            test,
            forget,
            started: Instant::now(),
            log: MetricsLog::default(),
            optimal: Vec::new(),
            last_good: None,
        })
    }

    fn checkpoint(&self, name: &str) -> Option<PathBuf> {
        self.opts.checkpoint_dir.as_deref().map(|d: &Path| d.join(name))
    }

    /// Evaluates and logs `net`; returns true when the run should stop.
    fn record(
        &mut self,
        net: &Network,
        position: SchedulePosition,
        train_loss: f64,
        clock: &ForgetClock,
        shuffler: &Rng,
        detect_optimal: bool,
    ) -> Result<bool> {
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                global_epoch: position.global_epoch,
                last_good: self.last_good.clone(),
            });
        }
        let test = evaluate(net, &self.test.images, &self.test.labels, clock, EVAL_BATCH)?;
        let forget = evaluate(net, &self.forget.images, &self.forget.labels, clock, EVAL_BATCH)?;
        if !test.mean_loss.is_finite() || !forget.mean_loss.is_finite() {
            return Err(Error::Divergence {
                global_epoch: position.global_epoch,
                last_good: self.last_good.clone(),
            });
        }
        let mia = mia_score(&forget.losses, &test.losses, &self.opts.mia)?.score;
        let record = MetricsRecord {
            turn: position.turn,
            phase: position.phase,
            epoch_in_phase: position.epoch_in_phase,
            global_epoch: position.global_epoch,
            train_loss,
            test_accuracy: test.accuracy,
            test_loss: test.mean_loss,
            mia_score: mia,
            forget_accuracy: forget.accuracy,
            wall_time: self.started.elapsed().as_secs_f64(),
        };
        let meta = CheckpointMeta {
            position: Some(position),
            rng: vec![("shuffle".into(), shuffler.state())],
            clock: clock.clone(),
        };
        if let Some(path) = self.checkpoint(LAST_GOOD_CHECKPOINT) {
            save_checkpoint(net, &meta, &path)?;
            self.last_good = Some(path);
        }
        let optimal =
            detect_optimal && self.opts.criterion.accepts(record.test_accuracy, record.mia_score);
        let mut stop = false;
        if optimal {
            let path = self.checkpoint(&optimal_checkpoint_name(position.global_epoch));
            if let Some(path) = &path {
                save_checkpoint(net, &meta, path)?;
            }
            self.optimal.push(OptimalPoint {
                turn: position.turn,
                phase: position.phase,
                global_epoch: position.global_epoch,
                test_accuracy: record.test_accuracy,
                mia_score: record.mia_score,
                objective: objective(record.test_loss, record.mia_score),
                checkpoint: path,
            });
            stop = self.opts.stop_at_first_optimal;
        }
        if self.opts.verbose {
            eprintln!(
                "turn {} {:<10} epoch {:>2} (global {:>3}): loss {:.4} test acc {:.4} forget acc {:.4} mia {:.4}{}",
                record.turn,
                record.phase.as_str(),
                record.epoch_in_phase,
                record.global_epoch,
                record.train_loss,
                record.test_accuracy,
                record.forget_accuracy,
                record.mia_score,
                if optimal { "  optimal" } else { "" }
            );
        }
        self.log.push(record);
        Ok(stop)
    }

    fn finish(self, network: Network) -> RunOutput {
        RunOutput {
            log: self.log,
            optimal_points: self.optimal,
            network,
        }
    }
}

/// Taus for every forget slot at the start of an unlearning phase.
///
/// Activation profiles come from up to [`CALIBRATION_SIZE`] forget-set
/// samples drawn afresh each turn.
pub fn assign_for_turn(
    net: &Network,
    forget: &ImageSet,
    policy: &ForgettingPolicy,
    layers: ForgetLayers,
    turn: usize,
    seed: u64,
) -> Result<Vec<TauAssignment>> {
    let widths = net.arch().forget_widths();
    let slots = widths.len();
    let calib = if policy.kind.needs_profile() && slots > 0 {
        let pick: Vec<usize> = Rng::derive(seed, &[STREAM_CALIBRATION, turn as u64])
            .permutation(forget.len())
            .into_iter()
            .take(CALIBRATION_SIZE)
            .collect();
        Some(forget.images.select_rows(&pick))
    } else {
        None
    };
    let mut out = Vec::with_capacity(slots);
    for (slot, &width) in widths.iter().enumerate() {
        if layers == ForgetLayers::One && slot + 1 < slots {
            out.push(TauAssignment::never(slot, width));
            continue;
        }
        let profile = match &calib {
            Some(batch) => Some(calibrate(net, batch, slot)?),
            None => None,
        };
        let mut rng = Rng::derive(policy.seed, &[turn as u64, slot as u64]);
        out.push(assign_taus(policy, profile.as_ref(), width, slot, &mut rng)?);
    }
    Ok(out)
}

fn check_split(data: &Dataset, split: &Split) -> Result<()> {
    if !split.is_partition_of(data.train.len()) {
        return Err(Error::Argument(format!(
            "split does not partition the {} training samples",
            data.train.len()
        )));
    }
    if split.forget.is_empty() {
        return Err(Error::Argument("forget set is empty".into()));
    }
    Ok(())
}

/// Alternates learning phases (forgetting off, full training set) with
/// unlearning phases (forgetting on, clock `t = 1, 2, ...`), evaluating
/// accuracy and the membership-inference score after every epoch.
pub fn run_experiment(
    mut net: Network,
    data: &Dataset,
    split: &Split,
    policy: &ForgettingPolicy,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<RunOutput> {
    schedule.validate()?;
    policy.validate()?;
    check_split(data, split)?;
    let forget = data.train.subset(&split.forget, "forget");
    let all: Vec<usize> = (0..data.train.len()).collect();
    let unlearn_idx = match schedule.unlearn_data {
        UnlearnData::Retain => split.retain.clone(),
        UnlearnData::FullTrain => all.clone(),
    };
    if schedule.unlearn_epochs > 0 && unlearn_idx.is_empty() {
        return Err(Error::Argument("retain set is empty".into()));
    }
    let mut tracker = Tracker::new(opts, &data.test, &forget)?;
    let mut shuffler = Rng::derive(schedule.seed, &[STREAM_SHUFFLE]);
    let mut global = 0;
    let (images, labels) = (&data.train.images, &data.train.labels);

    for turn in 1..=schedule.turns {
        let learning = ForgetClock::disabled();
        for e in 1..=schedule.learn_epochs {
            let mut order = all.clone();
            shuffler.shuffle(&mut order);
            let loss = train_epoch(
                &mut net,
                images,
                labels,
                &order,
                schedule.batch_size,
                schedule.lr,
                &learning,
            )?;
            global += 1;
            let pos = SchedulePosition {
                turn,
                phase: Phase::Learning,
                epoch_in_phase: e,
                global_epoch: global,
            };
            if tracker.record(&net, pos, loss, &learning, &shuffler, true)? {
                return Ok(tracker.finish(net));
            }
        }
        if schedule.unlearn_epochs == 0 {
            continue;
        }
        let assignments =
            assign_for_turn(&net, &forget, policy, opts.forget_layers, turn, schedule.seed)?;
        for e in 1..=schedule.unlearn_epochs {
            let clock = ForgetClock::new(e as u32, assignments.clone());
            let mut order = unlearn_idx.clone();
            shuffler.shuffle(&mut order);
            let loss = train_epoch(
                &mut net,
                images,
                labels,
                &order,
                schedule.batch_size,
                schedule.lr,
                &clock,
            )?;
            global += 1;
            let pos = SchedulePosition {
                turn,
                phase: Phase::Unlearning,
                epoch_in_phase: e,
                global_epoch: global,
            };
            if tracker.record(&net, pos, loss, &clock, &shuffler, true)? {
                return Ok(tracker.finish(net));
            }
        }
    }
    Ok(tracker.finish(net))
}

/// Data a baseline fine-tunes on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinetuneOn {
    Forget,
    Retain,
}

impl FinetuneOn {
    pub fn as_str(self) -> &'static str {
        match self {
            FinetuneOn::Forget => "forget",
            FinetuneOn::Retain => "retain",
        }
    }
}

impl fmt::Display for FinetuneOn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FinetuneOn {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forget" => Ok(FinetuneOn::Forget),
            "retain" => Ok(FinetuneOn::Retain),
            _ => Err(Error::Argument(format!(
                "unknown fine-tune set {s:?} (expected forget or retain)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub finetune_on: FinetuneOn,
    pub seed: u64,
}

/// Plain SGD on the whole training set with forgetting disabled; returns the
/// mean loss of every epoch. Used to produce the baseline's starting model.
pub fn pretrain(
    net: &mut Network,
    train: &ImageSet,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut shuffler = Rng::derive(seed, &[STREAM_SHUFFLE]);
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let order = shuffler.permutation(train.len());
        let loss = train_epoch(
            net,
            &train.images,
            &train.labels,
            &order,
            batch_size,
            lr,
            &ForgetClock::disabled(),
        )?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                global_epoch: epoch,
                last_good: None,
            });
        }
        losses.push(loss);
    }
    Ok(losses)
}

/// Fine-tunes an already trained network on the forget (or retain) set with
/// forgetting disabled. The first record evaluates the starting model and is
/// never reported as an optimal point.
pub fn run_baseline(
    mut net: Network,
    data: &Dataset,
    split: &Split,
    cfg: &BaselineConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    check_split(data, split)?;
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) || cfg.batch_size == 0 {
        return Err(Error::Argument(
            "baseline needs a positive learning rate and batch size".into(),
        ));
    }
    let forget = data.train.subset(&split.forget, "forget");
    let tune_idx = match cfg.finetune_on {
        FinetuneOn::Forget => split.forget.clone(),
        FinetuneOn::Retain => split.retain.clone(),
    };
    if tune_idx.is_empty() {
        return Err(Error::Argument(format!("{} set is empty", cfg.finetune_on)));
    }
    let clock = ForgetClock::disabled();
    let mut tracker = Tracker::new(opts, &data.test, &forget)?;
    let mut shuffler = Rng::derive(cfg.seed, &[STREAM_BASELINE]);
    let (images, labels) = (&data.train.images, &data.train.labels);

    let tune_set = data.train.subset(&tune_idx, "finetune");
    let initial_loss =
        evaluate(&net, &tune_set.images, &tune_set.labels, &clock, EVAL_BATCH)?.mean_loss;
    let initial = SchedulePosition {
        turn: 0,
        phase: Phase::Initial,
        epoch_in_phase: 0,
        global_epoch: 0,
    };
    tracker.record(&net, initial, initial_loss, &clock, &shuffler, false)?;

    for e in 1..=cfg.epochs {
        let mut order = tune_idx.clone();
        shuffler.shuffle(&mut order);
        let loss = train_epoch(&mut net, images, labels, &order, cfg.batch_size, cfg.lr, &clock)?;
        let pos = SchedulePosition {
            turn: 1,
            phase: Phase::Finetune,
            epoch_in_phase: e,
            global_epoch: e,
        };
        if tracker.record(&net, pos, loss, &clock, &shuffler, true)? {
            break;
        }
    }
    Ok(tracker.finish(net))
}
