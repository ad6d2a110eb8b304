//! Binary checkpoint files.
//!
//! Layout: the magic `FNN1`, a little-endian `u16` format version, a `u32`
//! byte length followed by the UTF-8 manifest, then every parameter tensor as
//! little-endian `f32` in layer order (weight before bias). The manifest is
//! the architecture text plus `#`-prefixed metadata lines.

use std::fs;
use std::path::Path;

use crate::engine::metrics::Phase;
use crate::error::{Error, Result};
use crate::forgetting::{ForgetClock, TauAssignment};
use crate::nn::{Architecture, Network};
use crate::rng::RngState;

pub const MAGIC: &[u8; 4] = b"FNN1";
pub const FORMAT_VERSION: u16 = 1;

/// Where in a schedule a checkpoint was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulePosition {
    pub turn: usize,
    pub phase: Phase,
    pub epoch_in_phase: usize,
    pub global_epoch: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckpointMeta {
    pub position: Option<SchedulePosition>,
    /// Named generator states, e.g. the batch shuffler.
    pub rng: Vec<(String, RngState)>,
    /// Decay time and taus in force when the checkpoint was taken.
    pub clock: ForgetClock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub meta: CheckpointMeta,
}

fn manifest_text(net: &Network, meta: &CheckpointMeta) -> String {
    let mut text = net.arch().manifest();
    if let Some(p) = meta.position {
        text.push_str(&format!(
            "# position {} {} {} {}\n",
            p.turn, p.phase, p.epoch_in_phase, p.global_epoch
        ));
    }
    for (name, s) in &meta.rng {
        text.push_str(&format!("# rng {name} {} {}\n", s.seed, s.word_pos));
    }
    text.push_str(&format!("# clock {}\n", meta.clock.t()));
    for a in meta.clock.assignments() {
        text.push_str(&format!("# taus {}", a.layer_id));
        for tau in &a.taus {
            text.push_str(&format!(" {tau}"));
        }
        text.push('\n');
    }
    text
}

fn parse_meta(text: &str) -> Result<CheckpointMeta> {
    let mut meta = CheckpointMeta::default();
    let mut t = 0u32;
    let mut assignments = Vec::new();
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        let bad = || Error::Format(format!("checkpoint metadata line {line:?}"));
        let w: Vec<&str> = line.split_whitespace().collect();
        match w.as_slice() {
            ["position", turn, phase, epoch, global] => {
                meta.position = Some(SchedulePosition {
                    turn: turn.parse().map_err(|_| bad())?,
                    phase: phase.parse().map_err(|_| bad())?,
                    epoch_in_phase: epoch.parse().map_err(|_| bad())?,
                    global_epoch: global.parse().map_err(|_| bad())?,
                });
            }
            ["rng", name, seed, pos] => meta.rng.push((
                (*name).to_string(),
                RngState {
                    seed: seed.parse().map_err(|_| bad())?,
                    word_pos: pos.parse().map_err(|_| bad())?,
                },
            )),
            ["clock", value] => t = value.parse().map_err(|_| bad())?,
            ["taus", slot, taus @ ..] => {
                let taus = taus
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                assignments.push(TauAssignment::new(slot.parse().map_err(|_| bad())?, taus)?);
            }
            _ => return Err(bad()),
        }
    }
    meta.clock = ForgetClock::new(t, assignments);
    Ok(meta)
}

pub fn encode_checkpoint(net: &Network, meta: &CheckpointMeta) -> Vec<u8> {
    let manifest = manifest_text(net, meta);
    let mut out = Vec::with_capacity(10 + manifest.len() + 4 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for p in net.params().entries() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let short = || Error::Format("checkpoint is truncated".into());
    let version = u16::from_le_bytes(bytes.get(4..6).ok_or_else(short)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let len = u32::from_le_bytes(bytes.get(6..10).ok_or_else(short)?.try_into().unwrap()) as usize;
    let manifest = bytes.get(10..10 + len).ok_or_else(short)?;
    let manifest = std::str::from_utf8(manifest)
        .map_err(|_| Error::Format("checkpoint manifest is not UTF-8".into()))?;
    let arch = Architecture::from_manifest(manifest)?;
    let meta = parse_meta(manifest)?;

    let mut blob = &bytes[10 + len..];
    let mut net = Network::zeros(arch);
    let expected = 4 * net.param_count();
    if blob.len() != expected {
        return Err(Error::Format(format!(
            "checkpoint holds {} parameter bytes, architecture needs {expected}",
            blob.len()
        )));
    }
    for p in net.params_mut().entries_mut() {
        for v in p.value.data_mut() {
            let (head, rest) = blob.split_at(4);
            *v = f32::from_le_bytes(head.try_into().unwrap());
            blob = rest;
        }
    }
    Ok(Checkpoint { network: net, meta })
}

pub fn save_checkpoint(net: &Network, meta: &CheckpointMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(net, meta)).map_err(|source| Error::IoAt {
        path: path.to_path_buf(),
        offset: 0,
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::IoAt {
        path: path.to_path_buf(),
        offset: 0,
        source,
    })?;
    decode_checkpoint(&bytes)
}
