//! Exponential forgetting: the decay gain `phi(t) = exp(-t / tau)`, the
//! decay clock, and the per-neuron tau assignment policies.
//!
//! A forgetting policy is either fixed-rate (every neuron shares one tau) or
//! varying-rate, where tau is spread over `[tau_min, tau_max]` by activation
//! rank, by position, for the top-k most active neurons only, or at random.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Tau value meaning "never forgets": the gain stays 1 for every `t`.
pub const NEVER_FORGETS: f64 = f64::INFINITY;

/// Default size of the calibration batch used to measure activation levels.
pub const CALIBRATION_SIZE: usize = 256;

/// Decay gain `exp(-t / tau)`.
pub fn phi(t: u32, tau: f64) -> Result<f64> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::Argument(format!(
            "forgetting rate must be positive, got {tau}"
        )));
    }
    if t == 0 || tau == NEVER_FORGETS {
        return Ok(1.0);
    }
    Ok((-(t as f64) / tau).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Fixed,
    Rank,
    Ordered,
    Top30,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Fixed,
        PolicyKind::Rank,
        PolicyKind::Ordered,
        PolicyKind::Top30,
        PolicyKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Fixed => "fixed",
            PolicyKind::Rank => "rank",
            PolicyKind::Ordered => "ordered",
            PolicyKind::Top30 => "top30",
            PolicyKind::Random => "random",
        }
    }

    /// Whether tau depends on measured activation levels.
    pub fn needs_profile(self) -> bool {
        matches!(self, PolicyKind::Rank | PolicyKind::Top30)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown policy kind {s:?} (expected fixed, rank, ordered, top30 or random)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingPolicy {
    pub kind: PolicyKind,
    /// Shared tau of the fixed kind.
    pub tau_fixed: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Tau of the neurons outside the top-k set (top30 kind).
    pub tau_rest: f64,
    pub top_k: usize,
    /// Seed of the random kind.
    pub seed: u64,
}

impl Default for ForgettingPolicy {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Rank,
            tau_fixed: 4.0,
            // A range starting at 1 drives the fastest neurons to a gain near
            // 0.02 by the fourth unlearning epoch, and plain SGD then blows up
            // when the next learning phase restores full gain.
            tau_min: 4.0,
            tau_max: 32.0,
            tau_rest: 100.0,
            top_k: 30,
            seed: 0,
        }
    }
}

impl ForgettingPolicy {
    pub fn fixed(tau: f64) -> Self {
        Self {
            kind: PolicyKind::Fixed,
            tau_fixed: tau,
            ..Self::default()
        }
    }

    pub fn varying(kind: PolicyKind, tau_min: f64, tau_max: f64) -> Self {
        Self {
            kind,
            tau_min,
            tau_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_nan() || v <= 0.0 {
                Err(Error::Argument(format!("{name} must be positive, got {v}")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            PolicyKind::Fixed => positive("tau_fixed", self.tau_fixed)?,
            kind => {
                positive("tau_min", self.tau_min)?;
                positive("tau_max", self.tau_max)?;
                if self.tau_min > self.tau_max {
                    return Err(Error::Argument(format!(
                        "tau_min ({}) exceeds tau_max ({})",
                        self.tau_min, self.tau_max
                    )));
                }
                if kind == PolicyKind::Top30 {
                    positive("tau_rest", self.tau_rest)?;
                    if self.top_k == 0 {
                        return Err(Error::Argument("top_k must be at least 1".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-neuron forgetting rates of one forget layer.
#[derive(Debug, Clone, PartialEq)]
pub struct TauAssignment {
    /// Forget slot (0 = first forget layer in the network).
    pub layer_id: usize,
    pub taus: Vec<f64>,
}

impl TauAssignment {
    pub fn new(layer_id: usize, taus: Vec<f64>) -> Result<Self> {
        if let Some(bad) = taus.iter().find(|t| t.is_nan() || **t <= 0.0) {
            return Err(Error::Argument(format!(
                "tau values must be positive, got {bad}"
            )));
        }
        Ok(Self { layer_id, taus })
    }

    /// An assignment whose neurons never forget (gain 1 at every `t`).
    pub fn never(layer_id: usize, width: usize) -> Self {
        Self {
            layer_id,
            taus: vec![NEVER_FORGETS; width],
        }
    }

    pub fn width(&self) -> usize {
        self.taus.len()
    }

    pub fn gains(&self, t: u32) -> Vec<f64> {
        self.taus
            .iter()
            .map(|&tau| phi(t, tau).expect("taus validated at construction"))
            .collect()
    }
}

/// Mean absolute activation of each neuron of a forget layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationProfile {
    pub mean_abs: Vec<f64>,
}

impl ActivationProfile {
    pub fn width(&self) -> usize {
        self.mean_abs.len()
    }
}

/// The decay time `t` together with the tau assignment of every forget slot.
///
/// `t` is zero throughout learning phases and counts unlearning epochs
/// (1, 2, ...) within the current turn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForgetClock {
    t: u32,
    assignments: Vec<TauAssignment>,
}

impl ForgetClock {
    /// `t = 0`: every forget layer is the identity.
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn new(t: u32, assignments: Vec<TauAssignment>) -> Self {
        Self { t, assignments }
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn set_t(&mut self, t: u32) {
        self.t = t;
    }

    pub fn assignments(&self) -> &[TauAssignment] {
        &self.assignments
    }

    pub fn assignment(&self, slot: usize) -> Option<&TauAssignment> {
        self.assignments.iter().find(|a| a.layer_id == slot)
    }

    /// Gains for `slot`, or `None` when the layer is currently an identity.
    pub fn gains(&self, slot: usize, width: usize) -> Result<Option<Vec<f64>>> {
        if self.t == 0 {
            return Ok(None);
        }
        let assignment = self.assignment(slot).ok_or_else(|| {
            Error::Argument(format!("no tau assignment for forget slot {slot}"))
        })?;
        if assignment.width() != width {
            return Err(Error::Shape(format!(
                "forget slot {slot} has width {width} but {} taus",
                assignment.width()
            )));
        }
        Ok(Some(assignment.gains(self.t)))
    }
}

/// Measures the mean |activation| of every neuron of forget slot `slot`
/// over `calib_batch`, with forgetting disabled.
pub fn calibrate<T: Scalar>(
    net: &Network<T>,
    calib_batch: &Tensor<T>,
    slot: usize,
) -> Result<ActivationProfile> {
    if calib_batch.rows() == 0 {
        return Err(Error::Argument("calibration batch is empty".into()));
    }
    let layer = *net
        .arch()
        .forget_layers()
        .get(slot)
        .ok_or_else(|| Error::Argument(format!("network has no forget slot {slot}")))?;
    let acts = net.forward(calib_batch, &ForgetClock::disabled())?;
    let out = acts.output(layer);
    let width = out.row_len();
    let mut sums = vec![0.0f64; width];
    for b in 0..out.rows() {
        for (s, v) in sums.iter_mut().zip(out.row(b)) {
            *s += v.to_real().abs();
        }
    }
    let n = out.rows() as f64;
    Ok(ActivationProfile {
        mean_abs: sums.into_iter().map(|s| s / n).collect(),
    })
}

/// Neuron indices ordered from most to least activated; ties go to the lower index.
fn activation_order(profile: &ActivationProfile) -> Vec<usize> {
    let mut order: Vec<usize> = (0..profile.width()).collect();
    order.sort_by(|&a, &b| {
        profile.mean_abs[b]
            .partial_cmp(&profile.mean_abs[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Linear interpolation over `n` positions; position 0 gets `lo`.
fn interpolate(pos: usize, n: usize, lo: f64, hi: f64) -> f64 {
    if n <= 1 {
        lo
    } else {
        lo + pos as f64 / (n - 1) as f64 * (hi - lo)
    }
}

/// Assigns a tau to every neuron of a forget layer of `width` neurons.
///
/// Rank-based kinds give the most activated neuron `tau_min`, so it forgets
/// fastest. `profile` is only consulted by the rank and top30 kinds.
pub fn assign_taus(
    policy: &ForgettingPolicy,
    profile: Option<&ActivationProfile>,
    width: usize,
    layer_id: usize,
    rng: &mut Rng,
) -> Result<TauAssignment> {
    policy.validate()?;
    if width == 0 {
        return Err(Error::Argument("forget layer width must be at least 1".into()));
    }
    let profile = if policy.kind.needs_profile() {
        let p = profile.ok_or_else(|| {
            Error::Argument(format!("{} policy needs an activation profile", policy.kind))
        })?;
        if p.width() != width {
            return Err(Error::Shape(format!(
                "activation profile has {} entries for a layer of width {width}",
                p.width()
            )));
        }
        Some(p)
    } else {
        None
    };
    let (lo, hi) = (policy.tau_min, policy.tau_max);
    let taus = match policy.kind {
        PolicyKind::Fixed => vec![policy.tau_fixed; width],
        PolicyKind::Ordered => (0..width).map(|i| interpolate(i, width, lo, hi)).collect(),
        PolicyKind::Rank | PolicyKind::Top30 => {
            let order = activation_order(profile.expect("checked above"));
            let k = if policy.kind == PolicyKind::Rank {
                width
            } else {
                policy.top_k.min(width)
            };
            let mut taus = vec![policy.tau_rest; width];
            for (rank, &neuron) in order.iter().take(k).enumerate() {
                taus[neuron] = interpolate(rank, k, lo, hi);
            }
            taus
        }
        PolicyKind::Random => (0..width).map(|_| rng.uniform(lo, hi)).collect(),
    };
    TauAssignment::new(layer_id, taus)
}

/// Multiplies the last dimension of `values` elementwise by `phi(t, tau_i)`.
pub fn apply_forget<T: Scalar>(
    values: &Tensor<T>,
    assignment: &TauAssignment,
    t: u32,
) -> Result<Tensor<T>> {
    let width = *values
        .shape()
        .last()
        .ok_or_else(|| Error::Shape("cannot apply forgetting to a scalar".into()))?;
    if width != assignment.width() {
        return Err(Error::Shape(format!(
            "values have last dimension {width} but assignment has {} taus",
            assignment.width()
        )));
    }
    let mut out = values.clone();
    if t == 0 {
        return Ok(out);
    }
    let gains: Vec<T> = assignment.gains(t).into_iter().map(T::from_real).collect();
    for chunk in out.data_mut().chunks_mut(width) {
        for (v, g) in chunk.iter_mut().zip(&gains) {
            *v = *v * *g;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn phi_closed_forms() {
        assert_eq!(phi(0, 5.0).unwrap(), 1.0);
        assert!(close(phi(4, 4.0).unwrap(), (-1.0f64).exp()));
        assert!((phi(4, 4.0).unwrap() - 0.367879).abs() < 1e-6);
        assert_eq!(phi(7, NEVER_FORGETS).unwrap(), 1.0);
    }

    #[test]
    fn phi_rejects_non_positive_tau() {
        assert!(phi(1, 0.0).is_err());
        assert!(phi(1, -2.0).is_err());
        assert!(phi(0, f64::NAN).is_err());
    }

    #[test]
    fn phi_strictly_decreasing() {
        for &tau in &[0.5, 1.0, 4.0, 8.0, 100.0] {
            for t in 0..20 {
                assert!(phi(t + 1, tau).unwrap() < phi(t, tau).unwrap());
            }
        }
    }

    #[test]
    fn ordered_interpolates_by_position() {
        let policy = ForgettingPolicy::varying(PolicyKind::Ordered, 1.0, 8.0);
        let a = assign_taus(&policy, None, 4, 0, &mut Rng::new(0)).unwrap();
        let expected = [1.0, 10.0 / 3.0, 17.0 / 3.0, 8.0];
        for (got, want) in a.taus.iter().zip(expected) {
            assert!(close(*got, want), "{got} vs {want}");
        }
    }

    #[test]
    fn rank_maps_most_active_to_tau_min() {
        let policy = ForgettingPolicy::varying(PolicyKind::Rank, 1.0, 8.0);
        let profile = ActivationProfile {
            mean_abs: vec![0.2, 0.9, 0.5],
        };
        let a = assign_taus(&policy, Some(&profile), 3, 0, &mut Rng::new(0)).unwrap();
        assert_eq!(a.taus, vec![8.0, 1.0, 4.5]);
    }

    #[test]
    fn rank_ties_favour_lower_index() {
        let policy = ForgettingPolicy::varying(PolicyKind::Rank, 1.0, 3.0);
        let profile = ActivationProfile {
            mean_abs: vec![0.5, 0.5, 0.1],
        };
        let a = assign_taus(&policy, Some(&profile), 3, 0, &mut Rng::new(0)).unwrap();
        assert_eq!(a.taus, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn top30_clamps_to_width() {
        let profile = ActivationProfile {
            mean_abs: (0..10).map(|i| ((i * 7) % 10) as f64).collect(),
        };
        let mut top = ForgettingPolicy::varying(PolicyKind::Top30, 1.0, 8.0);
        top.top_k = 30;
        let rank = ForgettingPolicy::varying(PolicyKind::Rank, 1.0, 8.0);
        let a = assign_taus(&top, Some(&profile), 10, 0, &mut Rng::new(0)).unwrap();
        let b = assign_taus(&rank, Some(&profile), 10, 0, &mut Rng::new(0)).unwrap();
        assert_eq!(a.taus, b.taus);
    }

    #[test]
    fn top_k_rest_gets_tau_rest() {
        let profile = ActivationProfile {
            mean_abs: vec![0.1, 0.4, 0.3, 0.9, 0.0],
        };
        let mut top = ForgettingPolicy::varying(PolicyKind::Top30, 1.0, 8.0);
        top.top_k = 2;
        let a = assign_taus(&top, Some(&profile), 5, 1, &mut Rng::new(0)).unwrap();
        assert_eq!(a.taus, vec![100.0, 8.0, 100.0, 1.0, 100.0]);
        assert_eq!(a.layer_id, 1);
    }

    #[test]
    fn width_one_gets_tau_min() {
        let policy = ForgettingPolicy::varying(PolicyKind::Ordered, 2.0, 9.0);
        let a = assign_taus(&policy, None, 1, 0, &mut Rng::new(0)).unwrap();
        assert_eq!(a.taus, vec![2.0]);
    }

    #[test]
    fn fixed_is_uniform() {
        let a = assign_taus(&ForgettingPolicy::fixed(4.0), None, 6, 0, &mut Rng::new(0)).unwrap();
        assert_eq!(a.taus, vec![4.0; 6]);
    }

    #[test]
    fn random_within_bounds_and_seeded() {
        let policy = ForgettingPolicy::varying(PolicyKind::Random, 1.0, 8.0);
        let a = assign_taus(&policy, None, 500, 0, &mut Rng::new(3)).unwrap();
        let b = assign_taus(&policy, None, 500, 0, &mut Rng::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.taus.iter().all(|&t| (1.0..=8.0).contains(&t)));
    }

    #[test]
    fn invalid_policies_rejected() {
        let mut p = ForgettingPolicy::varying(PolicyKind::Rank, 5.0, 1.0);
        assert!(p.validate().is_err());
        p = ForgettingPolicy::fixed(0.0);
        assert!(p.validate().is_err());
        let profile = ActivationProfile { mean_abs: vec![1.0; 3] };
        let rank = ForgettingPolicy::varying(PolicyKind::Rank, 1.0, 8.0);
        assert!(assign_taus(&rank, None, 3, 0, &mut Rng::new(0)).is_err());
        assert!(assign_taus(&rank, Some(&profile), 4, 0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn apply_forget_closed_form() {
        let v = Tensor::<f64>::new(vec![1, 2], vec![2.0, 2.0]).unwrap();
        let a = TauAssignment::new(0, vec![1.0, 2.0]).unwrap();
        let out = apply_forget(&v, &a, 2).unwrap();
        assert!(close(out.data()[0], 2.0 * (-2.0f64).exp()));
        assert!(close(out.data()[1], 2.0 * (-1.0f64).exp()));
        assert!((out.data()[0] - 0.27067).abs() < 1e-5);
        assert!((out.data()[1] - 0.73576).abs() < 1e-5);
    }

    #[test]
    fn apply_forget_identity_at_zero() {
        let v = Tensor::<f32>::new(vec![2, 3], vec![0.1, -2.5, 3.0, 1e-30, 7.0, -0.0]).unwrap();
        let a = TauAssignment::new(0, vec![1.0, 2.0, 3.0]).unwrap();
        let out = apply_forget(&v, &a, 0).unwrap();
        let bits = |t: &Tensor<f32>| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out), bits(&v));
    }

    #[test]
    fn apply_forget_is_additive_in_time() {
        let v = Tensor::<f64>::new(vec![3, 2], vec![1.0, -2.0, 0.5, 4.0, 3.0, 9.0]).unwrap();
        let a = TauAssignment::new(0, vec![3.0, 3.0]).unwrap();
        let twice = apply_forget(&apply_forget(&v, &a, 2).unwrap(), &a, 3).unwrap();
        let g = (-5.0f64 / 3.0).exp();
        for (x, y) in twice.data().iter().zip(v.data()) {
            assert!((x - y * g).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_forget_length_mismatch() {
        let v = Tensor::<f32>::zeros(vec![2, 3]);
        let a = TauAssignment::new(0, vec![1.0, 2.0]).unwrap();
        assert!(matches!(apply_forget(&v, &a, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn clock_requires_assignment_when_running() {
        let clock = ForgetClock::new(1, vec![]);
        assert!(clock.gains(0, 4).is_err());
        assert_eq!(ForgetClock::disabled().gains(0, 4).unwrap(), None);
    }

    #[test]
    fn policy_kind_parses() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("lru".parse::<PolicyKind>().is_err());
    }
}
