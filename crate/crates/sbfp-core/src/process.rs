//! Simulation of the shifted Brownian fluctuation process.
//!
//! A path is a marked point process: observation epochs with random
//! interarrivals, positions moved by drifted Gaussian increments. The exit
//! index is the first observation whose increment breaks the monotone
//! pattern (the first observed turning point). Replications draw from
//! counter-based substreams so Monte Carlo results are bit-identical no
//! matter how the replications are scheduled.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::rng::SubStream;

/// Default cap on observation steps per path.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Construction-time validation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidProcess(pub &'static str);

impl fmt::Display for InvalidProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid process description: {}", self.0)
    }
}

impl core::error::Error for InvalidProcess {}

/// The path hit the step cap without satisfying the exit condition.
#[derive(Debug, Clone)]
pub struct NoExitWithinCap {
    /// The truncated path, retained for diagnostics.
    pub path: SbfpPath,
}

impl fmt::Display for NoExitWithinCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no exit within {} observation steps",
            self.path.entries().len().saturating_sub(1)
        )
    }
}

impl core::error::Error for NoExitWithinCap {}

/// Monte Carlo estimation failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum McError {
    /// Every replication hit the step cap.
    AllTruncated,
}

impl fmt::Display for McError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AllTruncated => write!(f, "every replication hit the step cap"),
        }
    }
}

impl core::error::Error for McError {}

// ---------------------------------------------------------------------------
// Process description
// ---------------------------------------------------------------------------

/// Rule for drift slopes beyond the stored list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DriftExtension {
    HoldLast,
    Cycle,
}

/// Ordered per-step drift slopes `w_k` plus the extension rule.
///
/// `w_0` is not stored: the initial point only carries the starting position.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftSchedule {
    values: Vec<f64>,
    extension: DriftExtension,
}

impl DriftSchedule {
    pub fn new(values: Vec<f64>, extension: DriftExtension) -> Result<Self, InvalidProcess> {
        if values.is_empty() {
            return Err(InvalidProcess("drift schedule must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(InvalidProcess("drift slopes must be finite"));
        }
        Ok(Self { values, extension })
    }

    /// Constant drift slope.
    pub fn constant(w: f64) -> Result<Self, InvalidProcess> {
        Self::new(vec![w], DriftExtension::HoldLast)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extension(&self) -> DriftExtension {
        self.extension
    }

    /// Slope `w_k` for step `k >= 1`.
    pub fn slope(&self, k: usize) -> f64 {
        debug_assert!(k >= 1, "drift slopes are indexed from 1");
        let idx = k - 1;
        if idx < self.values.len() {
            self.values[idx]
        } else {
            match self.extension {
                DriftExtension::HoldLast => *self.values.last().expect("non-empty"),
                DriftExtension::Cycle => self.values[idx % self.values.len()],
            }
        }
    }

    /// Mean slope over the stored prefix.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Orientation of the exit condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Shape {
    /// Increments stay above threshold until the first one below (a peak).
    Concave,
    /// Mirrored: increments stay below until the first one above (a trough).
    Convex,
}

/// What an increment is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ThresholdMode {
    /// A turning point is a sign change of increments (threshold 0).
    ZeroSign,
    /// Thresholds are the schedule values themselves, read literally.
    PaperLiteral,
}

/// Static description of the process.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProcessParams {
    pub sigma: f64,
    pub a0: f64,
    pub drift: DriftSchedule,
    pub shape: Shape,
    pub threshold_mode: ThresholdMode,
}

impl ProcessParams {
    pub fn new(
        sigma: f64,
        a0: f64,
        drift: DriftSchedule,
        shape: Shape,
        threshold_mode: ThresholdMode,
    ) -> Result<Self, InvalidProcess> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(InvalidProcess("sigma must be nonnegative and finite"));
        }
        if !a0.is_finite() {
            return Err(InvalidProcess("a0 must be finite"));
        }
        Ok(Self { sigma, a0, drift, shape, threshold_mode })
    }
}

/// Law of the gaps between observations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Interarrival {
    Exponential { mean: f64 },
    Deterministic { step: f64 },
}

/// Law of the delay before the first observation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum InitialDelay {
    Exponential { mean: f64 },
    Zero,
}

/// When and how the process is observed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservationModel {
    pub interarrival: Interarrival,
    pub initial_delay: InitialDelay,
}

impl ObservationModel {
    pub fn new(interarrival: Interarrival, initial_delay: InitialDelay) -> Result<Self, InvalidProcess> {
        match interarrival {
            Interarrival::Exponential { mean } if !(mean > 0.0 && mean.is_finite()) => {
                return Err(InvalidProcess("interarrival mean must be positive and finite"))
            }
            Interarrival::Deterministic { step } if !(step > 0.0 && step.is_finite()) => {
                return Err(InvalidProcess("deterministic step must be positive and finite"))
            }
            _ => {}
        }
        if let InitialDelay::Exponential { mean } = initial_delay {
            if !(mean > 0.0 && mean.is_finite()) {
                return Err(InvalidProcess("initial delay mean must be positive and finite"));
            }
        }
        Ok(Self { interarrival, initial_delay })
    }

    /// Memoryless model with no initial delay.
    pub fn exponential(mean: f64) -> Result<Self, InvalidProcess> {
        Self::new(Interarrival::Exponential { mean }, InitialDelay::Zero)
    }

    pub fn mean_interarrival(&self) -> f64 {
        match self.interarrival {
            Interarrival::Exponential { mean } => mean,
            Interarrival::Deterministic { step } => step,
        }
    }

    pub fn mean_initial_delay(&self) -> f64 {
        match self.initial_delay {
            InitialDelay::Exponential { mean } => mean,
            InitialDelay::Zero => 0.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Paths and exit records
// ---------------------------------------------------------------------------

/// One observation of the process.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathEntry {
    /// Observation index (0 is the initial observation).
    pub index: usize,
    /// Observation time.
    pub tau: f64,
    /// Gap since the previous observation (equals `tau` at index 0).
    pub delta: f64,
    /// Position at this observation.
    pub position: f64,
    /// Increment since the previous observation (0 at index 0).
    pub increment: f64,
}

/// An observed path.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SbfpPath {
    entries: Vec<PathEntry>,
    truncated: bool,
}

impl SbfpPath {
    pub fn entries(&self) -> &[PathEntry] {
        &self.entries
    }

    /// True when the path stopped at the step cap.
    pub fn truncated(&self) -> bool {
        self.truncated
    }
}

/// The first turning point of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExitRecord {
    /// Exit index (>= 1).
    pub nu: usize,
    pub tau_prev: f64,
    pub a_prev: f64,
    pub tau_exit: f64,
    pub a_exit: f64,
    /// All pre-exit increments satisfied the strict monotone condition.
    pub condition_held: bool,
}

/// A simulated path together with its turning point.
#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub path: SbfpPath,
    pub exit: ExitRecord,
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Draw one interarrival gap; always strictly positive.
pub fn sample_interarrival(model: &ObservationModel, rng: &mut SubStream) -> f64 {
    match model.interarrival {
        Interarrival::Exponential { mean } => rng.next_exponential(mean),
        Interarrival::Deterministic { step } => step,
    }
}

fn sample_initial_delay(model: &ObservationModel, rng: &mut SubStream) -> f64 {
    match model.initial_delay {
        InitialDelay::Exponential { mean } => rng.next_exponential(mean),
        InitialDelay::Zero => 0.0,
    }
}

/// Threshold an increment at step `k` is compared against.
fn threshold(params: &ProcessParams, k: usize) -> f64 {
    match params.threshold_mode {
        ThresholdMode::ZeroSign => 0.0,
        ThresholdMode::PaperLiteral => params.drift.slope(k),
    }
}

/// Strictly-flipped / strictly-held classification of one increment.
#[derive(Clone, Copy, PartialEq, Eq)]
enum StepState {
    Held,
    Flipped,
    Tie,
}

fn classify(params: &ProcessParams, k: usize, increment: f64) -> StepState {
    let t = threshold(params, k);
    let (held, flipped) = match params.shape {
        Shape::Concave => (increment > t, increment < t),
        Shape::Convex => (increment < t, increment > t),
    };
    if flipped {
        StepState::Flipped
    } else if held {
        StepState::Held
    } else {
        StepState::Tie
    }
}

// ---------------------------------------------------------------------------
// Path generation
// ---------------------------------------------------------------------------

struct Stepper<'a> {
    params: &'a ProcessParams,
    obs: &'a ObservationModel,
    rng: SubStream,
    index: usize,
    tau: f64,
    position: f64,
}

impl<'a> Stepper<'a> {
    fn start(params: &'a ProcessParams, obs: &'a ObservationModel, mut rng: SubStream) -> (Self, PathEntry) {
        let tau0 = sample_initial_delay(obs, &mut rng);
        let first = PathEntry {
            index: 0,
            tau: tau0,
            delta: tau0,
            position: params.a0,
            increment: 0.0,
        };
        (
            Self { params, obs, rng, index: 0, tau: tau0, position: params.a0 },
            first,
        )
    }

    fn step(&mut self) -> PathEntry {
        self.index += 1;
        let delta = sample_interarrival(self.obs, &mut self.rng);
        let z = self.rng.next_standard_normal();
        let w = self.params.drift.slope(self.index);
        let disturbance = w * delta + self.params.sigma * math::sqrt(delta) * z;
        self.tau += delta;
        let next = self.position + disturbance;
        // Store the realized difference so the bookkeeping identity
        // position[k] - position[k-1] == increment holds bit-exactly.
        let increment = next - self.position;
        self.position = next;
        PathEntry {
            index: self.index,
            tau: self.tau,
            delta,
            position: self.position,
            increment,
        }
    }
}

/// Simulate until the first turning point or the step cap.
///
/// Observation 0 happens after the initial delay; each step draws the gap
/// and then the Gaussian disturbance, so a replication is a pure function
/// of its substream.
pub fn simulate_path(
    params: &ProcessParams,
    obs: &ObservationModel,
    seed: u64,
    max_steps: usize,
) -> Result<SimulatedPath, NoExitWithinCap> {
    simulate_replication(params, obs, seed, 0, max_steps)
}

/// Simulate replication `rep` of the `(seed, rep)` substream family.
pub fn simulate_replication(
    params: &ProcessParams,
    obs: &ObservationModel,
    seed: u64,
    rep: u64,
    max_steps: usize,
) -> Result<SimulatedPath, NoExitWithinCap> {
    assert!(max_steps >= 1, "max_steps must be at least 1");
    let (mut stepper, first) = Stepper::start(params, obs, SubStream::new(seed, rep));
    let mut entries = vec![first];
    let mut condition_held = true;
    for _ in 0..max_steps {
        let entry = stepper.step();
        entries.push(entry);
        match classify(params, entry.index, entry.increment) {
            StepState::Flipped => {
                let prev = entries[entries.len() - 2];
                let exit = ExitRecord {
                    nu: entry.index,
                    tau_prev: prev.tau,
                    a_prev: prev.position,
                    tau_exit: entry.tau,
                    a_exit: entry.position,
                    condition_held,
                };
                return Ok(SimulatedPath {
                    path: SbfpPath { entries, truncated: false },
                    exit,
                });
            }
            StepState::Held => {}
            StepState::Tie => condition_held = false,
        }
    }
    Err(NoExitWithinCap {
        path: SbfpPath { entries, truncated: true },
    })
}

/// Generate a fixed-length path with no exit detection (data synthesis).
pub fn generate_path(
    params: &ProcessParams,
    obs: &ObservationModel,
    seed: u64,
    steps: usize,
) -> SbfpPath {
    let (mut stepper, first) = Stepper::start(params, obs, SubStream::new(seed, 0));
    let mut entries = vec![first];
    for _ in 0..steps {
        entries.push(stepper.step());
    }
    SbfpPath { entries, truncated: false }
}

/// Find the first turning point of an already-simulated path.
///
/// Returns `None` when no index satisfies the exit condition. A tie
/// (increment exactly at threshold) never triggers the exit; it only clears
/// the strict-confinement flag.
pub fn detect_exit(path: &SbfpPath, params: &ProcessParams) -> Option<ExitRecord> {
    let entries = path.entries();
    let mut condition_held = true;
    for k in 1..entries.len() {
        let entry = entries[k];
        match classify(params, entry.index, entry.increment) {
            StepState::Flipped => {
                let prev = entries[k - 1];
                return Some(ExitRecord {
                    nu: entry.index,
                    tau_prev: prev.tau,
                    a_prev: prev.position,
                    tau_exit: entry.tau,
                    a_exit: entry.position,
                    condition_held,
                });
            }
            StepState::Held => {}
            StepState::Tie => condition_held = false,
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation
// ---------------------------------------------------------------------------

/// Transform weights of the joint functional estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhiWeights {
    pub u: f64,
    pub v: f64,
    pub vartheta: f64,
    pub theta: f64,
}

/// Per-replication outcome, the unit that parallel drivers collect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepOutcome {
    pub exited: bool,
    pub condition_held: bool,
    pub nu: usize,
    pub tau_prev: f64,
    pub a_prev: f64,
    pub tau_exit: f64,
    pub a_exit: f64,
}

/// Simulate one replication into its summary outcome.
pub fn replicate(
    params: &ProcessParams,
    obs: &ObservationModel,
    seed: u64,
    rep: u64,
    max_steps: usize,
) -> RepOutcome {
    match simulate_replication(params, obs, seed, rep, max_steps) {
        Ok(sim) => RepOutcome {
            exited: true,
            condition_held: sim.exit.condition_held,
            nu: sim.exit.nu,
            tau_prev: sim.exit.tau_prev,
            a_prev: sim.exit.a_prev,
            tau_exit: sim.exit.tau_exit,
            a_exit: sim.exit.a_exit,
        },
        Err(_) => RepOutcome {
            exited: false,
            condition_held: false,
            nu: 0,
            tau_prev: f64::NAN,
            a_prev: f64::NAN,
            tau_exit: f64::NAN,
            a_exit: f64::NAN,
        },
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte Carlo estimates of the turning-point quantities.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McSummary {
    pub reps: usize,
    /// Fraction of replications that hit the step cap.
    pub truncation_rate: f64,
    /// Joint functional estimate over all replications (truncated and
    /// tie-broken paths contribute zero).
    pub phi: Estimate,
    /// Conditional means over exited paths.
    pub a_prev: Estimate,
    pub tau_prev: Estimate,
    pub a_exit: Estimate,
    pub tau_exit: Estimate,
    /// Mean exit index counted directly.
    pub nu: Estimate,
    /// Mean exit index recovered as |mean exit time| / mean interarrival.
    pub nu_from_tau: f64,
}

struct Acc {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Acc {
    fn new() -> Self {
        Self { n: 0, sum: 0.0, sum_sq: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn estimate(&self) -> Estimate {
        if self.n == 0 {
            return Estimate { value: f64::NAN, std_error: f64::NAN };
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let std_error = if self.n > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            math::sqrt(var / n)
        } else {
            0.0
        };
        Estimate { value: mean, std_error }
    }
}

/// Fold per-replication outcomes, in index order, into a summary.
///
/// Splitting the outcomes across workers and then calling this on the
/// ordered concatenation gives bit-identical results to a sequential run.
pub fn summarize(
    outcomes: &[RepOutcome],
    weights: &PhiWeights,
    obs: &ObservationModel,
) -> Result<McSummary, McError> {
    let mut phi = Acc::new();
    let mut a_prev = Acc::new();
    let mut tau_prev = Acc::new();
    let mut a_exit = Acc::new();
    let mut tau_exit = Acc::new();
    let mut nu = Acc::new();
    let mut exited = 0usize;
    for out in outcomes {
        if out.exited {
            exited += 1;
            a_prev.push(out.a_prev);
            tau_prev.push(out.tau_prev);
            a_exit.push(out.a_exit);
            tau_exit.push(out.tau_exit);
            nu.push(out.nu as f64);
        }
        let contribution = if out.exited && out.condition_held {
            math::exp(
                -weights.u * out.a_prev
                    - weights.v * out.a_exit
                    - weights.vartheta * out.tau_prev
                    - weights.theta * out.tau_exit,
            )
        } else {
            0.0
        };
        phi.push(contribution);
    }
    if exited == 0 {
        return Err(McError::AllTruncated);
    }
    let tau_exit_est = tau_exit.estimate();
    Ok(McSummary {
        reps: outcomes.len(),
        truncation_rate: (outcomes.len() - exited) as f64 / outcomes.len() as f64,
        phi: phi.estimate(),
        a_prev: a_prev.estimate(),
        tau_prev: tau_prev.estimate(),
        a_exit: a_exit.estimate(),
        tau_exit: tau_exit_est,
        nu: nu.estimate(),
        nu_from_tau: math::abs(tau_exit_est.value) / obs.mean_interarrival(),
    })
}

/// Sequential Monte Carlo estimate over `reps` replications.
pub fn mc_estimate(
    params: &ProcessParams,
    obs: &ObservationModel,
    weights: &PhiWeights,
    reps: usize,
    seed: u64,
    max_steps: usize,
) -> Result<McSummary, McError> {
    assert!(reps >= 1, "at least one replication");
    let outcomes: Vec<RepOutcome> = (0..reps)
        .map(|rep| replicate(params, obs, seed, rep as u64, max_steps))
        .collect();
    summarize(&outcomes, weights, obs)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn det_obs(step: f64) -> ObservationModel {
        ObservationModel::new(Interarrival::Deterministic { step }, InitialDelay::Zero).unwrap()
    }

    fn concave(sigma: f64, a0: f64, drift: Vec<f64>) -> ProcessParams {
        ProcessParams::new(
            sigma,
            a0,
            DriftSchedule::new(drift, DriftExtension::HoldLast).unwrap(),
            Shape::Concave,
            ThresholdMode::ZeroSign,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_interarrival_is_constant() {
        let obs = det_obs(1.0);
        let mut rng = SubStream::new(1, 0);
        assert_eq!(sample_interarrival(&obs, &mut rng), 1.0);
    }

    #[test]
    fn exponential_interarrival_reproducible() {
        let obs = ObservationModel::new(
            Interarrival::Exponential { mean: 2.0 },
            InitialDelay::Zero,
        )
        .unwrap();
        let mut a = SubStream::new(3, 9);
        let mut b = SubStream::new(3, 9);
        for _ in 0..3 {
            assert_eq!(sample_interarrival(&obs, &mut a), sample_interarrival(&obs, &mut b));
        }
    }

    #[test]
    fn deterministic_peak_path() {
        // sigma=0, a0=0, drift (+1,+1,-1), unit gaps, no delay:
        // positions (0,1,2,1), exit at step 3.
        let params = concave(0.0, 0.0, vec![1.0, 1.0, -1.0]);
        let sim = simulate_path(&params, &det_obs(1.0), 7, 100).unwrap();
        let positions: Vec<f64> = sim.path.entries().iter().map(|e| e.position).collect();
        assert_eq!(positions, vec![0.0, 1.0, 2.0, 1.0]);
        assert_eq!(sim.exit.nu, 3);
        assert_eq!(sim.exit.tau_exit, 3.0);
        assert_eq!(sim.exit.tau_prev, 2.0);
        assert_eq!(sim.exit.a_prev, 2.0);
        assert_eq!(sim.exit.a_exit, 1.0);
        assert!(sim.exit.condition_held);
    }

    #[test]
    fn all_positive_drift_never_exits() {
        let params = concave(0.0, 0.0, vec![1.0]);
        let err = simulate_path(&params, &det_obs(1.0), 7, 100).unwrap_err();
        assert!(err.path.truncated());
        assert_eq!(err.path.entries().len(), 101);
    }

    #[test]
    fn detect_exit_concave_and_convex() {
        let mk_path = |incs: &[f64]| {
            let mut entries = vec![PathEntry { index: 0, tau: 0.0, delta: 0.0, position: 0.0, increment: 0.0 }];
            let mut pos = 0.0;
            for (i, inc) in incs.iter().enumerate() {
                pos += inc;
                entries.push(PathEntry {
                    index: i + 1,
                    tau: (i + 1) as f64,
                    delta: 1.0,
                    position: pos,
                    increment: *inc,
                });
            }
            SbfpPath { entries, truncated: false }
        };
        let concave_p = concave(1.0, 0.0, vec![0.0]);
        let exit = detect_exit(&mk_path(&[0.5, 0.2, -0.1]), &concave_p).unwrap();
        assert_eq!(exit.nu, 3);
        assert!(exit.condition_held);

        let convex_p = ProcessParams::new(
            1.0,
            0.0,
            DriftSchedule::constant(0.0).unwrap(),
            Shape::Convex,
            ThresholdMode::ZeroSign,
        )
        .unwrap();
        let exit = detect_exit(&mk_path(&[-0.5, -0.2, 0.1]), &convex_p).unwrap();
        assert_eq!(exit.nu, 3);

        // Literal thresholds w = (1,1,1): second increment 0.8 < 1 exits.
        let literal = ProcessParams::new(
            1.0,
            0.0,
            DriftSchedule::new(vec![1.0, 1.0, 1.0], DriftExtension::HoldLast).unwrap(),
            Shape::Concave,
            ThresholdMode::PaperLiteral,
        )
        .unwrap();
        let exit = detect_exit(&mk_path(&[1.5, 0.8, 2.0]), &literal).unwrap();
        assert_eq!(exit.nu, 2);
    }

    #[test]
    fn exit_minimality_on_prefixes() {
        let params = concave(1.0, 0.0, vec![0.0]);
        let obs = ObservationModel::exponential(1.0).unwrap();
        for rep in 0..200u64 {
            let sim = simulate_replication(&params, &obs, 11, rep, 1000).unwrap();
            for j in 1..sim.exit.nu {
                let prefix = SbfpPath {
                    entries: sim.path.entries()[..=j].to_vec(),
                    truncated: false,
                };
                assert!(detect_exit(&prefix, &params).is_none(), "rep {rep} prefix {j}");
            }
            let full = detect_exit(&sim.path, &params).unwrap();
            assert_eq!(full, sim.exit);
        }
    }

    #[test]
    fn ties_do_not_exit() {
        let params = concave(0.0, 0.0, vec![0.0]);
        // All increments exactly zero: no exit ever.
        let err = simulate_path(&params, &det_obs(1.0), 5, 50).unwrap_err();
        assert_eq!(err.path.entries().len(), 51);
    }

    #[test]
    fn bookkeeping_identity() {
        let params = concave(0.7, 3.0, vec![0.2, -0.4, 0.1]);
        let obs = ObservationModel::new(
            Interarrival::Exponential { mean: 0.5 },
            InitialDelay::Exponential { mean: 0.25 },
        )
        .unwrap();
        let path = generate_path(&params, &obs, 99, 200);
        let entries = path.entries();
        for k in 1..entries.len() {
            let lhs = entries[k].position - entries[k - 1].position;
            assert_eq!(lhs, entries[k].increment);
            assert!(entries[k].tau > entries[k - 1].tau);
            assert!(entries[k].delta > 0.0);
        }
        assert!(entries[0].tau >= 0.0);
    }

    #[test]
    fn sigma_zero_mc_is_exact() {
        let params = concave(0.0, 0.0, vec![1.0, 1.0, -1.0]);
        let summary = mc_estimate(
            &params,
            &det_obs(1.0),
            &PhiWeights::default(),
            100,
            42,
            100,
        )
        .unwrap();
        assert_eq!(summary.tau_exit.value, 3.0);
        assert_eq!(summary.tau_exit.std_error, 0.0);
        assert_eq!(summary.truncation_rate, 0.0);
        assert_eq!(summary.phi.value, 1.0);
        assert_eq!(summary.nu.value, 3.0);
        assert_eq!(summary.nu_from_tau, 3.0);
    }

    #[test]
    fn phi_at_zero_weights_is_exit_fraction() {
        let params = concave(1.0, 0.0, vec![0.0]);
        let obs = ObservationModel::exponential(1.0).unwrap();
        let summary =
            mc_estimate(&params, &obs, &PhiWeights::default(), 2000, 3, 1000).unwrap();
        assert!(summary.phi.value >= 0.0 && summary.phi.value <= 1.0);
        // Zero drift with sigma > 0 exits almost surely within the cap.
        assert!((summary.phi.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn all_truncated_reported() {
        let params = concave(0.0, 0.0, vec![1.0]);
        let err = mc_estimate(&params, &det_obs(1.0), &PhiWeights::default(), 10, 1, 5)
            .unwrap_err();
        assert_eq!(err, McError::AllTruncated);
    }

    #[test]
    fn invalid_constructions_are_rejected() {
        assert!(DriftSchedule::new(vec![], DriftExtension::HoldLast).is_err());
        assert!(DriftSchedule::new(vec![f64::NAN], DriftExtension::HoldLast).is_err());
        assert!(ProcessParams::new(
            -1.0,
            0.0,
            DriftSchedule::constant(0.0).unwrap(),
            Shape::Concave,
            ThresholdMode::ZeroSign
        )
        .is_err());
        assert!(ObservationModel::new(
            Interarrival::Exponential { mean: 0.0 },
            InitialDelay::Zero
        )
        .is_err());
        assert!(ObservationModel::new(
            Interarrival::Deterministic { step: -1.0 },
            InitialDelay::Zero
        )
        .is_err());
    }

    #[test]
    fn drift_extension_rules() {
        let hold = DriftSchedule::new(vec![1.0, 2.0], DriftExtension::HoldLast).unwrap();
        assert_eq!(hold.slope(1), 1.0);
        assert_eq!(hold.slope(2), 2.0);
        assert_eq!(hold.slope(9), 2.0);
        let cyc = DriftSchedule::new(vec![1.0, 2.0], DriftExtension::Cycle).unwrap();
        assert_eq!(cyc.slope(3), 1.0);
        assert_eq!(cyc.slope(4), 2.0);
    }
}
