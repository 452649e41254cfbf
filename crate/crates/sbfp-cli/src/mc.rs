//! Parallel Monte Carlo driver.
//!
//! Replications are independent substreams, so they fan out over rayon and
//! reassemble in index order; the summary is bit-identical to the core's
//! sequential `mc_estimate` at any thread count.

use rayon::prelude::*;
use sbfp_core::process::{
    replicate, summarize, McError, McSummary, ObservationModel, PhiWeights, ProcessParams,
    RepOutcome,
};

pub fn mc_estimate_parallel(
    params: &ProcessParams,
    obs: &ObservationModel,
    weights: &PhiWeights,
    reps: usize,
    seed: u64,
    max_steps: usize,
) -> Result<McSummary, McError> {
    assert!(reps >= 1, "at least one replication");
    let outcomes: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|rep| replicate(params, obs, seed, rep as u64, max_steps))
        .collect();
    summarize(&outcomes, weights, obs)
}

/// Per-replication summaries, computed in parallel, in index order.
pub fn replicate_all(
    params: &ProcessParams,
    obs: &ObservationModel,
    reps: usize,
    seed: u64,
    max_steps: usize,
) -> Vec<RepOutcome> {
    (0..reps)
        .into_par_iter()
        .map(|rep| replicate(params, obs, seed, rep as u64, max_steps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use sbfp_core::process::{mc_estimate, DriftSchedule, Shape, ThresholdMode};

    #[test]
    fn parallel_equals_sequential_bitwise() {
        let params = ProcessParams::new(
            1.0,
            0.0,
            DriftSchedule::constant(0.0).unwrap(),
            Shape::Concave,
            ThresholdMode::ZeroSign,
        )
        .unwrap();
        let obs = ObservationModel::exponential(1.0).unwrap();
        let weights = PhiWeights { u: 0.4, v: 0.0, vartheta: 0.1, theta: 0.0 };
        let sequential = mc_estimate(&params, &obs, &weights, 10_000, 5, 1000).unwrap();
        for threads in [1usize, 2, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let parallel = pool
                .install(|| mc_estimate_parallel(&params, &obs, &weights, 10_000, 5, 1000))
                .unwrap();
            assert_eq!(sequential, parallel, "{threads} threads");
        }
    }
}
