//! Regenerates `data/sample.csv`, the bundled synthetic price series.
//!
//! The series is a simulated fluctuation path: 1000 daily observations from
//! 2020-01-01, starting level 100, volatility 0.1 per sqrt(day), drift
//! slope 1.0 per day switching to 1.48 for the final ten steps (so the
//! fitted pre-exit drift lands inside the first-turning-point window where
//! the explicit equation has a root), master seed 42.
//!
//!     cargo run -p sbfp-cli --example generate_sample

use std::fs;

use sbfp_core::process::{
    generate_path, DriftExtension, DriftSchedule, InitialDelay, Interarrival, ObservationModel,
    ProcessParams, Shape, ThresholdMode,
};

const EPOCH_2020_01_01: i64 = 1_577_836_800;
const SEED: u64 = 42;

fn main() {
    let mut drift = vec![1.0; 990];
    drift.push(1.48);
    let params = ProcessParams::new(
        0.1,
        100.0,
        DriftSchedule::new(drift, DriftExtension::HoldLast).unwrap(),
        Shape::Concave,
        ThresholdMode::ZeroSign,
    )
    .unwrap();
    let obs = ObservationModel::new(
        Interarrival::Deterministic { step: 1.0 },
        InitialDelay::Zero,
    )
    .unwrap();
    let path = generate_path(&params, &obs, SEED, 999);

    let mut csv = String::from("timestamp,value\n");
    for entry in path.entries() {
        let ts = EPOCH_2020_01_01 + (entry.tau as i64) * 86_400;
        csv.push_str(&format!("{ts},{:.6}\n", entry.position));
    }
    let out = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample.csv");
    fs::write(out, csv).expect("write sample");
    println!("wrote {out}");
}
