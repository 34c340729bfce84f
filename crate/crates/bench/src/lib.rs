//! Shared fixtures for the kernel benchmarks.

use regpinn::{synth_generate, CrossingRecord, EmpiricalModel, ShueForm, UniformRange};

/// Noiseless synthetic crossings over the study driver ranges.
pub fn crossings(n: usize, seed: u64) -> Vec<CrossingRecord> {
    let model = EmpiricalModel::Shue(ShueForm::default());
    synth_generate(
        &model,
        n,
        0.0,
        seed,
        UniformRange::new(-12.0, 12.0).unwrap(),
        UniformRange::new(1.0, 7.0).unwrap(),
        UniformRange::new(0.0, 2.2).unwrap(),
    )
    .expect("fixture generation cannot fail")
    .records
}

/// Network-ready `(inputs, targets)` pulled out of merged records.
pub fn batches(records: &[CrossingRecord]) -> (Vec<[f64; 3]>, Vec<f64>) {
    records
        .iter()
        .map(|rec| {
            let d = rec.drivers.expect("synthetic records are merged");
            ([d.bz, d.dp, rec.polar.theta], rec.polar.r)
        })
        .unzip()
}
