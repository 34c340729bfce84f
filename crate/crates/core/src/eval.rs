//! Model evaluation: overall and sliced RMSE, lambda sweeps, and
//! model-comparison tables.
//!
//! Every routine scores a [`BoundaryModel`] against crossing records by
//! comparing the predicted boundary distance to the observed radial
//! distance at each record's drivers and zenith angle.

use std::path::Path;

use crate::dataio::CrossingRecord;
use crate::error::{Error, Result};
use crate::models::{BoundaryModel, EmpiricalModel, ShueForm};
use crate::train::{split, train_reg_pinn, TrainConfig};

/// Root-mean-square prediction error over all records, in Re.
pub fn rmse(model: &dyn BoundaryModel, records: &[CrossingRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty record set".into()));
    }
    let mut sum_sq = 0.0;
    for (i, rec) in records.iter().enumerate() {
        let d = rec.drivers.ok_or_else(|| {
            Error::Config(format!("record {i} has no drivers; merge before evaluating"))
        })?;
        let pred = model.predict_r(d.bz, d.dp, rec.polar.theta)?;
        let e = pred - rec.polar.r;
        sum_sq += e * e;
    }
    Ok((sum_sq / records.len() as f64).sqrt())
}

/// Axis a sliced-error curve is binned along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinAxis {
    /// Zenith angle, radians.
    Theta,
    /// Dynamic pressure, nPa.
    Dp,
    /// IMF north-south component, nT.
    Bz,
}

impl BinAxis {
    fn value(&self, rec: &CrossingRecord) -> Result<f64> {
        match self {
            BinAxis::Theta => Ok(rec.polar.theta),
            BinAxis::Dp => rec
                .drivers
                .map(|d| d.dp)
                .ok_or_else(|| Error::Config("record has no drivers".into())),
            BinAxis::Bz => rec
                .drivers
                .map(|d| d.bz)
                .ok_or_else(|| Error::Config("record has no drivers".into())),
        }
    }

    /// Column label used in report CSVs.
    fn label(&self) -> &'static str {
        match self {
            BinAxis::Theta => "theta_deg",
            BinAxis::Dp => "dp_npa",
            BinAxis::Bz => "bz_nt",
        }
    }
}

/// One slice of a binned-error curve. `rmse` is `None` for empty bins.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub rmse: Option<f64>,
}

impl RmseBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// RMSE per half-open bin `[edges[i], edges[i+1])` along `axis`. Records
/// outside the edge span are ignored.
pub fn binned_rmse(
    model: &dyn BoundaryModel,
    records: &[CrossingRecord],
    axis: BinAxis,
    edges: &[f64],
) -> Result<Vec<RmseBin>> {
    if edges.len() < 2 {
        return Err(Error::Config("need at least two bin edges".into()));
    }
    for pair in edges.windows(2) {
        if !pair[0].is_finite() || !pair[1].is_finite() || pair[0] >= pair[1] {
            return Err(Error::Config(format!(
                "bin edges must be finite and strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    let n_bins = edges.len() - 1;
    let mut sum_sq = vec![0.0f64; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (i, rec) in records.iter().enumerate() {
        let d = rec.drivers.ok_or_else(|| {
            Error::Config(format!("record {i} has no drivers; merge before evaluating"))
        })?;
        let v = axis.value(rec)?;
        // Linear scan: bin counts are small (tens at most).
        let Some(b) = (0..n_bins).find(|&b| edges[b] <= v && v < edges[b + 1]) else {
            continue;
        };
        let pred = model.predict_r(d.bz, d.dp, rec.polar.theta)?;
        let e = pred - rec.polar.r;
        sum_sq[b] += e * e;
        counts[b] += 1;
    }
    Ok((0..n_bins)
        .map(|b| RmseBin {
            lo: edges[b],
            hi: edges[b + 1],
            count: counts[b],
            rmse: if counts[b] > 0 {
                Some((sum_sq[b] / counts[b] as f64).sqrt())
            } else {
                None
            },
        })
        .collect())
}

/// Default edges for each axis: theta in 15-degree steps up to the tail
/// cutoff, bz in 3-nT steps, dp in 1-nPa steps across the valid ranges.
pub fn default_edges(axis: BinAxis) -> Vec<f64> {
    match axis {
        BinAxis::Theta => (0..12)
            .map(|i| (i as f64 * 15.0).to_radians())
            .collect(),
        BinAxis::Bz => (0..12).map(|i| -18.0 + 3.0 * i as f64).collect(),
        BinAxis::Dp => (0..9).map(|i| 0.5 + i as f64).collect(),
    }
}

/// Radians to display degrees, snapping values within 1e-9 of an integer
/// so round-trip noise does not leak into reports.
fn display_degrees(v: f64) -> f64 {
    let d = v.to_degrees();
    let snapped = d.round();
    if (d - snapped).abs() < 1e-9 {
        snapped
    } else {
        d
    }
}

/// Overall RMSE plus sliced curves along theta, dp, and bz.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model_id: String,
    pub dataset_id: String,
    pub n_records: usize,
    pub rmse: f64,
    pub theta_curve: Vec<RmseBin>,
    pub dp_curve: Vec<RmseBin>,
    pub bz_curve: Vec<RmseBin>,
}

/// Score `model` on `records`: overall RMSE and the three default
/// sliced-error curves.
pub fn evaluate(
    model: &dyn BoundaryModel,
    records: &[CrossingRecord],
    dataset_id: &str,
) -> Result<EvalReport> {
    Ok(EvalReport {
        model_id: model.model_id(),
        dataset_id: dataset_id.to_string(),
        n_records: records.len(),
        rmse: rmse(model, records)?,
        theta_curve: binned_rmse(model, records, BinAxis::Theta, &default_edges(BinAxis::Theta))?,
        dp_curve: binned_rmse(model, records, BinAxis::Dp, &default_edges(BinAxis::Dp))?,
        bz_curve: binned_rmse(model, records, BinAxis::Bz, &default_edges(BinAxis::Bz))?,
    })
}

impl EvalReport {
    /// One CSV with all three curves; theta bins are reported in degrees.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("axis,bin_lo,bin_hi,bin_center,count,rmse_re\n");
        for (axis, curve) in [
            (BinAxis::Theta, &self.theta_curve),
            (BinAxis::Bz, &self.bz_curve),
            (BinAxis::Dp, &self.dp_curve),
        ] {
            for bin in curve {
                let (lo, hi, center) = if axis == BinAxis::Theta {
                    (
                        display_degrees(bin.lo),
                        display_degrees(bin.hi),
                        display_degrees(bin.center()),
                    )
                } else {
                    (bin.lo, bin.hi, bin.center())
                };
                let rmse = bin.rmse.map_or(String::new(), |v| format!("{v}"));
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    axis.label(),
                    lo,
                    hi,
                    center,
                    bin.count,
                    rmse
                ));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Human-readable summary.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model: {}\n", self.model_id));
        out.push_str(&format!("dataset: {}\n", self.dataset_id));
        out.push_str(&format!("records: {}\n", self.n_records));
        out.push_str(&format!("rmse_re: {:.6}\n", self.rmse));
        for (name, axis, curve) in [
            ("theta_deg", BinAxis::Theta, &self.theta_curve),
            ("bz_nt", BinAxis::Bz, &self.bz_curve),
            ("dp_npa", BinAxis::Dp, &self.dp_curve),
        ] {
            out.push_str(&format!("curve {name}:\n"));
            for bin in curve {
                let (lo, hi) = if axis == BinAxis::Theta {
                    (display_degrees(bin.lo), display_degrees(bin.hi))
                } else {
                    (bin.lo, bin.hi)
                };
                match bin.rmse {
                    Some(v) => out.push_str(&format!(
                        "  [{lo:7.2}, {hi:7.2})  n={:<6} rmse={v:.6}\n",
                        bin.count
                    )),
                    None => out.push_str(&format!("  [{lo:7.2}, {hi:7.2})  n=0      rmse=-\n")),
                }
            }
        }
        out
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render_text()).map_err(|e| Error::io(path, e))
    }
}

/// One lambda's scores under both masking protocols.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    /// Test RMSE when 80% of records train and 20% are held out.
    pub rmse_mask20: f64,
    /// Test RMSE when only 20% train and 80% are held out.
    pub rmse_mask80: f64,
}

/// Results of a lambda sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("lambda,protocol,rmse_re\n");
        for row in &self.rows {
            out.push_str(&format!("{},mask20,{}\n", row.lambda, row.rmse_mask20));
            out.push_str(&format!("{},mask80,{}\n", row.lambda, row.rmse_mask80));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// The lambda with the lowest held-out RMSE under the given protocol
    /// (`true` selects the data-poor mask80 protocol).
    pub fn best_lambda(&self, mask80: bool) -> Option<f64> {
        self.rows
            .iter()
            .min_by(|a, b| {
                let (x, y) = if mask80 {
                    (a.rmse_mask80, b.rmse_mask80)
                } else {
                    (a.rmse_mask20, b.rmse_mask20)
                };
                x.total_cmp(&y)
            })
            .map(|r| r.lambda)
    }
}

/// Train at each lambda under two protocols (80% train / 20% held out,
/// then 20% train / 80% held out) and score the held-out records. All
/// other hyperparameters come from `base`; the seed is shared so every
/// run sees the same splits and initialization.
pub fn lambda_sweep(
    records: &[CrossingRecord],
    base: &TrainConfig,
    lambdas: &[f64],
) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(Error::Config("lambda sweep needs at least one lambda".into()));
    }
    for &l in lambdas {
        if !l.is_finite() || l < 0.0 {
            return Err(Error::Config(format!(
                "sweep lambdas must be finite and nonnegative, got {l}"
            )));
        }
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut scores = [0.0f64; 2];
        for (slot, fraction) in [(0usize, 0.8f64), (1, 0.2)] {
            let config = TrainConfig {
                lambda,
                split_fraction: fraction,
                ..base.clone()
            };
            let result = train_reg_pinn(records, &config)?;
            let held_out: Vec<CrossingRecord> = result
                .test_indices
                .iter()
                .map(|&i| records[i].clone())
                .collect();
            scores[slot] = rmse(&result.mlp, &held_out)?;
        }
        rows.push(SweepRow {
            lambda,
            rmse_mask20: scores[0],
            rmse_mask80: scores[1],
        });
    }
    Ok(SweepResult { rows })
}

/// A model entered into a comparison table: either a fixed empirical
/// model or a network trained fresh for each protocol.
#[derive(Debug, Clone)]
pub enum ComparisonEntry {
    Empirical { label: String, model: EmpiricalModel },
    Trained { label: String, config: TrainConfig },
}

impl ComparisonEntry {
    pub fn label(&self) -> &str {
        match self {
            ComparisonEntry::Empirical { label, .. } => label,
            ComparisonEntry::Trained { label, .. } => label,
        }
    }
}

/// One model's held-out RMSE and its reduction versus the baseline, per
/// training fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub rmse: Vec<f64>,
    /// `1 - rmse / baseline_rmse` per fraction; 0 for the baseline row.
    pub reduction_vs_baseline: Vec<f64>,
}

/// Rows of models scored on the same held-out splits.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub train_fractions: Vec<f64>,
    pub rows: Vec<ComparisonRow>,
}

/// Score every entry on each protocol's held-out split. The default
/// standoff model is always prepended as the baseline row; a `Trained`
/// entry is retrained per fraction with that fraction and the shared
/// seed, so its test split matches the one the fixed models are scored
/// on.
pub fn comparison_table(
    records: &[CrossingRecord],
    entries: &[ComparisonEntry],
    train_fractions: &[f64],
    seed: u64,
) -> Result<ComparisonTable> {
    if train_fractions.is_empty() {
        return Err(Error::Config("comparison needs at least one train fraction".into()));
    }
    let baseline = EmpiricalModel::Shue(ShueForm::default());

    // Held-out record sets, one per protocol.
    let mut held_out: Vec<Vec<CrossingRecord>> = Vec::with_capacity(train_fractions.len());
    for &fraction in train_fractions {
        let (_, test_idx) = split(records.len(), fraction, seed)?;
        held_out.push(test_idx.iter().map(|&i| records[i].clone()).collect());
    }

    let baseline_rmse: Vec<f64> = held_out
        .iter()
        .map(|h| rmse(&baseline, h))
        .collect::<Result<_>>()?;

    let mut rows = vec![ComparisonRow {
        label: "baseline".to_string(),
        rmse: baseline_rmse.clone(),
        reduction_vs_baseline: vec![0.0; train_fractions.len()],
    }];

    for entry in entries {
        let mut scores = Vec::with_capacity(train_fractions.len());
        for (k, &fraction) in train_fractions.iter().enumerate() {
            let score = match entry {
                ComparisonEntry::Empirical { model, .. } => rmse(model, &held_out[k])?,
                ComparisonEntry::Trained { config, .. } => {
                    let run_config = TrainConfig {
                        split_fraction: fraction,
                        seed,
                        ..config.clone()
                    };
                    let result = train_reg_pinn(records, &run_config)?;
                    rmse(&result.mlp, &held_out[k])?
                }
            };
            scores.push(score);
        }
        let reduction = scores
            .iter()
            .zip(&baseline_rmse)
            .map(|(s, b)| 1.0 - s / b)
            .collect();
        rows.push(ComparisonRow {
            label: entry.label().to_string(),
            rmse: scores,
            reduction_vs_baseline: reduction,
        });
    }

    Ok(ComparisonTable {
        train_fractions: train_fractions.to_vec(),
        rows,
    })
}

impl ComparisonTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("model,train_fraction,rmse_re,reduction_vs_baseline\n");
        for row in &self.rows {
            for (k, &fraction) in self.train_fractions.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row.label, fraction, row.rmse[k], row.reduction_vs_baseline[k]
                ));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn render_text(&self) -> String {
        let mut out = String::from("model");
        for f in &self.train_fractions {
            out.push_str(&format!("  rmse@{f}  red@{f}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.label);
            for k in 0..self.train_fractions.len() {
                out.push_str(&format!(
                    "  {:.4}  {:+.1}%",
                    row.rmse[k],
                    100.0 * row.reduction_vs_baseline[k]
                ));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synth_generate, GsmPosition, UniformRange};
    use crate::models::{DriverInput, PolarPoint, THETA_MAX};
    use crate::train::RegModel;

    fn synth_records(n: usize, noise: f64, seed: u64) -> Vec<CrossingRecord> {
        synth_generate(
            &EmpiricalModel::Shue(ShueForm::default()),
            n,
            noise,
            seed,
            UniformRange::new(-12.0, 12.0).unwrap(),
            UniformRange::new(1.0, 7.0).unwrap(),
            UniformRange::new(0.0, 2.2).unwrap(),
        )
        .unwrap()
        .records
    }

    /// A model that always predicts a fixed radius, for hand-checkable
    /// errors.
    struct Constant(f64);

    impl BoundaryModel for Constant {
        fn predict_r(&self, _bz: f64, _dp: f64, _theta: f64) -> crate::error::Result<f64> {
            Ok(self.0)
        }
        fn model_id(&self) -> String {
            "constant".to_string()
        }
    }

    fn record_at(r: f64, theta: f64, bz: f64, dp: f64) -> CrossingRecord {
        CrossingRecord {
            timestamp: 0,
            pos: GsmPosition {
                x: r * theta.cos(),
                y: 0.0,
                z: r * theta.sin(),
            },
            polar: PolarPoint::new(r, theta).unwrap(),
            drivers: Some(DriverInput::new(bz, dp).unwrap()),
            source: "test".to_string(),
        }
    }

    #[test]
    fn rmse_matches_hand_value() {
        // Residuals 0, 3, 4 against a constant 10 predictor:
        // sqrt((0 + 9 + 16) / 3).
        let records = vec![
            record_at(10.0, 0.3, 0.0, 2.0),
            record_at(7.0, 0.8, 0.0, 2.0),
            record_at(14.0, 1.4, 0.0, 2.0),
        ];
        let value = rmse(&Constant(10.0), &records).unwrap();
        let expected = 2.8867513459481288;
        assert!((value - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn generating_model_scores_zero_on_noiseless_data() {
        let records = synth_records(200, 0.0, 41);
        let model = EmpiricalModel::Shue(ShueForm::default());
        assert!(rmse(&model, &records).unwrap() < 1e-9);
    }

    #[test]
    fn rmse_rejects_empty_and_unmerged_input() {
        assert!(rmse(&Constant(1.0), &[]).is_err());
        let mut records = vec![record_at(10.0, 0.3, 0.0, 2.0)];
        records[0].drivers = None;
        assert!(rmse(&Constant(1.0), &records).is_err());
    }

    #[test]
    fn binned_rmse_assigns_half_open_bins() {
        let records = vec![
            record_at(10.0, 0.3, -5.0, 2.0), // residual 2 -> bin 0
            record_at(14.0, 0.3, -5.0, 2.0), // residual 2 -> bin 0
            record_at(13.0, 1.0, -5.0, 2.0), // residual 1 -> bin 1 (edge value goes up)
            record_at(12.0, 1.7, -5.0, 2.0), // outside the edges: ignored
        ];
        let bins =
            binned_rmse(&Constant(12.0), &records, BinAxis::Theta, &[0.0, 1.0, 1.5]).unwrap();
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].count, 2);
        assert!((bins[0].rmse.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(bins[1].count, 1);
        assert!((bins[1].rmse.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(bins[0].center(), 0.5);
    }

    #[test]
    fn empty_bins_report_none() {
        let records = vec![record_at(10.0, 0.3, -5.0, 2.0)];
        let bins =
            binned_rmse(&Constant(10.0), &records, BinAxis::Theta, &[0.0, 0.2, 0.4]).unwrap();
        assert_eq!(bins[0].count, 0);
        assert_eq!(bins[0].rmse, None);
        assert_eq!(bins[1].count, 1);
    }

    #[test]
    fn bad_edges_are_rejected() {
        let records = vec![record_at(10.0, 0.3, -5.0, 2.0)];
        let model = Constant(10.0);
        assert!(binned_rmse(&model, &records, BinAxis::Theta, &[0.0]).is_err());
        assert!(binned_rmse(&model, &records, BinAxis::Theta, &[1.0, 0.5]).is_err());
        assert!(binned_rmse(&model, &records, BinAxis::Theta, &[0.0, 0.0]).is_err());
        assert!(binned_rmse(&model, &records, BinAxis::Theta, &[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn recombination_identity_holds() {
        // n * rmse^2 == sum over bins of count_b * rmse_b^2 when the bins
        // cover every record.
        let records = synth_records(300, 0.4, 42);
        let model = EmpiricalModel::Shue(ShueForm::default());
        let total = rmse(&model, &records).unwrap();
        let edges = default_edges(BinAxis::Bz);
        let bins = binned_rmse(&model, &records, BinAxis::Bz, &edges).unwrap();
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), records.len());
        let recombined: f64 = bins
            .iter()
            .filter_map(|b| b.rmse.map(|v| b.count as f64 * v * v))
            .sum();
        let lhs = records.len() as f64 * total * total;
        assert!((lhs - recombined).abs() <= 1e-9 * lhs.max(1.0));
    }

    #[test]
    fn default_edges_cover_the_valid_ranges() {
        let theta = default_edges(BinAxis::Theta);
        assert_eq!(theta.len(), 12);
        assert_eq!(theta[0], 0.0);
        assert!((theta[11] - THETA_MAX).abs() < 1e-12);
        let bz = default_edges(BinAxis::Bz);
        assert_eq!((bz[0], bz[11]), (-18.0, 15.0));
        let dp = default_edges(BinAxis::Dp);
        assert_eq!((dp[0], dp[8]), (0.5, 8.5));
    }

    #[test]
    fn evaluate_produces_full_report() {
        let records = synth_records(250, 0.3, 43);
        let model = EmpiricalModel::Shue(ShueForm::default());
        let report = evaluate(&model, &records, "synth-43").unwrap();
        assert_eq!(report.model_id, "shue");
        assert_eq!(report.n_records, 250);
        assert_eq!(report.theta_curve.len(), 11);
        assert_eq!(report.bz_curve.len(), 11);
        assert_eq!(report.dp_curve.len(), 8);

        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("report.csv");
        report.write_csv(&csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("axis,bin_lo,bin_hi,bin_center,count,rmse_re\n"));
        assert_eq!(text.lines().count(), 1 + 11 + 11 + 8);
        // Theta rows are reported in degrees.
        assert!(text.lines().nth(1).unwrap().starts_with("theta_deg,0,15,"));

        let rendered = report.render_text();
        assert!(rendered.contains("model: shue"));
        assert!(rendered.contains("curve theta_deg:"));
    }

    fn sweep_base() -> TrainConfig {
        TrainConfig {
            layer_sizes: vec![3, 8, 1],
            max_epochs: 3,
            batch_size: 64,
            regularizer: RegModel::Shue(ShueForm::default()),
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn lambda_sweep_scores_both_protocols() {
        let records = synth_records(120, 0.3, 44);
        let result = lambda_sweep(&records, &sweep_base(), &[0.0, 1.0]).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.rows[0].lambda, 0.0);
        assert_eq!(result.rows[1].lambda, 1.0);
        for row in &result.rows {
            assert!(row.rmse_mask20.is_finite() && row.rmse_mask20 > 0.0);
            assert!(row.rmse_mask80.is_finite() && row.rmse_mask80 > 0.0);
        }
        assert!(result.best_lambda(false).is_some());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        result.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "lambda,protocol,rmse_re");
        assert_eq!(lines.count(), 4);
        assert!(text.contains(",mask20,"));
        assert!(text.contains(",mask80,"));
    }

    #[test]
    fn lambda_sweep_rejects_bad_lambdas() {
        let records = synth_records(60, 0.3, 45);
        assert!(lambda_sweep(&records, &sweep_base(), &[]).is_err());
        assert!(lambda_sweep(&records, &sweep_base(), &[-0.5]).is_err());
        assert!(lambda_sweep(&records, &sweep_base(), &[f64::NAN]).is_err());
    }

    #[test]
    fn comparison_table_has_zero_reduction_baseline() {
        let records = synth_records(120, 0.3, 46);
        let entries = vec![
            ComparisonEntry::Empirical {
                label: "overfit".to_string(),
                model: EmpiricalModel::Overfit(Default::default()),
            },
            ComparisonEntry::Trained {
                label: "network".to_string(),
                config: sweep_base(),
            },
        ];
        let table = comparison_table(&records, &entries, &[0.8, 0.2], 11).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows[0].label, "baseline");
        assert_eq!(table.rows[0].reduction_vs_baseline, vec![0.0, 0.0]);
        for row in &table.rows {
            assert_eq!(row.rmse.len(), 2);
            assert!(row.rmse.iter().all(|v| v.is_finite() && *v >= 0.0));
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        table.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("model,train_fraction,rmse_re,reduction_vs_baseline\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 2);
        assert!(!table.render_text().is_empty());
    }
}
