//! Dataset ingestion and preparation.
//!
//! Raw inputs are two CSV products: a crossing list (timestamped GSM
//! positions) and a 5-minute solar-wind series. This module parses both,
//! matches each crossing to the solar-wind sample whose window contains it,
//! filters to the driver range the empirical fits are valid over, bins the
//! merged records with overlapping sliding windows, and can synthesize
//! crossing sets from any boundary model for controlled experiments.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::models::{
    csv_error, BoundaryModel, DriverInput, PolarPoint, ShueForm, BZ_VALID_RANGE, DP_VALID_RANGE,
    THETA_MAX,
};

/// Cadence of the solar-wind product, seconds.
pub const SOLAR_WIND_CADENCE_S: i64 = 300;

/// Spacecraft position in geocentric solar magnetospheric coordinates, Re.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsmPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GsmPosition {
    pub fn magnitude(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Convert a GSM position to the axisymmetric polar frame.
///
/// Only the angle from the +x axis matters; the y and z components enter
/// through the radius. Fails on non-finite components, the origin, and
/// positions on the negative x axis (`theta = pi` is outside the frame).
pub fn to_polar(pos: GsmPosition) -> Result<PolarPoint> {
    for (name, v) in [("x", pos.x), ("y", pos.y), ("z", pos.z)] {
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "GSM {name} must be finite, got {v}"
            )));
        }
    }
    let r = pos.magnitude();
    if r == 0.0 {
        return Err(Error::Domain("GSM position must be nonzero".into()));
    }
    let theta = (pos.x / r).clamp(-1.0, 1.0).acos();
    PolarPoint::new(r, theta)
}

/// One magnetopause crossing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingRecord {
    /// UTC epoch seconds.
    pub timestamp: i64,
    pub pos: GsmPosition,
    /// Polar-frame view of `pos`.
    pub polar: PolarPoint,
    /// Matched solar-wind drivers; `None` until merged.
    pub drivers: Option<DriverInput>,
    /// Mission tag carried through from the input file.
    pub source: String,
}

/// One 5-minute solar-wind sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SolarWindSample {
    /// UTC epoch seconds, divisible by the cadence.
    pub timestamp: i64,
    pub bz: f64,
    pub dp: f64,
    /// Set when either field carried a fill value or was non-finite;
    /// flagged samples never match crossings.
    pub flagged: bool,
}

/// Sentinels marking missing data in the solar-wind product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillValues {
    pub bz: f64,
    pub dp: f64,
}

impl Default for FillValues {
    fn default() -> Self {
        Self { bz: 99.99, dp: 9999.99 }
    }
}

/// One issue attached to an input row: a rejected row or a normalization
/// warning. `line` is the 1-based line in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

/// Parse output: accepted rows plus per-row issues. Structural problems
/// (bad header, unreadable fields) abort with a hard error instead.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub rows: Vec<T>,
    pub issues: Vec<RowIssue>,
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got_cols: Vec<&str> = got.iter().map(str::trim).collect();
    if got_cols != want {
        return Err(Error::parse(
            path,
            1,
            format!("expected header {want:?}, got {got_cols:?}"),
        ));
    }
    Ok(())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field_f64(path: &Path, line: u64, name: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("field {name}: not a float: {raw:?}")))
}

fn parse_field_timestamp(path: &Path, line: u64, raw: &str) -> Result<i64> {
    let dt = DateTime::parse_from_rfc3339(raw.trim())
        .map_err(|e| Error::parse(path, line, format!("field timestamp: {e}: {raw:?}")))?;
    Ok(dt.timestamp())
}

/// Parse a crossing list with header `timestamp,x_gsm_re,y_gsm_re,z_gsm_re,source`.
///
/// Rows whose values parse but are physically unusable (non-finite
/// positions, the origin, positions on the negative x axis, pre-epoch
/// timestamps) are rejected with their line numbers recorded in `issues`.
pub fn parse_crossings(path: &Path) -> Result<Parsed<CrossingRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    check_header(
        path,
        rdr.headers().map_err(|e| csv_error(path, e))?,
        &["timestamp", "x_gsm_re", "y_gsm_re", "z_gsm_re", "source"],
    )?;

    let mut rows = Vec::new();
    let mut issues = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = record_line(&rec);
        if rec.len() != 5 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 5 fields, got {}", rec.len()),
            ));
        }
        let timestamp = parse_field_timestamp(path, line, &rec[0])?;
        let x = parse_field_f64(path, line, "x_gsm_re", &rec[1])?;
        let y = parse_field_f64(path, line, "y_gsm_re", &rec[2])?;
        let z = parse_field_f64(path, line, "z_gsm_re", &rec[3])?;
        let source = rec[4].trim().to_string();

        if timestamp < 0 {
            issues.push(RowIssue {
                line,
                message: format!("rejected: timestamp before epoch ({timestamp})"),
            });
            continue;
        }
        let pos = GsmPosition { x, y, z };
        match to_polar(pos) {
            Ok(polar) => rows.push(CrossingRecord {
                timestamp,
                pos,
                polar,
                drivers: None,
                source,
            }),
            Err(e) => issues.push(RowIssue {
                line,
                message: format!("rejected: {e}"),
            }),
        }
    }
    Ok(Parsed { rows, issues })
}

/// Parse a solar-wind series with header `timestamp,bz_nt,dp_npa`.
///
/// Fill values (bitwise match against `fill`) and non-finite or
/// non-positive readings flag the sample rather than rejecting it, so the
/// time base stays intact. Timestamps not aligned to the 5-minute cadence
/// are snapped down to the window start with a warning. Output is sorted
/// by timestamp.
pub fn parse_solarwind(path: &Path, fill: FillValues) -> Result<Parsed<SolarWindSample>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    check_header(
        path,
        rdr.headers().map_err(|e| csv_error(path, e))?,
        &["timestamp", "bz_nt", "dp_npa"],
    )?;

    let mut rows: Vec<SolarWindSample> = Vec::new();
    let mut issues = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 3 fields, got {}", rec.len()),
            ));
        }
        let raw_ts = parse_field_timestamp(path, line, &rec[0])?;
        let bz = parse_field_f64(path, line, "bz_nt", &rec[1])?;
        let dp = parse_field_f64(path, line, "dp_npa", &rec[2])?;

        if raw_ts < 0 {
            issues.push(RowIssue {
                line,
                message: format!("rejected: timestamp before epoch ({raw_ts})"),
            });
            continue;
        }
        let timestamp = raw_ts.div_euclid(SOLAR_WIND_CADENCE_S) * SOLAR_WIND_CADENCE_S;
        if timestamp != raw_ts {
            issues.push(RowIssue {
                line,
                message: format!(
                    "warning: timestamp {raw_ts} not on the {SOLAR_WIND_CADENCE_S}s cadence, snapped to {timestamp}"
                ),
            });
        }

        let mut flagged = false;
        let note = |msg: String, issues: &mut Vec<RowIssue>| {
            issues.push(RowIssue { line, message: msg });
        };
        if bz == fill.bz || dp == fill.dp {
            flagged = true;
            note("warning: fill value detected, sample flagged".into(), &mut issues);
        } else if !bz.is_finite() || !dp.is_finite() {
            flagged = true;
            note("warning: non-finite reading, sample flagged".into(), &mut issues);
        } else if dp <= 0.0 {
            flagged = true;
            note(format!("warning: non-positive pressure {dp}, sample flagged"), &mut issues);
        }

        rows.push(SolarWindSample { timestamp, bz, dp, flagged });
    }
    rows.sort_by_key(|s| s.timestamp);
    Ok(Parsed { rows, issues })
}

/// Result of matching crossings against the solar-wind series.
#[derive(Debug, Clone)]
pub struct MergeOutcome {
    /// Crossings that found an unflagged sample, with drivers filled in.
    pub records: Vec<CrossingRecord>,
    /// Crossings dropped for a missing or flagged window.
    pub dropped: usize,
}

/// Match each crossing to the solar-wind sample whose 5-minute window
/// `[t, t + 300)` contains the crossing timestamp.
///
/// Crossings with no usable sample are dropped (counted, not errors).
/// When several samples share a window start, an unflagged one wins;
/// otherwise the first in input order. Merging already-merged records is
/// idempotent: drivers are recomputed from the same windows.
pub fn merge(crossings: &[CrossingRecord], samples: &[SolarWindSample]) -> MergeOutcome {
    let mut by_window: HashMap<i64, &SolarWindSample> = HashMap::new();
    for s in samples {
        match by_window.get(&s.timestamp) {
            None => {
                by_window.insert(s.timestamp, s);
            }
            Some(existing) if existing.flagged && !s.flagged => {
                by_window.insert(s.timestamp, s);
            }
            Some(_) => {}
        }
    }

    let mut records = Vec::with_capacity(crossings.len());
    let mut dropped = 0;
    for c in crossings {
        let window = c.timestamp.div_euclid(SOLAR_WIND_CADENCE_S) * SOLAR_WIND_CADENCE_S;
        match by_window.get(&window) {
            Some(s) if !s.flagged => {
                let mut rec = c.clone();
                rec.drivers = Some(DriverInput { bz: s.bz, dp: s.dp });
                records.push(rec);
            }
            _ => dropped += 1,
        }
    }
    MergeOutcome { records, dropped }
}

/// Overlapping sliding-window binning layout over the driver plane.
///
/// Windows on each axis start at `lo`, advance by `stride`, and keep their
/// full `width`: the last window is the one whose upper edge still fits
/// inside the range (with a 1e-9 slack for float drift). Membership is
/// half-open, `lo <= v < hi`, so interior records fall in several
/// overlapping windows per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub bz_width: f64,
    pub bz_stride: f64,
    pub dp_width: f64,
    pub dp_stride: f64,
    pub bz_range: (f64, f64),
    pub dp_range: (f64, f64),
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            bz_width: 3.0,
            bz_stride: 1.0,
            dp_width: 2.0,
            dp_stride: 0.5,
            bz_range: BZ_VALID_RANGE,
            dp_range: DP_VALID_RANGE,
        }
    }
}

/// Slack absorbing float drift when deciding whether a window still fits.
const WINDOW_EDGE_SLACK: f64 = 1e-9;

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bz_width", self.bz_width),
            ("bz_stride", self.bz_stride),
            ("dp_width", self.dp_width),
            ("dp_stride", self.dp_stride),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        for (name, (lo, hi), width) in [
            ("bz_range", self.bz_range, self.bz_width),
            ("dp_range", self.dp_range, self.dp_width),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::Config(format!(
                    "{name} must be finite with lo < hi, got ({lo}, {hi})"
                )));
            }
            if hi - lo + WINDOW_EDGE_SLACK < width {
                return Err(Error::Config(format!(
                    "{name} ({lo}, {hi}) cannot hold a window of width {width}"
                )));
            }
        }
        Ok(())
    }

    /// Window edges `(lo, hi)` along one axis.
    fn axis_windows(lo: f64, hi: f64, width: f64, stride: f64) -> Vec<(f64, f64)> {
        let mut windows = Vec::new();
        let mut j = 0usize;
        loop {
            let start = lo + j as f64 * stride;
            if start + width > hi + WINDOW_EDGE_SLACK {
                break;
            }
            windows.push((start, start + width));
            j += 1;
        }
        windows
    }

    pub fn bz_windows(&self) -> Vec<(f64, f64)> {
        Self::axis_windows(self.bz_range.0, self.bz_range.1, self.bz_width, self.bz_stride)
    }

    pub fn dp_windows(&self) -> Vec<(f64, f64)> {
        Self::axis_windows(self.dp_range.0, self.dp_range.1, self.dp_width, self.dp_stride)
    }
}

/// Keep only records whose drivers fall strictly inside the spec's ranges.
///
/// Records without drivers are dropped (their range is unknown). Applying
/// the filter twice changes nothing.
pub fn filter_range(records: Vec<CrossingRecord>, spec: &BinSpec) -> Vec<CrossingRecord> {
    records
        .into_iter()
        .filter(|rec| match rec.drivers {
            Some(d) => {
                d.bz > spec.bz_range.0
                    && d.bz < spec.bz_range.1
                    && d.dp > spec.dp_range.0
                    && d.dp < spec.dp_range.1
            }
            None => false,
        })
        .collect()
}

/// One sliding window with its member records and aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub bz_lo: f64,
    pub bz_hi: f64,
    pub dp_lo: f64,
    pub dp_hi: f64,
    /// Indices into the record slice handed to [`bin_records`].
    pub members: Vec<usize>,
    /// Aggregates are NaN for empty bins.
    pub mean_bz: f64,
    pub mean_dp: f64,
    /// Mean standoff estimate: each member's observed radius mapped to
    /// `theta = 0` by inverting the boundary shape with the default
    /// single-tanh flaring at the member's own drivers.
    pub mean_r0_proxy: f64,
}

/// Assign merged records to every overlapping window that contains them.
///
/// Bins are ordered bz-major (all dp windows for the first bz window
/// first). Each record must carry drivers.
pub fn bin_records(records: &[CrossingRecord], spec: &BinSpec) -> Result<Vec<Bin>> {
    spec.validate()?;
    let flaring = ShueForm::default();
    let mut drivers = Vec::with_capacity(records.len());
    let mut proxies = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let d = rec.drivers.ok_or_else(|| {
            Error::Config(format!("record {i} has no drivers; merge before binning"))
        })?;
        drivers.push(d);
        let alpha = flaring.params(d)?.alpha;
        let factor = (2.0 / (1.0 + rec.polar.theta.cos())).powf(alpha);
        proxies.push(rec.polar.r / factor);
    }

    let bz_windows = spec.bz_windows();
    let dp_windows = spec.dp_windows();
    let mut bins = Vec::with_capacity(bz_windows.len() * dp_windows.len());
    for &(bz_lo, bz_hi) in &bz_windows {
        for &(dp_lo, dp_hi) in &dp_windows {
            let members: Vec<usize> = drivers
                .iter()
                .enumerate()
                .filter(|(_, d)| {
                    d.bz >= bz_lo && d.bz < bz_hi && d.dp >= dp_lo && d.dp < dp_hi
                })
                .map(|(i, _)| i)
                .collect();
            let n = members.len() as f64;
            let (mean_bz, mean_dp, mean_r0_proxy) = if members.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                (
                    members.iter().map(|&i| drivers[i].bz).sum::<f64>() / n,
                    members.iter().map(|&i| drivers[i].dp).sum::<f64>() / n,
                    members.iter().map(|&i| proxies[i]).sum::<f64>() / n,
                )
            };
            bins.push(Bin {
                bz_lo,
                bz_hi,
                dp_lo,
                dp_hi,
                members,
                mean_bz,
                mean_dp,
                mean_r0_proxy,
            });
        }
    }
    Ok(bins)
}

/// Write a bin summary table. Aggregates of empty bins are left blank.
pub fn write_bins(path: &Path, bins: &[Bin]) -> Result<()> {
    let mut out = String::from("bz_lo,bz_hi,dp_lo,dp_hi,count,mean_bz,mean_dp,mean_r0_proxy\n");
    let field = |v: f64| if v.is_nan() { String::new() } else { format!("{v}") };
    for bin in bins {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            bin.bz_lo,
            bin.bz_hi,
            bin.dp_lo,
            bin.dp_hi,
            bin.members.len(),
            field(bin.mean_bz),
            field(bin.mean_dp),
            field(bin.mean_r0_proxy),
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Half-open uniform sampling range `[lo, hi)`; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::Config(format!(
                "uniform range must be finite with lo <= hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    fn contained_in(&self, name: &str, (lo, hi): (f64, f64)) -> Result<()> {
        if self.lo < lo || self.hi > hi {
            return Err(Error::Config(format!(
                "{name} range ({}, {}) must stay within [{lo}, {hi}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.lo + rng.gen::<f64>() * (self.hi - self.lo)
    }
}

/// Synthetic crossings plus the generator's noiseless truth.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub records: Vec<CrossingRecord>,
    /// Noiseless model radius per record, for ground-truth evaluation.
    pub r_true: Vec<f64>,
}

/// Draw crossings from a boundary model with additive Gaussian radius noise.
///
/// Drivers and the polar angle are sampled uniformly from the given ranges
/// (which must stay inside the model-valid driver box and `[0, THETA_MAX]`);
/// positions are laid in the x-z plane. The whole draw is a single seeded
/// stream: one seed, one dataset, bit for bit.
pub fn synth_generate(
    model: &dyn BoundaryModel,
    n: usize,
    noise_sigma: f64,
    seed: u64,
    bz_range: UniformRange,
    dp_range: UniformRange,
    theta_range: UniformRange,
) -> Result<SyntheticDataset> {
    if n == 0 {
        return Err(Error::Config("synthetic dataset must be nonempty".into()));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::Config(format!(
            "noise sigma must be finite and nonnegative, got {noise_sigma}"
        )));
    }
    bz_range.contained_in("bz", BZ_VALID_RANGE)?;
    dp_range.contained_in("dp", DP_VALID_RANGE)?;
    theta_range.contained_in("theta", (0.0, THETA_MAX))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut records = Vec::with_capacity(n);
    let mut r_true = Vec::with_capacity(n);
    for i in 0..n {
        let bz = bz_range.sample(&mut rng);
        let dp = dp_range.sample(&mut rng);
        let theta = theta_range.sample(&mut rng);
        let truth = model.predict_r(bz, dp, theta)?;
        let r = truth + noise_sigma * noise.sample(&mut rng);
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::Numerical(format!(
                "noise drove record {i} to nonpositive radius {r} (truth {truth})"
            )));
        }
        let polar = PolarPoint::new(r, theta)?;
        records.push(CrossingRecord {
            timestamp: i as i64 * SOLAR_WIND_CADENCE_S,
            pos: GsmPosition {
                x: r * theta.cos(),
                y: 0.0,
                z: r * theta.sin(),
            },
            polar,
            drivers: Some(DriverInput { bz, dp }),
            source: "synthetic".into(),
        });
        r_true.push(truth);
    }
    Ok(SyntheticDataset { records, r_true })
}

const DATASET_HEADER: [&str; 7] = [
    "timestamp", "x_gsm_re", "y_gsm_re", "z_gsm_re", "source", "bz_nt", "dp_npa",
];
const DATASET_HEADER_TRUTH: [&str; 8] = [
    "timestamp", "x_gsm_re", "y_gsm_re", "z_gsm_re", "source", "bz_nt", "dp_npa", "r_true_re",
];

fn format_epoch(ts: i64) -> Result<String> {
    let dt = DateTime::from_timestamp(ts, 0)
        .ok_or_else(|| Error::Domain(format!("timestamp {ts} out of datetime range")))?;
    Ok(dt.to_rfc3339_opts(SecondsFormat::Secs, true))
}

/// Write merged or synthetic records as a dataset CSV.
///
/// Every record must carry drivers. Floats are written with full
/// round-trip precision so re-reading reproduces them bit for bit. Pass
/// `r_true` (one value per record) to append the ground-truth column.
pub fn write_dataset(
    path: &Path,
    records: &[CrossingRecord],
    r_true: Option<&[f64]>,
) -> Result<()> {
    if let Some(t) = r_true {
        if t.len() != records.len() {
            return Err(Error::Config(format!(
                "r_true length {} does not match {} records",
                t.len(),
                records.len()
            )));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header: &[&str] = match r_true {
        Some(_) => &DATASET_HEADER_TRUTH,
        None => &DATASET_HEADER,
    };
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for (i, rec) in records.iter().enumerate() {
        let d = rec.drivers.ok_or_else(|| {
            Error::Config(format!("record {i} has no drivers; merge before writing"))
        })?;
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            format_epoch(rec.timestamp)?,
            rec.pos.x,
            rec.pos.y,
            rec.pos.z,
            rec.source,
            d.bz,
            d.dp,
        );
        if let Some(t) = r_true {
            line.push(',');
            line.push_str(&format!("{}", t[i]));
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// A dataset CSV read back into memory.
#[derive(Debug, Clone)]
pub struct DatasetFile {
    pub records: Vec<CrossingRecord>,
    /// Present when the file carried the ground-truth column.
    pub r_true: Option<Vec<f64>>,
    pub issues: Vec<RowIssue>,
}

/// Read a dataset CSV (the [`write_dataset`] schema, with or without the
/// ground-truth column). Row-level rejections mirror [`parse_crossings`];
/// additionally rows with non-finite drivers or non-positive pressure are
/// rejected.
pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let with_truth = if headers == DATASET_HEADER_TRUTH {
        true
    } else if headers == DATASET_HEADER {
        false
    } else {
        return Err(Error::parse(
            path,
            1,
            format!("expected dataset header {DATASET_HEADER:?} (optionally with r_true_re), got {headers:?}"),
        ));
    };

    let mut records = Vec::new();
    let mut r_true = if with_truth { Some(Vec::new()) } else { None };
    let mut issues = Vec::new();
    let expected_fields = if with_truth { 8 } else { 7 };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = record_line(&rec);
        if rec.len() != expected_fields {
            return Err(Error::parse(
                path,
                line,
                format!("expected {expected_fields} fields, got {}", rec.len()),
            ));
        }
        let timestamp = parse_field_timestamp(path, line, &rec[0])?;
        let x = parse_field_f64(path, line, "x_gsm_re", &rec[1])?;
        let y = parse_field_f64(path, line, "y_gsm_re", &rec[2])?;
        let z = parse_field_f64(path, line, "z_gsm_re", &rec[3])?;
        let source = rec[4].trim().to_string();
        let bz = parse_field_f64(path, line, "bz_nt", &rec[5])?;
        let dp = parse_field_f64(path, line, "dp_npa", &rec[6])?;
        let truth = if with_truth {
            Some(parse_field_f64(path, line, "r_true_re", &rec[7])?)
        } else {
            None
        };

        if timestamp < 0 {
            issues.push(RowIssue {
                line,
                message: format!("rejected: timestamp before epoch ({timestamp})"),
            });
            continue;
        }
        let drivers = match DriverInput::new(bz, dp) {
            Ok(d) => d,
            Err(e) => {
                issues.push(RowIssue {
                    line,
                    message: format!("rejected: {e}"),
                });
                continue;
            }
        };
        let pos = GsmPosition { x, y, z };
        match to_polar(pos) {
            Ok(polar) => {
                records.push(CrossingRecord {
                    timestamp,
                    pos,
                    polar,
                    drivers: Some(drivers),
                    source,
                });
                if let (Some(list), Some(t)) = (r_true.as_mut(), truth) {
                    list.push(t);
                }
            }
            Err(e) => issues.push(RowIssue {
                line,
                message: format!("rejected: {e}"),
            }),
        }
    }
    Ok(DatasetFile { records, r_true, issues })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{EmpiricalModel, OverfitForm};
    use approx::assert_relative_eq;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn to_polar_handles_axis_and_plane_cases() {
        let p = to_polar(GsmPosition { x: 10.0, y: 0.0, z: 0.0 }).unwrap();
        assert_eq!(p.r, 10.0);
        assert_eq!(p.theta, 0.0);

        let p = to_polar(GsmPosition { x: 0.0, y: 6.0, z: 8.0 }).unwrap();
        assert_eq!(p.r, 10.0);
        assert_eq!(p.theta, std::f64::consts::FRAC_PI_2);

        let p = to_polar(GsmPosition { x: -5.0, y: 0.0, z: 75.0f64.sqrt() }).unwrap();
        assert_relative_eq!(p.r, 10.0, max_relative = 1e-15);
        assert_relative_eq!(p.theta, 2.0 * std::f64::consts::FRAC_PI_3, max_relative = 1e-15);
    }

    #[test]
    fn to_polar_rejects_origin_and_negative_x_axis() {
        assert!(to_polar(GsmPosition { x: 0.0, y: 0.0, z: 0.0 }).is_err());
        assert!(to_polar(GsmPosition { x: -4.0, y: 0.0, z: 0.0 }).is_err());
        assert!(to_polar(GsmPosition { x: f64::NAN, y: 0.0, z: 1.0 }).is_err());
    }

    #[test]
    fn parse_crossings_accepts_good_rows_and_reports_bad_ones() {
        let file = write_temp(
            "timestamp,x_gsm_re,y_gsm_re,z_gsm_re,source\n\
             2019-01-01T00:07:30Z,10.0,0.0,2.0,themis\n\
             2019-01-01T00:12:00Z,nan,0.0,2.0,themis\n\
             2019-01-01T00:17:00Z,0.0,0.0,0.0,mms\n\
             2019-01-01T00:22:00Z,9.5,1.0,-2.5,mms\n",
        );
        let parsed = parse_crossings(file.path()).unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.issues.len(), 2);
        assert_eq!(parsed.issues[0].line, 3);
        assert_eq!(parsed.issues[1].line, 4);
        assert_eq!(parsed.rows[0].timestamp, 1_546_301_250);
        assert_eq!(parsed.rows[0].source, "themis");
        assert!(parsed.rows[0].drivers.is_none());
    }

    #[test]
    fn parse_crossings_rejects_malformed_structure() {
        let bad_header = write_temp("time,x,y,z,who\n2019-01-01T00:00:00Z,1,2,3,a\n");
        let err = parse_crossings(bad_header.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");

        let bad_float = write_temp(
            "timestamp,x_gsm_re,y_gsm_re,z_gsm_re,source\n\
             2019-01-01T00:00:00Z,ten,0.0,2.0,themis\n",
        );
        let err = parse_crossings(bad_float.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = parse_crossings(Path::new("/nonexistent/crossings.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }

    #[test]
    fn parse_solarwind_flags_fill_and_snaps_cadence() {
        let file = write_temp(
            "timestamp,bz_nt,dp_npa\n\
             2019-01-01T00:00:00Z,-3.2,2.1\n\
             2019-01-01T00:05:42Z,1.0,1.5\n\
             2019-01-01T00:10:00Z,99.99,2.0\n\
             2019-01-01T00:15:00Z,0.5,9999.99\n",
        );
        let parsed = parse_solarwind(file.path(), FillValues::default()).unwrap();
        assert_eq!(parsed.rows.len(), 4);
        // Row 3 snapped down to the 00:05 window start.
        assert_eq!(parsed.rows[1].timestamp, 1_546_300_800 + 300);
        assert!(!parsed.rows[1].flagged);
        assert!(parsed.rows[2].flagged);
        assert!(parsed.rows[3].flagged);
        // One snap warning plus two fill flags.
        assert_eq!(parsed.issues.len(), 3);
        assert!(parsed.issues[0].message.contains("snapped"));
    }

    #[test]
    fn merge_matches_five_minute_windows() {
        let crossings = parse_crossings(
            write_temp(
                "timestamp,x_gsm_re,y_gsm_re,z_gsm_re,source\n\
                 2019-01-01T00:07:30Z,10.0,0.0,2.0,themis\n\
                 2019-01-01T00:10:00Z,10.5,0.0,1.0,themis\n\
                 2019-01-01T00:21:00Z,11.0,0.0,0.5,mms\n\
                 2019-01-01T00:26:00Z,11.2,0.3,0.5,mms\n",
            )
            .path(),
        )
        .unwrap()
        .rows;
        let samples = parse_solarwind(
            write_temp(
                "timestamp,bz_nt,dp_npa\n\
                 2019-01-01T00:05:00Z,-3.0,2.0\n\
                 2019-01-01T00:10:00Z,-2.0,2.5\n\
                 2019-01-01T00:20:00Z,99.99,2.0\n",
            )
            .path(),
            FillValues::default(),
        )
        .unwrap()
        .rows;

        let out = merge(&crossings, &samples);
        // 00:07:30 -> 00:05 window; 00:10:00 -> its own window start;
        // 00:21 -> flagged; 00:26 -> no sample.
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.dropped, 2);
        let d0 = out.records[0].drivers.unwrap();
        assert_eq!((d0.bz, d0.dp), (-3.0, 2.0));
        let d1 = out.records[1].drivers.unwrap();
        assert_eq!((d1.bz, d1.dp), (-2.0, 2.5));

        // Idempotence: re-merging the merged records changes nothing.
        let again = merge(&out.records, &samples);
        assert_eq!(again.records, out.records);
        assert_eq!(again.dropped, 0);
    }

    #[test]
    fn merge_prefers_unflagged_duplicate_windows() {
        let c = CrossingRecord {
            timestamp: 450,
            pos: GsmPosition { x: 10.0, y: 0.0, z: 0.0 },
            polar: PolarPoint::new(10.0, 0.0).unwrap(),
            drivers: None,
            source: "t".into(),
        };
        let flagged = SolarWindSample { timestamp: 300, bz: 99.99, dp: 1.0, flagged: true };
        let good = SolarWindSample { timestamp: 300, bz: -1.0, dp: 1.5, flagged: false };
        let out = merge(&[c], &[flagged, good]);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].drivers.unwrap().bz, -1.0);
    }

    fn record_at(bz: f64, dp: f64) -> CrossingRecord {
        CrossingRecord {
            timestamp: 0,
            pos: GsmPosition { x: 10.0, y: 0.0, z: 0.0 },
            polar: PolarPoint::new(10.0, 0.0).unwrap(),
            drivers: Some(DriverInput { bz, dp }),
            source: "t".into(),
        }
    }

    #[test]
    fn filter_range_is_strict_and_idempotent() {
        let records = vec![
            record_at(-18.0, 2.0), // on the bz edge: excluded (strict)
            record_at(-17.9, 2.0),
            record_at(0.0, 0.5), // on the dp edge: excluded
            record_at(0.0, 8.4),
            record_at(15.0, 3.0), // on the bz edge
            CrossingRecord { drivers: None, ..record_at(0.0, 1.0) },
        ];
        let spec = BinSpec::default();
        let kept = filter_range(records, &spec);
        assert_eq!(kept.len(), 2);
        let again = filter_range(kept.clone(), &spec);
        assert_eq!(again, kept);
    }

    #[test]
    fn window_layout_covers_the_default_ranges() {
        let spec = BinSpec::default();
        let bz = spec.bz_windows();
        let dp = spec.dp_windows();
        assert_eq!(bz.len(), 31);
        assert_eq!(bz[0], (-18.0, -15.0));
        assert_eq!(*bz.last().unwrap(), (12.0, 15.0));
        assert_eq!(dp.len(), 13);
        assert_eq!(dp[0], (0.5, 2.5));
        assert_eq!(*dp.last().unwrap(), (6.5, 8.5));
    }

    #[test]
    fn bin_membership_counts_match_window_arithmetic() {
        // A record near the bz edge sits in 2 bz-windows x 2 dp-windows;
        // an interior record sits in 3 x 4.
        let records = vec![record_at(-16.5, 1.0), record_at(-10.5, 4.25)];
        let bins = bin_records(&records, &BinSpec::default()).unwrap();
        assert_eq!(bins.len(), 31 * 13);
        let count = |idx: usize| bins.iter().filter(|b| b.members.contains(&idx)).count();
        assert_eq!(count(0), 4);
        assert_eq!(count(1), 12);
    }

    #[test]
    fn bin_aggregates_average_members() {
        let mut records = vec![record_at(-17.5, 1.0), record_at(-16.8, 1.2)];
        // Give the second record a different radius/angle so the proxy is
        // a real average.
        records[1].polar = PolarPoint::new(12.0, 0.8).unwrap();
        let bins = bin_records(&records, &BinSpec::default()).unwrap();
        let bin = bins
            .iter()
            .find(|b| b.bz_lo == -18.0 && b.dp_lo == 0.5)
            .unwrap();
        assert_eq!(bin.members, vec![0, 1]);
        assert_relative_eq!(bin.mean_bz, (-17.5 + -16.8) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(bin.mean_dp, 1.1, max_relative = 1e-15);

        let alpha1 = ShueForm::default()
            .params(DriverInput { bz: -17.5, dp: 1.0 })
            .unwrap()
            .alpha;
        let proxy0 = 10.0 / (2.0f64 / (1.0 + 1.0)).powf(alpha1); // theta = 0
        let alpha2 = ShueForm::default()
            .params(DriverInput { bz: -16.8, dp: 1.2 })
            .unwrap()
            .alpha;
        let proxy1 = 12.0 / (2.0f64 / (1.0 + 0.8f64.cos())).powf(alpha2);
        assert_relative_eq!(bin.mean_r0_proxy, (proxy0 + proxy1) / 2.0, max_relative = 1e-12);

        let empty = bins.iter().find(|b| b.members.is_empty()).unwrap();
        assert!(empty.mean_bz.is_nan() && empty.mean_r0_proxy.is_nan());
    }

    #[test]
    fn bin_table_writes_counts_and_blank_empty_aggregates() {
        let records = vec![record_at(-17.5, 1.0)];
        let bins = bin_records(&records, &BinSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bins.csv");
        write_bins(&path, &bins).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "bz_lo,bz_hi,dp_lo,dp_hi,count,mean_bz,mean_dp,mean_r0_proxy"
        );
        assert_eq!(lines.count(), bins.len());
        // The populated corner bin keeps its aggregates; empty bins have
        // trailing blank fields.
        assert!(text.contains("-18,-15,0.5,2.5,1,-17.5,1,"));
        assert!(text.contains(",0,,,\n"));
    }

    #[test]
    fn bin_records_requires_merged_input() {
        let mut rec = record_at(0.0, 2.0);
        rec.drivers = None;
        let err = bin_records(&[rec], &BinSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn bin_spec_rejects_degenerate_layouts() {
        let mut spec = BinSpec::default();
        spec.bz_stride = 0.0;
        assert!(spec.validate().is_err());
        spec = BinSpec::default();
        spec.dp_range = (4.0, 4.0);
        assert!(spec.validate().is_err());
        spec = BinSpec::default();
        spec.bz_range = (0.0, 2.0); // narrower than one bz window
        assert!(spec.validate().is_err());
    }

    #[test]
    fn synth_same_seed_is_bit_identical() {
        let model = EmpiricalModel::Shue(ShueForm::default());
        let r = UniformRange::new(-10.0, 10.0).unwrap();
        let d = UniformRange::new(1.0, 5.0).unwrap();
        let t = UniformRange::new(0.0, 2.0).unwrap();
        let a = synth_generate(&model, 64, 0.4, 99, r, d, t).unwrap();
        let b = synth_generate(&model, 64, 0.4, 99, r, d, t).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.r_true, b.r_true);
        let c = synth_generate(&model, 64, 0.4, 100, r, d, t).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn synth_noiseless_matches_the_model_exactly() {
        let model = EmpiricalModel::Overfit(OverfitForm::default());
        let r = UniformRange::new(-5.0, 5.0).unwrap();
        let d = UniformRange::new(0.8, 4.0).unwrap();
        let t = UniformRange::new(0.0, 1.5).unwrap();
        let out = synth_generate(&model, 32, 0.0, 7, r, d, t).unwrap();
        for (rec, truth) in out.records.iter().zip(&out.r_true) {
            let d = rec.drivers.unwrap();
            assert_eq!(rec.polar.r, *truth);
            assert_eq!(model.predict_r(d.bz, d.dp, rec.polar.theta).unwrap(), *truth);
        }
    }

    #[test]
    fn synth_rejects_out_of_box_ranges() {
        let model = EmpiricalModel::Shue(ShueForm::default());
        let ok = UniformRange::new(0.0, 1.0).unwrap();
        let wide_bz = UniformRange::new(-30.0, 0.0).unwrap();
        let wide_theta = UniformRange::new(0.0, 3.0).unwrap();
        assert!(synth_generate(&model, 8, 0.0, 1, wide_bz, ok, ok).is_err());
        assert!(
            synth_generate(
                &model,
                8,
                0.0,
                1,
                UniformRange::new(-1.0, 1.0).unwrap(),
                UniformRange::new(1.0, 2.0).unwrap(),
                wide_theta
            )
            .is_err()
        );
        assert!(
            synth_generate(
                &model,
                0,
                0.0,
                1,
                UniformRange::new(-1.0, 1.0).unwrap(),
                UniformRange::new(1.0, 2.0).unwrap(),
                ok
            )
            .is_err()
        );
    }

    #[test]
    fn dataset_files_round_trip() {
        let model = EmpiricalModel::Shue(ShueForm::default());
        let out = synth_generate(
            &model,
            16,
            0.3,
            5,
            UniformRange::new(-8.0, 8.0).unwrap(),
            UniformRange::new(1.0, 6.0).unwrap(),
            UniformRange::new(0.0, 2.0).unwrap(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        write_dataset(&path, &out.records, Some(&out.r_true)).unwrap();

        let read = read_dataset(&path).unwrap();
        assert!(read.issues.is_empty());
        assert_eq!(read.records.len(), 16);
        let truth = read.r_true.unwrap();
        for i in 0..16 {
            assert_eq!(read.records[i].timestamp, out.records[i].timestamp);
            assert_eq!(read.records[i].drivers, out.records[i].drivers);
            assert_eq!(read.records[i].pos, out.records[i].pos);
            assert_eq!(truth[i], out.r_true[i]);
            // The radius is reconstructed from the stored position.
            assert_relative_eq!(
                read.records[i].polar.r,
                out.records[i].polar.r,
                max_relative = 1e-14
            );
        }

        // Without the truth column.
        let path2 = dir.path().join("plain.csv");
        write_dataset(&path2, &out.records, None).unwrap();
        let read2 = read_dataset(&path2).unwrap();
        assert!(read2.r_true.is_none());
        assert_eq!(read2.records.len(), 16);
    }

    #[test]
    fn read_dataset_rejects_bad_rows_not_files() {
        let file = write_temp(
            "timestamp,x_gsm_re,y_gsm_re,z_gsm_re,source,bz_nt,dp_npa\n\
             2019-01-01T00:00:00Z,10.0,0.0,0.0,t,-2.0,2.0\n\
             2019-01-01T00:05:00Z,10.0,0.0,0.0,t,-2.0,0.0\n\
             2019-01-01T00:10:00Z,10.0,0.0,0.0,t,inf,2.0\n",
        );
        let read = read_dataset(file.path()).unwrap();
        assert_eq!(read.records.len(), 1);
        assert_eq!(read.issues.len(), 2);
        assert_eq!(read.issues[0].line, 3);
        assert_eq!(read.issues[1].line, 4);
    }
}
