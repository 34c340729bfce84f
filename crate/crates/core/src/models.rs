//! Closed-form empirical magnetopause models.
//!
//! The boundary is axisymmetric about the Earth-Sun line: a point on it is
//! `(r, theta)` with `r` the geocentric distance in Earth radii and `theta`
//! the angle from the +x (sunward) axis. All models share one shape,
//!
//! ```text
//! r(theta) = r0 * (2 / (1 + cos theta))^alpha
//! ```
//!
//! and differ only in how the standoff distance `r0` and flaring exponent
//! `alpha` respond to the solar-wind drivers `(bz, dp)`. Two
//! parameterizations are provided: the classic single-tanh form
//! ([`ShueForm`]) and a two-tanh refit ([`OverfitForm`]) that tracks its
//! source data more tightly at the cost of physical plausibility.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest polar angle the boundary shape is evaluated at: 165 degrees, in
/// radians. The flared-cone shape diverges as `theta` approaches pi, so the
/// far-tail flank is excluded by construction.
pub const THETA_MAX: f64 = 165.0 * std::f64::consts::PI / 180.0;

/// Driver-plane box the empirical fits are considered valid over.
pub const BZ_VALID_RANGE: (f64, f64) = (-18.0, 15.0);
/// See [`BZ_VALID_RANGE`].
pub const DP_VALID_RANGE: (f64, f64) = (0.5, 8.5);

/// A point on the boundary in the axisymmetric polar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    /// Geocentric distance, Re.
    pub r: f64,
    /// Angle from the Earth-Sun line, radians, in `[0, pi)`.
    pub theta: f64,
}

impl PolarPoint {
    /// Validating constructor: `r` finite and positive, `theta` in `[0, pi)`.
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::Domain(format!(
                "polar r must be finite and positive, got {r}"
            )));
        }
        if !theta.is_finite() || !(0.0..std::f64::consts::PI).contains(&theta) {
            return Err(Error::Domain(format!(
                "polar theta must lie in [0, pi), got {theta}"
            )));
        }
        Ok(Self { r, theta })
    }
}

/// Solar-wind driver pair the boundary responds to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverInput {
    /// North-south IMF component, nT.
    pub bz: f64,
    /// Dynamic pressure, nPa. Must be positive wherever it is consumed.
    pub dp: f64,
}

impl DriverInput {
    pub fn new(bz: f64, dp: f64) -> Result<Self> {
        validate_drivers(bz, dp)?;
        Ok(Self { bz, dp })
    }
}

fn validate_drivers(bz: f64, dp: f64) -> Result<()> {
    if !bz.is_finite() {
        return Err(Error::Domain(format!("driver bz must be finite, got {bz}")));
    }
    if !dp.is_finite() || dp <= 0.0 {
        return Err(Error::Domain(format!(
            "driver dp must be finite and positive, got {dp}"
        )));
    }
    Ok(())
}

/// Shape parameters of the boundary at one driver condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    /// Subsolar standoff distance, Re.
    pub r0: f64,
    /// Tail flaring exponent (dimensionless).
    pub alpha: f64,
}

/// Boundary radius at `theta` for the given shape parameters.
///
/// `theta` must lie in `[0, THETA_MAX]`; at `theta = 0` the result is
/// exactly `params.r0`.
pub fn boundary_r(theta: f64, params: BoundaryParams) -> Result<f64> {
    if !theta.is_finite() || !(0.0..=THETA_MAX).contains(&theta) {
        return Err(Error::Domain(format!(
            "theta must lie in [0, {THETA_MAX:.6}] rad, got {theta}"
        )));
    }
    if !params.r0.is_finite() || !params.alpha.is_finite() {
        return Err(Error::Domain(format!(
            "boundary params must be finite, got r0={} alpha={}",
            params.r0, params.alpha
        )));
    }
    Ok(params.r0 * (2.0 / (1.0 + theta.cos())).powf(params.alpha))
}

/// Anything that predicts a boundary radius from `(bz, dp, theta)`.
///
/// Implemented by both empirical forms and by trained networks, so that
/// fitting, evaluation, and grid generation are model-agnostic.
pub trait BoundaryModel {
    /// Predicted boundary radius, Re.
    fn predict_r(&self, bz: f64, dp: f64, theta: f64) -> Result<f64>;

    /// Stable identifier used in reports and grid sidecars.
    fn model_id(&self) -> String;
}

/// Coefficients of the single-tanh standoff/flaring parameterization.
///
/// ```text
/// r0    = (a0 + a1 * tanh(a2 * (bz + a3))) * dp^p_r
/// alpha = (b0 + b1 * bz) * (1 + b2 * ln dp)
/// ```
///
/// The whole tanh sum is scaled by the pressure power; `p_r` is negative so
/// the boundary compresses as pressure rises. Defaults are the published
/// 1998 coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShueForm {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Standoff pressure exponent, negative.
    pub p_r: f64,
    pub b0: f64,
    pub b1: f64,
    /// Flaring log-pressure coefficient.
    pub b2: f64,
}

impl Default for ShueForm {
    fn default() -> Self {
        Self {
            a0: 10.22,
            a1: 1.29,
            a2: 0.184,
            a3: 8.14,
            p_r: -1.0 / 6.6,
            b0: 0.58,
            b1: -0.007,
            b2: 0.024,
        }
    }
}

impl ShueForm {
    /// Check the structural invariants: finite coefficients, `p_r < 0`.
    ///
    /// Called on explicitly constructed forms (fit starting points, CLI
    /// input), not on every evaluation: fitting routines may legitimately
    /// wander through any finite coefficient values their bounds allow.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("p_r", self.p_r),
            ("b0", self.b0),
            ("b1", self.b1),
            ("b2", self.b2),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "coefficient {name} must be finite, got {v}"
                )));
            }
        }
        if self.p_r >= 0.0 {
            return Err(Error::Domain(format!(
                "pressure exponent p_r must be negative, got {}",
                self.p_r
            )));
        }
        Ok(())
    }

    /// Evaluate `(r0, alpha)` for the given drivers.
    pub fn params(&self, drivers: DriverInput) -> Result<BoundaryParams> {
        validate_drivers(drivers.bz, drivers.dp)?;
        let r0 = (self.a0 + self.a1 * (self.a2 * (drivers.bz + self.a3)).tanh())
            * drivers.dp.powf(self.p_r);
        let alpha = (self.b0 + self.b1 * drivers.bz) * (1.0 + self.b2 * drivers.dp.ln());
        Ok(BoundaryParams { r0, alpha })
    }
}

impl BoundaryModel for ShueForm {
    fn predict_r(&self, bz: f64, dp: f64, theta: f64) -> Result<f64> {
        boundary_r(theta, self.params(DriverInput { bz, dp })?)
    }

    fn model_id(&self) -> String {
        "shue".into()
    }
}

/// Coefficients of the two-tanh refit.
///
/// ```text
/// r0    = (c0 + c1 * tanh(c2 * (bz + c3)) - c4 * tanh(c5 * (bz - c6))) * dp^q_r
/// alpha = (d0 + d1 * bz) * dp^q_a
/// ```
///
/// The second tanh term makes `r0` non-monotonic in `bz` (peak near weakly
/// northward field); the flaring scales with a small positive pressure power
/// instead of a log term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverfitForm {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    /// Standoff pressure exponent, negative.
    pub q_r: f64,
    pub d0: f64,
    pub d1: f64,
    /// Flaring pressure exponent, positive.
    pub q_a: f64,
}

impl Default for OverfitForm {
    fn default() -> Self {
        Self {
            c0: 9.332,
            c1: 1.308,
            c2: 0.213,
            c3: 11.191,
            c4: 0.568,
            c5: 0.479,
            c6: 7.188,
            q_r: -1.0 / 6.22,
            d0: 0.493,
            d1: -3.5e-4,
            q_a: 1.0 / 11.92,
        }
    }
}

impl OverfitForm {
    /// Structural invariants: finite coefficients, `q_r < 0`, `q_a > 0`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("c6", self.c6),
            ("q_r", self.q_r),
            ("d0", self.d0),
            ("d1", self.d1),
            ("q_a", self.q_a),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "coefficient {name} must be finite, got {v}"
                )));
            }
        }
        if self.q_r >= 0.0 {
            return Err(Error::Domain(format!(
                "pressure exponent q_r must be negative, got {}",
                self.q_r
            )));
        }
        if self.q_a <= 0.0 {
            return Err(Error::Domain(format!(
                "flaring exponent q_a must be positive, got {}",
                self.q_a
            )));
        }
        Ok(())
    }

    /// Evaluate `(r0, alpha)` for the given drivers.
    pub fn params(&self, drivers: DriverInput) -> Result<BoundaryParams> {
        validate_drivers(drivers.bz, drivers.dp)?;
        let standoff = self.c0 + self.c1 * (self.c2 * (drivers.bz + self.c3)).tanh()
            - self.c4 * (self.c5 * (drivers.bz - self.c6)).tanh();
        let r0 = standoff * drivers.dp.powf(self.q_r);
        let alpha = (self.d0 + self.d1 * drivers.bz) * drivers.dp.powf(self.q_a);
        Ok(BoundaryParams { r0, alpha })
    }
}

impl BoundaryModel for OverfitForm {
    fn predict_r(&self, bz: f64, dp: f64, theta: f64) -> Result<f64> {
        boundary_r(theta, self.params(DriverInput { bz, dp })?)
    }

    fn model_id(&self) -> String {
        "overfit".into()
    }
}

/// Closed-form model selector, convenient for dispatch in reports and CLIs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmpiricalModel {
    Shue(ShueForm),
    Overfit(OverfitForm),
}

impl EmpiricalModel {
    /// Evaluate `(r0, alpha)` for the given drivers.
    pub fn params(&self, drivers: DriverInput) -> Result<BoundaryParams> {
        match self {
            EmpiricalModel::Shue(f) => f.params(drivers),
            EmpiricalModel::Overfit(f) => f.params(drivers),
        }
    }
}

impl BoundaryModel for EmpiricalModel {
    fn predict_r(&self, bz: f64, dp: f64, theta: f64) -> Result<f64> {
        match self {
            EmpiricalModel::Shue(f) => f.predict_r(bz, dp, theta),
            EmpiricalModel::Overfit(f) => f.predict_r(bz, dp, theta),
        }
    }

    fn model_id(&self) -> String {
        match self {
            EmpiricalModel::Shue(f) => f.model_id(),
            EmpiricalModel::Overfit(f) => f.model_id(),
        }
    }
}

/// Default driver-plane grid extents and resolution for standoff maps.
pub const DEFAULT_GRID_BZ: (f64, f64) = (-18.0, 15.0);
/// See [`DEFAULT_GRID_BZ`]. The pressure axis extends past the fit-valid
/// range to show extrapolation behavior.
pub const DEFAULT_GRID_DP: (f64, f64) = (0.5, 18.0);
/// See [`DEFAULT_GRID_BZ`].
pub const DEFAULT_GRID_N: usize = 100;

/// Regular grid of subsolar standoff predictions over the driver plane.
#[derive(Debug, Clone)]
pub struct StandoffGrid {
    pub bz_axis: Vec<f64>,
    pub dp_axis: Vec<f64>,
    /// Row-major: rows walk `bz_axis`, columns walk `dp_axis`.
    pub values: Vec<f64>,
    pub model_id: String,
}

impl StandoffGrid {
    pub fn value(&self, i_bz: usize, i_dp: usize) -> f64 {
        self.values[i_bz * self.dp_axis.len() + i_dp]
    }

    /// Write the grid as `bz_nt,dp_npa,r0_re` rows with full-precision
    /// floats.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["bz_nt", "dp_npa", "r0_re"])
            .map_err(|e| csv_error(path, e))?;
        for (i, &bz) in self.bz_axis.iter().enumerate() {
            for (j, &dp) in self.dp_axis.iter().enumerate() {
                w.write_record([
                    format!("{bz}"),
                    format!("{dp}"),
                    format!("{}", self.value(i, j)),
                ])
                .map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Write the sidecar describing the grid layout.
    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "bz_min": self.bz_axis[0],
            "bz_max": *self.bz_axis.last().expect("nonempty axis"),
            "dp_min": self.dp_axis[0],
            "dp_max": *self.dp_axis.last().expect("nonempty axis"),
            "n_bz": self.bz_axis.len(),
            "n_dp": self.dp_axis.len(),
            "model_id": self.model_id,
        });
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let text = serde_json::to_string_pretty(&meta).expect("static keys serialize");
        writeln!(file, "{text}").map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Evenly spaced axis including both endpoints.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
        .collect()
}

/// Evaluate the subsolar standoff (`theta = 0`) on a regular driver grid.
pub fn standoff_grid(
    model: &dyn BoundaryModel,
    bz_range: (f64, f64),
    dp_range: (f64, f64),
    n_bz: usize,
    n_dp: usize,
) -> Result<StandoffGrid> {
    for (name, (lo, hi)) in [("bz", bz_range), ("dp", dp_range)] {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::Config(format!(
                "{name} grid range must be finite with lo < hi, got ({lo}, {hi})"
            )));
        }
    }
    if dp_range.0 <= 0.0 {
        return Err(Error::Config(format!(
            "dp grid must stay positive, got lower edge {}",
            dp_range.0
        )));
    }
    for (name, n) in [("n_bz", n_bz), ("n_dp", n_dp)] {
        if n < 2 {
            return Err(Error::Config(format!("{name} must be at least 2, got {n}")));
        }
    }

    let bz_axis = linspace(bz_range.0, bz_range.1, n_bz);
    let dp_axis = linspace(dp_range.0, dp_range.1, n_dp);
    let mut values = Vec::with_capacity(n_bz * n_dp);
    for &bz in &bz_axis {
        for &dp in &dp_axis {
            values.push(model.predict_r(bz, dp, 0.0)?);
        }
    }
    Ok(StandoffGrid {
        bz_axis,
        dp_axis,
        values,
        model_id: model.model_id(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // (bz, dp, r0_shue, alpha_shue, r0_overfit, alpha_overfit), frozen from
    // a 50-digit evaluation of the closed forms.
    const PARAM_ORACLE: [(f64, f64, f64, f64, f64, f64); 12] = [
        (-18.0, 0.5, 9.9930011393768932, 0.69425531417259229, 9.7572929791358193, 0.47109378177804218),
        (-12.0, 1.3, 9.0644437188806518, 0.66818103691855394, 9.2771275472968545, 0.50826490820740578),
        (-6.0, 2.7, 9.2078179768151429, 0.63682726246749751, 9.333647812580204, 0.53812251290486094),
        (-2.0, 4.9, 8.8552082691185845, 0.61665613708414198, 8.641156431485064, 0.5641121878614935),
        (0.0, 1.0, 11.387118017307763, 0.58, 11.18478466868362, 0.493),
        (0.0, 2.0, 10.251872972379905, 0.58964860875339444, 10.005309373998478, 0.52251782876636847),
        (3.0, 6.1, 8.7195741230884888, 0.58326000215414103, 8.3607681987570032, 0.57253803129455762),
        (8.0, 8.5, 8.3176094701115563, 0.5509134720721291, 7.3928519886567637, 0.58660355863249691),
        (15.0, 0.5, 12.783990234640564, 0.46709812214161662, 11.26000875834057, 0.46019625888692184),
        (-18.0, 8.5, 6.5052543558930361, 0.74226128107428081, 6.1873969030907556, 0.59749317997797982),
        (15.0, 8.5, 8.3221353625078386, 0.49939675426385749, 7.140314784962186, 0.58367173750102074),
        (5.0, 3.3, 9.5883708946193134, 0.56061650588761944, 9.1456877748266661, 0.54300278242690613),
    ];

    #[test]
    fn shue_params_match_frozen_oracle() {
        let form = ShueForm::default();
        for &(bz, dp, r0, alpha, _, _) in &PARAM_ORACLE {
            let p = form.params(DriverInput { bz, dp }).unwrap();
            assert_relative_eq!(p.r0, r0, max_relative = 1e-12);
            assert_relative_eq!(p.alpha, alpha, max_relative = 1e-12);
        }
    }

    #[test]
    fn overfit_params_match_frozen_oracle() {
        let form = OverfitForm::default();
        for &(bz, dp, _, _, r0, alpha) in &PARAM_ORACLE {
            let p = form.params(DriverInput { bz, dp }).unwrap();
            assert_relative_eq!(p.r0, r0, max_relative = 1e-12);
            assert_relative_eq!(p.alpha, alpha, max_relative = 1e-12);
        }
    }

    #[test]
    fn unit_pressure_collapses_to_tanh_sums() {
        // At dp = 1 both pressure factors are exactly 1 and the log term
        // vanishes, so the values reduce to the bare coefficient sums.
        let p = ShueForm::default()
            .params(DriverInput { bz: 0.0, dp: 1.0 })
            .unwrap();
        assert_eq!(p.alpha, 0.58);
        assert_relative_eq!(p.r0, 10.22 + 1.29 * (0.184f64 * 8.14).tanh(), epsilon = 0.0);

        let q = OverfitForm::default()
            .params(DriverInput { bz: 0.0, dp: 1.0 })
            .unwrap();
        assert_eq!(q.alpha, 0.493);
    }

    #[test]
    fn boundary_r_subsolar_is_exactly_r0() {
        let params = BoundaryParams { r0: 10.22, alpha: 0.58 };
        assert_eq!(boundary_r(0.0, params).unwrap(), 10.22);
    }

    #[test]
    fn boundary_r_flank_matches_frozen_value() {
        // theta = pi/2 with the (bz=0, dp=2) Shue parameters.
        let params = ShueForm::default()
            .params(DriverInput { bz: 0.0, dp: 2.0 })
            .unwrap();
        let r = boundary_r(std::f64::consts::FRAC_PI_2, params).unwrap();
        assert_relative_eq!(r, 15.427840293822531, max_relative = 1e-12);
    }

    #[test]
    fn boundary_r_zero_alpha_is_flat() {
        let params = BoundaryParams { r0: 7.5, alpha: 0.0 };
        assert_eq!(boundary_r(1.0, params).unwrap(), 7.5);
    }

    #[test]
    fn boundary_r_monotone_in_theta_for_positive_alpha() {
        let params = BoundaryParams { r0: 10.0, alpha: 0.6 };
        let mut last = 0.0;
        for k in 0..=100 {
            // k/100 first so k = 100 lands exactly on THETA_MAX.
            let theta = THETA_MAX * (k as f64 / 100.0);
            let r = boundary_r(theta, params).unwrap();
            assert!(r > last, "r must grow with theta for alpha > 0");
            last = r;
        }
    }

    #[test]
    fn boundary_r_rejects_out_of_range_theta() {
        let params = BoundaryParams { r0: 10.0, alpha: 0.6 };
        assert!(boundary_r(-0.1, params).is_err());
        assert!(boundary_r(170.0_f64.to_radians(), params).is_err());
        assert!(boundary_r(f64::NAN, params).is_err());
        // 165 degrees itself is allowed.
        assert!(boundary_r(THETA_MAX, params).is_ok());
    }

    #[test]
    fn params_reject_bad_drivers() {
        let shue = ShueForm::default();
        assert!(shue.params(DriverInput { bz: f64::NAN, dp: 2.0 }).is_err());
        assert!(shue.params(DriverInput { bz: 0.0, dp: 0.0 }).is_err());
        assert!(shue.params(DriverInput { bz: 0.0, dp: -1.0 }).is_err());
        let overfit = OverfitForm::default();
        assert!(overfit.params(DriverInput { bz: 0.0, dp: f64::INFINITY }).is_err());
    }

    #[test]
    fn shue_standoff_compresses_with_pressure_and_southward_field() {
        let form = ShueForm::default();
        for bz in [-15.0, -5.0, 0.0, 5.0, 14.0] {
            let mut last = f64::INFINITY;
            for dp in [0.5, 1.0, 2.0, 4.0, 8.0] {
                let p = form.params(DriverInput { bz, dp }).unwrap();
                assert!(p.r0 < last, "r0 must shrink as dp grows");
                last = p.r0;
            }
        }
        for dp in [0.5, 2.0, 8.0] {
            let mut last = -f64::INFINITY;
            for bz in [-18.0, -10.0, -2.0, 6.0, 15.0] {
                let p = form.params(DriverInput { bz, dp }).unwrap();
                assert!(p.r0 > last, "Shue r0 must grow monotonically with bz");
                last = p.r0;
            }
        }
    }

    #[test]
    fn overfit_standoff_peaks_inside_the_valid_range() {
        // The two-tanh standoff rises, peaks near weakly northward field,
        // then decays: its maximum over bz must be strictly interior.
        let form = OverfitForm::default();
        for dp in [1.0, 3.0] {
            let mut best = (f64::NEG_INFINITY, f64::NAN);
            let n = 661; // bz step 0.05 over [-18, 15]
            for k in 0..n {
                let bz = -18.0 + 33.0 * k as f64 / (n - 1) as f64;
                let p = form.params(DriverInput { bz, dp }).unwrap();
                if p.r0 > best.0 {
                    best = (p.r0, bz);
                }
            }
            assert!(best.1 > -17.0 && best.1 < 14.0, "peak at bz={}", best.1);
            assert_relative_eq!(best.1, 1.55, epsilon = 0.2);
        }
    }

    #[test]
    fn tanh_terms_saturate_for_extreme_bz() {
        // Far outside the fit range both tanh factors are saturated, so the
        // standoff must flatten out instead of diverging.
        let form = OverfitForm::default();
        let a = form.params(DriverInput { bz: 40.0, dp: 1.0 }).unwrap();
        let b = form.params(DriverInput { bz: 60.0, dp: 1.0 }).unwrap();
        assert!((a.r0 - b.r0).abs() < 1e-6);

        let shue = ShueForm::default();
        let c = shue.params(DriverInput { bz: -60.0, dp: 1.0 }).unwrap();
        assert_relative_eq!(c.r0, 10.22 - 1.29, epsilon = 1e-6);
    }

    #[test]
    fn validate_flags_bad_exponent_signs() {
        let mut shue = ShueForm::default();
        assert!(shue.validate().is_ok());
        shue.p_r = 0.15;
        assert!(shue.validate().is_err());

        let mut overfit = OverfitForm::default();
        assert!(overfit.validate().is_ok());
        overfit.q_a = -0.1;
        assert!(overfit.validate().is_err());
        overfit.q_a = 1.0 / 11.92;
        overfit.c3 = f64::NAN;
        assert!(overfit.validate().is_err());
    }

    #[test]
    fn polar_point_rejects_tail_axis_and_nonpositive_r() {
        assert!(PolarPoint::new(10.0, 0.0).is_ok());
        assert!(PolarPoint::new(10.0, std::f64::consts::PI).is_err());
        assert!(PolarPoint::new(0.0, 1.0).is_err());
        assert!(PolarPoint::new(-3.0, 1.0).is_err());
        assert!(PolarPoint::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn grid_matches_pointwise_predictions() {
        let model = EmpiricalModel::Shue(ShueForm::default());
        let grid = standoff_grid(&model, (-10.0, 10.0), (1.0, 5.0), 3, 4).unwrap();
        assert_eq!(grid.bz_axis, vec![-10.0, 0.0, 10.0]);
        assert_eq!(grid.dp_axis.len(), 4);
        assert_eq!(grid.values.len(), 12);
        assert_eq!(*grid.dp_axis.last().unwrap(), 5.0);
        for (i, &bz) in grid.bz_axis.iter().enumerate() {
            for (j, &dp) in grid.dp_axis.iter().enumerate() {
                assert_eq!(grid.value(i, j), model.predict_r(bz, dp, 0.0).unwrap());
            }
        }
        assert_eq!(grid.model_id, "shue");
    }

    #[test]
    fn grid_rejects_degenerate_layout() {
        let model = EmpiricalModel::Shue(ShueForm::default());
        assert!(standoff_grid(&model, (5.0, 5.0), (1.0, 2.0), 3, 3).is_err());
        assert!(standoff_grid(&model, (-1.0, 1.0), (0.0, 2.0), 3, 3).is_err());
        assert!(standoff_grid(&model, (-1.0, 1.0), (1.0, 2.0), 1, 3).is_err());
    }

    #[test]
    fn grid_files_round_trip_layout(){
        let dir = tempfile::tempdir().unwrap();
        let model = EmpiricalModel::Overfit(OverfitForm::default());
        let grid = standoff_grid(&model, (-18.0, 15.0), (0.5, 18.0), 4, 5).unwrap();
        let csv_path = dir.path().join("grid.csv");
        let meta_path = dir.path().join("grid.meta.json");
        grid.write_csv(&csv_path).unwrap();
        grid.write_sidecar(&meta_path).unwrap();

        let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 20);
        // Full-precision floats must round-trip exactly.
        let first: f64 = rows[0][2].parse().unwrap();
        assert_eq!(first, grid.value(0, 0));

        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&meta_path).unwrap()).unwrap();
        assert_eq!(meta["n_bz"], 4);
        assert_eq!(meta["n_dp"], 5);
        assert_eq!(meta["model_id"], "overfit");
        assert_eq!(meta["dp_max"], 18.0);
    }
}
