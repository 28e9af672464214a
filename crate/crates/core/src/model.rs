//! The exponential jam-time model.
//!
//! Times between jams at outlet diameter `phi` are exponential with mean
//! `eta(phi) = exp(L phi^2) / C - 1`. The quantity of interest is the
//! smallest diameter whose mean time reaches a threshold `T0`,
//! `g = sqrt(log(C (T0 + 1)) / L)`, and its gradient with respect to
//! `(C, L)` is the c-vector fed to the design criterion.
//!
//! Everything here is evaluated through `u - ln C` with `u = L phi^2` so
//! that `exp_m1`/`ln_1p` keep full precision near the domain boundary
//! `exp(L phi^2) = C`.

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};

/// Model parameters `theta = (C, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    c: f64,
    l: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "L")]
    l: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.c, raw.l)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { c: p.c, l: p.l }
    }
}

impl ModelParams {
    pub fn new(c: f64, l: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParams(format!("C must be positive, got {c}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParams(format!("L must be positive, got {l}")));
        }
        Ok(ModelParams { c, l })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Checks `C < exp(L a^2)`. Since `eta` increases in `phi`, the left
    /// endpoint is the binding constraint for the whole interval.
    pub fn validate_on(&self, space: &DesignSpace) -> Result<()> {
        if self.log_excess(space.a()) > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "C = {} must be below exp(L a^2) = {} on [{}, {}]",
                self.c,
                (self.l * space.a() * space.a()).exp(),
                space.a(),
                space.b()
            )))
        }
    }

    /// `L phi^2 - ln C`; positive exactly when the mean time at `phi` is positive.
    pub(crate) fn log_excess(&self, phi: f64) -> f64 {
        self.l * phi * phi - self.c.ln()
    }

    pub(crate) fn check_phi(&self, phi: f64) -> Result<f64> {
        let d = self.log_excess(phi);
        if phi.is_finite() && d > 0.0 {
            Ok(d)
        } else {
            Err(Error::Domain {
                phi,
                c: self.c,
                l: self.l,
            })
        }
    }

    /// Smallest admissible threshold, `max(0, (1 - C) / C)`. Thresholds
    /// must be strictly greater.
    pub fn t0_lower_bound(&self) -> f64 {
        ((1.0 - self.c) / self.c).max(0.0)
    }
}

/// The experimental interval `[a, b]` of outlet diameters.
///
/// The grain and critical diameters are only checked against the interval;
/// they never enter any computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct DesignSpace {
    a: f64,
    b: f64,
    grain_diameter: Option<f64>,
    critical_diameter: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    a: f64,
    b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grain_diameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    critical_diameter: Option<f64>,
}

impl TryFrom<RawSpace> for DesignSpace {
    type Error = Error;
    fn try_from(raw: RawSpace) -> Result<Self> {
        DesignSpace::with_bounds(raw.a, raw.b, raw.grain_diameter, raw.critical_diameter)
    }
}

impl From<DesignSpace> for RawSpace {
    fn from(s: DesignSpace) -> Self {
        RawSpace {
            a: s.a,
            b: s.b,
            grain_diameter: s.grain_diameter,
            critical_diameter: s.critical_diameter,
        }
    }
}

impl DesignSpace {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        Self::with_bounds(a, b, None, None)
    }

    pub fn with_bounds(
        a: f64,
        b: f64,
        grain_diameter: Option<f64>,
        critical_diameter: Option<f64>,
    ) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
            return Err(Error::InvalidSpace(format!(
                "need 0 < a < b, got [{a}, {b}]"
            )));
        }
        if let Some(d) = grain_diameter {
            if !(d > 0.0 && d < a) {
                return Err(Error::InvalidSpace(format!(
                    "grain diameter {d} must be positive and below a = {a}"
                )));
            }
        }
        if let Some(pc) = critical_diameter {
            if !(pc > b && pc.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "critical diameter {pc} must exceed b = {b}"
                )));
            }
        }
        Ok(DesignSpace {
            a,
            b,
            grain_diameter,
            critical_diameter,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn grain_diameter(&self) -> Option<f64> {
        self.grain_diameter
    }

    pub fn critical_diameter(&self) -> Option<f64> {
        self.critical_diameter
    }

    pub fn contains(&self, phi: f64) -> bool {
        self.a <= phi && phi <= self.b
    }
}

/// Target expected time between jams.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TimeThreshold(f64);

impl TryFrom<f64> for TimeThreshold {
    type Error = Error;
    fn try_from(t0: f64) -> Result<Self> {
        TimeThreshold::new(t0)
    }
}

impl From<TimeThreshold> for f64 {
    fn from(t: TimeThreshold) -> f64 {
        t.0
    }
}

impl TimeThreshold {
    pub fn new(t0: f64) -> Result<Self> {
        if t0.is_finite() && t0 > 0.0 {
            Ok(TimeThreshold(t0))
        } else {
            Err(Error::Threshold { t0, lower: 0.0 })
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// `log(C (T0 + 1))`, required to be strictly positive.
    pub(crate) fn log_target(&self, theta: &ModelParams) -> Result<f64> {
        let lt = theta.c.ln() + self.0.ln_1p();
        if lt > 0.0 {
            Ok(lt)
        } else {
            Err(Error::Threshold {
                t0: self.0,
                lower: theta.t0_lower_bound(),
            })
        }
    }

    pub fn check(&self, theta: &ModelParams) -> Result<()> {
        self.log_target(theta).map(|_| ())
    }
}

/// Gradient of `g` with respect to `(C, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CVector {
    #[serde(rename = "dC")]
    pub dc: f64,
    #[serde(rename = "dL")]
    pub dl: f64,
}

impl CVector {
    /// Slope `K = dL / dC` of the line spanned by the c-vector.
    pub fn slope(&self) -> f64 {
        self.dl / self.dc
    }

    pub fn norm(&self) -> f64 {
        self.dc.hypot(self.dl)
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.dc, self.dl]
    }
}

/// Symmetric 2x2 matrix stored by its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InfoMatrix {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl InfoMatrix {
    pub fn outer(v: [f64; 2]) -> Self {
        InfoMatrix {
            m11: v[0] * v[0],
            m12: v[0] * v[1],
            m22: v[1] * v[1],
        }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn scaled(&self, s: f64) -> Self {
        InfoMatrix {
            m11: s * self.m11,
            m12: s * self.m12,
            m22: s * self.m22,
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &InfoMatrix) {
        self.m11 += s * other.m11;
        self.m12 += s * other.m12;
        self.m22 += s * other.m22;
    }

    pub fn quad_form(&self, v: [f64; 2]) -> f64 {
        self.m11 * v[0] * v[0] + 2.0 * self.m12 * v[0] * v[1] + self.m22 * v[1] * v[1]
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m11 * v[0] + self.m12 * v[1],
            self.m12 * v[0] + self.m22 * v[1],
        ]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half_tr = 0.5 * self.trace();
        let r = (0.5 * (self.m11 - self.m22)).hypot(self.m12);
        [half_tr - r, half_tr + r]
    }

    /// Unit eigenvector of the largest eigenvalue.
    pub fn leading_eigenvector(&self) -> [f64; 2] {
        let [_, hi] = self.eigenvalues();
        // Rows of (M - hi I) are orthogonal to the eigenvector; use the larger one.
        let r1 = [self.m11 - hi, self.m12];
        let r2 = [self.m12, self.m22 - hi];
        let r = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) {
            r1
        } else {
            r2
        };
        let n = r[0].hypot(r[1]);
        if n == 0.0 {
            return [1.0, 0.0];
        }
        [-r[1] / n, r[0] / n]
    }

    pub fn inverse(&self) -> Option<InfoMatrix> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(InfoMatrix {
            m11: self.m22 / det,
            m12: -self.m12 / det,
            m22: self.m11 / det,
        })
    }

    pub fn to_array(&self) -> [[f64; 2]; 2] {
        [[self.m11, self.m12], [self.m12, self.m22]]
    }
}

/// Mean time between jams, `exp(L phi^2) / C - 1`.
pub fn eta(phi: f64, theta: &ModelParams) -> Result<f64> {
    let d = theta.check_phi(phi)?;
    Ok(d.exp_m1())
}

/// Smallest diameter whose mean time reaches `t0`: `sqrt(log(C (T0 + 1)) / L)`.
pub fn g_bound(theta: &ModelParams, t0: TimeThreshold) -> Result<f64> {
    let lt = t0.log_target(theta)?;
    Ok((lt / theta.l).sqrt())
}

/// Mean-time threshold equivalent to requiring `P(T > t1) >= 1 - alpha`.
pub fn t0_from_probability(t1: f64, alpha: f64) -> Result<TimeThreshold> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Probability(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(t1.is_finite() && t1 > 0.0) {
        return Err(Error::Probability(format!("T1 must be positive, got {t1}")));
    }
    TimeThreshold::new(-t1 / (-alpha).ln_1p())
}

/// Gradient of [`g_bound`] at `theta`.
pub fn c_vector(theta: &ModelParams, t0: TimeThreshold) -> Result<CVector> {
    let lt = t0.log_target(theta)?;
    let sl = lt.sqrt();
    let sqrt_l = theta.l.sqrt();
    let dc = 1.0 / (2.0 * sqrt_l * theta.c * sl);
    let dl = -sl / (2.0 * theta.l * sqrt_l);
    if !(dc.is_finite() && dl.is_finite()) {
        return Err(Error::Threshold {
            t0: t0.value(),
            lower: theta.t0_lower_bound(),
        });
    }
    Ok(CVector { dc, dl })
}

/// `G(phi) = exp(L phi^2) / (exp(L phi^2) - C)`.
pub(crate) fn g_factor(phi: f64, theta: &ModelParams) -> Result<f64> {
    let d = theta.check_phi(phi)?;
    // 1 - C exp(-L phi^2) = -expm1(-(L phi^2 - ln C))
    Ok(1.0 / -(-d).exp_m1())
}

/// Linearized regressor `f(phi) = grad(eta) / eta = G(phi) (1/C, -phi^2)`.
pub fn regressor(phi: f64, theta: &ModelParams) -> Result<[f64; 2]> {
    let g = g_factor(phi, theta)?;
    Ok([g / theta.c, -g * phi * phi])
}

/// Fisher information of a single observation at `phi`.
pub fn fim_point(phi: f64, theta: &ModelParams) -> Result<InfoMatrix> {
    let g = g_factor(phi, theta)?;
    let c = theta.c;
    let p2 = phi * phi;
    let s = g * g / c;
    Ok(InfoMatrix {
        m11: s / c,
        m12: -s * p2,
        m22: s * c * p2 * p2,
    })
}

/// Information matrix of an approximate design.
pub fn fim_design(design: &Design, theta: &ModelParams) -> Result<InfoMatrix> {
    let mut m = InfoMatrix::default();
    for (&phi, &w) in design.points().iter().zip(design.weights()) {
        m.add_scaled(w, &fim_point(phi, theta)?);
    }
    Ok(m)
}
