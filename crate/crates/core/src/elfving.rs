//! Elfving locus of the linearized jam-time model and the c-optimal design
//! read off from it.
//!
//! The regressor curve `f([a, b])` lies in the fourth quadrant and its
//! convex hull together with the reflection `-f([a, b])` is always the
//! quadrilateral spanned by the endpoint images:
//!
//! ```text
//! A1 = -f(b),  A2 = f(a),  A3 = f(b),  A4 = -f(a)
//! ```
//!
//! The c-vector `grad g` also points into the fourth quadrant, so the ray it
//! spans leaves the hull through side A1A2, A2A3 or A3A4 depending on how
//! `T0` compares with the vertex thresholds `T02` and `T03`.

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::model::{c_vector, regressor, DesignSpace, ModelParams, TimeThreshold};

/// Relative distance of `T0` to a vertex threshold below which the crossing
/// is treated as passing exactly through the vertex.
pub const VERTEX_TOL: f64 = 1e-12;

/// Guard on `|K - s|` for the c-line slope `K` and a side slope `s`.
pub const PARALLEL_TOL: f64 = 1e-12;

/// Point `f(phi) = (x(phi), y(phi))` of the regressor curve.
pub fn curve_point(phi: f64, theta: &ModelParams) -> Result<(f64, f64)> {
    let [x, y] = regressor(phi, theta)?;
    Ok((x, y))
}

fn cartesian_log(x: f64, theta: &ModelParams) -> Result<(f64, f64)> {
    let c = theta.c();
    let cx1 = c * x - 1.0;
    if !(cx1 > 0.0 && x.is_finite()) {
        return Err(Error::CurveDomain { x });
    }
    Ok((cx1, (c * c * x / cx1).ln()))
}

/// The curve as a graph `y(x) = -(C/L) x log(C^2 x / (C x - 1))`.
pub fn cartesian_y(x: f64, theta: &ModelParams) -> Result<f64> {
    let (_, log_term) = cartesian_log(x, theta)?;
    Ok(-theta.c() / theta.l() * x * log_term)
}

/// `dy/dx = (C/L) (1/(C x - 1) - log(C^2 x / (C x - 1)))`.
pub fn cartesian_slope(x: f64, theta: &ModelParams) -> Result<f64> {
    let (cx1, log_term) = cartesian_log(x, theta)?;
    Ok(theta.c() / theta.l() * (1.0 / cx1 - log_term))
}

/// Slope of the curve at `A2 = f(a)`: `exp(a^2 L)/L - C/L - a^2 C`.
pub fn slope_at_left_end(theta: &ModelParams, a: f64) -> f64 {
    let (c, l) = (theta.c(), theta.l());
    (l * a * a).exp() / l - c / l - a * a * c
}

/// Whether the curve rises or falls as it leaves `A2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveShape {
    /// `C < exp(a^2 L) / (1 + a^2 L)`: the curve is increasing in `x` everywhere.
    Increasing,
    /// `C >= exp(a^2 L) / (1 + a^2 L)`: negative slope at `A2`, still steeper
    /// than the side A1A2.
    FallingAtLeftEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusVertex {
    pub x: f64,
    pub y: f64,
    /// Diameter whose regressor (or its reflection) generates the vertex.
    pub phi: f64,
    pub reflected: bool,
}

impl LocusVertex {
    fn point(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// The quadrilateral `A1 A2 A3 A4` for given parameters and design space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElfvingLocus {
    vertices: [LocusVertex; 4],
    theta: ModelParams,
    space: DesignSpace,
}

pub fn build_locus(theta: &ModelParams, space: &DesignSpace) -> Result<ElfvingLocus> {
    theta.validate_on(space)?;
    let (xa, ya) = curve_point(space.a(), theta)?;
    let (xb, yb) = curve_point(space.b(), theta)?;
    let vertices = [
        LocusVertex {
            x: -xb,
            y: -yb,
            phi: space.b(),
            reflected: true,
        },
        LocusVertex {
            x: xa,
            y: ya,
            phi: space.a(),
            reflected: false,
        },
        LocusVertex {
            x: xb,
            y: yb,
            phi: space.b(),
            reflected: false,
        },
        LocusVertex {
            x: -xa,
            y: -ya,
            phi: space.a(),
            reflected: true,
        },
    ];
    Ok(ElfvingLocus {
        vertices,
        theta: *theta,
        space: *space,
    })
}

/// A point of the regressor curve together with its local slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub phi: f64,
    pub x: f64,
    pub y: f64,
    pub slope: f64,
}

impl ElfvingLocus {
    pub fn vertices(&self) -> &[LocusVertex; 4] {
        &self.vertices
    }

    /// Vertex `A_i` with the 1-based index used throughout.
    pub fn vertex(&self, i: usize) -> &LocusVertex {
        &self.vertices[i - 1]
    }

    pub fn theta(&self) -> &ModelParams {
        &self.theta
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn shape(&self) -> CurveShape {
        if slope_at_left_end(&self.theta, self.space.a()) > 0.0 {
            CurveShape::Increasing
        } else {
            CurveShape::FallingAtLeftEnd
        }
    }

    /// Slope of side `A_i A_{i+1}` (indices modulo 4).
    pub fn side_slope(&self, i: usize) -> f64 {
        let p = self.vertex(i);
        let q = self.vertex(i % 4 + 1);
        (q.y - p.y) / (q.x - p.x)
    }

    /// `n` equispaced samples of the curve on `[a, b]`, endpoints included.
    pub fn sample_curve(&self, n: usize) -> Result<Vec<CurveSample>> {
        if n < 2 {
            return Err(Error::InvalidSpace(format!(
                "need at least 2 curve samples, got {n}"
            )));
        }
        let (a, b) = (self.space.a(), self.space.b());
        (0..n)
            .map(|k| {
                let phi = if k == n - 1 {
                    b
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                };
                let (x, y) = curve_point(phi, &self.theta)?;
                let slope = cartesian_slope(x, &self.theta)?;
                Ok(CurveSample { phi, x, y, slope })
            })
            .collect()
    }

    /// Whether `pt` lies inside or on the quadrilateral, allowing a signed
    /// distance of `tol` (relative to the hull diameter) outside each side.
    pub fn contains(&self, pt: [f64; 2], tol: f64) -> bool {
        let orient = self.orientation();
        let scale = self
            .vertices
            .iter()
            .map(|v| v.x.hypot(v.y))
            .fold(0.0, f64::max);
        (1..=4).all(|i| {
            let p = self.vertex(i).point();
            let q = self.vertex(i % 4 + 1).point();
            let len = (q[0] - p[0]).hypot(q[1] - p[1]);
            let cross = (q[0] - p[0]) * (pt[1] - p[1]) - (q[1] - p[1]) * (pt[0] - p[0]);
            orient * cross / len >= -tol * scale
        })
    }

    /// Sign of the signed area of `A1 A2 A3 A4`.
    fn orientation(&self) -> f64 {
        let area: f64 = (1..=4)
            .map(|i| {
                let p = self.vertex(i);
                let q = self.vertex(i % 4 + 1);
                p.x * q.y - q.x * p.y
            })
            .sum();
        area.signum()
    }
}

/// Thresholds delimiting which hull side the c-line crosses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `max(0, (1 - C)/C)`; admissible `T0` are strictly greater.
    pub lower: f64,
    pub t02: f64,
    pub t03: f64,
}

impl Thresholds {
    pub fn side_for(&self, t0: f64) -> HullSide {
        if t0 <= self.t02 {
            HullSide::A1A2
        } else if t0 <= self.t03 {
            HullSide::A2A3
        } else {
            HullSide::A3A4
        }
    }
}

/// `T0i = exp(-y_i L / (x_i C)) / C - 1` for the two fourth-quadrant vertices.
pub fn segment_thresholds(locus: &ElfvingLocus) -> Thresholds {
    let theta = locus.theta();
    let (c, l) = (theta.c(), theta.l());
    let at = |v: &LocusVertex| (-v.y * l / (v.x * c) - c.ln()).exp_m1();
    Thresholds {
        lower: theta.t0_lower_bound(),
        t02: at(locus.vertex(2)),
        t03: at(locus.vertex(3)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HullSide {
    A1A2,
    A2A3,
    A3A4,
}

impl HullSide {
    /// Index `i` of the side `A_i A_{i+1}`.
    pub fn index(self) -> u8 {
        match self {
            HullSide::A1A2 => 1,
            HullSide::A2A3 => 2,
            HullSide::A3A4 => 3,
        }
    }
}

/// Where the c-line leaves the hull.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingLocation {
    Side(HullSide),
    VertexA2,
    VertexA3,
}

impl CrossingLocation {
    /// Side index with vertices assigned to the side they close
    /// (`T0 = T02` belongs to A1A2, `T0 = T03` to A2A3).
    pub fn segment_index(&self) -> u8 {
        match self {
            CrossingLocation::Side(s) => s.index(),
            CrossingLocation::VertexA2 => 1,
            CrossingLocation::VertexA3 => 2,
        }
    }

    pub fn is_vertex(&self) -> bool {
        !matches!(self, CrossingLocation::Side(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingResult {
    pub location: CrossingLocation,
    pub x0: f64,
    pub y0: f64,
    /// Weight on the second vertex of the crossed side.
    pub p: f64,
}

impl CrossingResult {
    pub fn norm(&self) -> f64 {
        self.x0.hypot(self.y0)
    }
}

/// Everything the c-optimal design computation produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalDesign {
    pub design: Design,
    pub crossing: CrossingResult,
    pub thresholds: Thresholds,
    pub locus: ElfvingLocus,
}

/// Locally c-optimal design for estimating `g` at `theta`.
pub fn c_optimal_design(
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
) -> Result<(Design, CrossingResult)> {
    let out = c_optimal(theta, space, t0)?;
    Ok((out.design, out.crossing))
}

/// As [`c_optimal_design`], also returning the locus and thresholds.
pub fn c_optimal(
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
) -> Result<OptimalDesign> {
    t0.check(theta)?;
    let locus = build_locus(theta, space)?;
    let thresholds = segment_thresholds(&locus);
    let k = c_vector(theta, t0)?.slope();
    let t = t0.value();

    let vertex_hit = |ti: f64| ((t - ti) / ti).abs() < VERTEX_TOL;
    for (ti, idx, location) in [
        (thresholds.t02, 2, CrossingLocation::VertexA2),
        (thresholds.t03, 3, CrossingLocation::VertexA3),
    ] {
        if vertex_hit(ti) {
            let v = locus.vertex(idx);
            let design = Design::one_point(v.phi)?;
            let crossing = CrossingResult {
                location,
                x0: v.x,
                y0: v.y,
                p: 1.0,
            };
            return Ok(OptimalDesign {
                design,
                crossing,
                thresholds,
                locus,
            });
        }
    }

    let side = thresholds.side_for(t);
    let i = side.index() as usize;
    let (p_i, p_next) = (locus.vertex(i), locus.vertex(i + 1));
    let (dx, dy) = (p_next.x - p_i.x, p_next.y - p_i.y);

    // Intersect A_i + s (A_{i+1} - A_i) with y = K x. The parametric form
    // stays finite when the side is close to vertical.
    let denom = dy - k * dx;
    if denom.abs() < PARALLEL_TOL * dx.abs() || denom == 0.0 {
        return Err(Error::ParallelCrossing {
            segment: side.index(),
        });
    }
    let s = ((k * p_i.x - p_i.y) / denom).clamp(0.0, 1.0);
    let (x0, y_side) = (p_i.x + s * dx, p_i.y + s * dy);
    let y0 = k * x0;
    let p = ((x0 - p_i.x).hypot(y_side - p_i.y) / dx.hypot(dy)).clamp(0.0, 1.0);

    let design = Design::two_point(p_i.phi, p_next.phi, p)?;
    let crossing = CrossingResult {
        location: CrossingLocation::Side(side),
        x0,
        y0,
        p,
    };
    Ok(OptimalDesign {
        design,
        crossing,
        thresholds,
        locus,
    })
}
