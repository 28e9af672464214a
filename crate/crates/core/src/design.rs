use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DesignSpace;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// An approximate design: distinct support diameters with probability weights.
///
/// Points are kept in the order given; for designs built from the Elfving
/// locus that is the order of the hull vertices along the crossed side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign", into = "RawDesign")]
pub struct Design {
    points: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDesign {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDesign> for Design {
    type Error = Error;
    fn try_from(raw: RawDesign) -> Result<Self> {
        Design::new(raw.points, raw.weights)
    }
}

impl From<Design> for RawDesign {
    fn from(d: Design) -> Self {
        RawDesign {
            points: d.points,
            weights: d.weights,
        }
    }
}

impl Design {
    /// Weights must be nonnegative and sum to one within `1e-12`.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::check_shape(&points, &weights)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDesign(format!("weights sum to {sum}, not 1")));
        }
        Ok(Design { points, weights })
    }

    /// Rescales arbitrary nonnegative weights to sum to one.
    pub fn normalized(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::check_shape(&points, &weights)?;
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::InvalidDesign(
                "weights must have a positive finite sum".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Design { points, weights })
    }

    pub fn one_point(phi: f64) -> Result<Self> {
        Self::new(vec![phi], vec![1.0])
    }

    /// `{phi_first: 1 - p, phi_second: p}`.
    pub fn two_point(phi_first: f64, phi_second: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDesign(format!("weight {p} outside [0, 1]")));
        }
        Self::new(vec![phi_first, phi_second], vec![1.0 - p, p])
    }

    fn check_shape(points: &[f64], weights: &[f64]) -> Result<()> {
        if points.is_empty() {
            return Err(Error::InvalidDesign("empty support".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidDesign(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDesign(format!(
                "negative or non-finite weight {w}"
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidDesign(format!(
                "non-finite support point {p}"
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(Error::InvalidDesign(format!("duplicate support point {p}")));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Support points carrying positive weight.
    pub fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .filter(|&(_, w)| w > 0.0)
    }

    pub fn validate_in(&self, space: &DesignSpace) -> Result<()> {
        match self.points.iter().find(|p| !space.contains(**p)) {
            Some(p) => Err(Error::InvalidDesign(format!(
                "support point {p} outside [{}, {}]",
                space.a(),
                space.b()
            ))),
            None => Ok(()),
        }
    }

    /// Same design with support points in ascending order.
    pub fn sorted(&self) -> Design {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&i, &j| self.points[i].total_cmp(&self.points[j]));
        Design {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Weight placed on `phi`, zero when it is not a support point.
    pub fn weight_at(&self, phi: f64) -> f64 {
        self.points
            .iter()
            .position(|&p| p == phi)
            .map_or(0.0, |i| self.weights[i])
    }
}
