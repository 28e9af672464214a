//! Robustness of a locally optimal design to the choice of nominal values.
//!
//! The design computed at the nominal `(C0, L0)` is compared, cell by cell,
//! with the design that would have been optimal had the parameters been
//! `(C*, L*)`. Both criteria are evaluated at `(C*, L*)`, so every valid cell
//! has efficiency at most one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::c_variance;
use crate::elfving::{build_locus, c_optimal, segment_thresholds};
use crate::error::{Error, Result};
use crate::model::{DesignSpace, ModelParams, TimeThreshold};
use crate::Design;

pub const DEFAULT_STEPS: usize = 13;
pub const DEFAULT_C_HALFWIDTH: f64 = 0.3;
pub const DEFAULT_L_HALFWIDTH: f64 = 0.15;
/// `L` half-width used when `T0` lies beyond `T03` at the nominal values.
pub const NARROW_L_HALFWIDTH: f64 = 0.05;

/// Uniform `(C*, L*)` grid around a center, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_center: f64,
    pub l_center: f64,
    pub c_halfwidth: f64,
    pub l_halfwidth: f64,
    pub c_steps: usize,
    pub l_steps: usize,
}

impl GridSpec {
    /// 13 x 13 cells, `C0 +- 0.3` and `L0 +- 0.15`, narrowing `L` to
    /// `+- 0.05` when `T0 > T03` at the nominal values.
    pub fn default_for(
        nominal: &ModelParams,
        space: &DesignSpace,
        t0: TimeThreshold,
    ) -> Result<Self> {
        let th = segment_thresholds(&build_locus(nominal, space)?);
        let l_halfwidth = if t0.value() > th.t03 {
            NARROW_L_HALFWIDTH
        } else {
            DEFAULT_L_HALFWIDTH
        };
        Ok(GridSpec {
            c_center: nominal.c(),
            l_center: nominal.l(),
            c_halfwidth: DEFAULT_C_HALFWIDTH,
            l_halfwidth,
            c_steps: DEFAULT_STEPS,
            l_steps: DEFAULT_STEPS,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.c_center,
            self.l_center,
            self.c_halfwidth,
            self.l_halfwidth,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.c_halfwidth < 0.0 || self.l_halfwidth < 0.0 {
            return Err(Error::Config(
                "grid centers and half-widths must be finite, widths >= 0".into(),
            ));
        }
        if self.c_steps == 0 || self.l_steps == 0 {
            return Err(Error::Config("grid step counts must be positive".into()));
        }
        Ok(())
    }

    fn axis(center: f64, halfwidth: f64, steps: usize) -> Vec<f64> {
        if steps == 1 {
            return vec![center];
        }
        (0..steps)
            .map(|k| center + halfwidth * (2.0 * k as f64 / (steps - 1) as f64 - 1.0))
            .collect()
    }

    /// `C*` values in ascending order.
    pub fn c_values(&self) -> Vec<f64> {
        Self::axis(self.c_center, self.c_halfwidth, self.c_steps)
    }

    /// `L*` values in descending order (top row of a heatmap first).
    pub fn l_values(&self) -> Vec<f64> {
        let mut v = Self::axis(self.l_center, self.l_halfwidth, self.l_steps);
        v.reverse();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// `(C*, L*)` is not a valid parameter on the design space, or `T0` is
    /// not above `(1 - C*)/C*`.
    Invalid,
    /// The nominal design cannot estimate `g` at `(C*, L*)`.
    Inestimable,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Invalid => "invalid",
            CellStatus::Inestimable => "inestimable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCell {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// `None` unless the status is `Ok`.
    pub efficiency: Option<f64>,
    pub segment_nominal: u8,
    pub segment_true: Option<u8>,
    pub status: CellStatus,
}

impl EfficiencyCell {
    /// The optimal design at `(C*, L*)` uses a different hull side than the
    /// nominal one.
    pub fn segment_changed(&self) -> bool {
        self.segment_true.is_some_and(|s| s != self.segment_nominal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMap {
    pub grid: GridSpec,
    pub nominal: ModelParams,
    pub space: DesignSpace,
    pub t0: TimeThreshold,
    pub nominal_design: Design,
    /// Row-major, rows by `L*` descending, columns by `C*` ascending.
    pub cells: Vec<EfficiencyCell>,
}

impl EfficiencyMap {
    pub fn rows(&self) -> usize {
        self.grid.l_steps
    }

    pub fn cols(&self) -> usize {
        self.grid.c_steps
    }

    pub fn cell(&self, row: usize, col: usize) -> &EfficiencyCell {
        &self.cells[row * self.cols() + col]
    }

    /// Valid cell of lowest efficiency, first in row-major order on ties.
    pub fn min_cell(&self) -> Option<(usize, &EfficiencyCell)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.efficiency.map(|e| (i, c, e)))
            .fold(
                None,
                |best: Option<(usize, &EfficiencyCell, f64)>, (i, c, e)| match best {
                    Some((_, _, be)) if be <= e => best,
                    _ => Some((i, c, e)),
                },
            )
            .map(|(i, c, _)| (i, c))
    }
}

/// Efficiency of the nominal c-optimal design over a grid of candidate
/// true parameter values.
pub fn sensitivity_grid(
    nominal: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
    grid: &GridSpec,
) -> Result<EfficiencyMap> {
    grid.validate()?;
    let nominal_opt = c_optimal(nominal, space, t0)?;
    let segment_nominal = nominal_opt.crossing.location.segment_index();
    let design0 = nominal_opt.design;

    let cs = grid.c_values();
    let coords: Vec<(f64, f64)> = grid
        .l_values()
        .into_iter()
        .flat_map(|l| cs.iter().map(move |&c| (c, l)))
        .collect();

    let cells = coords
        .par_iter()
        .map(|&(c, l)| evaluate_cell(c, l, space, t0, &design0, segment_nominal))
        .collect();

    Ok(EfficiencyMap {
        grid: *grid,
        nominal: *nominal,
        space: *space,
        t0,
        nominal_design: design0,
        cells,
    })
}

fn evaluate_cell(
    c: f64,
    l: f64,
    space: &DesignSpace,
    t0: TimeThreshold,
    design0: &Design,
    segment_nominal: u8,
) -> EfficiencyCell {
    let mut cell = EfficiencyCell {
        c,
        l,
        efficiency: None,
        segment_nominal,
        segment_true: None,
        status: CellStatus::Invalid,
    };
    let Ok(theta) = ModelParams::new(c, l) else {
        return cell;
    };
    let Ok(opt) = c_optimal(&theta, space, t0) else {
        return cell;
    };
    cell.segment_true = Some(opt.crossing.location.segment_index());

    let Ok(var_true) = c_variance(&opt.design, &theta, t0) else {
        return cell;
    };
    match c_variance(design0, &theta, t0) {
        Ok(var_nominal) => {
            cell.efficiency = Some(var_true / var_nominal);
            cell.status = CellStatus::Ok;
        }
        Err(Error::Inestimable) => cell.status = CellStatus::Inestimable,
        Err(_) => {}
    }
    cell
}
