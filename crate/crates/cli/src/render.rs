//! Human, JSON and CSV renderings of command results.

use std::io::Write;

use serde::{Deserialize, Serialize};
use silo_design::elfving::CurveSample;
use silo_design::*;

use crate::args::Format;

/// Machine-format number: 17 significant digits, '.' separator.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w)
}

fn json<W: Write, T: Serialize>(mut w: W, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn side_name(location: CrossingLocation) -> &'static str {
    match location {
        CrossingLocation::Side(HullSide::A1A2) => "side A1A2",
        CrossingLocation::Side(HullSide::A2A3) => "side A2A3",
        CrossingLocation::Side(HullSide::A3A4) => "side A3A4",
        CrossingLocation::VertexA2 => "vertex A2",
        CrossingLocation::VertexA3 => "vertex A3",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub theta: ModelParams,
    pub space: DesignSpace,
    pub t0: TimeThreshold,
    pub g: f64,
    pub c_vector: CVector,
    pub design: Design,
    pub crossing: CrossingResult,
    pub segment: u8,
    pub thresholds: Thresholds,
    /// `c' M^- c` of the optimal design.
    pub criterion: f64,
}

impl DesignReport {
    pub fn compute(theta: &ModelParams, space: &DesignSpace, t0: TimeThreshold) -> Result<Self> {
        let opt = c_optimal(theta, space, t0)?;
        Ok(DesignReport {
            theta: *theta,
            space: *space,
            t0,
            g: g_bound(theta, t0)?,
            c_vector: c_vector(theta, t0)?,
            criterion: c_variance(&opt.design, theta, t0)?,
            segment: opt.crossing.location.segment_index(),
            design: opt.design,
            crossing: opt.crossing,
            thresholds: opt.thresholds,
        })
    }

    pub fn write<W: Write>(&self, mut w: W, format: Format) -> anyhow::Result<()> {
        match format {
            Format::Json => json(w, self),
            Format::Csv => {
                let mut out = csv_writer(w);
                out.write_record([
                    "phi",
                    "weight",
                    "segment",
                    "x0",
                    "y0",
                    "p",
                    "T0",
                    "T02",
                    "T03",
                    "g",
                    "criterion",
                ])?;
                for (phi, weight) in self.design.support() {
                    out.write_record([
                        num(phi),
                        num(weight),
                        self.segment.to_string(),
                        num(self.crossing.x0),
                        num(self.crossing.y0),
                        num(self.crossing.p),
                        num(self.t0.value()),
                        num(self.thresholds.t02),
                        num(self.thresholds.t03),
                        num(self.g),
                        num(self.criterion),
                    ])?;
                }
                out.flush()?;
                Ok(())
            }
            Format::Human => {
                let support: Vec<String> = self
                    .design
                    .support()
                    .map(|(phi, w)| format!("{w:.4} at {phi:.4}"))
                    .collect();
                writeln!(w, "design:     {}", support.join(", "))?;
                writeln!(
                    w,
                    "crossing:   {} (segment {}), p = {:.4}, point ({:.4}, {:.4})",
                    side_name(self.crossing.location),
                    self.segment,
                    self.crossing.p,
                    self.crossing.x0,
                    self.crossing.y0
                )?;
                write_thresholds(&mut w, &self.thresholds)?;
                writeln!(w, "T0:         {:.4}", self.t0.value())?;
                writeln!(w, "g:          {:.4}", self.g)?;
                writeln!(w, "criterion:  {:.4}", self.criterion)?;
                Ok(())
            }
        }
    }
}

fn write_thresholds<W: Write>(w: &mut W, th: &Thresholds) -> std::io::Result<()> {
    writeln!(
        w,
        "thresholds: T0 > {:.4}, T02 = {:.4}, T03 = {:.4}",
        th.lower, th.t02, th.t03
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub theta: ModelParams,
    pub space: DesignSpace,
    pub thresholds: Thresholds,
    pub t0: Option<TimeThreshold>,
    /// Hull side crossed at `t0`, when given.
    pub segment: Option<u8>,
}

impl ThresholdReport {
    pub fn compute(
        theta: &ModelParams,
        space: &DesignSpace,
        t0: Option<TimeThreshold>,
    ) -> Result<Self> {
        let thresholds = segment_thresholds(&build_locus(theta, space)?);
        let segment = match t0 {
            Some(t0) => Some(
                c_optimal(theta, space, t0)?
                    .crossing
                    .location
                    .segment_index(),
            ),
            None => None,
        };
        Ok(ThresholdReport {
            theta: *theta,
            space: *space,
            thresholds,
            t0,
            segment,
        })
    }

    pub fn write<W: Write>(&self, mut w: W, format: Format) -> anyhow::Result<()> {
        match format {
            Format::Json => json(w, self),
            Format::Csv => {
                let mut out = csv_writer(w);
                out.write_record(["lower", "T02", "T03", "T0", "segment"])?;
                out.write_record([
                    num(self.thresholds.lower),
                    num(self.thresholds.t02),
                    num(self.thresholds.t03),
                    opt_num(self.t0.map(|t| t.value())),
                    self.segment.map(|s| s.to_string()).unwrap_or_default(),
                ])?;
                out.flush()?;
                Ok(())
            }
            Format::Human => {
                write_thresholds(&mut w, &self.thresholds)?;
                if let (Some(t0), Some(s)) = (self.t0, self.segment) {
                    writeln!(w, "T0 = {:.4} crosses segment {s}", t0.value())?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusReport {
    pub locus: ElfvingLocus,
    pub shape: CurveShape,
    pub thresholds: Thresholds,
    /// Curve slope at each vertex, in vertex order.
    pub vertex_slopes: [f64; 4],
    pub curve: Vec<CurveSample>,
    pub t0: Option<TimeThreshold>,
    pub c_vector: Option<CVector>,
}

impl LocusReport {
    pub fn compute(
        theta: &ModelParams,
        space: &DesignSpace,
        t0: Option<TimeThreshold>,
        samples: usize,
    ) -> Result<Self> {
        let locus = build_locus(theta, space)?;
        let mut vertex_slopes = [0.0; 4];
        for (s, v) in vertex_slopes.iter_mut().zip(locus.vertices()) {
            // the reflection through the origin keeps slopes
            let x = if v.reflected { -v.x } else { v.x };
            *s = cartesian_slope(x, theta)?;
        }
        Ok(LocusReport {
            shape: locus.shape(),
            thresholds: segment_thresholds(&locus),
            vertex_slopes,
            curve: locus.sample_curve(samples)?,
            c_vector: t0.map(|t0| c_vector(theta, t0)).transpose()?,
            t0,
            locus,
        })
    }

    pub fn write<W: Write>(&self, mut w: W, format: Format) -> anyhow::Result<()> {
        match format {
            Format::Json => json(w, self),
            Format::Csv => {
                let mut out = csv_writer(w);
                out.write_record(["kind", "index", "phi", "x", "y", "slope"])?;
                for (k, s) in self.curve.iter().enumerate() {
                    out.write_record([
                        "curve".into(),
                        k.to_string(),
                        num(s.phi),
                        num(s.x),
                        num(s.y),
                        num(s.slope),
                    ])?;
                }
                for (k, s) in self.curve.iter().enumerate() {
                    out.write_record([
                        "reflected".into(),
                        k.to_string(),
                        num(s.phi),
                        num(-s.x),
                        num(-s.y),
                        num(s.slope),
                    ])?;
                }
                for (i, (v, slope)) in self
                    .locus
                    .vertices()
                    .iter()
                    .zip(self.vertex_slopes)
                    .enumerate()
                {
                    out.write_record([
                        "vertex".into(),
                        (i + 1).to_string(),
                        num(v.phi),
                        num(v.x),
                        num(v.y),
                        num(slope),
                    ])?;
                }
                if let Some(c) = self.c_vector {
                    out.write_record([
                        "c_direction".into(),
                        String::new(),
                        String::new(),
                        num(c.dc),
                        num(c.dl),
                        num(c.slope()),
                    ])?;
                }
                out.flush()?;
                Ok(())
            }
            Format::Human => {
                for (i, (v, slope)) in self
                    .locus
                    .vertices()
                    .iter()
                    .zip(self.vertex_slopes)
                    .enumerate()
                {
                    writeln!(
                        w,
                        "A{}: ({:.4}, {:.4})  phi = {:.4}{}  curve slope {:.4}",
                        i + 1,
                        v.x,
                        v.y,
                        v.phi,
                        if v.reflected { " (reflected)" } else { "" },
                        slope
                    )?;
                }
                let shape = match self.shape {
                    CurveShape::Increasing => "increasing",
                    CurveShape::FallingAtLeftEnd => "falling at A2",
                };
                writeln!(w, "curve: {shape}, {} samples", self.curve.len())?;
                write_thresholds(&mut w, &self.thresholds)?;
                if let Some(c) = self.c_vector {
                    writeln!(w, "c = ({:.4}, {:.4}), slope {:.4}", c.dc, c.dl, c.slope())?;
                }
                Ok(())
            }
        }
    }
}

pub fn sensitivity_summary(map: &EfficiencyMap) -> String {
    let invalid = map.cells.iter().filter(|c| c.efficiency.is_none()).count();
    let changed = map.cells.iter().filter(|c| c.segment_changed()).count();
    match map.min_cell() {
        Some((_, cell)) => format!(
            "{} cells ({invalid} without efficiency, {changed} change segment); min efficiency {:.4} at C* = {:.4}, L* = {:.4}{}",
            map.cells.len(),
            cell.efficiency.unwrap_or(f64::NAN),
            cell.c,
            cell.l,
            if cell.segment_changed() { " (segment change)" } else { "" }
        ),
        None => format!("{} cells, none valid", map.cells.len()),
    }
}

pub fn write_sensitivity<W: Write>(
    map: &EfficiencyMap,
    mut w: W,
    format: Format,
) -> anyhow::Result<()> {
    match format {
        Format::Json => json(w, map),
        Format::Csv => {
            let mut out = csv_writer(w);
            out.write_record([
                "C",
                "L",
                "efficiency",
                "segment_nominal",
                "segment_true",
                "status",
            ])?;
            for c in &map.cells {
                out.write_record([
                    num(c.c),
                    num(c.l),
                    opt_num(c.efficiency),
                    c.segment_nominal.to_string(),
                    c.segment_true.map(|s| s.to_string()).unwrap_or_default(),
                    c.status.as_str().to_string(),
                ])?;
            }
            out.flush()?;
            Ok(())
        }
        Format::Human => {
            write!(w, "{:>8}", "L*\\C*")?;
            for c in map.grid.c_values() {
                write!(w, " {c:>7.4}")?;
            }
            writeln!(w)?;
            for (r, l) in map.grid.l_values().into_iter().enumerate() {
                write!(w, "{l:>8.4}")?;
                for col in 0..map.cols() {
                    let cell = map.cell(r, col);
                    match cell.efficiency {
                        Some(e) => write!(
                            w,
                            " {e:>6.4}{}",
                            if cell.segment_changed() { "*" } else { " " }
                        )?,
                        None => write!(w, " {:>7}", "-")?,
                    }
                }
                writeln!(w)?;
            }
            writeln!(w, "* optimal design at (C*, L*) uses a different hull side")?;
            writeln!(w, "{}", sensitivity_summary(map))?;
            Ok(())
        }
    }
}

pub fn simulation_summary(rep: &SimulationReport) -> String {
    format!(
        "{} replicates used ({} degenerate); mean g_hat {:.4} (g = {:.4}, bias {:.4}); Var(g_hat) {:.4e}, bound {:.4e}",
        rep.replicates_used,
        rep.failures.total(),
        rep.mean_g_hat,
        rep.g_true,
        rep.bias,
        rep.empirical_var_g,
        rep.crao_var_g
    )
}

pub fn write_simulation<W: Write>(
    rep: &SimulationReport,
    mut w: W,
    format: Format,
) -> anyhow::Result<()> {
    match format {
        Format::Json => json(w, rep),
        Format::Csv => {
            let mut out = csv_writer(w);
            out.write_record(["field", "value"])?;
            let rows = [
                ("g_true", rep.g_true),
                ("mean_g_hat", rep.mean_g_hat),
                ("bias", rep.bias),
                ("mean_c_hat", rep.mean_c_hat),
                ("mean_l_hat", rep.mean_l_hat),
                ("empirical_var_g", rep.empirical_var_g),
                ("linearized_empirical_var_g", rep.linearized_empirical_var_g),
                ("crao_var_g", rep.crao_var_g),
                ("design_var_g", rep.design_var_g),
                ("mean_score_c", rep.mean_score[0]),
                ("mean_score_l", rep.mean_score[1]),
                ("score_se_c", rep.score_std_error[0]),
                ("score_se_l", rep.score_std_error[1]),
            ];
            out.write_record([
                "replicates_used".to_string(),
                rep.replicates_used.to_string(),
            ])?;
            out.write_record(["failures".to_string(), rep.failures.total().to_string()])?;
            for (k, v) in rows {
                out.write_record([k.to_string(), num(v)])?;
            }
            out.flush()?;
            Ok(())
        }
        Format::Human => {
            writeln!(
                w,
                "design:        {:?} with weights {:.4?}",
                rep.design.points(),
                rep.design.weights()
            )?;
            writeln!(
                w,
                "n = {}, m = {}, seed = {}",
                rep.config.n, rep.config.m, rep.config.seed
            )?;
            writeln!(w, "g:             {:.4}", rep.g_true)?;
            writeln!(
                w,
                "mean g_hat:    {:.4} (bias {:.4})",
                rep.mean_g_hat, rep.bias
            )?;
            writeln!(
                w,
                "Var(g_hat):    {:.4e} empirical, {:.4e} linearized",
                rep.empirical_var_g, rep.linearized_empirical_var_g
            )?;
            writeln!(
                w,
                "bound:         {:.4e} adjusted, {:.4e} delta method",
                rep.crao_var_g, rep.design_var_g
            )?;
            writeln!(
                w,
                "mean score:    ({:.4}, {:.4}) +- ({:.4}, {:.4})",
                rep.mean_score[0],
                rep.mean_score[1],
                rep.score_std_error[0],
                rep.score_std_error[1]
            )?;
            writeln!(w, "degenerate:    {}", rep.failures.total())?;
            Ok(())
        }
    }
}

pub fn write_replicates<W: Write>(reps: &[ReplicateEstimates], w: W) -> anyhow::Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "replicate",
        "n_first",
        "c_hat",
        "l_hat",
        "g_hat",
        "score_c",
        "score_l",
        "failure",
    ])?;
    for r in reps {
        let failure = r.failure.map(|f| {
            serde_json::to_value(f)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
        });
        out.write_record([
            r.replicate.to_string(),
            r.n_first.to_string(),
            num(r.c_hat),
            num(r.l_hat),
            opt_num(r.g_hat),
            num(r.score[0]),
            num(r.score[1]),
            failure.flatten().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
