//! Locally c-optimal experimental designs for the minimum silo outlet size
//! that guarantees a target expected time between jams.
//!
//! Jam times at outlet diameter `phi` are modelled as exponential with mean
//! `exp(L phi^2) / C - 1`. The target `g = sqrt(log(C (T0 + 1)) / L)` is
//! estimated through its linearization, so the best design minimizes
//! `c' M(xi)^- c` with `c = grad g`. For this two-parameter model the Elfving
//! locus is always a quadrilateral and the optimal design has a closed form.
//!
//! ```
//! use silo_design::{c_optimal_design, DesignSpace, ModelParams, TimeThreshold};
//!
//! let theta = ModelParams::new(0.671741, 0.373098)?;
//! let space = DesignSpace::new(1.53, 5.63)?;
//! let (design, _) = c_optimal_design(&theta, &space, TimeThreshold::new(200.0)?)?;
//! assert_eq!(design.points(), &[1.53, 5.63]);
//! assert!((design.weights()[0] - 0.5526).abs() < 5e-4);
//! # Ok::<(), silo_design::Error>(())
//! ```

pub mod criterion;
pub mod design;
pub mod elfving;
pub mod error;
pub mod model;
pub mod sensitivity;
pub mod simulation;

pub use criterion::{brute_force_best, c_variance, criterion_value, efficiency, BruteForceGrid};
pub use design::Design;
pub use elfving::{
    build_locus, c_optimal, c_optimal_design, cartesian_slope, cartesian_y, curve_point,
    segment_thresholds, CrossingLocation, CrossingResult, CurveShape, ElfvingLocus, HullSide,
    LocusVertex, OptimalDesign, Thresholds,
};
pub use error::{Error, Result};
pub use model::{
    c_vector, eta, fim_design, fim_point, g_bound, regressor, t0_from_probability, CVector,
    DesignSpace, InfoMatrix, ModelParams, TimeThreshold,
};
pub use sensitivity::{sensitivity_grid, CellStatus, EfficiencyCell, EfficiencyMap, GridSpec};
pub use simulation::{
    lambda_rate, mle_from_means, run_monte_carlo, score_vector, Allocation, PointSample,
    ReplicateEstimates, SimConfig, SimulationReport,
};
