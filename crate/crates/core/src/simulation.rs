//! Monte Carlo check of the two linearizations behind the design: the
//! Fisher-information approximation of `Cov(theta_hat)` and the delta-method
//! variance of `g(theta_hat)`.
//!
//! Each replicate allocates `n` observations to the two support points of
//! the c-optimal design, draws exponential jam times, and computes the
//! closed-form MLEs
//!
//! ```text
//! L_hat = log((1 + Tj) / (1 + Ti)) / (phi_j^2 - phi_i^2)
//! C_hat = ((1 + Tj)^(phi_i^2) / (1 + Ti)^(phi_j^2))^(1 / (phi_j^2 - phi_i^2))
//! ```
//!
//! from the group means `Ti`, `Tj`, together with the score at the true
//! parameters. Replicate `r` draws from its own ChaCha stream of the base
//! seed, so results do not depend on how replicates are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{c_variance, criterion_value};
use crate::design::Design;
use crate::elfving::c_optimal;
use crate::error::{Error, Result};
use crate::model::{
    c_vector, fim_design, g_bound, g_factor, DesignSpace, InfoMatrix, ModelParams, TimeThreshold,
};

/// Exponential rate at `phi`: `C / (exp(L phi^2) - C)`, i.e. `1 / eta(phi)`.
pub fn lambda_rate(phi: f64, theta: &ModelParams) -> Result<f64> {
    let d = theta.check_phi(phi)?;
    Ok(1.0 / d.exp_m1())
}

/// Closed-form MLE formulas without any validity check. Equal means give
/// `L_hat = 0` and `C_hat = 1 / (1 + T)`.
pub fn mle_formula(tbar_i: f64, tbar_j: f64, phi_i: f64, phi_j: f64) -> (f64, f64) {
    let (qi, qj) = (phi_i * phi_i, phi_j * phi_j);
    let d = qj - qi;
    let (li, lj) = (tbar_i.ln_1p(), tbar_j.ln_1p());
    let l_hat = (lj - li) / d;
    let c_hat = ((qi * lj - qj * li) / d).exp();
    (c_hat, l_hat)
}

/// MLE of `(C, L)` from the mean times observed at two distinct diameters.
pub fn mle_from_means(tbar_i: f64, tbar_j: f64, phi_i: f64, phi_j: f64) -> Result<(f64, f64)> {
    if !(tbar_i > 0.0 && tbar_j > 0.0 && tbar_i.is_finite() && tbar_j.is_finite()) {
        return Err(Error::Degenerate(format!(
            "mean times must be positive, got {tbar_i}, {tbar_j}"
        )));
    }
    if phi_i * phi_i == phi_j * phi_j {
        return Err(Error::Degenerate("support diameters coincide".into()));
    }
    let (c_hat, l_hat) = mle_formula(tbar_i, tbar_j, phi_i, phi_j);
    if !(l_hat > 0.0 && c_hat > 0.0 && c_hat.is_finite() && l_hat.is_finite()) {
        return Err(Error::Degenerate(format!(
            "estimate C = {c_hat}, L = {l_hat} is not admissible"
        )));
    }
    Ok((c_hat, l_hat))
}

/// Jam times observed at one diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub phi: f64,
    pub times: Vec<f64>,
}

/// Score contribution of `n` observations at `phi` summing to `sum_t`.
fn score_from_sums(phi: f64, n: f64, sum_t: f64, theta: &ModelParams) -> Result<[f64; 2]> {
    let lambda = lambda_rate(phi, theta)?;
    let g = g_factor(phi, theta)?;
    // d/dC: 1/C + 1/(e - C) - e t / (e - C)^2, with e = exp(L phi^2)
    let sc = (n * (1.0 + lambda) - g * lambda * sum_t) / theta.c();
    // d/dL: -phi^2 e / (e - C) (1 - C t / (e - C))
    let sl = -phi * phi * g * (n - lambda * sum_t);
    Ok([sc, sl])
}

/// Gradient of the log-likelihood of `sample` with respect to `(C, L)`.
pub fn score_vector(sample: &[PointSample], theta: &ModelParams) -> Result<[f64; 2]> {
    let mut s = [0.0; 2];
    for group in sample {
        let sum_t: f64 = group.times.iter().sum();
        let [sc, sl] = score_from_sums(group.phi, group.times.len() as f64, sum_t, theta)?;
        s[0] += sc;
        s[1] += sl;
    }
    Ok(s)
}

/// `sum log(lambda) - lambda t` over all observations.
pub fn log_likelihood(sample: &[PointSample], theta: &ModelParams) -> Result<f64> {
    let mut total = 0.0;
    for group in sample {
        let lambda = lambda_rate(group.phi, theta)?;
        let sum_t: f64 = group.times.iter().sum();
        total += group.times.len() as f64 * lambda.ln() - lambda * sum_t;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// `n_i = round(n (1 - p))` at the first support point, the rest at the second.
    #[default]
    DeterministicRounding,
    /// `n_i ~ Binomial(n, 1 - p)` drawn per replicate.
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Observations per replicate.
    pub n: usize,
    /// Number of replicates.
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub allocation: Allocation,
    /// Largest tolerated fraction of degenerate replicates.
    #[serde(default = "default_max_failure_rate")]
    pub max_failure_rate: f64,
}

fn default_max_failure_rate() -> f64 {
    0.01
}

impl SimConfig {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        SimConfig {
            n,
            m,
            seed,
            allocation: Allocation::default(),
            max_failure_rate: default_max_failure_rate(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "need n >= 2 observations, got {}",
                self.n
            )));
        }
        if self.m < 2 {
            return Err(Error::Config(format!(
                "need m >= 2 replicates, got {}",
                self.m
            )));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::Config(format!(
                "max failure rate {} outside [0, 1]",
                self.max_failure_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateFailure {
    /// Binomial allocation left a support point without observations.
    EmptyGroup,
    /// `L_hat <= 0`, including equal group means.
    NonPositiveL,
    /// `C_hat >= exp(L_hat a^2)`.
    OutsideValidRegion,
    /// `log(C_hat (T0 + 1)) <= 0`, so `g(theta_hat)` is undefined.
    ThresholdBelowBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimates {
    pub replicate: usize,
    pub n_first: usize,
    pub c_hat: f64,
    pub l_hat: f64,
    /// Present exactly when the replicate did not fail.
    pub g_hat: Option<f64>,
    /// Score at the true parameters.
    pub score: [f64; 2],
    pub failure: Option<ReplicateFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FailureCounts {
    pub empty_group: usize,
    pub non_positive_l: usize,
    pub outside_valid_region: usize,
    pub threshold_below_bound: usize,
}

impl FailureCounts {
    pub fn total(&self) -> usize {
        self.empty_group
            + self.non_positive_l
            + self.outside_valid_region
            + self.threshold_below_bound
    }

    fn record(&mut self, f: ReplicateFailure) {
        match f {
            ReplicateFailure::EmptyGroup => self.empty_group += 1,
            ReplicateFailure::NonPositiveL => self.non_positive_l += 1,
            ReplicateFailure::OutsideValidRegion => self.outside_valid_region += 1,
            ReplicateFailure::ThresholdBelowBound => self.threshold_below_bound += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub theta: ModelParams,
    pub t0: TimeThreshold,
    pub config: SimConfig,
    pub design: Design,
    /// `g` at the true parameters.
    pub g_true: f64,
    pub replicates_used: usize,
    pub failures: FailureCounts,
    pub mean_g_hat: f64,
    pub bias: f64,
    pub mean_c_hat: f64,
    pub mean_l_hat: f64,
    /// Sample covariance of `(C_hat, L_hat)`.
    pub empirical_cov_theta: InfoMatrix,
    /// Sample variance of `g_hat`.
    pub empirical_var_g: f64,
    /// `c' Cov_hat(theta_hat) c`.
    pub linearized_empirical_var_g: f64,
    /// Sample covariances `Cov(theta_hat_i, score_j)` approximating the
    /// Jacobian of `E[theta_hat]`; row `i` is the estimate, column `j` the
    /// score component.
    pub psi_jacobian: [[f64; 2]; 2],
    /// `J (n M)^-1 J'` with `J` the Jacobian above.
    pub crao_cov_theta: InfoMatrix,
    /// `c' J (n M)^-1 J' c`.
    pub crao_var_g: f64,
    /// `c' M^-1 c / n`.
    pub design_var_g: f64,
    pub mean_score: [f64; 2],
    /// Standard error of each component of `mean_score`.
    pub score_std_error: [f64; 2],
}

struct Plan {
    design: Design,
    phis: [f64; 2],
    rates: [f64; 2],
    first_weight: f64,
}

fn plan(
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
    cfg: &SimConfig,
) -> Result<Plan> {
    cfg.validate()?;
    let opt = c_optimal(theta, space, t0)?;
    let design = opt.design;
    if design.len() != 2 {
        return Err(Error::Config(
            "the optimal design has a single support point and cannot identify (C, L)".into(),
        ));
    }
    let phis = [design.points()[0], design.points()[1]];
    let rates = [lambda_rate(phis[0], theta)?, lambda_rate(phis[1], theta)?];
    let first_weight = design.weights()[0];
    if cfg.allocation == Allocation::DeterministicRounding {
        let n1 = (cfg.n as f64 * first_weight).round() as usize;
        if n1 == 0 || n1 >= cfg.n {
            return Err(Error::Config(format!(
                "rounding n = {} with weights ({first_weight}, {}) leaves a support point empty",
                cfg.n,
                1.0 - first_weight
            )));
        }
    }
    Ok(Plan {
        design,
        phis,
        rates,
        first_weight,
    })
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn sum_exponential<R: Rng>(rng: &mut R, rate: f64, count: usize) -> f64 {
    let exp = Exp::new(rate).expect("positive rate");
    (0..count).map(|_| exp.sample(rng)).sum()
}

fn run_replicate(
    r: usize,
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
    cfg: &SimConfig,
    plan: &Plan,
) -> ReplicateEstimates {
    let mut rng = replicate_rng(cfg.seed, r);
    let n1 = match cfg.allocation {
        Allocation::DeterministicRounding => (cfg.n as f64 * plan.first_weight).round() as usize,
        Allocation::Binomial => Binomial::new(cfg.n as u64, plan.first_weight)
            .expect("weight in [0, 1]")
            .sample(&mut rng) as usize,
    };
    let counts = [n1, cfg.n - n1];
    let mut out = ReplicateEstimates {
        replicate: r,
        n_first: n1,
        c_hat: f64::NAN,
        l_hat: f64::NAN,
        g_hat: None,
        score: [f64::NAN; 2],
        failure: None,
    };
    if counts.contains(&0) {
        out.failure = Some(ReplicateFailure::EmptyGroup);
        return out;
    }

    let sums = [
        sum_exponential(&mut rng, plan.rates[0], counts[0]),
        sum_exponential(&mut rng, plan.rates[1], counts[1]),
    ];
    let mut score = [0.0; 2];
    for k in 0..2 {
        let s = score_from_sums(plan.phis[k], counts[k] as f64, sums[k], theta)
            .expect("support points valid at the true parameters");
        score[0] += s[0];
        score[1] += s[1];
    }
    out.score = score;

    let means = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
    let (c_hat, l_hat) = mle_formula(means[0], means[1], plan.phis[0], plan.phis[1]);
    out.c_hat = c_hat;
    out.l_hat = l_hat;
    out.failure = match mle_from_means(means[0], means[1], plan.phis[0], plan.phis[1]) {
        Err(_) => Some(ReplicateFailure::NonPositiveL),
        Ok((c, l)) => {
            let est = ModelParams::new(c, l).expect("positive estimates");
            if est.validate_on(space).is_err() {
                Some(ReplicateFailure::OutsideValidRegion)
            } else {
                match g_bound(&est, t0) {
                    Ok(g) => {
                        out.g_hat = Some(g);
                        None
                    }
                    Err(_) => Some(ReplicateFailure::ThresholdBelowBound),
                }
            }
        }
    };
    out
}

/// Per-replicate results, ordered by replicate index.
pub fn run_replicates(
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
    cfg: &SimConfig,
) -> Result<Vec<ReplicateEstimates>> {
    let plan = plan(theta, space, t0, cfg)?;
    Ok((0..cfg.m)
        .into_par_iter()
        .map(|r| run_replicate(r, theta, space, t0, cfg, &plan))
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (x.len() - 1) as f64
}

/// Aggregates replicate results into the comparison of empirical and
/// approximate variances.
pub fn summarize(
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
    cfg: &SimConfig,
    replicates: &[ReplicateEstimates],
) -> Result<SimulationReport> {
    let design = plan(theta, space, t0, cfg)?.design;
    let mut failures = FailureCounts::default();
    let ok: Vec<&ReplicateEstimates> = replicates
        .iter()
        .filter(|r| match r.failure {
            Some(f) => {
                failures.record(f);
                false
            }
            None => true,
        })
        .collect();

    let total = replicates.len();
    if failures.total() as f64 > cfg.max_failure_rate * total as f64 {
        return Err(Error::ExcessiveFailures {
            failed: failures.total(),
            total,
            limit: cfg.max_failure_rate,
        });
    }
    if ok.len() < 2 {
        return Err(Error::Degenerate(format!(
            "only {} usable replicates",
            ok.len()
        )));
    }

    let cs: Vec<f64> = ok.iter().map(|r| r.c_hat).collect();
    let ls: Vec<f64> = ok.iter().map(|r| r.l_hat).collect();
    let gs: Vec<f64> = ok.iter().map(|r| r.g_hat.expect("g_hat present")).collect();
    let s0: Vec<f64> = ok.iter().map(|r| r.score[0]).collect();
    let s1: Vec<f64> = ok.iter().map(|r| r.score[1]).collect();

    let g_true = g_bound(theta, t0)?;
    let c = c_vector(theta, t0)?;
    let cv = c.as_array();
    let n = cfg.n as f64;

    let cov_theta = InfoMatrix {
        m11: covariance(&cs, &cs),
        m12: covariance(&cs, &ls),
        m22: covariance(&ls, &ls),
    };
    let jac = [
        [covariance(&cs, &s0), covariance(&cs, &s1)],
        [covariance(&ls, &s0), covariance(&ls, &s1)],
    ];

    let m_info = fim_design(&design, theta)?;
    let inv = m_info.scaled(n).inverse().ok_or(Error::Inestimable)?;
    // J (nM)^-1 J'
    let a = inv.to_array();
    let ja = |i: usize, k: usize| jac[i][0] * a[0][k] + jac[i][1] * a[1][k];
    let bound = |i: usize, j: usize| ja(i, 0) * jac[j][0] + ja(i, 1) * jac[j][1];
    let crao = InfoMatrix {
        m11: bound(0, 0),
        m12: 0.5 * (bound(0, 1) + bound(1, 0)),
        m22: bound(1, 1),
    };

    let m_used = ok.len() as f64;
    let se = |v: &[f64]| (covariance(v, v) / m_used).sqrt();

    let mean_g_hat = mean(&gs);
    Ok(SimulationReport {
        theta: *theta,
        t0,
        config: *cfg,
        design: design.clone(),
        g_true,
        replicates_used: ok.len(),
        failures,
        mean_g_hat,
        bias: mean_g_hat - g_true,
        mean_c_hat: mean(&cs),
        mean_l_hat: mean(&ls),
        empirical_cov_theta: cov_theta,
        empirical_var_g: covariance(&gs, &gs),
        linearized_empirical_var_g: cov_theta.quad_form(cv),
        psi_jacobian: jac,
        crao_cov_theta: crao,
        crao_var_g: crao.quad_form(cv),
        design_var_g: criterion_value(&m_info, c)? / n,
        mean_score: [mean(&s0), mean(&s1)],
        score_std_error: [se(&s0), se(&s1)],
    })
}

/// Runs the full simulation at `theta` (used both as the nominal value for
/// the design and as the truth generating the data).
pub fn run_monte_carlo(
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
    cfg: &SimConfig,
) -> Result<SimulationReport> {
    let replicates = run_replicates(theta, space, t0, cfg)?;
    summarize(theta, space, t0, cfg, &replicates)
}

/// Delta-method variance `c' M^-1 c / n` for the optimal design at `theta`.
pub fn delta_method_variance(
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
    n: usize,
) -> Result<f64> {
    let opt = c_optimal(theta, space, t0)?;
    Ok(c_variance(&opt.design, theta, t0)? / n as f64)
}
