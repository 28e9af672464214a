//! Acceptance checks, one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silo_design::*;

const C0: f64 = 0.671741;
const L0: f64 = 0.373098;
const A: f64 = 1.53;
const B: f64 = 5.63;

type Outcome = std::result::Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Outcome);

fn theta0() -> ModelParams {
    ModelParams::new(C0, L0).unwrap()
}

fn space() -> DesignSpace {
    DesignSpace::new(A, B).unwrap()
}

fn t(v: f64) -> TimeThreshold {
    TimeThreshold::new(v).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Random valid `(theta, T0)` on `[A, B]`.
fn random_config(rng: &mut ChaCha8Rng) -> (ModelParams, TimeThreshold) {
    let l = rng.random_range(0.1..0.7);
    let c_max = (l * A * A).exp();
    let c = 0.05 + rng.random_range(0.0..0.97) * (c_max - 0.05);
    let theta = ModelParams::new(c, l).unwrap();
    let t0 = theta.t0_lower_bound() + 10f64.powf(rng.random_range(-1.0..7.0));
    (theta, t(t0))
}

fn example(c: f64, t0: f64, expected: [f64; 2]) -> std::result::Result<(Design, Duration), String> {
    let theta = ModelParams::new(c, L0).map_err(|e| e.to_string())?;
    let mut times = Vec::with_capacity(101);
    let mut design = None;
    for _ in 0..101 {
        let start = Instant::now();
        let d = c_optimal_design(&theta, &space(), t(t0))
            .map_err(|e| e.to_string())?
            .0;
        times.push(start.elapsed());
        design = Some(d);
    }
    times.sort();
    let d = design.unwrap().sorted();
    if d.points() != [A, B] {
        return Err(format!("support {:?}", d.points()));
    }
    let w = d.weights();
    if (w[0] - expected[0]).abs() > 5e-4 || (w[1] - expected[1]).abs() > 5e-4 {
        return Err(format!("weights {w:?}, expected {expected:?}"));
    }
    Ok((d, times[50]))
}

fn criterion_1() -> Outcome {
    let (d, median) = example(C0, 200.0, [0.5526, 0.4474])?;
    check(
        median < Duration::from_millis(1),
        format!(
            "weights {:.5?} at {:?}, median time {median:?}",
            d.weights(),
            d.points()
        ),
    )
}

fn criterion_2() -> Outcome {
    let (d, _) = example(2.3, 2.0, [0.2706, 0.7294])?;
    Ok(format!("weights {:.5?} at {:?}", d.weights(), d.points()))
}

fn criterion_3() -> Outcome {
    let th = segment_thresholds(&build_locus(&theta0(), &space()).unwrap());
    check(
        (th.lower - 0.4887).abs() < 5e-5
            && (th.t02 - 2.57).abs() <= 0.01
            && (th.t03 - 203603.03).abs() <= 1.0,
        format!(
            "lower {:.5}, T02 {:.5}, T03 {:.3}",
            th.lower, th.t02, th.t03
        ),
    )
}

fn criterion_4() -> Outcome {
    let t0s = [0.5, 2.0, 20.0, 200.0, 2000.0, 2e4, 2e5, 3e5, 6e6, 1e8];
    let expected = [0.14, 1.37, 2.66, 3.62, 4.39, 5.05, 5.63, 5.72, 6.38, 6.95];
    let got: Vec<f64> = t0s
        .iter()
        .map(|&v| g_bound(&theta0(), t(v)).unwrap())
        .collect();
    let worst = got
        .iter()
        .zip(expected)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    check(
        worst <= 0.01,
        format!("g = {got:.4?}, max deviation {worst:.4}"),
    )
}

fn criterion_5() -> Outcome {
    let t0 = t0_from_probability(1.0, 0.05)
        .map_err(|e| e.to_string())?
        .value();
    check((t0 - 19.5).abs() <= 0.01, format!("T0 = {t0:.5}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let (theta, t0) = random_config(&mut rng);
        let (design, _) = c_optimal_design(&theta, &space(), t0).map_err(|e| e.to_string())?;
        let closed = c_variance(&design, &theta, t0).map_err(|e| e.to_string())?;
        let grid = BruteForceGrid::equispaced(&space(), 25, 49);
        let (_, brute) =
            brute_force_best(&theta, &space(), t0, &grid).map_err(|e| e.to_string())?;
        let excess = (closed - brute) / brute;
        worst = worst.max(excess);
        if excess > 1e-9 {
            return Err(format!(
                "C={} L={} T0={}: closed {closed} > brute {brute}",
                theta.c(),
                theta.l(),
                t0.value()
            ));
        }
    }
    let el = start.elapsed();
    check(
        el < Duration::from_secs(5),
        format!("20 configs, worst relative excess {worst:.3e}, {el:?}"),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let rep = run_monte_carlo(
        &theta0(),
        &space(),
        t(200.0),
        &SimConfig::new(1000, 1000, 20190601),
    )
    .map_err(|e| e.to_string())?;
    let el = start.elapsed();
    let rel_var = (rep.empirical_var_g - 0.9e-4).abs() / 0.9e-4;
    check(
        (rep.mean_g_hat - 3.62).abs() <= 0.01 && rel_var <= 0.2 && el < Duration::from_secs(30),
        format!(
            "mean g_hat {:.5}, Var {:.4e} ({:.1}% off), {el:?}",
            rep.mean_g_hat,
            rep.empirical_var_g,
            100.0 * rel_var
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut bias = Vec::new();
    let mut ratio = Vec::new();
    for n in [1_000, 10_000, 100_000] {
        let cfg = SimConfig {
            max_failure_rate: 1.0,
            ..SimConfig::new(n, 1000, 20190601)
        };
        let rep = run_monte_carlo(&theta0(), &space(), t(0.5), &cfg).map_err(|e| e.to_string())?;
        bias.push(rep.bias);
        ratio.push(rep.crao_var_g / rep.empirical_var_g);
    }
    let decreasing = bias.windows(2).all(|w| w[1].abs() < w[0].abs());
    let r = ratio[2];
    check(
        (bias[0] - 0.0874).abs() <= 0.01
            && decreasing
            && bias[2].abs() < 0.005
            && (1.0 / 1.3..=1.3).contains(&r),
        format!("bias {bias:.5?}, bound/empirical {ratio:.3?}"),
    )
}

fn properties(
    theta: &ModelParams,
    t0: TimeThreshold,
    seed: u64,
) -> std::result::Result<(), String> {
    let space = space();
    let locus = build_locus(theta, &space).map_err(|e| e.to_string())?;
    let v = locus.vertices();
    if (v[0].x, v[0].y) != (-v[2].x, -v[2].y) || (v[3].x, v[3].y) != (-v[1].x, -v[1].y) {
        return Err("locus not centrally symmetric".into());
    }

    let samples = locus.sample_curve(200).map_err(|e| e.to_string())?;
    for s in &samples {
        if !locus.contains([s.x, s.y], 1e-9) || !locus.contains([-s.x, -s.y], 1e-9) {
            return Err(format!("curve sample outside hull at phi = {}", s.phi));
        }
    }
    for w in samples.windows(3) {
        // samples run from a to b, so x decreases; concavity means the chord
        // lies below the middle point
        let (p, q, r) = (&w[0], &w[1], &w[2]);
        let chord = p.y + (r.y - p.y) * (q.x - p.x) / (r.x - p.x);
        if q.y < chord - 1e-12 * q.y.abs().max(1.0) {
            return Err(format!("curve not concave near phi = {}", q.phi));
        }
    }

    let h = 1e-6;
    let g = |c: f64, l: f64| g_bound(&ModelParams::new(c, l).unwrap(), t0).unwrap();
    let (c, l) = (theta.c(), theta.l());
    let fd = [
        (g(c + h, l) - g(c - h, l)) / (2.0 * h),
        (g(c, l + h) - g(c, l - h)) / (2.0 * h),
    ];
    let grad = c_vector(theta, t0).map_err(|e| e.to_string())?.as_array();
    for k in 0..2 {
        if (grad[k] - fd[k]).abs() >= 1e-5 * fd[k].abs() {
            return Err(format!("gradient {grad:?} vs finite differences {fd:?}"));
        }
    }

    let opt = c_optimal(theta, &space, t0).map_err(|e| e.to_string())?;
    let m = fim_design(&opt.design, theta).map_err(|e| e.to_string())?;
    for phi in [A, 0.5 * (A + B), B] {
        let mp = fim_point(phi, theta).map_err(|e| e.to_string())?;
        if mp.eigenvalues()[0] < -1e-12 * mp.trace() {
            return Err(format!("point FIM at {phi} not PSD"));
        }
    }
    if m.eigenvalues()[0] < -1e-12 * m.trace() {
        return Err("design FIM not PSD".into());
    }

    let (ea, eb) = (eta(A, theta).unwrap(), eta(B, theta).unwrap());
    let (c_hat, l_hat) = mle_from_means(ea, eb, A, B).map_err(|e| e.to_string())?;
    if (c_hat - c).abs() >= 1e-10 * c || (l_hat - l).abs() >= 1e-10 * l {
        return Err(format!("MLE inversion gave ({c_hat}, {l_hat})"));
    }

    if !opt.crossing.location.is_vertex() {
        let cfg = SimConfig {
            max_failure_rate: 1.0,
            ..SimConfig::new(1000, 8, seed)
        };
        let r1 = run_monte_carlo(theta, &space, t0, &cfg);
        let r2 = run_monte_carlo(theta, &space, t0, &cfg);
        if r1 != r2 {
            return Err("seeded re-run differs".into());
        }
    }
    Ok(())
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 120;
    for k in 0..n {
        let (theta, t0) = random_config(&mut rng);
        properties(&theta, t0, k)
            .map_err(|e| format!("C={} L={} T0={}: {e}", theta.c(), theta.l(), t0.value()))?;
    }
    let el = start.elapsed();
    check(
        el < Duration::from_secs(10),
        format!("{n} configurations, {el:?}"),
    )
}

fn criterion_10() -> Outcome {
    let theta = theta0();
    let grid = GridSpec::default_for(&theta, &space(), t(200.0)).unwrap();
    let map = sensitivity_grid(&theta, &space(), t(200.0), &grid).map_err(|e| e.to_string())?;
    let (idx, cell) = map.min_cell().ok_or("no valid cell")?;
    let (row, col) = (idx / map.cols(), idx % map.cols());
    let quadrant = cell.c > theta.c() && cell.l < theta.l();
    let changed = map.cells.iter().filter(|c| c.segment_changed()).count();
    check(
        quadrant && cell.segment_changed(),
        format!(
            "min efficiency {:.4} at C*={:.4} L*={:.4} (row {row}, col {col}); large-C*/small-L* quadrant: {quadrant}; \
             segment change flagged: {} ({changed} of {} cells change segment)",
            cell.efficiency.unwrap(),
            cell.c,
            cell.l,
            cell.segment_changed(),
            map.cells.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "reference design at C=0.671741, T0=200", criterion_1),
        (2, "reference design at C=2.3, T0=2", criterion_2),
        (3, "segment thresholds", criterion_3),
        (4, "g over T0", criterion_4),
        (5, "T0 from jam probability", criterion_5),
        (6, "closed form vs brute force", criterion_6),
        (7, "Monte Carlo at T0=200", criterion_7),
        (8, "Monte Carlo bias trend at T0=0.5", criterion_8),
        (9, "randomized property suite", criterion_9),
        (10, "sensitivity minimum at T0=200", criterion_10),
    ];
    let mut failed = 0;
    for (k, name, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {k:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {k:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
