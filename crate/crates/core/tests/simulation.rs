use silo_design::simulation::{delta_method_variance, log_likelihood, run_replicates};
use silo_design::*;

fn nominal() -> (ModelParams, DesignSpace) {
    (
        ModelParams::new(0.671741, 0.373098).unwrap(),
        DesignSpace::new(1.53, 5.63).unwrap(),
    )
}

fn t(v: f64) -> TimeThreshold {
    TimeThreshold::new(v).unwrap()
}

/// Plain Nelder-Mead minimizer, used only as an oracle for the closed form.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64) -> [f64; 2] {
    let mut s = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut fs = s.map(&f);
    for _ in 0..20_000 {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| fs[i].total_cmp(&fs[j]));
        s = idx.map(|i| s[i]);
        fs = idx.map(|i| fs[i]);
        if (fs[2] - fs[0]).abs() <= 1e-15 * fs[0].abs().max(1.0)
            && (s[2][0] - s[0][0]).abs().max((s[2][1] - s[0][1]).abs()) < 1e-12
        {
            break;
        }
        let cen = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
        let at = |k: f64| {
            [
                cen[0] + k * (s[2][0] - cen[0]),
                cen[1] + k * (s[2][1] - cen[1]),
            ]
        };
        let r = at(-1.0);
        let fr = f(r);
        if fr < fs[0] {
            let e = at(-2.0);
            let fe = f(e);
            (s[2], fs[2]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < fs[1] {
            (s[2], fs[2]) = (r, fr);
        } else {
            let k = if fr < fs[2] { -0.5 } else { 0.5 };
            let c = at(k);
            let fc = f(c);
            if fc < fs[2].min(fr) {
                (s[2], fs[2]) = (c, fc);
            } else {
                for i in 1..3 {
                    s[i] = [(s[0][0] + s[i][0]) / 2.0, (s[0][1] + s[i][1]) / 2.0];
                    fs[i] = f(s[i]);
                }
            }
        }
    }
    s[0]
}

#[test]
fn closed_form_mle_maximizes_likelihood() {
    let (theta, space) = nominal();
    let (a, b) = (space.a(), space.b());
    let (ea, eb) = (eta(a, &theta).unwrap(), eta(b, &theta).unwrap());
    for (da, db) in [
        (1.01, 1.0),
        (0.99, 1.0),
        (1.0, 1.01),
        (1.0, 0.99),
        (1.01, 0.99),
        (0.99, 1.01),
    ] {
        let (ta, tb) = (ea * da, eb * db);
        let (n_a, n_b) = (553.0, 447.0);
        // log-likelihood in terms of (ln C, L), from the group means only
        let nll = |p: [f64; 2]| {
            let Ok(th) = ModelParams::new(p[0].exp(), p[1]) else {
                return f64::INFINITY;
            };
            let (Ok(la), Ok(lb)) = (lambda_rate(a, &th), lambda_rate(b, &th)) else {
                return f64::INFINITY;
            };
            -(n_a * (la.ln() - la * ta) + n_b * (lb.ln() - lb * tb))
        };
        let opt = nelder_mead(nll, [theta.c().ln(), theta.l()], 0.01);
        let (c_hat, l_hat) = mle_from_means(ta, tb, a, b).unwrap();
        assert!(
            (opt[0].exp() - c_hat).abs() < 1e-6,
            "C: {} vs {c_hat}",
            opt[0].exp()
        );
        assert!((opt[1] - l_hat).abs() < 1e-6, "L: {} vs {l_hat}", opt[1]);
    }
}

#[test]
fn score_matches_numerical_gradient() {
    let (theta, space) = nominal();
    let sample = vec![
        PointSample {
            phi: space.a(),
            times: vec![0.7, 3.1, 1.9, 2.2],
        },
        PointSample {
            phi: space.b(),
            times: vec![4e3, 1.2e4, 9e3],
        },
        PointSample {
            phi: 3.0,
            times: vec![30.0, 11.0],
        },
    ];
    let s = score_vector(&sample, &theta).unwrap();
    let h = 1e-6;
    let ll = |c: f64, l: f64| log_likelihood(&sample, &ModelParams::new(c, l).unwrap()).unwrap();
    let (c, l) = (theta.c(), theta.l());
    let fd = [
        (ll(c + h, l) - ll(c - h, l)) / (2.0 * h),
        (ll(c, l + h) - ll(c, l - h)) / (2.0 * h),
    ];
    for k in 0..2 {
        assert!(
            (s[k] - fd[k]).abs() <= 1e-6 * fd[k].abs().max(1.0),
            "{k}: {} vs {}",
            s[k],
            fd[k]
        );
    }
}

#[test]
fn same_seed_is_bit_identical_across_thread_counts() {
    let (theta, space) = nominal();
    let cfg = SimConfig::new(2000, 200, 99);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_replicates(&theta, &space, t(200.0), &cfg).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert_eq!(one.len(), 200);
    for (x, y) in one.iter().zip(&many) {
        assert_eq!(x.c_hat.to_bits(), y.c_hat.to_bits());
        assert_eq!(x.l_hat.to_bits(), y.l_hat.to_bits());
        assert_eq!(x.g_hat.map(f64::to_bits), y.g_hat.map(f64::to_bits));
    }
    let r1 = run_monte_carlo(&theta, &space, t(200.0), &cfg).unwrap();
    let r2 = run_monte_carlo(&theta, &space, t(200.0), &cfg).unwrap();
    assert_eq!(r1, r2);
    let r3 = run_monte_carlo(&theta, &space, t(200.0), &SimConfig::new(2000, 200, 100)).unwrap();
    assert_ne!(r1.mean_g_hat, r3.mean_g_hat);
}

#[test]
fn estimates_settle_as_n_grows() {
    let (theta, space) = nominal();
    let mut bias = Vec::new();
    let mut gap = Vec::new();
    for n in [1_000, 10_000, 100_000] {
        let rep = run_monte_carlo(&theta, &space, t(200.0), &SimConfig::new(n, 500, 7)).unwrap();
        assert_eq!(rep.failures.total(), 0);
        bias.push(rep.bias.abs());
        gap.push((rep.empirical_var_g - rep.crao_var_g).abs() / rep.crao_var_g);
        // design_var_g is the delta-method variance of the nominal design
        let delta = delta_method_variance(&theta, &space, t(200.0), n).unwrap();
        assert!((rep.design_var_g - delta).abs() < 1e-12 * delta);
    }
    let increases = |v: &[f64]| v.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(increases(&bias) <= 1, "{bias:?}");
    assert!(increases(&gap) <= 1, "{gap:?}");
}

#[test]
fn score_averages_to_zero_at_truth() {
    let (theta, space) = nominal();
    let rep = run_monte_carlo(&theta, &space, t(200.0), &SimConfig::new(1000, 1000, 11)).unwrap();
    for k in 0..2 {
        assert!(
            rep.mean_score[k].abs() < 4.0 * rep.score_std_error[k],
            "{k}: {:?} +- {:?}",
            rep.mean_score,
            rep.score_std_error
        );
    }
}
