//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fail.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;

use lecam::distances::{tail_probability_check, tv_discrete, tv_jittered_pair, tv_jittered_vs_gaussian, tv_monte_carlo};
use lecam::expansion::{expand, log_ratio_exact, residual_scan, ExpansionOrder, DEFAULT_GAMMA};
use lecam::fit::{fit_log_log, FitOutcome};
use lecam::gaussian::build_gaussian;
use lecam::kernels::{apply_jitter, apply_round, data_processing_check_default};
use lecam::lattice::{enumerate_support, ExperimentParams, LatticePoint};
use lecam::pmf::{enumerated_moments, hypergeometric_moments, multinomial_moments, DiscreteLaw};
use lecam::rng::stream_rng;
use lecam::sum::log_sum_exp;

type Outcome = Result<String, String>;

fn params(population: u64, sample: u64, counts: &[u64]) -> ExperimentParams {
    ExperimentParams::new(population, sample, counts.to_vec()).expect("valid parameters")
}

/// Every composition of `total` into `parts` positive integers.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    if parts == 1 {
        return if total >= 1 { vec![vec![total]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Deterministic grid: d in {1,2,3}, N <= 40, n <= min(12, N), all
/// positive count vectors, thinned by a fixed stride to `per_d` instances
/// per dimension.
fn grid(per_d: usize, sample_filter: impl Fn(u64) -> bool) -> Vec<ExperimentParams> {
    let mut out = Vec::new();
    for d in 1..=3usize {
        let mut all = Vec::new();
        for population in (d as u64 + 1)..=40 {
            for counts in compositions(population, d + 1) {
                for sample in (1..=population.min(12)).filter(|&n| sample_filter(n)) {
                    all.push((population, sample, counts.clone()));
                }
            }
        }
        let stride = all.len().div_ceil(per_d).max(1);
        out.extend(
            all.iter()
                .step_by(stride)
                .map(|(pop, n, c)| params(*pop, *n, c)),
        );
    }
    out
}

fn law_support(p: &ExperimentParams, law: DiscreteLaw) -> Vec<LatticePoint> {
    law.support(p).expect("enumerable support")
}

fn criterion_1() -> Outcome {
    let instances = grid(166, |_| true);
    let mut worst = 0f64;
    for p in &instances {
        for law in [DiscreteLaw::Hypergeometric, DiscreteLaw::Multinomial] {
            let logs: Vec<f64> = law_support(p, law).iter().map(|k| law.log_pmf(p, k).ln()).collect();
            worst = worst.max(log_sum_exp(&logs).abs());
        }
    }
    let msg = format!("{} instances, max |log-sum-exp| = {worst:.3e}", instances.len());
    if instances.len() <= 500 && worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let instances = grid(usize::MAX, |n| n == 1);
    let mut worst = 0f64;
    let mut points = 0usize;
    for p in &instances {
        for k in enumerate_support(p).expect("support") {
            worst = worst.max(log_ratio_exact(p, &k).expect("in support").abs());
            points += 1;
        }
    }
    let msg = format!("{} instances, {points} points, max |ln P/Q| = {worst:.3e}", instances.len());
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn big_binomial(a: u64, b: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..b {
        acc = acc * BigInt::from(a - i) / BigInt::from(i + 1);
    }
    acc
}

/// `P(k) / Q(k)` as an exact rational.
fn rational_ratio(p: &ExperimentParams, k: &LatticePoint) -> BigRational {
    let big_n = p.population();
    let mut hyper_num = BigInt::one();
    let mut multi = BigRational::one();
    for (ki, &c) in k.all_counts().zip(p.counts()) {
        hyper_num *= big_binomial(c, ki);
        multi *= BigRational::new(BigInt::from(c), BigInt::from(big_n)).pow(ki as i32);
    }
    let hyper = BigRational::new(hyper_num, big_binomial(big_n, p.sample()));
    let mut coef = BigInt::one();
    let mut left = p.sample();
    for ki in k.all_counts() {
        coef *= big_binomial(left, ki);
        left -= ki;
    }
    hyper / (multi * BigRational::from_integer(coef))
}

fn rational_ln(r: &BigRational) -> f64 {
    let num = r.numer().to_f64().expect("finite");
    let den = r.denom().to_f64().expect("finite");
    num.ln() - den.ln()
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let family: Vec<_> = [16u64, 32, 64, 128, 256]
        .iter()
        .map(|&n_pop| ExperimentParams::rescaled(&[1, 1], n_pop, 8).expect("family"))
        .collect();
    let rule = |p: &ExperimentParams| p.point(&[3]);
    let mut oracle_gap = 0f64;
    for p in &family {
        let k = rule(p).expect("point");
        let exact = log_ratio_exact(p, &k).expect("exact");
        oracle_gap = oracle_gap.max((exact - rational_ln(&rational_ratio(p, &k))).abs());
    }
    notes.push(format!("rational oracle gap {oracle_gap:.1e}"));
    ok &= oracle_gap < 1e-12;

    for (order, lo, hi) in [(ExpansionOrder::First, -2.3, -1.7), (ExpansionOrder::Second, -3.4, -2.6)] {
        let scan = residual_scan(&family, rule, order, DEFAULT_GAMMA).expect("scan");
        match scan.fit {
            FitOutcome::Fitted(f) => {
                let inside = (lo..=hi).contains(&f.slope);
                ok &= inside;
                notes.push(format!(
                    "order-{} slope {:.4} {} [{lo}, {hi}]",
                    order.as_int(),
                    f.slope,
                    if inside { "in" } else { "NOT in" }
                ));
            }
            FitOutcome::Degenerate => {
                ok = false;
                notes.push(format!("order-{} degenerate", order.as_int()));
            }
        }
    }

    let p = params(10, 5, &[5, 5]);
    let k = p.point(&[2]).expect("point");
    let e = expand(&p, &k).expect("expand");
    let oracle = rational_ratio(&p, &k);
    let want = BigRational::new(BigInt::from(320), BigInt::from(252));
    ok &= oracle == want;
    let exact_gap = (e.exact - rational_ln(&oracle)).abs();
    ok &= exact_gap < 1e-12 && (e.exact - 0.238892).abs() < 5e-7;
    ok &= (e.order1 - 0.2).abs() < 1e-12 && (e.order2 - 0.23).abs() < 1e-12;
    notes.push(format!(
        "N=10: exact {:.6} order1 {:.6} order2 {:.6}",
        e.exact, e.order1, e.order2
    ));
    let msg = notes.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let instances = grid(166, |_| true);
    let mut worst = 0f64;
    for p in &instances {
        let checks = [
            (DiscreteLaw::Hypergeometric, hypergeometric_moments(p)),
            (DiscreteLaw::Multinomial, multinomial_moments(p.sample(), &p.probs())),
        ];
        for (law, closed) in checks {
            let got = enumerated_moments(p, law).expect("moments");
            worst = worst.max((got.mean - closed.mean).amax());
            worst = worst.max((got.covariance - closed.covariance).amax());
        }
    }
    let msg = format!("{} instances, max moment error {worst:.3e}", instances.len());
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let mut instances = Vec::new();
    for (pop, counts) in [
        (10u64, vec![5u64, 5]),
        (12, vec![3, 9]),
        (20, vec![7, 13]),
        (40, vec![10, 30]),
        (9, vec![2, 3, 4]),
        (12, vec![4, 4, 4]),
        (20, vec![5, 7, 8]),
        (8, vec![2, 2, 2, 2]),
        (12, vec![2, 3, 3, 4]),
        (16, vec![4, 4, 4, 4]),
    ] {
        for n in [3u64, 6] {
            instances.push(params(pop, n, &counts));
        }
    }
    let mut worst = 0f64;
    for p in &instances {
        let exact = tv_discrete(p, DiscreteLaw::Hypergeometric, DiscreteLaw::Multinomial).expect("exact");
        let quad = tv_jittered_pair(p, DiscreteLaw::Hypergeometric, DiscreteLaw::Multinomial, 8).expect("quad");
        worst = worst.max((exact.value - quad.value).abs());
    }
    let msg = format!("{} instances, max |quad - exact| = {worst:.3e}", instances.len());
    if instances.len() == 20 && worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let ns = [4u64, 16, 64, 256];
    let mut tvs = Vec::new();
    for &n in &ns {
        let p = ExperimentParams::rescaled(&[1, 1], n * n * n, n).expect("params");
        let g = build_gaussian(&p).expect("gaussian");
        tvs.push(tv_jittered_vs_gaussian(&p, DiscreteLaw::Multinomial, &g, 8).expect("tv").value);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = fit_log_log(&xs, &tvs, 0.0).expect("fit").slope().unwrap_or(f64::NAN);
    let msg = format!("TV {tvs:.4?}, slope {slope:.4} vs [-0.65, -0.35]");
    if (-0.65..=-0.35).contains(&slope) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let mut gaps = Vec::new();
    for n in [4u64, 8, 16] {
        let p = ExperimentParams::rescaled(&[1, 1], n * n * n, n).expect("params");
        let g = build_gaussian(&p).expect("gaussian");
        let hyper = tv_jittered_vs_gaussian(&p, DiscreteLaw::Hypergeometric, &g, 8).expect("tv");
        let multi = tv_jittered_vs_gaussian(&p, DiscreteLaw::Multinomial, &g, 8).expect("tv");
        gaps.push(((hyper.value - multi.value).abs(), hyper.error_estimate + multi.error_estimate));
    }
    let ok = gaps.windows(2).all(|w| w[1].0 <= w[0].0 + w[0].1 + w[1].1);
    let msg = format!(
        "gaps {:?}",
        gaps.iter().map(|(g, e)| format!("{g:.3e}+-{e:.1e}")).collect::<Vec<_>>()
    );
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let weights: [&[u64]; 6] = [&[1, 2], &[1, 3], &[1, 5], &[1, 1, 1], &[1, 2, 3], &[1, 1, 2]];
    let mut instances = Vec::new();
    'outer: for pop in [60u64, 120, 240] {
        for w in weights {
            for n in [5u64, 12] {
                instances.push(ExperimentParams::rescaled(w, pop, n).expect("params"));
                if instances.len() == 30 {
                    break 'outer;
                }
            }
        }
    }
    let mut checked = 0usize;
    let mut worst_ratio = 0f64;
    let mut ok = instances.len() == 30;
    for p in &instances {
        for i in 0..=p.dim() {
            if p.prob(i) > 1.0 / 3.0 + 1e-12 {
                continue;
            }
            let t = tail_probability_check(p, i).expect("tail");
            checked += 1;
            ok &= t.empirical <= t.bound;
            worst_ratio = worst_ratio.max(t.empirical / t.bound);
        }
    }
    let msg = format!(
        "{} instances, {checked} coordinates, max empirical/bound = {worst_ratio:.3e}",
        instances.len()
    );
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_9() -> Outcome {
    let mut rng = stream_rng(9, 0);
    let mut mismatches = 0usize;
    for _ in 0..100_000 {
        let d = rng.random_range(1..=4usize);
        let sample = rng.random_range(0..=1_000_000u64);
        let mut left = sample;
        let mut k = Vec::with_capacity(d);
        for _ in 0..d {
            let v = rng.random_range(0..=left);
            k.push(v);
            left -= v;
        }
        let point = LatticePoint::new(k, sample).expect("point");
        let back = apply_round(&apply_jitter(&point, &mut rng));
        if back.iter().zip(point.coords()).any(|(&b, &c)| b != c as i64) {
            mismatches += 1;
        }
    }
    let dpi = [
        (8u64, 4u64, vec![4u64, 4]),
        (20, 8, vec![10, 10]),
        (40, 12, vec![10, 30]),
        (64, 16, vec![32, 32]),
        (100, 20, vec![25, 75]),
        (12, 6, vec![4, 4, 4]),
        (30, 9, vec![10, 10, 10]),
        (24, 8, vec![6, 8, 10]),
        (16, 4, vec![4, 4, 4, 4]),
        (20, 6, vec![5, 5, 5, 5]),
    ];
    let mut min_slack = f64::INFINITY;
    for (pop, n, counts) in dpi {
        let c = data_processing_check_default(&params(pop, n, &counts)).expect("dpi");
        min_slack = min_slack.min(c.slack());
    }
    let msg = format!("10^5 round-trips, {mismatches} mismatches; min DPI slack {min_slack:.3e} over 10 instances");
    if mismatches == 0 && min_slack >= -1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_10() -> Outcome {
    let mut worst = 0f64;
    let mut count = 0usize;
    for (seed, (n, w)) in [4u64, 16, 64]
        .into_iter()
        .flat_map(|n| [(n, [1u64, 1]), (n, [1, 3])])
        .enumerate()
    {
        let p = ExperimentParams::rescaled(&w, 4 * n * n, n).expect("params");
        let g = build_gaussian(&p).expect("gaussian");
        for law in [DiscreteLaw::Hypergeometric, DiscreteLaw::Multinomial] {
            let quad = tv_jittered_vs_gaussian(&p, law, &g, 8).expect("quad");
            let mc = tv_monte_carlo(&p, law, &g, 1_000_000, 100 + seed as u64).expect("mc");
            let z = (mc.value - quad.value).abs() / (mc.error_estimate + quad.error_estimate);
            worst = worst.max(z);
            count += 1;
        }
    }
    let msg = format!("{count} pairs, max |mc - quad| / se = {worst:.3}");
    if worst <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("normalization", criterion_1),
        ("single-draw identity", criterion_2),
        ("log-ratio expansion rates", criterion_3),
        ("moment identities", criterion_4),
        ("jitter preserves TV", criterion_5),
        ("multinomial-normal rate", criterion_6),
        ("hypergeometric-multinomial gap", criterion_7),
        ("tail bound", criterion_8),
        ("kernel identities", criterion_9),
        ("Monte Carlo vs quadrature", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS {name} ({secs:.2}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.2}s): {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
