//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs with a custom harness so the lines always reach the output:
//!
//! ```text
//! cargo test --test acceptance                       # fast tier
//! cargo test --release --test acceptance -- --include-ignored   # adds the slow ABC tier
//! cargo test --test acceptance -- bowley             # filter by substring
//! ```

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use qmest::abc::DEFAULT_N_ITER;
use qmest::bc::{
    self, box_cox, inv_box_cox, log_normal_moments, truncated_moments_integral,
    truncated_moments_mc,
};
use qmest::dists::{self, FamilyParams};
use qmest::estimate::{EstimateOptions, Method};
use qmest::fixtures;
use qmest::formula::{luo_mean, luo_weights, wan_sd};
use qmest::meta::{bowley, derive_and_pool, PoolReport};
use qmest::qe::{matching_points, qe_fit};
use qmest::sim::{self, AreRecord, SimCell, SimSettings};
use qmest::{QuantileSummary, Scenario, ShiftPolicy};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Slow criteria only run when asked for.
#[derive(PartialEq)]
enum Tier {
    Fast,
    Nightly,
}

struct Criterion {
    name: &'static str,
    tier: Tier,
    run: fn() -> Outcome,
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn protocol_options(seed: u64) -> EstimateOptions {
    EstimateOptions {
        shift: ShiftPolicy::Always(0.5),
        seed,
        ..EstimateOptions::default()
    }
}

fn pool_fixture(method: Method, scenario: Scenario, opts: &EstimateOptions) -> PoolReport {
    derive_and_pool(
        &fixtures::table_s1_studies(scenario),
        method,
        scenario,
        opts,
    )
    .unwrap()
}

// Published pooled means and 95% intervals.
const LUO_WAN_TARGETS: [(Scenario, f64, f64, f64); 3] = [
    (Scenario::S1, 5.76, 5.15, 6.37),
    (Scenario::S2, 5.68, 5.06, 6.29),
    (Scenario::S3, 5.97, 5.36, 6.58),
];
const QE_TARGETS: [(Scenario, f64); 3] = [
    (Scenario::S1, 6.26),
    (Scenario::S2, 6.88),
    (Scenario::S3, 6.49),
];
const BC_TARGETS: [(Scenario, f64); 3] = [
    (Scenario::S1, 6.09),
    (Scenario::S2, 6.59),
    (Scenario::S3, 6.58),
];
const ABC_TARGETS: [(Scenario, f64); 3] = [
    (Scenario::S1, 5.77),
    (Scenario::S2, 7.12),
    (Scenario::S3, 6.29),
];

fn luo_wan_table(i: usize) -> Outcome {
    let (scenario, mean, lo, hi) = LUO_WAN_TARGETS[i];
    let t = Instant::now();
    let r = pool_fixture(
        Method::LuoWan,
        scenario,
        &protocol_options(qmest::DEFAULT_SEED),
    )
    .result;
    let secs = t.elapsed().as_secs_f64();
    let pass = within(r.pooled_mean, mean, 0.02)
        && within(r.ci_low, lo, 0.02)
        && within(r.ci_high, hi, 0.02);
    outcome(
        pass,
        format!(
            "{scenario}: pooled {:.4} [{:.4}, {:.4}], target {mean} [{lo}, {hi}] ± 0.02, k = {}, {secs:.2}s",
            r.pooled_mean, r.ci_low, r.ci_high, r.k
        ),
    )
}

fn qe_table(i: usize) -> Outcome {
    let (scenario, target) = QE_TARGETS[i];
    let t = Instant::now();
    let r = pool_fixture(Method::Qe, scenario, &protocol_options(qmest::DEFAULT_SEED)).result;
    outcome(
        within(r.pooled_mean, target, 0.10),
        format!(
            "{scenario}: pooled {:.4}, target {target} ± 0.10, {:.1}s",
            r.pooled_mean,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn bc_table(i: usize) -> Outcome {
    let (scenario, target) = BC_TARGETS[i];
    let t = Instant::now();
    let means: Vec<f64> = (1..=5)
        .map(|seed| {
            pool_fixture(Method::Bc, scenario, &protocol_options(seed))
                .result
                .pooled_mean
        })
        .collect();
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    outcome(
        within(avg, target, 0.10),
        format!(
            "{scenario}: 5-seed average {avg:.4} (range {:.4} to {:.4}), target {target} ± 0.10, {:.1}s",
            means.iter().copied().fold(f64::INFINITY, f64::min),
            means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn abc_options() -> EstimateOptions {
    EstimateOptions {
        abc_n_iter: DEFAULT_N_ITER,
        ..protocol_options(qmest::DEFAULT_SEED)
    }
}

fn abc_table(i: usize) -> Outcome {
    let (scenario, target) = ABC_TARGETS[i];
    let t = Instant::now();
    let r = pool_fixture(Method::Abc, scenario, &abc_options()).result;
    outcome(
        within(r.pooled_mean, target, 0.30),
        format!(
            "{scenario}: pooled {:.4} [{:.4}, {:.4}], I² {:.2}, target {target} ± 0.30, {:.0}s",
            r.pooled_mean,
            r.ci_low,
            r.ci_high,
            r.i2,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn bowley_mean() -> Outcome {
    let rows = fixtures::table_s1();
    let values: Vec<f64> = rows
        .iter()
        .map(|r| bowley(&r.to_summary(Scenario::S2)).unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    outcome(
        within(mean, 0.18, 0.005),
        format!(
            "mean over {} rows = {mean:.4}, target 0.18 ± 0.005",
            values.len()
        ),
    )
}

fn i2_band(methods: &[Method], opts: &EstimateOptions) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &m in methods {
        for scenario in Scenario::ALL {
            let i2 = pool_fixture(m, scenario, opts).result.i2;
            pass &= (96.2..=100.0).contains(&i2);
            parts.push(format!("{m}/{scenario} {i2:.2}"));
        }
    }
    outcome(pass, format!("{} (band [96.2, 100])", parts.join(", ")))
}

fn spot_cell(
    dist: FamilyParams,
    scenario: Scenario,
    n: usize,
    methods: Vec<Method>,
) -> Vec<AreRecord> {
    let cell = SimCell {
        distribution: dist,
        scenario,
        n,
        reps: 200,
        methods,
        master_seed: sim::cell_seed(11, &dist, scenario, n),
    };
    sim::run_cell(&cell, &SimSettings::default()).unwrap()
}

fn find<'a>(recs: &'a [AreRecord], method: &str, target: sim::Target) -> &'a AreRecord {
    recs.iter()
        .find(|r| r.method == method && r.target == target)
        .expect("record present")
}

fn ln(sigma: f64) -> FamilyParams {
    FamilyParams::log_normal(5.0, sigma).unwrap()
}

fn sim_luo_skew() -> Outcome {
    let recs = spot_cell(ln(1.0), Scenario::S1, 1000, vec![Method::LuoWan]);
    let r = find(&recs, "luo_wan", sim::Target::Mean);
    outcome(
        within(r.are, -0.22, 0.03),
        format!(
            "log_normal(5,1) S1 n=1000: ARE {:.4} (se {:.4}, {} reps, {} failures), target -0.22 ± 0.03",
            r.are,
            r.se(),
            r.reps,
            r.failures
        ),
    )
}

fn sim_qe_improves() -> Outcome {
    let small = spot_cell(ln(1.0), Scenario::S1, 100, vec![Method::Qe]);
    let large = spot_cell(ln(1.0), Scenario::S1, 1000, vec![Method::Qe]);
    let (a, b) = (
        find(&small, "qe", sim::Target::Mean),
        find(&large, "qe", sim::Target::Mean),
    );
    outcome(
        b.are.abs() < a.are.abs(),
        format!(
            "log_normal(5,1) S1: QE mean ARE {:.4} at n=100 → {:.4} at n=1000 (se {:.4}, {:.4})",
            a.are,
            b.are,
            a.se(),
            b.se()
        ),
    )
}

const BC_CELLS: [(f64, f64); 3] = [(0.25, 0.004), (0.5, 0.008), (1.0, 0.020)];

fn sim_bc(target: sim::Target) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (sigma, bound) in BC_CELLS {
        for n in [100, 1000] {
            let recs = spot_cell(ln(sigma), Scenario::S1, n, vec![Method::Bc]);
            let r = find(&recs, "bc", target);
            let limit = match target {
                sim::Target::Mean => bound,
                sim::Target::Sd => 0.03,
            } + 3.0 * r.se();
            pass &= r.are.abs() <= limit && r.failures == 0;
            parts.push(format!("σ={sigma} n={n}: {:.4} (limit {limit:.4})", r.are));
        }
    }
    outcome(pass, parts.join("; "))
}

fn abc_stress(scenario: Scenario, target: sim::Target, expected: f64, tol: f64) -> Outcome {
    let recs = spot_cell(ln(1.0), scenario, 25, vec![Method::Abc]);
    let r = find(&recs, "abc", target);
    outcome(
        within(r.are, expected, tol),
        format!(
            "log_normal(5,1) {scenario} n=25 {target}: ARE {:.4} (se {:.4}, {} failures), target {expected} ± {tol}",
            r.are,
            r.se(),
            r.failures
        ),
    )
}

/// Run a proptest strategy and fold the result into an outcome.
fn property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Outcome
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    match runner.run(&strategy, test) {
        Ok(()) => outcome(true, format!("{cases} cases")),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn prop_luo_weights() -> Outcome {
    property(2000, (0usize..3, 1u64..100_000), |(s, n)| {
        let w = luo_weights(Scenario::ALL[s], n);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        Ok(())
    })
}

fn prop_wan_half_sum() -> Outcome {
    let strategy = (
        -100.0..100.0f64,
        prop::array::uniform4(0.0..50.0f64),
        5u64..5000,
    );
    property(2000, strategy, |(a, gaps, n)| {
        let q = [
            a,
            a + gaps[0],
            a + gaps[0] + gaps[1],
            a + gaps[0] + gaps[1] + gaps[2],
            a + gaps.iter().sum::<f64>(),
        ];
        let s3 = QuantileSummary::s3(q[0], q[1], q[2], q[3], q[4], n);
        let s1 = s3.restrict(Scenario::S1);
        let s2 = s3.restrict(Scenario::S2);
        let half = 0.5 * (wan_sd(&s1).unwrap() + wan_sd(&s2).unwrap());
        prop_assert_eq!(wan_sd(&s3).unwrap(), half);
        Ok(())
    })
}

fn exact_summary(params: &FamilyParams, scenario: Scenario, n: u64) -> QuantileSummary {
    let probe = QuantileSummary::s3(0.0, 0.0, 0.0, 0.0, 0.0, n).restrict(scenario);
    let q: Vec<f64> = matching_points(&probe)
        .iter()
        .map(|(p, _)| dists::quantile(params, *p).unwrap())
        .collect();
    match scenario {
        Scenario::S1 => QuantileSummary::s1(q[0], q[1], q[2], n),
        Scenario::S2 => QuantileSummary::s2(q[0], q[1], q[2], n),
        Scenario::S3 => QuantileSummary::s3(q[0], q[1], q[2], q[3], q[4], n),
    }
}

fn family_strategy() -> impl Strategy<Value = FamilyParams> {
    prop_oneof![
        (-10.0..30.0f64, 0.2..10.0f64).prop_map(|(m, s)| FamilyParams::normal(m, s).unwrap()),
        (0.0..5.0f64, 0.1..1.2f64).prop_map(|(m, s)| FamilyParams::log_normal(m, s).unwrap()),
        (0.5..20.0f64, 0.2..5.0f64).prop_map(|(a, b)| FamilyParams::gamma(a, b).unwrap()),
        (0.5..20.0f64, 0.5..20.0f64).prop_map(|(a, b)| FamilyParams::beta(a, b).unwrap()),
        (0.5..10.0f64, 0.5..50.0f64).prop_map(|(k, l)| FamilyParams::weibull(k, l).unwrap()),
    ]
}

fn prop_qe_recovery() -> Outcome {
    let strategy = (family_strategy(), 0usize..3, 25u64..1000);
    property(250, strategy, |(params, s, n)| {
        let summary = exact_summary(&params, Scenario::ALL[s], n);
        let fit = qe_fit(&summary, params.family).unwrap();
        prop_assert!(fit.converged, "not converged: {fit:?}");
        prop_assert!(
            fit.objective <= 1e-6,
            "objective {} for {fit:?}",
            fit.objective
        );
        let (m, sd) = dists::moments(&params).unwrap();
        let (fm, fsd) = dists::moments(&fit.params).unwrap();
        prop_assert!(
            (fm - m).abs() <= 0.005 * m.abs().max(sd),
            "mean {fm} vs {m}"
        );
        prop_assert!((fsd / sd - 1.0).abs() <= 0.005, "sd {fsd} vs {sd}");
        Ok(())
    })
}

fn prop_bc_log_normal_branch() -> Outcome {
    // Right-skewed summaries drive the power parameter to the zero clamp.
    let strategy = (0.5..20.0f64, 0.1..2.0f64, 1.5..6.0f64, 10u64..500);
    let hits = std::cell::Cell::new(0usize);
    let mut o = property(300, strategy, |(lo, step, skew, n)| {
        let s = QuantileSummary::s2(lo, lo + step, lo + step + skew * step, n);
        let r = bc::bc_estimate(&s).unwrap();
        if r.lambda == 0.0 {
            hits.set(hits.get() + 1);
            let (m, sd) = log_normal_moments(r.mu, r.sigma);
            prop_assert_eq!((r.mean, r.sd), (m, sd));
        }
        Ok(())
    });
    o.pass &= hits.get() > 0;
    o.detail = format!("{}, {} hit the λ = 0 branch", o.detail, hits.get());
    o
}

fn bc_lambda_one() -> Outcome {
    let cases = [
        QuantileSummary::s2(2.0, 5.0, 8.0, 100),
        QuantileSummary::s1(1.0, 6.0, 11.0, 60),
        QuantileSummary::s3(1.0, 4.0, 6.0, 8.0, 11.0, 250),
        QuantileSummary::s2(10.0, 12.5, 15.0, 40),
        QuantileSummary::s1(3.0, 20.0, 37.0, 900),
        QuantileSummary::s3(5.0, 9.0, 10.0, 11.0, 15.0, 30),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, s) in cases.iter().enumerate() {
        let r = bc::bc_estimate_with(
            s,
            &bc::BcOptions {
                seed: 100 + i as u64,
                ..bc::BcOptions::default()
            },
        )
        .unwrap();
        let kept = r.mc_draws as f64 * (1.0 - r.truncated_fraction);
        let se = r.sd / kept.sqrt();
        let z = (r.mean - luo_mean(s).unwrap()) / se;
        pass &= (r.lambda - 1.0).abs() < 1e-6 && z.abs() <= 3.0;
        parts.push(format!("{:+.2}se", z));
    }
    outcome(pass, format!("deviations {}", parts.join(" ")))
}

fn bc_mc_vs_quadrature() -> Outcome {
    let cases = [
        (0.5, 4.0, 0.8),
        (2.0, 5.0, 0.5),
        (0.2, 1.0, 2.0),
        (1.0, 3.0, 3.0),
        (0.33, 10.0, 1.5),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (l, mu, sigma)) in cases.into_iter().enumerate() {
        let draws = 100_000;
        let (qm, _) = truncated_moments_integral(l, mu, sigma).unwrap();
        let (mm, ms, frac) = truncated_moments_mc(l, mu, sigma, draws, 500 + i as u64).unwrap();
        let se = ms / (draws as f64 * (1.0 - frac)).sqrt();
        let z = (mm - qm) / se;
        pass &= z.abs() <= 3.0;
        parts.push(format!("{:+.2}se", z));
    }
    outcome(pass, format!("deviations {}", parts.join(" ")))
}

fn prop_box_cox_monotone() -> Outcome {
    let strategy = (1e-3..1e3f64, 1e-3..1e3f64, -2.0..3.0f64);
    property(3000, strategy, |(a, b, l)| {
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        let (bx, by) = (box_cox(x, l).unwrap(), box_cox(y, l).unwrap());
        prop_assert!(bx <= by, "order lost at {x}, {y}, λ = {l}");
        if y > x * (1.0 + 1e-6) {
            prop_assert!(bx < by, "tie at {x}, {y}, λ = {l}");
        }
        Ok(())
    })
}

fn box_cox_round_trip() -> Outcome {
    let mut worst = 0.0f64;
    for x in [0.1, 1.0, 10.0, 100.0] {
        for l in [0.0, 0.33, 1.0, 2.0] {
            let back = inv_box_cox(box_cox(x, l).unwrap(), l).unwrap();
            worst = worst.max((back - x).abs() / x);
        }
    }
    let grid = outcome(
        worst <= 1e-10,
        format!("grid worst relative error {worst:.1e}"),
    );
    let random = property(3000, (0.1..100.0f64, 0.0..2.0f64), |(x, l)| {
        let back = inv_box_cox(box_cox(x, l).unwrap(), l).unwrap();
        prop_assert!((back / x - 1.0).abs() <= 1e-10, "{x} -> {back} at λ = {l}");
        Ok(())
    });
    outcome(
        grid.pass && random.pass,
        format!("{}; random {}", grid.detail, random.detail),
    )
}

fn bits(recs: &[AreRecord]) -> Vec<(String, u64, u64, usize)> {
    recs.iter()
        .map(|r| {
            (
                r.method.clone(),
                r.are.to_bits(),
                r.are_sd.to_bits(),
                r.failures,
            )
        })
        .collect()
}

fn sim_schedule_independence() -> Outcome {
    let dist = FamilyParams::gamma(2.0, 0.5).unwrap();
    let cell = SimCell {
        distribution: dist,
        scenario: Scenario::S3,
        n: 60,
        reps: 24,
        methods: vec![Method::LuoWan, Method::Qe, Method::Bc],
        master_seed: 5,
    };
    let settings = SimSettings {
        estimate: EstimateOptions {
            mc_draws: 5_000,
            ..EstimateOptions::default()
        },
        ..SimSettings::default()
    };
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| sim::run_cell(&cell, &settings).unwrap())
    };
    let (one, four) = (run_with(1), run_with(4));
    let again = run_with(1);
    outcome(
        bits(&one) == bits(&four) && bits(&one) == bits(&again),
        format!(
            "{} records identical across 1 and 4 workers and repeated runs",
            one.len()
        ),
    )
}

fn batch_schedule_independence() -> Outcome {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_qmest"))
            .args([
                "batch",
                "--fixture",
                "table_s1",
                "--method",
                "bc",
                "--scenario",
                "s3",
                "--mc-draws",
                "20000",
            ])
            .env("QM_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let (a, b) = (run("1"), run("4"));
    outcome(
        a == b && !a.is_empty(),
        format!("{} bytes, identical under QM_THREADS=1 and 4", a.len()),
    )
}

fn criteria() -> Vec<Criterion> {
    use Tier::*;
    vec![
        Criterion {
            name: "pooled_luo_wan_s1",
            tier: Fast,
            run: || luo_wan_table(0),
        },
        Criterion {
            name: "pooled_luo_wan_s2",
            tier: Fast,
            run: || luo_wan_table(1),
        },
        Criterion {
            name: "pooled_luo_wan_s3",
            tier: Fast,
            run: || luo_wan_table(2),
        },
        Criterion {
            name: "pooled_qe_s1",
            tier: Fast,
            run: || qe_table(0),
        },
        Criterion {
            name: "pooled_qe_s2",
            tier: Fast,
            run: || qe_table(1),
        },
        Criterion {
            name: "pooled_qe_s3",
            tier: Fast,
            run: || qe_table(2),
        },
        Criterion {
            name: "pooled_bc_s1",
            tier: Fast,
            run: || bc_table(0),
        },
        Criterion {
            name: "pooled_bc_s2",
            tier: Fast,
            run: || bc_table(1),
        },
        Criterion {
            name: "pooled_bc_s3",
            tier: Fast,
            run: || bc_table(2),
        },
        Criterion {
            name: "pooled_abc_s1",
            tier: Nightly,
            run: || abc_table(0),
        },
        Criterion {
            name: "pooled_abc_s2",
            tier: Nightly,
            run: || abc_table(1),
        },
        Criterion {
            name: "pooled_abc_s3",
            tier: Nightly,
            run: || abc_table(2),
        },
        Criterion {
            name: "bowley_mean",
            tier: Fast,
            run: bowley_mean,
        },
        Criterion {
            name: "i2_band",
            tier: Fast,
            run: || {
                i2_band(
                    &[Method::LuoWan, Method::Qe, Method::Bc],
                    &protocol_options(qmest::DEFAULT_SEED),
                )
            },
        },
        Criterion {
            name: "i2_band_abc",
            tier: Nightly,
            run: || i2_band(&[Method::Abc], &abc_options()),
        },
        Criterion {
            name: "sim_luo_mean_lognormal_s1_n1000",
            tier: Fast,
            run: sim_luo_skew,
        },
        Criterion {
            name: "sim_qe_mean_improves_with_n",
            tier: Fast,
            run: sim_qe_improves,
        },
        Criterion {
            name: "sim_bc_mean_lognormal_s1",
            tier: Fast,
            run: || sim_bc(sim::Target::Mean),
        },
        Criterion {
            name: "sim_bc_sd_lognormal_s1",
            tier: Fast,
            run: || sim_bc(sim::Target::Sd),
        },
        Criterion {
            name: "abc_stress_s2_n25_mean",
            tier: Nightly,
            run: || abc_stress(Scenario::S2, sim::Target::Mean, 0.59, 0.15),
        },
        Criterion {
            name: "abc_stress_s2_n25_sd",
            tier: Nightly,
            run: || abc_stress(Scenario::S2, sim::Target::Sd, 3.48, 1.0),
        },
        Criterion {
            name: "abc_stress_s1_n25_sd",
            tier: Nightly,
            run: || abc_stress(Scenario::S1, sim::Target::Sd, 2.05, 0.8),
        },
        Criterion {
            name: "prop_luo_weights_sum_to_one",
            tier: Fast,
            run: prop_luo_weights,
        },
        Criterion {
            name: "prop_wan_s3_half_sum",
            tier: Fast,
            run: prop_wan_half_sum,
        },
        Criterion {
            name: "prop_qe_exact_recovery",
            tier: Fast,
            run: prop_qe_recovery,
        },
        Criterion {
            name: "prop_bc_lambda_zero_is_log_normal",
            tier: Fast,
            run: prop_bc_log_normal_branch,
        },
        Criterion {
            name: "bc_lambda_one_matches_luo_mean",
            tier: Fast,
            run: bc_lambda_one,
        },
        Criterion {
            name: "bc_monte_carlo_matches_quadrature",
            tier: Fast,
            run: bc_mc_vs_quadrature,
        },
        Criterion {
            name: "prop_box_cox_monotone",
            tier: Fast,
            run: prop_box_cox_monotone,
        },
        Criterion {
            name: "box_cox_round_trip",
            tier: Fast,
            run: box_cox_round_trip,
        },
        Criterion {
            name: "sim_schedule_independent",
            tier: Fast,
            run: sim_schedule_independence,
        },
        Criterion {
            name: "batch_schedule_independent",
            tier: Fast,
            run: batch_schedule_independence,
        },
    ]
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nightly = args
        .iter()
        .any(|a| a == "--include-ignored" || a == "--ignored");
    let only_nightly = args.iter().any(|a| a == "--ignored");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();
    if args.iter().any(|a| a == "--list") {
        for c in criteria() {
            println!("{}: test", c.name);
        }
        return;
    }

    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for c in criteria() {
        let selected = filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str()));
        let tier_ok = match c.tier {
            Tier::Fast => !only_nightly,
            Tier::Nightly => nightly,
        };
        if !selected {
            continue;
        }
        if !tier_ok {
            let hint = match c.tier {
                Tier::Fast => "fast tier; drop --ignored",
                Tier::Nightly => "slow tier; pass --include-ignored",
            };
            println!("SKIP {} ({hint})", c.name);
            skipped += 1;
            continue;
        }
        let o = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "{} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            c.name,
            o.detail
        );
        if o.pass {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    println!("\nacceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 {
        std::process::exit(1);
    }
}
