//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p asynccap-core --test acceptance -- --nocapture`.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use asynccap::capacity::capacity_full_sampling;
use asynccap::channel::ChannelSpec;
use asynccap::prob::{kl_divergence, log_type_class_prob, mutual_information, output_marginal};
use asynccap::sampling::{Schedule, Scheme};
use asynccap::sim::{
    run_noise_only, AutoLength, CodeLength, DecoderKind, Metrics, Scenario, ScenarioConfig, SimError,
    DEFAULT_HORIZON_CAP,
};
use asynccap::{Dist, EmpiricalType};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SEED: u64 = 20_240_601;

fn verdict(id: u32, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let ok = pass && elapsed <= limit;
    println!(
        "criterion {id}: {} {detail} [{:.2}s, limit {}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

fn random_row(rng: &mut StdRng, len: usize, floor: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| floor + rng.gen::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Random channel with full-support rows and the idle input outside `X`.
fn random_channel(rng: &mut StdRng, nx: usize, ny: usize, cost: (f64, f64)) -> ChannelSpec {
    ChannelSpec {
        x_alphabet: (0..nx).map(|i| format!("x{i}")).collect(),
        y_alphabet: (0..ny).map(|i| format!("y{i}")).collect(),
        star_in_x: None,
        q: (0..=nx).map(|_| random_row(rng, ny, 0.02)).collect(),
        cost: (0..nx).map(|_| rng.gen_range(cost.0..cost.1)).collect(),
    }
}

/// Binary-input channel with an erasure-like idle output.
fn silence_channel() -> ChannelSpec {
    ChannelSpec {
        x_alphabet: vec!["0".into(), "1".into()],
        y_alphabet: vec!["0".into(), "1".into(), "s".into()],
        star_in_x: None,
        q: vec![
            vec![0.9, 0.1, 0.0],
            vec![0.1, 0.9, 0.0],
            vec![1e-5, 1e-5, 1.0 - 2e-5],
        ],
        cost: vec![1.0, 1.0],
    }
}

/// Channel whose idle symbol is a zero-cost transmit symbol.
fn idle_in_x_channel() -> ChannelSpec {
    ChannelSpec {
        x_alphabet: vec!["a".into(), "b".into(), "idle".into()],
        y_alphabet: vec!["0".into(), "1".into()],
        star_in_x: Some("idle".into()),
        q: vec![vec![0.98, 0.02], vec![0.3, 0.7], vec![0.8, 0.2], vec![0.8, 0.2]],
        cost: vec![1.0, 1.0, 0.0],
    }
}

fn desk_config(channel: ChannelSpec, scheme: Scheme, rho: f64, rate_fraction: f64) -> ScenarioConfig {
    ScenarioConfig {
        channel,
        b_bits: 10,
        beta: 0.5,
        rho,
        n: CodeLength::Auto(AutoLength::Auto),
        rate_fraction,
        scheme,
        decoder: DecoderKind::Typicality,
        trials: 500,
        seed: SEED,
        epsilon: 0.05,
        horizon_cap: DEFAULT_HORIZON_CAP,
        threshold_exponent: 2.0,
        mmi_threshold: None,
        capacity_tolerance: 1e-6,
    }
}

struct Run {
    n: u64,
    metrics: Metrics,
}

fn run(cfg: &ScenarioConfig) -> Run {
    let sc = Scenario::prepare(cfg).expect("scenario prepares");
    let outcomes = sc.run_trials(cfg.trials);
    Run {
        n: sc.schedule().n,
        metrics: sc.metrics(&outcomes),
    }
}

#[test]
fn criterion_1_identity() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED + 1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let nx = rng.gen_range(1..=5);
        let ny = rng.gen_range(2..=5);
        let dmc = random_channel(&mut rng, nx, ny, (0.1, 3.0)).build().unwrap();
        let px = Dist::new(random_row(&mut rng, nx, 0.0)).unwrap();
        let py = output_marginal(&px, &dmc).unwrap();
        let qs = dmc.q_star_dist();
        let lhs = mutual_information(&px, &dmc).unwrap() + kl_divergence(&py, &qs).unwrap();
        let rhs: f64 = (0..nx)
            .map(|x| {
                let row = Dist::new(dmc.row(x).to_vec()).unwrap();
                px.probs()[x] * kl_divergence(&row, &qs).unwrap()
            })
            .sum();
        worst = worst.max((lhs - rhs).abs());
    }
    verdict(
        1,
        worst <= 1e-9,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("max |lhs - rhs| = {worst:.3e} over 100 channels (tol 1e-9)"),
    );
}

/// Grid oracle written without the library's information measures.
mod oracle {
    fn kl(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .filter(|(&a, _)| a > 0.0)
            .map(|(&a, &b)| a * (a / b).log2())
            .sum()
    }

    fn objective(p: &[f64], rows: &[Vec<f64>], cost: &[f64], beta: f64, py: &mut [f64]) -> f64 {
        let q_star = rows.last().unwrap();
        py.iter_mut().for_each(|v| *v = 0.0);
        for (x, &px) in p.iter().enumerate() {
            for (y, v) in py.iter_mut().enumerate() {
                *v += px * rows[x][y];
            }
        }
        let info: f64 = p
            .iter()
            .enumerate()
            .filter(|(_, &px)| px > 0.0)
            .map(|(x, &px)| px * kl(&rows[x], py))
            .sum();
        let ek: f64 = p.iter().zip(cost).map(|(a, b)| a * b).sum();
        let d = kl(py, q_star);
        (info / ek).min((info + d) / (ek * (1.0 + beta)))
    }

    /// Maximum of the objective over the simplex grid with spacing `1/steps`.
    pub fn grid_max(rows: &[Vec<f64>], cost: &[f64], beta: f64, steps: usize) -> f64 {
        let nx = cost.len();
        let mut py = vec![0.0; rows[0].len()];
        let mut best = 0.0f64;
        let mut p = vec![0.0; nx];
        let h = 1.0 / steps as f64;
        match nx {
            1 => best = objective(&[1.0], rows, cost, beta, &mut py),
            2 => {
                for i in 0..=steps {
                    p[0] = i as f64 * h;
                    p[1] = 1.0 - p[0];
                    best = best.max(objective(&p, rows, cost, beta, &mut py));
                }
            }
            3 => {
                for i in 0..=steps {
                    for j in 0..=steps - i {
                        p[0] = i as f64 * h;
                        p[1] = j as f64 * h;
                        p[2] = (1.0 - p[0] - p[1]).max(0.0);
                        best = best.max(objective(&p, rows, cost, beta, &mut py));
                    }
                }
            }
            _ => unreachable!(),
        }
        best
    }
}

#[test]
fn criterion_2_capacity_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let nx = rng.gen_range(1..=3);
        let ny = rng.gen_range(2..=3);
        let spec = random_channel(&mut rng, nx, ny, (0.5, 2.0));
        let dmc = spec.build().unwrap();
        for beta in [0.0, 0.5, 1.0, 2.0] {
            let solved = capacity_full_sampling(&dmc, beta, 1e-7).unwrap().c_value;
            let grid = oracle::grid_max(&spec.q, &spec.cost, beta, 1000);
            worst = worst.max((solved - grid).abs());
        }
    }
    let bsc = ChannelSpec::bsc_unit_cost(0.1).build().unwrap();
    let c_bsc = capacity_full_sampling(&bsc, 0.0, 1e-9).unwrap().c_value;
    let h = -(0.1f64 * 0.1f64.log2() + 0.9 * 0.9f64.log2());
    let bsc_err = (c_bsc - (1.0 - h)).abs();
    verdict(
        2,
        worst <= 2e-3 && bsc_err <= 1e-3,
        start.elapsed(),
        Duration::from_secs(30),
        &format!(
            "max |solver - grid| = {worst:.3e} (tol 2e-3); BSC(0.1) C = {c_bsc:.6}, |C - (1-h)| = {bsc_err:.3e} (tol 1e-3)"
        ),
    );
}

#[test]
fn criterion_3_type_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED + 3);
    let mut worst = 0.0f64;
    let mut worst_sum = 0.0f64;
    for ny in 1..=3usize {
        let q = random_row(&mut rng, ny, 0.05);
        let qd = Dist::new(q.clone()).unwrap();
        for w in 1..=6u32 {
            let mut by_type: HashMap<Vec<u64>, f64> = HashMap::new();
            for code in 0..(ny as u64).pow(w) {
                let mut c = code;
                let mut counts = vec![0u64; ny];
                let mut p = 1.0;
                for _ in 0..w {
                    let y = (c % ny as u64) as usize;
                    c /= ny as u64;
                    counts[y] += 1;
                    p *= q[y];
                }
                *by_type.entry(counts).or_default() += p;
            }
            let mut total = 0.0f64;
            for (counts, brute) in by_type {
                let t = EmpiricalType::from_counts(counts).unwrap();
                let lib = log_type_class_prob(&t, &qd).unwrap().exp2();
                worst = worst.max((lib - brute).abs());
                total += lib;
            }
            worst_sum = worst_sum.max((total - 1.0).abs());
        }
    }
    verdict(
        3,
        worst <= 1e-12 && worst_sum <= 1e-12,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("max |P(T) - brute force| = {worst:.3e}; max |sum P(T) - 1| = {worst_sum:.3e} (tol 1e-12)"),
    );
}

fn random_scenario(rng: &mut StdRng) -> ScenarioConfig {
    let nx = rng.gen_range(2..=3);
    let ny = rng.gen_range(2..=3);
    let mut channel = random_channel(rng, nx, ny, (0.2, 3.0));
    let scheme = [Scheme::Full, Scheme::Periodic, Scheme::Block, Scheme::Adaptive][rng.gen_range(0..4)];
    if scheme == Scheme::Periodic {
        channel.star_in_x = Some(channel.x_alphabet[0].clone());
        channel.cost[0] = 0.0;
        channel.q[0] = channel.q[nx].clone();
    }
    let decoder = [
        DecoderKind::Typicality,
        DecoderKind::Mmi,
        DecoderKind::MmiUniversal,
    ][rng.gen_range(0..3)];
    ScenarioConfig {
        channel,
        b_bits: rng.gen_range(1..=8),
        beta: rng.gen_range(0.0..1.5),
        rho: rng.gen_range(0.1..=1.0),
        n: CodeLength::Fixed(rng.gen_range(8..=64)),
        rate_fraction: 1.0,
        scheme,
        decoder,
        trials: 5,
        seed: rng.gen(),
        epsilon: 0.05,
        horizon_cap: DEFAULT_HORIZON_CAP,
        threshold_exponent: 2.0,
        mmi_threshold: None,
        capacity_tolerance: 1e-5,
    }
}

#[test]
fn criterion_4_lazy_eager() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED + 4);
    let (mut scenarios, mut matched, mut skipped, mut trials) = (0, 0, 0, 0);
    while scenarios < 200 {
        let cfg = random_scenario(&mut rng);
        let sc = match Scenario::prepare(&cfg) {
            Ok(sc) => sc,
            Err(SimError::Codec(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => panic!("{e}"),
        };
        assert!(sc.schedule().horizon() <= 100_000);
        scenarios += 1;
        let ok = (0..cfg.trials).all(|t| {
            trials += 1;
            sc.run_trial(t) == sc.materialized_reference_trial(t).unwrap()
        });
        matched += ok as u32;
    }

    // adaptive run where detection happens well inside the horizon
    let mut cfg = desk_config(silence_channel(), Scheme::Adaptive, 0.25, 0.7);
    cfg.beta = 1.0;
    let sc = Scenario::prepare(&cfg).unwrap();
    let a = sc.schedule().a;
    let mut switched = 0;
    let mut switched_ok = true;
    for t in 0..200 {
        let lazy = sc.run_trial(t);
        if lazy.switches > 0 && !lazy.timeout && lazy.sigma > a / 4 && lazy.sigma < 3 * a / 4 {
            switched += 1;
            let eager = sc.materialized_reference_trial(t).unwrap();
            switched_ok &= lazy == eager;
        }
    }
    verdict(
        4,
        matched == 200 && switched > 0 && switched_ok,
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "{matched}/200 scenarios identical ({trials} trials, {skipped} infeasible compositions redrawn); \
             mid-horizon switches: {switched} trials, identical = {switched_ok}"
        ),
    );
}

#[test]
fn criterion_5_delay_trends() {
    let start = Instant::now();
    let adaptive = run(&desk_config(silence_channel(), Scheme::Adaptive, 0.25, 0.7));
    let block = run(&desk_config(silence_channel(), Scheme::Block, 0.25, 0.7));
    let mut lines = Vec::new();
    let mut pass = true;

    let ad = adaptive.metrics.delay.p50;
    let ok = ad <= 1.25 * adaptive.n as f64;
    pass &= ok;
    lines.push(format!(
        "adaptive median {ad} <= 1.25n = {} ({ok})",
        1.25 * adaptive.n as f64
    ));

    for rho in [0.25, 0.5] {
        let periodic = run(&desk_config(idle_in_x_channel(), Scheme::Periodic, rho, 0.7));
        let target = periodic.n as f64 / rho;
        let m = periodic.metrics.delay.p50;
        let ok = (0.8 * target..=1.3 * target).contains(&m);
        pass &= ok;
        lines.push(format!(
            "periodic rho={rho} median {m} in [{:.1}, {:.1}] ({ok})",
            0.8 * target,
            1.3 * target
        ));
    }

    let target = block.n as f64 * 1.25 / 0.25;
    let m = block.metrics.delay.p50;
    let ok = (0.8 * target..=1.3 * target).contains(&m);
    pass &= ok;
    lines.push(format!(
        "block median {m} in [{:.1}, {:.1}] ({ok})",
        0.8 * target,
        1.3 * target
    ));

    verdict(
        5,
        pass,
        start.elapsed(),
        Duration::from_secs(300),
        &lines.join("; "),
    );
}

#[test]
fn criterion_6_sampling_budget() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    let rho = 0.25;

    let adaptive = run(&desk_config(silence_channel(), Scheme::Adaptive, rho, 0.7));
    let periodic = run(&desk_config(idle_in_x_channel(), Scheme::Periodic, rho, 0.7));
    for (name, r) in [("adaptive", &adaptive), ("periodic", &periodic)] {
        let ok = r.metrics.rho_hat <= rho + 0.02;
        pass &= ok;
        lines.push(format!(
            "{name} rho_hat {:.4} <= {:.2} ({ok})",
            r.metrics.rho_hat,
            rho + 0.02
        ));
    }

    let schedule = Schedule::new(Scheme::Adaptive, rho, 512, 1_000_000, 2.0).unwrap();
    for (name, spec) in [
        ("noise-only silence", silence_channel()),
        ("noise-only bsc(0.1)", ChannelSpec::bsc_unit_cost(0.1)),
    ] {
        let dmc = spec.build().unwrap();
        let noise = run_noise_only(&dmc, &schedule, 1_000_000, SEED);
        let ok = noise.fraction() <= 1.1 * rho;
        pass &= ok;
        lines.push(format!(
            "{name} fraction {:.4} <= {:.3} ({} switches) ({ok})",
            noise.fraction(),
            1.1 * rho,
            noise.switches
        ));
    }
    verdict(
        6,
        pass,
        start.elapsed(),
        Duration::from_secs(120),
        &lines.join("; "),
    );
}

#[test]
fn criterion_7_rate_trend() {
    let start = Instant::now();
    let below = run(&desk_config(silence_channel(), Scheme::Adaptive, 0.25, 0.7));
    let above = run(&desk_config(silence_channel(), Scheme::Adaptive, 0.25, 1.3));
    let (e1, e2) = (below.metrics.error_prob, above.metrics.error_prob);
    let (ok1, ok2) = (e1 <= 0.1, e2 >= 0.3);
    verdict(
        7,
        ok1 && ok2,
        start.elapsed(),
        Duration::from_secs(300),
        &format!(
            "0.7C (n={}): error {e1:.3} CI [{:.3}, {:.3}] <= 0.1 ({ok1}), ties {}; \
             1.3C (n={}): error {e2:.3} >= 0.3 ({ok2})",
            below.n, below.metrics.error_ci95.0, below.metrics.error_ci95.1, below.metrics.ties, above.n
        ),
    );
}

#[test]
fn criterion_8_universal() {
    let start = Instant::now();
    let typical = run(&desk_config(silence_channel(), Scheme::Adaptive, 0.25, 0.7));
    let mut cfg = desk_config(silence_channel(), Scheme::Adaptive, 0.25, 0.7);
    cfg.decoder = DecoderKind::MmiUniversal;
    let universal = run(&cfg);
    let (et, eu) = (typical.metrics.error_prob, universal.metrics.error_prob);
    verdict(
        8,
        eu <= et + 0.05,
        start.elapsed(),
        Duration::from_secs(300),
        &format!("mmi_universal error {eu:.3} <= typicality error {et:.3} + 0.05"),
    );
}
