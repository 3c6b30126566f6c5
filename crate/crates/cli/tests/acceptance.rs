//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::Parser;
use dex_cli::{run, Cli};
use dex_core::generate::{random_instance, RandomSpec};
use dex_core::greedy::{edmonds_allocate, feasible_in_region, TieBreak};
use dex_core::matrix::FieldMatrix;
use dex_core::netcode::{is_decodable, rationalize, read_scheme, simulate_exchange, TransmissionScheme};
use dex_core::oracle::{build_lp, oracle};
use dex_core::rational::{int, parse_rational, ratio};
use dex_core::{solve, Instance, Rational, SolverConfig, TerminalSet};
use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

/// Runs the command line in-process; returns (exit code, stdout).
fn dex(args: &[&str]) -> (i32, String) {
    let cli = Cli::try_parse_from(std::iter::once("dex").chain(args.iter().copied())).expect("valid arguments");
    let mut out = Vec::new();
    let code = match run(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => e.exit_code(),
    };
    (code, String::from_utf8(out).unwrap())
}

fn oracle_value(text: &str) -> Rational {
    let line = text.lines().find_map(|l| l.strip_prefix("optimum ")).expect("optimum line");
    parse_rational(line).unwrap()
}

fn report(n: u32, pass: bool, elapsed: Duration, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "criterion {n}: {verdict} ({:.2}s) {detail}", elapsed.as_secs_f64()).unwrap();
}

fn load(name: &str, p: u64) -> Instance {
    dex_cli::file::parse_instance(
        &PathBuf::from(fixture(name)),
        dex_cli::file::FieldOverride {
            characteristic: Some(p),
            degree: None,
        },
    )
    .unwrap()
}

fn within(a: &Rational, b: &Rational, tol: &Rational) -> bool {
    (a - b).abs() <= *tol
}

fn single_user_family(seed: u64, count: usize, helpers_only: bool) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomSpec {
        terminals: (3, 6),
        primes: vec![2, 3, 5],
        max_packets: 6,
        users: (1, 1),
        max_weight: 10,
        weight_denominator: 100,
        helpers_only,
    };
    (0..count).map(|_| random_instance(&spec, &mut rng).unwrap()).collect()
}

#[test]
fn criterion_1_example_one_exactness() {
    let start = Instant::now();
    let (code, out) = dex(&["oracle", &fixture("example1.json")]);
    let value = oracle_value(&out);
    let inst = load("example1.json", 3);
    let tie = TieBreak::from_order(6, &[3, 4, 5, 1, 2]).unwrap();
    let rates = edmonds_allocate(&inst, 0, inst.weights(), &tie).unwrap();
    let expected = vec![int(0), int(0), int(0), int(1), int(0), int(1)];
    let elapsed = start.elapsed();
    let pass = code == 0 && value == int(2) && rates.0 == expected && elapsed < Duration::from_secs(1);
    report(
        1,
        pass,
        elapsed,
        format!("oracle {value}, greedy rates {:?}", rates.0.iter().map(|r| r.to_string()).collect::<Vec<_>>()),
    );
    assert!(pass);
}

#[test]
fn criterion_2_example_two_convergence() {
    let start = Instant::now();
    let tol = ratio(1, 1000);
    let mut notes = Vec::new();
    let mut pass = true;
    for p in [3u64, 2] {
        let (_, out) = dex(&["oracle", &fixture("example2.json"), "--field-char", &p.to_string()]);
        let exact = oracle_value(&out);
        let inst = load("example2.json", p);
        let sol = solve(&inst, &SolverConfig::default()).unwrap();
        let ok = within(&sol.primal_objective, &exact, &tol)
            && sol.gap <= tol
            && sol.converged
            && sol.iterations <= 50_000
            && build_lp(&inst).unwrap().is_feasible(&sol.rates).unwrap();
        if p == 3 {
            pass &= exact == ratio(9, 4);
        }
        pass &= ok;
        notes.push(format!(
            "GF({p}): oracle {exact}, solve {:.6} gap {:.2e} in {} iterations",
            sol.objective_f64(),
            sol.gap_f64(),
            sol.iterations
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(30);
    report(2, pass, elapsed, notes.join("; "));
    assert!(pass);
}

#[test]
fn criterion_3_fig1_scheme() {
    let start = Instant::now();
    let fig1 = fixture("fig1.json");
    let (_, out) = dex(&["oracle", &fig1]);
    let value = oracle_value(&out);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1.scheme");
    let scheme_path = path.to_str().unwrap();
    let (code_gen, _) = dex(&["codegen", &fig1, "-o", scheme_path]);
    let inst = load("fig1.json", 2);
    let text = std::fs::read_to_string(&path).unwrap();
    let scheme = read_scheme(&text, inst.model().as_linear().unwrap()).unwrap();
    let total: u64 = scheme.chunk_rates().iter().sum();
    let (code_sim, sim) = dex(&["simulate", &fig1, "--scheme", scheme_path, "--seeds", "100"]);
    let elapsed = start.elapsed();
    let pass = value == int(2)
        && code_gen == 0
        && scheme.chunks() == 1
        && total == 2
        && is_decodable(&scheme)
        && code_sim == 0
        && sim.trim() == "success 100/100"
        && elapsed < Duration::from_secs(5);
    report(
        3,
        pass,
        elapsed,
        format!("oracle {value}, L={} chunk-rates {:?}, {}", scheme.chunks(), scheme.chunk_rates(), sim.trim()),
    );
    assert!(pass);
}

#[test]
fn criterion_4_single_user_oracle_equivalence() {
    let start = Instant::now();
    let family = single_user_family(4, 200, false);
    let mut mismatches = 0;
    for inst in &family {
        let t = inst.user_list()[0];
        let g = edmonds_allocate(inst, t, inst.weights(), &TieBreak::ascending(inst.terminal_count())).unwrap();
        if g.objective(inst.weights()) != oracle(inst).unwrap().value {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(60);
    report(4, pass, elapsed, format!("{} instances, {mismatches} mismatches", family.len()));
    assert!(pass);
}

#[test]
fn criterion_5_multi_user_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = RandomSpec {
        users: (2, 6),
        weight_denominator: 100,
        ..RandomSpec::default()
    };
    let config = SolverConfig {
        scale_steps: true,
        max_iterations: 1_000_000,
        ..SolverConfig::default()
    };
    let tol = ratio(1, 1000);
    let (mut bad, mut worst_iters) = (Vec::new(), 0);
    for i in 0..100 {
        let inst = random_instance(&spec, &mut rng).unwrap();
        let exact = oracle(&inst).unwrap().value;
        let sol = solve(&inst, &config).unwrap();
        worst_iters = worst_iters.max(sol.iterations);
        let cuts_ok = build_lp(&inst).unwrap().is_feasible(&sol.rates).unwrap()
            && inst.user_list().iter().all(|&l| feasible_in_region(&sol.rates, &inst, l).unwrap());
        if !(within(&sol.primal_objective, &exact, &tol) && sol.gap <= tol && cuts_ok) {
            bad.push(i);
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && elapsed < Duration::from_secs(300);
    report(
        5,
        pass,
        elapsed,
        format!("100 instances, failures {bad:?}, max iterations {worst_iters}"),
    );
    assert!(pass);
}

fn supermodularity_failures(inst: &Instance) -> usize {
    let model = inst.model();
    let all = model.all();
    let t = inst.user_list()[0];
    let ground = all.without(t);
    let f = |s: TerminalSet| model.cond_entropy(s, all.difference(s));
    let h = |s: TerminalSet| model.joint_entropy(s);
    let mut failures = 0;
    for a in ground.subsets() {
        for b in ground.subsets() {
            if f(a.union(b)) + f(a.intersection(b)) < f(a) + f(b) {
                failures += 1;
            }
        }
    }
    for a in all.subsets() {
        for b in all.subsets() {
            if h(a.union(b)) + h(a.intersection(b)) > h(a) + h(b) {
                failures += 1;
            }
        }
    }
    failures
}

fn random_scheme(rng: &mut ChaCha8Rng, deficient: bool) -> TransmissionScheme {
    let spec = RandomSpec {
        terminals: (3, 5),
        max_packets: 4,
        users: (1, 3),
        ..RandomSpec::default()
    };
    loop {
        let inst = random_instance(&spec, rng).unwrap();
        let src = inst.model().as_linear().unwrap();
        let (chunks, mut rates) = rationalize(&oracle(&inst).unwrap().rates, 64).unwrap();
        if chunks > 4 {
            continue;
        }
        if deficient {
            let positive: Vec<usize> = (0..rates.len()).filter(|&i| rates[i] > 0).collect();
            match positive.choose(rng) {
                Some(&i) => rates[i] -= 1,
                None => continue,
            }
        }
        let t = if rng.gen_bool(0.5) { 1 } else { 2 };
        let field = if t == 1 {
            src.field().clone()
        } else {
            dex_core::make_field(src.field().characteristic(), 2).unwrap()
        };
        let coding = (0..src.terminal_count())
            .map(|i| FieldMatrix::random(&field, rates[i] as usize, src.matrices()[i].rows() * chunks as usize, rng))
            .collect();
        return TransmissionScheme::new(src, inst.users(), chunks, t, coding).unwrap();
    }
}

#[test]
fn criterion_6_property_suites() {
    let start = Instant::now();
    let family = single_user_family(4, 200, false);
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    let modularity: usize = family.iter().map(supermodularity_failures).sum();

    let mut tie_failures = 0;
    for inst in &family {
        let m = inst.terminal_count();
        let t = inst.user_list()[0];
        let reference = oracle(inst).unwrap().value;
        for _ in 0..20 {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut rng);
            let tie = TieBreak::from_order(m, &order).unwrap();
            let g = edmonds_allocate(inst, t, inst.weights(), &tie).unwrap();
            if g.objective(inst.weights()) != reference || !feasible_in_region(&g.0, inst, t).unwrap() {
                tie_failures += 1;
            }
        }
    }

    let (mut verified, mut deficient, mut equivalence_failures) = (0, 0, 0);
    for k in 0..50 {
        let scheme = random_scheme(&mut rng, k % 2 == 1);
        let decodable = is_decodable(&scheme);
        let runs: Vec<bool> = (0..5)
            .map(|s| simulate_exchange(&scheme, 100 * k + s).unwrap().success())
            .collect();
        if decodable {
            verified += 1;
        } else {
            deficient += 1;
        }
        if runs.iter().any(|&ok| ok != decodable) {
            equivalence_failures += 1;
        }
    }

    let elapsed = start.elapsed();
    let pass = modularity == 0 && tie_failures == 0 && equivalence_failures == 0 && verified > 0 && deficient > 0;
    report(
        6,
        pass,
        elapsed,
        format!(
            "modularity violations {modularity}, tie-break mismatches {tie_failures}/4000, \
             decodability vs simulation mismatches {equivalence_failures}/50 ({verified} decodable, {deficient} deficient)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_helpers_only() {
    let start = Instant::now();
    let family = single_user_family(7, 50, true);
    let mut mismatches = 0;
    for inst in &family {
        let t = inst.user_list()[0];
        assert!(!inst.transmitters().contains(t));
        let g = edmonds_allocate(inst, t, inst.weights(), &TieBreak::ascending(inst.terminal_count())).unwrap();
        let exact = oracle(inst).unwrap();
        if g.objective(inst.weights()) != exact.value || g.0[t] != int(0) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0;
    report(7, pass, elapsed, format!("{} instances, {mismatches} mismatches", family.len()));
    assert!(pass);
}
