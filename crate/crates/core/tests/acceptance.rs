//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use combolab::adversaries::{universal_k, RandomFeasibleStream};
use combolab::domain::{primal_norm_bruteforce, DecisionSet, ExplicitSet, DEFAULT_ENUMERATION_CAP};
use combolab::harness::gen::{random_dag, random_dual_ball_loss, random_interior_flow, random_interior_mset, random_tangent};
use combolab::harness::{check_iterate_equivalence, run_experiment, AdversaryKind, AdversarySpec, ExperimentConfig, LearnerSummary};
use combolab::learners::{default_learning_rate, mset_omd_learning_rate, mset_omd_regret_bound, shift_losses, Learner, MSetOmd};
use combolab::regularizers::Regularizer;
use combolab::sampling::{sample_explicit, sample_mset, sample_multitask, sample_path, RngStream};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

type Outcome = Result<Verdict, combolab::Error>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Mean final regret per learner label, over `trials` trials.
fn experiment(
    set: DecisionSet,
    learner: &str,
    eta: f64,
    adversary: AdversaryKind,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<LearnerSummary, combolab::Error> {
    let spec = format!("{learner}:eta={eta}");
    let mut config = ExperimentConfig::new(Some(set), vec![spec.parse()?], AdversarySpec::new(adversary), horizon);
    config.trials = trials;
    config.seed = seed;
    let out = run_experiment(&config)?;
    Ok(out.summary.into_values().next().expect("one learner"))
}

fn c1_iterate_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(1);
    let mut worst: f64 = 0.0;
    let mut all_pass = true;
    for case in 0..20u64 {
        let dag = random_dag(&mut rng, 15, u128::MAX)?;
        let set = DecisionSet::dag_paths(dag.clone())?;
        let eta = rng.random_range(0.1..=1.0);
        let mut stream = RandomFeasibleStream::new(set, RngStream::derive(1, case));
        let report = check_iterate_equivalence(&dag, &mut stream, eta, 50, 1e-6)?;
        worst = worst.max(report.max_gap);
        all_pass &= report.pass;
    }
    let elapsed = start.elapsed();
    Ok(verdict(
        all_pass && worst <= 1e-6 && elapsed < Duration::from_secs(60),
        format!("20 DAGs, T=50: max gap {worst:.2e} (tol 1e-6), {:.2}s (limit 60s)", secs(elapsed)),
    ))
}

/// Σ_p P(p) ln P(p) with P(p) = Π x_e / (outflow of the tail), by enumeration.
fn enumerated_path_entropy(set: &DecisionSet, x: &[f64]) -> Result<f64, combolab::Error> {
    let dag = set.as_dag().expect("DAG set");
    let mut outflow = vec![0.0; dag.n_vertices()];
    for (e, &(u, _)) in dag.edges().iter().enumerate() {
        outflow[u] += x[e];
    }
    let mut h = 0.0;
    for path in set.enumerate_vertices(DEFAULT_ENUMERATION_CAP)? {
        let mut p = 1.0;
        for (e, &b) in path.iter().enumerate() {
            if b == 1 {
                p *= x[e] / outflow[dag.tail(e)];
            }
        }
        h += p * p.ln();
    }
    Ok(h)
}

fn c2_entropy_equality() -> Outcome {
    let mut rng = RngStream::new(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dag = random_dag(&mut rng, 20, 20)?;
        let set = DecisionSet::dag_paths(dag.clone())?;
        let x = random_interior_flow(&dag, &mut rng);
        let psi = Regularizer::DilatedEntropy(dag).value(&x)?;
        worst = worst.max((psi - enumerated_path_entropy(&set, &x)?).abs());
    }
    Ok(verdict(worst <= 1e-10, format!("100 DAGs ≤ 20 paths: max |ψ − Σ P ln P| = {worst:.2e} (tol 1e-10)")))
}

fn c3_strong_convexity() -> Outcome {
    let mut rng = RngStream::new(3);
    let slack = 1e-9;
    let (mut mset_violations, mut dag_violations) = (0, 0);
    // Worst ratio of the quadratic form to its required lower bound, using
    // the LP primal norm (the supremum of ⟨y, z⟩ over the dual ball).
    let (mut mset_ratio, mut dag_ratio) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..500 {
        let d = rng.random_range(2..=10);
        let m = rng.random_range(1..=d / 2);
        let set = DecisionSet::mset(d, m)?;
        let x = random_interior_mset(d, m, &mut rng);
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let y = random_dual_ball_loss(&set, &mut rng);
        let q = Regularizer::MSetPhi { m }.hessian_quadform(&x, &z)?;
        let sup = primal_norm_bruteforce(&set, &z, DEFAULT_ENUMERATION_CAP)?;
        if q < dot(&y, &z).powi(2) / 9.0 - slack || q < sup * sup / 9.0 - slack {
            mset_violations += 1;
        }
        mset_ratio = mset_ratio.min(9.0 * q / (sup * sup));
    }
    for _ in 0..500 {
        let dag = random_dag(&mut rng, 12, u128::MAX)?;
        let set = DecisionSet::dag_paths(dag.clone())?;
        let x = random_interior_flow(&dag, &mut rng);
        let z = random_tangent(&set, &mut rng)?;
        let y = random_dual_ball_loss(&set, &mut rng);
        let q = Regularizer::DilatedEntropy(dag).hessian_quadform(&x, &z)?;
        if z.iter().all(|&v| v == 0.0) {
            if q.abs() > slack {
                dag_violations += 1;
            }
            continue;
        }
        let sup = primal_norm_bruteforce(&set, &z, DEFAULT_ENUMERATION_CAP)?;
        if 10.0 * q < dot(&y, &z).powi(2) - slack || 10.0 * q < sup * sup - slack {
            dag_violations += 1;
        }
        dag_ratio = dag_ratio.min(10.0 * q / (sup * sup));
    }
    Ok(verdict(
        mset_violations == 0 && dag_violations == 0,
        format!(
            "violations m-set {mset_violations}/500, DAG {dag_violations}/500; worst LP ratio 9q/‖z‖² = {mset_ratio:.3}, 10q/‖z‖² = {dag_ratio:.3}"
        ),
    ))
}

fn c4_bregman_range() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut closed_form_gap: f64 = 0.0;
    let mut count = 0;
    for d in 2..=10 {
        for m in 1..=d / 2 {
            let set = DecisionSet::mset(d, m)?;
            let learner = MSetOmd::new(d, m, 0.1)?;
            let x1 = learner.policy().to_vec();
            let (df, mf) = (d as f64, m as f64);
            // At x̃₁ = m/d the gradient term vanishes on the sum-m plane.
            let closed_form = mf - mf * mf / df + (df / mf).ln();
            let bound = mf + (df / mf).ln();
            for v in set.enumerate_vertices(DEFAULT_ENUMERATION_CAP)? {
                let xs: Vec<f64> = v.iter().map(|&b| f64::from(b)).collect();
                let div = Regularizer::MSetPhi { m }.bregman(&xs, &x1)?;
                closed_form_gap = closed_form_gap.max((div - closed_form).abs());
                worst = worst.max(div - bound);
                count += 1;
            }
        }
    }
    Ok(verdict(
        worst <= 1e-9 && closed_form_gap <= 1e-9,
        format!("{count} (d, m, vertex) cases: max D − (m + ln(d/m)) = {worst:.3}, |D − closed form| ≤ {closed_form_gap:.1e}"),
    ))
}

fn c5_norm_bound() -> Outcome {
    let mut rng = RngStream::new(5);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let d = rng.random_range(2..=12);
        let m = rng.random_range(1..=d / 2);
        let set = DecisionSet::mset(d, m)?;
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let inf = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let one: f64 = z.iter().map(|v| v.abs()).sum();
        let norm = primal_norm_bruteforce(&set, &z, DEFAULT_ENUMERATION_CAP)?;
        worst = worst.max(norm - (3.0 * inf + one / m as f64));
    }
    Ok(verdict(worst <= 1e-8, format!("200 z: max ‖z‖ − (3‖z‖∞ + ‖z‖₁/m) = {worst:.3}")))
}

/// Mean regret of MSet-OMD at its prescribed rate under each suite adversary.
fn omd_suite(d: usize, m: usize, horizon: usize, trials: usize, seed: u64) -> Result<Vec<(&'static str, LearnerSummary)>, combolab::Error> {
    let eta = mset_omd_learning_rate(d, m, horizon);
    let suite = [
        ("universal", AdversaryKind::Universal { k: None }),
        ("mset-lb", AdversaryKind::MSetLb),
        ("hedge-killer", AdversaryKind::HedgeKiller),
    ];
    suite
        .into_iter()
        .map(|(name, kind)| Ok((name, experiment(DecisionSet::mset(d, m)?, "omd-mset", eta, kind, horizon, trials, seed)?)))
        .collect()
}

fn c6_omd_upper_bound() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, m) in [(16, 4), (32, 8)] {
        let horizon = 4096;
        let bound = mset_omd_regret_bound(d, m, horizon);
        for (name, s) in omd_suite(d, m, horizon, 100, 6)? {
            pass &= s.mean_final_regret <= bound;
            parts.push(format!("({d},{m}) {name} {:.1}", s.mean_final_regret));
        }
        parts.push(format!("bound {bound:.1}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    Ok(verdict(pass, format!("{}; {:.1}s (limit 300s)", parts.join(", "), secs(elapsed))))
}

fn c7_separation() -> Outcome {
    let (d, m, horizon) = (64, 8, 8192);
    let set = DecisionSet::mset(d, m)?;
    let suite = omd_suite(d, m, horizon, 50, 7)?;
    let (worst_name, worst) = suite
        .iter()
        .map(|(n, s)| (*n, s.mean_final_regret))
        .fold(("", f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let eta0 = combolab::adversaries::hedge_killer_threshold(d, m, horizon);
    let etas = [
        ("η₀/2", eta0 / 2.0),
        ("η₀", eta0),
        ("2η₀", 2.0 * eta0),
        ("√(ln|X|/T)", default_learning_rate(&set, horizon)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, eta) in etas {
        let hedge = experiment(set.clone(), "hedge", eta, AdversaryKind::HedgeKiller, horizon, 4, 7)?;
        pass &= hedge.mean_final_regret > worst;
        parts.push(format!("{label}={eta:.4}: Hedge {:.1}, ratio {:.3}", hedge.mean_final_regret, hedge.mean_final_regret / worst));
    }
    Ok(verdict(pass, format!("OMD worst suite mean {worst:.1} ({worst_name}); {}", parts.join("; "))))
}

fn c8_shift_properties() -> Outcome {
    let mut rng = RngStream::new(8);
    let (mut min_shifted, mut const_gap, mut max_spread) = (f64::INFINITY, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..10_000 {
        let dag = random_dag(&mut rng, 12, 40)?;
        let set = DecisionSet::dag_paths(dag.clone())?;
        let y = random_dual_ball_loss(&set, &mut rng);
        let (shifted, _) = shift_losses(&dag, &y);
        min_shifted = shifted.iter().copied().fold(min_shifted, f64::min);
        let mut first = None;
        for path in set.enumerate_vertices(DEFAULT_ENUMERATION_CAP)? {
            let mut delta = 0.0;
            let mut spread = 0.0;
            for (e, &b) in path.iter().enumerate() {
                if b == 1 {
                    delta += shifted[e] - y[e];
                    spread += shifted[e] * shifted[e];
                }
            }
            let base = *first.get_or_insert(delta);
            const_gap = const_gap.max((delta - base).abs());
            max_spread = max_spread.max(spread);
        }
    }
    Ok(verdict(
        min_shifted >= -1e-12 && const_gap <= 1e-12 && max_spread <= 4.0 + 1e-9,
        format!("10^4 pairs: min y' = {min_shifted:.2e}, shift spread {const_gap:.2e}, max Σ x y'² = {max_spread:.4}"),
    ))
}

fn c9_universal_lower_bound() -> Outcome {
    let set = DecisionSet::Explicit(ExplicitSet::hypercube(4));
    let k = universal_k(&set);
    let horizon = 4000;
    let eta = default_learning_rate(&set, horizon);
    let s = experiment(set, "hedge", eta, AdversaryKind::Universal { k: None }, horizon, 200, 9)?;
    let target = (horizon as f64 * k as f64 / 8.0).sqrt();
    let lhs = s.mean_final_regret;
    Ok(verdict(
        lhs >= target - 2.0 * s.std_error(),
        format!("|I|={k}: mean regret {lhs:.2} ± {:.2} (se) vs √(T|I|/8) = {target:.2}", s.std_error()),
    ))
}

const DRAWS: usize = 100_000;

/// Worst |mean − x| in units of the 4σ band; ≤ 1 passes.
fn band_usage(x: &[f64], counts: &[usize]) -> f64 {
    x.iter()
        .zip(counts)
        .map(|(&xi, &c)| {
            let dev = (c as f64 / DRAWS as f64 - xi).abs();
            let band = 4.0 * (xi * (1.0 - xi) / DRAWS as f64).sqrt();
            if band == 0.0 {
                if dev == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                dev / band
            }
        })
        .fold(0.0, f64::max)
}

fn c10_marginals() -> Outcome {
    let mut rng = RngStream::new(10);
    let mut usage: f64 = 0.0;
    let mut bad_mset = 0;
    let mut bad_path = 0;
    let count = |counts: &mut [usize], v: &[u8]| {
        for (c, &b) in counts.iter_mut().zip(v) {
            *c += usize::from(b);
        }
    };

    let (d, m) = (12, 4);
    let x = random_interior_mset(d, m, &mut rng);
    let mut counts = vec![0; d];
    for _ in 0..DRAWS {
        let v = sample_mset(&x, m, &mut rng)?;
        bad_mset += usize::from(v.iter().map(|&b| usize::from(b)).sum::<usize>() != m);
        count(&mut counts, &v);
    }
    usage = usage.max(band_usage(&x, &counts));

    let dag = random_dag(&mut rng, 15, 60)?;
    let flow = random_interior_flow(&dag, &mut rng);
    let mut counts = vec![0; dag.n_edges()];
    for _ in 0..DRAWS {
        let p = sample_path(&dag, &flow, &mut rng)?;
        bad_path += usize::from(!dag.is_path(&p));
        count(&mut counts, &p);
    }
    usage = usage.max(band_usage(&flow, &counts));

    let blocks = [3, 2, 4];
    let xm = [0.2, 0.5, 0.3, 0.9, 0.1, 0.25, 0.25, 0.4, 0.1];
    let mut counts = vec![0; xm.len()];
    for _ in 0..DRAWS {
        count(&mut counts, &sample_multitask(&blocks, &xm, &mut rng)?);
    }
    usage = usage.max(band_usage(&xm, &counts));

    let cube = ExplicitSet::hypercube(3);
    let weights: Vec<f64> = (1..=8).map(f64::from).collect();
    let total: f64 = weights.iter().sum();
    let mut expected = vec![0.0; 3];
    for (v, w) in cube.vertices().iter().zip(&weights) {
        for (e, &b) in expected.iter_mut().zip(v) {
            *e += f64::from(b) * w / total;
        }
    }
    let mut counts = vec![0; 3];
    for _ in 0..DRAWS {
        count(&mut counts, &sample_explicit(cube.vertices(), &weights, &mut rng)?);
    }
    usage = usage.max(band_usage(&expected, &counts));

    // Exactness on many more policies.
    for _ in 0..2000 {
        let d = rng.random_range(2..=30);
        let m = rng.random_range(1..=d / 2);
        let x = random_interior_mset(d, m, &mut rng);
        let v = sample_mset(&x, m, &mut rng)?;
        bad_mset += usize::from(v.iter().map(|&b| usize::from(b)).sum::<usize>() != m);
        let dag = random_dag(&mut rng, 15, u128::MAX)?;
        let flow = random_interior_flow(&dag, &mut rng);
        bad_path += usize::from(!dag.is_path(&sample_path(&dag, &flow, &mut rng)?));
    }
    Ok(verdict(
        usage <= 1.0 && bad_mset == 0 && bad_path == 0,
        format!("worst deviation {:.2} of the 4σ band; m-set cardinality errors {bad_mset}, invalid paths {bad_path}", usage),
    ))
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir()?;
    let config_path = dir.path().join("exp.cfg");
    std::fs::write(
        &config_path,
        "set = mset:12:3\nlearner = hedge, omd-mset\nadversary = mset-lb\nT = 300\ntrials = 6\nseed = 11\nmode = sampled\n",
    )?;
    let mut outputs = Vec::new();
    for i in 0..3 {
        let config = ExperimentConfig::from_file(&config_path)?;
        let path = dir.path().join(format!("run{i}.csv"));
        run_experiment(&config)?.write_csv(std::fs::File::create(&path)?)?;
        outputs.push(std::fs::read(&path)?);
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    Ok(verdict(identical && !outputs[0].is_empty(), format!("3 runs, {} bytes each, identical: {identical}", outputs[0].len())))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("iterate equivalence", c1_iterate_equivalence),
        ("entropy equality", c2_entropy_equality),
        ("strong convexity", c3_strong_convexity),
        ("Bregman range", c4_bregman_range),
        ("norm bound", c5_norm_bound),
        ("m-set OMD upper bound", c6_omd_upper_bound),
        ("Hedge/OMD separation", c7_separation),
        ("shifted DAG losses", c8_shift_properties),
        ("universal lower bound", c9_universal_lower_bound),
        ("marginal matching", c10_marginals),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            secs(start.elapsed())
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
