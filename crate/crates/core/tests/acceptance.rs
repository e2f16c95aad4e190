//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and case counts are pinned below.

use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qcorr::constructions::{approximate_weights, embed_factorial, rational_combination};
use qcorr::corners::{corner, lift_max_ent, lift_nonsignalling};
use qcorr::dilation::{self, DilationOptions};
use qcorr::linalg;
use qcorr::membership::{self, bell_value, chsh_game_functional, chsh_optimal_rep, enumerate_deterministic, is_local};
use qcorr::{rng, Correlation, MaxEntRep, MeasureKind, MembershipVerdict, OperatorMeasure, RationalWeight};
use rand::Rng;

const BASE_SEED: u64 = 0x5eed_2026;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Debug>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e:?}"))
}

/// Random composition of `total` into `parts` positive integers.
fn composition(total: u64, parts: usize, r: &mut impl Rng) -> Vec<u64> {
    let mut cuts: Vec<u64> = Vec::new();
    while cuts.len() < parts - 1 {
        let c = r.random_range(1..total);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    cuts.push(total);
    let mut prev = 0;
    cuts.into_iter()
        .map(|c| {
            let part = c - prev;
            prev = c;
            part
        })
        .collect()
}

fn rational_combination_law() -> Outcome {
    const CASES: u64 = 120;
    const TOL: f64 = 1e-12;
    const BUDGET: Duration = Duration::from_secs(10);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut r = rng::stream(BASE_SEED, 100 + case);
        let count = r.random_range(1..=3usize);
        let q = r.random_range(count as u64..=6);
        let nums = composition(q, count, &mut r);
        let n = r.random_range(1..=3);
        let m = r.random_range(1..=3);
        let reps: Vec<MaxEntRep> = (0..count)
            .map(|k| MaxEntRep::random(n, n, m, r.random_range(1..=3), rng::derive(BASE_SEED, &[1, case, k as u64])))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let weights: Vec<RationalWeight> = nums.iter().map(|&k| RationalWeight::new(k, q).unwrap()).collect();
        let combined = ok(rational_combination(&reps, &weights, qcorr::DEFAULT_MAX_DIM), "rational_combination")?;
        ok(combined.validate(), &format!("case {case}: PVM validation"))?;
        let evals: Vec<Correlation> = reps.iter().map(|rep| rep.eval().unwrap()).collect();
        let floats: Vec<f64> = weights.iter().map(|w| w.to_f64()).collect();
        let expected = Correlation::convex_combine(&evals, &floats).unwrap();
        let dist = combined.eval().unwrap().sup_distance(&expected).unwrap();
        worst = worst.max(dist);
        ensure(dist <= TOL, || format!("case {case}: sup distance {dist:e} > {TOL:e}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= BUDGET, || format!("took {elapsed:?}, budget {BUDGET:?}"))?;
    Ok(format!("{CASES} cases, max sup distance {worst:.1e}, {:.2}s", elapsed.as_secs_f64()))
}

fn rational_marginal_law() -> Outcome {
    const CASES: u64 = 240;
    const TOL: f64 = 1e-9;
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut r = rng::stream(BASE_SEED, 200 + case);
        let d = r.random_range(1..=6usize);
        let rep = ok(
            MaxEntRep::random(r.random_range(1..=3), r.random_range(1..=3), r.random_range(1..=4), d, rng::derive(BASE_SEED, &[2, case])),
            "random rep",
        )?;
        let marg = rep.eval().unwrap().marginals(TOL);
        ensure(marg.well_defined, || format!("case {case}: marginals depend on the other input"))?;
        for v in marg.alice.iter().chain(&marg.bob).flatten() {
            let off = (v - (v * d as f64).round() / d as f64).abs();
            worst = worst.max(off);
            ensure(off <= TOL, || format!("case {case}: marginal {v} is {off:e} from a multiple of 1/{d}"))?;
        }
    }
    Ok(format!("{CASES} reps with d <= 6, max distance to k/d {worst:.1e}"))
}

fn corner_round_trips() -> Outcome {
    const NS_CASES: u64 = 120;
    const NS_TOL: f64 = 1e-10;
    const ME_CASES: u64 = 100;
    const ME_TOL: f64 = 1e-12;
    let mut inputs = vec![Correlation::pr_box()];
    for case in 0..NS_CASES {
        let mut r = rng::stream(BASE_SEED, 300 + case);
        let (n_a, n_b, m) = (r.random_range(1..=3), r.random_range(1..=3), r.random_range(2..=3));
        let seed = rng::derive(BASE_SEED, &[3, case]);
        // every third input is quantum rather than a mixture of extreme points
        inputs.push(if case % 3 == 0 {
            MaxEntRep::random(n_a, n_b, m, r.random_range(1..=4), seed).unwrap().eval().unwrap()
        } else {
            Correlation::random_nonsignalling(n_a, n_b, m, seed).unwrap()
        });
    }
    for (idx, p) in inputs.iter().enumerate() {
        let lifted = ok(lift_nonsignalling(p, NS_TOL), &format!("lift {idx}"))?;
        let back = corner(&lifted, p.n_a(), p.n_b()).unwrap();
        ensure(&back == p, || format!("input {idx}: corner of lift differs from input"))?;
        ensure(lifted.is_synchronous(NS_TOL).unwrap(), || format!("input {idx}: lift not synchronous"))?;
        ensure(lifted.is_symmetric(NS_TOL).unwrap(), || format!("input {idx}: lift not symmetric"))?;
        ensure(lifted.marginals(NS_TOL).well_defined, || format!("input {idx}: lift signals"))?;
    }
    for case in 0..ME_CASES {
        let mut r = rng::stream(BASE_SEED, 400 + case);
        let (n_a, n_b) = (r.random_range(1..=3), r.random_range(1..=3));
        let rep = MaxEntRep::random(n_a, n_b, r.random_range(2..=3), r.random_range(1..=4), rng::derive(BASE_SEED, &[4, case])).unwrap();
        let q = ok(lift_max_ent(&rep), "lift_max_ent")?.eval().unwrap();
        let dist = corner(&q, n_a, n_b).unwrap().sup_distance(&rep.eval().unwrap()).unwrap();
        ensure(dist <= ME_TOL, || format!("max-ent case {case}: corner off by {dist:e}"))?;
        ensure(q.is_synchronous(ME_TOL).unwrap(), || format!("max-ent case {case}: not synchronous"))?;
        ensure(q.is_symmetric(ME_TOL).unwrap(), || format!("max-ent case {case}: not symmetric"))?;
        ensure(q.marginals(ME_TOL).well_defined, || format!("max-ent case {case}: signals"))?;
    }
    Ok(format!("{} nonsignalling inputs incl. PR box exact; {ME_CASES} max-ent lifts at {ME_TOL:e}", inputs.len()))
}

/// Smallest `N <= max_den` putting every eigenvalue of every element on the
/// grid `Z / N`, computed element by element with the Jacobi solver.
fn predicted_den(meas: &OperatorMeasure, max_den: u64) -> Option<u64> {
    let eigs: Vec<f64> = meas.elements().iter().flat_map(|e| linalg::herm_eigen(e.matrix()).unwrap().values).collect();
    (1..=max_den).find(|&n| eigs.iter().all(|v| (v * n as f64 - (v * n as f64).round()).abs() < 1e-9))
}

fn dilation_soundness() -> Outcome {
    const DENSE_CASES: usize = 60;
    const TOL: f64 = 1e-10;
    const DENSE_BUDGET: u128 = 256;
    const MAX_DEN: u64 = 6;
    let (mut dense_done, mut factored_done, mut worst) = (0usize, 0usize, 0.0f64);
    let mut case = 0u64;
    while dense_done < DENSE_CASES {
        ensure(case < 2000, || format!("only {dense_done} cases within the dense budget"))?;
        let mut r = rng::stream(BASE_SEED, 500 + case);
        let (n_a, n_b, m, d) = (r.random_range(1..=2), r.random_range(1..=2), r.random_range(2..=3), r.random_range(1..=3));
        let seed = rng::derive(BASE_SEED, &[5, case]);
        case += 1;
        let rep = ok(dilation::random_commuting_rep(n_a, n_b, m, d, MAX_DEN, seed), "random commuting rep")?;
        let predicted = rep.alice().iter().chain(rep.bob()).try_fold(d as u128, |acc, meas| {
            predicted_den(meas, MAX_DEN).map(|n| acc * n as u128)
        });
        let predicted = predicted.ok_or_else(|| format!("case {case}: spectrum not on a grid with N <= {MAX_DEN}"))?;
        let before = ok(dilation::eval_almost_max_ent(&rep), "POVM eval")?;
        let opts = DilationOptions { seed, ..Default::default() };
        let factored = ok(dilation::dilate_factored(&rep, &opts), &format!("case {case}: dilation"))?;
        ok(factored.validate(), &format!("case {case}: factored PVM validation"))?;
        ensure(factored.dimension() == Some(predicted), || {
            format!("case {case}: dimension {:?}, predicted {predicted}", factored.dimension())
        })?;
        let dist = factored.eval().sup_distance(&before).unwrap();
        worst = worst.max(dist);
        ensure(dist <= TOL, || format!("case {case}: factored eval off by {dist:e}"))?;
        factored_done += 1;
        if predicted <= DENSE_BUDGET {
            let dense = ok(factored.materialize(DENSE_BUDGET as usize), "materialize")?;
            ensure(dense.kind() == MeasureKind::Pvm && dense.d() as u128 == predicted, || format!("case {case}: dense shape"))?;
            ok(dense.validate(), &format!("case {case}: dense PVM validation"))?;
            let dist = dense.eval().unwrap().sup_distance(&before).unwrap();
            worst = worst.max(dist);
            ensure(dist <= TOL, || format!("case {case}: dense eval off by {dist:e}"))?;
            dense_done += 1;
        }
    }
    Ok(format!(
        "{dense_done} dense dilations (dim <= {DENSE_BUDGET}) and {factored_done} factored, max error {worst:.1e}, dimensions match d*prod N"
    ))
}

fn rounding_pipeline() -> Outcome {
    const SEEDS: u64 = 32;
    const EPS: [f64; 2] = [1e-2, 1e-3];
    const DENSE_CHECK: u128 = 512;
    let (mut worst_ratio, mut dense_checks): (f64, usize) = (0.0, 0);
    for case in 0..SEEDS {
        let d = 1 + (case % 4) as usize;
        let seed = rng::derive(BASE_SEED, &[6, case]);
        let rep = ok(dilation::random_binary_povm_rep(2, 2, d, seed), "random POVM rep")?;
        let before = ok(dilation::eval_almost_max_ent(&rep), "POVM eval")?;
        for eps in EPS {
            let opts = DilationOptions { max_den: 10_000, seed, ..Default::default() };
            let out = ok(dilation::round_and_dilate(&rep, eps, &opts), &format!("seed {case} eps {eps}"))?;
            ok(out.validate(), &format!("seed {case} eps {eps}: PVM validation"))?;
            let after = out.eval();
            let dist = after.sup_distance(&before).unwrap();
            worst_ratio = worst_ratio.max(dist / eps);
            ensure(dist < eps, || format!("seed {case}: distance {dist:e} >= eps {eps:e}"))?;
            if out.dimension().is_some_and(|dim| dim <= DENSE_CHECK) {
                let dense = ok(out.materialize(DENSE_CHECK as usize), "materialize")?;
                ok(dense.validate(), "dense PVM validation")?;
                let gap = dense.eval().unwrap().sup_distance(&after).unwrap();
                ensure(gap <= 1e-10, || format!("seed {case}: dense and factored differ by {gap:e}"))?;
                dense_checks += 1;
            }
        }
    }
    // single-input reps stay small enough to also check in dense form
    for case in 0..SEEDS {
        let seed = rng::derive(BASE_SEED, &[6, 1000 + case]);
        let rep = ok(dilation::random_binary_povm_rep(1, 1, 1 + (case % 2) as usize, seed), "random POVM rep")?;
        let before = dilation::eval_almost_max_ent(&rep).unwrap();
        let out = ok(dilation::round_and_dilate(&rep, EPS[0], &DilationOptions { seed, ..Default::default() }), "round")?;
        if out.dimension().is_some_and(|dim| dim <= DENSE_CHECK) {
            let dense = ok(out.materialize(DENSE_CHECK as usize), "materialize")?;
            ok(dense.validate(), "dense PVM validation")?;
            let dist = dense.eval().unwrap().sup_distance(&before).unwrap();
            ensure(dist < EPS[0], || format!("small seed {case}: dense distance {dist:e}"))?;
            dense_checks += 1;
        }
    }
    ensure(dense_checks > 0, || "no case small enough for a dense cross-check".into())?;
    Ok(format!("{SEEDS} m=2 reps x eps {{1e-2, 1e-3}}, worst distance {worst_ratio:.2} eps, {dense_checks} dense cross-checks"))
}

fn chsh_separation() -> Outcome {
    const TOL: f64 = 1e-9;
    const RECON: f64 = 1e-8;
    let quantum = (2.0 + 2f64.sqrt()) / 4.0;
    let rep = chsh_optimal_rep();
    ok(rep.validate(), "CHSH rep validation")?;
    let p = rep.eval().unwrap();
    let game = chsh_game_functional();
    let value = bell_value(&p, &game).unwrap();
    ensure((value - quantum).abs() <= TOL, || format!("game value {value} vs {quantum}"))?;

    let vertices = enumerate_deterministic(2, 2, 2, 16).unwrap();
    let classical = vertices.iter().map(|v| bell_value(v, &game).unwrap()).fold(f64::NEG_INFINITY, f64::max);
    ensure((classical - 0.75).abs() <= TOL, || format!("exhaustive classical value {classical}"))?;

    let cert = match ok(is_local(&p, TOL, membership::DEFAULT_MAX_VERTICES), "is_local")? {
        MembershipVerdict::Outside { certificate } => certificate,
        other => return Err(format!("CHSH correlation not outside: {other:?}")),
    };
    let remax = vertices.iter().map(|v| bell_value(v, &cert.functional).unwrap()).fold(f64::NEG_INFINITY, f64::max);
    ensure((remax - cert.classical_bound).abs() <= TOL, || format!("certificate bound {} vs re-maximized {remax}", cert.classical_bound))?;
    ensure(cert.achieved_value > remax + TOL, || format!("certificate value {} does not exceed {remax}", cert.achieved_value))?;

    for (idx, v) in vertices.iter().chain([&Correlation::uniform(2, 2, 2).unwrap()]).enumerate() {
        match ok(is_local(v, TOL, 16), "is_local")? {
            MembershipVerdict::Inside { reconstruction_error, .. } if reconstruction_error <= RECON => {}
            other => return Err(format!("point {idx} not inside: {other:?}")),
        }
    }
    Ok(format!(
        "value {value:.10}, classical 3/4 by exhaustion, certificate {:.6} > {:.6}, 17 inside points",
        cert.achieved_value, cert.classical_bound
    ))
}

fn density_demonstration() -> Outcome {
    const EPS: f64 = 1e-3;
    const MAX_DEN: u64 = 10_000;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let reps = [
        MaxEntRep::random(2, 2, 2, 2, rng::derive(BASE_SEED, &[7, 0])).unwrap(),
        MaxEntRep::random(2, 2, 2, 3, rng::derive(BASE_SEED, &[7, 1])).unwrap(),
    ];
    let evals: Vec<Correlation> = reps.iter().map(|r| r.eval().unwrap()).collect();
    let target = Correlation::convex_combine(&evals, &[s, 1.0 - s]).unwrap();
    let weights = ok(approximate_weights(&[s, 1.0 - s], EPS, MAX_DEN), "approximate_weights")?;
    let combined = ok(rational_combination(&reps, &weights, qcorr::DEFAULT_MAX_DIM), "rational_combination")?;
    ok(combined.validate(), "PVM validation")?;
    let dist = combined.eval().unwrap().sup_distance(&target).unwrap();
    ensure(dist < EPS, || format!("distance {dist:e} >= {EPS:e}"))?;
    Ok(format!("weights {}, {} at dimension {}, distance {dist:.1e}", weights[0], weights[1], combined.d()))
}

fn tower_consistency() -> Outcome {
    const TOL: f64 = 1e-13;
    let mut checks = 0;
    for case in 0..40u64 {
        let mut r = rng::stream(BASE_SEED, 800 + case);
        let rep = MaxEntRep::random(2, 2, r.random_range(2..=3), r.random_range(1..=3), rng::derive(BASE_SEED, &[8, case])).unwrap();
        let p = rep.eval().unwrap();
        for k in 1..=4 {
            let e = ok(embed_factorial(&rep, k, qcorr::DEFAULT_MAX_DIM), "embed")?;
            let dist = e.eval().unwrap().sup_distance(&p).unwrap();
            ensure(e.d() == rep.d() * k && dist <= TOL, || format!("case {case}, k={k}: distance {dist:e}"))?;
            checks += 1;
        }
    }
    // the chain d -> d*2! -> d*3! -> d*4!
    let mut rep = MaxEntRep::random(2, 2, 2, 2, rng::derive(BASE_SEED, &[8, 99])).unwrap();
    let p = rep.eval().unwrap();
    for k in 2..=4 {
        rep = ok(embed_factorial(&rep, k, qcorr::DEFAULT_MAX_DIM), "embed chain")?;
        let dist = rep.eval().unwrap().sup_distance(&p).unwrap();
        ensure(dist <= TOL, || format!("chain step {k}: distance {dist:e}"))?;
    }
    ensure(rep.d() == 48, || format!("chain ended at dimension {}", rep.d()))?;

    // d = 1 synchronous reps: both parties share one response function
    let mut inside = 0;
    for n in 1..=3usize {
        for m in 2..=3usize {
            let count = m.pow(n as u32);
            let mut points = Vec::new();
            for idx in 0..count {
                let f: Vec<usize> = (0..n).map(|x| idx / m.pow(x as u32) % m).collect();
                let meas: Vec<OperatorMeasure> = f.iter().map(|&o| OperatorMeasure::diagonal_pvm(&[o], m).unwrap()).collect();
                let q = MaxEntRep::new(meas.clone(), meas).unwrap().eval().unwrap();
                ensure(q.is_synchronous(0.0).unwrap(), || "d=1 rep not synchronous".into())?;
                points.push(q);
            }
            let mut r = rng::stream(BASE_SEED, 900 + (n * 10 + m) as u64);
            let raw: Vec<f64> = (0..count).map(|_| r.random_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
            w[0] = 1.0 - w[1..].iter().sum::<f64>();
            points.push(Correlation::convex_combine(&points, &w).unwrap());
            for q in &points {
                match ok(is_local(q, 1e-9, membership::DEFAULT_MAX_VERTICES), "is_local")? {
                    MembershipVerdict::Inside { .. } => inside += 1,
                    other => return Err(format!("d=1 synchronous point not inside: {other:?}")),
                }
            }
        }
    }
    Ok(format!("{checks} embeddings k <= 4 and a chain to d=48 within {TOL:e}; {inside} d=1 synchronous points inside"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 rational-combination oracle law", rational_combination_law),
        ("2 rational marginal law", rational_marginal_law),
        ("3 corner round trips", corner_round_trips),
        ("4 dilation soundness", dilation_soundness),
        ("5 eps-rounding pipeline", rounding_pipeline),
        ("6 CHSH separation", chsh_separation),
        ("7 density demonstration", density_demonstration),
        ("8 tower consistency", tower_consistency),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
