//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use pfpp_core::conditioning::{
    condition_kernel_spec, conditional_weights_bruteforce, is_regular, reduce_projection,
    sample_many, ConditionSpec,
};
use pfpp_core::covariance::{half, kernel_from_covariance, random_covariance, random_projection};
use pfpp_core::fock::FockSpace;
use pfpp_core::fock::{verify_wick, QuasiFreeOracle};
use pfpp_core::linalg::max_abs_diff;
use pfpp_core::measure::{
    correlation, expect_multiplicative, weights_bruteforce, MeasureTable, MultiplicativeWeight,
};
use pfpp_core::models::{
    kms_covariance, kms_hs_diagnostic, kms_kernel, ope_projection, ope_weights, schur_q,
    schur_q_table, schur_table, vandermonde_vectors, verify_schur_quasifree, KmsSpec,
    QSpecialization, Specialization, StrictPartition,
};
use pfpp_core::perfectness::{intertwiner_check, swap_op, transpose_mask};
use pfpp_core::skewalg::PfaffianKernel;
use pfpp_core::CVector;

type Outcome = Result<String, String>;

fn check(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit,
        format!("runtime {:.2}s exceeds {limit}s", elapsed.as_secs_f64()),
    )
}

fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    (1u64..1 << n)
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect()
}

fn mask_of(pts: &[usize]) -> u64 {
    pts.iter().fold(0, |m, &p| m | 1 << p)
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn c1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..25 {
        let s = random_covariance(1000 + seed, 3);
        let k = kernel_from_covariance(&s);
        let t = weights_bruteforce(&k).map_err(err)?;
        check(
            (t.total() - 1.0).abs() < 1e-9,
            format!("seed {seed}: mass {}", t.total()),
        )?;
        check(
            t.weights().iter().all(|&w| w >= -1e-9),
            format!("seed {seed}: negative weight"),
        )?;
        for pts in subsets_up_to(3, 3) {
            let d = (t.cylinder(mask_of(&pts)) - correlation(&k, &pts).map_err(err)?).abs();
            worst = worst.max(d);
        }
    }
    check(worst < 1e-9, format!("rho_k deviation {worst:e}"))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "max rho_k deviation {worst:.1e}, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn ordered_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    let mut all = Vec::new();
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n)
                    .filter(|x| !p.contains(x))
                    .map(|x| [p.clone(), vec![x]].concat())
                    .collect::<Vec<_>>()
            })
            .collect();
        all.extend(out.clone());
    }
    all
}

fn c2() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = Vec::new();
    for seed in 0..10 {
        cases.push(random_projection(2000 + seed, 4).into_covariance());
    }
    for seed in 0..10 {
        cases.push(random_covariance(3000 + seed, 3));
    }
    for s in &cases {
        let k = kernel_from_covariance(s);
        let oracle = QuasiFreeOracle::new(s).map_err(err)?;
        for pts in ordered_subsets(s.sites(), 3) {
            let a = oracle.correlation(&pts).map_err(err)?;
            let b = correlation(&k, &pts).map_err(err)?;
            worst = worst.max((a - C64::new(b, 0.0)).norm());
        }
    }
    check(worst < 1e-9, format!("oracle deviation {worst:e}"))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "max deviation {worst:.1e}, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn c3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let k = kernel_from_covariance(&random_covariance(4000 + seed, 4));
        let t = weights_bruteforce(&k).map_err(err)?;
        for _ in 0..5 {
            let alpha: Vec<f64> = (0..4).map(|_| 1.0 + rng.gen_range(0.0..2.0)).collect();
            let f =
                expect_multiplicative(&k, &MultiplicativeWeight::new(alpha.clone()).map_err(err)?)
                    .map_err(err)?;
            worst = worst.max((f - t.expect_product(&alpha)).abs());
        }
    }
    check(worst < 1e-9, format!("Fredholm deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn random_fs(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<CVector> {
    (0..count)
        .map(|_| {
            CVector::from_fn(2 * n, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        })
        .collect()
}

fn c4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut even, mut odd): (f64, f64) = (0.0, 0.0);
    for seed in 0..10 {
        let s = random_covariance(5000 + seed, 3);
        for m in [4, 6] {
            let r = verify_wick(&s, &random_fs(&mut rng, 3, m)).map_err(err)?;
            even = even.max(r.deviation);
        }
        let oracle = QuasiFreeOracle::new(&s).map_err(err)?;
        for m in [1, 3, 5] {
            let v = oracle.expect_b(&random_fs(&mut rng, 3, m)).map_err(err)?;
            odd = odd.max(v.norm());
        }
    }
    check(even < 1e-9, format!("Wick deviation {even:e}"))?;
    check(odd < 1e-10, format!("odd moment {odd:e}"))?;
    Ok(format!("Wick deviation {even:.1e}, odd moments {odd:.1e}"))
}

fn tables_diff(a: &MeasureTable, b: &MeasureTable) -> f64 {
    a.weights()
        .iter()
        .zip(b.weights())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn c5() -> Outcome {
    let shapes: [(Vec<usize>, Vec<usize>); 5] = [
        (vec![1], vec![]),
        (vec![], vec![3]),
        (vec![0, 4], vec![]),
        (vec![2], vec![0]),
        (vec![], vec![1, 3]),
    ];
    let (mut worst, mut order_dev): (f64, f64) = (0.0, 0.0);
    let mut done = 0;
    let mut seed = 6000;
    while done < 20 {
        seed += 1;
        let p = random_projection(seed, 5);
        let (occ, vac) = shapes[done % shapes.len()].clone();
        let spec = ConditionSpec::new(occ.clone(), vac.clone()).map_err(err)?;
        if !is_regular(&p, &spec).map_err(err)? {
            continue;
        }
        let k = kernel_from_covariance(&p);
        let r1 = weights_bruteforce(&kernel_from_covariance(
            reduce_projection(&p, &spec).map_err(err)?.covariance(),
        ))
        .map_err(err)?;
        let r2 =
            weights_bruteforce(&condition_kernel_spec(&k, &spec).map_err(err)?).map_err(err)?;
        let r3 = conditional_weights_bruteforce(&weights_bruteforce(&k).map_err(err)?, &spec)
            .map_err(err)?;
        worst = worst.max(tables_diff(&r1, &r2)).max(tables_diff(&r1, &r3));
        let rev = ConditionSpec::new(
            occ.into_iter().rev().collect(),
            vac.into_iter().rev().collect(),
        )
        .map_err(err)?;
        let a = reduce_projection(&p, &spec).map_err(err)?;
        let b = reduce_projection(&p, &rev).map_err(err)?;
        order_dev = order_dev.max(max_abs_diff(a.matrix(), b.matrix()));
        done += 1;
    }
    check(worst < 1e-9, format!("route deviation {worst:e}"))?;
    check(order_dev < 1e-9, format!("order deviation {order_dev:e}"))?;
    Ok(format!(
        "route deviation {worst:.1e}, order deviation {order_dev:.1e}"
    ))
}

/// Pearson statistic with cells of expected count < 5 pooled; returns
/// (statistic, degrees of freedom).
fn chi_square(counts: &[usize], probs: &[f64], draws: usize) -> Result<(f64, usize), String> {
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&o, &p) in counts.iter().zip(probs) {
        let e = p * draws as f64;
        if p <= 1e-12 {
            check(o == 0, format!("draw in a zero-weight cell ({o})"))?;
        } else if e < 5.0 {
            pooled_obs += o as f64;
            pooled_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    Ok((stat, cells.saturating_sub(1)))
}

fn c6() -> Outcome {
    let start = Instant::now();
    let draws = 100_000;
    let mut notes = Vec::new();
    let cases: [(&str, PfaffianKernel); 2] = [
        ("S=I/2", kernel_from_covariance(&half(3))),
        (
            "projection",
            kernel_from_covariance(&random_projection(7001, 4)),
        ),
    ];
    for (name, k) in &cases {
        let table = weights_bruteforce(k).map_err(err)?;
        let xs = sample_many(k, 7, draws).map_err(err)?;
        let mut counts = vec![0usize; table.weights().len()];
        for x in &xs {
            counts[x.mask as usize] += 1;
        }
        let (stat, dof) = chi_square(&counts, table.weights(), draws)?;
        let crit = ChiSquared::new(dof as f64).map_err(err)?.inverse_cdf(0.999);
        check(
            stat < crit,
            format!("{name}: chi2 {stat:.2} >= {crit:.2} (dof {dof})"),
        )?;
        let again = sample_many(k, 7, draws).map_err(err)?;
        let bytes = |v: &[pfpp_core::measure::Configuration]| {
            v.iter()
                .map(|c| c.bitstring())
                .collect::<Vec<_>>()
                .join("\n")
        };
        check(
            bytes(&xs) == bytes(&again),
            format!("{name}: rerun differs"),
        )?;
        notes.push(format!("{name} chi2 {stat:.1}/{crit:.1}"));
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{}, {:.2}s",
        notes.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn c7() -> Outcome {
    let configs: Vec<(KmsSpec, &str)> = vec![
        (
            KmsSpec::from_fns(20, |x| 1.0 + 0.3 * x.abs(), |x| C64::new(0.7, 0.4) * x, 0.0)
                .map_err(err)?,
            "beta 0",
        ),
        (
            KmsSpec::from_fns(
                20,
                |x| 1.0 + 0.1 * x * x,
                |x| C64::new(0.2, -0.5) * x.signum(),
                1.0,
            )
            .map_err(err)?,
            "beta 1",
        ),
        (
            KmsSpec::from_fns(20, |_| 0.5, |x| C64::new(0.0, 1.0) / x, -1.0).map_err(err)?,
            "beta -1",
        ),
        (
            KmsSpec::from_fns(
                20,
                |x| x.abs(),
                |x| C64::new(1.0, 1.0) * x.signum(),
                f64::INFINITY,
            )
            .map_err(err)?,
            "beta inf",
        ),
        (
            KmsSpec::from_fns(
                20,
                |x| 2.0 - 1.0 / x.abs(),
                |x| C64::new(0.3, 0.0) * x,
                f64::NEG_INFINITY,
            )
            .map_err(err)?,
            "beta -inf",
        ),
    ];
    let mut worst: f64 = 0.0;
    for (spec, name) in &configs {
        let s = kms_covariance(spec).map_err(err)?;
        let d = max_abs_diff(
            kernel_from_covariance(&s).interleaved(),
            kms_kernel(spec).interleaved(),
        );
        check(d < 1e-10, format!("{name}: kernel deviation {d:e}"))?;
        worst = worst.max(d);
    }
    let fd = kms_kernel(&KmsSpec::from_fns(4, |_| 1.0, |_| C64::new(0.0, 0.0), 1.0).map_err(err)?);
    let target = 1.0 / (1.0 + std::f64::consts::E);
    for x in 0..8 {
        check(
            (fd.k12(x, x).re - target).abs() < 1e-12,
            "Fermi-Dirac occupancy",
        )?;
    }
    let bounded = kms_hs_diagnostic(
        &KmsSpec::from_fns(
            20,
            |_| 1.0,
            |x| C64::new(1.0 / x.abs(), 0.0) * x.signum(),
            1.0,
        )
        .map_err(err)?,
    )
    .map_err(err)?;
    let linear = kms_hs_diagnostic(
        &KmsSpec::from_fns(20, |_| 1.0, |x| C64::new(0.5, 0.0) * x.signum(), 1.0).map_err(err)?,
    )
    .map_err(err)?;
    let mut hs: f64 = 0.0;
    for d in [&bounded, &linear] {
        for (a, b) in d.closed_form.iter().zip(&d.frobenius) {
            hs = hs.max((a - b).abs());
        }
    }
    check(hs < 1e-10, format!("HS closed form vs Frobenius {hs:e}"))?;
    let b = &bounded.closed_form;
    let l = &linear.closed_form;
    let tail_b = b[19] - b[9];
    let inc_l: Vec<f64> = l.windows(2).map(|w| w[1] - w[0]).collect();
    check(
        tail_b < 0.05 * b[9],
        format!("decaying ratio: tail growth {tail_b:e}"),
    )?;
    check(
        inc_l
            .iter()
            .all(|&d| (d - inc_l[0]).abs() < 1e-10 && d > 0.0),
        "constant ratio: increments not constant",
    )?;
    Ok(format!(
        "kernel deviation {worst:.1e}, HS {hs:.1e}, partial sums r=10/20: {:.4}/{:.4} vs {:.2}/{:.2}",
        b[9], b[19], l[9], l[19]
    ))
}

fn c8() -> Outcome {
    let f = FockSpace::new(4).map_err(err)?;
    for y in 1..4 {
        for x in 0..y {
            let s = swap_op(&f, x, y).map_err(err)?;
            for w in 0..16u64 {
                for v in 0..16usize {
                    let expect = if v as u64 == transpose_mask(w, x, y) {
                        1.0
                    } else {
                        0.0
                    };
                    check(
                        s.entry(v, w as usize) == C64::new(expect, 0.0),
                        format!("swap ({x} {y}) on {w:04b}"),
                    )?;
                }
            }
        }
    }
    let bern = weights_bruteforce(&kernel_from_covariance(&half(4))).map_err(err)?;
    let r1 = intertwiner_check(&bern, 0.0).map_err(err)?;
    let vs = vandermonde_vectors(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0, 0.5, 2.0, 1.5, 0.3], 2)
        .map_err(err)?;
    let ope = ope_weights(&vs).map_err(err)?;
    let r2 = intertwiner_check(&ope, 0.0).map_err(err)?;
    check(
        r1.max_deviation < 1e-9 && r2.max_deviation < 1e-9,
        "intertwiner deviation",
    )?;
    let table = weights_bruteforce(&kernel_from_covariance(
        ope_projection(&vs).map_err(err)?.covariance(),
    ))
    .map_err(err)?;
    let d = tables_diff(&table, &ope);
    check(d < 1e-9, format!("OPE table vs det^2 {d:e}"))?;
    Ok(format!(
        "intertwiner {:.1e}/{:.1e}, OPE det^2 {d:.1e}",
        r1.max_deviation, r2.max_deviation
    ))
}

fn c9() -> Outcome {
    let start = Instant::now();
    let pl = Specialization::plancherel();
    let t = schur_table(&pl, 16);
    let sum: f64 = t.entries.iter().map(|e| e.1).sum::<f64>() * t.normalization;
    let e = std::f64::consts::E;
    check((sum - e).abs() < 1e-6, format!("sum s^2 = {sum}"))?;
    let other = Specialization::new(vec![0.3], vec![0.2]).map_err(err)?;
    let mut worst: f64 = 0.0;
    for rho in [&pl, &other] {
        let r = verify_schur_quasifree(rho, &[-2, -1, 0, 1, 3], 18);
        check(
            r.max_deviation < 1e-6,
            format!("Wick deviation {:e}", r.max_deviation),
        )?;
        worst = worst.max(r.max_deviation);
    }
    within(start.elapsed(), 120.0)?;
    Ok(format!(
        "sum s^2 - e = {:.1e}, Wick deviation {worst:.1e}, {:.2}s",
        sum - e,
        start.elapsed().as_secs_f64()
    ))
}

fn c10() -> Outcome {
    let zero = QSpecialization::new(vec![]).map_err(err)?;
    for rho in [&zero, &QSpecialization::new(vec![0.4, 0.1]).map_err(err)?] {
        let t = schur_q_table(rho, 14);
        check(
            t.entries.iter().all(|e| e.1 >= 0.0),
            "negative shifted-Schur weight",
        )?;
    }
    let partial = |l: u32| {
        let t = schur_q_table(&zero, l);
        t.entries.iter().map(|e| e.1).sum::<f64>() * t.normalization
    };
    let (p14, limit) = (partial(14), partial(30));
    let e2 = std::f64::consts::E.powi(2);
    check(
        (p14 - limit).abs() < 1e-3,
        format!("partial {p14} vs limit {limit}"),
    )?;
    check((limit - e2).abs() < 1e-9, format!("limit {limit} vs e^2"))?;
    // Exact: q_n = 2^n / n!, Q_(2,1) = q_2 q_1 - 2 q_3.
    let q = |n: i64| Ratio::new(1i64 << n, (1..=n).product::<i64>().max(1));
    let exact = q(2) * q(1) - Ratio::from_integer(2) * q(3);
    check(
        exact == Ratio::new(4, 3),
        format!("exact Q_(2,1) = {exact}"),
    )?;
    let float = schur_q(&StrictPartition::new(vec![2, 1]).map_err(err)?, &zero);
    check(
        (float - 4.0 / 3.0).abs() < 1e-12,
        format!("Q_(2,1) = {float}"),
    )?;
    Ok(format!(
        "partial(14) - limit = {:.1e}, limit - e^2 = {:.1e}, Q_(2,1) = {exact}",
        p14 - limit,
        limit - e2
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("kernel/measure existence", c1),
        ("Fock-oracle equivalence", c2),
        ("Fredholm Pfaffian", c3),
        ("Wick's formula", c4),
        ("conditioning routes", c5),
        ("sampler", c6),
        ("KMS family", c7),
        ("perfectness mechanism", c8),
        ("Schur measures", c9),
        ("shifted Schur", c10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(note) => println!("PASS {:>2} {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
