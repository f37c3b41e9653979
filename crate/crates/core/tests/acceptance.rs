//! Acceptance run: one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use korosmol::analysis::{certified_error_l2, hyperbolic_cross, worst_case_l2, WorstCaseOperator};
use korosmol::experiment::{run_sweep, ExperimentConfig};
use korosmol::korobov::{reproducing_check, rkhs_inner, KernelSpec};
use korosmol::smolyak::{apply_p_fourier, build_grid, multiset_cardinality};
use korosmol::translate::{apply_r, apply_t, qm_fourier, qm_translates};
use korosmol::{FourierCoefficients, KorobovElement, KorobovParams, TensorOperator, UnivariateOp};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn random_coeffs(rng: &mut ChaCha8Rng, d: usize, degree: i64, real: bool) -> FourierCoefficients {
    let mut g = FourierCoefficients::new(d).unwrap();
    let side = (2 * degree + 1) as usize;
    for pos in 0..side.pow(d as u32) {
        let j: Vec<i64> = (0..d)
            .map(|l| ((pos / side.pow((d - 1 - l) as u32)) % side) as i64 - degree)
            .collect();
        let v = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        g.set(&j, v).unwrap();
    }
    let g = if real { g.real_part() } else { g };
    let n = g.l2_norm();
    g.scaled(Complex64::new(1.0 / n, 0.0))
}

fn element(g: FourierCoefficients, r: f64) -> KorobovElement {
    KorobovElement::new(KorobovParams::new(r, g.dim()).unwrap(), g).unwrap()
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Translate form of Q_m against the exact aliased Fourier series.
fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rs = [1.25, 2.0, 3.0];
    let ms = [1u64, 2, 4, 8];
    let mut worst = 0.0f64;
    for i in 0..50 {
        let r = rs[i % 3];
        let m = ms[(i / 3) % 4];
        let degree = rng.random_range(0..=8);
        let e = element(random_coeffs(&mut rng, 1, degree, true), r);
        let combo = qm_translates(&e, m).unwrap();
        let op = TensorOperator::tensor(&[UnivariateOp::Q(m)]).unwrap();
        for _ in 0..200 {
            let x = rng.random_range(0.0..2.0 * PI);
            let a = combo.eval(&[x], 1e-10).unwrap();
            let b = op.eval_point(&e, &[x]).unwrap();
            worst = worst.max((a - b).norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 2e-8 && secs < 60.0,
        format!("max |translates - Fourier| = {worst:.3e} (tol 2e-8), {secs:.2} s (limit 60 s)"),
    )
}

fn algebraic_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut collapse = 0.0f64;
    let mut rt = 0.0f64;
    let mut t_minus_one = 0.0f64;
    for r in [1.25, 2.0, 3.0] {
        let e = element(random_coeffs(&mut rng, 1, 8, true), r);
        for m in 0..=6u32 {
            let big_j = 4u64 << m;
            let p = apply_p_fourier(&e, m, &[big_j]).unwrap().coeffs;
            let q = qm_fourier(&e, 1 << m, big_j).unwrap().coeffs;
            collapse = collapse.max(p.sub(&q).unwrap().max_abs());
        }
        for k in 0..=6i64 {
            let big_j = 256;
            let rk = apply_r(&e, k, big_j).unwrap().coeffs;
            let diff = apply_t(&e, k - 1, big_j)
                .unwrap()
                .coeffs
                .sub(&apply_t(&e, k, big_j).unwrap().coeffs)
                .unwrap();
            rt = rt.max(rk.sub(&diff).unwrap().max_abs());
        }
        let id = apply_t(&e, -1, 64).unwrap().coeffs;
        t_minus_one = t_minus_one.max(id.sub(&e.element_fourier(&[64]).unwrap()).unwrap().max_abs());
    }

    let mut quad = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(0..6);
        let n = rng.random_range(0..6);
        let s = (m + n + 1 + rng.random_range(0..3)) as usize;
        let f1 = random_coeffs(&mut rng, 1, m, false);
        let f2 = random_coeffs(&mut rng, 1, n, false);
        let conv = f1.convolve(&f2).unwrap();
        for _ in 0..50 {
            let x = rng.random_range(0.0..2.0 * PI);
            let mut rhs = Complex64::new(0.0, 0.0);
            for l in 0..s {
                let y = 2.0 * PI * l as f64 / s as f64;
                rhs += f1.eval(&[y]).unwrap() * f2.eval(&[x - y]).unwrap();
            }
            rhs /= s as f64;
            quad = quad.max((conv.eval(&[x]).unwrap() - rhs).norm());
        }
    }

    let mut parseval = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(1..=10i64);
        let f = random_coeffs(&mut rng, 1, m, false);
        let q = (2 * m + 1) as usize;
        let grid = f.sample_grid(&[q]).unwrap();
        let discrete = (grid.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / q as f64).sqrt();
        parseval = parseval.max((discrete - f.l2_norm()).abs());
    }
    let ok = collapse <= 1e-12 && rt <= 1e-12 && t_minus_one <= 1e-12 && quad <= 1e-10 && parseval <= 1e-12;
    verdict(
        ok,
        format!(
            "P_m vs Q_(2^m) {collapse:.1e}, R_k vs T_(k-1)-T_k {rt:.1e}, T_-1 vs I {t_minus_one:.1e}, \
             quadrature identity {quad:.1e}, discrete Parseval {parseval:.1e}"
        ),
    )
}

fn reproducing_kernel() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rs = [0.75, 1.0, 2.0];
    let mut worst = 0.0f64;
    let mut truncated = false;
    for i in 0..50 {
        let r = rs[i % 3];
        let d = 1 + (i / 3) % 2;
        let degree = rng.random_range(0..=5);
        let real = i % 2 == 0;
        let e = element(random_coeffs(&mut rng, d, degree, real), r);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let bx = vec![degree as u64; d];
        let chk = reproducing_check(&e, &x, &bx).unwrap();
        truncated |= chk.truncated;
        let kernel = KernelSpec::for_space(e.params(), x.clone())
            .unwrap()
            .as_element(&bx)
            .unwrap();
        let materialized = rkhs_inner(&e, &kernel).unwrap();
        worst = worst
            .max((chk.inner - chk.pointwise).norm())
            .max((materialized - chk.pointwise).norm());
    }
    verdict(
        worst <= 1e-10 && !truncated,
        format!("max |(f, K(.,x)) - f(x)| = {worst:.2e} over 50 elements (tol 1e-10)"),
    )
}

fn univariate_rate() -> Check {
    let start = Instant::now();
    let g = FourierCoefficients::from_entries(
        1,
        [
            (vec![1], Complex64::new(0.5, 0.0)),
            (vec![-1], Complex64::new(0.5, 0.0)),
            (vec![2], Complex64::new(0.25, 0.0)),
            (vec![-2], Complex64::new(0.25, 0.0)),
        ],
    )
    .unwrap();
    let g = g.scaled(Complex64::new(1.0 / g.l2_norm(), 0.0));
    let e = element(g, 2.0);
    let ms = [2u64, 4, 8, 16, 32, 64];
    let mut ln_m = Vec::new();
    let mut ln_e = Vec::new();
    let mut certified = true;
    for &m in &ms {
        let op = TensorOperator::tensor(&[UnivariateOp::Q(m)]).unwrap();
        let rep = certified_error_l2(&e, &op).unwrap();
        certified &= rep.tail_bound <= 0.01 * rep.value;
        ln_m.push((m as f64).ln());
        ln_e.push(rep.value.ln());
    }
    let s = slope(&ln_m, &ln_e);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        (-2.15..=-1.85).contains(&s) && certified && secs < 30.0,
        format!("log-log slope {s:.4} over m = 2..64 (target [-2.15, -1.85]), {secs:.2} s"),
    )
}

fn multivariate_rate() -> Check {
    let start = Instant::now();
    let cfg = ExperimentConfig::from_json(
        r#"{"d":2,"r":2.0,"levels":[2,3,4,5,6,7,8],
            "test_function":{"kind":"random_g","degree":4,"seed":7}}"#,
    )
    .unwrap();
    let out = run_sweep(&cfg).unwrap();
    let c = out
        .records
        .iter()
        .filter(|r| r.m <= 4)
        .map(|r| r.error_value / r.bound_model)
        .fold(0.0, f64::max);
    let envelope = out
        .records
        .iter()
        .all(|r| r.error_value <= c * r.bound_model);
    let fit = out.fit.expect("seven levels");
    let secs = start.elapsed().as_secs_f64();
    verdict(
        envelope && (0.8..=1.2).contains(&fit.fitted_rate) && secs < 600.0,
        format!(
            "C = {c:.4} from m <= 4 bounds all m = 2..8: {envelope}; model slope {:.4} (target [0.8, 1.2]); {secs:.2} s",
            fit.fitted_rate
        ),
    )
}

fn worst_case_consistency() -> Check {
    let iters = 20_000;
    let est = |m: u64, big_j: u64| worst_case_l2(1, 2.0, WorstCaseOperator::Qm(m), big_j, iters, 5).unwrap();
    let mut values = Vec::new();
    let mut stability = 0.0f64;
    let mut converged = true;
    for &m in &[4u64, 8, 16, 32] {
        let a = est(m, 8 * m);
        converged &= a.converged;
        if m <= 16 {
            let b = est(m, 16 * m);
            converged &= b.converged;
            stability = stability.max((a.estimate - b.estimate).abs() / a.estimate);
        }
        values.push(a.estimate);
    }
    let ratios: Vec<f64> = values.windows(2).map(|w| w[1] / w[0] * 4.0).collect();
    let ok = ratios.iter().all(|q| (0.7..=1.3).contains(q)) && stability <= 1e-6 && converged;
    verdict(
        ok,
        format!(
            "4·ratio for m = 4, 8, 16: {:.4?} (target [0.7, 1.3]); J-doubling change {stability:.1e} (tol 1e-6)",
            ratios
        ),
    )
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn brute_grid(d: usize, m: u32) -> (u64, usize) {
    let mut nodes = BTreeSet::new();
    let mut multiset = 0u64;
    let mut k = vec![0u32; d];
    loop {
        if k.iter().sum::<u32>() <= m {
            let q: Vec<u64> = k.iter().map(|&v| (1u64 << (v + 1)) + 1).collect();
            let total: u64 = q.iter().product();
            multiset += total;
            for pos in 0..total {
                let mut rest = pos;
                let mut node = Vec::new();
                for &ql in q.iter().rev() {
                    let s = rest % ql;
                    rest /= ql;
                    let g = gcd(s, ql);
                    node.push((s / g, ql / g));
                }
                nodes.insert(node);
            }
        }
        let mut l = 0;
        while l < d {
            k[l] += 1;
            if k[l] <= m {
                break;
            }
            k[l] = 0;
            l += 1;
        }
        if l == d {
            break;
        }
    }
    (multiset, nodes.len())
}

fn combinatorics() -> Check {
    let mut problems = Vec::new();
    for &(d, m) in &[(1usize, 2u32), (2, 1), (1, 0), (2, 3), (3, 2)] {
        let g = build_grid(d, m).unwrap();
        let (multi, distinct) = brute_grid(d, m);
        if (g.multiset_count, g.distinct_count as usize) != (multi, distinct) {
            problems.push(format!("grid d={d} m={m}"));
        }
    }
    let g1 = build_grid(1, 2).unwrap();
    let g2 = build_grid(2, 1).unwrap();
    let examples = (g1.multiset_count, g1.distinct_count, g2.multiset_count, g2.distinct_count);
    if examples != (17, 13, 39, 33) {
        problems.push(format!("example counts {examples:?}"));
    }
    let mut worst_band = 0.0f64;
    for d in 1..=3usize {
        let ratios: Vec<f64> = (4..=14u32)
            .map(|m| multiset_cardinality(d, m) as f64 / (2f64.powi(m as i32) * (m as f64).powi(d as i32 - 1)))
            .collect();
        let band = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
        worst_band = worst_band.max(band);
    }
    if worst_band > 8.0 {
        problems.push(format!("ratio band {worst_band}"));
    }
    // histogram of ∏ max(|k_j|,1) over the box [-64, 64]^d
    for d in 1..=3usize {
        let side = 129usize;
        let mut hist = vec![0u64; 65];
        for pos in 0..side.pow(d as u32) {
            let mut rest = pos;
            let mut prod = 1u64;
            for _ in 0..d {
                let k = (rest % side) as i64 - 64;
                rest /= side;
                prod *= k.unsigned_abs().max(1);
            }
            if prod <= 64 {
                hist[prod as usize] += 1;
            }
        }
        let mut cumulative = 0u64;
        for (a, count) in hist.iter().enumerate().skip(1) {
            cumulative += count;
            for frac in [0.0, 0.5] {
                if hyperbolic_cross(d, a as f64 + frac).unwrap().count != cumulative {
                    problems.push(format!("cross d={d} a={}", a as f64 + frac));
                }
            }
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "grids 17/13 and 39/33 match brute force; multiset ratio band {worst_band:.3} (limit 8); \
             cross counts checked for a <= 64, d <= 3; mismatches: {problems:?}"
        ),
    )
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{"d":2,"r":2.0,"levels":[1,2,3,4,5,6],"test_function":{"kind":"random_g","degree":5,"seed":11}}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_korosmol"))
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        if !status.success() {
            return Err(format!("sweep exited with {status}"));
        }
        let csv = std::fs::read(&out).unwrap();
        let fit = std::fs::read(dir.path().join(format!("run{run}.csv.fit.json"))).unwrap();
        outputs.push((csv, fit));
    }
    let same = outputs[0] == outputs[1];
    verdict(
        same,
        format!("two sweeps with seed 11: CSV {} bytes and fit footer identical: {same}", outputs[0].0.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("algebraic identities", algebraic_identities),
        ("reproducing kernel", reproducing_kernel),
        ("univariate rate", univariate_rate),
        ("multivariate rate", multivariate_rate),
        ("worst-case estimator", worst_case_consistency),
        ("combinatorics", combinatorics),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS - {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} ({name}): FAIL - {detail}", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
