//! Acceptance checks. Runs every criterion, prints one line each, and exits
//! nonzero if any fails.

use ahm_core::constructors::{design_by_key, fourier, kn, pattern_unitary, Branch};
use ahm_core::hessian::{
    chm_deviation, derivative_first, derivative_second, hessian_spectrum, kn_block_direction, multi_start, phi,
    AscentOptions,
};
use ahm_core::matrix::{
    all_ones, c64, dephase, expm_skew, kron, max_abs_diff, min_modulus, one_norm,
};
use ahm_core::probes::{
    circulant_from_signs, conjecture_scan, defect, exclusion_pipeline, expected_phi_circulant_selfadjoint,
    expected_phi_circulant_symmetric, expected_phi_gaussian, CirculantFamily, Enumeration, ExclusionCriterion,
    ExpectationOptions, PipelineOptions,
};
use ahm_core::rng::{gaussian_skew, haar_unitary, stream_rng};
use ahm_core::{ComplexMatrix, Tolerances, UnitaryCandidate};
use nalgebra::DMatrix;
use rand::Rng;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn chm(n: usize) -> UnitaryCandidate {
    UnitaryCandidate::certify(fourier(n).scale(1.0 / (n as f64).sqrt())).unwrap()
}

fn kn_phi_formula(n: usize) -> f64 {
    let nf = n as f64;
    nf * nf * (nf - 1.0) * (nf - 4.0) / (2.0 * (nf - 2.0))
}

fn c1_all_ones_direction() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 3..=12 {
        let v = phi(&kn(n), &all_ones(n), &tol()).map_err(|e| e.to_string())?.value;
        let want = kn_phi_formula(n);
        worst = worst.max((v - want).abs());
        ensure((v - want).abs() <= 1e-8, || format!("N={n}: {v} vs {want}"))?;
    }
    let v3 = phi(&kn(3), &all_ones(3), &tol()).unwrap().value;
    let v4 = phi(&kn(4), &all_ones(4), &tol()).unwrap().value;
    ensure((v3 + 9.0).abs() <= 1e-8 && v4.abs() <= 1e-8, || format!("N=3 {v3}, N=4 {v4}"))?;
    Ok(format!("N=3..12, max deviation {worst:.1e}; N=3 {v3:.6}, N=4 {v4:.1e}"))
}

fn c2_block_direction() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 5..=12 {
        for (x, y) in [(1.0, -0.5), (0.3, 0.9), (-2.0, 0.7)] {
            let b = kn_block_direction(n, x, y).map_err(|e| e.to_string())?;
            ensure(max_abs_diff(&b, &b.adjoint()) == 0.0, || "not symmetric".into())?;
            ensure(b.diagonal().iter().all(|z| *z == c64(0.0, 0.0)), || "nonzero diagonal".into())?;
            ensure(b.row_sum().iter().all(|z| z.norm() < 1e-15), || "nonzero row sum".into())?;
            let tr = (&b * &b).trace().re;
            let v = phi(&kn(n), &b, &tol()).unwrap().value;
            let want = (2.0 - n as f64 / 2.0) * tr;
            worst = worst.max((v - want).abs());
            ensure((v - want).abs() <= 1e-8, || format!("N={n}: {v} vs {want}"))?;
        }
    }
    Ok(format!("N=5..12, three directions each, max deviation {worst:.1e}"))
}

fn c3_kn_expectations() -> Outcome {
    let want = [-2.0, 0.0, 0.0, -1.5, -3.6];
    let mut got = Vec::new();
    for (n, w) in (3..=7).zip(want) {
        let r = expected_phi_circulant_symmetric(&kn(n), &ExpectationOptions::default(), &tol())
            .map_err(|e| e.to_string())?;
        let c = r.closed_form.unwrap();
        let e = r.exact_enumeration.ok_or("no enumeration")?;
        ensure((c - w).abs() <= 1e-10, || format!("N={n}: closed form {c} vs {w}"))?;
        ensure((e - w).abs() <= 1e-9, || format!("N={n}: enumeration {e} vs {w}"))?;
        got.push(format!("{:.4}", if c.abs() < 1e-12 { 0.0 } else { c }));
    }
    Ok(format!("kn(3..7) = [{}]", got.join(", ")))
}

/// Random circulant from ±1 eigenvalues, rejecting zero entries.
fn random_circulant(seed: u64, k: u64, mirrored: bool) -> UnitaryCandidate {
    let mut rng = stream_rng(seed, k);
    let n = rng.gen_range(3..=12usize);
    loop {
        let mut q: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        if mirrored {
            for j in n / 2 + 1..n {
                q[j] = q[n - j];
            }
        }
        let u = circulant_from_signs(&q).unwrap();
        if min_modulus(u.matrix()) > 1e-9 {
            return u;
        }
    }
}

fn c4_circulant_oracles() -> Outcome {
    let mut worst_enum: f64 = 0.0;
    let mut worst_sigma: f64 = 0.0;
    for mirrored in [false, true] {
        for k in 0..50 {
            let u = random_circulant(4, k + if mirrored { 1000 } else { 0 }, mirrored);
            let opts = ExpectationOptions { enumeration: Enumeration::Always, mc_samples: Some(100_000), seed: k };
            let r = if mirrored {
                expected_phi_circulant_symmetric(&u, &opts, &tol())
            } else {
                expected_phi_circulant_selfadjoint(&u, &opts, &tol())
            }
            .map_err(|e| e.to_string())?;
            let c = r.closed_form.unwrap();
            let e = r.exact_enumeration.unwrap();
            worst_enum = worst_enum.max((c - e).abs());
            ensure((c - e).abs() <= 1e-9, || format!("N={}: closed {c} vs enumeration {e}", u.n()))?;
            let (m, s) = (r.mc_estimate.unwrap(), r.mc_stderr.unwrap());
            // A constant integrand leaves only roundoff in both the deviation and the error bar.
            let z = if (m - c).abs() <= 1e-9 * c.abs().max(1.0) { 0.0 } else { (m - c).abs() / s };
            worst_sigma = worst_sigma.max(z);
            ensure(z <= 4.0, || format!("N={}: MC {m} ± {s} vs {c}", u.n()))?;
        }
    }
    Ok(format!("100 matrices, max |closed − enum| {worst_enum:.1e}, max MC deviation {worst_sigma:.2}σ"))
}

fn fano_minus() -> UnitaryCandidate {
    pattern_unitary(&design_by_key("fano").unwrap(), Branch::RealMinus, 1e-10).unwrap().matrix
}

fn c5_gaussian() -> Outcome {
    let cases = [("kn(3)", kn(3)), ("kn(5)", kn(5)), ("F3/√3", chm(3)), ("Fano U−", fano_minus())];
    let mut parts = Vec::new();
    for (i, (name, u)) in cases.iter().enumerate() {
        let opts = ExpectationOptions { mc_samples: Some(100_000), seed: 50 + i as u64, ..Default::default() };
        let r = expected_phi_gaussian(u, &opts, &tol()).map_err(|e| e.to_string())?;
        let (c, m, s) = (r.closed_form.unwrap(), r.mc_estimate.unwrap(), r.mc_stderr.unwrap());
        let z = (m - c).abs() / s;
        ensure(z <= 4.0, || format!("{name}: MC {m} ± {s} vs {c}"))?;
        parts.push(format!("{name} {c:.3} ({z:.2}σ)"));
    }
    Ok(parts.join(", "))
}

fn c6_exclusions() -> Outcome {
    let opts = PipelineOptions::default();
    let pat = |key: &str| pattern_unitary(&design_by_key(key).unwrap(), Branch::RealMinus, 1e-10).unwrap().matrix;
    let excluded = [
        ("kn(3)", kn(3)),
        ("kn(5)", kn(5)),
        ("kn(6)", kn(6)),
        ("kn(7)", kn(7)),
        ("Fano U−", pat("fano")),
        ("PG(2,3) U−", pat("pg2_3")),
        ("Paley biplane U−", pat("paley11")),
    ];
    let mut parts = Vec::new();
    for (name, u) in &excluded {
        let v = exclusion_pipeline(u, &opts).map_err(|e| format!("{name}: {e}"))?;
        ensure(v.excluded && v.value < 0.0, || format!("{name} not excluded"))?;
        let w = v.witness.as_ref().ok_or_else(|| format!("{name}: no witness"))?;
        let check = phi(u, w, &tol()).unwrap().value;
        ensure(check < 0.0, || format!("{name}: witness gives {check}"))?;
        parts.push(format!("{name} {}", v.criterion.name()));
    }
    let mut survivors: Vec<(String, UnitaryCandidate)> = (2..=6).map(|n| (format!("F{n}"), chm(n))).collect();
    survivors.push(("K4/2".into(), kn(4)));
    for (name, u) in &survivors {
        let v = exclusion_pipeline(u, &opts).map_err(|e| format!("{name}: {e}"))?;
        ensure(!v.excluded && v.criterion == ExclusionCriterion::None, || format!("{name} excluded"))?;
    }
    Ok(format!("{}; F2..F6 and K4/2 survive", parts.join(", ")))
}

fn f_of_t(u: &UnitaryCandidate, a: &ComplexMatrix, t: f64, p: f64) -> f64 {
    let e = expm_skew(a, t).unwrap();
    (u.matrix() * e.matrix()).iter().map(|z| z.norm().powf(p)).sum()
}

fn c7_derivatives() -> Outcome {
    let (mut w1, mut w2, mut wh): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..100u64 {
        let mut rng = stream_rng(7, k);
        let n = 3 + (k % 3) as usize;
        let p = [1.0, 1.5, 3.0][(k % 3) as usize];
        let u = loop {
            let u = haar_unitary(n, &mut rng);
            if min_modulus(u.matrix()) >= 0.05 {
                break u;
            }
        };
        let a = gaussian_skew(n, &mut rng);
        let h = 1e-6;
        let fd1 = (f_of_t(&u, &a, h, p) - f_of_t(&u, &a, -h, p)) / (2.0 * h);
        let d1 = derivative_first(&u, &a, p, &tol()).map_err(|e| e.to_string())?;
        let e1 = (d1 - fd1).abs() / fd1.abs().max(1.0);
        w1 = w1.max(e1);
        ensure(e1 <= 1e-5, || format!("trial {k}: first {d1} vs {fd1}"))?;
        let h = 1e-4;
        let fd2 = (f_of_t(&u, &a, h, p) - 2.0 * f_of_t(&u, &a, 0.0, p) + f_of_t(&u, &a, -h, p)) / (h * h);
        let d2 = derivative_second(&u, &a, p, &tol()).map_err(|e| e.to_string())?;
        let e2 = (d2 - fd2).abs() / fd2.abs().max(1.0);
        w2 = w2.max(e2);
        ensure(e2 <= 1e-4, || format!("trial {k}: second {d2} vs {fd2}"))?;
        if k % 10 == 0 {
            let spec = hessian_spectrum(&u, &tol()).map_err(|e| e.to_string())?;
            let v = phi(&u, &spec.min_direction, &tol()).unwrap().value;
            let l = spec.eigenvalues[0];
            wh = wh.max((v - l).abs());
            ensure((v - l).abs() <= 1e-8 * l.abs().max(1.0), || format!("trial {k}: Φ {v} vs λ {l}"))?;
        }
    }
    for u in [kn(3), kn(5), kn(6), chm(4), fano_minus()] {
        let spec = hessian_spectrum(&u, &tol()).map_err(|e| e.to_string())?;
        let v = phi(&u, &spec.min_direction, &tol()).unwrap().value;
        let l = spec.eigenvalues[0];
        wh = wh.max((v - l).abs());
        ensure((v - l).abs() <= 1e-8 * l.abs().max(1.0), || format!("Φ {v} vs λ {l}"))?;
    }
    Ok(format!("max rel. error first {w1:.1e}, second {w2:.1e}; |Φ(B_min) − λ_min| ≤ {wh:.1e}"))
}

fn c8_saturation() -> Outcome {
    let mut cases: Vec<(String, UnitaryCandidate)> = (2..=6).map(|n| (format!("F{n}"), chm(n))).collect();
    cases.push(("K4/2".into(), kn(4)));
    let mut parts = Vec::new();
    for (name, u) in &cases {
        let n = u.n();
        let spec = hessian_spectrum(u, &tol()).map_err(|e| e.to_string())?;
        ensure(spec.eigenvalues[0] >= -1e-8, || format!("{name}: λ_min {}", spec.eigenvalues[0]))?;
        let kernel = spec.kernel_dim(1e-9);
        ensure(kernel >= n, || format!("{name}: kernel {kernel}"))?;
        for i in 0..n {
            let mut d = ComplexMatrix::zeros(n, n);
            d[(i, i)] = c64(1.0, 0.0);
            let v = phi(u, &d, &tol()).unwrap().value;
            ensure(v.abs() <= 1e-9, || format!("{name}: Φ(E_{i}{i}) = {v}"))?;
        }
        parts.push(format!("{name} kernel {kernel}"));
    }
    Ok(parts.join(", "))
}

/// Rank of the D_U constraint map assembled entry by entry from the
/// complex equations, for all ordered pairs `(i, j)`.
fn brute_force_du(h: &ComplexMatrix) -> usize {
    let n = h.nrows();
    let u = h.scale(1.0 / (n as f64).sqrt());
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut re = vec![0.0; n * n];
            let mut im = vec![0.0; n * n];
            for idx in 0..n * n {
                let a = DMatrix::<f64>::from_fn(n, n, |r, c| if r * n + c == idx { 1.0 } else { 0.0 });
                let s: num_complex::Complex64 =
                    (0..n).map(|k| u[(k, i)].conj() * u[(k, j)] * (a[(k, i)] - a[(k, j)])).sum();
                re[idx] = s.re;
                im[idx] = s.im;
            }
            rows.push(re);
            rows.push(im);
        }
    }
    let m = DMatrix::from_fn(rows.len(), n * n, |r, c| rows[r][c]);
    n * n - m.rank(1e-9)
}

fn c9_defect() -> Outcome {
    let cases = [
        ("F2", fourier(2)),
        ("F3", fourier(3)),
        ("F4", fourier(4)),
        ("F5", fourier(5)),
        ("F2⊗F2", kron(&fourier(2), &fourier(2))),
    ];
    let mut parts = Vec::new();
    for (name, h) in &cases {
        let r = defect(h, false, &tol()).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.dim_du == r.dim_eu, || format!("{name}: {} vs {}", r.dim_du, r.dim_eu))?;
        ensure(r.residual <= 1e-9, || format!("{name}: residual {}", r.residual))?;
        let bf = brute_force_du(h);
        ensure(bf == r.dim_du, || format!("{name}: brute force {bf} vs {}", r.dim_du))?;
        parts.push(format!("{name} {}", r.dim_du));
    }
    let f2 = defect(&fourier(2), false, &tol()).unwrap().dim_du;
    ensure(f2 == 3, || format!("F2 gives {f2}"))?;
    Ok(format!("dim D_U = dim E_U: {}", parts.join(", ")))
}

fn c10_search() -> Outcome {
    let opts = AscentOptions::default();
    let f2 = fourier(2);
    let mut parts = Vec::new();
    for n in [2, 3] {
        let traces = multi_start(n, 20, 10, &opts, &tol());
        let converged: Vec<_> = traces.iter().filter(|t| chm_deviation(t.final_matrix.matrix()) <= 1e-6).collect();
        ensure(converged.len() * 10 >= 9 * traces.len(), || format!("N={n}: {}/20 converged", converged.len()))?;
        if n == 2 {
            for t in &converged {
                let h = t.final_matrix.matrix().scale(2f64.sqrt());
                let d = dephase(&h, 1e-12).map_err(|e| e.to_string())?;
                ensure(max_abs_diff(&d, &f2) <= 1e-5, || format!("limit dephases to {d}"))?;
            }
        }
        let best = traces.iter().map(|t| one_norm(t.final_matrix.matrix())).fold(0.0, f64::max);
        parts.push(format!("N={n} {}/20 converged (best ‖U‖₁ {best:.6})", converged.len()));
    }
    Ok(parts.join(", "))
}

fn c11_scan() -> Outcome {
    let mut parts = Vec::new();
    let mut findings = 0;
    for n in [5, 7, 9, 11] {
        let r = conjecture_scan(CirculantFamily::Symmetric, n, 1000, 11, &tol()).map_err(|e| e.to_string())?;
        ensure(r.evaluated + r.rejected_zero == 1000, || format!("N={n}: trial count mismatch"))?;
        for f in &r.findings {
            println!("FINDING N={n} trial={} value={:e}", f.trial, f.value);
            println!("  q = {:?}", f.q);
            println!("  gamma = {:?}", f.gamma);
            println!("  matrix = {}", f.matrix);
        }
        findings += r.findings.len();
        parts.push(format!(
            "N={n} evaluated {} max {:.3e} boundary {}",
            r.evaluated,
            r.max_value.unwrap_or(f64::NAN),
            r.boundary_cases
        ));
    }
    Ok(format!("{findings} counterexamples; {}", parts.join("; ")))
}

type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

fn main() {
    let criteria: [Criterion; 11] = [
        ("kn(N) against the all-ones direction, N=3..12", c1_all_ones_direction, Some(1)),
        ("zero-row-sum block direction at kn(N), N=5..12", c2_block_direction, None),
        ("circulant symmetric expectation over kn(3..7)", c3_kn_expectations, Some(1)),
        ("circulant expectations: closed form, enumeration, MC", c4_circulant_oracles, Some(30)),
        ("Gaussian-direction expectation against MC", c5_gaussian, None),
        ("exclusion verdicts", c6_exclusions, Some(10)),
        ("derivatives against finite differences; Hessian eigenpair", c7_derivatives, None),
        ("Hessian saturation at Hadamard points", c8_saturation, None),
        ("defect spaces", c9_defect, None),
        ("ascent reaches rescaled Hadamard matrices", c10_search, Some(60)),
        ("expectation sign scan over symmetric circulants", c11_scan, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(secs)) = (&outcome, limit) {
            if elapsed > Duration::from_secs(*secs) {
                outcome = Err(format!("took {elapsed:.2?}, limit {secs}s"));
            }
        }
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS [{elapsed:.2?}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL [{elapsed:.2?}] {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
