//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Every check compares the library against something computed here from
//! first principles (direct DFT sums, explicit loops, the closed-form overlap
//! ratio) or against the stated thresholds.

use std::f64::consts::{FRAC_2_PI, TAU};
use std::process::Command;
use std::time::{Duration, Instant};

use ptycho_cli::{ObjectSource, Preset, SimParams};
use ptycho_core::geometry::{CoverageMap, InverseRule, RHO_0, RHO_1};
use ptycho_core::simulator::noiseless_stack;
use ptycho_core::{
    count_overlapping, forward_pattern, inverse_overlap_approx, nrmse_db, pixel_coverage_stats, reconstruct,
    single_position_update, Algorithm, Complex64, ComplexField2D, EvalRegion, NoiseConfig, OverlapRatio, ReconConfig,
    WindowOffset,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
/// Number, name, time budget and check.
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rho(v: f64) -> OverlapRatio {
    OverlapRatio::new(v).unwrap()
}

/// Closed-form overlap of two disks whose centres are γ diameters apart.
fn overlap_of(gamma: f64) -> f64 {
    FRAC_2_PI * (gamma.acos() - gamma * (1.0 - gamma * gamma).sqrt())
}

fn random_field(h: usize, w: usize, rng: &mut ChaCha8Rng) -> ComplexField2D {
    ComplexField2D::from_fn(h, w, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Centered unitary DFT by direct summation; `sign = -1` forward.
fn direct_dft(f: &[Complex64], h: usize, w: usize, sign: f64) -> Vec<Complex64> {
    let (ch, cw) = ((h / 2) as f64, (w / 2) as f64);
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let ph = sign
                        * TAU
                        * ((u as f64 - ch) * (r as f64 - ch) / h as f64 + (v as f64 - cw) * (c as f64 - cw) / w as f64);
                    acc += f[r * w + c] * Complex64::from_polar(1.0, ph);
                }
            }
            out[u * w + v] = acc / ((h * w) as f64).sqrt();
        }
    }
    out
}

fn c1_inverse_bound() -> Outcome {
    ensure((RHO_0, RHO_1) == (0.0448, 0.5816), || {
        format!("breakpoints {RHO_0}, {RHO_1}")
    })?;
    let n = 10_000;
    let mut worst: (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let r = i as f64 / (n - 1) as f64;
        let err = (r - overlap_of(inverse_overlap_approx(rho(r)).value())).abs();
        if err > worst.0 {
            worst = (err, r);
        }
    }
    ensure(worst.0 < 0.008, || {
        format!("max error {:.5} at rho {:.4}", worst.0, worst.1)
    })?;
    Ok(format!(
        "max |rho - R(R^-1(rho))| = {:.5} at rho {:.4}",
        worst.0, worst.1
    ))
}

fn c2_overlap_count() -> Outcome {
    let d = |v: f64| count_overlapping(rho(v), 40).unwrap();
    for i in 0..=190 {
        let v = 0.19 + i as f64 * 0.001;
        ensure(d(v) == 8, || format!("D({v:.3}) = {}", d(v)))?;
    }
    // locate every jump of D on a 1e-5 grid between 0.10 and 0.50
    let mut jumps = Vec::new();
    let mut prev = d(0.10);
    for i in 1..=40_000 {
        let v = 0.10 + i as f64 * 1e-5;
        let cur = d(v);
        if cur != prev {
            jumps.push((v - 0.5e-5, prev, cur));
            prev = cur;
        }
    }
    let expected = [0.182, 0.391, 0.450];
    ensure(jumps.len() == expected.len(), || format!("jumps found at {jumps:?}"))?;
    for (&(at, ..), want) in jumps.iter().zip(expected) {
        ensure((at - want).abs() <= 0.002, || {
            format!("jump at {at:.5}, expected {want} ± 0.002")
        })?;
    }
    let desc: Vec<String> = jumps.iter().map(|(at, a, b)| format!("{at:.4} ({a}->{b})")).collect();
    Ok(format!("D = 8 on [0.19, 0.38]; jumps at {}", desc.join(", ")))
}

/// Coverage counts over the central L×L box from an explicit disk loop.
fn naive_coverage(gamma: f64, l: usize) -> Vec<u32> {
    let step = (gamma * l as f64).round();
    let centre = (3.0 * l as f64 - 1.0) / 2.0;
    let k = (3.0 * l as f64 / step).ceil() as i64 + 2;
    let centres: Vec<f64> = (-k..=k).map(|i| centre + i as f64 * step).collect();
    let rad2 = (l as f64 / 2.0).powi(2);
    let mut out = Vec::with_capacity(l * l);
    for y in l..2 * l {
        for x in l..2 * l {
            let mut n = 0;
            for &cy in &centres {
                for &cx in &centres {
                    if (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2) < rad2 {
                        n += 1;
                    }
                }
            }
            out.push(n);
        }
    }
    out
}

fn c3_coverage() -> Outcome {
    for i in 0..=19 {
        let r = 0.19 + i as f64 * 0.01;
        let s = pixel_coverage_stats(rho(r), 256).map_err(|e| e.to_string())?;
        ensure(s.m_c == 1 && s.big_m_c == 4, || {
            format!("rho {r:.2}: m_C {} M_C {}", s.m_c, s.big_m_c)
        })?;
    }
    let mut compared = 0;
    for l in [16usize, 32] {
        for i in 1..=19 {
            let r = i as f64 * 0.05;
            let gamma = InverseRule::Exact.step_ratio(rho(r));
            let map = CoverageMap::simulate(gamma, l).map_err(|e| e.to_string())?;
            ensure(map.evaluation_box() == naive_coverage(gamma.value(), l), || {
                format!("L={l} rho={r:.2}: coverage differs from the naive loop")
            })?;
            compared += 1;
        }
    }
    Ok(format!(
        "m_C = 1, M_C = 4 on [0.19, 0.38] at L = 256; {compared} maps identical to the naive loop"
    ))
}

fn c4_forward_model() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let probe = random_field(32, 32, &mut rng);
        let object = random_field(40, 44, &mut rng);
        let t = WindowOffset::new(rng.random_range(0..=8), rng.random_range(0..=12));
        let fast = forward_pattern(&object, &probe, t).map_err(|e| e.to_string())?;
        let exit: Vec<Complex64> = (0..32 * 32)
            .map(|k| probe.as_slice()[k] * object[(t.row + k / 32, t.col + k % 32)])
            .collect();
        let slow: Vec<f64> = direct_dft(&exit, 32, 32, -1.0).iter().map(|z| z.norm_sqr()).collect();
        let scale = slow.iter().cloned().fold(0.0, f64::max);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        worst = worst.max(err);
    }
    ensure(worst <= 1e-8, || format!("relative error {worst:e} vs direct DFT"))?;

    // every pattern of a simulated dataset conserves the exit-wave energy
    let params = SimParams::from_preset(Preset::Ci, ObjectSource::Bars, 0.6, NoiseConfig::noiseless(0));
    let ds = params.simulate().map_err(|e| e.to_string())?;
    let truth = ds.object_truth.as_ref().unwrap();
    let mut parseval = 0.0f64;
    for (l, t) in ds.grid.offsets.iter().enumerate() {
        let energy: f64 = (0..64 * 64)
            .map(|k| (ds.probe.as_slice()[k] * truth[(t.row + k / 64, t.col + k % 64)]).norm_sqr())
            .sum();
        let total: f64 = ds.patterns.pattern(l).iter().sum();
        parseval = parseval.max((total - energy).abs() / energy);
    }
    ensure(parseval <= 1e-9, || format!("Parseval relative error {parseval:e}"))?;
    Ok(format!(
        "direct-DFT relative error {worst:.1e}; Parseval worst {parseval:.1e} over {} patterns",
        ds.patterns.count
    ))
}

/// Algorithm loop body written out step by step with direct transforms.
fn transcribed_update(
    o: &ComplexField2D,
    p: &ComplexField2D,
    y: &[f64],
    t: WindowOffset,
    alpha: f64,
    constrain: bool,
) -> ComplexField2D {
    let (h, w) = p.dims();
    let mut out = o.clone();
    let o_l: Vec<Complex64> = (0..h * w).map(|k| o[(t.row + k / w, t.col + k % w)]).collect();
    let psi_u: Vec<Complex64> = (0..h * w).map(|k| p.as_slice()[k] * o_l[k]).collect();
    let phi_u = direct_dft(&psi_u, h, w, -1.0);
    let phi_c: Vec<Complex64> = phi_u
        .iter()
        .zip(y)
        .map(|(z, &yk)| {
            let arg = if *z == Complex64::new(0.0, 0.0) {
                0.0
            } else {
                z.im.atan2(z.re)
            };
            Complex64::from_polar(yk.sqrt(), arg)
        })
        .collect();
    let psi_c = direct_dft(&phi_c, h, w, 1.0);
    let pmax2 = p.as_slice().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    for k in 0..h * w {
        let mut v = o_l[k] + alpha * p.as_slice()[k].conj() / pmax2 * (psi_c[k] - psi_u[k]);
        if constrain {
            v = if v == Complex64::new(0.0, 0.0) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, v.im.atan2(v.re))
            };
        }
        out[(t.row + k / w, t.col + k % w)] = v;
    }
    out
}

fn c5_loop_body() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for constrain in [false, true] {
        for _ in 0..10 {
            let p = random_field(16, 16, &mut rng);
            let o = random_field(24, 26, &mut rng);
            let y: Vec<f64> = (0..256).map(|_| rng.random_range(0.0..4.0)).collect();
            let t = WindowOffset::new(rng.random_range(0..=8), rng.random_range(0..=10));
            let alpha = rng.random_range(0.05..2.0);
            let got = single_position_update(&o, &p, &y, t, alpha, constrain).map_err(|e| e.to_string())?;
            let want = transcribed_update(&o, &p, &y, t, alpha, constrain);
            let err = got
                .as_slice()
                .iter()
                .zip(want.as_slice())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(err);
            cases += 1;
        }
    }
    ensure(worst <= 1e-12, || format!("max abs error {worst:e}"))?;
    Ok(format!("{cases} PIE/CPIE updates, max abs error {worst:.1e}"))
}

fn c6_modulus_invariant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let (ph, pw) = (rng.random_range(4..=16), rng.random_range(4..=16));
        let p = random_field(ph, pw, &mut rng);
        let (oh, ow) = (ph + rng.random_range(0..10), pw + rng.random_range(0..10));
        let o = random_field(oh, ow, &mut rng);
        let y: Vec<f64> = (0..ph * pw).map(|_| rng.random_range(0.0..3.0)).collect();
        let t = WindowOffset::new(rng.random_range(0..=oh - ph), rng.random_range(0..=ow - pw));
        let alpha = rng.random_range(0.01..=2.0);
        let out = single_position_update(&o, &p, &y, t, alpha, true).map_err(|e| e.to_string())?;
        for r in 0..oh {
            for c in 0..ow {
                let inside = (t.row..t.row + ph).contains(&r) && (t.col..t.col + pw).contains(&c);
                if inside {
                    worst = worst.max((out[(r, c)].norm() - 1.0).abs());
                } else {
                    let (a, b) = (out[(r, c)], o[(r, c)]);
                    ensure(
                        a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits(),
                        || format!("case {case}: pixel ({r},{c}) outside the window changed"),
                    )?;
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("| |o| - 1 | up to {worst:e}"))?;
    Ok(format!(
        "100 random CPIE updates: max | |o| - 1 | = {worst:.1e}, outside bits untouched"
    ))
}

fn c7_noise_calibration() -> Outcome {
    let mut lines = Vec::new();
    for target in [20.0, 26.0] {
        let noisy = SimParams::from_preset(Preset::Ci, ObjectSource::Bars, 0.6, NoiseConfig::poisson(target, 7));
        let ds = noisy.simulate().map_err(|e| e.to_string())?;
        let truth = ds.object_truth.as_ref().unwrap();
        let clean_probe = noisy.probe_spec();
        let clean = noiseless_stack(
            truth,
            &ptycho_core::synthesize_probe(&clean_probe).unwrap(),
            &ds.grid.offsets,
        )
        .map_err(|e| e.to_string())?;
        let s = ds.meta.intensity_scale;
        let n = (clean.count) as f64;
        let (mut analytic, mut empirical) = (0.0, 0.0);
        for l in 0..clean.count {
            let m: Vec<f64> = clean.pattern(l).iter().map(|v| v * s).collect();
            let y = ds.patterns.pattern(l);
            let sig: f64 = m.iter().map(|v| v * v).sum();
            analytic += 10.0 * (sig / m.iter().sum::<f64>()).log10() / n;
            let noise: f64 = m.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
            empirical += 10.0 * (sig / noise).log10() / n;
        }
        ensure((analytic - target).abs() <= 0.01, || {
            format!("target {target}: analytic {analytic:.4}")
        })?;
        ensure((empirical - target).abs() <= 0.5, || {
            format!("target {target}: empirical {empirical:.4}")
        })?;
        lines.push(format!(
            "{target} dB -> analytic {analytic:.4}, empirical {empirical:.3}"
        ));
    }
    Ok(lines.join("; "))
}

fn ci_nrmse(object: ObjectSource, r: f64, algo: Algorithm) -> Result<f64, String> {
    let v = Preset::Ci.values();
    let ds = SimParams::from_preset(Preset::Ci, object, r, NoiseConfig::noiseless(0))
        .simulate()
        .map_err(|e| e.to_string())?;
    let cfg = ReconConfig {
        n_itr: v.n_itr,
        alpha_o: v.alpha_o,
        ..ReconConfig::new(algo)
    };
    let res = reconstruct(&ds, &ds.probe, cfg).map_err(|e| e.to_string())?;
    Ok(res.final_nrmse_db().unwrap())
}

fn c8_convergence() -> Outcome {
    let smooth = ci_nrmse(ObjectSource::Smooth, 0.70, Algorithm::Cpie)?;
    let cpie40 = ci_nrmse(ObjectSource::Bars, 0.40, Algorithm::Cpie)?;
    let cpie60 = ci_nrmse(ObjectSource::Bars, 0.60, Algorithm::Cpie)?;
    let pie40 = ci_nrmse(ObjectSource::Bars, 0.40, Algorithm::Pie)?;
    let summary = format!(
        "smooth CPIE(0.70) {smooth:.2} dB; bars CPIE(0.40) {cpie40:.2}, CPIE(0.60) {cpie60:.2}, PIE(0.40) {pie40:.2} dB"
    );
    let mut failures = Vec::new();
    if smooth > -30.0 {
        failures.push("smooth CPIE(0.70) above -30 dB".to_string());
    }
    if (cpie40 - cpie60).abs() > 3.0 {
        failures.push(format!(
            "CPIE(0.40) vs CPIE(0.60) differ by {:.2} dB",
            (cpie40 - cpie60).abs()
        ));
    }
    if pie40 - cpie40 < 3.0 {
        failures.push(format!("PIE(0.40) only {:.2} dB worse than CPIE(0.40)", pie40 - cpie40));
    }
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary} -- {}", failures.join("; ")))
    }
}

fn c9_nrmse_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let o = random_field(12, 10, &mut rng);
        let e = random_field(12, 10, &mut rng);
        let c = Complex64::from_polar(rng.random_range(0.01..100.0), rng.random_range(-3.2..3.2));
        let region = EvalRegion::full((12, 10));
        let a = nrmse_db(&o, &e, region).map_err(|e| e.to_string())?;
        let b = nrmse_db(&o, &e.map(|z| z * c), region).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    ensure(worst <= 1e-9, || format!("invariance error {worst:e} dB"))?;
    let o = ComplexField2D::from_vec(1, 2, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
    let e = ComplexField2D::from_vec(1, 2, vec![Complex64::new(1.0, 0.0); 2]).unwrap();
    let hand = nrmse_db(&o, &e, EvalRegion::full((1, 2))).map_err(|e| e.to_string())?;
    ensure((hand - (-3.0103)).abs() <= 1e-4, || {
        format!("hand example gives {hand}")
    })?;
    Ok(format!(
        "200 random scalings, max drift {worst:.1e} dB; hand example {hand:.4} dB"
    ))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |threads: &str, name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_ptycho"))
            .args(["sweep", "--preset", "ci", "--seed", "7", "--threads", threads, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!(
                "sweep exited with {}: {}",
                status.status,
                String::from_utf8_lossy(&status.stderr)
            )
        })?;
        std::fs::read(out.join("summary.csv")).map_err(|e| e.to_string())
    };
    let a = run("1", "one")?;
    let b = run("2", "two")?;
    ensure(a == b, || {
        "summary.csv differs between --threads 1 and --threads 2".to_string()
    })?;
    let rows = a.iter().filter(|&&b| b == b'\n').count() - 1;
    Ok(format!("{rows}-row summaries byte-identical across --threads 1 / 2"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            1,
            "inverse-approximation bound",
            Duration::from_secs(1),
            c1_inverse_bound,
        ),
        (2, "D(rho) plateau and jumps", Duration::from_secs(1), c2_overlap_count),
        (
            3,
            "coverage extremes and naive oracle",
            Duration::from_secs(30),
            c3_coverage,
        ),
        (
            4,
            "forward-model oracle equivalence",
            Duration::from_secs(10),
            c4_forward_model,
        ),
        (5, "loop-body equivalence", Duration::from_secs(5), c5_loop_body),
        (
            6,
            "CPIE modulus invariant",
            Duration::from_secs(5),
            c6_modulus_invariant,
        ),
        (7, "noise calibration", Duration::from_secs(30), c7_noise_calibration),
        (8, "desk-scale convergence", Duration::from_secs(300), c8_convergence),
        (9, "NRMSE invariance", Duration::from_secs(1), c9_nrmse_invariance),
        (10, "sweep determinism", Duration::from_secs(600), c10_determinism),
    ];
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        if filter.is_some_and(|f| f != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > budget => Err(format!("{msg} -- took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {n:>2} PASS  {name} ({took:.2?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name} ({took:.2?}): {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
