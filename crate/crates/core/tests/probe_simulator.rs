mod common;

use common::{direct_dft, random_field, random_phase_object};
use num_complex::Complex64;
use ptycho_core::probe::{probe_radius_px, synthesize_probe_sampled};
use ptycho_core::simulator::{
    achieved_overlap_for, default_pad_px, empirical_snr_db, mean_expected_snr_db, poisson_draw, NoiseKind,
};
use ptycho_core::*;

fn paper_spec() -> ProbeSpec {
    ProbeSpec::paper_defaults()
}

fn ci_spec() -> ProbeSpec {
    ProbeSpec {
        grid_h: 64,
        grid_w: 64,
        defocus_m: 0.25e-6,
        intensity_i0: 1e4,
        ..ProbeSpec::paper_defaults()
    }
}

#[test]
fn in_focus_probe_matches_direct_inverse_dft() {
    let spec = ProbeSpec {
        grid_h: 64,
        grid_w: 64,
        ..paper_spec()
    };
    let pixel = real_space_pixel_m(&ProbeSpec {
        defocus_m: 0.25e-6,
        ..spec
    });
    let p = synthesize_probe_sampled(&ProbeSpec { defocus_m: 0.0, ..spec }, pixel).unwrap();

    // disk aperture in angle, brought to real space by the summed DFT
    let dtheta = spec.lambda_m / (64.0 * pixel);
    let disk = ComplexField2D::from_fn(64, 64, |r, c| {
        let t = ((r as f64 - 32.0).powi(2) + (c as f64 - 32.0).powi(2)).sqrt() * dtheta;
        if t <= spec.alpha_rad {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let reference = direct_dft(&disk, 1.0);
    let s = (spec.intensity_i0 / reference.energy()).sqrt();
    let peak = p.max_abs();
    for (a, b) in p.as_slice().iter().zip(reference.as_slice()) {
        assert!((a.norm() - s * b.norm()).abs() <= 1e-8 * peak);
    }

    // radial symmetry of the in-focus probe about the centre
    for r in 1..32 {
        for c in 1..32 {
            let v = p[(32 + r, 32 + c)].norm();
            for m in [p[(32 - r, 32 + c)], p[(32 + r, 32 - c)], p[(32 - r, 32 - c)]] {
                assert!((m.norm() - v).abs() <= 1e-8 * peak);
            }
        }
    }
}

#[test]
fn paper_probe_energy_sits_inside_the_geometric_disk() {
    let spec = paper_spec();
    let p = synthesize_probe(&spec).unwrap();
    assert!((p.energy() - spec.intensity_i0).abs() <= 1e-12 * spec.intensity_i0);
    let radius = 1.1 * spec.fill_fraction * 128.0;
    let mut inside = 0.0;
    for r in 0..256 {
        for c in 0..256 {
            if ((r as f64 - 128.0).powi(2) + (c as f64 - 128.0).powi(2)).sqrt() <= radius {
                inside += p[(r, c)].norm_sqr();
            }
        }
    }
    assert!(inside / p.energy() >= 0.9, "fraction {}", inside / p.energy());
}

#[test]
fn defocus_spreads_the_probe() {
    let spec = ProbeSpec {
        grid_h: 128,
        grid_w: 128,
        ..paper_spec()
    };
    let pixel = real_space_pixel_m(&ProbeSpec {
        defocus_m: 0.5e-6,
        ..spec
    });
    let mut last = 0.0;
    for df in [0.0, 0.25e-6, 0.5e-6, 1.0e-6] {
        let p = synthesize_probe_sampled(&ProbeSpec { defocus_m: df, ..spec }, pixel).unwrap();
        let m2: f64 = (0..128)
            .flat_map(|r| (0..128).map(move |c| (r, c)))
            .map(|(r, c)| ((r as f64 - 64.0).powi(2) + (c as f64 - 64.0).powi(2)) * p[(r, c)].norm_sqr())
            .sum::<f64>()
            / p.energy();
        assert!(m2 >= last, "df={df}: {m2} < {last}");
        last = m2;
    }
}

/// Straight quadruple loop: |Σ p·o e^{-2πi k·x}|² / N.
fn direct_pattern(object: &ComplexField2D, probe: &ComplexField2D, at: WindowOffset) -> Vec<f64> {
    let (h, w) = probe.dims();
    let exit = ComplexField2D::from_fn(h, w, |r, c| probe[(r, c)] * object[(at.row + r, at.col + c)]);
    direct_dft(&exit, -1.0)
        .as_slice()
        .iter()
        .map(|z| z.norm_sqr())
        .collect()
}

#[test]
fn forward_pattern_matches_direct_sum() {
    for seed in 0..3 {
        let probe = random_field(32, 32, 100 + seed);
        let object = random_field(48, 40, 200 + seed);
        let at = WindowOffset::new(7, 5);
        let fast = forward_pattern(&object, &probe, at).unwrap();
        let slow = direct_pattern(&object, &probe, at);
        let scale = slow.iter().cloned().fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-8 * scale);
            assert!(*a >= 0.0);
        }
    }
}

#[test]
fn forward_pattern_dimension_checks() {
    let probe = random_field(8, 8, 1);
    let object = random_field(10, 10, 2);
    assert!(forward_pattern(&object, &probe, WindowOffset::new(3, 0)).is_err());
}

#[test]
fn zero_phase_object_patterns_are_offset_independent() {
    let spec = ci_spec();
    let p = synthesize_probe(&spec).unwrap();
    let ones = ComplexField2D::filled(100, 100, Complex64::new(1.0, 0.0));
    let reference: Vec<f64> = dft2_unitary(&p).as_slice().iter().map(|z| z.norm_sqr()).collect();
    for at in [
        WindowOffset::new(0, 0),
        WindowOffset::new(17, 30),
        WindowOffset::new(36, 36),
    ] {
        let y = forward_pattern(&ones, &p, at).unwrap();
        let diff = y.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-12 * spec.intensity_i0);
        let total: f64 = y.iter().sum();
        assert!((total - spec.intensity_i0).abs() <= 1e-10 * spec.intensity_i0);
    }
}

#[test]
fn translation_covariance_is_bitwise() {
    let p = random_field(16, 16, 3);
    let base = random_phase_object(40, 40, 4);
    let (dr, dc) = (3usize, 5usize);
    let shifted = ComplexField2D::from_fn(40, 40, |r, c| {
        if r >= dr && c >= dc {
            base[(r - dr, c - dc)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    for at in [WindowOffset::new(0, 0), WindowOffset::new(10, 12)] {
        let a = forward_pattern(&base, &p, at).unwrap();
        let b = forward_pattern(&shifted, &p, WindowOffset::new(at.row + dr, at.col + dc)).unwrap();
        assert_eq!(a, b);
    }
}

fn ci_setup(rho: f64, img: &GrayImage) -> (ComplexField2D, ScanGrid, ProbeSpec) {
    let spec = ci_spec();
    let pad = default_pad_px(64);
    let obj = pad_symmetric(&load_phase_object(img, 0.0, std::f64::consts::FRAC_PI_2).unwrap(), pad).unwrap();
    let grid = build_scan_grid(
        (128, 128),
        (64, 64),
        probe_radius_px(&spec),
        OverlapRatio::new(rho).unwrap(),
        pad,
    )
    .unwrap();
    (obj, grid, spec)
}

#[test]
fn noiseless_dataset_conserves_energy() {
    let (obj, grid, spec) = ci_setup(0.5, &phantom::bar_chart(128, 128));
    let ds = simulate_dataset(&obj, &spec, &grid, NoiseConfig::noiseless(0)).unwrap();
    ds.validate().unwrap();
    assert_eq!(ds.patterns.count, grid.len());
    for y in ds.patterns.patterns() {
        let total: f64 = y.iter().sum();
        assert!((total - spec.intensity_i0).abs() <= 1e-9 * spec.intensity_i0);
    }
    assert_eq!(ds.meta.intensity_scale, 1.0);
}

#[test]
fn noiseless_unit_object_gives_identical_patterns() {
    let flat = GrayImage::new(128, 128, 255, vec![0; 128 * 128]).unwrap();
    let (obj, grid, spec) = ci_setup(0.6, &flat);
    let ds = simulate_dataset(&obj, &spec, &grid, NoiseConfig::noiseless(0)).unwrap();
    let p = synthesize_probe(&spec).unwrap();
    let fp: Vec<f64> = dft2_unitary(&p).as_slice().iter().map(|z| z.norm_sqr()).collect();
    for y in ds.patterns.patterns() {
        let d = y.iter().zip(&fp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-12 * spec.intensity_i0);
    }
}

#[test]
fn poisson_calibration_hits_target() {
    let (obj, grid, spec) = ci_setup(0.3, &phantom::smooth(128, 128));
    for target in [20.0, 26.0] {
        let ds = simulate_dataset(&obj, &spec, &grid, NoiseConfig::poisson(target, 7)).unwrap();
        assert_eq!(ds.meta.noise.kind, NoiseKind::Poisson);
        assert!((ds.meta.msnr_achieved_db.unwrap() - target).abs() <= 0.01);
        assert!((ds.meta.msnr_empirical_db.unwrap() - target).abs() <= 0.5);
        assert!(ds.patterns.data.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        // scaled probe stays consistent with the scaled means
        let s = ds.meta.intensity_scale;
        assert!((ds.probe.energy() - s * spec.intensity_i0).abs() <= 1e-9 * s * spec.intensity_i0);
    }
}

#[test]
fn poisson_is_seed_deterministic() {
    let (obj, grid, spec) = ci_setup(0.3, &phantom::bar_chart(128, 128));
    let a = simulate_dataset(&obj, &spec, &grid, NoiseConfig::poisson(26.0, 3)).unwrap();
    let b = simulate_dataset(&obj, &spec, &grid, NoiseConfig::poisson(26.0, 3)).unwrap();
    assert_eq!(a.patterns.data, b.patterns.data);
    let c = simulate_dataset(&obj, &spec, &grid, NoiseConfig::poisson(26.0, 4)).unwrap();
    assert_ne!(a.patterns.data, c.patterns.data);
}

#[test]
fn calibrated_stack_recomputes_to_target() {
    let (obj, grid, spec) = ci_setup(0.5, &phantom::smooth(128, 128));
    let ds = simulate_dataset(&obj, &spec, &grid, NoiseConfig::noiseless(0)).unwrap();
    let s = calibrate_intensity(&ds.patterns, 23.5).unwrap();
    let mut scaled = ds.patterns.clone();
    scaled.data.iter_mut().for_each(|v| *v *= s);
    assert!((mean_expected_snr_db(&scaled).unwrap() - 23.5).abs() <= 1e-9);
}

#[test]
fn monte_carlo_snr_matches_formula() {
    // fixed 64x64 pattern: a bright disk on a dim background
    let mean: Vec<f64> = (0..64 * 64)
        .map(|i| {
            let (r, c) = ((i / 64) as f64 - 32.0, (i % 64) as f64 - 32.0);
            if r * r + c * c < 100.0 {
                40.0
            } else {
                0.5
            }
        })
        .collect();
    let predicted = expected_poisson_snr_db(&mean).unwrap();
    let mut out = vec![0.0; mean.len()];
    let mut acc = 0.0;
    for seed in 0..1000u64 {
        poisson_draw(&mean, seed, 0, &mut out).unwrap();
        acc += empirical_snr_db(&mean, &out).unwrap();
    }
    let empirical = acc / 1000.0;
    assert!((empirical - predicted).abs() <= 0.2, "{empirical} vs {predicted}");
}

#[test]
fn poisson_pixel_means_within_three_standard_errors() {
    let mean = [0.3, 1.0, 2.5, 7.0, 15.0, 60.0];
    let mut sums = [0.0; 6];
    let mut out = [0.0; 6];
    let n = 1000u64;
    for seed in 0..n {
        poisson_draw(&mean, seed, 9, &mut out).unwrap();
        for (s, v) in sums.iter_mut().zip(&out) {
            *s += v;
        }
    }
    for (m, s) in mean.iter().zip(&sums) {
        let se = (m / n as f64).sqrt();
        assert!((s / n as f64 - m).abs() <= 3.0 * se, "mean {m}: {}", s / n as f64);
    }
}

#[test]
fn poisson_mean_overflow_is_an_intensity_error() {
    let mut out = [0.0; 2];
    assert!(matches!(
        poisson_draw(&[1.0, 2e12], 0, 0, &mut out),
        Err(Error::Intensity(_))
    ));
}

#[test]
fn scan_grid_windows_in_canvas_and_overlap_bound() {
    let pad = default_pad_px(256);
    for i in 0..20 {
        let r = i as f64 * 0.05;
        let grid = build_scan_grid((512, 512), (256, 256), 64.0, OverlapRatio::new(r).unwrap(), pad).unwrap();
        grid.validate().unwrap();
        let (ch, cw) = grid.canvas_dims();
        for o in &grid.offsets {
            assert!(o.row + 256 <= ch && o.col + 256 <= cw);
        }
        // centres span the central region
        let first = grid.offsets[0].row + 128;
        let last = grid.offsets.last().unwrap().row + 128;
        assert!(first <= pad && last >= pad + 511);

        let unrounded = 128.0 * inverse_overlap_approx(OverlapRatio::new(r).unwrap()).value();
        let quant = (achieved_overlap_for(grid.step_px, 64.0).value()
            - overlap_ratio(StepRatio::new((unrounded / 128.0).min(1.0)).unwrap()).value())
        .abs();
        assert!((grid.rho_achieved.value() - r).abs() <= 0.008 + quant + 1e-12);
    }
}
