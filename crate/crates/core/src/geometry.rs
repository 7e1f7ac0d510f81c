//! Scan-overlap geometry of a raster of circular illuminations.
//!
//! Everything in this module depends only on the scan geometry: the overlap
//! ratio of two adjacent disks as a function of the step ratio, its inverses,
//! the number of neighbours overlapping a primary illumination, and the
//! per-pixel illumination count over a small evaluation box.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_sig;

/// Lower branch threshold of the approximate inverse.
pub const RHO_0: f64 = 0.0448;
/// Upper branch threshold of the approximate inverse.
pub const RHO_1: f64 = 0.5816;

/// Fractional intersection area of two adjacent illuminated disks, in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OverlapRatio(f64);

impl OverlapRatio {
    pub fn new(rho: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&rho) {
            Ok(Self(rho))
        } else {
            Err(Error::Domain {
                name: "rho",
                value: rho,
                domain: "[0, 1]",
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Scan step divided by probe diameter, `d / 2r`, in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepRatio(f64);

impl StepRatio {
    pub fn new(gamma: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&gamma) {
            Ok(Self(gamma))
        } else {
            Err(Error::Domain {
                name: "gamma",
                value: gamma,
                domain: "[0, 1]",
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    fn clamped(gamma: f64) -> Self {
        Self(gamma.clamp(0.0, 1.0))
    }
}

/// `(2/π)(acos γ − γ√(1−γ²))`.
pub fn overlap_ratio(gamma: StepRatio) -> OverlapRatio {
    let g = gamma.0;
    let rho = 2.0 / PI * (g.acos() - g * (1.0 - g * g).sqrt());
    OverlapRatio(rho.clamp(0.0, 1.0))
}

/// Closed-form piecewise approximation of the inverse of [`overlap_ratio`].
///
/// Round-trip error `|ρ − R(R⁻¹(ρ))|` stays below 0.008 on `[0, 1]`.
pub fn inverse_overlap_approx(rho: OverlapRatio) -> StepRatio {
    let r = rho.0;
    let gamma = if r > RHO_1 {
        PI / 4.0 * (1.0 - r)
    } else if r >= RHO_0 {
        (0.5 * (PI / 2.0 - 1.0 + (2.0 * PI * r + 3.0 - PI).sqrt())).cos()
    } else {
        (0.5 * (6.0 * PI * r).cbrt()).cos()
    };
    StepRatio::clamped(gamma)
}

/// Bisection inverse of [`overlap_ratio`], accurate to `tol` in ρ.
pub fn inverse_overlap_exact(rho: OverlapRatio, tol: f64) -> StepRatio {
    let target = rho.0;
    if target >= 1.0 {
        return StepRatio(0.0);
    }
    if target <= 0.0 {
        return StepRatio(1.0);
    }
    // R is strictly decreasing: R(lo) > target > R(hi).
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut mid = 0.5;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = overlap_ratio(StepRatio(mid)).0;
        if (r - target).abs() <= tol {
            break;
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    StepRatio(mid)
}

/// How a step ratio is derived from a requested overlap ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InverseRule {
    /// Bisection on the exact overlap formula.
    #[default]
    Exact,
    /// The closed-form piecewise approximation.
    Approx,
}

impl InverseRule {
    pub fn step_ratio(self, rho: OverlapRatio) -> StepRatio {
        match self {
            InverseRule::Exact => inverse_overlap_exact(rho, 1e-13),
            InverseRule::Approx => inverse_overlap_approx(rho),
        }
    }
}

/// Number of raster neighbours whose illumination overlaps the primary one at
/// overlap ratio `rho`.
pub fn count_overlapping(rho: OverlapRatio, max_radius: usize) -> Result<usize> {
    count_within(InverseRule::Exact.step_ratio(rho), max_radius)
}

/// Lattice offsets `(l1, l2) ≠ (0, 0)` with `|l1|, |l2| ≤ max_radius` and
/// `γ·√(l1² + l2²) < 1`.
pub fn count_within(gamma: StepRatio, max_radius: usize) -> Result<usize> {
    let g = gamma.0;
    if g == 0.0 {
        return Err(Error::UnboundedCount);
    }
    if max_radius < 1 || (max_radius as f64) < (1.0 / g).ceil() {
        return Err(Error::Config(format!(
            "max_radius {max_radius} must be >= max(1, ceil(1/gamma)) = {}",
            (1.0 / g).ceil()
        )));
    }
    let m = max_radius as i64;
    let mut count = 0;
    for l1 in -m..=m {
        for l2 in -m..=m {
            if (l1, l2) == (0, 0) {
                continue;
            }
            if g * ((l1 * l1 + l2 * l2) as f64).sqrt() < 1.0 {
                count += 1;
            }
        }
    }
    Ok(count)
}

fn neighbour_radius(gamma: StepRatio) -> usize {
    (1.0 / gamma.0).ceil() as usize + 1
}

/// Summary of the overlap count and the per-pixel illumination count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub d_count: usize,
    pub m_c: u32,
    pub big_m_c: u32,
    pub mu_c: f64,
    pub var_c: f64,
    pub sigma_c: f64,
}

impl CoverageStats {
    pub fn sigma_over_mu(&self) -> Option<f64> {
        (self.mu_c > 0.0).then(|| self.sigma_c / self.mu_c)
    }
}

/// Per-pixel illumination counts over a `3L × 3L` box for a raster of disks of
/// diameter `L` spaced `round(γ·L)` px, with one disk centred on the box.
///
/// Pixel `i` has its centre at coordinate `i`; the box centre is at
/// `(3L − 1)/2`, so the central `L × L` evaluation box circumscribes the
/// central disk. All distance tests are done on doubled integer coordinates.
#[derive(Clone, Debug)]
pub struct CoverageMap {
    pub diameter_px: usize,
    pub step_px: usize,
    counts: Vec<u32>,
}

impl CoverageMap {
    pub fn simulate(gamma: StepRatio, diameter_px: usize) -> Result<Self> {
        let l = diameter_px;
        let step = (gamma.0 * l as f64).round() as usize;
        if step == 0 {
            return Err(Error::Resolution {
                gamma: gamma.0,
                diameter_px: l,
            });
        }
        let side = 3 * l;
        let mut counts = vec![0u32; side * side];
        let l2 = (l * l) as i64;
        let centre2 = (side - 1) as i64;
        let step2 = 2 * step as i64;
        // disks whose centre lies within L/2 of the box boundary
        let reach = (side as i64 + l as i64) / step2 + 1;
        let centres: Vec<i64> = (-reach..=reach)
            .map(|k| centre2 + k * step2)
            .filter(|&c2| c2 > -(l as i64) - 1 && c2 < 2 * side as i64 - 1 + l as i64)
            .collect();
        for &cy in &centres {
            for &cx in &centres {
                paint_disk(&mut counts, side, cy, cx, l2);
            }
        }
        Ok(Self {
            diameter_px: l,
            step_px: step,
            counts,
        })
    }

    pub fn side(&self) -> usize {
        3 * self.diameter_px
    }

    pub fn count(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.side() + col]
    }

    /// Counts inside the central `L × L` evaluation box, row-major.
    pub fn evaluation_box(&self) -> Vec<u32> {
        let l = self.diameter_px;
        let side = self.side();
        (l..2 * l)
            .flat_map(|r| self.counts[r * side + l..r * side + 2 * l].iter().copied())
            .collect()
    }
}

/// Increment every pixel whose doubled-coordinate centre `(2y, 2x)` satisfies
/// `(2y − cy)² + (2x − cx)² < L²`.
fn paint_disk(counts: &mut [u32], side: usize, cy: i64, cx: i64, l2: i64) {
    let n = side as i64;
    for y in 0..n {
        let dy = 2 * y - cy;
        let rem = l2 - dy * dy;
        if rem <= 0 {
            continue;
        }
        // |2x - cx| < sqrt(rem)
        let mut half = (rem as f64).sqrt().floor() as i64;
        while half * half >= rem {
            half -= 1;
        }
        while (half + 1) * (half + 1) < rem {
            half += 1;
        }
        // 2x in [cx - half, cx + half]
        let x_lo = (cx - half + 1).div_euclid(2).max(0);
        let x_hi = (cx + half).div_euclid(2).min(n - 1);
        if x_lo > x_hi {
            continue;
        }
        let row = &mut counts[(y * n) as usize..((y + 1) * n) as usize];
        for v in &mut row[x_lo as usize..=x_hi as usize] {
            *v += 1;
        }
    }
}

fn summarize(values: &[u32], d_count: usize) -> CoverageStats {
    let n = values.len() as f64;
    let m_c = values.iter().copied().min().unwrap_or(0);
    let big_m_c = values.iter().copied().max().unwrap_or(0);
    let mu_c = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var_c = values
        .iter()
        .map(|&v| {
            let d = v as f64 - mu_c;
            d * d
        })
        .sum::<f64>()
        / n;
    CoverageStats {
        d_count,
        m_c,
        big_m_c,
        mu_c,
        var_c,
        sigma_c: var_c.sqrt(),
    }
}

/// Illumination-count statistics over the evaluation box at overlap `rho`.
pub fn pixel_coverage_stats(rho: OverlapRatio, probe_diameter_px: usize) -> Result<CoverageStats> {
    if rho.0 >= 1.0 {
        return Err(Error::Domain {
            name: "rho",
            value: rho.0,
            domain: "[0, 1)",
        });
    }
    coverage_for_step(InverseRule::Exact.step_ratio(rho), probe_diameter_px)
}

pub fn coverage_for_step(gamma: StepRatio, probe_diameter_px: usize) -> Result<CoverageStats> {
    if probe_diameter_px < 8 {
        return Err(Error::Config(format!(
            "probe diameter must be >= 8 px, got {probe_diameter_px}"
        )));
    }
    let map = CoverageMap::simulate(gamma, probe_diameter_px)?;
    let d_count = count_within(gamma, neighbour_radius(gamma))?;
    Ok(summarize(&map.evaluation_box(), d_count))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryValues {
    pub gamma: f64,
    pub stats: CoverageStats,
    pub sigma_over_mu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryRow {
    pub rho: f64,
    pub values: std::result::Result<GeometryValues, String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeometryReport {
    pub rows: Vec<GeometryRow>,
}

pub const GEOMETRY_CSV_HEADER: &str = "rho,gamma,D,m_C,M_C,mu_C,var_C,std_C,std_over_mu";

impl GeometryReport {
    pub fn failed_rows(&self) -> impl Iterator<Item = &GeometryRow> {
        self.rows.iter().filter(|r| r.values.is_err())
    }

    /// CSV with six significant digits; failed rows carry only `rho`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(GEOMETRY_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&fmt_sig(row.rho, 6));
            match &row.values {
                Ok(v) => {
                    let s = &v.stats;
                    let ratio = v.sigma_over_mu.map(|x| fmt_sig(x, 6)).unwrap_or_default();
                    out.push_str(&format!(
                        ",{},{},{},{},{},{},{},{}",
                        fmt_sig(v.gamma, 6),
                        s.d_count,
                        s.m_c,
                        s.big_m_c,
                        fmt_sig(s.mu_c, 6),
                        fmt_sig(s.var_c, 6),
                        fmt_sig(s.sigma_c, 6),
                        ratio
                    ));
                }
                Err(_) => out.push_str(",,,,,,,,"),
            }
            out.push('\n');
        }
        out
    }
}

fn geometry_row(rho: f64, probe_diameter_px: usize, rule: InverseRule) -> GeometryRow {
    let values = (|| {
        let r = OverlapRatio::new(rho)?;
        if rho >= 1.0 {
            return Err(Error::Domain {
                name: "rho",
                value: rho,
                domain: "[0, 1)",
            });
        }
        let gamma = rule.step_ratio(r);
        let stats = coverage_for_step(gamma, probe_diameter_px)?;
        Ok(GeometryValues {
            gamma: gamma.value(),
            sigma_over_mu: stats.sigma_over_mu(),
            stats,
        })
    })()
    .map_err(|e: Error| e.to_string());
    GeometryRow { rho, values }
}

/// One report row per ρ, sorted ascending, using the exact inverse.
pub fn sweep_geometry(rho_values: &[f64], probe_diameter_px: usize) -> GeometryReport {
    sweep_geometry_with(rho_values, probe_diameter_px, InverseRule::Exact)
}

pub fn sweep_geometry_with(rho_values: &[f64], probe_diameter_px: usize, rule: InverseRule) -> GeometryReport {
    let mut rhos = rho_values.to_vec();
    rhos.sort_by(|a, b| a.total_cmp(b));
    #[cfg(feature = "parallel")]
    let rows = {
        use rayon::prelude::*;
        rhos.par_iter()
            .map(|&r| geometry_row(r, probe_diameter_px, rule))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows = rhos.iter().map(|&r| geometry_row(r, probe_diameter_px, rule)).collect();
    GeometryReport { rows }
}

/// Inclusive `min, min + step, ...` grid; empty when `min > max`.
pub fn rho_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || min > max {
        return Vec::new();
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| {
            let v = min + i as f64 * step;
            // snap to the decimal grid to avoid 0.15000000000000002 in reports
            (v * 1e9).round() / 1e9
        })
        .collect()
}
