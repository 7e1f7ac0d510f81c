//! Dense complex 2D fields, centered unitary DFTs and the window operators
//! used to select and reinsert illuminated regions of an object.

use std::ops::{Index, IndexMut};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Row-major complex samples with explicit dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField2D {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ComplexField2D {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, Complex64::new(0.0, 0.0))
    }

    pub fn filled(height: usize, width: usize, value: Complex64) -> Self {
        assert!(height >= 1 && width >= 1, "field dimensions must be >= 1");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Config(format!(
                "field dimensions must be >= 1, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::Config(format!(
                "field data has {} samples, expected {height}x{width}",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(height >= 1 && width >= 1, "field dimensions must be >= 1");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Row `r` as a contiguous slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    /// Sum of squared moduli.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest sample modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    /// Element-wise product; dimensions must agree.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::Config(format!(
                "dimension mismatch: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// Per-sample phase in radians; zero-magnitude samples map to 0.
    pub fn phase(&self) -> Vec<f64> {
        self.data.iter().map(|&z| phase_of(z)).collect()
    }
}

impl Index<(usize, usize)> for ComplexField2D {
    type Output = Complex64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.width + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexField2D {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.width + c]
    }
}

/// Phase of `z` with the convention that the phase of 0 is 0.
#[inline]
pub fn phase_of(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.im.atan2(z.re)
    }
}

/// `e^{i∠z}`, equal to 1 when `z` is exactly zero.
#[inline]
pub fn unit_phasor(z: Complex64) -> Complex64 {
    let n = z.norm_sqr().sqrt();
    if n == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / n
    }
}

/// Top-left corner of a detector-sized window on the object canvas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
pub struct WindowOffset {
    pub row: usize,
    pub col: usize,
}

impl WindowOffset {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

pub(crate) fn check_window(canvas: (usize, usize), offset: WindowOffset, h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || offset.row + h > canvas.0 || offset.col + w > canvas.1 {
        return Err(Error::OutOfRange {
            row: offset.row as i64,
            col: offset.col as i64,
            height: h,
            width: w,
            canvas_h: canvas.0,
            canvas_w: canvas.1,
        });
    }
    Ok(())
}

/// Copy of the `h`×`w` window at `offset`.
pub fn crop_window(object: &ComplexField2D, offset: WindowOffset, h: usize, w: usize) -> Result<ComplexField2D> {
    check_window(object.dims(), offset, h, w)?;
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        let start = (offset.row + r) * object.width + offset.col;
        data.extend_from_slice(&object.data[start..start + w]);
    }
    Ok(ComplexField2D {
        height: h,
        width: w,
        data,
    })
}

/// Returns `object` with the window at `offset` replaced by `patch`.
pub fn insert_window(object: &ComplexField2D, patch: &ComplexField2D, offset: WindowOffset) -> Result<ComplexField2D> {
    let mut out = object.clone();
    insert_window_in_place(&mut out, patch, offset)?;
    Ok(out)
}

pub fn insert_window_in_place(object: &mut ComplexField2D, patch: &ComplexField2D, offset: WindowOffset) -> Result<()> {
    let (h, w) = patch.dims();
    check_window(object.dims(), offset, h, w)?;
    for r in 0..h {
        let start = (offset.row + r) * object.width + offset.col;
        object.data[start..start + w].copy_from_slice(patch.row(r));
    }
    Ok(())
}

/// Reusable plan for centered unitary 2D transforms of a fixed size.
///
/// The zero frequency sits at `(h/2, w/2)` (integer division) on both the
/// spatial and the frequency side, i.e. `fftshift(fft2(ifftshift(x))) / sqrt(h*w)`.
#[derive(Clone)]
pub struct Dft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    work: Vec<Complex64>,
    transposed: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Dft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(width);
        let row_inv = planner.plan_fft_inverse(width);
        let col_fwd = planner.plan_fft_forward(height);
        let col_inv = planner.plan_fft_inverse(height);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            height,
            width,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            work: vec![zero; height * width],
            transposed: vec![zero; height * width],
            scratch: vec![zero; scratch_len],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// In-place centered unitary forward transform of a row-major buffer.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// In-place centered unitary inverse transform of a row-major buffer.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        assert_eq!(data.len(), h * w, "buffer does not match plan dimensions");
        let (hh, hw) = (h / 2, w / 2);
        let (row_plan, col_plan) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let norm = 1.0 / ((h * w) as f64).sqrt();

        if h % 2 == 0 && w % 2 == 0 {
            // even sizes: both shifts become a (−1)^(r+c) modulation
            for r in 0..h {
                for c in 0..w {
                    let k = r * w + c;
                    self.work[k] = if (r + c) % 2 == 0 { data[k] } else { -data[k] };
                }
            }
            row_plan.process_with_scratch(&mut self.work, &mut self.scratch);
            transpose(&self.work, &mut self.transposed, h, w);
            col_plan.process_with_scratch(&mut self.transposed, &mut self.scratch);
            let base = if (hh + hw) % 2 == 0 { norm } else { -norm };
            for r in 0..h {
                for c in 0..w {
                    let s = if (r + c) % 2 == 0 { base } else { -base };
                    data[r * w + c] = self.transposed[c * h + r] * s;
                }
            }
            return;
        }

        // ifftshift into the work buffer
        for r in 0..h {
            let src_r = (r + hh) % h;
            let src = &data[src_r * w..(src_r + 1) * w];
            let dst = &mut self.work[r * w..(r + 1) * w];
            let split = w - hw;
            // dst[c] = src[(c + hw) % w]
            dst[..split].copy_from_slice(&src[hw..]);
            dst[split..].copy_from_slice(&src[..hw]);
        }

        row_plan.process_with_scratch(&mut self.work, &mut self.scratch);
        transpose(&self.work, &mut self.transposed, h, w);
        col_plan.process_with_scratch(&mut self.transposed, &mut self.scratch);

        // fftshift back out and apply the unitary scale
        for r in 0..h {
            let src_r = (r + h - hh) % h;
            for c in 0..w {
                let src_c = (c + w - hw) % w;
                data[r * w + c] = self.transposed[src_c * h + src_r] * norm;
            }
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], h: usize, w: usize) {
    const B: usize = 16;
    for r0 in (0..h).step_by(B) {
        for c0 in (0..w).step_by(B) {
            for r in r0..(r0 + B).min(h) {
                for c in c0..(c0 + B).min(w) {
                    dst[c * h + r] = src[r * w + c];
                }
            }
        }
    }
}

/// Centered unitary 2D DFT.
pub fn dft2_unitary(field: &ComplexField2D) -> ComplexField2D {
    let mut out = field.clone();
    Dft2::new(field.height, field.width).forward(&mut out.data);
    out
}

/// Inverse of [`dft2_unitary`].
pub fn idft2_unitary(field: &ComplexField2D) -> ComplexField2D {
    let mut out = field.clone();
    Dft2::new(field.height, field.width).inverse(&mut out.data);
    out
}
