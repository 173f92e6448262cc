//! Row-column 2D FFT on row-major buffers, built on rustfft.
//!
//! Transforms are unnormalized; a forward/inverse pair scales by
//! `rows * cols` and the caller divides once at the end.

use num_complex::Complex;
use rustfft::{FftDirection, FftNum, FftPlanner};

pub fn fft2d_forward<T: FftNum>(rows: usize, cols: usize, buf: &mut [Complex<T>]) {
    fft2d(rows, cols, buf, FftDirection::Forward);
}

pub fn fft2d_inverse<T: FftNum>(rows: usize, cols: usize, buf: &mut [Complex<T>]) {
    fft2d(rows, cols, buf, FftDirection::Inverse);
}

fn fft2d<T: FftNum>(rows: usize, cols: usize, buf: &mut [Complex<T>], direction: FftDirection) {
    assert_eq!(buf.len(), rows * cols, "buffer does not match dimensions");
    let mut planner = FftPlanner::new();

    let row_fft = planner.plan_fft(cols, direction);
    let mut scratch =
        vec![Complex::new(T::zero(), T::zero()); row_fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(cols) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    let zero = Complex::new(T::zero(), T::zero());
    let mut transposed = transpose(rows, cols, buf, zero);
    let col_fft = planner.plan_fft(rows, direction);
    scratch.resize(col_fft.get_inplace_scratch_len(), zero);
    for col in transposed.chunks_exact_mut(rows) {
        col_fft.process_with_scratch(col, &mut scratch);
    }
    let back = transpose(cols, rows, &transposed, zero);
    buf.copy_from_slice(&back);
}

fn transpose<T: Copy>(rows: usize, cols: usize, src: &[T], fill: T) -> Vec<T> {
    let mut dst = vec![fill; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
    dst
}
