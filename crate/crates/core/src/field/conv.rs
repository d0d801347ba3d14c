//! Valid-region causal convolution on cube lattices.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{for_each_in_box, Cube};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMethod {
    Direct,
    Fourier,
    #[default]
    Auto,
}

/// Operation-count weight of one FFT butterfly relative to one direct
/// multiply-add, measured with the `convolution` bench.
const FOURIER_WEIGHT: f64 = 5.0;

/// `out[o] = Σ_{k ∈ [0,M)^d} coeffs[k] · input[o + M - 1 - k]` for
/// `o ∈ [0, N - M + 1)^d`, where `input` has side `N` and `coeffs` side `M`.
pub fn lattice_convolve(
    dim: usize,
    input: &[f64],
    input_side: usize,
    coeffs: &[f64],
    coeff_side: usize,
    method: ConvMethod,
) -> Result<Vec<f64>> {
    let in_cube = Cube::new(dim, input_side)?;
    let c_cube = Cube::new(dim, coeff_side)?;
    if input.len() != in_cube.len() || coeffs.len() != c_cube.len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} inputs and {} coefficients, got {} and {}",
            in_cube.len(),
            c_cube.len(),
            input.len(),
            coeffs.len()
        )));
    }
    if coeff_side == 0 || coeff_side > input_side {
        return Err(Error::ShapeMismatch(format!(
            "coefficient side {coeff_side} must lie in [1, {input_side}]"
        )));
    }
    match resolve_method(dim, input_side, coeffs, coeff_side, method) {
        ConvMethod::Fourier => Ok(convolve_fourier(dim, input, input_side, coeffs, coeff_side)),
        _ => Ok(convolve_direct(dim, input, input_side, coeffs, coeff_side)),
    }
}

/// Picks direct or Fourier evaluation from an operation-count estimate.
pub fn resolve_method(
    dim: usize,
    input_side: usize,
    coeffs: &[f64],
    coeff_side: usize,
    method: ConvMethod,
) -> ConvMethod {
    if method != ConvMethod::Auto {
        return method;
    }
    let n = (input_side - coeff_side + 1) as f64;
    let nnz = coeffs.iter().filter(|&&c| c != 0.0).count() as f64;
    let direct = nnz * n.powi(dim as i32);
    let p = smooth_size(input_side) as f64;
    let total = p.powi(dim as i32);
    let fourier = FOURIER_WEIGHT * 3.0 * total * total.log2().max(1.0);
    if direct <= fourier {
        ConvMethod::Direct
    } else {
        ConvMethod::Fourier
    }
}

/// Smallest `P ≥ n` whose prime factors are all in {2, 3, 5, 7}.
pub fn smooth_size(n: usize) -> usize {
    let mut p = n.max(1);
    loop {
        let mut r = p;
        for f in [2, 3, 5, 7] {
            while r.is_multiple_of(f) {
                r /= f;
            }
        }
        if r == 1 {
            return p;
        }
        p += 1;
    }
}

/// Shift-and-add over nonzero coefficients, parallel over axis-0 slabs.
/// Every output site accumulates in the same coefficient order
/// regardless of the thread count.
fn convolve_direct(dim: usize, input: &[f64], big: usize, coeffs: &[f64], m: usize) -> Vec<f64> {
    let n = big - m + 1;
    let slab = n.pow(dim as u32 - 1);
    let in_slab = big.pow(dim as u32 - 1);
    let c_cube = Cube { dim, side: m };
    let taps: Vec<(Vec<usize>, f64)> = c_cube
        .iter()
        .zip(coeffs)
        .filter(|(_, &c)| c != 0.0)
        .map(|(k, &c)| (k, c))
        .collect();
    let mut out = vec![0.0; n.pow(dim as u32)];
    if dim == 1 {
        const CHUNK: usize = 4096;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, dst)| {
            let start = ci * CHUNK;
            for (k, c) in &taps {
                let src = &input[start + m - 1 - k[0]..];
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o += c * x;
                }
            }
        });
        return out;
    }
    out.par_chunks_mut(slab).enumerate().for_each(|(o0, out_slab)| {
        let row_extents = vec![n; dim.saturating_sub(2)];
        for (k, c) in &taps {
            let base0 = (o0 + m - 1 - k[0]) * in_slab;
            let last_shift = m - 1 - k[dim - 1];
            let mut row = 0usize;
            for_each_in_box_or_unit(&row_extents, |mid| {
                let mut start = base0;
                let mut stride = in_slab;
                for (t, &p) in mid.iter().enumerate() {
                    stride /= big;
                    start += (p + m - 1 - k[t + 1]) * stride;
                }
                start += last_shift;
                let dst = &mut out_slab[row * n..(row + 1) * n];
                for (o, &x) in dst.iter_mut().zip(&input[start..start + n]) {
                    *o += c * x;
                }
                row += 1;
            });
        }
    });
    out
}

fn for_each_in_box_or_unit(extents: &[usize], mut f: impl FnMut(&[usize])) {
    if extents.is_empty() {
        f(&[]);
    } else {
        for_each_in_box(extents, f);
    }
}

fn fft_axes(data: &mut [Complex64], dim: usize, p: usize, fft: &Arc<dyn Fft<f64>>) {
    let total = data.len();
    // last axis: contiguous lines
    data.par_chunks_mut(p).for_each(|line| fft.process(line));
    let mut stride = p;
    for _ in 1..dim {
        let block = stride * p;
        let lines: Vec<Vec<Complex64>> = (0..total / p)
            .into_par_iter()
            .map(|line| {
                let outer = line / stride;
                let inner = line % stride;
                let base = outer * block + inner;
                let mut buf: Vec<Complex64> = (0..p).map(|j| data[base + j * stride]).collect();
                fft.process(&mut buf);
                buf
            })
            .collect();
        for (line, buf) in lines.into_iter().enumerate() {
            let outer = line / stride;
            let inner = line % stride;
            let base = outer * block + inner;
            for (j, v) in buf.into_iter().enumerate() {
                data[base + j * stride] = v;
            }
        }
        stride = block;
    }
}

fn embed(dim: usize, src: &[f64], side: usize, p: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); p.pow(dim as u32)];
    let cube = Cube { dim, side };
    let padded = Cube { dim, side: p };
    for (k, &v) in cube.iter().zip(src) {
        out[padded.index(&k)] = Complex64::new(v, 0.0);
    }
    out
}

/// Circular convolution on a padded cube of side `P ≥ N`; the valid
/// region never wraps, so no extra padding is needed.
fn convolve_fourier(dim: usize, input: &[f64], big: usize, coeffs: &[f64], m: usize) -> Vec<f64> {
    let n = big - m + 1;
    let p = smooth_size(big);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(p);
    let inv = planner.plan_fft_inverse(p);
    let mut x = embed(dim, input, big, p);
    let mut c = embed(dim, coeffs, m, p);
    fft_axes(&mut x, dim, p, &fwd);
    fft_axes(&mut c, dim, p, &fwd);
    x.par_iter_mut().zip(c.par_iter()).for_each(|(a, b)| *a *= b);
    fft_axes(&mut x, dim, p, &inv);
    let scale = 1.0 / (p as f64).powi(dim as i32);
    let padded = Cube { dim, side: p };
    let out_cube = Cube { dim, side: n };
    let mut out = vec![0.0; out_cube.len()];
    let mut j = vec![0usize; dim];
    for (flat, o) in out_cube.iter().enumerate() {
        for t in 0..dim {
            j[t] = o[t] + m - 1;
        }
        out[flat] = x[padded.index(&j)].re * scale;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight from the definition, one output site at a time.
    fn naive(dim: usize, input: &[f64], big: usize, coeffs: &[f64], m: usize) -> Vec<f64> {
        let n = big - m + 1;
        let in_cube = Cube { dim, side: big };
        let c_cube = Cube { dim, side: m };
        Cube { dim, side: n }
            .iter()
            .map(|o| {
                c_cube
                    .iter()
                    .map(|k| {
                        let j: Vec<usize> = (0..dim).map(|t| o[t] + m - 1 - k[t]).collect();
                        coeffs[c_cube.index(&k)] * input[in_cube.index(&j)]
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn hand_example() {
        let out = lattice_convolve(1, &[1., 2., 3., 4.], 4, &[1., 1.], 2, ConvMethod::Direct).unwrap();
        assert_eq!(out, vec![3., 5., 7.]);
        let out = lattice_convolve(1, &[1., 2., 3., 4.], 4, &[1., 1.], 2, ConvMethod::Fourier).unwrap();
        for (a, b) in out.iter().zip([3., 5., 7.]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_kernel_is_a_shifted_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input: Vec<f64> = (0..36).map(|_| rng.random()).collect();
        let mut coeffs = vec![0.0; 9];
        coeffs[0] = 1.0;
        let out = lattice_convolve(2, &input, 6, &coeffs, 3, ConvMethod::Direct).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(out[i * 4 + j], input[(i + 2) * 6 + j + 2]);
            }
        }
    }

    #[test]
    fn direct_matches_definition_in_three_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input: Vec<f64> = (0..7 * 7 * 7).map(|_| rng.random::<f64>() - 0.5).collect();
        let coeffs: Vec<f64> = (0..27).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = lattice_convolve(3, &input, 7, &coeffs, 3, ConvMethod::Direct).unwrap();
        let b = naive(3, &input, 7, &coeffs, 3);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn fourier_matches_direct_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input: Vec<f64> = (0..32 * 32).map(|_| rng.random::<f64>() - 0.5).collect();
        let coeffs: Vec<f64> = (0..64).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = lattice_convolve(2, &input, 32, &coeffs, 8, ConvMethod::Direct).unwrap();
        let b = lattice_convolve(2, &input, 32, &coeffs, 8, ConvMethod::Fourier).unwrap();
        let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(lattice_convolve(1, &[1.0; 3], 4, &[1.0], 1, ConvMethod::Direct).is_err());
        assert!(lattice_convolve(1, &[1.0; 2], 2, &[1.0; 3], 3, ConvMethod::Direct).is_err());
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(11), 12);
        assert_eq!(smooth_size(97), 98);
        assert_eq!(smooth_size(64), 64);
    }
}
