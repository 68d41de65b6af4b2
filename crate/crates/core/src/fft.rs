//! Multi-dimensional FFT on the zero-padded `(2n)^N` box.
//!
//! Transforms skip lines that are known to be zero (forward) or whose output
//! is discarded (inverse): on axis `k` only lines whose indices on axes `< k`
//! lie in `[0, n)` are processed. Forward runs axes last-to-first, inverse
//! first-to-last, so the same pruning rule serves both directions.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct PaddedFft {
    dim: usize,
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PaddedFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PaddedFft")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl PaddedFft {
    pub(crate) fn new(dim: usize, n: usize) -> Self {
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        Self {
            dim,
            n,
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub(crate) fn padded_len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub(crate) fn side(&self) -> usize {
        self.m
    }

    /// Unnormalized forward transform. With `prune`, entries outside the
    /// `[0, n)^N` corner must be zero.
    pub(crate) fn forward(&self, buf: &mut [Complex64], prune: bool) {
        for axis in (0..self.dim).rev() {
            self.transform_axis(buf, axis, &self.forward, prune);
        }
    }

    /// Inverse transform scaled by `1/m^N`. With `prune`, only the
    /// `[0, n)^N` corner of the result is valid.
    pub(crate) fn inverse(&self, buf: &mut [Complex64], prune: bool) {
        for axis in 0..self.dim {
            self.transform_axis(buf, axis, &self.inverse, prune);
        }
        let scale = 1.0 / self.padded_len() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn transform_axis(
        &self,
        buf: &mut [Complex64],
        axis: usize,
        fft: &Arc<dyn Fft<f64>>,
        prune: bool,
    ) {
        let m = self.m;
        let stride = m.pow((self.dim - 1 - axis) as u32);
        let block = m * stride;
        let outer_side = if prune { self.n } else { m };
        let outer_count = outer_side.pow(axis as u32);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut tmp = if stride > 1 {
            vec![Complex64::default(); block]
        } else {
            Vec::new()
        };
        let mut digits = vec![0usize; axis];
        for o in 0..outer_count {
            let mut rem = o;
            for d in digits.iter_mut().rev() {
                *d = rem % outer_side;
                rem /= outer_side;
            }
            let offset = digits.iter().fold(0, |acc, &d| acc * m + d) * block;
            let chunk = &mut buf[offset..offset + block];
            if stride == 1 {
                fft.process_with_scratch(chunk, &mut scratch);
                continue;
            }
            // columns of the m × stride block become contiguous lines
            for r in 0..m {
                for c in 0..stride {
                    tmp[c * m + r] = chunk[r * stride + c];
                }
            }
            fft.process_with_scratch(&mut tmp, &mut scratch);
            for r in 0..m {
                for c in 0..stride {
                    chunk[r * stride + c] = tmp[c * m + r];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], dim: usize, m: usize) -> Vec<Complex64> {
        let len = data.len();
        let mut out = vec![Complex64::default(); len];
        let digits = |mut i: usize| {
            let mut d = vec![0usize; dim];
            for k in (0..dim).rev() {
                d[k] = i % m;
                i /= m;
            }
            d
        };
        for (k, o) in out.iter_mut().enumerate() {
            let kd = digits(k);
            for (j, v) in data.iter().enumerate() {
                let jd = digits(j);
                let phase: usize = kd.iter().zip(&jd).map(|(a, b)| a * b).sum();
                let ang = -2.0 * std::f64::consts::PI * (phase % m) as f64 / m as f64;
                *o += v * Complex64::from_polar(1.0, ang);
            }
        }
        out
    }

    #[test]
    fn pruned_forward_matches_naive_dft() {
        let (dim, n) = (3, 3);
        let plan = PaddedFft::new(dim, n);
        let m = plan.side();
        let mut buf = vec![Complex64::default(); plan.padded_len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = (i * 7 + j * 3 + k) as f64 * 0.1 - 0.4;
                    buf[(i * m + j) * m + k] = Complex64::new(v, -0.5 * v);
                }
            }
        }
        let expect = naive_dft(&buf, dim, m);
        plan.forward(&mut buf, true);
        for (a, b) in buf.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_undoes_forward_on_corner() {
        let plan = PaddedFft::new(3, 4);
        let m = plan.side();
        let mut buf = vec![Complex64::default(); plan.padded_len()];
        let mut orig = buf.clone();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let idx = (i * m + j) * m + k;
                    buf[idx] = Complex64::new((idx % 13) as f64, (idx % 5) as f64);
                    orig[idx] = buf[idx];
                }
            }
        }
        plan.forward(&mut buf, true);
        plan.inverse(&mut buf, true);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let idx = (i * m + j) * m + k;
                    assert!((buf[idx] - orig[idx]).norm() < 1e-12);
                }
            }
        }
    }
}
