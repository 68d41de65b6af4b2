//! Tabulated Riesz potential `I_α(x) = A_α |x|^{α-N}` on grid offsets.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fft::PaddedFft;
use crate::grid::Grid;

/// Riesz kernel sampled on every offset `o ∈ (-n, n)^N` of a grid, stored on
/// the `(2n)^N` periodic layout used by the padded convolution, together with
/// its spectrum.
///
/// Off-origin entries are point values `A_α |h o|^{α-N}`. The origin entry is
/// the exact average of `A_α |x|^{α-N}` over the cubic cell `[-h/2, h/2]^N`,
/// so the midpoint sum reproduces the integral of the singular cell for a
/// locally constant density.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Grid,
    alpha: f64,
    normalization: f64,
    table: Vec<f64>,
    spectrum: Vec<Complex64>,
    plan: PaddedFft,
}

/// `A_α = Γ((N-α)/2) / (π^{N/2} 2^α Γ(α/2))`.
pub fn riesz_normalization(dim: usize, alpha: f64) -> f64 {
    let n = dim as f64;
    gamma(0.5 * (n - alpha)) / (PI.powf(0.5 * n) * 2f64.powf(alpha) * gamma(0.5 * alpha))
}

/// `∫_{[-1/2,1/2]^N} |x|^{α-N} dx`.
///
/// The cube splits into `2N` pyramids with apex at the origin. Along each ray
/// the radial integral is exact (`∫_0^1 s^{α-1} ds = 1/α`), leaving the smooth
/// face integral `(N/α) ∫_{[-1/2,1/2]^{N-1}} (1/4 + |y|²)^{(α-N)/2} dy`, which a
/// tensor Gauss–Legendre rule resolves to roundoff.
pub fn unit_cube_singular_integral(dim: usize, alpha: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(24);
    // map [-1, 1] onto [0, 1/2]; symmetry supplies the other half of each axis
    let pts: Vec<(f64, f64)> = nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| (0.25 * (x + 1.0), 0.25 * w))
        .collect();
    let face_dim = dim - 1;
    let exponent = 0.5 * (alpha - dim as f64);
    let mut idx = vec![0usize; face_dim];
    let mut total = 0.0;
    'outer: loop {
        let mut r2 = 0.25;
        let mut w = 1.0;
        for &i in &idx {
            r2 += pts[i].0 * pts[i].0;
            w *= pts[i].1;
        }
        total += w * r2.powf(exponent);
        for d in idx.iter_mut() {
            *d += 1;
            if *d < pts.len() {
                continue 'outer;
            }
            *d = 0;
        }
        break;
    }
    let half_space = 2f64.powi(face_dim as i32);
    dim as f64 / alpha * half_space * total
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

impl KernelTable {
    pub fn new(grid: &Grid, alpha: f64) -> Result<Self> {
        let dim = grid.dim();
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(Error::InvalidExponent(format!(
                "alpha = {alpha} must lie in (0, {dim})"
            )));
        }
        let n = grid.n();
        let h = grid.h();
        let normalization = riesz_normalization(dim, alpha);
        let plan = PaddedFft::new(dim, n);
        let m = plan.side();
        let exponent = alpha - dim as f64;
        let origin = normalization * h.powf(exponent) * unit_cube_singular_integral(dim, alpha);

        let mut table = vec![0.0; plan.padded_len()];
        let mut digits = vec![0usize; dim];
        for (flat, slot) in table.iter_mut().enumerate() {
            let mut rem = flat;
            for d in digits.iter_mut().rev() {
                *d = rem % m;
                rem /= m;
            }
            let r2: f64 = digits
                .iter()
                .map(|&j| {
                    let o = if j <= n {
                        j as f64
                    } else {
                        j as f64 - m as f64
                    };
                    o * o
                })
                .sum();
            *slot = if r2 == 0.0 {
                origin
            } else {
                normalization * (h * h * r2).powf(0.5 * exponent)
            };
        }

        let mut spectrum: Vec<Complex64> = table.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plan.forward(&mut spectrum, false);

        Ok(Self {
            grid: *grid,
            alpha,
            normalization,
            table,
            spectrum,
            plan,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `A_α`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn origin_value(&self) -> f64 {
        self.table[0]
    }

    /// Kernel value at an integer offset with components in `(-n, n)`.
    pub fn at_offset(&self, offset: &[isize]) -> f64 {
        let m = self.plan.side() as isize;
        let n = self.grid.n() as isize;
        let flat = offset.iter().fold(0usize, |acc, &o| {
            assert!(o.abs() < n, "offset {o} outside (-{n}, {n})");
            acc * m as usize + o.rem_euclid(m) as usize
        });
        self.table[flat]
    }

    /// All tabulated values on the `(2n)^N` periodic layout.
    pub fn values(&self) -> &[f64] {
        &self.table
    }

    pub(crate) fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub(crate) fn plan(&self) -> &PaddedFft {
        &self.plan
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_closed_forms() {
        assert!((riesz_normalization(3, 2.0) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((riesz_normalization(3, 1.0) - 1.0 / (2.0 * PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn newtonian_entry_at_unit_distance() {
        let g = Grid::new(3, 4, 4.0).unwrap();
        let k = KernelTable::new(&g, 2.0).unwrap();
        assert!((k.at_offset(&[1, 0, 0]) - 0.0795775).abs() < 1e-7);
        assert!((k.at_offset(&[0, -2, 0]) - 1.0 / (8.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((m12 - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_alpha_outside_range() {
        let g = Grid::new(3, 4, 4.0).unwrap();
        assert!(matches!(
            KernelTable::new(&g, 3.0),
            Err(Error::InvalidExponent(_))
        ));
        assert!(matches!(
            KernelTable::new(&g, -0.5),
            Err(Error::InvalidExponent(_))
        ));
    }

    #[test]
    fn table_invariants() {
        for (dim, n, alpha) in [(3, 6, 0.5), (3, 5, 2.9), (4, 4, 1.0), (5, 3, 4.5)] {
            let g = Grid::new(dim, n, 3.0).unwrap();
            let k = KernelTable::new(&g, alpha).unwrap();
            assert!(k.values().iter().all(|&v| v > 0.0));
            // negation symmetry and monotone decay along a ray
            let mut prev = k.origin_value();
            for j in 1..n as isize {
                let mut o = vec![0isize; dim];
                o[0] = j;
                let v = k.at_offset(&o);
                assert!(v < prev);
                prev = v;
                o[0] = -j;
                assert_eq!(k.at_offset(&o), v);
            }
            // the singular cell exceeds every nearest-neighbour entry
            let mut o = vec![0isize; dim];
            o[dim - 1] = 1;
            assert!(k.origin_value() > k.at_offset(&o));
        }
    }

    #[test]
    fn kernel_scaling_under_coordinate_doubling() {
        let alpha = 1.3;
        let a = KernelTable::new(&Grid::new(3, 6, 3.0).unwrap(), alpha).unwrap();
        let b = KernelTable::new(&Grid::new(3, 6, 6.0).unwrap(), alpha).unwrap();
        let factor = 2f64.powf(alpha - 3.0);
        for o in [[1, 0, 0], [2, -3, 1], [5, 5, 5]] {
            let ratio = b.at_offset(&o) / a.at_offset(&o);
            assert!((ratio - factor).abs() < 1e-14 * factor);
        }
        let ratio = b.origin_value() / a.origin_value();
        assert!((ratio - factor).abs() < 1e-14 * factor);
    }
}
