//! Box discretization of ℝ^N and the problem parameters.

use crate::error::{Error, Result};

/// Cell-centered uniform grid on the box `[-L/2, L/2)^N`.
///
/// Point `i` along an axis sits at `-L/2 + (i + 1/2) h`, so the point set is
/// symmetric under `i -> n - 1 - i`. Data laid out on the grid is row-major
/// with the last axis contiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!(
                "n = {n}, need at least 2 points per axis"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length L = {length} must be positive"
            )));
        }
        let total = n.checked_pow(dim as u32).filter(|&t| t <= 1 << 31);
        if total.is_none() {
            return Err(Error::InvalidGrid(format!("{n}^{dim} points is too many")));
        }
        Ok(Self {
            dim,
            n,
            length,
            h: length / n as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Box side length.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Grid spacing `L / n`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Quadrature weight `h^N` of a single cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Total number of grid points, `n^N`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of axis-index `i`.
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.length + (i as f64 + 0.5) * self.h
    }

    /// Index of the cell nearest the origin on every axis. For even `n` the
    /// `2^N` central cells tie; the lexicographically smallest one is used.
    pub fn center_index(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Stride of `axis` in the row-major layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Splits a flat index into per-axis indices.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for k in (0..self.dim).rev() {
            out[k] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Cell-center position of a flat index.
    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.dim];
        self.unravel(flat, &mut idx);
        for (x, &i) in out.iter_mut().zip(&idx) {
            *x = self.coord(i);
        }
    }

    /// Squared distance of a flat index from the origin.
    pub fn radius_sq(&self, mut flat: usize) -> f64 {
        let mut r2 = 0.0;
        for _ in 0..self.dim {
            let x = self.coord(flat % self.n);
            r2 += x * x;
            flat /= self.n;
        }
        r2
    }
}

/// Exponents and dimension of the equation
/// `-Δu + u = q (I_α * |u|^p) |u|^{q-2} u + p (I_α * |u|^q) |u|^{p-2} u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub dim: usize,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    /// Smoothing `ε` for the powers: `|u|^s` becomes `(u² + ε²)^{s/2} - ε^s`.
    /// `None` means the exact powers.
    pub regularization: Option<f64>,
}

impl Params {
    pub fn new(dim: usize, alpha: f64, p: f64, q: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(Error::InvalidExponent(format!(
                "alpha = {alpha} must lie in (0, {dim})"
            )));
        }
        for (name, v) in [("p", p), ("q", q)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidExponent(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        Ok(Self {
            dim,
            alpha,
            p,
            q,
            regularization: None,
        })
    }

    pub fn with_regularization(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidExponent(format!(
                "regularization epsilon = {epsilon} must be positive"
            )));
        }
        self.regularization = Some(epsilon);
        Ok(self)
    }

    /// Degree of homogeneity of the nonlocal term.
    pub fn degree(&self) -> f64 {
        self.p + self.q
    }

    /// The solver needs `p, q > 1` so the right-hand side is continuous,
    /// unless the powers are regularized.
    pub fn solver_admissible(&self) -> bool {
        self.regularization.is_some() || (self.p > 1.0 && self.q > 1.0)
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "params are for N = {} but the grid has dimension {}",
                self.dim,
                grid.dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_point_count() {
        let g = Grid::new(3, 4, 8.0).unwrap();
        assert_eq!(g.h(), 2.0);
        assert_eq!(g.len(), 64);
        assert_eq!(g.coord(0), -3.0);
        assert_eq!(g.coord(3), 3.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            Grid::new(2, 4, 8.0),
            Err(Error::UnsupportedDimension(2))
        ));
        assert!(matches!(Grid::new(3, 1, 8.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(3, 4, 0.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(3, 4, -1.0), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn coordinates_are_symmetric() {
        for n in [5, 6, 7, 32] {
            let g = Grid::new(3, n, 3.7).unwrap();
            assert!((g.h() * n as f64 - g.length()).abs() < 1e-14);
            for i in 0..n {
                assert!((g.coord(i) + g.coord(n - 1 - i)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ravel_round_trip() {
        let g = Grid::new(4, 3, 1.0).unwrap();
        let mut idx = [0; 4];
        for flat in 0..g.len() {
            g.unravel(flat, &mut idx);
            assert_eq!(g.ravel(&idx), flat);
        }
        assert_eq!(g.stride(0), 27);
        assert_eq!(g.stride(3), 1);
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(3, 2.0, 2.0, 2.0).is_ok());
        assert!(matches!(
            Params::new(3, 3.0, 2.0, 2.0),
            Err(Error::InvalidExponent(_))
        ));
        assert!(matches!(
            Params::new(3, 0.0, 2.0, 2.0),
            Err(Error::InvalidExponent(_))
        ));
        assert!(matches!(
            Params::new(3, 1.0, 0.0, 2.0),
            Err(Error::InvalidExponent(_))
        ));
        assert!(matches!(
            Params::new(2, 1.0, 2.0, 2.0),
            Err(Error::UnsupportedDimension(2))
        ));
        let p = Params::new(3, 1.0, 0.8, 2.0).unwrap();
        assert!(!p.solver_admissible());
        assert!(p.with_regularization(1e-3).unwrap().solver_admissible());
    }
}
