use crate::error::{Error, Result};
use crate::grid::Grid;

/// Real function sampled at the cell centers of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} points",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(
                "field contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, data })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let data = (0..grid.len())
            .map(|i| {
                grid.position(i, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, data }
    }

    /// `exp(-|x - c|² / 2)`.
    pub fn gaussian(grid: Grid, center: &[f64]) -> Self {
        Self::from_fn(grid, |x| {
            let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            (-0.5 * r2).exp()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Discrete `L²` inner product with weight `h^N`.
    pub fn dot(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_volume() * dot(&self.data, &other.data)
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &Field, b: f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub(crate) fn check_same_grid(&self, grid: &Grid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::ShapeMismatch(format!(
                "field lives on {:?}, expected {:?}",
                self.grid, grid
            )));
        }
        Ok(())
    }

    /// Whole-cell translation `u(x - shift·h)` without wrap-around. Values
    /// pushed out of the box are dropped, vacated cells are zero.
    pub fn translated(&self, shift: &[isize]) -> Field {
        self.translate_impl(shift, false)
            .expect("dropping translation never fails")
    }

    /// Like [`Field::translated`] but refuses to drop any nonzero value.
    pub fn translated_exact(&self, shift: &[isize]) -> Result<Field> {
        self.translate_impl(shift, true)
    }

    fn translate_impl(&self, shift: &[isize], strict: bool) -> Result<Field> {
        let g = self.grid;
        assert_eq!(shift.len(), g.dim(), "shift has wrong dimension");
        let n = g.n() as isize;
        let mut out = Field::zeros(g);
        let mut idx = vec![0usize; g.dim()];
        let mut dst = vec![0usize; g.dim()];
        for (flat, &v) in self.data.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            g.unravel(flat, &mut idx);
            let mut inside = true;
            for k in 0..g.dim() {
                let j = idx[k] as isize + shift[k];
                if j < 0 || j >= n {
                    inside = false;
                    break;
                }
                dst[k] = j as usize;
            }
            if inside {
                out.data[g.ravel(&dst)] = v;
            } else if strict {
                return Err(Error::ShiftOutOfRange(shift.to_vec()));
            }
        }
        Ok(out)
    }

    /// Mirror image under `i_axis -> n - 1 - i_axis`, i.e. `x_axis -> -x_axis`.
    pub fn reflected(&self, axis: usize) -> Field {
        let g = self.grid;
        let mut out = Field::zeros(g);
        let mut idx = vec![0usize; g.dim()];
        for (flat, &v) in self.data.iter().enumerate() {
            g.unravel(flat, &mut idx);
            idx[axis] = g.n() - 1 - idx[axis];
            out.data[g.ravel(&idx)] = v;
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_drops_or_refuses() {
        let g = Grid::new(3, 4, 4.0).unwrap();
        let mut f = Field::zeros(g);
        f.data_mut()[g.ravel(&[3, 0, 0])] = 1.0;
        let t = f.translated(&[1, 0, 0]);
        assert!(t.is_zero());
        assert!(matches!(
            f.translated_exact(&[1, 0, 0]),
            Err(Error::ShiftOutOfRange(_))
        ));
        let t = f.translated_exact(&[-2, 3, 1]).unwrap();
        assert_eq!(t.data()[g.ravel(&[1, 3, 1])], 1.0);
    }

    #[test]
    fn reflection_is_an_involution() {
        let g = Grid::new(3, 5, 2.0).unwrap();
        let f = Field::from_fn(g, |x| x[0] + 2.0 * x[1] * x[1] - x[2]);
        let r = f.reflected(0);
        assert_eq!(r.reflected(0), f);
        let expect = Field::from_fn(g, |x| -x[0] + 2.0 * x[1] * x[1] - x[2]);
        for (a, b) in r.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Grid::new(3, 2, 1.0).unwrap();
        assert!(Field::from_vec(g, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(Field::from_vec(g, v).is_err());
    }
}
