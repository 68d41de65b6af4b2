//! Free-space discrete convolution with the Riesz kernel.
//!
//! `g(x_i) = h^N Σ_j K(x_i - x_j) f(x_j)` with `f` zero outside the box.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::KernelTable;

/// Largest grid the O(M²) oracle agrees to evaluate.
pub const ORACLE_MAX_POINTS: usize = 100_000;

/// Fast path: zero-pad to `2n` per axis and convolve cyclically.
pub fn riesz_convolve(f: &Field, kernel: &KernelTable) -> Result<Field> {
    f.check_same_grid(kernel.grid())?;
    let (g, _) = convolve_pair(f.data(), None, kernel);
    Ok(Field::from_vec(*f.grid(), g).expect("convolution of finite data is finite"))
}

/// Convolves one or two real arrays with a single complex transform: the
/// kernel is real, so real and imaginary parts never mix.
pub(crate) fn convolve_pair(
    a: &[f64],
    b: Option<&[f64]>,
    kernel: &KernelTable,
) -> (Vec<f64>, Vec<f64>) {
    let grid = kernel.grid();
    let plan = kernel.plan();
    let n = grid.n();
    let m = plan.side();
    let dim = grid.dim();
    let mut buf = vec![Complex64::default(); plan.padded_len()];

    let padded_index = |flat: usize| {
        let mut rem = flat;
        let mut out = 0;
        let mut mul = 1;
        for _ in 0..dim {
            out += (rem % n) * mul;
            rem /= n;
            mul *= m;
        }
        out
    };

    for i in 0..grid.len() {
        let im = b.map_or(0.0, |b| b[i]);
        buf[padded_index(i)] = Complex64::new(a[i], im);
    }
    plan.forward(&mut buf, true);
    for (v, k) in buf.iter_mut().zip(kernel.spectrum()) {
        *v *= k;
    }
    plan.inverse(&mut buf, true);

    let w = grid.cell_volume();
    let mut ra = vec![0.0; grid.len()];
    let mut rb = if b.is_some() {
        vec![0.0; grid.len()]
    } else {
        Vec::new()
    };
    for i in 0..grid.len() {
        let v = buf[padded_index(i)];
        ra[i] = w * v.re;
        if b.is_some() {
            rb[i] = w * v.im;
        }
    }
    (ra, rb)
}

/// Brute-force double sum over all pairs of grid points; ground truth for
/// [`riesz_convolve`] on small grids.
pub fn direct_convolve_oracle(f: &Field, kernel: &KernelTable) -> Result<Field> {
    f.check_same_grid(kernel.grid())?;
    let grid = *f.grid();
    if grid.len() > ORACLE_MAX_POINTS {
        return Err(Error::OracleRefused {
            points: grid.len(),
            limit: ORACLE_MAX_POINTS,
        });
    }
    let dim = grid.dim();
    let indices: Vec<Vec<usize>> = (0..grid.len())
        .map(|i| {
            let mut idx = vec![0; dim];
            grid.unravel(i, &mut idx);
            idx
        })
        .collect();
    let mut offset = vec![0isize; dim];
    let w = grid.cell_volume();
    let data = f.data();
    let mut out = vec![0.0; grid.len()];
    for (i, xi) in indices.iter().enumerate() {
        let mut acc = 0.0;
        for (j, xj) in indices.iter().enumerate() {
            if data[j] == 0.0 {
                continue;
            }
            for k in 0..dim {
                offset[k] = xi[k] as isize - xj[k] as isize;
            }
            acc += kernel.at_offset(&offset) * data[j];
        }
        out[i] = w * acc;
    }
    Field::from_vec(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn spike_reproduces_recentered_kernel() {
        let g = Grid::new(3, 6, 9.0).unwrap();
        let k = KernelTable::new(&g, 1.0).unwrap();
        let c = g.center_index();
        let mut f = Field::zeros(g);
        f.data_mut()[g.ravel(&[c, c, c])] = 1.0;
        let fast = riesz_convolve(&f, &k).unwrap();
        let slow = direct_convolve_oracle(&f, &k).unwrap();
        let mut idx = [0usize; 3];
        for i in 0..g.len() {
            g.unravel(i, &mut idx);
            let o: Vec<isize> = idx.iter().map(|&j| j as isize - c as isize).collect();
            let expect = g.cell_volume() * k.at_offset(&o);
            assert!((fast.data()[i] - expect).abs() <= 1e-13 * expect);
            assert_eq!(slow.data()[i], expect);
        }
    }

    #[test]
    fn two_spikes_by_hand() {
        let g = Grid::new(3, 5, 5.0).unwrap();
        let k = KernelTable::new(&g, 2.0).unwrap();
        let mut f = Field::zeros(g);
        let a = g.ravel(&[1, 2, 2]);
        let b = g.ravel(&[3, 2, 2]);
        f.data_mut()[a] = 1.0;
        f.data_mut()[b] = 1.0;
        let out = direct_convolve_oracle(&f, &k).unwrap();
        let expect = k.origin_value() + 1.0 / (8.0 * PI);
        assert!((out.data()[a] - expect).abs() < 1e-15);
        assert!((out.data()[b] - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g = Grid::new(3, 4, 4.0).unwrap();
        let k = KernelTable::new(&g, 0.5).unwrap();
        let z = Field::zeros(g);
        assert!(riesz_convolve(&z, &k).unwrap().is_zero());
        assert!(direct_convolve_oracle(&z, &k).unwrap().is_zero());
    }

    #[test]
    fn oracle_refuses_large_grids() {
        let g = Grid::new(3, 48, 4.0).unwrap();
        let k = KernelTable::new(&g, 2.0).unwrap();
        let f = Field::zeros(g);
        assert!(matches!(
            direct_convolve_oracle(&f, &k),
            Err(Error::OracleRefused {
                points: 110_592,
                ..
            })
        ));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g1 = Grid::new(3, 4, 4.0).unwrap();
        let g2 = Grid::new(3, 4, 5.0).unwrap();
        let k = KernelTable::new(&g1, 2.0).unwrap();
        assert!(matches!(
            riesz_convolve(&Field::zeros(g2), &k),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
