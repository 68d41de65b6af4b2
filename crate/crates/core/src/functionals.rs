//! Discrete H¹ norm, nonlocal interaction `D(u) = ∫(I_α * |u|^p)|u|^q`, the
//! right-hand side of the equation and the energy `E(u) = ½‖u‖²_{H¹} − D(u)`.
//!
//! Derivatives are second-order centered differences `(u_{i+1} − u_{i−1})/2h`
//! with zero values outside the box, taken at every cell of the box and at the
//! ghost layer just outside it. The discrete Laplacian is `−GᵀG` for that
//! difference operator `G`, so `⟨−Δ_h u, u⟩` equals the kinetic term exactly.

use serde::{Deserialize, Serialize};

use crate::convolve::convolve_pair;
use crate::error::{Error, Result};
use crate::field::{dot, Field};
use crate::grid::{Grid, Params};
use crate::kernel::KernelTable;

/// Components of the energy of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `∫|∇u|²`
    pub kinetic: f64,
    /// `∫|u|²`
    pub mass: f64,
    /// `D(u)`
    pub nonlocal: f64,
    /// `½(kinetic + mass) − nonlocal`
    pub energy: f64,
}

impl EnergyBreakdown {
    pub fn new(kinetic: f64, mass: f64, nonlocal: f64) -> Self {
        Self {
            kinetic,
            mass,
            nonlocal,
            energy: 0.5 * (kinetic + mass) - nonlocal,
        }
    }
}

/// The map `u ↦ |u|^s`, optionally smoothed to `(u² + ε²)^{s/2} − ε^s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Power {
    pub s: f64,
    pub eps: Option<f64>,
}

impl Power {
    pub fn value(&self, u: f64) -> f64 {
        match self.eps {
            None => {
                if self.s == 2.0 {
                    u * u
                } else {
                    u.abs().powf(self.s)
                }
            }
            Some(e) => (u * u + e * e).powf(0.5 * self.s) - e.powf(self.s),
        }
    }

    /// `d/du value(u)`: `s |u|^{s−2} u`, zero at `u = 0`.
    pub fn deriv(&self, u: f64) -> f64 {
        match self.eps {
            None => {
                if u == 0.0 {
                    0.0
                } else if self.s == 2.0 {
                    2.0 * u
                } else {
                    self.s * u.signum() * u.abs().powf(self.s - 1.0)
                }
            }
            Some(e) => self.s * (u * u + e * e).powf(0.5 * self.s - 1.0) * u,
        }
    }

    /// `value(v) − value(u)` without the cancellation of a plain subtraction.
    pub fn diff(&self, u: f64, v: f64) -> f64 {
        match self.eps {
            None => {
                let (a, b) = (u.abs(), v.abs());
                if a == 0.0 || b == 0.0 {
                    self.value(v) - self.value(u)
                } else {
                    self.value(u) * (self.s * ((b - a) / a).ln_1p()).exp_m1()
                }
            }
            Some(e) => {
                let base = u * u + e * e;
                let rel = (v - u) * (v + u) / base;
                base.powf(0.5 * self.s) * (0.5 * self.s * rel.ln_1p()).exp_m1()
            }
        }
    }
}

pub(crate) fn powers(params: &Params) -> (Power, Power) {
    (
        Power {
            s: params.p,
            eps: params.regularization,
        },
        Power {
            s: params.q,
            eps: params.regularization,
        },
    )
}

fn check_admissible(params: &Params) -> Result<()> {
    if !params.solver_admissible() {
        return Err(Error::NonsmoothExponent(format!(
            "p = {}, q = {}: both must exceed 1 unless regularization is enabled",
            params.p, params.q
        )));
    }
    Ok(())
}

fn check_inputs(u: &Field, params: &Params, kernel: &KernelTable) -> Result<()> {
    u.check_same_grid(kernel.grid())?;
    params.check_grid(u.grid())?;
    if params.alpha != kernel.alpha() {
        return Err(Error::ShapeMismatch(format!(
            "params alpha = {} but the kernel was built for alpha = {}",
            params.alpha,
            kernel.alpha()
        )));
    }
    Ok(())
}

/// Centered difference along `axis`, zero outside the box.
fn axis_difference(grid: &Grid, u: &[f64], axis: usize, out: &mut [f64]) {
    let n = grid.n();
    let stride = grid.stride(axis);
    let inv = 0.5 / grid.h();
    for (i, o) in out.iter_mut().enumerate() {
        let c = (i / stride) % n;
        let fwd = if c + 1 < n { u[i + stride] } else { 0.0 };
        let bwd = if c > 0 { u[i - stride] } else { 0.0 };
        *o = (fwd - bwd) * inv;
    }
}

/// `Σ u²` over the two faces normal to `axis`: the differences taken at the
/// ghost cells just outside the box, where only one neighbour is nonzero.
fn boundary_sumsq(grid: &Grid, u: &[f64], axis: usize) -> f64 {
    let n = grid.n();
    let stride = grid.stride(axis);
    u.iter()
        .enumerate()
        .filter(|(i, _)| {
            let c = (i / stride) % n;
            c == 0 || c + 1 == n
        })
        .map(|(_, v)| v * v)
        .sum()
}

/// `(kinetic, mass)` = `(Σ|∇_h u|² h^N, Σ u² h^N)`.
pub fn h1_normsq(u: &Field) -> (f64, f64) {
    let grid = u.grid();
    let w = grid.cell_volume();
    let mut d = vec![0.0; grid.len()];
    let mut kinetic = 0.0;
    let ghost = 0.25 / (grid.h() * grid.h());
    for axis in 0..grid.dim() {
        axis_difference(grid, u.data(), axis, &mut d);
        kinetic += dot(&d, &d);
        kinetic += ghost * boundary_sumsq(grid, u.data(), axis);
    }
    (w * kinetic, w * dot(u.data(), u.data()))
}

/// `−Δ_h u = GᵀG u`.
pub fn neg_laplacian(u: &Field) -> Field {
    let grid = *u.grid();
    let n = grid.n();
    let inv = 0.5 / grid.h();
    let mut d = vec![0.0; grid.len()];
    let mut out = Field::zeros(grid);
    for axis in 0..grid.dim() {
        axis_difference(&grid, u.data(), axis, &mut d);
        let stride = grid.stride(axis);
        for (j, o) in out.data_mut().iter_mut().enumerate() {
            let c = (j / stride) % n;
            let prev = if c > 0 { d[j - stride] } else { 0.0 };
            let next = if c + 1 < n { d[j + stride] } else { 0.0 };
            *o += (prev - next) * inv;
            if c == 0 || c + 1 == n {
                *o += inv * inv * u.data()[j];
            }
        }
    }
    out
}

/// `(−Δ_h + 1) u`.
pub fn helmholtz(u: &Field) -> Field {
    let mut out = neg_laplacian(u);
    for (o, v) in out.data_mut().iter_mut().zip(u.data()) {
        *o += v;
    }
    out
}

/// `h^N Σ (I_α * |u|^a)(x_i) |u(x_i)|^b`.
pub fn nonlocal_interaction(u: &Field, a: f64, b: f64, kernel: &KernelTable) -> Result<f64> {
    u.check_same_grid(kernel.grid())?;
    let pa = Power { s: a, eps: None };
    let pb = Power { s: b, eps: None };
    let fa: Vec<f64> = u.data().iter().map(|&v| pa.value(v)).collect();
    let fb: Vec<f64> = u.data().iter().map(|&v| pb.value(v)).collect();
    let (conv, _) = convolve_pair(&fa, None, kernel);
    Ok(u.grid().cell_volume() * dot(&conv, &fb))
}

/// Powers of `u` and their Riesz potentials, computed with one transform.
pub(crate) struct NonlocalTerms {
    pub pow_q: Vec<f64>,
    pub conv_p: Vec<f64>,
    pub conv_q: Vec<f64>,
}

impl NonlocalTerms {
    pub fn new(u: &Field, params: &Params, kernel: &KernelTable) -> Self {
        let (pp, pq) = powers(params);
        let pow_p: Vec<f64> = u.data().iter().map(|&v| pp.value(v)).collect();
        if pp == pq {
            let (conv, _) = convolve_pair(&pow_p, None, kernel);
            return Self {
                pow_q: pow_p,
                conv_q: conv.clone(),
                conv_p: conv,
            };
        }
        let pow_q: Vec<f64> = u.data().iter().map(|&v| pq.value(v)).collect();
        let (conv_p, conv_q) = convolve_pair(&pow_p, Some(&pow_q), kernel);
        Self {
            pow_q,
            conv_p,
            conv_q,
        }
    }

    /// `D(u)`.
    pub fn d_value(&self, grid: &Grid) -> f64 {
        grid.cell_volume() * dot(&self.conv_p, &self.pow_q)
    }

    /// `q (I*|u|^p) |u|^{q−2}u + p (I*|u|^q) |u|^{p−2}u`.
    pub fn rhs(&self, u: &Field, params: &Params) -> Field {
        let (pp, pq) = powers(params);
        let data = u
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| self.conv_p[i] * pq.deriv(v) + self.conv_q[i] * pp.deriv(v))
            .collect();
        Field::from_vec(*u.grid(), data).expect("finite rhs")
    }
}

/// `D(u) = h^N Σ (I_α * |u|^p)|u|^q`.
pub fn d_functional(u: &Field, params: &Params, kernel: &KernelTable) -> Result<f64> {
    check_inputs(u, params, kernel)?;
    let (pp, pq) = powers(params);
    let fp: Vec<f64> = u.data().iter().map(|&v| pp.value(v)).collect();
    let fq: Vec<f64> = u.data().iter().map(|&v| pq.value(v)).collect();
    let (conv, _) = convolve_pair(&fp, None, kernel);
    Ok(u.grid().cell_volume() * dot(&conv, &fq))
}

/// Gradient of [`d_functional`] in the `h^N`-weighted inner product.
pub fn nonlinear_rhs(u: &Field, params: &Params, kernel: &KernelTable) -> Result<Field> {
    check_inputs(u, params, kernel)?;
    check_admissible(params)?;
    Ok(NonlocalTerms::new(u, params, kernel).rhs(u, params))
}

/// Energy components and `E'(u) = (−Δ_h + 1)u − rhs(u)`.
pub fn energy_and_grad(
    u: &Field,
    params: &Params,
    kernel: &KernelTable,
) -> Result<(EnergyBreakdown, Field)> {
    check_inputs(u, params, kernel)?;
    check_admissible(params)?;
    let terms = NonlocalTerms::new(u, params, kernel);
    let (kinetic, mass) = h1_normsq(u);
    let breakdown = EnergyBreakdown::new(kinetic, mass, terms.d_value(u.grid()));
    let rhs = terms.rhs(u, params);
    let grad = helmholtz(u).axpby(1.0, &rhs, -1.0);
    Ok((breakdown, grad))
}

/// Breakdown without the gradient; any `p, q > 0` is accepted.
pub fn energy_breakdown(
    u: &Field,
    params: &Params,
    kernel: &KernelTable,
) -> Result<EnergyBreakdown> {
    let (kinetic, mass) = h1_normsq(u);
    Ok(EnergyBreakdown::new(
        kinetic,
        mass,
        d_functional(u, params, kernel)?,
    ))
}
