//! Identity residuals, the existence/nonexistence classifier, and numerical
//! experiments on the splitting and vanishing behaviour of `D`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::{d_functional, h1_normsq};
use crate::grid::Params;
use crate::kernel::KernelTable;

/// Relative tolerance under which `p + q` counts as sitting on a window edge.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Regime of `p + q` relative to `(2(N+α)/N, 2(N+α)/(N−2))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    Exists,
    NonexistSubcritical,
    NonexistSupercritical,
    CriticalLower,
    CriticalUpper,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::Exists => "Exists",
            PhaseLabel::NonexistSubcritical => "NonexistSubcritical",
            PhaseLabel::NonexistSupercritical => "NonexistSupercritical",
            PhaseLabel::CriticalLower => "CriticalLower",
            PhaseLabel::CriticalUpper => "CriticalUpper",
        }
    }

    /// Whether only the trivial solution exists (both open sides and both edges).
    pub fn is_nonexistence(&self) -> bool {
        !matches!(self, PhaseLabel::Exists)
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifier output: the label, the window edges, and the coefficients
/// `a₁ = (N−2)/2 − (N+α)/(p+q)` and `a₂ = N/2 − (N+α)/(p+q)` of `∫|∇u|²`
/// and `∫|u|²` in the difference of the two identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: PhaseLabel,
    pub sum: f64,
    pub lower: f64,
    pub upper: f64,
    pub a1: f64,
    pub a2: f64,
}

pub fn existence_window(dim: usize, alpha: f64) -> (f64, f64) {
    let n = dim as f64;
    (2.0 * (n + alpha) / n, 2.0 * (n + alpha) / (n - 2.0))
}

pub fn classify_exponents(params: &Params) -> Classification {
    let n = params.dim as f64;
    let sum = params.degree();
    let (lower, upper) = existence_window(params.dim, params.alpha);
    let ratio = (n + params.alpha) / sum;
    let mut a1 = 0.5 * (n - 2.0) - ratio;
    let mut a2 = 0.5 * n - ratio;
    let label = if (sum - lower).abs() <= BOUNDARY_RTOL * lower {
        a2 = 0.0;
        PhaseLabel::CriticalLower
    } else if (sum - upper).abs() <= BOUNDARY_RTOL * upper {
        a1 = 0.0;
        PhaseLabel::CriticalUpper
    } else if sum < lower {
        PhaseLabel::NonexistSubcritical
    } else if sum > upper {
        PhaseLabel::NonexistSupercritical
    } else {
        PhaseLabel::Exists
    };
    Classification {
        label,
        sum,
        lower,
        upper,
        a1,
        a2,
    }
}

/// Pohožaev and Nehari quantities of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub dim: usize,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub kinetic: f64,
    pub mass: f64,
    pub nonlocal: f64,
    /// `(N−2)/2·K + N/2·M − (N+α)·D`
    pub pohozaev: f64,
    /// `K + M − (p+q)·D`
    pub nehari: f64,
    pub pohozaev_normalized: f64,
    pub nehari_normalized: f64,
}

impl IdentityReport {
    pub fn from_components(params: &Params, kinetic: f64, mass: f64, nonlocal: f64) -> Self {
        let n = params.dim as f64;
        let pohozaev = 0.5 * (n - 2.0) * kinetic + 0.5 * n * mass - (n + params.alpha) * nonlocal;
        let nehari = kinetic + mass - params.degree() * nonlocal;
        Self {
            dim: params.dim,
            alpha: params.alpha,
            p: params.p,
            q: params.q,
            kinetic,
            mass,
            nonlocal,
            pohozaev,
            nehari,
            pohozaev_normalized: normalize(pohozaev, kinetic, mass),
            nehari_normalized: normalize(nehari, kinetic, mass),
        }
    }
}

fn normalize(value: f64, kinetic: f64, mass: f64) -> f64 {
    let denom = kinetic + mass;
    if denom > 0.0 {
        value / denom
    } else {
        0.0
    }
}

pub fn pohozaev_residual(
    u: &Field,
    params: &Params,
    kernel: &KernelTable,
) -> Result<IdentityReport> {
    let (kinetic, mass) = h1_normsq(u);
    let nonlocal = d_functional(u, params, kernel)?;
    Ok(IdentityReport::from_components(
        params, kinetic, mass, nonlocal,
    ))
}

/// `(K + M − (p+q)D) / (K + M)`, zero for the zero field.
pub fn nehari_residual(u: &Field, params: &Params, kernel: &KernelTable) -> Result<f64> {
    let (kinetic, mass) = h1_normsq(u);
    let nonlocal = d_functional(u, params, kernel)?;
    Ok(normalize(
        kinetic + mass - params.degree() * nonlocal,
        kinetic,
        mass,
    ))
}

/// For each shift `z`, `|D(w + v(·−z)) − D(v(·−z)) − D(w)|`.
pub fn brezis_lieb_defect(
    w: &Field,
    v: &Field,
    shifts: &[Vec<isize>],
    params: &Params,
    kernel: &KernelTable,
) -> Result<Vec<f64>> {
    w.check_same_grid(v.grid())?;
    let dw = d_functional(w, params, kernel)?;
    shifts
        .iter()
        .map(|z| {
            if z.len() != w.grid().dim() {
                return Err(Error::InvalidArgument(format!(
                    "shift {z:?} does not have {} components",
                    w.grid().dim()
                )));
            }
            let vz = v.translated_exact(z)?;
            let dv = d_functional(&vz, params, kernel)?;
            let dsum = d_functional(&w.axpby(1.0, &vz, 1.0), params, kernel)?;
            Ok((dsum - dv - dw).abs())
        })
        .collect()
}

/// A compactly supported profile `g` for the vanishing experiment.
pub trait Profile {
    fn eval(&self, x: &[f64]) -> f64;
    /// `g` vanishes for `|x| ≥ support_radius()`.
    fn support_radius(&self) -> f64;
}

/// `(1 − |x − c|²/R²)_+^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub power: i32,
}

impl Bump {
    pub fn centered(dim: usize, radius: f64, power: i32) -> Self {
        Self {
            center: vec![0.0; dim],
            radius,
            power,
        }
    }
}

impl Profile for Bump {
    fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        let t = 1.0 - r2 / (self.radius * self.radius);
        if t > 0.0 {
            t.powi(self.power)
        } else {
            0.0
        }
    }

    fn support_radius(&self) -> f64 {
        let c = self.center.iter().map(|c| c * c).sum::<f64>().sqrt();
        self.radius + c
    }
}

/// Exponent of `λ` in `D(λ^{N/2} g(λ·))`: `N(p+q)/2 − (N+α)`.
pub fn vanishing_slope(params: &Params) -> f64 {
    let n = params.dim as f64;
    0.5 * n * params.degree() - (n + params.alpha)
}

/// Samples the mass-preserving dilations `v_λ(x) = λ^{N/2} g(λx)` and returns
/// `(λ, D(v_λ))` for each `λ`.
pub fn vanishing_decay_test(
    profile: &dyn Profile,
    lambdas: &[f64],
    params: &Params,
    kernel: &KernelTable,
) -> Result<Vec<(f64, f64)>> {
    let grid = *kernel.grid();
    let half = 0.5 * grid.length();
    let n = grid.dim() as f64;
    lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda > 0.0 && lambda <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "lambda = {lambda} must lie in (0, 1]"
                )));
            }
            let reach = profile.support_radius() / lambda;
            if reach > half {
                return Err(Error::GridTooSmall(format!(
                    "dilated support radius {reach} exceeds the half box {half}"
                )));
            }
            let amp = lambda.powf(0.5 * n);
            let v = Field::from_fn(grid, |x| {
                let y: Vec<f64> = x.iter().map(|xk| lambda * xk).collect();
                amp * profile.eval(&y)
            });
            Ok((lambda, d_functional(&v, params, kernel)?))
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
