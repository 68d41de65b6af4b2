//! Constrained minimization
//! `M = inf { ‖u‖²_{H¹} : D(u) = 1 }`
//! by projected gradient descent with a scaling retraction.
//!
//! Each step moves along the component of the objective gradient `2(−Δ_h+1)u`
//! tangent to the level set of `D`, takes absolute values, and rescales back
//! onto `D = 1`. Step acceptance compares objectives through
//! cancellation-free increments, so descent stays verifiable when the
//! relative decrease per step is far below machine epsilon.

use serde::{Deserialize, Serialize};

use crate::convolve::convolve_pair;
use crate::diagnostics::{classify_exponents, PhaseLabel};
use crate::error::{Error, Result};
use crate::field::{dot, Field};
use crate::functionals::{
    d_functional, h1_normsq, helmholtz, nonlinear_rhs, powers, NonlocalTerms,
};
use crate::grid::Params;
use crate::kernel::KernelTable;

/// Smallest trial step before the line search gives up.
pub const MIN_STEP: f64 = 1e-14;
/// Accepted iterates between full recomputations of the cached potentials.
const REFRESH_EVERY: usize = 50;
/// Relative tolerance under which two values of `|u|` count as a tie in
/// [`recenter`].
pub const RECENTER_TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Stop once the tangential gradient norm is below `tol·‖u‖_{H¹}`.
    pub tol: f64,
    pub max_iters: usize,
    /// First trial step, and the fallback when a Barzilai–Borwein step is unusable.
    pub step0: f64,
    pub bb_steps: bool,
    /// Seed for randomized initializers.
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50_000,
            step0: 1e-2,
            bb_steps: true,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol = {} must be positive",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step0 = {} must be positive",
                self.step0
            )));
        }
        Ok(())
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// `‖u_k‖²_{H¹}` after the step, accumulated from exact increments.
    pub objective: f64,
    pub step: f64,
    /// `|D(u_k) − 1|` after the retraction.
    pub constraint_drift: f64,
    /// Kinetic energy removed by the absolute-value step (never negative).
    pub abs_kinetic_drop: f64,
    /// Tangential gradient norm relative to `‖u‖_{H¹}` before the step.
    pub gradient: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Constrained minimizer, `D(w) = 1`.
    pub w: Field,
    /// `‖w‖²_{H¹}`, the estimate of the infimum.
    pub mp: f64,
    /// `c·w` solving the equation.
    pub u: Field,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
    /// Final tangential gradient norm relative to `‖w‖_{H¹}`.
    pub gradient: f64,
}

/// Rescales `u` onto `D = 1`. Exact powers use the homogeneity of `D`;
/// regularized powers fall back to a secant iteration on `ln D(s·u)`.
pub fn project_to_constraint(u: &Field, params: &Params, kernel: &KernelTable) -> Result<Field> {
    let d = d_functional(u, params, kernel)?;
    if !(d > 0.0) {
        return Err(Error::DegenerateField(
            "D(u) = 0, cannot rescale onto the constraint",
        ));
    }
    let s0 = d.powf(-1.0 / params.degree());
    if params.regularization.is_none() {
        return Ok(u.scaled(s0));
    }
    // secant on f(t) = ln D(e^t u), nearly linear with slope p+q
    let f = |t: f64| d_functional(&u.scaled(t.exp()), params, kernel).map(f64::ln);
    let (mut t0, mut f0) = (0.0, d.ln());
    let mut t1 = s0.ln();
    let mut f1 = f(t1)?;
    for _ in 0..60 {
        if f1.abs() <= 1e-14 {
            break;
        }
        let slope = if f1 != f0 {
            (f1 - f0) / (t1 - t0)
        } else {
            params.degree()
        };
        let t2 = t1 - f1 / slope;
        t0 = t1;
        f0 = f1;
        t1 = t2;
        f1 = f(t1)?;
    }
    Ok(u.scaled(t1.exp()))
}

/// `c = (mp/(p+q))^{1/(p+q−2)}`, the multiple of a constrained minimizer that
/// solves the equation (Euler–Lagrange multiplier absorbed by homogeneity).
pub fn rescale_factor(mp: f64, params: &Params) -> f64 {
    let s = params.degree();
    (mp / s).powf(1.0 / (s - 2.0))
}

pub fn rescale_to_solution(
    w: &Field,
    mp: f64,
    params: &Params,
    kernel: &KernelTable,
) -> Result<Field> {
    let d = d_functional(w, params, kernel)?;
    if (d - 1.0).abs() > 1e-8 {
        return Err(Error::NotOnManifold(d));
    }
    Ok(w.scaled(rescale_factor(mp, params)))
}

/// `‖(−Δ_h+1)u − rhs(u)‖₂ / ‖u‖_{H¹}`.
pub fn equation_residual(u: &Field, params: &Params, kernel: &KernelTable) -> Result<f64> {
    let rhs = nonlinear_rhs(u, params, kernel)?;
    let res = helmholtz(u).axpby(1.0, &rhs, -1.0);
    let (k, m) = h1_normsq(u);
    Ok(res.norm_l2() / (k + m).sqrt())
}

/// Whole-cell translation moving the largest `|u|` to the cell nearest the
/// origin. Ties go to the lexicographically smallest index.
pub fn recenter(u: &Field) -> Result<(Field, Vec<isize>)> {
    let max = u.max_abs();
    if max == 0.0 {
        return Err(Error::DegenerateField("cannot recenter the zero field"));
    }
    let threshold = max * (1.0 - RECENTER_TIE_RTOL);
    // row-major order is lexicographic, so the first hit wins ties
    let peak = u
        .data()
        .iter()
        .position(|v| v.abs() >= threshold)
        .expect("maximum is attained");
    let grid = u.grid();
    let mut idx = vec![0; grid.dim()];
    grid.unravel(peak, &mut idx);
    let c = grid.center_index() as isize;
    let shift: Vec<isize> = idx.iter().map(|&i| c - i as isize).collect();
    Ok((u.translated(&shift), shift))
}

/// Iterate on the constraint together with cached quantities.
struct State {
    u: Field,
    au: Field,
    objective: f64,
    d: f64,
    terms: NonlocalTerms,
}

impl State {
    fn fresh(u: Field, params: &Params, kernel: &KernelTable) -> Self {
        let au = helmholtz(&u);
        let objective = au.dot(&u);
        let terms = NonlocalTerms::new(&u, params, kernel);
        let d = terms.d_value(u.grid());
        Self {
            u,
            au,
            objective,
            d,
            terms,
        }
    }
}

/// Outcome of one trial step.
struct Trial {
    v: Field,
    av: Field,
    log_ratio: f64,
    d_v: f64,
    pow_q: Vec<f64>,
    conv_p: Vec<f64>,
    conv_q: Vec<f64>,
    abs_kinetic_drop: f64,
}

fn try_step(state: &State, dir: &Field, tau: f64, params: &Params, kernel: &KernelTable) -> Trial {
    let grid = *state.u.grid();
    let w = grid.cell_volume();
    let raw = state.u.axpby(1.0, dir, -tau);
    let v = raw.map(f64::abs);
    let delta = v.axpby(1.0, &state.u, -1.0);
    let a_delta = helmholtz(&delta);
    let av = state.au.axpby(1.0, &a_delta, 1.0);
    let d_objective = 2.0 * state.au.dot(&delta) + a_delta.dot(&delta);

    let (pp, pq) = powers(params);
    let ud = state.u.data();
    let vd = v.data();
    let dp: Vec<f64> = ud.iter().zip(vd).map(|(&a, &b)| pp.diff(a, b)).collect();
    let pow_p: Vec<f64> = vd.iter().map(|&b| pp.value(b)).collect();
    let symmetric = pp == pq;
    let (dq, pow_q) = if symmetric {
        (dp.clone(), pow_p.clone())
    } else {
        (
            ud.iter()
                .zip(vd)
                .map(|(&a, &b)| pq.diff(a, b))
                .collect::<Vec<_>>(),
            vd.iter().map(|&b| pq.value(b)).collect::<Vec<_>>(),
        )
    };
    let (conv_dp, conv_qv) = convolve_pair(&dp, (!symmetric).then_some(pow_q.as_slice()), kernel);
    let conv_p: Vec<f64> = state
        .terms
        .conv_p
        .iter()
        .zip(&conv_dp)
        .map(|(a, b)| a + b)
        .collect();
    let conv_q = if symmetric { conv_p.clone() } else { conv_qv };
    let d_nonlocal = w * (dot(&conv_dp, &pow_q) + dot(&state.terms.conv_p, &dq));
    let d_v = w * dot(&conv_p, &pow_q);

    let log_ratio = if params.regularization.is_none() {
        (d_objective / state.objective).ln_1p()
            - 2.0 / params.degree() * (d_nonlocal / state.d).ln_1p()
    } else {
        // regularized powers have no closed-form retraction; compare directly
        match project_to_constraint(&v, params, kernel) {
            Ok(proj) => {
                let (k, m) = h1_normsq(&proj);
                ((k + m) / state.objective).ln()
            }
            Err(_) => f64::INFINITY,
        }
    };
    let abs_kinetic_drop = h1_normsq(&raw).0 - h1_normsq(&v).0;
    Trial {
        v,
        av,
        log_ratio,
        d_v,
        pow_q,
        conv_p,
        conv_q,
        abs_kinetic_drop,
    }
}

/// Whole-cell translation of the iterate back to the box center, kept only
/// when it strictly lowers the objective.
fn recentered(state: &State, params: &Params, kernel: &KernelTable) -> Result<Option<State>> {
    let (moved, shift) = recenter(&state.u)?;
    if shift.iter().all(|&k| k == 0) {
        return Ok(None);
    }
    let candidate = State::fresh(
        project_to_constraint(&moved, params, kernel)?,
        params,
        kernel,
    );
    Ok((candidate.objective < state.objective).then_some(candidate))
}

/// Moves an accepted trial point onto `D = 1`.
fn accept(trial: Trial, params: &Params, kernel: &KernelTable) -> Result<State> {
    if params.regularization.is_some() {
        let u = project_to_constraint(&trial.v, params, kernel)?;
        return Ok(State::fresh(u, params, kernel));
    }
    if !(trial.d_v > 0.0) {
        return Err(Error::DegenerateField("trial step annihilated the field"));
    }
    let s = trial.d_v.powf(-1.0 / params.degree());
    let (sp, sq) = (s.powf(params.p), s.powf(params.q));
    let u = trial.v.scaled(s);
    let au = trial.av.scaled(s);
    let objective = au.dot(&u);
    let scale = |v: Vec<f64>, f: f64| -> Vec<f64> { v.into_iter().map(|x| x * f).collect() };
    let terms = NonlocalTerms {
        pow_q: scale(trial.pow_q, sq),
        conv_p: scale(trial.conv_p, sp),
        conv_q: scale(trial.conv_q, sq),
    };
    let d = terms.d_value(u.grid());
    Ok(State {
        u,
        au,
        objective,
        d,
        terms,
    })
}

/// Minimizes `‖u‖²_{H¹}` subject to `D(u) = 1` starting from `init`.
///
/// The initializer is recentered before the first step, and every
/// 50 iterations the iterate is translated back to the center
/// when that lowers the objective.
pub fn minimize_mp(
    init: &Field,
    params: &Params,
    kernel: &KernelTable,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    let class = classify_exponents(params);
    if class.label != PhaseLabel::Exists {
        return Err(Error::RefusedRegime {
            label: class.label,
            sum: class.sum,
            lower: class.lower,
            upper: class.upper,
        });
    }
    if !params.solver_admissible() {
        return Err(Error::NonsmoothExponent(format!(
            "p = {}, q = {}: the solver needs both above 1 or regularization",
            params.p, params.q
        )));
    }
    if init.is_zero() {
        return Err(Error::DegenerateField("initializer is identically zero"));
    }
    init.check_same_grid(kernel.grid())?;
    params.check_grid(init.grid())?;

    // recentering is exact for the objective up to the dropped tail values
    let (centered, _) = recenter(&init.map(f64::abs))?;
    let start = project_to_constraint(&centered, params, kernel)?;
    let mut state = State::fresh(start, params, kernel);
    let mut tracked = state.objective;
    let mut trace = Vec::new();
    let mut tau = cfg.step0;
    let mut prev: Option<(Field, Field)> = None;
    let mut converged = false;
    let mut gradient = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let normal = state.terms.rhs(&state.u, params);
        let grad = state.au.scaled(2.0);
        let tangent = grad.axpby(1.0, &normal, -grad.dot(&normal) / normal.dot(&normal));
        gradient = tangent.norm_l2() / state.objective.sqrt();
        if gradient <= cfg.tol {
            converged = true;
            break;
        }

        if let (true, Some((u_prev, t_prev))) = (cfg.bb_steps, prev.as_ref()) {
            let s = state.u.axpby(1.0, u_prev, -1.0);
            let y = tangent.axpby(1.0, t_prev, -1.0);
            let sy = s.dot(&y);
            let bb = if iterations % 2 == 0 {
                s.dot(&s) / sy
            } else {
                sy / y.dot(&y)
            };
            tau = if sy > 0.0 && bb.is_finite() {
                bb.clamp(1e-10, 1e10)
            } else {
                cfg.step0
            };
        }

        let trial = loop {
            let trial = try_step(&state, &tangent, tau, params, kernel);
            if trial.log_ratio < 0.0 {
                break trial;
            }
            tau *= 0.5;
            if tau < MIN_STEP {
                return Err(Error::Stalled {
                    iterations,
                    step: tau,
                });
            }
        };
        let log_ratio = trial.log_ratio;
        let abs_kinetic_drop = trial.abs_kinetic_drop;
        let next = accept(trial, params, kernel)?;
        iterations += 1;
        // exp(x) ≤ 1 for x < 0 and rounding is monotone, so this never increases
        tracked *= log_ratio.exp();
        let mut translated = false;
        let next = if iterations % REFRESH_EVERY == 0 {
            let fresh = State::fresh(next.u, params, kernel);
            match recentered(&fresh, params, kernel)? {
                Some(moved) => {
                    tracked *= moved.objective / fresh.objective;
                    translated = true;
                    moved
                }
                None => fresh,
            }
        } else {
            next
        };
        trace.push(TraceEntry {
            objective: tracked,
            step: tau,
            constraint_drift: (next.d - 1.0).abs(),
            abs_kinetic_drop,
            gradient,
        });
        if !cfg.bb_steps {
            tau *= 2.0;
        }
        let last = std::mem::replace(&mut state, next).u;
        // the step history is meaningless across a translation
        prev = (!translated).then_some((last, tangent));
    }

    let w = state.u;
    let (k, m) = h1_normsq(&w);
    let mp = k + m;
    let u = rescale_to_solution(&w, mp, params, kernel)?;
    Ok(SolveResult {
        w,
        mp,
        u,
        trace,
        converged,
        iterations,
        gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn setup() -> (Grid, Params, KernelTable) {
        let g = Grid::new(3, 8, 8.0).unwrap();
        let params = Params::new(3, 2.0, 2.0, 2.0).unwrap();
        let k = KernelTable::new(&g, 2.0).unwrap();
        (g, params, k)
    }

    #[test]
    fn projection_hits_the_constraint() {
        let (g, params, k) = setup();
        let u = Field::gaussian(g, &[0.3, 0.0, -0.2]).scaled(7.0);
        let w = project_to_constraint(&u, &params, &k).unwrap();
        let d = d_functional(&w, &params, &k).unwrap();
        assert!((d - 1.0).abs() <= 1e-12);
        assert!(matches!(
            project_to_constraint(&Field::zeros(g), &params, &k),
            Err(Error::DegenerateField(_))
        ));
    }

    #[test]
    fn projection_scale_examples() {
        let (g, params, k) = setup();
        let u = Field::gaussian(g, &[0.0; 3]);
        let d = d_functional(&u, &params, &k).unwrap();
        // D(2u) = 16 D(u), D(3u) = 81 D(u)
        let u16 = u.scaled(2.0 / d.powf(0.25));
        let w = project_to_constraint(&u16, &params, &k).unwrap();
        for (a, b) in w.data().iter().zip(u16.data()) {
            assert!((a - 0.5 * b).abs() <= 1e-14 * b.abs());
        }
        let u81 = u.scaled(3.0 / d.powf(0.25));
        let w = project_to_constraint(&u81, &params, &k).unwrap();
        for (a, b) in w.data().iter().zip(u81.data()) {
            assert!((a - b / 3.0).abs() <= 1e-14 * b.abs());
        }
        let on = project_to_constraint(&u, &params, &k).unwrap();
        let again = project_to_constraint(&on, &params, &k).unwrap();
        for (a, b) in again.data().iter().zip(on.data()) {
            assert!((a - b).abs() <= 1e-14 * b.abs());
        }
    }

    #[test]
    fn regularized_projection() {
        let (g, _, k) = setup();
        let params = Params::new(3, 2.0, 1.5, 2.0)
            .unwrap()
            .with_regularization(0.05)
            .unwrap();
        let u = Field::gaussian(g, &[0.0; 3]).scaled(3.0);
        let w = project_to_constraint(&u, &params, &k).unwrap();
        assert!((d_functional(&w, &params, &k).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rescale_factor_examples() {
        let params = Params::new(3, 2.0, 2.0, 2.0).unwrap();
        assert_eq!(rescale_factor(4.0, &params), 1.0);
        assert!((rescale_factor(8.0, &params) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rescale_refuses_off_manifold() {
        let (g, params, k) = setup();
        let u = Field::gaussian(g, &[0.0; 3]);
        assert!(matches!(
            rescale_to_solution(&u.scaled(5.0), 1.0, &params, &k),
            Err(Error::NotOnManifold(_))
        ));
    }

    #[test]
    fn refuses_outside_window() {
        let (g, _, k) = setup();
        let init = Field::gaussian(g, &[0.0; 3]);
        let params = Params::new(3, 2.0, 5.0, 5.0).unwrap();
        let err = minimize_mp(&init, &params, &k, &SolveConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::RefusedRegime {
                label: PhaseLabel::CriticalUpper,
                ..
            }
        ));
        let params = Params::new(3, 2.0, 1.0, 1.0).unwrap();
        let err = minimize_mp(&init, &params, &k, &SolveConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::RefusedRegime {
                label: PhaseLabel::NonexistSubcritical,
                ..
            }
        ));
        let params = Params::new(3, 2.0, 0.9, 3.0).unwrap();
        assert!(matches!(
            minimize_mp(&init, &params, &k, &SolveConfig::default()),
            Err(Error::NonsmoothExponent(_))
        ));
        let params = Params::new(3, 2.0, 2.0, 2.0).unwrap();
        assert!(matches!(
            minimize_mp(&Field::zeros(g), &params, &k, &SolveConfig::default()),
            Err(Error::DegenerateField(_))
        ));
    }

    #[test]
    fn small_solve_descends_and_keeps_constraint() {
        let (g, params, k) = setup();
        let init = Field::gaussian(g, &[0.0; 3]);
        let cfg = SolveConfig {
            tol: 1e-7,
            ..Default::default()
        };
        let res = minimize_mp(&init, &params, &k, &cfg).unwrap();
        assert!(res.converged, "gradient {}", res.gradient);
        assert!(res.mp > 0.0);
        for pair in res.trace.windows(2) {
            assert!(pair[1].objective <= pair[0].objective);
        }
        for t in &res.trace {
            assert!(t.constraint_drift <= 1e-10);
            assert!(t.abs_kinetic_drop >= 0.0);
        }
        assert!((d_functional(&res.w, &params, &k).unwrap() - 1.0).abs() <= 1e-10);
        assert!(res.w.data().iter().all(|&v| v >= 0.0));
        let (kk, mm) = h1_normsq(&res.u);
        let du = d_functional(&res.u, &params, &k).unwrap();
        assert!(((kk + mm) - 4.0 * du).abs() <= 1e-10 * (kk + mm));
    }

    #[test]
    fn recenter_spike_and_ties() {
        let g = Grid::new(3, 6, 6.0).unwrap();
        let c = g.center_index();
        let mut u = Field::zeros(g);
        u.data_mut()[g.ravel(&[4, 1, 5])] = -2.0;
        let (r, shift) = recenter(&u).unwrap();
        assert_eq!(shift, vec![c as isize - 4, c as isize - 1, c as isize - 5]);
        assert_eq!(r.data()[g.ravel(&[c, c, c])], -2.0);

        let mut u = Field::zeros(g);
        u.data_mut()[g.ravel(&[3, 3, 3])] = 1.0;
        u.data_mut()[g.ravel(&[1, 4, 4])] = 1.0;
        let (_, shift) = recenter(&u).unwrap();
        assert_eq!(shift, vec![c as isize - 1, c as isize - 4, c as isize - 4]);

        let v = Field::gaussian(g, &[1.2, -0.7, 0.4]);
        let (once, _) = recenter(&v).unwrap();
        let (twice, s2) = recenter(&once).unwrap();
        assert_eq!(once, twice);
        assert_eq!(s2, vec![0, 0, 0]);
        assert!(matches!(
            recenter(&Field::zeros(g)),
            Err(Error::DegenerateField(_))
        ));
    }
}
