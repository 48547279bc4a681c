//! Material-point engine: the recurrent constitutive update.
//!
//! Each step freezes the growth-flow direction at the converged state of the
//! previous step (explicit integrator), solves a scalar Newton problem for
//! the growth multiplier from the homeostatic residual
//!
//! ```text
//! r(gamma) = phi(sigma_bar(gamma)) - 1 - gamma * weta = 0,
//! ```
//!
//! and updates the growth tensor through the exponential map
//! `cg_next = ug * exp(2 dt gamma flow) * ug`, which preserves symmetry and
//! positive definiteness by construction and, for a trace-free flow, the
//! determinant (det exp = exp tr).
//!
//! Loading is prescribed as a diagonal right Cauchy--Green history; the
//! zero-stress directions of a protocol are enforced by nulling the reported
//! stress component (the exact Lagrange-multiplier equivalent under coaxial
//! loading), while the driving force fed to the potential stays untouched.

use crate::energy::{self, EnergyWeights};
use crate::error::{Error, Result};
use crate::potential::{dphihat_dsigma, phi_hat, PotentialWeights};
use crate::scalar::{Dual, Real};
use crate::tensor::SymTensor3;

/// Newton tolerance on the dimensionless residual.
pub const DEFAULT_EPS: f64 = 1e-8;
/// Newton iteration budget per step.
pub const MAX_NEWTON_ITERS: usize = 30;

/// Growth state: the growth right Cauchy--Green tensor and its cached
/// positive square root. `cg` is the source of truth; `ug` is derived once
/// per update so the two cannot drift.
#[derive(Clone, Copy, Debug)]
pub struct GrowthState<T: Real = f64> {
    pub cg: SymTensor3<T>,
    pub ug: SymTensor3<T>,
}

impl<T: Real> GrowthState<T> {
    /// Virgin state: no growth, cg = ug = I.
    pub fn virgin() -> Self {
        GrowthState {
            cg: SymTensor3::identity(),
            ug: SymTensor3::identity(),
        }
    }

    pub fn from_cg(cg: SymTensor3<T>) -> Result<Self> {
        let ug = cg.sqrt_spd()?;
        Ok(GrowthState { cg, ug })
    }

    pub fn primal(&self) -> GrowthState<f64> {
        GrowthState {
            cg: self.cg.primal(),
            ug: self.ug.primal(),
        }
    }
}

/// Per-direction stress constraint of a loading protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionConstraint {
    /// Stress in this direction is a measured/reported quantity.
    Measured,
    /// Stress-free direction: the reported stress component is nulled.
    ZeroStress,
}

pub type ConstraintMask = [DirectionConstraint; 3];

/// Prescribed diagonal deformation history on a strictly increasing time
/// grid (hours), with a per-direction stress constraint.
#[derive(Clone, Debug)]
pub struct LoadingProtocol {
    pub times: Vec<f64>,
    pub c_rows: Vec<[f64; 3]>,
    pub mask: ConstraintMask,
}

impl LoadingProtocol {
    pub fn new(times: Vec<f64>, c_rows: Vec<[f64; 3]>, mask: ConstraintMask) -> Result<Self> {
        let p = LoadingProtocol {
            times,
            c_rows,
            mask,
        };
        p.validate()?;
        Ok(p)
    }

    /// Piecewise-constant protocol: `segments` lists (end_time, C-diagonal);
    /// each row at `t` takes the value of the segment containing it, with
    /// jumps happening between adjacent samples. The grid is uniform with
    /// spacing `dt`, and every segment end must fall on it.
    pub fn stepped(segments: &[(f64, [f64; 3])], dt: f64, mask: ConstraintMask) -> Result<Self> {
        if segments.is_empty() || dt <= 0.0 {
            return Err(Error::InvalidInput(
                "protocol needs at least one segment and dt > 0".to_string(),
            ));
        }
        let t_end = segments.last().unwrap().0;
        let n = (t_end / dt).round() as usize;
        if ((n as f64) * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "segment end {t_end} is not a multiple of dt = {dt}"
            )));
        }
        let mut times = Vec::with_capacity(n + 1);
        let mut c_rows = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let t = i as f64 * dt;
            let seg = segments
                .iter()
                .find(|(end, _)| t <= *end + 1e-9 * end.max(1.0))
                .ok_or_else(|| Error::InvalidInput("non-monotone segment ends".to_string()))?;
            times.push(t);
            c_rows.push(seg.1);
        }
        Self::new(times, c_rows, mask)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.c_rows.len() {
            return Err(Error::InvalidInput(format!(
                "protocol needs matching non-empty grids (times {}, rows {})",
                self.times.len(),
                self.c_rows.len()
            )));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidInput(format!(
                    "times must increase strictly ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for (i, row) in self.c_rows.iter().enumerate() {
            if row.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "prescribed C components must be positive and finite (row {i})"
                )));
            }
        }
        if !self
            .mask
            .iter()
            .any(|m| *m == DirectionConstraint::Measured)
        {
            return Err(Error::InvalidInput(
                "at least one direction must be measured".to_string(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Converged data of one accepted step.
#[derive(Clone, Copy, Debug)]
pub struct StepResult {
    /// Second PK stress with zero-stress directions nulled.
    pub s_reported: SymTensor3<f64>,
    /// Driving force at the converged state.
    pub sigma_bar: SymTensor3<f64>,
    /// Scaled growth multiplier.
    pub gamma_hat: f64,
    /// Potential value at the converged state.
    pub phi_hat_value: f64,
    /// Final residual of the Newton solve.
    pub residual: f64,
    pub newton_iters: usize,
}

/// Simulated trajectory: one entry per protocol row, plus the growth state
/// after each row (the first row is an evaluation of the virgin state).
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub steps: Vec<StepResult>,
    pub states: Vec<GrowthState<f64>>,
}

/// Growth update for a frozen flow direction and given multiplier.
pub(crate) fn grow<T: Real>(
    state: &GrowthState<T>,
    flow: &SymTensor3<T>,
    dt: T,
    gamma: T,
) -> Result<SymTensor3<T>> {
    let arg = flow.scale(T::from_f64(2.0) * dt * gamma);
    Ok(state.ug.congruence(&arg.exp_sym()?))
}

/// State-dependent quantities after growing with a given multiplier.
pub(crate) struct StepEval<T: Real> {
    pub state: GrowthState<T>,
    pub sigma_bar: SymTensor3<T>,
    pub phi: T,
}

pub(crate) fn eval_after_growth<T: Real>(
    c_next: &SymTensor3<T>,
    state_n: &GrowthState<T>,
    flow_n: &SymTensor3<T>,
    dt: T,
    gamma: T,
    ew: &EnergyWeights<T>,
    pw: &PotentialWeights<T>,
) -> Result<StepEval<T>> {
    let cg = grow(state_n, flow_n, dt, gamma)?;
    let state = GrowthState::from_cg(cg)?;
    let ce = state.ug.inv_spd()?.congruence(c_next);
    let sigma_bar = energy::driving_force(&ce, ew)?;
    let phi = phi_hat(&sigma_bar, pw)?;
    Ok(StepEval {
        state,
        sigma_bar,
        phi,
    })
}

/// Homeostatic residual r(gamma) = phi(sigma_bar(gamma)) - 1 - gamma*weta,
/// with the flow direction frozen at the previous step's state.
pub fn residual<T: Real>(
    gamma_hat: T,
    c_next: &SymTensor3<T>,
    state_n: &GrowthState<T>,
    flow_n: &SymTensor3<T>,
    dt: T,
    ew: &EnergyWeights<T>,
    pw: &PotentialWeights<T>,
) -> Result<T> {
    let ev = eval_after_growth(c_next, state_n, flow_n, dt, gamma_hat, ew, pw)?;
    Ok(ev.phi - T::one() - gamma_hat * pw.weta)
}

/// Scalar Newton solve for the growth multiplier, initial guess 0, with a
/// bracketing-bisection safeguard for overshoots and exp-overflow. The
/// Jacobian is a central finite difference (step 1e-7 * max(1, |gamma|)).
///
/// Returns (gamma, iterations used, final residual).
pub fn newton_solve(
    c_next: &SymTensor3<f64>,
    state_n: &GrowthState<f64>,
    flow_n: &SymTensor3<f64>,
    dt: f64,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
    eps: f64,
) -> Result<(f64, usize, f64)> {
    let f = |g: f64| residual(g, c_next, state_n, flow_n, dt, ew, pw);
    let mut g = 0.0;
    // gamma = 0 leaves the state untouched; this evaluation cannot overflow.
    let mut r = f(0.0)?;
    // Bracket endpoints as they get discovered.
    let mut neg = if r < 0.0 { Some(g) } else { None };
    let mut pos = if r > 0.0 { Some(g) } else { None };

    let mut iters = 0usize;
    // Size of the previous accepted step; a Newton step must at least halve
    // it, or the iteration falls back to bisection of the bracket.
    let mut dx_old = f64::INFINITY;
    loop {
        if r.abs() < eps {
            return Ok((g, iters, r));
        }
        if iters == MAX_NEWTON_ITERS {
            return Err(Error::Convergence {
                iters,
                last_residual: r,
            });
        }
        iters += 1;

        let h = 1e-7 * g.abs().max(1.0);
        let jac = match (f(g + h), f(g - h)) {
            (Ok(rp), Ok(rm)) => (rp - rm) / (2.0 * h),
            // Overflow probing the Jacobian: only recoverable via bracket.
            _ => 0.0,
        };
        let bracket = match (neg, pos) {
            (Some(a), Some(b)) => Some((a.min(b), a.max(b))),
            _ => None,
        };

        let (gn, rn) = match bracket {
            None => {
                // No sign change seen yet: pure Newton, backtracking toward
                // the current iterate while the trial overflows.
                if jac == 0.0 {
                    return Err(Error::SingularJacobian { gamma_hat: g });
                }
                let mut p = g - r / jac;
                let mut accepted = None;
                for _ in 0..60 {
                    match f(p) {
                        Ok(rp) => {
                            accepted = Some((p, rp));
                            break;
                        }
                        Err(Error::Range(_)) | Err(Error::Domain(_)) => p = 0.5 * (p + g),
                        Err(e) => return Err(e),
                    }
                }
                let Some(cand) = accepted else {
                    return Err(Error::Convergence {
                        iters,
                        last_residual: r,
                    });
                };
                dx_old = (cand.0 - g).abs();
                cand
            }
            Some((lo, hi)) => {
                // Bracketed Newton-bisection: take the Newton point only if
                // it stays inside the bracket and its step at least halves
                // the previous one; otherwise bisect. The interleaving is
                // globally convergent even along the exponential residual
                // walls where raw Newton creeps by a constant factor.
                let newton_ok = jac != 0.0 && {
                    let p = g - r / jac;
                    p > lo && p < hi && (2.0 * r).abs() <= (dx_old * jac).abs()
                };
                if newton_ok {
                    let p = g - r / jac;
                    match f(p) {
                        Ok(rp) => {
                            dx_old = (r / jac).abs();
                            (p, rp)
                        }
                        Err(Error::Range(_)) | Err(Error::Domain(_)) => {
                            dx_old = 0.5 * (hi - lo);
                            let m = 0.5 * (lo + hi);
                            (m, f(m)?)
                        }
                        Err(e) => return Err(e),
                    }
                } else {
                    dx_old = 0.5 * (hi - lo);
                    let m = 0.5 * (lo + hi);
                    (m, f(m)?)
                }
            }
        };
        g = gn;
        r = rn;
        if r < 0.0 {
            neg = Some(g);
        } else if r > 0.0 {
            pos = Some(g);
        }
    }
}

fn apply_mask(s: &SymTensor3<f64>, mask: &ConstraintMask) -> SymTensor3<f64> {
    let mut out = *s;
    if mask[0] == DirectionConstraint::ZeroStress {
        out.a11 = 0.0;
    }
    if mask[1] == DirectionConstraint::ZeroStress {
        out.a22 = 0.0;
    }
    if mask[2] == DirectionConstraint::ZeroStress {
        out.a33 = 0.0;
    }
    out
}

/// One accepted step: Newton solve, exponential growth update, stress
/// report. `flow_n` is the flow direction at the previous converged state.
pub fn step(
    c_next: &SymTensor3<f64>,
    state_n: &GrowthState<f64>,
    flow_n: &SymTensor3<f64>,
    dt: f64,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
    mask: &ConstraintMask,
    eps: f64,
) -> Result<(StepResult, GrowthState<f64>)> {
    let (gamma, iters, res) = newton_solve(c_next, state_n, flow_n, dt, ew, pw, eps)?;
    let ev = eval_after_growth(c_next, state_n, flow_n, dt, gamma, ew, pw)?;
    let s = energy::second_pk(c_next, &ev.state.ug, ew)?;
    Ok((
        StepResult {
            s_reported: apply_mask(&s, mask),
            sigma_bar: ev.sigma_bar,
            gamma_hat: gamma,
            phi_hat_value: ev.phi,
            residual: res,
            newton_iters: iters,
        },
        ev.state,
    ))
}

/// Evaluation of a state without any growth update (used for the first
/// protocol row): gamma, iteration count and residual are reported as zero.
fn evaluate_row(
    c: &SymTensor3<f64>,
    state: &GrowthState<f64>,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
    mask: &ConstraintMask,
) -> Result<StepResult> {
    let ce = state.ug.inv_spd()?.congruence(c);
    let sigma_bar = energy::driving_force(&ce, ew)?;
    let phi = phi_hat(&sigma_bar, pw)?;
    let s = energy::second_pk(c, &state.ug, ew)?;
    Ok(StepResult {
        s_reported: apply_mask(&s, mask),
        sigma_bar,
        gamma_hat: 0.0,
        phi_hat_value: phi,
        residual: 0.0,
        newton_iters: 0,
    })
}

/// Sequential fold of `step` over a protocol from the virgin state. The
/// first row is an evaluation only; each later row advances the state over
/// the preceding grid interval with the flow frozen at the last state.
pub fn simulate(
    protocol: &LoadingProtocol,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
    eps: f64,
) -> Result<Trajectory> {
    protocol.validate()?;
    ew.validate()?;
    pw.validate()?;
    let mut state = GrowthState::virgin();
    let mut steps = Vec::with_capacity(protocol.len());
    let mut states = Vec::with_capacity(protocol.len());

    let c0 = SymTensor3::from_diag(protocol.c_rows[0]);
    let first = evaluate_row(&c0, &state, ew, pw, &protocol.mask)
        .map_err(|e| Error::StepFailure {
            index: 0,
            source: Box::new(e),
        })?;
    let mut sigma_bar = first.sigma_bar;
    steps.push(first);
    states.push(state);

    for n in 1..protocol.len() {
        let wrap = |e: Error| Error::StepFailure {
            index: n,
            source: Box::new(e),
        };
        let dt = protocol.times[n] - protocol.times[n - 1];
        let flow = dphihat_dsigma(&sigma_bar, pw).map_err(wrap)?;
        let c_next = SymTensor3::from_diag(protocol.c_rows[n]);
        let (res, new_state) =
            step(&c_next, &state, &flow, dt, ew, pw, &protocol.mask, eps).map_err(wrap)?;
        sigma_bar = res.sigma_bar;
        state = new_state;
        steps.push(res);
        states.push(state);
    }
    Ok(Trajectory {
        times: protocol.times.clone(),
        steps,
        states,
    })
}

/// Isochoric invariants and determinant of a growth stretch, for
/// instrumentation: (tr(ug)/det^(1/3), I2(ug)/det^(2/3), det(ug)).
pub fn growth_invariants(ug: &SymTensor3<f64>) -> (f64, f64, f64) {
    let det = ug.det();
    let tr = ug.tr();
    let tr_sq = ug.congruence(&SymTensor3::identity()).tr();
    let i2 = 0.5 * (tr * tr - tr_sq);
    let d13 = det.cbrt();
    (tr / d13, i2 / (d13 * d13), det)
}

/// Forward-mode Jacobian of the residual in the multiplier, for
/// cross-checking the finite-difference route.
pub fn residual_jacobian_ad(
    gamma_hat: f64,
    c_next: &SymTensor3<f64>,
    state_n: &GrowthState<f64>,
    flow_n: &SymTensor3<f64>,
    dt: f64,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
) -> Result<f64> {
    let g: Dual<1> = Dual::seeded(gamma_hat, 0);
    let r = residual(
        g,
        &SymTensor3::lift(c_next),
        &GrowthState {
            cg: SymTensor3::lift(&state_n.cg),
            ug: SymTensor3::lift(&state_n.ug),
        },
        &SymTensor3::lift(flow_n),
        Dual::constant(dt),
        &ew.lift(),
        &pw.lift(),
    )?;
    Ok(r.im[0])
}
