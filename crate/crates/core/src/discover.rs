//! Weight discovery: full-batch Adam on a reparameterized weight vector,
//! minimizing the mean squared stress error of the recurrent rollout plus an
//! L1/L2 penalty with a fixed per-weight mask.
//!
//! Non-negativity of the weights is enforced by construction, w = theta^2,
//! so the optimizer itself stays unconstrained; the Ogden exponent w11 is
//! sign-free and stored directly. Gradients come either from a forward-mode
//! dual rollout (the Newton solve is differentiated through the implicit
//! relation dgamma/dtheta = -(dr/dtheta)/(dr/dgamma)) or from central finite
//! differences of the whole loss.

use crate::energy::{self, EnergyWeights};
use crate::error::{Error, Result};
use crate::point::{self, DirectionConstraint, GrowthState, LoadingProtocol};
use crate::potential::{dphihat_dsigma, ActivationMode, PotentialWeights};
use crate::scalar::{Dual, Real};
use crate::tensor::SymTensor3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Canonical parameter order: the four energy weights, the eight potential
/// weights, then the rate scale.
pub const N_WEIGHTS: usize = 13;

pub const WEIGHT_NAMES: [&str; N_WEIGHTS] = [
    "w01", "w02", "w11", "w12", "ws1", "ws2", "ws3", "ws4", "wt1", "wt2", "wt3", "wt4", "weta",
];

/// Penalty mask: w01, w11, ws3 and wt3 stay free, everything else is
/// regularized (the rate scale through its own fixed quadratic term).
pub const REGULARIZED: [bool; N_WEIGHTS] = [
    false, true, false, true, true, true, false, true, true, true, false, true, true,
];

const IDX_W11: usize = 2;
const IDX_WETA: usize = 12;

/// Penalty shape applied to the regularized weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegMode {
    L1,
    L2,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMode {
    ForwardAd,
    FiniteDiff,
}

/// Training hyperparameters. `reg_strength` rides along `reg_mode` (the
/// canonical pairs are L1 with 0.01 and L2 with 0.001); `eta_reg` is a fixed
/// quadratic penalty on the rate scale active in every mode.
#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub reg_mode: RegMode,
    pub reg_strength: f64,
    pub eta_reg: f64,
    pub seed: u64,
    pub eps: f64,
    pub gradient_mode: GradientMode,
    pub activation_mode: ActivationMode,
}

impl TrainConfig {
    /// Canonical configuration for a penalty mode: L1 strength 0.01, L2
    /// strength 0.001, none 0.
    pub fn with_reg(reg_mode: RegMode, epochs: usize) -> Self {
        let reg_strength = match reg_mode {
            RegMode::L1 => 0.01,
            RegMode::L2 => 0.001,
            RegMode::None => 0.0,
        };
        TrainConfig {
            learning_rate: 0.001,
            epochs,
            reg_mode,
            reg_strength,
            eta_reg: 0.001,
            seed: 0,
            eps: point::DEFAULT_EPS,
            gradient_mode: GradientMode::ForwardAd,
            activation_mode: ActivationMode::NegMax,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(
                "learning rate must be positive and finite".to_string(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be at least 1".to_string()));
        }
        if !(self.reg_strength >= 0.0 && self.reg_strength.is_finite())
            || !(self.eta_reg >= 0.0 && self.eta_reg.is_finite())
        {
            return Err(Error::InvalidInput(
                "penalty strengths must be non-negative and finite".to_string(),
            ));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidInput(
                "Newton tolerance must be non-negative and finite".to_string(),
            ));
        }
        Ok(())
    }
}

/// One stress-time experiment: a loading protocol plus the measured stress
/// per direction, row-aligned with the protocol grid. Entries in zero-stress
/// directions are never consulted.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub protocol: LoadingProtocol,
    pub measured: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub experiments: Vec<Experiment>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            return Err(Error::InvalidInput(
                "dataset needs at least one experiment".to_string(),
            ));
        }
        for (i, ex) in self.experiments.iter().enumerate() {
            ex.protocol.validate()?;
            if ex.measured.len() != ex.protocol.len() {
                return Err(Error::InvalidInput(format!(
                    "experiment {i}: measurement grid ({}) does not match protocol grid ({})",
                    ex.measured.len(),
                    ex.protocol.len()
                )));
            }
            for (n, row) in ex.measured.iter().enumerate() {
                for d in 0..3 {
                    if ex.protocol.mask[d] == DirectionConstraint::Measured
                        && !row[d].is_finite()
                    {
                        return Err(Error::InvalidInput(format!(
                            "experiment {i}: non-finite measurement at row {n}, direction {d}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-epoch loss decomposition, total = data + penalty by construction.
#[derive(Clone, Copy, Debug)]
pub struct LossRow {
    pub epoch: usize,
    pub total: f64,
    pub data: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LossReport {
    pub rows: Vec<LossRow>,
}

/// Final constrained weights and the loss history that produced them.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub energy: EnergyWeights<f64>,
    pub potential: PotentialWeights<f64>,
    pub theta: [f64; N_WEIGHTS],
    pub report: LossReport,
}

/// Map the unconstrained vector to model weights: w = theta^2 except the
/// sign-free exponent w11, which is stored directly.
pub fn constrain<T: Real>(
    theta: &[T; N_WEIGHTS],
    mode: ActivationMode,
) -> (EnergyWeights<T>, PotentialWeights<T>) {
    let sq = |k: usize| theta[k] * theta[k];
    let ew = EnergyWeights {
        w01: sq(0),
        w02: sq(1),
        w11: theta[IDX_W11],
        w12: sq(3),
    };
    let pw = PotentialWeights {
        ws1: sq(4),
        ws2: sq(5),
        ws3: sq(6),
        ws4: sq(7),
        wt1: sq(8),
        wt2: sq(9),
        wt3: sq(10),
        wt4: sq(11),
        weta: sq(12),
        mode,
    };
    (ew, pw)
}

/// Inverse of [`constrain`] on the principal branch: theta = sqrt(w), with
/// w11 passed through. Requires non-negative weights except w11.
pub fn unconstrain(ew: &EnergyWeights<f64>, pw: &PotentialWeights<f64>) -> [f64; N_WEIGHTS] {
    let w = weight_vector(ew, pw);
    let mut theta = [0.0; N_WEIGHTS];
    for k in 0..N_WEIGHTS {
        theta[k] = if k == IDX_W11 { w[k] } else { w[k].sqrt() };
    }
    theta
}

fn weight_vector<T: Real>(ew: &EnergyWeights<T>, pw: &PotentialWeights<T>) -> [T; N_WEIGHTS] {
    [
        ew.w01, ew.w02, ew.w11, ew.w12, pw.ws1, pw.ws2, pw.ws3, pw.ws4, pw.wt1, pw.wt2, pw.wt3,
        pw.wt4, pw.weta,
    ]
}

/// Mean squared error between predicted and measured stress over every
/// (experiment, timestep, measured direction) entry jointly. Simulation
/// failures propagate as errors, they are never folded into the loss value.
pub fn data_loss(
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
    dataset: &Dataset,
    eps: f64,
) -> Result<f64> {
    dataset.validate()?;
    let mut acc = 0.0;
    let mut count = 0usize;
    for ex in &dataset.experiments {
        let traj = point::simulate(&ex.protocol, ew, pw, eps)?;
        for (n, st) in traj.steps.iter().enumerate() {
            let pred = [st.s_reported.a11, st.s_reported.a22, st.s_reported.a33];
            for d in 0..3 {
                if ex.protocol.mask[d] == DirectionConstraint::Measured {
                    let r = pred[d] - ex.measured[n][d];
                    acc += r * r;
                    count += 1;
                }
            }
        }
    }
    Ok(acc / count as f64)
}

/// Penalty on the constrained weight values: eta_reg * weta^2 always, plus
/// the mode term over the regularized weights other than the rate scale
/// (L1: strength * |w|, L2: strength * w^2).
pub fn penalty<T: Real>(
    ew: &EnergyWeights<T>,
    pw: &PotentialWeights<T>,
    config: &TrainConfig,
) -> T {
    let w = weight_vector(ew, pw);
    let weta = w[IDX_WETA];
    let mut p = T::from_f64(config.eta_reg) * weta * weta;
    let s = T::from_f64(config.reg_strength);
    for k in 0..N_WEIGHTS {
        if !REGULARIZED[k] || k == IDX_WETA {
            continue;
        }
        match config.reg_mode {
            RegMode::L1 => p = p + s * w[k].abs_sg(),
            RegMode::L2 => p = p + s * w[k] * w[k],
            RegMode::None => {}
        }
    }
    p
}

/// Dual rollout of one experiment: the Newton solve runs on the primal
/// projection and the multiplier's derivative payload is recovered from the
/// converged residual, im(gamma) = -im(r)/(dr/dgamma). Accumulates the
/// squared stress errors into `acc` and the entry count into `count`.
fn accumulate_experiment_dual<const N: usize>(
    ewd: &EnergyWeights<Dual<N>>,
    pwd: &PotentialWeights<Dual<N>>,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
    ex: &Experiment,
    eps: f64,
    acc: &mut Dual<N>,
    count: &mut usize,
) -> Result<()> {
    let p = &ex.protocol;
    let mut state: GrowthState<Dual<N>> = GrowthState::virgin();

    let c0 = SymTensor3::from_diag(p.c_rows[0]);
    let c0_d = SymTensor3::lift(&c0);
    let ce0 = state.ug.inv_spd()?.congruence(&c0_d);
    let mut sigma = energy::driving_force(&ce0, ewd)?;
    let s0 = energy::second_pk(&c0_d, &state.ug, ewd)?;
    accumulate_row(&s0, &ex.measured[0], &p.mask, acc, count);

    for n in 1..p.len() {
        let dt = p.times[n] - p.times[n - 1];
        let flow = dphihat_dsigma(&sigma, pwd)?;
        let c_next = SymTensor3::from_diag(p.c_rows[n]);
        let c_next_d = SymTensor3::lift(&c_next);

        let state_p = state.primal();
        let flow_p = flow.primal();
        let (g, _, _) = point::newton_solve(&c_next, &state_p, &flow_p, dt, ew, pw, eps)?;

        let h = 1e-7 * g.abs().max(1.0);
        let rp = point::residual(g + h, &c_next, &state_p, &flow_p, dt, ew, pw)?;
        let rm = point::residual(g - h, &c_next, &state_p, &flow_p, dt, ew, pw)?;
        let jac = (rp - rm) / (2.0 * h);
        if jac == 0.0 {
            return Err(Error::SingularJacobian { gamma_hat: g });
        }
        let r_d = point::residual(
            Dual::constant(g),
            &c_next_d,
            &state,
            &flow,
            Dual::constant(dt),
            ewd,
            pwd,
        )?;
        let mut im = [0.0; N];
        for k in 0..N {
            im[k] = -r_d.im[k] / jac;
        }
        let gamma = Dual::with_grad(g, im);

        let ev = point::eval_after_growth(
            &c_next_d,
            &state,
            &flow,
            Dual::constant(dt),
            gamma,
            ewd,
            pwd,
        )?;
        let s = energy::second_pk(&c_next_d, &ev.state.ug, ewd)?;
        accumulate_row(&s, &ex.measured[n], &p.mask, acc, count);
        sigma = ev.sigma_bar;
        state = ev.state;
    }
    Ok(())
}

fn accumulate_row<const N: usize>(
    s: &SymTensor3<Dual<N>>,
    measured: &[f64; 3],
    mask: &[DirectionConstraint; 3],
    acc: &mut Dual<N>,
    count: &mut usize,
) {
    let pred = [s.a11, s.a22, s.a33];
    for d in 0..3 {
        if mask[d] == DirectionConstraint::Measured {
            let r = pred[d] - Dual::constant(measured[d]);
            *acc = *acc + r * r;
            *count += 1;
        }
    }
}

fn data_loss_dual<const N: usize>(
    ewd: &EnergyWeights<Dual<N>>,
    pwd: &PotentialWeights<Dual<N>>,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
    dataset: &Dataset,
    eps: f64,
) -> Result<Dual<N>> {
    dataset.validate()?;
    let mut acc = Dual::constant(0.0);
    let mut count = 0usize;
    for ex in &dataset.experiments {
        accumulate_experiment_dual(ewd, pwd, ew, pw, ex, eps, &mut acc, &mut count)?;
    }
    Ok(acc * Dual::constant(1.0 / count as f64))
}

fn loss_parts(theta: &[f64; N_WEIGHTS], dataset: &Dataset, config: &TrainConfig) -> Result<(f64, f64)> {
    let (ew, pw) = constrain(theta, config.activation_mode);
    let data = data_loss(&ew, &pw, dataset, config.eps)?;
    Ok((data, penalty(&ew, &pw, config)))
}

/// Loss decomposition at `theta` together with the gradient of the total
/// with respect to theta, by the configured scheme.
pub fn loss_and_gradient(
    theta: &[f64; N_WEIGHTS],
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(f64, f64, [f64; N_WEIGHTS])> {
    let grad = match config.gradient_mode {
        GradientMode::ForwardAd => {
            let mut theta_d = [Dual::<N_WEIGHTS>::constant(0.0); N_WEIGHTS];
            for k in 0..N_WEIGHTS {
                theta_d[k] = Dual::seeded(theta[k], k);
            }
            let (ewd, pwd) = constrain(&theta_d, config.activation_mode);
            let (ew, pw) = constrain(theta, config.activation_mode);
            let data = data_loss_dual(&ewd, &pwd, &ew, &pw, dataset, config.eps)?;
            let total = data + penalty(&ewd, &pwd, config);
            for (k, g) in total.im.iter().enumerate() {
                if !g.is_finite() {
                    return Err(Error::NonFiniteGradient { component: k });
                }
            }
            let pen = penalty(&ew, &pw, config);
            return Ok((data.re, pen, total.im));
        }
        GradientMode::FiniteDiff => {
            let mut grad = [0.0; N_WEIGHTS];
            for k in 0..N_WEIGHTS {
                let h = 1e-6 * theta[k].abs().max(1.0);
                let mut up = *theta;
                up[k] += h;
                let mut dn = *theta;
                dn[k] -= h;
                let (du, pu) = loss_parts(&up, dataset, config)?;
                let (dd, pd) = loss_parts(&dn, dataset, config)?;
                grad[k] = ((du + pu) - (dd + pd)) / (2.0 * h);
                if !grad[k].is_finite() {
                    return Err(Error::NonFiniteGradient { component: k });
                }
            }
            grad
        }
    };
    let (data, pen) = loss_parts(theta, dataset, config)?;
    Ok((data, pen, grad))
}

/// Gradient of data_loss + penalty with respect to the unconstrained vector.
pub fn gradient(
    theta: &[f64; N_WEIGHTS],
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<[f64; N_WEIGHTS]> {
    Ok(loss_and_gradient(theta, dataset, config)?.2)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-7;

/// First and second moment accumulators of Adam.
#[derive(Clone, Copy, Debug)]
pub struct AdamState<const M: usize = N_WEIGHTS> {
    m: [f64; M],
    v: [f64; M],
    t: u32,
}

impl<const M: usize> AdamState<M> {
    pub fn new() -> Self {
        AdamState {
            m: [0.0; M],
            v: [0.0; M],
            t: 0,
        }
    }
}

impl<const M: usize> Default for AdamState<M> {
    fn default() -> Self {
        Self::new()
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step<const M: usize>(
    params: &mut [f64; M],
    grads: &[f64; M],
    state: &mut AdamState<M>,
    lr: f64,
) {
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for k in 0..M {
        state.m[k] = ADAM_BETA1 * state.m[k] + (1.0 - ADAM_BETA1) * grads[k];
        state.v[k] = ADAM_BETA2 * state.v[k] + (1.0 - ADAM_BETA2) * grads[k] * grads[k];
        let m_hat = state.m[k] / bc1;
        let v_hat = state.v[k] / bc2;
        params[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Full-batch training from an explicit starting vector. Gradient failures
/// abort with the epoch index attached; the loss history records the state
/// before each update, so rows[0] is the initial loss.
pub fn train_from(
    theta0: &[f64; N_WEIGHTS],
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    dataset.validate()?;
    let mut theta = *theta0;
    let mut adam = AdamState::new();
    let mut rows = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let (data, pen, grad) =
            loss_and_gradient(&theta, dataset, config).map_err(|e| Error::TrainFailure {
                epoch,
                source: Box::new(e),
            })?;
        rows.push(LossRow {
            epoch,
            total: data + pen,
            data,
            penalty: pen,
        });
        adam_step(&mut theta, &grad, &mut adam, config.learning_rate);
    }
    let (energy, potential) = constrain(&theta, config.activation_mode);
    Ok(TrainOutcome {
        energy,
        potential,
        theta,
        report: LossReport { rows },
    })
}

/// Seeded training: theta starts uniform in [0.05, 0.5] except the Ogden
/// exponent, which starts in [0.5, 1.5].
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = [0.0; N_WEIGHTS];
    for (k, t) in theta.iter_mut().enumerate() {
        *t = if k == IDX_W11 {
            rng.gen_range(0.5..1.5)
        } else {
            rng.gen_range(0.05..0.5)
        };
    }
    train_from(&theta, dataset, config)
}

/// Model-generated experiment: simulate the protocol under the given weights
/// and record the reported stresses as measurements.
pub fn synthetic_experiment(
    protocol: &LoadingProtocol,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
    eps: f64,
) -> Result<Experiment> {
    let traj = point::simulate(protocol, ew, pw, eps)?;
    let measured = traj
        .steps
        .iter()
        .map(|st| [st.s_reported.a11, st.s_reported.a22, st.s_reported.a33])
        .collect();
    Ok(Experiment {
        protocol: protocol.clone(),
        measured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::tests::{stripe_l2_energy, stripe_l2_potential, MEASURED_UNIAXIAL};

    fn short_compression() -> LoadingProtocol {
        LoadingProtocol::stepped(
            &[(0.5, [1.0; 3]), (1.5, [0.99505347, 1.0, 1.0])],
            0.1,
            MEASURED_UNIAXIAL,
        )
        .unwrap()
    }

    fn self_consistent_dataset(
        ew: &EnergyWeights<f64>,
        pw: &PotentialWeights<f64>,
        eps: f64,
    ) -> Dataset {
        Dataset {
            experiments: vec![synthetic_experiment(&short_compression(), ew, pw, eps).unwrap()],
        }
    }

    #[test]
    fn constrain_squares_everything_but_the_exponent() {
        let theta = [-2.0; N_WEIGHTS];
        let (ew, pw) = constrain(&theta, ActivationMode::NegMax);
        assert_eq!(ew.w01, 4.0);
        assert_eq!(ew.w11, -2.0);
        assert_eq!(pw.ws1, 4.0);
        assert_eq!(pw.weta, 4.0);

        let zero = [0.0; N_WEIGHTS];
        let (ew0, pw0) = constrain(&zero, ActivationMode::NegMax);
        assert_eq!(ew0.w02, 0.0);
        assert_eq!(pw0.wt4, 0.0);
    }

    #[test]
    fn unconstrain_roundtrips_nonnegative_weights() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let theta = unconstrain(&ew, &pw);
        let (ew2, pw2) = constrain(&theta, pw.mode);
        let w = weight_vector(&ew, &pw);
        let w2 = weight_vector(&ew2, &pw2);
        for k in 0..N_WEIGHTS {
            assert!((w[k] - w2[k]).abs() <= 1e-15 * w[k].abs().max(1.0), "{k}");
        }
    }

    #[test]
    fn penalty_is_zero_for_all_zero_weights() {
        let theta = [0.0; N_WEIGHTS];
        let (ew, pw) = constrain(&theta, ActivationMode::NegMax);
        for mode in [RegMode::L1, RegMode::L2, RegMode::None] {
            assert_eq!(penalty(&ew, &pw, &TrainConfig::with_reg(mode, 1)), 0.0);
        }
    }

    #[test]
    fn l1_penalty_of_a_single_regularized_weight() {
        // w02 = 2 and weta = 0.3, everything else zero.
        let mut theta = [0.0; N_WEIGHTS];
        theta[1] = f64::sqrt(2.0);
        theta[IDX_WETA] = f64::sqrt(0.3);
        let (ew, pw) = constrain(&theta, ActivationMode::NegMax);
        let cfg = TrainConfig::with_reg(RegMode::L1, 1);
        let expect = 0.01 * 2.0 + 0.001 * 0.3 * 0.3;
        assert!((penalty(&ew, &pw, &cfg) - expect).abs() < 1e-15);
    }

    #[test]
    fn l2_penalty_matches_hand_sum_over_the_regularized_nine() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let cfg = TrainConfig::with_reg(RegMode::L2, 1);
        let hand: f64 = 0.001
            * [
                ew.w02, ew.w12, pw.ws1, pw.ws2, pw.ws4, pw.wt1, pw.wt2, pw.wt4, pw.weta,
            ]
            .iter()
            .map(|w| w * w)
            .sum::<f64>();
        assert!((penalty(&ew, &pw, &cfg) - hand).abs() < 1e-18);
    }

    #[test]
    fn penalty_ignores_free_weights() {
        let mut ew = stripe_l2_energy();
        let mut pw = stripe_l2_potential();
        for mode in [RegMode::L1, RegMode::L2] {
            let cfg = TrainConfig::with_reg(mode, 1);
            let before = penalty(&ew, &pw, &cfg);
            ew.w01 += 5.0;
            ew.w11 -= 3.0;
            pw.ws3 += 2.0;
            pw.wt3 += 7.0;
            assert_eq!(penalty(&ew, &pw, &cfg), before);
        }
    }

    #[test]
    fn none_mode_keeps_only_the_rate_scale_term() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let cfg = TrainConfig::with_reg(RegMode::None, 1);
        let expect = 0.001 * pw.weta * pw.weta;
        assert!((penalty(&ew, &pw, &cfg) - expect).abs() < 1e-18);
    }

    #[test]
    fn self_consistent_data_gives_zero_loss() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let ds = self_consistent_dataset(&ew, &pw, 1e-10);
        let loss = data_loss(&ew, &pw, &ds, 1e-10).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn constant_offset_shifts_loss_by_its_square() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let mut ds = self_consistent_dataset(&ew, &pw, 1e-10);
        let d = 0.37;
        for row in &mut ds.experiments[0].measured {
            for v in row.iter_mut() {
                *v += d;
            }
        }
        let loss = data_loss(&ew, &pw, &ds, 1e-10).unwrap();
        assert!((loss - d * d).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_moves_by_lr_against_the_gradient_sign() {
        let mut p = [1.0, -0.5];
        let g = [3.7, -0.02];
        let mut st = AdamState::<2>::new();
        adam_step(&mut p, &g, &mut st, 0.01);
        assert!((p[0] - (1.0 - 0.01)).abs() < 0.01 * 1e-4);
        assert!((p[1] - (-0.5 + 0.01)).abs() < 0.01 * 1e-2);
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_unchanged() {
        let mut p = [0.123, -4.5];
        let g = [0.0, 0.0];
        let mut st = AdamState::<2>::new();
        adam_step(&mut p, &g, &mut st, 0.1);
        assert_eq!(p, [0.123, -4.5]);
    }

    #[test]
    fn adam_converges_on_a_scalar_quadratic() {
        // f(x) = (x - 0.3)^2 / 2, minimizer 0.3.
        let mut x = [0.0];
        let mut st = AdamState::<1>::new();
        for _ in 0..100 {
            let g = [x[0] - 0.3];
            adam_step(&mut x, &g, &mut st, 0.03);
        }
        assert!((x[0] - 0.3).abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn data_gradient_vanishes_at_a_self_consistent_optimum() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let ds = self_consistent_dataset(&ew, &pw, 1e-10);
        let theta = unconstrain(&ew, &pw);
        let mut cfg = TrainConfig::with_reg(RegMode::None, 1);
        cfg.eta_reg = 0.0;
        cfg.eps = 1e-10;
        let g = gradient(&theta, &ds, &cfg).unwrap();
        for (k, gk) in g.iter().enumerate() {
            assert!(gk.abs() < 1e-8, "component {k}: {gk}");
        }
    }

    #[test]
    fn forward_ad_matches_finite_differences_at_random_points() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let gen_ew = stripe_l2_energy();
        let gen_pw = stripe_l2_potential();
        let ds = self_consistent_dataset(&gen_ew, &gen_pw, 1e-12);

        for trial in 0..10 {
            let mut theta = [0.0; N_WEIGHTS];
            for (k, t) in theta.iter_mut().enumerate() {
                *t = if k == IDX_W11 {
                    rng.gen_range(0.5..1.5)
                } else {
                    rng.gen_range(0.05..0.5)
                };
            }
            let mode = if trial % 2 == 0 {
                ActivationMode::NegMax
            } else {
                ActivationMode::Abs
            };
            let mut cfg = TrainConfig::with_reg(RegMode::L2, 1);
            cfg.eps = 1e-12;
            cfg.activation_mode = mode;

            cfg.gradient_mode = GradientMode::ForwardAd;
            let ad = gradient(&theta, &ds, &cfg).unwrap();
            cfg.gradient_mode = GradientMode::FiniteDiff;
            let fd = gradient(&theta, &ds, &cfg).unwrap();
            for k in 0..N_WEIGHTS {
                let scale = ad[k].abs().max(fd[k].abs()).max(1e-6);
                assert!(
                    (ad[k] - fd[k]).abs() <= 1e-4 * scale,
                    "trial {trial}, component {k}: ad {} vs fd {}",
                    ad[k],
                    fd[k]
                );
            }
        }
    }

    #[test]
    fn recovery_from_a_perturbed_start() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let ds = self_consistent_dataset(&ew, &pw, 1e-10);
        let mut theta = unconstrain(&ew, &pw);
        for t in theta.iter_mut() {
            *t += 0.02;
        }
        let mut cfg = TrainConfig::with_reg(RegMode::None, 400);
        cfg.eta_reg = 0.0;
        cfg.eps = 1e-10;
        cfg.learning_rate = 0.002;
        let out = train_from(&theta, &ds, &cfg).unwrap();
        let initial = out.report.rows[0].data;
        let terminal = data_loss(&out.energy, &out.potential, &ds, cfg.eps).unwrap();
        assert!(initial > 0.0);
        assert!(
            terminal < 1e-4 * initial,
            "initial {initial}, terminal {terminal}"
        );
    }

    #[test]
    fn training_is_bit_deterministic() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let ds = self_consistent_dataset(&ew, &pw, 1e-10);
        let mut cfg = TrainConfig::with_reg(RegMode::L2, 5);
        cfg.seed = 42;
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        for (ra, rb) in a.report.rows.iter().zip(&b.report.rows) {
            assert_eq!(ra.total.to_bits(), rb.total.to_bits());
            assert_eq!(ra.data.to_bits(), rb.data.to_bits());
        }
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn constrained_weights_stay_nonnegative_through_updates() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let ds = self_consistent_dataset(&ew, &pw, 1e-10);
        let mut cfg = TrainConfig::with_reg(RegMode::L1, 8);
        cfg.seed = 7;
        let out = train(&ds, &cfg).unwrap();
        let w = weight_vector(&out.energy, &out.potential);
        for (k, wk) in w.iter().enumerate() {
            if k != IDX_W11 {
                assert!(*wk >= 0.0, "weight {k} went negative: {wk}");
            }
        }
        let rows = &out.report.rows;
        assert_eq!(rows.len(), 8);
        for r in rows {
            assert!((r.total - (r.data + r.penalty)).abs() <= 1e-15 * r.total.abs().max(1.0));
        }
    }

    #[test]
    fn newton_breakdown_reports_the_epoch() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let ds = self_consistent_dataset(&ew, &pw, 1e-10);
        let mut cfg = TrainConfig::with_reg(RegMode::None, 3);
        // Impossible tolerance: the very first gradient evaluation fails.
        cfg.eps = 0.0;
        match train(&ds, &cfg) {
            Err(Error::TrainFailure { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected TrainFailure, got {other:?}"),
        }
    }

    #[test]
    fn dataset_rejects_mismatched_grids() {
        let ew = stripe_l2_energy();
        let pw = stripe_l2_potential();
        let mut ds = self_consistent_dataset(&ew, &pw, 1e-10);
        ds.experiments[0].measured.pop();
        assert!(ds.validate().is_err());
        assert!(data_loss(&ew, &pw, &ds, 1e-8).is_err());

        let empty = Dataset {
            experiments: vec![],
        };
        assert!(empty.validate().is_err());
    }
}
