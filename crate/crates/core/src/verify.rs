//! Seeded self-check suite behind the `verify` command: every module's
//! documented invariants, run at the published tolerances, reported as one
//! named check per line with sample count and the worst observed violation.
//!
//! Checks never panic; unexpected errors mark the check failed with an
//! infinite violation and the error text attached.

use crate::discover::{
    self, adam_step, constrain, data_loss, gradient, penalty, synthetic_experiment, AdamState,
    Dataset, GradientMode, RegMode, TrainConfig, N_WEIGHTS,
};
use crate::energy::{self, EnergyWeights};
use crate::error::Result;
use crate::io;
use crate::point::{self, DirectionConstraint, LoadingProtocol};
use crate::potential::{dphihat_dsigma, phi_hat, ActivationMode, PotentialWeights};
use crate::tensor::SymTensor3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub samples: usize,
    pub max_violation: f64,
    pub tol: f64,
    pub pass: bool,
    /// Error text when the check aborted instead of measuring.
    pub detail: String,
}

impl CheckResult {
    fn measured(name: &'static str, samples: usize, max_violation: f64, tol: f64) -> Self {
        CheckResult {
            name,
            samples,
            max_violation,
            tol,
            pass: max_violation <= tol,
            detail: String::new(),
        }
    }

    fn aborted(name: &'static str, tol: f64, err: impl std::fmt::Display) -> Self {
        CheckResult {
            name,
            samples: 0,
            max_violation: f64::INFINITY,
            tol,
            pass: false,
            detail: err.to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "invariant suite (seed {})", self.seed);
        for c in &self.checks {
            let status = if c.pass { "pass" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{status}  {:<52} samples {:>6}  max violation {:>12.4e}  tol {:>8.1e}",
                c.name, c.samples, c.max_violation, c.tol
            );
            if !c.detail.is_empty() {
                let _ = writeln!(out, "      {}", c.detail);
            }
        }
        let _ = writeln!(
            out,
            "{} of {} checks passed",
            self.checks.iter().filter(|c| c.pass).count(),
            self.checks.len()
        );
        out
    }
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    // Uniform quaternion.
    let (q0, q1, q2, q3) = loop {
        let q: [f64; 4] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            break (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        }
    };
    [
        [
            1.0 - 2.0 * (q2 * q2 + q3 * q3),
            2.0 * (q1 * q2 - q0 * q3),
            2.0 * (q1 * q3 + q0 * q2),
        ],
        [
            2.0 * (q1 * q2 + q0 * q3),
            1.0 - 2.0 * (q1 * q1 + q3 * q3),
            2.0 * (q2 * q3 - q0 * q1),
        ],
        [
            2.0 * (q1 * q3 - q0 * q2),
            2.0 * (q2 * q3 + q0 * q1),
            1.0 - 2.0 * (q1 * q1 + q2 * q2),
        ],
    ]
}

fn rotate_sym(q: &[[f64; 3]; 3], a: &SymTensor3<f64>) -> SymTensor3<f64> {
    let m = a.to_full();
    let mut qm = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                qm[i][j] += q[i][k] * m[k][j];
            }
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += qm[i][k] * q[j][k];
            }
        }
    }
    SymTensor3::new(
        out[0][0],
        out[1][1],
        out[2][2],
        0.5 * (out[0][1] + out[1][0]),
        0.5 * (out[0][2] + out[2][0]),
        0.5 * (out[1][2] + out[2][1]),
    )
}

fn random_symmetric(rng: &mut ChaCha8Rng, scale: f64) -> SymTensor3<f64> {
    SymTensor3::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

/// Random SPD tensor with eigenvalues log-uniform in [10^-3, 10^3]
/// (condition number at most 1e6), in a random frame.
fn random_spd(rng: &mut ChaCha8Rng) -> SymTensor3<f64> {
    let q = random_rotation(rng);
    let lam = SymTensor3::from_diag([
        10f64.powf(rng.gen_range(-3.0..3.0)),
        10f64.powf(rng.gen_range(-3.0..3.0)),
        10f64.powf(rng.gen_range(-3.0..3.0)),
    ]);
    rotate_sym(&q, &lam)
}

/// Moderate SPD stretch, the regime of the constitutive checks.
fn random_stretch(rng: &mut ChaCha8Rng) -> SymTensor3<f64> {
    let q = random_rotation(rng);
    let lam = SymTensor3::from_diag([
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.5..2.0),
    ]);
    rotate_sym(&q, &lam)
}

fn random_energy_weights(rng: &mut ChaCha8Rng) -> EnergyWeights<f64> {
    EnergyWeights {
        w01: rng.gen_range(0.3..3.0),
        w02: rng.gen_range(0.01..1.0),
        w11: rng.gen_range(-3.0..3.0),
        w12: rng.gen_range(0.0..1.0),
    }
}

fn random_potential_weights(rng: &mut ChaCha8Rng, mode: ActivationMode) -> PotentialWeights<f64> {
    PotentialWeights {
        ws1: rng.gen_range(0.0..0.5),
        ws2: rng.gen_range(0.0..0.5),
        ws3: rng.gen_range(0.0..2.0),
        ws4: rng.gen_range(0.0..0.5),
        wt1: rng.gen_range(0.0..0.5),
        wt2: rng.gen_range(0.0..0.5),
        wt3: rng.gen_range(0.0..2.0),
        wt4: rng.gen_range(0.0..0.5),
        weta: rng.gen_range(0.05..0.5),
        mode,
    }
}

/// Random stress state whose principal values and shears keep a margin from
/// the activation kinks.
fn random_stress_off_kinks(rng: &mut ChaCha8Rng) -> SymTensor3<f64> {
    loop {
        let s = random_symmetric(rng, 2.0);
        let Ok(ps) = crate::potential::principal_state(&s) else {
            continue;
        };
        let margin = 0.08;
        if ps.sigma.iter().all(|v| v.abs() > margin)
            && ps.tau.iter().all(|v| v.abs() > margin)
        {
            return s;
        }
    }
}

fn stripe_l2() -> (EnergyWeights<f64>, PotentialWeights<f64>) {
    (
        EnergyWeights {
            w01: 1.2036339,
            w02: 0.07181329,
            w11: 1.2016658,
            w12: 0.3978735,
        },
        PotentialWeights {
            ws1: 0.0,
            ws2: 0.0,
            ws3: 3.980602e-8,
            ws4: 0.03391496,
            wt1: 0.0,
            wt2: 0.0,
            wt3: 7.274134e-8,
            wt4: 0.03408322,
            weta: 0.26240048,
            mode: ActivationMode::NegMax,
        },
    )
}

const ALL_MEASURED: [DirectionConstraint; 3] = [
    DirectionConstraint::Measured,
    DirectionConstraint::Measured,
    DirectionConstraint::Measured,
];

// ---- tensor checks ----

fn check_exp_det(seed: u64) -> CheckResult {
    let name = "tensor: det(exp(a)) = exp(tr(a))";
    let tol = 1e-10;
    let mut rng = rng_for(seed, 1);
    let mut worst = 0.0f64;
    let n = 500;
    for _ in 0..n {
        let a = random_symmetric(&mut rng, 5.0 / 3.0);
        let e = match a.exp_sym() {
            Ok(e) => e,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        let lhs = e.det();
        let rhs = a.tr().exp();
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-300));
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_exp_inverse(seed: u64) -> CheckResult {
    let name = "tensor: exp(a) exp(-a) = I";
    let tol = 1e-10;
    let mut rng = rng_for(seed, 2);
    let mut worst = 0.0f64;
    let n = 500;
    for _ in 0..n {
        let a = random_symmetric(&mut rng, 5.0 / 3.0);
        let (e, em) = match (a.exp_sym(), a.scale(-1.0).exp_sym()) {
            (Ok(e), Ok(em)) => (e, em),
            _ => return CheckResult::aborted(name, tol, "exp overflow"),
        };
        let fe = e.to_full();
        let fm = em.to_full();
        let mut frob = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut p = 0.0;
                for k in 0..3 {
                    p += fe[i][k] * fm[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                frob += (p - target) * (p - target);
            }
        }
        worst = worst.max(frob.sqrt());
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_sqrt_squares_back(seed: u64) -> CheckResult {
    let name = "tensor: sqrt(a)^2 = a on SPD inputs";
    let tol = 1e-12;
    let mut rng = rng_for(seed, 3);
    let mut worst = 0.0f64;
    let n = 500;
    for _ in 0..n {
        let a = random_spd(&mut rng);
        let r = match a.sqrt_spd() {
            Ok(r) => r,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        let sq = r.congruence(&SymTensor3::identity());
        let scale = a.norm().max(1e-300);
        worst = worst.max((sq - a).norm() / scale);
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_eig_characteristic(seed: u64) -> CheckResult {
    let name = "tensor: eigenvalues reproduce I1, I2, I3";
    let tol = 1e-10;
    let mut rng = rng_for(seed, 4);
    let mut worst = 0.0f64;
    let n = 500;
    for _ in 0..n {
        let a = random_symmetric(&mut rng, 3.0);
        let spec = match a.eig_sym() {
            Ok(s) => s,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        let l = spec.lam;
        let tr_sq = a.congruence(&SymTensor3::identity()).tr();
        let i1 = a.tr();
        let i2 = 0.5 * (i1 * i1 - tr_sq);
        let i3 = a.det();
        let e1 = l[0] + l[1] + l[2];
        let e2 = l[0] * l[1] + l[0] * l[2] + l[1] * l[2];
        let e3 = l[0] * l[1] * l[2];
        let scale = a.norm().max(1.0);
        worst = worst.max((i1 - e1).abs() / scale);
        worst = worst.max((i2 - e2).abs() / (scale * scale));
        worst = worst.max((i3 - e3).abs() / (scale * scale * scale));
    }
    CheckResult::measured(name, n, worst, tol)
}

// ---- energy checks ----

fn check_energy_normalization(seed: u64) -> CheckResult {
    let name = "energy: psi(I) = 0 and dpsi(I) = 0 exactly";
    let tol = 0.0;
    let mut rng = rng_for(seed, 5);
    let mut worst = 0.0f64;
    let n = 64;
    let id = SymTensor3::identity();
    for _ in 0..n {
        let w = random_energy_weights(&mut rng);
        match (energy::psi(&id, &w), energy::dpsi_dce(&id, &w)) {
            (Ok(v), Ok(d)) => {
                worst = worst.max(v.abs());
                worst = worst.max(d.norm());
            }
            _ => return CheckResult::aborted(name, tol, "energy evaluation failed at identity"),
        }
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_energy_isotropy(seed: u64) -> CheckResult {
    let name = "energy: psi invariant under rotations";
    let tol = 1e-10;
    let mut rng = rng_for(seed, 6);
    let mut worst = 0.0f64;
    let n = 100;
    for _ in 0..n {
        let w = random_energy_weights(&mut rng);
        let ce = random_stretch(&mut rng);
        let q = random_rotation(&mut rng);
        let rot = rotate_sym(&q, &ce);
        match (energy::psi(&ce, &w), energy::psi(&rot, &w)) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b).abs() / a.abs().max(1.0)),
            _ => return CheckResult::aborted(name, tol, "energy evaluation failed"),
        }
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_energy_volumetric_divergence(seed: u64) -> CheckResult {
    // Expansion side: psi >= 1e3 w02 at det = 1e6 for w01 >= 1. Collapse
    // side, where the formula is linear in |ln J|: psi >= 10 w02 at
    // det = 1e-6 and grows monotonically as det shrinks further.
    let name = "energy: volumetric divergence probe";
    let tol = 0.0;
    let mut rng = rng_for(seed, 7);
    let mut worst = 0.0f64;
    let n = 32;
    for _ in 0..n {
        let mut w = random_energy_weights(&mut rng);
        w.w01 = rng.gen_range(1.0..3.0);
        w.w12 = 0.0;
        let big = SymTensor3::from_diag([1e2, 1e2, 1e2]);
        let small = SymTensor3::from_diag([1e-2, 1e-2, 1e-2]);
        let smaller = SymTensor3::from_diag([1e-3, 1e-3, 1e-3]);
        let (a, b, c) = match (
            energy::psi(&big, &w),
            energy::psi(&small, &w),
            energy::psi(&smaller, &w),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => return CheckResult::aborted(name, tol, "energy evaluation failed"),
        };
        worst = worst.max(1e3 * w.w02 - a);
        worst = worst.max(10.0 * w.w02 - b);
        worst = worst.max(b - c);
    }
    CheckResult::measured(name, n, worst.max(0.0), tol)
}

fn check_energy_derivative_fd(seed: u64) -> CheckResult {
    let name = "energy: dpsi matches central differences";
    let tol = 1e-6;
    let mut rng = rng_for(seed, 8);
    let mut worst = 0.0f64;
    let n = 100;
    for _ in 0..n {
        let w = random_energy_weights(&mut rng);
        let ce = random_stretch(&mut rng);
        let d = match energy::dpsi_dce(&ce, &w) {
            Ok(d) => d,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        let h = 1e-6;
        // Diagonal and doubled off-diagonal slots of the gradient.
        for slot in 0..6 {
            let mut up = ce;
            let mut dn = ce;
            let (exp_factor, dval) = match slot {
                0 => {
                    up.a11 += h;
                    dn.a11 -= h;
                    (1.0, d.a11)
                }
                1 => {
                    up.a22 += h;
                    dn.a22 -= h;
                    (1.0, d.a22)
                }
                2 => {
                    up.a33 += h;
                    dn.a33 -= h;
                    (1.0, d.a33)
                }
                3 => {
                    up.a12 += h;
                    dn.a12 -= h;
                    (2.0, d.a12)
                }
                4 => {
                    up.a13 += h;
                    dn.a13 -= h;
                    (2.0, d.a13)
                }
                _ => {
                    up.a23 += h;
                    dn.a23 -= h;
                    (2.0, d.a23)
                }
            };
            let (pu, pd) = match (energy::psi(&up, &w), energy::psi(&dn, &w)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            let fd = (pu - pd) / (2.0 * h);
            let expect = exp_factor * dval;
            worst = worst.max((fd - expect).abs() / expect.abs().max(1e-3));
        }
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_energy_hessian_moduli(seed: u64) -> CheckResult {
    let name = "energy: linearized Hessian matches moduli";
    let tol = 1e-4;
    let mut rng = rng_for(seed, 9);
    let mut worst = 0.0f64;
    let n = 16;
    for _ in 0..n {
        let mut w = random_energy_weights(&mut rng);
        // Keep the linearized response well-conditioned.
        w.w11 = rng.gen_range(0.5..3.0);
        w.w12 = rng.gen_range(0.1..1.0);
        let m = match energy::moduli(&w) {
            Ok(m) => m,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        let h = 1e-4;
        // psi as a function of the principal stretches xi_i at xi = 1:
        // d2psi/dxi_i dxi_j = kappa - 2mu/3 + 2mu delta_ij.
        let psi_at = |x: [f64; 3]| -> Result<f64> {
            let ce = SymTensor3::from_diag([x[0] * x[0], x[1] * x[1], x[2] * x[2]]);
            energy::psi(&ce, &w)
        };
        for i in 0..3 {
            for j in 0..3 {
                let mut xs = [[1.0; 3]; 4];
                xs[0][i] += h;
                xs[0][j] += h;
                xs[1][i] += h;
                xs[1][j] -= h;
                xs[2][i] -= h;
                xs[2][j] += h;
                xs[3][i] -= h;
                xs[3][j] -= h;
                let mut vals = [0.0; 4];
                let mut failed = false;
                for (k, x) in xs.iter().enumerate() {
                    match psi_at(*x) {
                        Ok(v) => vals[k] = v,
                        Err(_) => failed = true,
                    }
                }
                if failed {
                    return CheckResult::aborted(name, tol, "energy evaluation failed");
                }
                let fd = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * h * h);
                let expect =
                    m.kappa - 2.0 * m.mu / 3.0 + if i == j { 2.0 * m.mu } else { 0.0 };
                worst = worst.max((fd - expect).abs() / expect.abs().max(1e-2));
            }
        }
    }
    CheckResult::measured(name, n, worst, tol)
}

// ---- potential checks ----

fn check_potential_nonnegative(seed: u64) -> CheckResult {
    let name = "potential: phi(0) = 0 and phi >= 0";
    let tol = 0.0;
    let mut rng = rng_for(seed, 10);
    let mut worst = 0.0f64;
    let n = 10_000;
    for i in 0..n {
        let mode = if i % 2 == 0 {
            ActivationMode::NegMax
        } else {
            ActivationMode::Abs
        };
        let w = random_potential_weights(&mut rng, mode);
        match phi_hat(&SymTensor3::zero(), &w) {
            Ok(v) => worst = worst.max(v.abs()),
            Err(err) => return CheckResult::aborted(name, tol, err),
        }
        let s = random_symmetric(&mut rng, 3.0);
        match phi_hat(&s, &w) {
            Ok(v) => worst = worst.max(-v),
            Err(err) => return CheckResult::aborted(name, tol, err),
        }
    }
    CheckResult::measured(name, n, worst.max(0.0), tol)
}

fn check_potential_convexity(seed: u64) -> CheckResult {
    let name = "potential: sampled convexity";
    let tol = 1e-10;
    let mut rng = rng_for(seed, 11);
    let mut worst = 0.0f64;
    let n = 1000;
    for i in 0..n {
        let mode = if i % 2 == 0 {
            ActivationMode::NegMax
        } else {
            ActivationMode::Abs
        };
        let w = random_potential_weights(&mut rng, mode);
        let a = random_symmetric(&mut rng, 2.0);
        let b = random_symmetric(&mut rng, 2.0);
        let (pa, pb) = match (phi_hat(&a, &w), phi_hat(&b, &w)) {
            (Ok(pa), Ok(pb)) => (pa, pb),
            _ => return CheckResult::aborted(name, tol, "potential evaluation failed"),
        };
        for t in [0.25, 0.5, 0.75] {
            let mix = a.scale(t) + b.scale(1.0 - t);
            let pm = match phi_hat(&mix, &w) {
                Ok(pm) => pm,
                Err(err) => return CheckResult::aborted(name, tol, err),
            };
            worst = worst.max(pm - (t * pa + (1.0 - t) * pb));
        }
    }
    CheckResult::measured(name, n, worst.max(0.0), tol)
}

fn check_potential_dissipation(seed: u64) -> CheckResult {
    let name = "potential: flow contraction bounds phi";
    let tol = 1e-10;
    let mut rng = rng_for(seed, 12);
    let mut worst = 0.0f64;
    let n = 10_000;
    for i in 0..n {
        let mode = if i % 2 == 0 {
            ActivationMode::NegMax
        } else {
            ActivationMode::Abs
        };
        let w = random_potential_weights(&mut rng, mode);
        let s = random_stress_off_kinks(&mut rng);
        let (d, p) = match (dphihat_dsigma(&s, &w), phi_hat(&s, &w)) {
            (Ok(d), Ok(p)) => (d, p),
            _ => return CheckResult::aborted(name, tol, "potential evaluation failed"),
        };
        worst = worst.max(p - d.dot(&s));
    }
    CheckResult::measured(name, n, worst.max(0.0), tol)
}

fn check_potential_isotropy(seed: u64) -> CheckResult {
    let name = "potential: phi invariant under rotations";
    let tol = 1e-10;
    let mut rng = rng_for(seed, 13);
    let mut worst = 0.0f64;
    let n = 200;
    for i in 0..n {
        let mode = if i % 2 == 0 {
            ActivationMode::NegMax
        } else {
            ActivationMode::Abs
        };
        let w = random_potential_weights(&mut rng, mode);
        let s = random_symmetric(&mut rng, 2.0);
        let q = random_rotation(&mut rng);
        let rot = rotate_sym(&q, &s);
        match (phi_hat(&s, &w), phi_hat(&rot, &w)) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b).abs() / a.abs().max(1.0)),
            _ => return CheckResult::aborted(name, tol, "potential evaluation failed"),
        }
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_potential_shear_degeneracy(seed: u64) -> CheckResult {
    // Shears are non-negative, so the compression gate never fires on the
    // tau family and in ABS mode the abs neuron equals the tension gate:
    // moving weight between wt1-as-abs and wt4 must not change the value.
    let name = "potential: shear family degeneracies";
    let tol = 1e-14;
    let mut rng = rng_for(seed, 14);
    let mut worst = 0.0f64;
    let n = 500;
    for _ in 0..n {
        let mut w = random_potential_weights(&mut rng, ActivationMode::Abs);
        let s = random_symmetric(&mut rng, 2.0);
        let a = match phi_hat(&s, &w) {
            Ok(v) => v,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        let (wt1, wt4) = (w.wt1, w.wt4);
        w.wt1 = 0.0;
        w.wt4 = wt1 + wt4;
        let b = match phi_hat(&s, &w) {
            Ok(v) => v,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        worst = worst.max((a - b).abs() / a.abs().max(1.0));

        // NegMax: the tau compression gate contributes nothing.
        let mut wn = random_potential_weights(&mut rng, ActivationMode::NegMax);
        let base = {
            wn.wt1 = 0.0;
            match phi_hat(&s, &wn) {
                Ok(v) => v,
                Err(err) => return CheckResult::aborted(name, tol, err),
            }
        };
        wn.wt1 = rng.gen_range(0.0..10.0);
        let gated = match phi_hat(&s, &wn) {
            Ok(v) => v,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        worst = worst.max((gated - base).abs() / base.abs().max(1.0));
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_potential_trace_free_shears(seed: u64) -> CheckResult {
    let name = "potential: shear-only flow is trace-free";
    let tol = 1e-13;
    let mut rng = rng_for(seed, 15);
    let mut worst = 0.0f64;
    let n = 500;
    for _ in 0..n {
        let mut w = random_potential_weights(&mut rng, ActivationMode::NegMax);
        w.ws1 = 0.0;
        w.ws2 = 0.0;
        w.ws4 = 0.0;
        let s = random_symmetric(&mut rng, 2.0);
        let d = match dphihat_dsigma(&s, &w) {
            Ok(d) => d,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        worst = worst.max(d.tr().abs() / d.norm().max(1e-6));
    }
    CheckResult::measured(name, n, worst, tol)
}

// ---- material point checks ----

fn stripe_run(hours: f64, dt: f64) -> Result<crate::point::Trajectory> {
    let (ew, pw) = stripe_l2();
    let p = LoadingProtocol::stepped(&[(hours, [1.0; 3])], dt, ALL_MEASURED)?;
    point::simulate(&p, &ew, &pw, point::DEFAULT_EPS)
}

fn check_residual_satisfaction(_seed: u64) -> CheckResult {
    let name = "point: residual below eps at every accepted step";
    let tol = point::DEFAULT_EPS;
    let traj = match stripe_run(17.0, 0.1) {
        Ok(t) => t,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let (_, pw) = stripe_l2();
    let mut worst = 0.0f64;
    for st in traj.steps.iter().skip(1) {
        worst = worst.max(st.residual.abs());
        // Reported quantities must reproduce the residual they solved.
        worst = worst.max((st.phi_hat_value - 1.0 - st.gamma_hat * pw.weta).abs());
    }
    CheckResult::measured(name, traj.steps.len() - 1, worst, tol)
}

fn check_spd_preservation(_seed: u64) -> CheckResult {
    let name = "point: growth tensor stays SPD";
    let tol = 0.0;
    let traj = match stripe_run(17.0, 0.1) {
        Ok(t) => t,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let mut worst = f64::NEG_INFINITY;
    for st in &traj.states {
        let lam = match st.cg.eig_sym() {
            Ok(s) => s.lam,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        let min = lam.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(-min);
    }
    CheckResult::measured(name, traj.states.len(), worst.max(0.0), tol)
}

fn check_det_preservation(_seed: u64) -> CheckResult {
    let name = "point: shear-only flow preserves det(Cg)";
    let tol = 1e-12;
    let (ew, mut pw) = stripe_l2();
    pw.ws1 = 0.0;
    pw.ws2 = 0.0;
    pw.ws4 = 0.0;
    pw.wt4 = 0.2;
    let p = match LoadingProtocol::stepped(&[(12.0, [1.1, 0.95, 1.0])], 0.1, ALL_MEASURED) {
        Ok(p) => p,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let traj = match point::simulate(&p, &ew, &pw, point::DEFAULT_EPS) {
        Ok(t) => t,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let mut worst = 0.0f64;
    for st in &traj.states {
        worst = worst.max((st.cg.det() - 1.0).abs());
    }
    CheckResult::measured(name, traj.states.len(), worst, tol)
}

fn check_steady_state(_seed: u64) -> CheckResult {
    // Stress rises monotonically under a constant deformation and the
    // trajectory settles on the surface: terminal |phi - 1| < 1e-6 and the
    // terminal multiplier at least 1e4 below its peak.
    let name = "point: homeostasis reached under constant C";
    let tol = 0.0;
    let traj = match stripe_run(40.0, 0.1) {
        Ok(t) => t,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let mut worst = 0.0f64;
    for w in traj.steps.windows(2) {
        worst = worst.max(w[0].s_reported.a11 - w[1].s_reported.a11 - 1e-12);
    }
    let peak = traj
        .steps
        .iter()
        .map(|s| s.gamma_hat.abs())
        .fold(0.0, f64::max);
    let last = traj.steps.last().unwrap();
    worst = worst.max(last.gamma_hat.abs() - 1e-4 * peak);
    worst = worst.max((last.phi_hat_value - 1.0).abs() - 1e-6);
    CheckResult::measured(name, traj.steps.len() - 1, worst.max(0.0), tol)
}

fn check_rate_independent_limit(_seed: u64) -> CheckResult {
    let name = "point: weta = 0 enforces the surface exactly";
    let tol = point::DEFAULT_EPS;
    let (ew, mut pw) = stripe_l2();
    pw.weta = 0.0;
    let p = match LoadingProtocol::stepped(
        &[(0.5, [1.0; 3]), (4.0, [1.1, 0.95, 1.02])],
        0.1,
        ALL_MEASURED,
    ) {
        Ok(p) => p,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let traj = match point::simulate(&p, &ew, &pw, point::DEFAULT_EPS) {
        Ok(t) => t,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let mut worst = 0.0f64;
    // Rows after the load step carry phi = 1; the identity hold before it
    // has phi < 1 and no growth (inside the surface nothing evolves).
    for st in traj.steps.iter().skip(1) {
        if st.gamma_hat != 0.0 {
            worst = worst.max((st.phi_hat_value - 1.0).abs());
        }
    }
    CheckResult::measured(name, traj.steps.len() - 1, worst, tol)
}

fn check_dissipation_sign(_seed: u64) -> CheckResult {
    // sigma : Dg = gamma (sigma : flow) and sigma : flow >= phi ~ 1 at the
    // accepted states, so the contraction carries the multiplier's sign.
    let name = "point: growth dissipation carries the multiplier sign";
    let tol = 1e-10;
    let (_, pw) = stripe_l2();
    let traj = match stripe_run(17.0, 0.1) {
        Ok(t) => t,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let mut worst = 0.0f64;
    let mut samples = 0;
    for st in traj.steps.iter().skip(1) {
        if st.gamma_hat == 0.0 {
            continue;
        }
        let flow = match dphihat_dsigma(&st.sigma_bar, &pw) {
            Ok(f) => f,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        let power = st.gamma_hat * flow.dot(&st.sigma_bar);
        // Violation when the sign differs from gamma's.
        worst = worst.max(-power.signum() * st.gamma_hat.signum() * power.abs().min(1.0));
        samples += 1;
    }
    CheckResult::measured(name, samples, worst.max(0.0), tol)
}

// ---- discovery checks ----

fn small_dataset(eps: f64) -> Result<Dataset> {
    let (ew, pw) = stripe_l2();
    let p = LoadingProtocol::stepped(
        &[(0.2, [1.0; 3]), (0.6, [0.99505347, 1.0, 1.0])],
        0.1,
        [
            DirectionConstraint::Measured,
            DirectionConstraint::ZeroStress,
            DirectionConstraint::ZeroStress,
        ],
    )?;
    Ok(Dataset {
        experiments: vec![synthetic_experiment(&p, &ew, &pw, eps)?],
    })
}

fn check_data_loss_definiteness(_seed: u64) -> CheckResult {
    let name = "discovery: data loss zero iff predictions match";
    let tol = 0.0;
    let (ew, pw) = stripe_l2();
    let mut ds = match small_dataset(1e-10) {
        Ok(d) => d,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let exact = match data_loss(&ew, &pw, &ds, 1e-10) {
        Ok(v) => v,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    for row in &mut ds.experiments[0].measured {
        row[0] += 0.05;
    }
    let shifted = match data_loss(&ew, &pw, &ds, 1e-10) {
        Ok(v) => v,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let mut worst = exact.abs();
    // Nonzero mismatch must produce a strictly positive loss.
    worst = worst.max(if shifted > 0.0 { 0.0 } else { 1.0 });
    worst = worst.max(-shifted);
    CheckResult::measured(name, 2, worst, tol)
}

fn check_penalty_mask(seed: u64) -> CheckResult {
    let name = "discovery: penalty ignores free weights";
    let tol = 0.0;
    let mut rng = rng_for(seed, 16);
    let mut worst = 0.0f64;
    let n = 50;
    for _ in 0..n {
        let (mut ew, mut pw) = stripe_l2();
        for mode in [RegMode::L1, RegMode::L2] {
            let cfg = TrainConfig::with_reg(mode, 1);
            let before = penalty(&ew, &pw, &cfg);
            ew.w01 += rng.gen_range(-1.0..1.0);
            ew.w11 += rng.gen_range(-1.0..1.0);
            pw.ws3 += rng.gen_range(0.0..1.0);
            pw.wt3 += rng.gen_range(0.0..1.0);
            worst = worst.max((penalty(&ew, &pw, &cfg) - before).abs());
        }
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_gradient_agreement(seed: u64) -> CheckResult {
    let name = "discovery: forward AD matches finite differences";
    let tol = 1e-4;
    let mut rng = rng_for(seed, 17);
    let ds = match small_dataset(1e-13) {
        Ok(d) => d,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let mut worst = 0.0f64;
    let n = 10;
    for trial in 0..n {
        let mut theta = [0.0; N_WEIGHTS];
        for (k, t) in theta.iter_mut().enumerate() {
            *t = if k == 2 {
                rng.gen_range(0.5..1.5)
            } else {
                rng.gen_range(0.05..0.5)
            };
        }
        let mut cfg = TrainConfig::with_reg(RegMode::L2, 1);
        // The Newton stopping tolerance bounds how precisely the accepted
        // multiplier tracks the exact root; finite differences divide that
        // noise by the probe step, so the solve runs extra tight here.
        cfg.eps = 1e-13;
        cfg.activation_mode = if trial % 2 == 0 {
            ActivationMode::NegMax
        } else {
            ActivationMode::Abs
        };
        cfg.gradient_mode = GradientMode::ForwardAd;
        let ad = match gradient(&theta, &ds, &cfg) {
            Ok(g) => g,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        cfg.gradient_mode = GradientMode::FiniteDiff;
        let fd = match gradient(&theta, &ds, &cfg) {
            Ok(g) => g,
            Err(err) => return CheckResult::aborted(name, tol, err),
        };
        // Component errors are measured against the gradient's sup norm:
        // near-zero components sit at the cancellation noise floor of the
        // central difference and carry no directional information.
        let mut scale = 1e-6f64;
        for k in 0..N_WEIGHTS {
            scale = scale.max(ad[k].abs()).max(fd[k].abs());
        }
        for k in 0..N_WEIGHTS {
            worst = worst.max((ad[k] - fd[k]).abs() / scale);
        }
    }
    CheckResult::measured(name, n, worst, tol)
}

fn check_reparameterization(seed: u64) -> CheckResult {
    let name = "discovery: constrained weights stay non-negative";
    let tol = 0.0;
    let mut rng = rng_for(seed, 18);
    let mut worst = 0.0f64;
    let n = 200;
    let mut theta = [0.3; N_WEIGHTS];
    let mut adam = AdamState::<N_WEIGHTS>::new();
    for _ in 0..n {
        let mut g = [0.0; N_WEIGHTS];
        for gk in g.iter_mut() {
            *gk = rng.gen_range(-5.0..5.0);
        }
        adam_step(&mut theta, &g, &mut adam, 0.05);
        let (ew, pw) = constrain(&theta, ActivationMode::NegMax);
        for w in [
            ew.w01, ew.w02, ew.w12, pw.ws1, pw.ws2, pw.ws3, pw.ws4, pw.wt1, pw.wt2, pw.wt3,
            pw.wt4, pw.weta,
        ] {
            worst = worst.max(-w);
        }
    }
    CheckResult::measured(name, n, worst.max(0.0), tol)
}

fn check_training_determinism(_seed: u64) -> CheckResult {
    let name = "discovery: training is bit-deterministic";
    let tol = 0.0;
    let ds = match small_dataset(1e-10) {
        Ok(d) => d,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let mut cfg = TrainConfig::with_reg(RegMode::L2, 3);
    cfg.seed = 123;
    let (a, b) = match (discover::train(&ds, &cfg), discover::train(&ds, &cfg)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return CheckResult::aborted(name, tol, "training failed"),
    };
    let mut worst = 0.0f64;
    for (ra, rb) in a.report.rows.iter().zip(&b.report.rows) {
        if ra.total.to_bits() != rb.total.to_bits() {
            worst = 1.0;
        }
    }
    for k in 0..N_WEIGHTS {
        if a.theta[k].to_bits() != b.theta[k].to_bits() {
            worst = 1.0;
        }
    }
    CheckResult::measured(name, a.report.rows.len(), worst, tol)
}

// ---- io checks ----

fn scratch_path(tag: &str) -> std::path::PathBuf {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    std::env::temp_dir().join(format!("homeostat-verify-{}-{}-{tag}", std::process::id(), nanos))
}

fn check_trajectory_roundtrip(_seed: u64) -> CheckResult {
    let name = "io: trajectory table round-trips";
    let tol = 1e-12;
    let traj = match stripe_run(1.0, 0.1) {
        Ok(t) => t,
        Err(err) => return CheckResult::aborted(name, tol, err),
    };
    let path = scratch_path("traj.csv");
    let result = (|| -> Result<f64> {
        io::write_trajectory_csv(&path, &traj)?;
        let rows = io::read_trajectory_csv(&path)?;
        let mut worst = 0.0f64;
        for (n, row) in rows.iter().enumerate() {
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(rel(row.time_h, traj.times[n]));
            worst = worst.max(rel(row.s_pred[0], traj.steps[n].s_reported.a11));
            worst = worst.max(rel(row.gamma_hat, traj.steps[n].gamma_hat));
            worst = worst.max(rel(row.phi_hat, traj.steps[n].phi_hat_value));
            worst = worst.max(rel(row.det_cg, traj.states[n].cg.det()));
        }
        Ok(worst)
    })();
    let _ = std::fs::remove_file(&path);
    match result {
        Ok(worst) => CheckResult::measured(name, traj.times.len(), worst, tol),
        Err(err) => CheckResult::aborted(name, tol, err),
    }
}

fn check_weights_roundtrip(seed: u64) -> CheckResult {
    let name = "io: weight document round-trips losslessly";
    let tol = 0.0;
    let mut rng = rng_for(seed, 19);
    let path = scratch_path("w.toml");
    let mut worst = 0.0f64;
    let n = 20;
    for i in 0..n {
        let ew = random_energy_weights(&mut rng);
        let mut pw = random_potential_weights(
            &mut rng,
            if i % 2 == 0 {
                ActivationMode::NegMax
            } else {
                ActivationMode::Abs
            },
        );
        pw.ws3 = rng.gen_range(0.0..1e-6);
        let result = (|| -> Result<f64> {
            io::write_weights_toml(&path, &ew, &pw)?;
            let (ew2, pw2) = io::read_weights_toml(&path)?;
            let mut v = 0.0f64;
            for (a, b) in [
                (ew.w01, ew2.w01),
                (ew.w02, ew2.w02),
                (ew.w11, ew2.w11),
                (ew.w12, ew2.w12),
                (pw.ws1, pw2.ws1),
                (pw.ws2, pw2.ws2),
                (pw.ws3, pw2.ws3),
                (pw.ws4, pw2.ws4),
                (pw.wt1, pw2.wt1),
                (pw.wt2, pw2.wt2),
                (pw.wt3, pw2.wt3),
                (pw.wt4, pw2.wt4),
                (pw.weta, pw2.weta),
            ] {
                if a.to_bits() != b.to_bits() {
                    v = 1.0;
                }
            }
            if pw2.mode != pw.mode {
                v = 1.0;
            }
            Ok(v)
        })();
        match result {
            Ok(v) => worst = worst.max(v),
            Err(err) => {
                let _ = std::fs::remove_file(&path);
                return CheckResult::aborted(name, tol, err);
            }
        }
    }
    let _ = std::fs::remove_file(&path);
    CheckResult::measured(name, n, worst, tol)
}

fn check_simulation_determinism(_seed: u64) -> CheckResult {
    let name = "io: repeated runs are bit-identical";
    let tol = 0.0;
    let (a, b) = match (stripe_run(2.0, 0.1), stripe_run(2.0, 0.1)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return CheckResult::aborted(name, tol, "simulation failed"),
    };
    let mut worst = 0.0f64;
    for n in 0..a.steps.len() {
        if a.steps[n].s_reported.a11.to_bits() != b.steps[n].s_reported.a11.to_bits()
            || a.steps[n].gamma_hat.to_bits() != b.steps[n].gamma_hat.to_bits()
        {
            worst = 1.0;
        }
    }
    CheckResult::measured(name, a.steps.len(), worst, tol)
}

/// Run every check with sub-seeds derived from `seed`.
pub fn run_suite(seed: u64) -> VerifyReport {
    let checks = vec![
        check_exp_det(seed),
        check_exp_inverse(seed),
        check_sqrt_squares_back(seed),
        check_eig_characteristic(seed),
        check_energy_normalization(seed),
        check_energy_isotropy(seed),
        check_energy_volumetric_divergence(seed),
        check_energy_derivative_fd(seed),
        check_energy_hessian_moduli(seed),
        check_potential_nonnegative(seed),
        check_potential_convexity(seed),
        check_potential_dissipation(seed),
        check_potential_isotropy(seed),
        check_potential_shear_degeneracy(seed),
        check_potential_trace_free_shears(seed),
        check_residual_satisfaction(seed),
        check_spd_preservation(seed),
        check_det_preservation(seed),
        check_steady_state(seed),
        check_rate_independent_limit(seed),
        check_dissipation_sign(seed),
        check_data_loss_definiteness(seed),
        check_penalty_mask(seed),
        check_gradient_agreement(seed),
        check_reparameterization(seed),
        check_training_determinism(seed),
        check_trajectory_roundtrip(seed),
        check_weights_roundtrip(seed),
        check_simulation_determinism(seed),
    ];
    VerifyReport { seed, checks }
}
