//! Compressible Ogden-type Helmholtz energy with trainable exponents.
//!
//! The energy acts on the co-rotated elastic right Cauchy--Green tensor
//! `ce` and splits into a volumetric and an isochoric part,
//!
//! ```text
//! psi = w02 * (det(ce)^w01 - 1 - w01 * ln det(ce))
//!     + w12 * (mu1^w11 + mu2^w11 + mu3^w11 - 3),
//! ```
//!
//! where `mu_j = det(ce)^(-1/3) * lam_j` are the isochoric eigenvalues of
//! `ce`. Both terms vanish identically at `ce = I` (energy- and stress-free
//! reference state) and are non-negative for admissible weights: the
//! volumetric response is convex in `ln det`, and the isochoric sum is
//! bounded below by 3 through the AM--GM inequality.
//!
//! `w01 >= 0`, `w02 >= 0`, `w12 >= 0` keep the response polyconvex-compatible
//! and stress-free at the reference; the isochoric exponent `w11` is
//! deliberately sign-free (negative exponents swap which deformation mode
//! stiffens, and training may exploit that).

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{assemble, spec_t, SpecT, SymTensor3};

/// Weights of the energy: volumetric exponent/scale, isochoric
/// exponent/scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyWeights<T: Real = f64> {
    /// Volumetric exponent, >= 0.
    pub w01: T,
    /// Volumetric scale, >= 0 (stress units).
    pub w02: T,
    /// Isochoric exponent, sign-free.
    pub w11: T,
    /// Isochoric scale, >= 0 (stress units).
    pub w12: T,
}

impl EnergyWeights<f64> {
    pub fn new(w01: f64, w02: f64, w11: f64, w12: f64) -> Result<Self> {
        let w = EnergyWeights { w01, w02, w11, w12 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.w01, self.w02, self.w11, self.w12];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "energy weights must be finite".to_string(),
            ));
        }
        if self.w01 < 0.0 || self.w02 < 0.0 || self.w12 < 0.0 {
            return Err(Error::Domain(format!(
                "energy weights w01, w02, w12 must be non-negative (got {}, {}, {})",
                self.w01, self.w02, self.w12
            )));
        }
        Ok(())
    }

    pub fn lift<T: Real>(&self) -> EnergyWeights<T> {
        EnergyWeights {
            w01: T::from_f64(self.w01),
            w02: T::from_f64(self.w02),
            w11: T::from_f64(self.w11),
            w12: T::from_f64(self.w12),
        }
    }
}

/// Spectral quantities shared by the energy and its derivatives.
struct EnergyEig<T: Real> {
    spec: SpecT<T>,
    /// det(ce)^w01.
    jw: T,
    /// ln det(ce).
    log_j: T,
    /// Volumetric driving scalar A = w01 * w02 * (J^w01 - 1).
    a_vol: T,
    /// Isochoric eigen-responses e_i = mu_i^w11.
    e: [T; 3],
    /// Mean isochoric response.
    e_bar: T,
}

fn prepare<T: Real>(ce: &SymTensor3<T>, w: &EnergyWeights<T>) -> Result<EnergyEig<T>> {
    let spec = spec_t(ce)?;
    if spec.lam[2].re() <= 0.0 {
        return Err(Error::Domain(format!(
            "elastic tensor must be positive definite (smallest eigenvalue {:e})",
            spec.lam[2].re()
        )));
    }
    let j = spec.lam[0] * spec.lam[1] * spec.lam[2];
    let log_j = j.ln();
    let jw = j.powf(w.w01);
    let a_vol = w.w01 * w.w02 * (jw - T::one());
    let jm13 = j.powf(T::from_f64(-1.0 / 3.0));
    let e = [
        (jm13 * spec.lam[0]).powf(w.w11),
        (jm13 * spec.lam[1]).powf(w.w11),
        (jm13 * spec.lam[2]).powf(w.w11),
    ];
    let e_bar = (e[0] + e[1] + e[2]) / T::from_f64(3.0);
    Ok(EnergyEig {
        spec,
        jw,
        log_j,
        a_vol,
        e,
        e_bar,
    })
}

/// Helmholtz energy per unit reference volume.
///
/// Exactly zero at `ce = I` for any admissible weights.
pub fn psi<T: Real>(ce: &SymTensor3<T>, w: &EnergyWeights<T>) -> Result<T> {
    let d = prepare(ce, w)?;
    let vol = w.w02 * (d.jw - T::one() - w.w01 * d.log_j);
    let three = T::from_f64(3.0);
    let iso = w.w12 * (d.e[0] + d.e[1] + d.e[2] - three);
    Ok(vol + iso)
}

/// Per-eigenvalue derivative d psi/d lam_i = (A + B_i)/lam_i with
/// B_i = w11 * w12 * (e_i - e_bar).
fn dpsi_coeff<T: Real>(d: &EnergyEig<T>, w: &EnergyWeights<T>, i: usize) -> T {
    let b = w.w11 * w.w12 * (d.e[i] - d.e_bar);
    (d.a_vol + b) / d.spec.lam[i]
}

/// Derivative of the energy with respect to `ce` (symmetric tensor).
///
/// Exactly zero at `ce = I`: the reference state is stress-free.
pub fn dpsi_dce<T: Real>(ce: &SymTensor3<T>, w: &EnergyWeights<T>) -> Result<SymTensor3<T>> {
    let d = prepare(ce, w)?;
    let g = [
        dpsi_coeff(&d, w, 0),
        dpsi_coeff(&d, w, 1),
        dpsi_coeff(&d, w, 2),
    ];
    let ww = w.w11 * w.w11 * w.w12;
    Ok(assemble(&d.spec, g, |i, j| {
        if d.spec.grouped(i, j) {
            // Divided-difference limit of (d_i - d_j)/(lam_i - lam_j).
            let lm = (d.spec.lam[i] + d.spec.lam[j]) * T::from_f64(0.5);
            let em = (d.e[i] + d.e[j]) * T::from_f64(0.5);
            let bm = w.w11 * w.w12 * (em - d.e_bar);
            (ww * em - d.a_vol - bm) / (lm * lm)
        } else {
            (g[i] - g[j]) / (d.spec.lam[i] - d.spec.lam[j])
        }
    }))
}

/// Driving force of growth: 2 * ce * dpsi_dce, symmetric and coaxial with
/// `ce` by isotropy, assembled spectrally as sum 2 lam_i d_i P_i.
pub fn driving_force<T: Real>(ce: &SymTensor3<T>, w: &EnergyWeights<T>) -> Result<SymTensor3<T>> {
    let d = prepare(ce, w)?;
    let two = T::from_f64(2.0);
    let g = [
        two * d.spec.lam[0] * dpsi_coeff(&d, w, 0),
        two * d.spec.lam[1] * dpsi_coeff(&d, w, 1),
        two * d.spec.lam[2] * dpsi_coeff(&d, w, 2),
    ];
    let ww = w.w11 * w.w11 * w.w12;
    Ok(assemble(&d.spec, g, |i, j| {
        if d.spec.grouped(i, j) {
            // Limit of (2 lam_i d_i - 2 lam_j d_j)/(lam_i - lam_j).
            let lm = (d.spec.lam[i] + d.spec.lam[j]) * T::from_f64(0.5);
            let em = (d.e[i] + d.e[j]) * T::from_f64(0.5);
            two * ww * em / lm
        } else {
            (g[i] - g[j]) / (d.spec.lam[i] - d.spec.lam[j])
        }
    }))
}

/// Second Piola--Kirchhoff stress from total deformation `c` and growth
/// stretch `ug`: S = 2 ug^-1 (d psi/d ce) ug^-1 with ce = ug^-1 c ug^-1.
pub fn second_pk<T: Real>(
    c: &SymTensor3<T>,
    ug: &SymTensor3<T>,
    w: &EnergyWeights<T>,
) -> Result<SymTensor3<T>> {
    let ug_inv = ug.inv_spd()?;
    let ce = ug_inv.congruence(c);
    let dp = dpsi_dce(&ce, w)?;
    Ok(ug_inv.congruence(&dp).scale(T::from_f64(2.0)))
}

/// Small-strain moduli of the energy linearized at the reference state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moduli {
    /// Bulk modulus kappa = 4 * w02 * w01^2.
    pub kappa: f64,
    /// Shear modulus mu = 2 * w12 * w11^2.
    pub mu: f64,
    /// Young's modulus E = 9 kappa mu / (3 kappa + mu).
    pub young: f64,
    /// Poisson's ratio nu = (3 kappa - 2 mu) / (6 kappa + 2 mu).
    pub poisson: f64,
}

/// Linearized moduli; errors when the response is fully degenerate
/// (3 kappa + mu = 0, i.e. no stiffness in any mode).
pub fn moduli(w: &EnergyWeights<f64>) -> Result<Moduli> {
    w.validate()?;
    let kappa = 4.0 * w.w02 * w.w01 * w.w01;
    let mu = 2.0 * w.w12 * w.w11 * w.w11;
    let denom = 3.0 * kappa + mu;
    if denom <= 0.0 {
        return Err(Error::DegenerateModuli(format!(
            "3*kappa + mu = {denom:e}; both volumetric and isochoric responses vanish"
        )));
    }
    Ok(Moduli {
        kappa,
        mu,
        young: 9.0 * kappa * mu / denom,
        poisson: (3.0 * kappa - 2.0 * mu) / (2.0 * denom),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    /// Discovered stripe weights under quadratic regularization; used across
    /// the test suite as a realistic parameter point.
    pub(crate) fn stripe_l2() -> EnergyWeights<f64> {
        EnergyWeights::new(1.2036339, 0.07181329, 1.2016658, 0.3978735).unwrap()
    }

    fn random_spd(rng: &mut ChaCha8Rng, spread: f64) -> SymTensor3<f64> {
        let d = [
            1.0 + rng.gen_range(-spread..spread),
            1.0 + rng.gen_range(-spread..spread),
            1.0 + rng.gen_range(-spread..spread),
        ];
        let a = SymTensor3::new(
            d[0],
            d[1],
            d[2],
            rng.gen_range(-spread..spread) * 0.3,
            rng.gen_range(-spread..spread) * 0.3,
            rng.gen_range(-spread..spread) * 0.3,
        );
        // Symmetrized square keeps it SPD for moderate spread.
        a.congruence(&SymTensor3::identity())
    }

    fn random_weights(rng: &mut ChaCha8Rng) -> EnergyWeights<f64> {
        EnergyWeights::new(
            rng.gen_range(0.1..2.0),
            rng.gen_range(0.01..1.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.0..1.0),
        )
        .unwrap()
    }

    #[test]
    fn psi_is_exactly_zero_at_identity() {
        let id = SymTensor3::identity();
        assert_eq!(psi(&id, &stripe_l2()).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(psi(&id, &random_weights(&mut rng)).unwrap(), 0.0);
        }
    }

    #[test]
    fn psi_matches_frozen_reference_value() {
        // Independently evaluated with 30-digit arithmetic.
        let ce = SymTensor3::from_diag([4.0, 1.0, 1.0]);
        let v = psi(&ce, &stripe_l2()).unwrap();
        assert!(close(v, 0.66035644486637634, 1e-13));
    }

    #[test]
    fn psi_volumetric_closed_form() {
        // With w12 = 0 and ce = c*I: psi = w02 (c^(3 w01) - 1 - 3 w01 ln c).
        let w = EnergyWeights::new(1.2036339, 0.07181329, 1.2016658, 0.0).unwrap();
        let c: f64 = 1.3;
        let ce = SymTensor3::from_diag([c, c, c]);
        let v = psi(&ce, &w).unwrap();
        assert!(close(v, 0.045353730286601016, 1e-13));
        let closed = w.w02 * (c.powf(3.0 * w.w01) - 1.0 - 3.0 * w.w01 * c.ln());
        assert!(close(v, closed, 1e-13));
    }

    #[test]
    fn psi_rejects_non_spd() {
        let ce = SymTensor3::from_diag([1.0, -0.5, 1.0]);
        assert!(matches!(
            psi(&ce, &stripe_l2()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn psi_is_non_negative_for_admissible_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let ce = random_spd(&mut rng, 0.6);
            let w = random_weights(&mut rng);
            let v = psi(&ce, &w).unwrap();
            assert!(v >= -1e-14, "psi = {v} at {ce:?}");
        }
    }

    #[test]
    fn psi_grows_under_extreme_volume_change() {
        // Strong volumetric growth or shrinkage must be heavily penalized:
        // the power branch dominates expansion, the ln branch (linear in
        // |ln det|) dominates collapse, and both diverge monotonically.
        let w = stripe_l2();
        let vol = |c: f64| psi(&SymTensor3::from_diag([c, c, c]), &w).unwrap();
        assert!(vol(1e2) >= 1e3 * w.w02, "expansion side = {}", vol(1e2));
        assert!(vol(1e-2) >= 10.0 * w.w02, "collapse side = {}", vol(1e-2));
        assert!(vol(1e-4) > vol(1e-2));
        assert!(vol(1e4) > vol(1e2));
    }

    #[test]
    fn dpsi_is_exactly_zero_at_identity() {
        let d = dpsi_dce(&SymTensor3::identity(), &stripe_l2()).unwrap();
        assert_eq!(d, SymTensor3::zero());
    }

    #[test]
    fn dpsi_matches_closed_form_at_diagonal_point() {
        // Frozen from an independent 40-digit finite-difference evaluation.
        let ce = SymTensor3::from_diag([1.21, 0.81, 1.0]);
        let d = dpsi_dce(&ce, &stripe_l2()).unwrap();
        assert!(close(d.a11, 0.096352637508444388, 1e-12));
        assert!(close(d.a22, -0.14234763546683692, 1e-12));
        assert!(close(d.a33, -0.0074835471365313733, 1e-12));
        assert_eq!(d.a12, 0.0);
    }

    #[test]
    fn dpsi_matches_finite_differences_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let ce = random_spd(&mut rng, 0.5);
            let w = random_weights(&mut rng);
            let d = dpsi_dce(&ce, &w).unwrap();
            let h = 1e-6;
            // Perturb each stored component; off-diagonal slots move the
            // (i,j) and (j,i) tensor entries together, hence the factor 2.
            let comps: [(fn(&mut SymTensor3<f64>) -> &mut f64, f64, f64); 6] = [
                (|t| &mut t.a11, d.a11, 1.0),
                (|t| &mut t.a22, d.a22, 1.0),
                (|t| &mut t.a33, d.a33, 1.0),
                (|t| &mut t.a12, d.a12, 2.0),
                (|t| &mut t.a13, d.a13, 2.0),
                (|t| &mut t.a23, d.a23, 2.0),
            ];
            for (get, analytic, factor) in comps {
                let mut cp = ce;
                *get(&mut cp) += h;
                let mut cm = ce;
                *get(&mut cm) -= h;
                let fd = (psi(&cp, &w).unwrap() - psi(&cm, &w).unwrap()) / (2.0 * h);
                let expect = factor * analytic;
                assert!(
                    (fd - expect).abs() <= 1e-6 * expect.abs().max(1e-3),
                    "fd {fd} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn driving_force_is_coaxial_with_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let ce = random_spd(&mut rng, 0.5);
            let w = random_weights(&mut rng);
            let s = driving_force(&ce, &w).unwrap();
            // Commutator of coaxial tensors vanishes.
            let a = ce.to_full();
            let b = s.to_full();
            for i in 0..3 {
                for j in 0..3 {
                    let mut ab = 0.0;
                    let mut ba = 0.0;
                    for k in 0..3 {
                        ab += a[i][k] * b[k][j];
                        ba += b[i][k] * a[k][j];
                    }
                    assert!((ab - ba).abs() < 1e-10 * s.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn driving_force_equals_two_ce_dpsi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let ce = random_spd(&mut rng, 0.5);
            let w = random_weights(&mut rng);
            let s = driving_force(&ce, &w).unwrap();
            let dp = dpsi_dce(&ce, &w).unwrap();
            let a = ce.to_full();
            let b = dp.to_full();
            let mut prod = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        prod[i][j] += 2.0 * a[i][k] * b[k][j];
                    }
                }
            }
            assert!((s.a11 - prod[0][0]).abs() < 1e-11 * s.norm().max(1.0));
            assert!((s.a22 - prod[1][1]).abs() < 1e-11 * s.norm().max(1.0));
            assert!((s.a33 - prod[2][2]).abs() < 1e-11 * s.norm().max(1.0));
            assert!((s.a12 - 0.5 * (prod[0][1] + prod[1][0])).abs() < 1e-11 * s.norm().max(1.0));
        }
    }

    #[test]
    fn second_pk_vanishes_when_elastically_relaxed() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let ug = random_spd(&mut rng, 0.3).sqrt_spd().unwrap();
            let c = ug.congruence(&SymTensor3::identity());
            // c = ug^2, so ce = I and the stress must vanish.
            let s = second_pk(&c, &ug, &stripe_l2()).unwrap();
            assert!(s.norm() < 1e-10);
        }
    }

    #[test]
    fn second_pk_tension_under_stretch() {
        let c = SymTensor3::from_diag([1.0037114f64.powi(2), 1.0, 1.0]);
        let s = second_pk(&c, &SymTensor3::identity(), &stripe_l2()).unwrap();
        assert!(s.a11 > 0.0);
    }

    #[test]
    fn moduli_match_frozen_reference() {
        let m = moduli(&stripe_l2()).unwrap();
        assert!(close(m.kappa, 0.4161535818633167, 1e-13));
        assert!(close(m.mu, 1.1490592209563464, 1e-13));
        assert!(close(m.young, 1.7950490737168164, 1e-13));
        assert!(close(m.poisson, -0.21890489150645278, 1e-13));
        // Published rounded values.
        assert!((m.young - 1.79504).abs() < 1e-3);
        assert!((m.poisson - (-0.2189)).abs() < 1e-3);
    }

    #[test]
    fn moduli_degenerate_without_any_stiffness() {
        let w = EnergyWeights::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(moduli(&w), Err(Error::DegenerateModuli(_))));
    }

    #[test]
    fn moduli_shear_free_material() {
        // Vanishing isochoric scale gives mu = 0, E = 0, nu = 1/2.
        let w = EnergyWeights::new(1.6990947, 0.10240719, -3.5541244, 0.0).unwrap();
        let m = moduli(&w).unwrap();
        assert_eq!(m.mu, 0.0);
        assert_eq!(m.young, 0.0);
        assert!(close(m.poisson, 0.5, 1e-15));
    }

    #[test]
    fn hessian_in_stretches_matches_moduli() {
        // d^2 psi / d xi_i d xi_j at xi = 1 equals kappa - 2mu/3 + 2mu delta_ij,
        // with ce = diag(xi_1^2, xi_2^2, xi_3^2).
        let w = stripe_l2();
        let m = moduli(&w).unwrap();
        let h = 1e-4;
        let f = |xi: [f64; 3]| {
            let ce = SymTensor3::from_diag([xi[0] * xi[0], xi[1] * xi[1], xi[2] * xi[2]]);
            psi(&ce, &w).unwrap()
        };
        for i in 0..3 {
            for j in 0..3 {
                let hess = if i == j {
                    let mut xp = [1.0; 3];
                    xp[i] += h;
                    let mut xm = [1.0; 3];
                    xm[i] -= h;
                    (f(xp) - 2.0 * f([1.0; 3]) + f(xm)) / (h * h)
                } else {
                    let mut xpp = [1.0; 3];
                    xpp[i] += h;
                    xpp[j] += h;
                    let mut xpm = [1.0; 3];
                    xpm[i] += h;
                    xpm[j] -= h;
                    let mut xmp = [1.0; 3];
                    xmp[i] -= h;
                    xmp[j] += h;
                    let mut xmm = [1.0; 3];
                    xmm[i] -= h;
                    xmm[j] -= h;
                    (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h * h)
                };
                let expect = m.kappa - 2.0 * m.mu / 3.0 + if i == j { 2.0 * m.mu } else { 0.0 };
                assert!(
                    close(hess, expect, 1e-4),
                    "hessian[{i}][{j}] = {hess}, expect {expect}"
                );
            }
        }
    }

    #[test]
    fn psi_is_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let ce = random_spd(&mut rng, 0.5);
            let w = random_weights(&mut rng);
            let q = random_rotation(&mut rng);
            let rot = rotate_sym(&q, &ce);
            let a = psi(&ce, &w).unwrap();
            let b = psi(&rot, &w).unwrap();
            assert!(close(b, a, 1e-10));
        }
    }

    /// Uniform random rotation from a normalized quaternion.
    pub(crate) fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
        let q: [f64; 4] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        let [w, x, y, z] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Q * a * Q^T for a rotation Q and symmetric a.
    pub(crate) fn rotate_sym(q: &[[f64; 3]; 3], a: &SymTensor3<f64>) -> SymTensor3<f64> {
        let af = a.to_full();
        let mut qa = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    qa[i][j] += q[i][k] * af[k][j];
                }
            }
        }
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    m[i][j] += qa[i][k] * q[j][k];
                }
            }
        }
        SymTensor3::new(
            m[0][0],
            m[1][1],
            m[2][2],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            0.5 * (m[1][2] + m[2][1]),
        )
    }
}
