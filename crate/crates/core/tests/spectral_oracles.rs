//! Independent reference implementations for the spectral tensor functions:
//! a scaling-and-squaring Taylor exponential and the Denman-Beavers square
//! root iteration, neither of which shares code with the eigendecomposition
//! path under test.

use homeostat_core::SymTensor3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type M3 = [[f64; 3]; 3];

fn mul(a: &M3, b: &M3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                m[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    m
}

fn add_scaled(a: &M3, b: &M3, s: f64) -> M3 {
    let mut m = *a;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += s * b[i][j];
        }
    }
    m
}

fn identity() -> M3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn frob(a: &M3) -> f64 {
    let mut s = 0.0;
    for row in a {
        for v in row {
            s += v * v;
        }
    }
    s.sqrt()
}

fn diff(a: &M3, b: &M3) -> f64 {
    let mut m = *a;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] -= b[i][j];
        }
    }
    frob(&m)
}

/// General 3x3 inverse via the adjugate.
fn inv(a: &M3) -> M3 {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let r = [(i + 1) % 3, (i + 2) % 3];
            let s = [(j + 1) % 3, (j + 2) % 3];
            // Transposed cofactor: adjugate entry (j, i).
            c[j][i] = (a[r[0]][s[0]] * a[r[1]][s[1]] - a[r[0]][s[1]] * a[r[1]][s[0]]) / det;
        }
    }
    c
}

/// Matrix exponential by scaling and squaring over a truncated Taylor sum.
/// The term recurrence keeps b^k / k! incrementally, so the series stays
/// well-scaled after the argument is shrunk below norm 1/2.
fn taylor_exp(a: &M3) -> M3 {
    let norm = frob(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let mut b = *a;
    for row in &mut b {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    let mut sum = identity();
    let mut term = identity();
    for k in 1..=24 {
        term = mul(&term, &b);
        for row in &mut term {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        sum = add_scaled(&sum, &term, 1.0);
    }
    let mut e = sum;
    for _ in 0..squarings {
        e = mul(&e, &e);
    }
    e
}

fn random_sym(rng: &mut ChaCha8Rng, scale: f64) -> SymTensor3<f64> {
    SymTensor3::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

fn random_spd(rng: &mut ChaCha8Rng) -> SymTensor3<f64> {
    let a = random_sym(rng, 1.0);
    let f = a.to_full();
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                m[i][j] += f[i][k] * f[j][k];
            }
        }
        m[i][i] += 0.05;
    }
    SymTensor3::new(m[0][0], m[1][1], m[2][2], m[0][1], m[0][2], m[1][2])
}

#[test]
fn spectral_exp_matches_taylor_scaling_and_squaring() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..300 {
        let a = random_sym(&mut rng, 2.0);
        let spectral = a.exp_sym().unwrap().to_full();
        let taylor = taylor_exp(&a.to_full());
        let rel = diff(&spectral, &taylor) / frob(&taylor);
        assert!(rel < 1e-13, "exp mismatch {rel:e} on {a:?}");
    }
}

#[test]
fn spectral_sqrt_matches_denman_beavers() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..300 {
        let a = random_spd(&mut rng);
        let spectral = a.sqrt_spd().unwrap().to_full();
        // Denman-Beavers: Y -> (Y + Z^-1)/2, Z -> (Z + Y^-1)/2, Y -> sqrt(A).
        let mut y = a.to_full();
        let mut z = identity();
        for _ in 0..60 {
            let zi = inv(&z);
            let yi = inv(&y);
            let y_next = add_scaled(&{
                let mut h = y;
                for r in &mut h {
                    for v in r.iter_mut() {
                        *v *= 0.5;
                    }
                }
                h
            }, &zi, 0.5);
            let z_next = add_scaled(&{
                let mut h = z;
                for r in &mut h {
                    for v in r.iter_mut() {
                        *v *= 0.5;
                    }
                }
                h
            }, &yi, 0.5);
            if diff(&y_next, &y) < 1e-15 * frob(&y).max(1.0) {
                y = y_next;
                break;
            }
            y = y_next;
            z = z_next;
        }
        let rel = diff(&spectral, &y) / frob(&y);
        assert!(rel < 1e-11, "sqrt mismatch {rel:e} on {a:?}");
    }
}

#[test]
fn exp_collapses_to_scalar_exponentials_in_any_frame() {
    // exp applied to q diag(d) q^T equals q diag(exp d) q^T; built from a
    // Householder reflection so no eigensolver is involved in the oracle.
    let v: [f64; 3] = [0.6, -0.3, 0.74];
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let u = [v[0] / n, v[1] / n, v[2] / n];
    let mut q = identity();
    for i in 0..3 {
        for j in 0..3 {
            q[i][j] -= 2.0 * u[i] * u[j];
        }
    }
    let d = [0.7, -0.2, 1.3];
    let mut a = [[0.0; 3]; 3];
    let mut expect = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                a[i][j] += q[i][k] * d[k] * q[j][k];
                expect[i][j] += q[i][k] * d[k].exp() * q[j][k];
            }
        }
    }
    let sym = SymTensor3::new(a[0][0], a[1][1], a[2][2], a[0][1], a[0][2], a[1][2]);
    let got = sym.exp_sym().unwrap().to_full();
    assert!(diff(&got, &expect) < 1e-13 * frob(&expect));
}
