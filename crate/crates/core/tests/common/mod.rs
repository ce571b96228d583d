//! Reference formulas written out by hand, independent of the library's
//! realization and evaluation code.
#![allow(dead_code)]

use kdv_core::dd::{Dd, PI};
use kdv_core::linalg::DenseMatrix;
use kdv_core::realization::{BoundState, ComplexPolePair, ImaginaryPole, PairCoefficient, ScatteringSpec, Triplet};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const S3: f64 = 1.732_050_807_568_877_2;

/// The 2×2 rotation example with `C = 2[γ, ε]`.
pub fn rotation_triplet(eps: f64, gamma: f64, eta: f64) -> Triplet {
    Triplet::new(
        DenseMatrix::from_rows(&[[0.5, -S3 / 2.0], [S3 / 2.0, 0.5]]).unwrap(),
        DenseMatrix::column(&[0.0, 1.0]).unwrap(),
        DenseMatrix::row(&[2.0 * gamma, 2.0 * eps]).unwrap(),
        eta,
    )
    .unwrap()
}

/// The rotation example with one soliton `(κ, c)` appended.
pub fn rotation_soliton_triplet(eps: f64, gamma: f64, eta: f64, kappa: f64, c: f64) -> Triplet {
    Triplet::new(
        DenseMatrix::from_rows(&[[0.5, -S3 / 2.0, 0.0], [S3 / 2.0, 0.5, 0.0], [0.0, 0.0, kappa]]).unwrap(),
        DenseMatrix::column(&[0.0, 1.0, 1.0]).unwrap(),
        DenseMatrix::row(&[2.0 * gamma, 2.0 * eps, c]).unwrap(),
        eta,
    )
    .unwrap()
}

/// Closed-form `det Γ(x;t)` for [`rotation_triplet`].
pub fn rotation_det(eps: f64, gamma: f64, eta: f64, x: f64, t: f64) -> f64 {
    let e = ((eta - 8.0) * t - x).exp();
    let phase = S3 * eta * t - S3 * x;
    1.0 - 0.75 * (eps * eps + gamma * gamma) * e * e
        + 0.5 * e * ((S3 * eps - gamma) * phase.sin() + (eps + S3 * gamma) * phase.cos())
}

/// Closed-form `u(x,t)` for [`rotation_triplet`] with `ε = γ = 1/2`, `η = 1`.
pub fn rotation_u(x: f64, t: f64) -> f64 {
    use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
    let s = x + 7.0 * t;
    let th = S3 * (x - t);
    let phi = 6.0 * (-2.0 * s).exp()
        - 4.0 * SQRT_2 * (-s).exp() * (th - PI / 12.0).sin()
        - 3.0 * FRAC_1_SQRT_2 * (-3.0 * s).exp() * (th + PI / 4.0).sin();
    let den = 1.0 - 0.375 * (-2.0 * s).exp() + FRAC_1_SQRT_2 * (-s).exp() * (th + PI / 12.0).cos();
    phi / (den * den)
}

/// [`rotation_u`] in double-double.
pub fn rotation_u_dd(x: Dd, t: Dd) -> Dd {
    let s3 = Dd::from(3.0).sqrt();
    let r2 = Dd::from(2.0).sqrt();
    let s = x + t * 7.0;
    let th = s3 * (x - t);
    let e1 = (-s).exp();
    let e2 = e1 * e1;
    let phi = e2 * 6.0 - r2 * 4.0 * e1 * (th - PI / 12.0).sin() - e2 * e1 * 3.0 / r2 * (th + PI / 4.0).sin();
    let den = Dd::ONE - e2 * 0.375 + e1 / r2 * (th + PI / 12.0).cos();
    phi / den.sqr()
}

/// `ΠR(k)` summed term by term from the pole data.
pub fn pi_r_direct(spec: &ScatteringSpec, k: f64) -> Complex64 {
    let k = Complex64::new(k, 0.0);
    let i = Complex64::i();
    let mut sum = Complex64::new(0.0, 0.0);
    for p in &spec.complex_poles {
        for (s, co) in p.coeffs.iter().enumerate() {
            let f = (-i).powu(s as u32 + 1);
            let right = k - i * p.beta - p.alpha;
            let left = k - i * p.beta + p.alpha;
            sum += f * Complex64::new(co.eps, co.gamma) / right.powu(s as u32 + 1);
            sum += f * Complex64::new(co.eps, -co.gamma) / left.powu(s as u32 + 1);
        }
    }
    for p in &spec.imaginary_poles {
        for (s, r) in p.r.iter().enumerate() {
            sum += (-i).powu(s as u32 + 1) * *r / (k - i * p.omega).powu(s as u32 + 1);
        }
    }
    sum
}

/// Laplace expansion along the first row.
pub fn cofactor_det(m: &DenseMatrix) -> f64 {
    let n = m.rows();
    if n == 1 {
        return m[(0, 0)];
    }
    (0..n)
        .map(|j| {
            let rows: Vec<Vec<f64>> = (1..n)
                .map(|r| (0..n).filter(|&c| c != j).map(|c| m[(r, c)]).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[(0, j)] * cofactor_det(&DenseMatrix::from_rows(&rows).unwrap())
        })
        .sum()
}

/// Distinct bound states with `κ` spread over `[lo, hi]`.
pub fn random_bound_states(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<BoundState> {
    let width = (hi - lo) / n as f64;
    (0..n)
        .map(|j| BoundState {
            kappa: lo + width * (j as f64 + rng.gen_range(0.1..0.9)),
            c: rng.gen_range(0.5..3.0),
        })
        .collect()
}

/// Random pole data: up to `max_pairs` pole pairs, `max_imaginary` imaginary
/// poles and `max_bound` bound states, multiplicities up to `max_mult`.
pub fn random_spec(
    rng: &mut ChaCha8Rng,
    max_pairs: usize,
    max_imaginary: usize,
    max_bound: usize,
    max_mult: usize,
    coeff: f64,
) -> ScatteringSpec {
    let pairs = rng.gen_range(0..=max_pairs);
    let imaginary = rng.gen_range(0..=max_imaginary);
    let bound = rng.gen_range(0..=max_bound);
    let complex_poles = (0..pairs)
        .map(|_| ComplexPolePair {
            alpha: rng.gen_range(0.2..1.2),
            beta: rng.gen_range(0.3..1.2),
            coeffs: (0..rng.gen_range(1..=max_mult))
                .map(|_| PairCoefficient {
                    eps: rng.gen_range(-coeff..coeff),
                    gamma: rng.gen_range(-coeff..coeff),
                })
                .collect(),
        })
        .collect();
    let imaginary_poles = (0..imaginary)
        .map(|j| ImaginaryPole {
            omega: 0.3 + 0.6 * (j as f64 + rng.gen_range(0.1..0.9)),
            r: (0..rng.gen_range(1..=max_mult))
                .map(|_| rng.gen_range(-coeff..coeff))
                .collect(),
        })
        .collect();
    ScatteringSpec {
        eta: rng.gen_range(0.0..2.0),
        complex_poles,
        imaginary_poles,
        bound_states: random_bound_states(rng, bound, 0.4, 1.6),
    }
}

/// `det(δ_jl + c_j·e^{θ_j}/(κ_j + κ_l))` summed over principal minors, each a
/// Cauchy determinant in closed form. Every term is positive, so there is no
/// cancellation however large the exponentials get.
pub fn soliton_det(bs: &[BoundState], eta: f64, x: f64, t: f64) -> f64 {
    let n = bs.len();
    let w: Vec<f64> = bs
        .iter()
        .map(|b| b.c * (-2.0 * b.kappa * x + 8.0 * b.kappa.powi(3) * t + 2.0 * eta * b.kappa * t).exp())
        .collect();
    (0u32..1 << n)
        .map(|mask| {
            let set: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
            let mut term = 1.0;
            for (a, &i) in set.iter().enumerate() {
                term *= w[i] / (2.0 * bs[i].kappa);
                for &j in &set[a + 1..] {
                    let (ki, kj) = (bs[i].kappa, bs[j].kappa);
                    term *= ((ki - kj) / (ki + kj)).powi(2);
                }
            }
            term
        })
        .sum()
}
