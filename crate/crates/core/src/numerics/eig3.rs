//! Eigenvalues of a real 3×3 matrix from its characteristic cubic.
//!
//! Strategy: form `det(zI - M) = z³ + c₂z² + c₁z + c₀` from trace, principal
//! minors and determinant; shift to the depressed cubic `t³ + pt + q`; use the
//! trigonometric form when all roots are real and Cardano's formula (with the
//! cancellation-free choice of cube root) otherwise; finally polish every root
//! with one Newton step on the undepressed cubic, kept only if it lowers the
//! residual. Roots closer than `1e-6·(1 + max|z|)` are flagged because their
//! accuracy degrades to roughly the square root of machine precision.

use std::f64::consts::PI;

use nalgebra::Complex;

use super::Mat3;

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen3 {
    /// Sorted by decreasing modulus; complex roots appear as conjugate pairs.
    pub values: [C64; 3],
    pub spectral_radius: f64,
    /// Set when two roots nearly coincide.
    pub near_multiple: bool,
}

impl Eigen3 {
    /// Real eigenvalues (imaginary part exactly zero), in stored order.
    pub fn real_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .filter(|z| z.im == 0.0)
            .map(|z| z.re)
            .collect()
    }
}

/// Monic characteristic polynomial coefficients `[c₂, c₁, c₀]`.
pub fn char_poly(m: &Mat3) -> [f64; 3] {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    [-tr, minors, -m.determinant()]
}

pub fn eig3(m: &Mat3) -> Eigen3 {
    let [c2, c1, c0] = char_poly(m);
    let mut values = cubic_roots(c2, c1, c0);
    values.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    let spectral_radius = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = 1.0 + spectral_radius;
    let mut near_multiple = false;
    for i in 0..3 {
        for j in i + 1..3 {
            if (values[i] - values[j]).norm() < 1e-6 * scale {
                near_multiple = true;
            }
        }
    }
    Eigen3 {
        values,
        spectral_radius,
        near_multiple,
    }
}

/// Roots of `z³ + c₂z² + c₁z + c₀`.
pub fn cubic_roots(c2: f64, c1: f64, c0: f64) -> [C64; 3] {
    let shift = c2 / 3.0;
    let p = c1 - c2 * shift;
    let q = (2.0 * c2 * c2 * c2 / 27.0) - c2 * c1 / 3.0 + c0;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    let poly = |z: C64| ((z + c2) * z + c1) * z + c0;
    let dpoly = |z: C64| (z * 3.0 + 2.0 * c2) * z + c1;
    let polish = |z: C64| {
        let d = dpoly(z);
        if d.norm() == 0.0 {
            return z;
        }
        let cand = z - poly(z) / d;
        if poly(cand).norm() < poly(z).norm() {
            cand
        } else {
            z
        }
    };

    if disc <= 0.0 {
        // Three real roots (p ≤ 0).
        if third_p == 0.0 {
            let r = C64::new(-shift, 0.0);
            return [r, r, r];
        }
        let amp = 2.0 * (-third_p).sqrt();
        let cos_arg = (-half_q / (-third_p).powf(1.5)).clamp(-1.0, 1.0);
        let phi = cos_arg.acos();
        let mut roots = [C64::default(); 3];
        for (k, r) in roots.iter_mut().enumerate() {
            let t = amp * ((phi - 2.0 * PI * k as f64) / 3.0).cos();
            let z = polish(C64::new(t - shift, 0.0));
            *r = C64::new(z.re, 0.0);
        }
        roots
    } else {
        // One real root and a complex pair. Pick the cube root that avoids
        // cancellation, the other follows from u·v = -p/3.
        let sq = disc.sqrt();
        let u = (-half_q - half_q.signum() * sq).cbrt();
        let v = if u == 0.0 { 0.0 } else { -third_p / u };
        let real = polish(C64::new(u + v - shift, 0.0));
        let re = -0.5 * (u + v) - shift;
        let im = 0.5 * 3f64.sqrt() * (u - v).abs();
        let upper = polish(C64::new(re, im));
        [C64::new(real.re, 0.0), upper, upper.conj()]
    }
}
