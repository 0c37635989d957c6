//! Truncated bivariate Taylor jets.
//!
//! A [`Jet`] stores the coefficients of `s^a t^b` for `a, b <= 2`. Evaluating a
//! cost along `x(s) = x + s p`, `y(t) = y + t q` with jets yields every mixed
//! derivative up to `d^4 / ds^2 dt^2` exactly, up to rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed by the generic cost formulas.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    /// Composes a scalar function given its value and first four derivatives at `self.value()`.
    fn compose(&self, d: [f64; 5]) -> Self;
    fn scale(&self, k: f64) -> Self;

    fn sqrt(&self) -> Self {
        let a = self.value();
        let r = a.sqrt();
        self.compose([
            r,
            0.5 / r,
            -0.25 / (a * r),
            0.375 / (a * a * r),
            -0.9375 / (a * a * a * r),
        ])
    }

    fn ln(&self) -> Self {
        let a = self.value();
        self.compose([
            a.ln(),
            1.0 / a,
            -1.0 / (a * a),
            2.0 / (a * a * a),
            -6.0 / (a * a * a * a),
        ])
    }

    /// `self^e` for positive base.
    fn powf(&self, e: f64) -> Self {
        let a = self.value();
        let mut d = [0.0; 5];
        let mut coef = 1.0;
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = coef * a.powf(e - k as f64);
            coef *= e - k as f64;
        }
        self.compose(d)
    }

    /// `acos(z)^2`, analytic through `z = 1`.
    fn acos_sq(&self) -> Self {
        self.compose(acos_sq_derivs(self.value()))
    }

    /// `acosh(1 + delta)^2`, analytic through `delta = 0`.
    fn acosh1p_sq(&self) -> Self {
        self.compose(acosh1p_sq_derivs(self.value()))
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn compose(&self, d: [f64; 5]) -> Self {
        d[0]
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
    fn acos_sq(&self) -> Self {
        let z = *self;
        if 1.0 - z < 0.5 {
            acos_sq_series(1.0 - z)[0]
        } else {
            let a = z.clamp(-1.0, 1.0).acos();
            a * a
        }
    }
}

// h(1 - w) = 2 sum_k (2w)^k / (k^2 C(2k,k)), valid for |w| < 2.
// Returns value and derivatives with respect to w.
fn acos_sq_series(w: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    let mut binom = 1.0f64;
    for k in 1..=60usize {
        let kf = k as f64;
        binom *= (2.0 * kf) * (2.0 * kf - 1.0) / (kf * kf);
        let a = 2.0 * 2f64.powi(k as i32) / (kf * kf * binom);
        // d^m/dw^m of w^k
        let mut fall = 1.0;
        for (m, slot) in out.iter_mut().enumerate() {
            if m > k {
                break;
            }
            *slot += a * fall * w.powi((k - m) as i32);
            fall *= (k - m) as f64;
        }
        if a * w.abs().max(1e-300).powi(k as i32) < 1e-26 && k > 8 {
            break;
        }
    }
    out
}

pub(crate) fn acos_sq_derivs(z: f64) -> [f64; 5] {
    let w = 1.0 - z;
    if w.abs() < 0.5 {
        let s = acos_sq_series(w);
        // chain rule for w = 1 - z
        [s[0], -s[1], s[2], -s[3], s[4]]
    } else {
        let th = z.acos();
        let one = 1.0 - z * z;
        let h0 = th * th;
        let h1 = -2.0 * th / one.sqrt();
        let h2 = (2.0 + z * h1) / one;
        let h3 = (3.0 * z * h2 + h1) / one;
        let h4 = (5.0 * z * h3 + 4.0 * h2) / one;
        [h0, h1, h2, h3, h4]
    }
}

pub(crate) fn acosh1p_sq_derivs(delta: f64) -> [f64; 5] {
    if delta < 0.5 {
        // k(delta) = -series(-delta)
        let s = acos_sq_series(-delta);
        [-s[0], s[1], -s[2], s[3], -s[4]]
    } else {
        let u = 1.0 + delta;
        let one = u * u - 1.0;
        let ac = u.acosh();
        let y0 = ac * ac;
        let y1 = 2.0 * ac / one.sqrt();
        let y2 = (2.0 - u * y1) / one;
        let y3 = -(3.0 * u * y2 + y1) / one;
        let y4 = -(5.0 * u * y3 + 4.0 * y2) / one;
        [y0, y1, y2, y3, y4]
    }
}

/// Coefficients `c[a][b]` of `s^a t^b`, truncated at degree 2 in each variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [[f64; 3]; 3],
}

impl Jet {
    pub fn zero() -> Self {
        Jet { c: [[0.0; 3]; 3] }
    }
    /// `v + ds * s + dt * t`
    pub fn linear(v: f64, ds: f64, dt: f64) -> Self {
        let mut j = Jet::zero();
        j.c[0][0] = v;
        j.c[1][0] = ds;
        j.c[0][1] = dt;
        j
    }
    /// Mixed partial `d^a/ds^a d^b/dt^b` at the origin.
    pub fn partial(&self, a: usize, b: usize) -> f64 {
        const F: [f64; 3] = [1.0, 1.0, 2.0];
        self.c[a][b] * F[a] * F[b]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        for a in 0..3 {
            for b in 0..3 {
                self.c[a][b] += o.c[a][b];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, o: Jet) -> Jet {
        for a in 0..3 {
            for b in 0..3 {
                self.c[a][b] -= o.c[a][b];
            }
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut r = Jet::zero();
        for a1 in 0..3 {
            for b1 in 0..3 {
                let x = self.c[a1][b1];
                if x == 0.0 {
                    continue;
                }
                for a2 in 0..3 - a1 {
                    for b2 in 0..3 - b1 {
                        r.c[a1 + a2][b1 + b2] += x * o.c[a2][b2];
                    }
                }
            }
        }
        r
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let a = o.c[0][0];
        let inv = o.compose([
            1.0 / a,
            -1.0 / (a * a),
            2.0 / (a * a * a),
            -6.0 / (a * a * a * a),
            24.0 / (a * a * a * a * a),
        ]);
        self * inv
    }
}

impl Scalar for Jet {
    fn cst(v: f64) -> Self {
        let mut j = Jet::zero();
        j.c[0][0] = v;
        j
    }
    fn value(&self) -> f64 {
        self.c[0][0]
    }
    fn compose(&self, d: [f64; 5]) -> Self {
        // f(a0 + e) = sum_k f^(k)(a0)/k! e^k, e nilpotent of order 5
        let mut e = *self;
        e.c[0][0] = 0.0;
        let mut out = Jet::cst(d[0]);
        let mut pow = Jet::cst(1.0);
        let mut fact = 1.0;
        for (k, dk) in d.iter().enumerate().skip(1) {
            pow = pow * e;
            fact *= k as f64;
            out = out + pow.scale(dk / fact);
        }
        out
    }
    fn scale(&self, k: f64) -> Self {
        let mut r = *self;
        for row in r.c.iter_mut() {
            for v in row.iter_mut() {
                *v *= k;
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_matches_polynomial() {
        // (1 + s + t)^2 = 1 + 2s + 2t + s^2 + 2st + t^2
        let x = Jet::linear(1.0, 1.0, 1.0);
        let y = x * x;
        assert_eq!(y.c[0][0], 1.0);
        assert_eq!(y.c[1][1], 2.0);
        assert_eq!(y.c[2][0], 1.0);
        assert_eq!(y.c[2][2], 0.0);
    }

    #[test]
    fn sqrt_of_square_roundtrips() {
        let x = Jet::linear(2.0, 0.3, -0.7);
        let r = (x * x).sqrt();
        for a in 0..3 {
            for b in 0..3 {
                assert!((r.c[a][b] - x.c[a][b]).abs() < 1e-13, "{a}{b}");
            }
        }
    }

    #[test]
    fn acos_sq_series_and_closed_form_agree() {
        for &z in &[0.49, 0.5, 0.51, 0.6, 0.9] {
            let closed = {
                let th = f64::acos(z);
                let one = 1.0 - z * z;
                let h1 = -2.0 * th / one.sqrt();
                let h2 = (2.0 + z * h1) / one;
                [th * th, h1, h2]
            };
            let s = acos_sq_series(1.0 - z);
            assert!((s[0] - closed[0]).abs() < 1e-13);
            assert!((-s[1] - closed[1]).abs() < 1e-12);
            assert!((s[2] - closed[2]).abs() < 1e-11);
        }
    }

    #[test]
    fn acosh_branch_continuity() {
        let a = acosh1p_sq_derivs(0.4999999999);
        let b = acosh1p_sq_derivs(0.5);
        for k in 0..5 {
            assert!((a[k] - b[k]).abs() < 1e-7 * (1.0 + b[k].abs()), "k={k} {a:?} {b:?}");
        }
        assert!((acosh1p_sq_derivs(2.0)[0] - 3f64.acosh().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn mixed_partial_of_exp_like_product() {
        // f = ln(1 + s) * ln(1 + t): d^4/ds^2dt^2 at 0 = (-1)(-1) = 1
        let s = Jet::linear(1.0, 1.0, 0.0).ln();
        let t = Jet::linear(1.0, 0.0, 1.0).ln();
        let f = s * t;
        assert!((f.partial(2, 2) - 1.0).abs() < 1e-14);
        assert!((f.partial(1, 1) - 1.0).abs() < 1e-14);
        assert!((f.partial(2, 1) + 1.0).abs() < 1e-14);
    }
}
