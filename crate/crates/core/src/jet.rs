//! Truncated Taylor series of degree 3, used to get closed-form derivatives of
//! composite potentials without finite differences.

use std::ops::{Add, Mul, Neg, Sub};

/// Coefficients `c[k]` of `Σ c_k h^k`; the k-th derivative is `k!·c[k]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [f64; 4]);

impl Jet {
    pub fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0])
    }

    /// The independent variable at `x`.
    pub fn var(x: f64) -> Self {
        Jet([x, 1.0, 0.0, 0.0])
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// Derivatives `[f, f', f'', f''']`.
    pub fn derivatives(&self) -> [f64; 4] {
        let c = self.0;
        [c[0], c[1], 2.0 * c[2], 6.0 * c[3]]
    }

    /// Compose an outer function given by its derivatives at `self.value()`.
    pub fn compose(&self, d: [f64; 4]) -> Jet {
        let [_, a1, a2, a3] = self.0;
        Jet([
            d[0],
            d[1] * a1,
            d[1] * a2 + 0.5 * d[2] * a1 * a1,
            d[1] * a3 + d[2] * a1 * a2 + d[3] * a1 * a1 * a1 / 6.0,
        ])
    }

    pub fn scale(self, c: f64) -> Jet {
        let a = self.0;
        Jet([c * a[0], c * a[1], c * a[2], c * a[3]])
    }

    pub fn recip(self) -> Jet {
        let v = self.0[0];
        let r = 1.0 / v;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn exp(self) -> Jet {
        let e = self.0[0].exp();
        self.compose([e, e, e, e])
    }

    /// `self^p` for a positive base.
    pub fn powf(self, p: f64) -> Jet {
        let v = self.0[0];
        let f = v.powf(p);
        self.compose([
            f,
            p * f / v,
            p * (p - 1.0) * f / (v * v),
            p * (p - 1.0) * (p - 2.0) * f / (v * v * v),
        ])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        Jet([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
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
        let (a, b) = (self.0, o.0);
        Jet([
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[1] * b[1] + a[2] * b[0],
            a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0],
        ])
    }
}
