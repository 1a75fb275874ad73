//! 2×2 complex matrices in the (α, α†) basis.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Row-major 2×2 complex matrix. Entry names follow the field basis:
/// `aa`, `aad` (a a†), `ada` (a† a), `adad` (a† a†).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CMat2 {
    pub aa: C64,
    pub aad: C64,
    pub ada: C64,
    pub adad: C64,
}

impl CMat2 {
    pub const fn new(aa: C64, aad: C64, ada: C64, adad: C64) -> Self {
        Self { aa, aad, ada, adad }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::diag(c(1.0), c(1.0))
    }

    pub fn diag(a: C64, b: C64) -> Self {
        Self::new(a, C64::default(), C64::default(), b)
    }

    /// The exchange matrix [[0, 1], [1, 0]].
    pub fn swap() -> Self {
        Self::new(c(0.0), c(1.0), c(1.0), c(0.0))
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Self::new(c(m[0][0]), c(m[0][1]), c(m[1][0]), c(m[1][1]))
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.aa, self.ada, self.aad, self.adad)
    }

    /// `M + Mᵀ`.
    pub fn symmetrize(&self) -> Self {
        *self + self.transpose()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.aa * s, self.aad * s, self.ada * s, self.adad * s)
    }

    pub fn det(&self) -> C64 {
        self.aa * self.adad - self.aad * self.ada
    }

    pub fn mul_vec(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.aa * v[0] + self.aad * v[1],
            self.ada * v[0] + self.adad * v[1],
        ]
    }

    /// Quadratic form `vᵀ M v` (no conjugation).
    pub fn bilinear(&self, v: [C64; 2]) -> C64 {
        let mv = self.mul_vec(v);
        v[0] * mv[0] + v[1] * mv[1]
    }

    pub fn max_abs(&self) -> f64 {
        [self.aa, self.aad, self.ada, self.adad]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn entries(&self) -> [C64; 4] {
        [self.aa, self.aad, self.ada, self.adad]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entrywise absolute difference.
    pub fn dist(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }
}

impl Add for CMat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.aa + o.aa, self.aad + o.aad, self.ada + o.ada, self.adad + o.adad)
    }
}

impl AddAssign for CMat2 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for CMat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.aa - o.aa, self.aad - o.aad, self.ada - o.ada, self.adad - o.adad)
    }
}

impl Neg for CMat2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(c(-1.0))
    }
}

impl Mul for CMat2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.aa * o.aa + self.aad * o.ada,
            self.aa * o.aad + self.aad * o.adad,
            self.ada * o.aa + self.adad * o.ada,
            self.ada * o.aad + self.adad * o.adad,
        )
    }
}

impl Mul<C64> for CMat2 {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        self.scale(s)
    }
}

impl Mul<f64> for CMat2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(c(s))
    }
}

/// Quadrature weight vector θ = ½(e^{−iθ}, e^{iθ}).
pub fn theta_vec(theta: f64) -> [C64; 2] {
    [
        C64::from_polar(0.5, -theta),
        C64::from_polar(0.5, theta),
    ]
}
