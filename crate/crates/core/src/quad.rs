//! Globally adaptive Gauss–Kronrod (7/15) quadrature for scalar, complex and
//! matrix-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use crate::cmat::{CMat2, C64};
use crate::error::{OpoError, Result};

pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        C64::norm(*self)
    }
}

impl QuadValue for CMat2 {
    fn zero() -> Self {
        CMat2::zero()
    }
    fn norm(&self) -> f64 {
        self.max_abs()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-6,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: QuadValue> QuadResult<T> {
    /// Converts a non-converged result into `QuadratureFailure`.
    pub fn into_result(self) -> Result<T> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(OpoError::QuadratureFailure {
                value: self.value.norm(),
                error: self.error,
            })
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod = kronrod + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    let err = (kronrod - gauss).norm();
    (kronrod, err)
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`, optionally seeded with interior breakpoints.
pub fn integrate_with_breaks<T, F>(mut f: F, points: &[f64], opts: QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk15(&mut f, w[0], w[1]);
            evaluations += 15;
            heap.push(Segment {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    let total = |heap: &BinaryHeap<Segment<T>>| {
        heap.iter().fold((T::zero(), 0.0), |(v, e), s| (v + s.value, e + s.error))
    };
    loop {
        let (value, error) = total(&heap);
        let tol = opts.abs_tol.max(opts.rel_tol * value.norm());
        if error <= tol {
            return QuadResult {
                value,
                error,
                evaluations,
                converged: true,
            };
        }
        if heap.len() >= opts.max_intervals {
            return QuadResult {
                value,
                error,
                evaluations,
                converged: false,
            };
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval no longer divisible in floating point
            heap.push(worst);
            let (value, error) = total(&heap);
            return QuadResult {
                value,
                error,
                evaluations,
                converged: false,
            };
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&mut f, a, b);
            evaluations += 15;
            heap.push(Segment { a, b, value, error });
        }
    }
}

pub fn integrate<T, F>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_with_breaks(f, &[a, b], opts)
}

/// Integrates over the whole real line with the map `x = scale·t/(1−t²)`.
/// `scale` should be of the order of the integrand's feature width.
pub fn integrate_real_line<T, F>(mut f: F, scale: f64, opts: QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let g = move |t: f64| {
        let d = 1.0 - t * t;
        let x = scale * t / d;
        f(x) * (scale * (1.0 + t * t) / (d * d))
    };
    // breakpoints around the centre resolve narrow features at x≈0
    let inner = [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0];
    integrate_with_breaks(g, &inner, opts)
}
