//! Brute-force quadrature oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use opo_ng::cmat::{c, theta_vec, CMat2, C64};
use opo_ng::kurtosis::{filter_fourier, varsigma};
use opo_ng::linear::{green_freq, sigma11_spectrum, Mode};
use opo_ng::perturbation::effective_b1;
use opo_ng::quad::{integrate_real_line, integrate_with_breaks, QuadOptions};
use opo_ng::{ChannelKind, DetectionFilter, OpoParams};

pub fn tight() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-11,
        max_intervals: 20000,
    }
}

/// (1/2π)∫ F̃(ω+w)F̃(−ω)·G̃(w+ω)·B̃(w)·:σ̃:(ω) dω, symmetrized.
pub fn varsigma_quadrature(kind: ChannelKind, w: f64, p: &OpoParams, f: &DetectionFilter) -> CMat2 {
    let b = effective_b1(kind, c(w), p).unwrap();
    let integrand = |om: f64| -> CMat2 {
        let g = green_freq(Mode::Signal, w + om, p);
        let s = sigma11_spectrum(om, p).unwrap();
        (g * b * s).scale(filter_fourier(om + w, f) * filter_fourier(-om, f))
    };
    // Resolve the filter peaks explicitly.
    let wf = f.omega_f;
    let breaks = [
        -1e4, -50.0, -5.0, -wf - w, -wf, -w, 0.0, wf - w, wf, 5.0, 50.0, 1e4,
    ];
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let core = integrate_with_breaks(integrand, &pts, tight());
    let tail_l = integrate_real_line(
        |t: f64| if t < -1e4 { integrand(t) } else { CMat2::zero() },
        1e4,
        tight(),
    );
    let tail_r = integrate_real_line(
        |t: f64| if t > 1e4 { integrand(t) } else { CMat2::zero() },
        1e4,
        tight(),
    );
    (core.value + tail_l.value + tail_r.value)
        .scale(c(1.0 / (2.0 * PI)))
        .symmetrize()
}

/// (1/2π)∫ c(−w)c(w) dw with c = θᵀς̃(w)θ, for a white source.
pub fn upsilon_white_quadrature(kind: ChannelKind, theta: f64, p: &OpoParams, f: &DetectionFilter) -> f64 {
    let tv = theta_vec(theta);
    let cw = |w: f64| varsigma(kind, c(w), p, f).unwrap().bilinear(tv);
    let r = integrate_real_line(|w: f64| (cw(w) * cw(-w)).re, 1.0, tight());
    r.value / (2.0 * PI)
}

/// (1/2π)∫|F̃|²·θᵀ:σ̃:(ω)θ dω.
pub fn linear_variance_quadrature(theta: f64, p: &OpoParams, f: &DetectionFilter) -> f64 {
    let tv = theta_vec(theta);
    let r = integrate_real_line(
        |om: f64| {
            let s = sigma11_spectrum(om, p).unwrap().bilinear(tv);
            (filter_fourier(om, f) * filter_fourier(-om, f) * s).re
        },
        1.0,
        tight(),
    );
    r.value / (2.0 * PI)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn mat_rel_err(a: &CMat2, b: &CMat2) -> f64 {
    a.dist(b) / b.max_abs().max(1e-300)
}

pub fn cnorm(z: C64) -> f64 {
    z.norm()
}
