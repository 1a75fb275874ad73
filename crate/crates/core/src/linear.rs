//! Linear response: Green's matrices and the first-order correlation spectrum.

use crate::cmat::{c, CMat2, C64, I};
use crate::error::{OpoError, Result};
use crate::model::OpoParams;

/// Characteristic frequencies ω± of the signal response; both lie in the
/// upper half plane below threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFrequencies {
    pub omega_plus: C64,
    pub omega_minus: C64,
}

impl CharFrequencies {
    /// D̃(z) = −(z + ω₊)(z + ω₋).
    pub fn denom(&self, z: C64) -> C64 {
        -(z + self.omega_plus) * (z + self.omega_minus)
    }
}

/// Normalized signal damping κ̂ = e^{−iψ}.
pub fn kappa_hat(params: &OpoParams) -> C64 {
    C64::from_polar(1.0, -params.psi)
}

pub fn char_freqs(params: &OpoParams) -> CharFrequencies {
    let (s, co) = params.psi.sin_cos();
    let root = c(params.e_mag * params.e_mag - s * s).sqrt();
    CharFrequencies {
        omega_plus: I * (co - root),
        omega_minus: I * (co + root),
    }
}

/// Which cavity mode's Green's matrix to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Signal,
    Pump,
}

/// Δ̃(z) = κ̂ − iz and Δ̃‡(z) = κ̂* − iz.
fn deltas(k: C64, z: C64) -> (C64, C64) {
    (k - I * z, k.conj() - I * z)
}

/// Adjugate numerator of the signal Green's matrix, D̃(z)·G̃(z).
pub fn green_numerator(z: C64, params: &OpoParams) -> CMat2 {
    let (d, dd) = deltas(kappa_hat(params), z);
    let th = params.vartheta();
    let e = params.e_mag;
    CMat2::new(
        dd,
        C64::from_polar(e, -th),
        C64::from_polar(e, th),
        d,
    )
}

/// D̃(z) = Δ̃Δ̃‡ − |E|².
pub fn denominator(z: C64, params: &OpoParams) -> C64 {
    let (d, dd) = deltas(kappa_hat(params), z);
    d * dd - params.e_mag * params.e_mag
}

/// Green's matrix at a complex frequency.
pub fn green_freq_c(mode: Mode, z: C64, params: &OpoParams) -> CMat2 {
    match mode {
        Mode::Signal => green_numerator(z, params).scale(denominator(z, params).inv()),
        Mode::Pump => {
            let (d0, d0d) = deltas(params.kappa0_hat, z);
            CMat2::diag(d0.inv(), d0d.inv())
        }
    }
}

pub fn green_freq(mode: Mode, omega: f64, params: &OpoParams) -> CMat2 {
    green_freq_c(mode, c(omega), params)
}

/// Tuned time-domain Green's matrix (right-continuous at τ = 0).
pub fn green_time(tau: f64, params: &OpoParams) -> Result<CMat2> {
    params.require_tuned()?;
    if tau < 0.0 {
        return Ok(CMat2::zero());
    }
    let e = params.e_mag;
    let slow = (-(1.0 - e) * tau).exp();
    let fast = (-(1.0 + e) * tau).exp();
    let ch = c(0.5 * (slow + fast));
    let sh = c(0.5 * (slow - fast));
    Ok(CMat2::new(ch, sh, sh, ch))
}

/// Time-domain signal Green's matrix for arbitrary loss phase, obtained by
/// closing the inverse transform in the lower half plane.
pub fn green_time_general(tau: f64, params: &OpoParams) -> CMat2 {
    if tau < 0.0 {
        return CMat2::zero();
    }
    let cf = char_freqs(params);
    let (wp, wm) = (cf.omega_plus, cf.omega_minus);
    let gap = wp - wm;
    if gap.norm() < 1e-7 {
        // Double pole at −ω₀: G = i [N′ − iτ N(−ω₀)] e^{iω₀τ}.
        let w0 = 0.5 * (wp + wm);
        let n = green_numerator(-w0, params);
        let dn = CMat2::diag(-I, -I);
        return (dn + n.scale(-I * tau)).scale(I * (I * w0 * tau).exp());
    }
    let np = green_numerator(-wp, params).scale((I * wp * tau).exp() / gap);
    let nm = green_numerator(-wm, params).scale((I * wm * tau).exp() / -gap);
    (np + nm).scale(-I)
}

/// Pump response e^{−κ̂₀τ} for τ ≥ 0.
pub fn pump_green_time(tau: f64, params: &OpoParams) -> C64 {
    if tau < 0.0 {
        C64::default()
    } else {
        (-params.kappa0_hat * tau).exp()
    }
}

fn require_pump(params: &OpoParams) -> Result<()> {
    if params.e_mag == 0.0 {
        Err(OpoError::ZeroPump)
    } else {
        Ok(())
    }
}

/// Normally ordered first-order spectrum at frequency z:
/// (2/|E|)·G̃(z)·diag(e^{−iϑ}, e^{iϑ})·G̃(−z)ᵀ.
pub fn sigma11_spectrum_c(z: C64, params: &OpoParams) -> CMat2 {
    let th = params.vartheta();
    let phases = CMat2::diag(C64::from_polar(1.0, -th), C64::from_polar(1.0, th));
    let g = green_freq_c(Mode::Signal, z, params);
    let gm = green_freq_c(Mode::Signal, -z, params);
    (g * phases * gm.transpose()).scale(c(2.0 / params.e_mag))
}

/// Spectrum as a function of its own argument, :σ̃⁽¹,¹⁾:(ω).
pub fn sigma11_spectrum(omega: f64, params: &OpoParams) -> Result<CMat2> {
    require_pump(params)?;
    Ok(sigma11_spectrum_c(c(omega), params))
}

/// The time-normal-ordered spectrum in the reversed-argument form of the
/// stationary correlation: returns :σ̃⁽¹,¹⁾:(−ω).
pub fn sigma11_tn(omega: f64, params: &OpoParams) -> Result<CMat2> {
    sigma11_spectrum(-omega, params)
}

/// Flips the frequency argument of a spectrum function.
pub fn flip_argument<F>(f: F) -> impl Fn(f64) -> CMat2
where
    F: Fn(f64) -> CMat2,
{
    move |w| f(-w)
}

/// Tuned numerator σ̃_TN(z) = 4[[(1+E²+z²)/(2E), 1], [1, (1+E²+z²)/(2E)]].
pub fn sigma_tn_poly(z: C64, e: f64) -> CMat2 {
    let d = (1.0 + e * e + z * z) * 2.0 / e;
    CMat2::new(d, c(4.0), c(4.0), d)
}

/// Stationary first-order correlation ⟨α(τ) αᵀ(0)⟩ by residues.
pub fn sigma11_time(tau: f64, params: &OpoParams) -> Result<CMat2> {
    require_pump(params)?;
    if tau < 0.0 {
        return Ok(sigma11_time(-tau, params)?.transpose());
    }
    let cf = char_freqs(params);
    let (wp, wm) = (cf.omega_plus, cf.omega_minus);
    let gap = wp - wm;
    if gap.norm() < 1e-9 {
        return Err(OpoError::DegeneratePole(format!(
            "signal poles coincide: {wp} vs {wm}"
        )));
    }
    let th = params.vartheta();
    let phases = CMat2::diag(C64::from_polar(1.0, -th), C64::from_polar(1.0, th));
    let scale = c(2.0 / params.e_mag);
    let mut acc = CMat2::zero();
    for (pole, other) in [(wp, wm), (wm, wp)] {
        // Residue of G̃ at −ω_l is N(−ω_l)/(ω_l − ω_other).
        let res = green_numerator(-pole, params).scale((pole - other).inv());
        let right = green_freq_c(Mode::Signal, pole, params).transpose();
        acc += (res * phases * right).scale((I * pole * tau).exp());
    }
    Ok(acc.scale(-I * scale))
}

/// Squeezed-quadrature combination (−σ_aa + σ_aa† + σ_a†a − σ_a†a†)/4.
pub fn squeezed_component(m: &CMat2) -> C64 {
    (-m.aa + m.aad + m.ada - m.adad) / 4.0
}

/// Antisqueezed-quadrature combination (σ_aa + σ_aa† + σ_a†a + σ_a†a†)/4.
pub fn antisqueezed_component(m: &CMat2) -> C64 {
    (m.aa + m.aad + m.ada + m.adad) / 4.0
}
