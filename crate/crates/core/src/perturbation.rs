//! First-order coupling matrices and the second-order source hierarchy.

use crate::cmat::{c, CMat2, C64, I};
use crate::error::{OpoError, Result};
use crate::linear::{green_time, sigma11_time};
use crate::model::{ChannelKind, NoiseChannel, OpoParams, SpectrumModel};
use crate::quad::{integrate, QuadOptions};

/// Coupling matrix B̃⁽¹⁾_ι(z) at a complex frequency.
pub fn b1_channel_c(kind: ChannelKind, z: C64, params: &OpoParams) -> Result<CMat2> {
    let k0 = params.kappa0_hat;
    let d0 = (k0 - I * z).inv();
    let d0d = (k0.conj() - I * z).inv();
    let th = params.vartheta();
    let up = C64::from_polar(params.e_mag, -th);
    let down = C64::from_polar(params.e_mag, th);
    let zero = C64::default();
    let m = match kind {
        ChannelKind::ChiSignal => return Err(OpoError::UnsupportedChannel(kind)),
        ChannelKind::ChiPump => CMat2::new(zero, d0 * params.e_mag, zero, zero),
        ChannelKind::PumpAmplitude => CMat2::new(zero, up * k0 * d0, down * k0.conj() * d0d, zero),
        ChannelKind::PumpPhase => {
            CMat2::new(c(0.5), up * d0, -down * d0d, c(-0.5)).scale(I)
        }
        ChannelKind::CrystalTemperature => CMat2::new(zero, up, down, zero),
        ChannelKind::CavityDetuning => {
            CMat2::new(c(-1.0), -up * d0, down * d0d, c(1.0)).scale(I)
        }
    };
    Ok(m)
}

pub fn b1_channel(kind: ChannelKind, w: f64, params: &OpoParams) -> Result<CMat2> {
    b1_channel_c(kind, c(w), params)
}

/// Coupling matrix multiplying a single real noise process. The pump quantum
/// noise enters through B̃_χ and its transpose; both carry the same real
/// white process, so they merge into B̃_χ + B̃_χᵀ.
pub fn effective_b1(kind: ChannelKind, z: C64, params: &OpoParams) -> Result<CMat2> {
    let b = b1_channel_c(kind, z, params)?;
    Ok(match kind {
        ChannelKind::ChiPump => b.symmetrize(),
        _ => b,
    })
}

/// Tuned split B̃(z) = B_c + B_p/(κ̂₀ − iz) into an instantaneous part and
/// a part filtered by the pump response.
pub fn b1_split(kind: ChannelKind, params: &OpoParams) -> Result<(CMat2, CMat2)> {
    params.require_tuned()?;
    let e = c(params.e_mag);
    let zero = C64::default();
    let k0 = params.kappa0();
    let anti = CMat2::new(zero, I * e, -I * e, zero);
    Ok(match kind {
        ChannelKind::ChiSignal => return Err(OpoError::UnsupportedChannel(kind)),
        ChannelKind::ChiPump => (CMat2::zero(), CMat2::swap().scale(e)),
        ChannelKind::PumpAmplitude => (CMat2::zero(), CMat2::swap().scale(e * k0)),
        ChannelKind::PumpPhase => (CMat2::diag(0.5 * I, -0.5 * I), anti),
        ChannelKind::CrystalTemperature => (CMat2::swap().scale(e), CMat2::zero()),
        ChannelKind::CavityDetuning => (CMat2::diag(-I, I), -anti),
    })
}

/// (κ̂₀ − iz)·B̃_eff(z), a first-degree matrix polynomial for tuned devices.
pub fn b1_scaled(kind: ChannelKind, z: C64, params: &OpoParams) -> Result<CMat2> {
    let (bc, bp) = b1_split(kind, params)?;
    Ok(bc.scale(params.kappa0_hat - I * z) + bp)
}

/// Power of g_ϖ in the pump-phase term of B⁽²⁾.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PumpPhaseTerm {
    /// First power, as the closed form is written.
    #[default]
    AsPrinted,
    /// Quadratic, like its neighbours.
    Squared,
}

fn weight_of(channels: &[NoiseChannel], pred: impl Fn(ChannelKind) -> bool) -> f64 {
    channels
        .iter()
        .filter(|ch| pred(ch.kind))
        .map(|ch| ch.weight)
        .fold(0.0, f64::max)
}

/// Second-order mean pump shift B⁽²⁾ = E⟨α₀⁽²⁾⟩ of a tuned device.
pub fn b2_mean(params: &OpoParams, channels: &[NoiseChannel], phase_term: PumpPhaseTerm) -> Result<C64> {
    params.require_tuned()?;
    let e = params.e_mag;
    let k0 = params.kappa0();
    let g_chi = weight_of(channels, |k| {
        matches!(k, ChannelKind::ChiSignal | ChannelKind::ChiPump)
    });
    let g_phase = weight_of(channels, |k| k == ChannelKind::PumpPhase);
    let g_nu = weight_of(channels, |k| k == ChannelKind::CavityDetuning);
    let phase = match phase_term {
        PumpPhaseTerm::AsPrinted => g_phase,
        PumpPhaseTerm::Squared => g_phase * g_phase,
    };
    let v = -g_chi * g_chi / (2.0 * (1.0 - e * e)) - phase * e / k0 - g_nu * g_nu * e / (k0 * k0);
    Ok(c(v))
}

/// Memory kernel B⁽¹,¹⁾(Δτ) split into a smooth part and the weight of a
/// δ(Δτ) contribution from white channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel11 {
    pub smooth: CMat2,
    pub delta_weight: CMat2,
}

fn kernel_one(ch: &NoiseChannel, dtau: f64, params: &OpoParams) -> Result<Kernel11> {
    let g = green_time(dtau, params)?;
    let g2 = c(ch.weight * ch.weight);
    let k0 = params.kappa0();
    let (bc, bp) = b1_split(ch.kind, params)?;
    let out = match ch.spectrum {
        SpectrumModel::DeltaLike => {
            let b = bc + bp.scale(c(1.0 / k0));
            Kernel11 {
                smooth: (b * g * b).scale(g2),
                delta_weight: CMat2::zero(),
            }
        }
        SpectrumModel::White => {
            let decay = (-k0 * dtau).exp();
            let smooth = (bp * g * bc + (bp * g * bp).scale(c(0.5 / k0))).scale(c(decay));
            Kernel11 {
                smooth: smooth.scale(g2),
                delta_weight: (bc * bc).scale(g2),
            }
        }
        SpectrumModel::UniformBand { w_max } => {
            let s = std::f64::consts::PI / w_max;
            let f = |w: f64| -> CMat2 {
                let bw = bc + bp.scale((c(k0) - I * w).inv());
                let bmw = bc + bp.scale((c(k0) + I * w).inv());
                (bw * g * bmw).scale((-I * w * dtau).exp() * (s / (2.0 * std::f64::consts::PI)))
            };
            let r = integrate(f, -w_max, w_max, QuadOptions::new(1e-13, 1e-10)).into_result()?;
            Kernel11 {
                smooth: r.scale(g2),
                delta_weight: CMat2::zero(),
            }
        }
    };
    Ok(out)
}

/// B⁽¹,¹⁾(Δτ) = Σ_ι g_ι² ⟨B⁽¹⁾_ι(τ)·G(Δτ)·B⁽¹⁾_ι(τ′)⟩ for Δτ ≥ 0.
pub fn b11_kernel(dtau: f64, params: &OpoParams, channels: &[NoiseChannel]) -> Result<Kernel11> {
    params.require_tuned()?;
    if dtau < 0.0 {
        return Err(OpoError::InvalidParameter {
            name: "dtau",
            reason: format!("must be non-negative, got {dtau}"),
        });
    }
    let mut acc = Kernel11 {
        smooth: CMat2::zero(),
        delta_weight: CMat2::zero(),
    };
    for ch in channels {
        if ch.kind == ChannelKind::ChiSignal || ch.weight == 0.0 {
            continue;
        }
        let k = kernel_one(ch, dtau, params)?;
        acc.smooth += k.smooth;
        acc.delta_weight += k.delta_weight;
    }
    Ok(acc)
}

/// δB⁽²⁾(Δτ) = −E²κ̂₀·e^{−κ̂₀Δτ}·σ_{αα†}(Δτ).
pub fn delta_b2(dtau: f64, params: &OpoParams) -> Result<C64> {
    params.require_tuned()?;
    let e = params.e_mag;
    if e == 0.0 {
        return Ok(C64::default());
    }
    let k0 = params.kappa0();
    let s = sigma11_time(dtau, params)?;
    Ok(s.aad * (-e * e * k0 * (-k0 * dtau.abs()).exp()))
}
