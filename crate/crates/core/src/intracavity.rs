//! Nonlinear corrections to the intracavity squeezed variance.

use std::f64::consts::PI;

use crate::cmat::{c, CMat2, C64, I};
use crate::error::{OpoError, Result};
use crate::linear::{green_freq_c, sigma11_spectrum_c, squeezed_component, Mode};
use crate::model::{ChannelKind, NoiseChannel, OpoParams, SpectrumModel};
use crate::perturbation::{b1_split, effective_b1};
use crate::quad::{integrate, integrate_real_line, integrate_with_breaks, QuadOptions};

/// Closed-form weight λ_ι of the nonlinear squeezing correction for a
/// balanced, tuned device.
pub fn lambda_nl(kind: ChannelKind, params: &OpoParams) -> Result<f64> {
    params.require_tuned()?;
    let e = params.e_mag;
    let k = params.kappa0();
    let e2 = e * e;
    let e3 = e2 * e;
    let one_m = 1.0 - e2;
    let v = match kind {
        ChannelKind::ChiSignal => return Err(OpoError::UnsupportedChannel(kind)),
        ChannelKind::ChiPump => {
            let num = e
                * (2.0 * e3 * k + 2.0 * e2 * k * (2.0 + k) + (2.0 + k).powi(2)
                    - 2.0 * e * (-2.0 + k * (2.0 + k)));
            num / (2.0 * one_m * (1.0 + e) * (2.0 + k) * (2.0 + 2.0 * e + k))
        }
        ChannelKind::PumpPhase => {
            let num = k * (2.0 + k) - e * k * (6.0 + k) + 2.0 * e3 * (8.0 + 5.0 * k)
                - 2.0 * e2 * (12.0 + k * (9.0 + k));
            -num / (16.0 * one_m * k * (2.0 + k))
        }
        ChannelKind::CavityDetuning => {
            let num = e * (e3 + 2.0 * k - e2 * (3.0 + k) - e * (6.0 + k));
            -num / (2.0 * one_m * (1.0 + e) * k * k)
        }
        ChannelKind::CrystalTemperature => {
            let num = e2 * (1.0 + e).powi(2) - (2.0 + e) * (1.0 - e) * k * k;
            num / (2.0 * one_m * (1.0 + e) * k * k)
        }
        ChannelKind::PumpAmplitude => (2.0 + e2) / (2.0 * (1.0 + e).powi(2)),
    };
    Ok(v)
}

/// λ values of the five coupled channels at one working point.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTable {
    pub e_mag: f64,
    pub kappa0_hat: f64,
    pub entries: Vec<(ChannelKind, f64)>,
}

impl LambdaTable {
    pub fn compute(params: &OpoParams) -> Result<Self> {
        let entries = ChannelKind::COUPLED
            .iter()
            .map(|&k| Ok((k, lambda_nl(k, params)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            e_mag: params.e_mag,
            kappa0_hat: params.kappa0(),
            entries,
        })
    }

    /// Whether a channel's λ grows without bound toward threshold.
    pub fn diverges(kind: ChannelKind) -> bool {
        !matches!(kind, ChannelKind::PumpAmplitude)
    }

    pub fn get(&self, kind: ChannelKind) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == kind).map(|e| e.1)
    }
}

/// λ_χ₀ relative to the positive-P result near threshold, (κ̂₀+2)/(3κ̂₀+2).
pub fn lambda_ppse_ratio(params: &OpoParams) -> Result<f64> {
    params.require_tuned()?;
    let k = params.kappa0();
    Ok((k + 2.0) / (3.0 * k + 2.0))
}

/// Leading near-threshold behaviour of the positive-P λ_χ₀,
/// (3κ̂₀+2)/(8(κ̂₀+2)(1−E)).
pub fn ppse_envelope(params: &OpoParams) -> Result<f64> {
    params.require_tuned()?;
    let k = params.kappa0();
    Ok((3.0 * k + 2.0) / (8.0 * (k + 2.0) * (1.0 - params.e_mag)))
}

/// Per-unit-weight second-order mean shift B⁽²⁾ of a channel, with the
/// white pump phase handled in the Stratonovich sense.
pub fn b2_per_channel(kind: ChannelKind, params: &OpoParams) -> f64 {
    let e = params.e_mag;
    let k = params.kappa0();
    match kind {
        ChannelKind::ChiPump => -e / (2.0 * (1.0 - e * e)),
        ChannelKind::PumpPhase => -e / (2.0 * k),
        ChannelKind::CavityDetuning => -e / (k * k),
        _ => 0.0,
    }
}

/// Fourier transform ∫₀^∞ δB⁽²⁾(d)e^{iωd}dd of the pump-mediated kernel.
pub fn delta_b2_fourier(omega: C64, params: &OpoParams) -> C64 {
    let e = params.e_mag;
    let k = params.kappa0();
    let a = (c(k + 1.0 - e) - I * omega).inv() / (1.0 - e);
    let b = (c(k + 1.0 + e) - I * omega).inv() / (1.0 + e);
    (a - b) * (-e * e * k / (2.0 * e))
}

fn opts(rel: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: rel,
        max_intervals: 20000,
    }
}

fn line<F: FnMut(f64) -> CMat2>(mut f: F, centers: &[f64], width: f64, rel: f64) -> Result<CMat2> {
    let mut pts = vec![-1e3, 1e3];
    for &c0 in centers {
        for d in [0.0, width, 10.0 * width] {
            pts.push(c0 - d);
            pts.push(c0 + d);
        }
    }
    pts.retain(|x| x.abs() <= 1e3);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let core = integrate_with_breaks(&mut f, &pts, opts(rel)).into_result()?;
    // x = ±L/t maps each tail onto (0, 1].
    const L: f64 = 1e3;
    let tails = integrate(
        |t: f64| {
            if t <= 0.0 {
                return CMat2::zero();
            }
            (f(L / t) + f(-L / t)).scale(c(L / (t * t)))
        },
        0.0,
        1.0,
        opts(rel),
    )
    .into_result()?;
    Ok(core + tails)
}

/// Average over the classical noise spectrum of a w-dependent matrix.
fn noise_average<F>(spectrum: SpectrumModel, mut f: F, rel: f64) -> Result<CMat2>
where
    F: FnMut(f64) -> Result<CMat2>,
{
    let mut err = None;
    let mut g = |w: f64| match f(w) {
        Ok(m) => m,
        Err(e) => {
            err.get_or_insert(e);
            CMat2::zero()
        }
    };
    let r = match spectrum {
        SpectrumModel::DeltaLike => g(0.0),
        SpectrumModel::UniformBand { w_max } => {
            integrate(&mut g, -w_max, w_max, opts(rel)).into_result()?.scale(c(0.5 / w_max))
        }
        SpectrumModel::White => {
            // Pair ±w so the 1/w tails of the instantaneous coupling cancel.
            let sym = |w: f64| (g(w) + g(-w)).scale(c(0.5));
            integrate_real_line(sym, 1.0, opts(rel))
                .into_result()?
                .scale(c(1.0 / (2.0 * PI)))
        }
    };
    match err {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// One-sided transform K̃(ω) of the third-order memory kernel, including
/// the pump-mediated δB⁽²⁾ part for the quantum pump channel.
pub fn memory_kernel(channel: &NoiseChannel, omega: f64, params: &OpoParams) -> Result<CMat2> {
    let kind = channel.kind;
    let g = |z: C64| green_freq_c(Mode::Signal, z, params);
    let mut k = match channel.spectrum {
        SpectrumModel::White => {
            // Time domain: a δ-correlated part taken at the midpoint plus
            // the exponentially filtered pump memory.
            let (bc, bp) = b1_split(kind, params)?;
            let gk = g(c(omega) + I * params.kappa0());
            (bc * bc).scale(c(0.5)) + bp * gk * (bc + bp.scale(c(0.5 / params.kappa0())))
        }
        s => noise_average(
            s,
            |w| Ok(effective_b1(kind, c(w), params)? * g(c(omega - w)) * effective_b1(kind, c(-w), params)?),
            1e-10,
        )?,
    };
    if kind == ChannelKind::ChiPump {
        k += CMat2::identity().scale(delta_b2_fourier(c(omega), params));
    }
    Ok(k)
}

/// Nonlinear intracavity correlation σ⁽²,²⁾ + σ⁽³,¹⁾ + σ⁽¹,³⁾ at zero delay,
/// per unit g_χ²g_ι², by frequency-domain quadrature.
pub fn sigma_nl_matrix(channel: &NoiseChannel, params: &OpoParams) -> Result<CMat2> {
    params.require_tuned()?;
    if params.e_mag == 0.0 {
        return Err(OpoError::ZeroPump);
    }
    let kind = channel.kind;
    if kind == ChannelKind::ChiSignal {
        return Err(OpoError::UnsupportedChannel(kind));
    }
    let width = 1.0 - params.e_mag;
    let (inner, outer) = (1e-10, 1e-8);
    let b = |w: f64| effective_b1(kind, c(w), params);
    let g = |z: f64| green_freq_c(Mode::Signal, c(z), params);
    let s1 = |z: f64| sigma11_spectrum_c(c(z), params);

    let s22 = noise_average(
        channel.spectrum,
        |w| {
            let bw = b(w)?;
            let bmw = b(-w)?.transpose();
            let inner_m = line(
                |om| g(w + om) * bw * s1(om) * bmw * g(-w - om).transpose(),
                &[0.0, -w],
                width,
                inner,
            )?;
            Ok(inner_m.scale(c(1.0 / (2.0 * PI))))
        },
        outer,
    )?;

    let b2 = b2_per_channel(kind, params);
    let k_tilde = |om: f64| memory_kernel(channel, om, params);
    let mut err = None;
    let s31 = line(
        |om| match k_tilde(om) {
            Ok(k) => g(om) * (CMat2::swap().scale(c(b2)) + k) * s1(om),
            Err(e) => {
                err.get_or_insert(e);
                CMat2::zero()
            }
        },
        &[0.0],
        width,
        outer,
    )?
    .scale(c(1.0 / (2.0 * PI)));
    if let Some(e) = err {
        return Err(e);
    }
    Ok(s22 + s31 + s31.transpose())
}

/// λ_ι from the quadrature hierarchy: the squeezed-quadrature part of the
/// nonlinear correlation over the linear squeezed variance.
pub fn sigma_nl_variance(channel: &NoiseChannel, params: &OpoParams) -> Result<f64> {
    if channel.weight == 0.0 {
        return Ok(0.0);
    }
    let m = sigma_nl_matrix(channel, params)?;
    let e = params.e_mag;
    let linear = -1.0 / (2.0 * e * (1.0 + e));
    Ok(squeezed_component(&m).re / linear)
}
