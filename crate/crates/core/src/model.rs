//! Device parameters, noise channels and the perturbative-validity guard.
//!
//! All quantities are normalized to the mean signal decay rate κ: rates carry
//! a caret in the usual notation and times are τ = κt.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cmat::C64;
use crate::error::{OpoError, Result};

/// Normalized parameters of a degenerate OPO below threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpoParams {
    /// Pump complex damping κ₀/κ.
    pub kappa0_hat: C64,
    /// Excitation |E| = ε/ε_th, strictly below 1.
    pub e_mag: f64,
    /// Signal loss phase ψ.
    pub psi: f64,
    /// Pump loss phase ψ₀.
    pub psi0: f64,
    /// Output-mirror damping γ₁/κ.
    pub gamma1_hat: f64,
    /// Nonlinear coupling weight g_χ.
    pub g_chi: f64,
}

impl OpoParams {
    pub fn new(
        kappa0_hat: C64,
        e_mag: f64,
        psi: f64,
        psi0: f64,
        gamma1_hat: f64,
        g_chi: f64,
    ) -> Result<Self> {
        if !(e_mag >= 0.0) {
            return Err(OpoError::InvalidParameter {
                name: "e_mag",
                reason: format!("must be non-negative, got {e_mag}"),
            });
        }
        if e_mag >= 1.0 {
            return Err(OpoError::AboveThreshold(e_mag));
        }
        if !(kappa0_hat.re > 0.0) {
            return Err(OpoError::NonPositiveRate("kappa0_hat"));
        }
        if !(gamma1_hat > 0.0) {
            return Err(OpoError::NonPositiveRate("gamma1_hat"));
        }
        if !(g_chi > 0.0) {
            return Err(OpoError::InvalidParameter {
                name: "g_chi",
                reason: format!("must be positive, got {g_chi}"),
            });
        }
        for (name, v) in [("psi", psi), ("psi0", psi0)] {
            if !v.is_finite() {
                return Err(OpoError::InvalidParameter {
                    name,
                    reason: "not finite".into(),
                });
            }
        }
        Ok(Self {
            kappa0_hat,
            e_mag,
            psi,
            psi0,
            gamma1_hat,
            g_chi,
        })
    }

    /// Tuned device with unit output coupling and the default g_χ.
    pub fn tuned(e_mag: f64, kappa0_hat: f64) -> Result<Self> {
        Self::new(
            C64::new(kappa0_hat, 0.0),
            e_mag,
            0.0,
            0.0,
            1.0,
            DefaultWeights::G_CHI,
        )
    }

    pub fn is_tuned(&self) -> bool {
        self.psi == 0.0 && self.psi0 == 0.0 && self.kappa0_hat.im == 0.0
    }

    pub fn require_tuned(&self) -> Result<()> {
        if self.is_tuned() {
            Ok(())
        } else {
            Err(OpoError::NotTuned)
        }
    }

    /// Real pump damping of a tuned device.
    pub fn kappa0(&self) -> f64 {
        self.kappa0_hat.re
    }

    /// Same device at a different excitation.
    pub fn with_e(&self, e_mag: f64) -> Result<Self> {
        Self::new(
            self.kappa0_hat,
            e_mag,
            self.psi,
            self.psi0,
            self.gamma1_hat,
            self.g_chi,
        )
    }

    pub fn with_kappa0(&self, kappa0_hat: f64) -> Result<Self> {
        Self::new(
            C64::new(kappa0_hat, 0.0),
            self.e_mag,
            self.psi,
            self.psi0,
            self.gamma1_hat,
            self.g_chi,
        )
    }

    /// ϑ = ψ − ψ₀/2, the phase of the parametric coupling.
    pub fn vartheta(&self) -> f64 {
        self.psi - 0.5 * self.psi0
    }
}

/// Raw (un-normalized) device description. Rates share one arbitrary unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    /// Pump total damping γ₀ and detuning ν₀.
    pub gamma0: f64,
    pub nu0: f64,
    /// Signal and idler total damping and detuning.
    pub gamma1: f64,
    pub nu1: f64,
    pub gamma2: f64,
    pub nu2: f64,
    /// Output-mirror part of the signal damping.
    pub gamma1_mirror: f64,
    /// Driving amplitude ε.
    pub pump_amplitude: f64,
    /// Effective coupling |χ̄|.
    pub chi_bar: f64,
}

impl RawParams {
    /// Threshold amplitude ε_th = |κ₀|·√|κ₁κ₂| / (2|χ̄|).
    pub fn threshold(&self) -> f64 {
        let (k0, k1, k2) = self.complex_dampings();
        k0.norm() * (k1 * k2).norm().sqrt() / (2.0 * self.chi_bar.abs())
    }

    fn complex_dampings(&self) -> (C64, C64, C64) {
        (
            C64::new(self.gamma0, -self.nu0),
            C64::new(self.gamma1, -self.nu1),
            C64::new(self.gamma2, -self.nu2),
        )
    }
}

/// Normalizes a raw device description. The signal/idler rescaling of the
/// field amplitudes is implicit: downstream code only sees scaled fields.
pub fn normalize_params(raw: &RawParams) -> Result<OpoParams> {
    for (name, v) in [
        ("gamma0", raw.gamma0),
        ("gamma1", raw.gamma1),
        ("gamma2", raw.gamma2),
        ("gamma1_mirror", raw.gamma1_mirror),
        ("chi_bar", raw.chi_bar),
    ] {
        if !(v > 0.0) {
            return Err(OpoError::NonPositiveRate(name));
        }
    }
    if raw.pump_amplitude < 0.0 {
        return Err(OpoError::InvalidParameter {
            name: "pump_amplitude",
            reason: "must be non-negative".into(),
        });
    }
    let (k0, k1, k2) = raw.complex_dampings();
    let kappa = (k1 + k2).norm() / 2.0;
    let e_mag = raw.pump_amplitude / raw.threshold();
    if e_mag >= 1.0 {
        return Err(OpoError::AboveThreshold(e_mag));
    }
    // κ_k = |κ_k| e^{−iψ_k}
    let psi = -k1.arg();
    let psi0 = -k0.arg();
    let g_chi = raw.chi_bar / (2.0 * (k0.norm() * kappa)).sqrt();
    OpoParams::new(k0 / kappa, e_mag, psi, psi0, raw.gamma1_mirror / kappa, g_chi)
}

/// Noise sources driving the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Quantum noise entering the signal mode.
    ChiSignal,
    /// Quantum noise entering the pump mode.
    ChiPump,
    /// Pump amplitude fluctuations μ_p.
    PumpAmplitude,
    /// Pump phase diffusion ϖ_p.
    PumpPhase,
    /// Cavity detuning fluctuations δν.
    CavityDetuning,
    /// Crystal temperature fluctuations δT.
    CrystalTemperature,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 6] = [
        ChannelKind::ChiSignal,
        ChannelKind::ChiPump,
        ChannelKind::PumpAmplitude,
        ChannelKind::PumpPhase,
        ChannelKind::CavityDetuning,
        ChannelKind::CrystalTemperature,
    ];

    /// Channels that act through the first-order coupling matrix, in the
    /// canonical summation order.
    pub const COUPLED: [ChannelKind; 5] = [
        ChannelKind::ChiPump,
        ChannelKind::PumpAmplitude,
        ChannelKind::PumpPhase,
        ChannelKind::CavityDetuning,
        ChannelKind::CrystalTemperature,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::ChiSignal => "chi",
            ChannelKind::ChiPump => "chi0",
            ChannelKind::PumpAmplitude => "mu",
            ChannelKind::PumpPhase => "phase",
            ChannelKind::CavityDetuning => "nu",
            ChannelKind::CrystalTemperature => "temp",
        }
    }

    /// Spectrum a channel carries unless told otherwise.
    pub fn default_spectrum(&self) -> SpectrumModel {
        match self {
            ChannelKind::ChiSignal | ChannelKind::ChiPump | ChannelKind::PumpPhase => {
                SpectrumModel::White
            }
            ChannelKind::PumpAmplitude => SpectrumModel::UniformBand {
                w_max: DEFAULT_MU_BAND,
            },
            ChannelKind::CavityDetuning | ChannelKind::CrystalTemperature => {
                SpectrumModel::DeltaLike
            }
        }
    }

    fn spectrum_allowed(&self, s: &SpectrumModel) -> bool {
        match self {
            ChannelKind::ChiSignal | ChannelKind::ChiPump | ChannelKind::PumpPhase => {
                matches!(s, SpectrumModel::White)
            }
            ChannelKind::CavityDetuning | ChannelKind::CrystalTemperature => {
                matches!(s, SpectrumModel::DeltaLike)
            }
            ChannelKind::PumpAmplitude => true,
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelKind {
    type Err = OpoError;
    fn from_str(s: &str) -> Result<Self> {
        let k = match s.to_ascii_lowercase().as_str() {
            "chi" | "chi-signal" | "chisignal" => ChannelKind::ChiSignal,
            "chi0" | "chi-pump" | "chipump" => ChannelKind::ChiPump,
            "mu" | "mup" | "pump-amplitude" | "pumpamplitude" => ChannelKind::PumpAmplitude,
            "phase" | "phi" | "pump-phase" | "pumpphase" => ChannelKind::PumpPhase,
            "nu" | "detuning" | "cavity-detuning" | "cavitydetuning" => {
                ChannelKind::CavityDetuning
            }
            "temp" | "t" | "temperature" | "crystal-temperature" | "crystaltemperature" => {
                ChannelKind::CrystalTemperature
            }
            _ => {
                return Err(OpoError::InvalidParameter {
                    name: "channel",
                    reason: format!("unknown channel '{s}'"),
                })
            }
        };
        Ok(k)
    }
}

/// Default pump-amplitude noise band (1 MHz at κ ≈ 20 MHz).
pub const DEFAULT_MU_BAND: f64 = 0.05;

/// Normalized spectral density of a unit-variance noise process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumModel {
    /// S̃(w) = 1.
    White,
    /// S̃(w) = π / w_max on |w| ≤ w_max.
    UniformBand { w_max: f64 },
    /// Zero-frequency limit (frozen over the response time).
    DeltaLike,
}

impl SpectrumModel {
    pub fn uniform_band(w_max: f64) -> Result<Self> {
        if !(w_max > 0.0) {
            return Err(OpoError::InvalidParameter {
                name: "w_max",
                reason: format!("band edge must be positive, got {w_max}"),
            });
        }
        Ok(SpectrumModel::UniformBand { w_max })
    }

    /// Spectral density at a real frequency; `None` for the delta limit.
    pub fn density(&self, w: f64) -> Option<f64> {
        match *self {
            SpectrumModel::White => Some(1.0),
            SpectrumModel::UniformBand { w_max } => {
                Some(if w.abs() <= w_max { PI / w_max } else { 0.0 })
            }
            SpectrumModel::DeltaLike => None,
        }
    }
}

/// A noise source with its standard-deviation weight g_ι.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannel {
    pub kind: ChannelKind,
    pub weight: f64,
    pub spectrum: SpectrumModel,
}

impl NoiseChannel {
    pub fn new(kind: ChannelKind, weight: f64, spectrum: SpectrumModel) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(OpoError::InvalidParameter {
                name: "weight",
                reason: format!("must be non-negative, got {weight}"),
            });
        }
        if let SpectrumModel::UniformBand { w_max } = spectrum {
            SpectrumModel::uniform_band(w_max)?;
        }
        if !kind.spectrum_allowed(&spectrum) {
            return Err(OpoError::InvalidParameter {
                name: "spectrum",
                reason: format!("{spectrum:?} is not valid for channel {kind}"),
            });
        }
        Ok(Self {
            kind,
            weight,
            spectrum,
        })
    }

    pub fn with_default_spectrum(kind: ChannelKind, weight: f64) -> Result<Self> {
        Self::new(kind, weight, kind.default_spectrum())
    }
}

/// Midpoints of the typical weight ranges.
pub struct DefaultWeights;

impl DefaultWeights {
    pub const G_MU: f64 = 3e-2;
    pub const G_PHASE: f64 = 1e-3;
    pub const G_NU: f64 = 1e-3;
    pub const G_TEMP: f64 = 5e-5;
    pub const G_CHI: f64 = 1e-6;

    pub fn weight(kind: ChannelKind) -> f64 {
        match kind {
            ChannelKind::ChiSignal | ChannelKind::ChiPump => Self::G_CHI,
            ChannelKind::PumpAmplitude => Self::G_MU,
            ChannelKind::PumpPhase => Self::G_PHASE,
            ChannelKind::CavityDetuning => Self::G_NU,
            ChannelKind::CrystalTemperature => Self::G_TEMP,
        }
    }

    /// The five coupled channels with default weights and spectra.
    pub fn channels() -> Vec<NoiseChannel> {
        ChannelKind::COUPLED
            .iter()
            .map(|&k| {
                NoiseChannel::with_default_spectrum(k, Self::weight(k))
                    .expect("default channel is valid")
            })
            .collect()
    }
}

/// Homodyne detection filter: analysis frequency Ω_f and bandwidth γ_f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionFilter {
    pub omega_f: f64,
    pub gamma_f: f64,
}

impl DetectionFilter {
    pub fn new(omega_f: f64, gamma_f: f64) -> Result<Self> {
        if !(gamma_f > 0.0) {
            return Err(OpoError::NonPositiveRate("gamma_f"));
        }
        if !omega_f.is_finite() {
            return Err(OpoError::InvalidParameter {
                name: "omega_f",
                reason: "not finite".into(),
            });
        }
        Ok(Self { omega_f, gamma_f })
    }

    /// Ω_f = 0.3, γ_f = 0.15.
    pub fn typical() -> Self {
        Self {
            omega_f: 0.3,
            gamma_f: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDiagnostic {
    pub kind: ChannelKind,
    pub weight: f64,
    /// Order-of-magnitude source moments ⟨s⁽ᵐ⁾s⁽ᵐ⁾⟩ for m = 1, 2, 3.
    pub source_moments: [f64; 3],
    pub ordered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub valid: bool,
    /// 1 − |E| − max g².
    pub margin: f64,
    pub channels: Vec<ChannelDiagnostic>,
}

/// Checks the perturbative bound 1 − |E| > g_ι² for every channel.
pub fn validity_check(params: &OpoParams, channels: &[NoiseChannel]) -> ValidityReport {
    let gap = 1.0 - params.e_mag;
    let g2 = params.g_chi * params.g_chi;
    let mut max_w2: f64 = 0.0;
    let diagnostics: Vec<ChannelDiagnostic> = channels
        .iter()
        .map(|ch| {
            let w2 = ch.weight * ch.weight;
            max_w2 = max_w2.max(w2);
            let s1 = g2;
            let s2 = g2 * w2 / gap;
            let s3 = g2 * w2 * w2 / (gap * gap);
            ChannelDiagnostic {
                kind: ch.kind,
                weight: ch.weight,
                source_moments: [s1, s2, s3],
                ordered: s1 > s2 && s2 > s3,
            }
        })
        .collect();
    let valid = channels.iter().all(|ch| gap > ch.weight * ch.weight);
    ValidityReport {
        valid,
        margin: gap - max_w2,
        channels: diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw_tuned(eps_fraction: f64) -> RawParams {
        let mut raw = RawParams {
            gamma0: 2.0,
            nu0: 0.0,
            gamma1: 1.0,
            nu1: 0.0,
            gamma2: 1.0,
            nu2: 0.0,
            gamma1_mirror: 0.9,
            pump_amplitude: 0.0,
            chi_bar: 1e-3,
        };
        raw.pump_amplitude = eps_fraction * raw.threshold();
        raw
    }

    #[test]
    fn zero_pump_normalizes_to_kappa0_two() {
        let p = normalize_params(&raw_tuned(0.0)).unwrap();
        assert_eq!(p.e_mag, 0.0);
        assert!((p.kappa0_hat - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(p.is_tuned());
    }

    #[test]
    fn half_threshold() {
        let p = normalize_params(&raw_tuned(0.5)).unwrap();
        assert!((p.e_mag - 0.5).abs() < 1e-14);
    }

    #[test]
    fn above_threshold_rejected() {
        assert!(matches!(
            normalize_params(&raw_tuned(1.01)),
            Err(OpoError::AboveThreshold(_))
        ));
    }

    #[test]
    fn non_positive_rate_rejected() {
        let mut raw = raw_tuned(0.2);
        raw.gamma1 = 0.0;
        assert!(matches!(
            normalize_params(&raw),
            Err(OpoError::NonPositiveRate("gamma1"))
        ));
    }

    #[test]
    fn detuning_gives_loss_phase() {
        let mut raw = raw_tuned(0.3);
        raw.nu1 = 1.0;
        raw.nu2 = 1.0;
        raw.pump_amplitude = 0.3 * raw.threshold();
        let p = normalize_params(&raw).unwrap();
        assert!((p.psi - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        assert!(!p.is_tuned());
    }

    #[test]
    fn validity_examples() {
        let p = OpoParams::tuned(0.99, 2.0).unwrap();
        let chans: Vec<_> = ChannelKind::COUPLED
            .iter()
            .map(|&k| NoiseChannel::with_default_spectrum(k, 0.05).unwrap())
            .collect();
        assert!(validity_check(&p, &chans).valid);

        let p = OpoParams::tuned(0.999, 2.0).unwrap();
        let mu = NoiseChannel::with_default_spectrum(ChannelKind::PumpAmplitude, 0.05).unwrap();
        assert!(!validity_check(&p, &[mu]).valid);

        let r = validity_check(&p, &[]);
        assert!(r.valid);
        assert!((r.margin - 0.001).abs() < 1e-15);
    }

    #[test]
    fn spectrum_kind_invariants() {
        assert!(NoiseChannel::new(ChannelKind::PumpPhase, 0.1, SpectrumModel::DeltaLike).is_err());
        assert!(
            NoiseChannel::new(ChannelKind::CrystalTemperature, 0.1, SpectrumModel::White).is_err()
        );
        assert!(SpectrumModel::uniform_band(0.0).is_err());
        assert!(NoiseChannel::new(
            ChannelKind::PumpAmplitude,
            0.1,
            SpectrumModel::UniformBand { w_max: 0.05 }
        )
        .is_ok());
    }

    #[test]
    fn uniform_band_has_unit_variance() {
        let s = SpectrumModel::UniformBand { w_max: 0.05 };
        let r = crate::quad::integrate(
            |w| s.density(w).unwrap(),
            -0.05,
            0.05,
            Default::default(),
        );
        assert!((r.value / (2.0 * PI) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_names_round_trip() {
        for k in ChannelKind::ALL {
            assert_eq!(k.name().parse::<ChannelKind>().unwrap(), k);
        }
    }

    proptest! {
        #[test]
        fn normalization_is_scale_invariant(s in 0.01f64..100.0, frac in 0.0f64..0.99) {
            let raw = raw_tuned(frac);
            let scaled = RawParams {
                gamma0: raw.gamma0 * s,
                nu0: raw.nu0 * s,
                gamma1: raw.gamma1 * s,
                nu1: raw.nu1 * s,
                gamma2: raw.gamma2 * s,
                nu2: raw.nu2 * s,
                gamma1_mirror: raw.gamma1_mirror * s,
                pump_amplitude: raw.pump_amplitude * s,
                chi_bar: raw.chi_bar * s,
            };
            let a = normalize_params(&raw).unwrap();
            let b = normalize_params(&scaled).unwrap();
            prop_assert!((a.e_mag - b.e_mag).abs() < 1e-12);
            prop_assert!((a.kappa0_hat - b.kappa0_hat).norm() < 1e-12);
            prop_assert!((a.g_chi - b.g_chi).abs() < 1e-12 * a.g_chi);
            prop_assert!((a.gamma1_hat - b.gamma1_hat).abs() < 1e-12);
        }

        #[test]
        fn validity_is_monotone_in_weight(e in 0.0f64..0.999, g in 0.0f64..0.2, dg in 0.0f64..0.2) {
            let p = OpoParams::tuned(e, 2.0).unwrap();
            let lo = NoiseChannel::with_default_spectrum(ChannelKind::CrystalTemperature, g).unwrap();
            let hi = NoiseChannel::with_default_spectrum(ChannelKind::CrystalTemperature, g + dg).unwrap();
            let v_lo = validity_check(&p, &[lo]).valid;
            let v_hi = validity_check(&p, &[hi]).valid;
            prop_assert!(!(v_hi && !v_lo));
        }
    }
}
