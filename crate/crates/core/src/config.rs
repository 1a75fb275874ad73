//! Flat `key = value` configuration files.
//!
//! Every key is optional. Missing device keys fall back to a tuned device at
//! κ̂₀ = 2, E = 0.5; missing weights fall back to [`DefaultWeights`].
//! `kappa0_hat` is either a number or a `[re, im]` pair. The filter keys
//! `omega_f` and `gamma_f` default to [`DetectionFilter::typical`].

use std::path::Path;

use serde::Deserialize;

use crate::cmat::C64;
use crate::error::{OpoError, Result};
use crate::model::{
    ChannelKind, DefaultWeights, DetectionFilter, NoiseChannel, OpoParams, SpectrumModel,
    DEFAULT_MU_BAND,
};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum Kappa {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kappa0_hat: Option<Kappa>,
    e_mag: Option<f64>,
    psi: Option<f64>,
    psi0: Option<f64>,
    gamma1_hat: Option<f64>,
    g_chi: Option<f64>,
    g_mu: Option<f64>,
    g_phase: Option<f64>,
    g_nu: Option<f64>,
    g_temp: Option<f64>,
    spectrum_mu_band: Option<f64>,
    omega_f: Option<f64>,
    gamma_f: Option<f64>,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: OpoParams,
    /// The five coupled channels, in canonical order.
    pub channels: Vec<NoiseChannel>,
    pub filter: DetectionFilter,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_raw(RawConfig::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            OpoError::ParseError {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn from_raw(r: RawConfig) -> Result<Self> {
        let k0 = match r.kappa0_hat.unwrap_or(Kappa::Real(2.0)) {
            Kappa::Real(x) => C64::new(x, 0.0),
            Kappa::Complex([re, im]) => C64::new(re, im),
        };
        let params = OpoParams::new(
            k0,
            r.e_mag.unwrap_or(0.5),
            r.psi.unwrap_or(0.0),
            r.psi0.unwrap_or(0.0),
            r.gamma1_hat.unwrap_or(1.0),
            r.g_chi.unwrap_or(DefaultWeights::G_CHI),
        )?;
        let band = SpectrumModel::uniform_band(r.spectrum_mu_band.unwrap_or(DEFAULT_MU_BAND))?;
        let w = |v: Option<f64>, k: ChannelKind| v.unwrap_or(DefaultWeights::weight(k));
        let channels = vec![
            NoiseChannel::with_default_spectrum(ChannelKind::ChiPump, params.g_chi)?,
            NoiseChannel::new(
                ChannelKind::PumpAmplitude,
                w(r.g_mu, ChannelKind::PumpAmplitude),
                band,
            )?,
            NoiseChannel::with_default_spectrum(
                ChannelKind::PumpPhase,
                w(r.g_phase, ChannelKind::PumpPhase),
            )?,
            NoiseChannel::with_default_spectrum(
                ChannelKind::CavityDetuning,
                w(r.g_nu, ChannelKind::CavityDetuning),
            )?,
            NoiseChannel::with_default_spectrum(
                ChannelKind::CrystalTemperature,
                w(r.g_temp, ChannelKind::CrystalTemperature),
            )?,
        ];
        let typ = DetectionFilter::typical();
        let filter = DetectionFilter::new(
            r.omega_f.unwrap_or(typ.omega_f),
            r.gamma_f.unwrap_or(typ.gamma_f),
        )?;
        Ok(Self {
            params,
            channels,
            filter,
        })
    }

    pub fn channel(&self, kind: ChannelKind) -> Option<&NoiseChannel> {
        self.channels.iter().find(|c| c.kind == kind)
    }

    /// The resolved values as `key = value` lines that parse back to `self`.
    pub fn to_lines(&self) -> Vec<String> {
        let p = &self.params;
        let w = |k: ChannelKind| self.channel(k).map_or(0.0, |c| c.weight);
        let band = match self.channel(ChannelKind::PumpAmplitude).map(|c| c.spectrum) {
            Some(SpectrumModel::UniformBand { w_max }) => w_max,
            _ => DEFAULT_MU_BAND,
        };
        let k0 = if p.kappa0_hat.im == 0.0 {
            format!("{:e}", p.kappa0_hat.re)
        } else {
            format!("[{:e}, {:e}]", p.kappa0_hat.re, p.kappa0_hat.im)
        };
        vec![
            format!("kappa0_hat = {k0}"),
            format!("e_mag = {:e}", p.e_mag),
            format!("psi = {:e}", p.psi),
            format!("psi0 = {:e}", p.psi0),
            format!("gamma1_hat = {:e}", p.gamma1_hat),
            format!("g_chi = {:e}", p.g_chi),
            format!("g_mu = {:e}", w(ChannelKind::PumpAmplitude)),
            format!("g_phase = {:e}", w(ChannelKind::PumpPhase)),
            format!("g_nu = {:e}", w(ChannelKind::CavityDetuning)),
            format!("g_temp = {:e}", w(ChannelKind::CrystalTemperature)),
            format!("spectrum_mu_band = {band:e}"),
            format!("omega_f = {:e}", self.filter.omega_f),
            format!("gamma_f = {:e}", self.filter.gamma_f),
        ]
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}
