//! Tables behind the six published figures.
//!
//! Every table is a header row followed by numeric rows, one column per
//! curve. Columns named after a channel carry unit-weight Υ or λ values
//! unless the table says otherwise.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{OpoError, Result};
use crate::intracavity::lambda_nl;
use crate::kurtosis::{
    kurtosis_curve_with_drift, theta_grid, upsilon_coeffs, DriftModel, KNormalization,
};
use crate::model::{ChannelKind, DetectionFilter, NoiseChannel, OpoParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig1,
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }
}

impl FromStr for Figure {
    type Err = OpoError;
    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| OpoError::InvalidParameter {
                name: "figure",
                reason: format!("unknown figure '{s}'"),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub figure: Figure,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FigureTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Comma-separated text at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Excitations of the Fig. 2 panels.
pub const FIG2_EXCITATIONS: [f64; 3] = [0.71, 0.87, 0.975];
/// The five measured pump strengths E².
pub const FIG6_E_SQUARED: [f64; 5] = [0.5, 0.7, 0.8, 0.9, 0.95];
/// Pump-amplitude weight of the reported scan.
pub const FIG5_G_MU: f64 = 0.007;

/// Computes the table for one figure.
///
/// `params` supplies κ̂₀ (where the figure does not sweep it), γ̂₁ and g_χ;
/// `channels` supplies the spectra, and the weights for Fig. 6.
pub fn emit_figure_data(
    figure: Figure,
    params: &OpoParams,
    channels: &[NoiseChannel],
    filter: &DetectionFilter,
) -> Result<FigureTable> {
    params.require_tuned()?;
    let chans = coupled(channels)?;
    let (columns, rows) = match figure {
        Figure::Fig1 => fig1(params)?,
        Figure::Fig2 => fig2(params, &chans, filter)?,
        Figure::Fig3 => fig3(params, &chans, filter)?,
        Figure::Fig4 => fig4(params, &chans, filter)?,
        Figure::Fig5 => fig5(params, &chans, filter)?,
        Figure::Fig6 => fig6(params, &chans, filter)?,
    };
    Ok(FigureTable {
        figure,
        columns,
        rows,
    })
}

type Table = (Vec<String>, Vec<Vec<f64>>);

fn coupled(channels: &[NoiseChannel]) -> Result<Vec<NoiseChannel>> {
    ChannelKind::COUPLED
        .iter()
        .map(|&k| match channels.iter().find(|c| c.kind == k) {
            Some(c) => Ok(*c),
            None => NoiseChannel::with_default_spectrum(k, crate::DefaultWeights::weight(k)),
        })
        .collect()
}

fn unit(ch: &NoiseChannel) -> NoiseChannel {
    NoiseChannel { weight: 1.0, ..*ch }
}

fn fig1(params: &OpoParams) -> Result<Table> {
    const KAPPAS: [f64; 2] = [5.0, 10.0];
    let mut es: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    es.extend([0.97, 0.99, 0.995, 0.999, 0.9999]);
    let mut columns = vec!["e".to_string()];
    for k in KAPPAS {
        for ch in ChannelKind::COUPLED {
            columns.push(format!("{ch}_k{k}"));
        }
    }
    let rows = es
        .iter()
        .map(|&e| {
            let mut row = vec![e];
            for k in KAPPAS {
                let p = params.with_kappa0(k)?.with_e(e)?;
                for ch in ChannelKind::COUPLED {
                    row.push(lambda_nl(ch, &p)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok((columns, rows))
}

fn fig2(params: &OpoParams, chans: &[NoiseChannel], filter: &DetectionFilter) -> Result<Table> {
    let mut columns = vec!["theta".to_string()];
    let mut coeffs = Vec::new();
    for e in FIG2_EXCITATIONS {
        let p = params.with_e(e)?;
        for ch in chans {
            columns.push(format!("{}_e{e}", ch.kind));
            coeffs.push(upsilon_coeffs(&unit(ch), &p, filter)?);
        }
    }
    let rows = (0..=200)
        .map(|i| {
            let t = -PI / 2.0 + PI * i as f64 / 200.0;
            let mut row = vec![t];
            row.extend(coeffs.iter().map(|c| c.eval(t)));
            row
        })
        .collect();
    Ok((columns, rows))
}

fn fig3(params: &OpoParams, chans: &[NoiseChannel], filter: &DetectionFilter) -> Result<Table> {
    let mut columns = vec!["kappa0".to_string()];
    columns.extend(chans.iter().map(|c| c.kind.to_string()));
    let thetas: Vec<f64> = (0..=400).map(|i| -PI / 2.0 + PI * i as f64 / 400.0).collect();
    let rows = (0..=16)
        .into_par_iter()
        .map(|i| {
            let k = 2.0 + 0.5 * i as f64;
            let p = params.with_kappa0(k)?.with_e(0.975)?;
            let mut row = vec![k];
            for ch in chans {
                let u = upsilon_coeffs(&unit(ch), &p, filter)?;
                row.push(thetas.iter().map(|&t| u.eval(t)).fold(f64::NEG_INFINITY, f64::max));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok((columns, rows))
}

fn fig4(params: &OpoParams, chans: &[NoiseChannel], filter: &DetectionFilter) -> Result<Table> {
    let shown = [ChannelKind::ChiPump, ChannelKind::PumpAmplitude];
    let mut columns = vec!["one_minus_e2".to_string()];
    columns.extend(shown.iter().map(|k| k.to_string()));
    let n = 25;
    let (lo, hi) = (0.03f64.ln(), 0.5f64.ln());
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
            let p = params.with_e((1.0 - x).sqrt())?;
            let mut row = vec![x];
            for k in shown {
                let ch = chans.iter().find(|c| c.kind == k).expect("coupled channel");
                row.push(upsilon_coeffs(&unit(ch), &p, filter)?.eval(0.0));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok((columns, rows))
}

fn fig5(params: &OpoParams, chans: &[NoiseChannel], filter: &DetectionFilter) -> Result<Table> {
    let r = DriftModel::reported_fit();
    let drift = DriftModel::for_cavity(r.e0, r.alpha, r.theta0, params.kappa0(), r.scale)?;
    let mu = chans
        .iter()
        .find(|c| c.kind == ChannelKind::PumpAmplitude)
        .expect("coupled channel");
    let ch = NoiseChannel {
        weight: FIG5_G_MU,
        ..*mu
    };
    let curve = kurtosis_curve_with_drift(
        &theta_grid(360),
        &drift,
        &[ch],
        filter,
        params,
        KNormalization::WithVacuum,
    )?;
    let columns = ["theta", "k", "e_mag"].map(String::from).to_vec();
    let rows = (0..curve.theta.len())
        .map(|i| vec![curve.theta[i], curve.k[i], curve.e_mag[i]])
        .collect();
    Ok((columns, rows))
}

fn fig6(params: &OpoParams, chans: &[NoiseChannel], filter: &DetectionFilter) -> Result<Table> {
    let mut columns = vec!["e2".to_string()];
    columns.extend(chans.iter().map(|c| c.kind.to_string()));
    columns.push("total".into());
    let rows = FIG6_E_SQUARED
        .par_iter()
        .map(|&e2| {
            let p = params.with_e(e2.sqrt())?;
            let mut row = vec![e2];
            for ch in chans {
                let u0 = upsilon_coeffs(&unit(ch), &p, filter)?.eval(0.0);
                row.push(ch.weight * ch.weight * u0);
            }
            row.push(row[1..].iter().sum());
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok((columns, rows))
}
