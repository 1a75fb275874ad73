use std::path::PathBuf;

use clap::{Args, ValueEnum};
use opo_ng::config::RunConfig;
use opo_ng::figures::{emit_figure_data, Figure};
use opo_ng::fit::{fit_drift_model, load_records, FitOptions, FitParams};
use opo_ng::intracavity::{lambda_nl, sigma_nl_variance};
use opo_ng::kurtosis::{
    kurtosis_curve_with_drift, kurtosis_terms, theta_grid, upsilon_theta, DriftModel, DriftScale,
    KNormalization,
};
use opo_ng::linear::{green_freq, sigma11_spectrum, Mode};
use opo_ng::mc::{mc_kurtosis, run_samples, sample_moment, McConfig};
use opo_ng::{ChannelKind, DetectionFilter, OpoError, Result};

use crate::output::{emit, Cell, RunManifest, Table};
use crate::{Cli, Command, Global};

#[derive(Debug, Args)]
pub struct LambdaArgs {
    /// Emit the excitation sweep for kappa0 in {5, 10} instead of one point.
    #[arg(long)]
    pub sweep: bool,
    /// Add a column evaluated from the second-order hierarchy by quadrature.
    #[arg(long)]
    pub hierarchy: bool,
}

#[derive(Debug, Args)]
pub struct UpsilonArgs {
    /// Channel: chi0, mu, phase, nu or temp.
    #[arg(long)]
    pub channel: ChannelKind,
    /// Number of theta points on (-pi, pi].
    #[arg(long, default_value_t = 64)]
    pub theta_grid: usize,
}

#[derive(Debug, Args)]
pub struct KurtosisArgs {
    /// Number of theta points on (-pi, pi].
    #[arg(long, default_value_t = 64)]
    pub theta_grid: usize,
    /// Detuning drift during the scan: alpha,theta0,e0.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub drift: Option<[f64; 3]>,
    /// Read the drift e0 as an amplitude instead of a power ratio.
    #[arg(long, requires = "drift")]
    pub drift_amplitude: bool,
    /// Normalize by this measured variance instead of the computed one.
    #[arg(long, conflicts_with = "with_vacuum")]
    pub experimental_variance: Option<f64>,
    /// Add the output vacuum level to the computed variance.
    #[arg(long)]
    pub with_vacuum: bool,
    /// Restrict to these channels (comma-separated); default all five.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<ChannelKind>>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Channel: chi0, mu, phase, nu or temp.
    #[arg(long)]
    pub channel: ChannelKind,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Integration step; default 0.05/(1+E).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Quadrature phases (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
    pub theta: Vec<f64>,
    /// Step halvings with shared randomness.
    #[arg(long, default_value_t = 0)]
    pub refine: u32,
    /// Sample the linear field only and report its variance.
    #[arg(long)]
    pub linear_only: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Records with columns theta,k[,variance,e2,theta_err,k_err].
    #[arg(long)]
    pub data: PathBuf,
    /// Starting point e0,alpha,theta0,g.
    #[arg(long, value_parser = parse_quad, allow_hyphen_values = true)]
    pub init: Option<[f64; 4]>,
    /// Weight residuals by 1/k_err^2.
    #[arg(long)]
    pub weighted: bool,
    /// Hold parameters fixed (comma-separated names: e0, alpha, theta0, g_mu).
    #[arg(long, value_delimiter = ',')]
    pub fix: Vec<String>,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Which {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

#[derive(Debug, Args)]
pub struct FigsArgs {
    #[arg(long, value_enum)]
    pub which: Which,
}

#[derive(Debug, Args)]
pub struct GreenArgs {
    /// Grid runs over [-omega_max, omega_max].
    #[arg(long, default_value_t = 5.0)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_quad(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

fn resolve(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(k) = g.kappa0 {
        cfg.params = cfg.params.with_kappa0(k)?;
    }
    if let Some(e) = g.e_mag {
        cfg.params = cfg.params.with_e(e)?;
    }
    Ok(cfg)
}

/// Runs `f`, retrying once with γ_f nudged when the poles coincide and the
/// user asked for it.
fn with_fallback<T>(
    g: &Global,
    filter: &DetectionFilter,
    mut f: impl FnMut(&DetectionFilter) -> Result<T>,
) -> Result<T> {
    match f(filter) {
        Err(OpoError::DegeneratePole(msg)) if g.perturb_degenerate => {
            log::warn!("degenerate poles ({msg}); retrying with gamma_f + 1e-6");
            f(&DetectionFilter::new(filter.omega_f, filter.gamma_f + 1e-6)?)
        }
        r => r,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let cfg = resolve(g)?;
    let out = g.out.as_deref();
    let mut manifest = RunManifest {
        subcommand: "",
        config: &cfg,
        seed: None,
        extra: Vec::new(),
    };
    let table = match &cli.command {
        Command::Lambda(a) => {
            manifest.subcommand = "lambda";
            lambda(a, &cfg)?
        }
        Command::Upsilon(a) => {
            manifest.subcommand = "upsilon";
            with_fallback(g, &cfg.filter, |f| upsilon(a, &cfg, f))?
        }
        Command::Kurtosis(a) => {
            manifest.subcommand = "kurtosis";
            if let Some(d) = a.drift {
                manifest.extra.push(("drift alpha,theta0,e0".into(), format!("{:e},{:e},{:e}", d[0], d[1], d[2])));
            }
            if let Some(v) = a.experimental_variance {
                manifest.extra.push(("experimental variance".into(), format!("{v:e}")));
            }
            with_fallback(g, &cfg.filter, |f| kurtosis(a, &cfg, f))?
        }
        Command::Mc(a) => {
            manifest.subcommand = "mc";
            manifest.seed = Some(a.seed);
            manifest.extra.push(("channel".into(), a.channel.to_string()));
            manifest.extra.push(("samples".into(), a.samples.to_string()));
            manifest.extra.push(("refine".into(), a.refine.to_string()));
            mc(a, &cfg)?
        }
        Command::Fit(a) => {
            manifest.subcommand = "fit";
            manifest.extra.push(("data".into(), a.data.display().to_string()));
            fit(a, &cfg, &mut manifest.extra)?
        }
        Command::Figs(a) => {
            manifest.subcommand = "figs";
            manifest.extra.push(("figure".into(), format!("{:?}", a.which).to_lowercase()));
            with_fallback(g, &cfg.filter, |f| figs(a, &cfg, f))?
        }
        Command::Green(a) => {
            manifest.subcommand = "green";
            green(a, &cfg)?
        }
    };
    emit(&manifest, &table, out)
}

fn lambda(a: &LambdaArgs, cfg: &RunConfig) -> Result<Table> {
    let mut cols = vec!["channel", "e", "kappa0", "lambda"];
    if a.hierarchy {
        cols.push("hierarchy");
    }
    let mut t = Table::new(&cols);
    let points: Vec<(f64, f64)> = if a.sweep {
        let mut es: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        es.extend([0.97, 0.99, 0.995, 0.999, 0.9999]);
        [5.0, 10.0]
            .iter()
            .flat_map(|&k| es.iter().map(move |&e| (e, k)))
            .collect()
    } else {
        vec![(cfg.params.e_mag, cfg.params.kappa0())]
    };
    for (e, k) in points {
        let p = cfg.params.with_kappa0(k)?.with_e(e)?;
        for ch in &cfg.channels {
            let mut row: Vec<Cell> = vec![
                ch.kind.name().into(),
                e.into(),
                k.into(),
                lambda_nl(ch.kind, &p)?.into(),
            ];
            if a.hierarchy {
                let unit = opo_ng::NoiseChannel { weight: 1.0, ..*ch };
                row.push(sigma_nl_variance(&unit, &p)?.into());
            }
            t.push(row);
        }
    }
    Ok(t)
}

fn check_grid(n: usize) -> Result<()> {
    if n < 2 {
        return Err(OpoError::InvalidParameter {
            name: "theta_grid",
            reason: format!("need at least 2 points, got {n}"),
        });
    }
    Ok(())
}

fn upsilon(a: &UpsilonArgs, cfg: &RunConfig, filter: &DetectionFilter) -> Result<Table> {
    check_grid(a.theta_grid)?;
    let ch = *cfg.channel(a.channel).ok_or(OpoError::UnsupportedChannel(a.channel))?;
    let unit = opo_ng::NoiseChannel { weight: 1.0, ..ch };
    let mut t = Table::new(&["theta", "upsilon", "weighted"]);
    for th in theta_grid(a.theta_grid) {
        let u = upsilon_theta(&unit, th, &cfg.params, filter)?;
        t.push(vec![th.into(), u.into(), (ch.weight * ch.weight * u).into()]);
    }
    Ok(t)
}

fn kurtosis(a: &KurtosisArgs, cfg: &RunConfig, filter: &DetectionFilter) -> Result<Table> {
    check_grid(a.theta_grid)?;
    let channels: Vec<_> = match &a.channels {
        Some(list) => list
            .iter()
            .map(|k| cfg.channel(*k).copied().ok_or(OpoError::UnsupportedChannel(*k)))
            .collect::<Result<_>>()?,
        None => cfg.channels.clone(),
    };
    let norm = match (a.experimental_variance, a.with_vacuum) {
        (Some(v), _) => KNormalization::Experimental(v),
        (None, true) => KNormalization::WithVacuum,
        (None, false) => KNormalization::NormalOrdered,
    };
    let thetas = theta_grid(a.theta_grid);
    let mut cols = vec!["theta".to_string(), "k".into(), "e_mag".into()];
    let curve = match a.drift {
        Some([alpha, theta0, e0]) => {
            let scale = if a.drift_amplitude {
                DriftScale::Amplitude
            } else {
                DriftScale::Squared
            };
            let drift = DriftModel::for_cavity(e0, alpha, theta0, cfg.params.kappa0(), scale)?;
            kurtosis_curve_with_drift(&thetas, &drift, &channels, filter, &cfg.params, norm)?
        }
        None => {
            let mut k = Vec::new();
            let mut terms = Vec::new();
            for &th in &thetas {
                let row = kurtosis_terms(th, &channels, &cfg.params, filter, norm)?;
                k.push(row.iter().map(|x| x.1).sum());
                terms.push(row);
            }
            let kinds: Vec<ChannelKind> = terms.first().map(|r| r.iter().map(|x| x.0).collect()).unwrap_or_default();
            opo_ng::kurtosis::KurtosisCurve {
                theta: thetas.clone(),
                k,
                e_mag: vec![cfg.params.e_mag; thetas.len()],
                breakdown: kinds
                    .iter()
                    .enumerate()
                    .map(|(i, &kd)| (kd, terms.iter().map(|r| r[i].1).collect()))
                    .collect(),
            }
        }
    };
    cols.extend(curve.breakdown.iter().map(|(k, _)| k.name().to_string()));
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for i in 0..curve.theta.len() {
        let mut row: Vec<Cell> = vec![curve.theta[i].into(), curve.k[i].into(), curve.e_mag[i].into()];
        row.extend(curve.breakdown.iter().map(|(_, v)| Cell::Num(v[i])));
        t.push(row);
    }
    Ok(t)
}

fn mc(a: &McArgs, cfg: &RunConfig) -> Result<Table> {
    let ch = *cfg.channel(a.channel).ok_or(OpoError::UnsupportedChannel(a.channel))?;
    let p = &cfg.params;
    let mut mc_cfg = McConfig::for_params(p, a.samples, a.seed);
    if let Some(dt) = a.dt {
        mc_cfg.dt = dt;
    }
    mc_cfg.refine = a.refine;
    mc_cfg.second_order = !a.linear_only;
    let mut t = if a.linear_only {
        Table::new(&["theta", "variance", "stderr", "n", "analytic"])
    } else {
        Table::new(&["theta", "k_hat", "stderr", "n", "analytic"])
    };
    for &th in &a.theta {
        if a.linear_only {
            let s = run_samples(th, &ch, p, &cfg.filter, &mc_cfg)?;
            let m = sample_moment(&s, 2)?;
            let want = opo_ng::kurtosis::linear_filtered_variance(th, p, &cfg.filter)?;
            t.push(vec![th.into(), m.value.re.into(), m.stderr.into(), s.len().into(), want.into()]);
        } else {
            let k = mc_kurtosis(th, &ch, p, &cfg.filter, &mc_cfg)?;
            let want = opo_ng::kurtosis::kurtosis_total(th, &[ch], p, &cfg.filter, KNormalization::NormalOrdered)?;
            t.push(vec![th.into(), k.k_hat.into(), k.stderr.into(), k.n_effective.into(), want.into()]);
        }
    }
    Ok(t)
}

fn fit(a: &FitArgs, cfg: &RunConfig, extra: &mut Vec<(String, String)>) -> Result<Table> {
    let records = load_records(&a.data)?;
    let init = a.init.map(FitParams::from_array).unwrap_or_else(FitParams::reported);
    let mut fixed = [false; 4];
    for name in &a.fix {
        let i = FitParams::NAMES
            .iter()
            .position(|n| n == name || (name == "g" && *n == "g_mu"))
            .ok_or_else(|| OpoError::InvalidParameter {
                name: "fix",
                reason: format!("unknown parameter '{name}'"),
            })?;
        fixed[i] = true;
    }
    let opts = FitOptions {
        kappa0_hat: cfg.params.kappa0(),
        max_iter: a.max_iter,
        weighted: a.weighted,
        fixed,
        ..Default::default()
    };
    let r = fit_drift_model(&records, init, &cfg.filter, opts)?;
    extra.push(("records".into(), records.len().to_string()));
    extra.push(("rss".into(), format!("{:.16e}", r.rss)));
    extra.push(("iterations".into(), r.iterations.to_string()));
    let mut t = Table::new(&["parameter", "value", "half_width", "status"]);
    for (i, v) in r.params.to_array().iter().enumerate() {
        let name = FitParams::NAMES[i];
        let status = if fixed[i] {
            "fixed"
        } else if r.flat.contains(&name) {
            "flat"
        } else {
            "free"
        };
        t.push(vec![name.into(), (*v).into(), r.half_widths[i].into(), status.into()]);
    }
    Ok(t)
}

fn figs(a: &FigsArgs, cfg: &RunConfig, filter: &DetectionFilter) -> Result<Table> {
    let fig = match a.which {
        Which::Fig1 => Figure::Fig1,
        Which::Fig2 => Figure::Fig2,
        Which::Fig3 => Figure::Fig3,
        Which::Fig4 => Figure::Fig4,
        Which::Fig5 => Figure::Fig5,
        Which::Fig6 => Figure::Fig6,
    };
    let ft = emit_figure_data(fig, &cfg.params, &cfg.channels, filter)?;
    Ok(Table {
        columns: ft.columns,
        rows: ft
            .rows
            .into_iter()
            .map(|r| r.into_iter().map(Cell::Num).collect())
            .collect(),
    })
}

fn green(a: &GreenArgs, cfg: &RunConfig) -> Result<Table> {
    if a.points < 2 || !(a.omega_max > 0.0) {
        return Err(OpoError::InvalidParameter {
            name: "grid",
            reason: "need omega_max > 0 and at least 2 points".into(),
        });
    }
    let names = ["aa", "aad", "ada", "adad"];
    let mut cols = vec!["omega".to_string()];
    for prefix in ["g", "s"] {
        for n in names {
            cols.push(format!("{prefix}_{n}_re"));
            cols.push(format!("{prefix}_{n}_im"));
        }
    }
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    let p = &cfg.params;
    for i in 0..a.points {
        let om = -a.omega_max + 2.0 * a.omega_max * i as f64 / (a.points - 1) as f64;
        let mut row: Vec<Cell> = vec![om.into()];
        for m in [green_freq(Mode::Signal, om, p), sigma11_spectrum(om, p)?] {
            for z in m.entries() {
                row.push(z.re.into());
                row.push(z.im.into());
            }
        }
        t.push(row);
    }
    Ok(t)
}
