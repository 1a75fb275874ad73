//! Experimental records and the least-squares drift-model fit.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{OpoError, Result};
use crate::kurtosis::{excitation_with_detuning, kurtosis_total, DriftModel, DriftScale, KNormalization};
use crate::model::{ChannelKind, DetectionFilter, NoiseChannel, OpoParams};

/// One measured point of a θ scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRecord {
    pub theta: f64,
    pub kurtosis: f64,
    pub variance: Option<f64>,
    pub e_squared: Option<f64>,
    pub theta_err: Option<f64>,
    pub k_err: Option<f64>,
}

impl ExperimentRecord {
    pub fn new(theta: f64, kurtosis: f64) -> Self {
        Self {
            theta,
            kurtosis,
            variance: None,
            e_squared: None,
            theta_err: None,
            k_err: None,
        }
    }
}

const COLUMNS: [&str; 6] = ["theta", "k", "variance", "e2", "theta_err", "k_err"];

/// Reads a header-tagged CSV with columns theta,k and optionally
/// variance,e2,theta_err,k_err. Lines starting with `#` are skipped.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let text = std::fs::read_to_string(path)?;
    parse_records(&text)
}

pub fn parse_records(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let perr = |line: u64, column: usize, message: String| OpoError::ParseError {
        line: line as usize,
        column,
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| perr(e.position().map_or(1, |p| p.line()), 1, e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(OpoError::EmptyDataset);
    }
    let mut index = [None; 6];
    for (i, h) in headers.iter().enumerate() {
        match COLUMNS.iter().position(|c| c.eq_ignore_ascii_case(h)) {
            Some(k) => index[k] = Some(i),
            None => return Err(perr(1, i + 1, format!("unknown column '{h}'"))),
        }
    }
    for (k, name) in COLUMNS.iter().enumerate().take(2) {
        if index[k].is_none() {
            return Err(perr(1, 1, format!("missing required column '{name}'")));
        }
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| perr(e.position().map_or(0, |p| p.line()), 1, e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<Option<f64>> {
            let Some(i) = index[k] else { return Ok(None) };
            let s = row.get(i).unwrap_or("");
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| perr(line, i + 1, format!("'{s}' is not a number")))
        };
        let col = |k: usize| index[k].map_or(1, |i| i + 1);
        let theta = field(0)?.ok_or_else(|| perr(line, col(0), "theta is required".into()))?;
        let kurtosis = field(1)?.ok_or_else(|| perr(line, col(1), "k is required".into()))?;
        if !(theta > -PI && theta <= PI) {
            return Err(perr(line, col(0), format!("theta {theta} outside (-pi, pi]")));
        }
        if !kurtosis.is_finite() {
            return Err(perr(line, col(1), "k must be finite".into()));
        }
        let k_err = field(5)?;
        if k_err.is_some_and(|e| !(e >= 0.0)) {
            return Err(perr(line, col(5), "k_err must be non-negative".into()));
        }
        out.push(ExperimentRecord {
            theta,
            kurtosis,
            variance: field(2)?,
            e_squared: field(3)?,
            theta_err: field(4)?,
            k_err,
        });
    }
    if out.is_empty() {
        return Err(OpoError::EmptyDataset);
    }
    Ok(out)
}

/// Parameters of the drift fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub e0: f64,
    pub alpha: f64,
    pub theta0: f64,
    pub g_mu: f64,
}

impl FitParams {
    pub const NAMES: [&'static str; 4] = ["e0", "alpha", "theta0", "g_mu"];

    /// Values reported for the 200 ms scan.
    pub fn reported() -> Self {
        Self {
            e0: 0.932,
            alpha: 0.013,
            theta0: PI,
            g_mu: 0.007,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.e0, self.alpha, self.theta0, self.g_mu]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            e0: a[0],
            alpha: a[1],
            theta0: a[2],
            g_mu: a[3],
        }
    }

    pub fn in_box(&self) -> bool {
        self.e0 > 0.0
            && self.e0 < 1.0
            && self.alpha.abs() <= 0.1
            && self.theta0 > -PI
            && self.theta0 <= PI
            && self.g_mu > 0.0
            && self.g_mu < 0.1
    }

    pub fn drift(&self, kappa0_hat: f64) -> Result<DriftModel> {
        DriftModel::for_cavity(self.e0, self.alpha, self.theta0, kappa0_hat, DriftScale::Squared)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub kappa0_hat: f64,
    pub max_iter: usize,
    /// Weight residuals by 1/k_err².
    pub weighted: bool,
    /// Parameters held at their initial values, in [`FitParams::NAMES`] order.
    pub fixed: [bool; 4],
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            kappa0_hat: 2.0,
            max_iter: 2000,
            weighted: false,
            fixed: [false; 4],
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: FitParams,
    pub drift: DriftModel,
    pub rss: f64,
    /// Curvature-based 1σ half-widths; infinite along flat directions.
    pub half_widths: [f64; 4],
    /// Names of free parameters the data do not constrain.
    pub flat: Vec<&'static str>,
    pub iterations: usize,
    /// Best objective value after each simplex iteration.
    pub history: Vec<f64>,
}

fn norm_for(r: &ExperimentRecord) -> KNormalization {
    match r.variance {
        Some(v) => KNormalization::Experimental(v),
        None => KNormalization::WithVacuum,
    }
}

/// Model K_θ at each record's θ for the PumpAmplitude channel alone.
pub fn model_values(
    records: &[ExperimentRecord],
    params: &FitParams,
    filter: &DetectionFilter,
    kappa0_hat: f64,
) -> Result<Vec<f64>> {
    let drift = params.drift(kappa0_hat)?;
    let ch = NoiseChannel::with_default_spectrum(ChannelKind::PumpAmplitude, params.g_mu)?;
    let base = OpoParams::tuned(0.5, kappa0_hat)?;
    records
        .par_iter()
        .map(|r| {
            let e = excitation_with_detuning(&drift, r.theta);
            if e >= 1.0 {
                return Err(OpoError::AboveThreshold(e));
            }
            kurtosis_total(r.theta, &[ch], &base.with_e(e)?, filter, norm_for(r))
        })
        .collect()
}

/// Forward-model records with multiplicative Gaussian noise of relative size
/// `noise`.
pub fn synthetic_records(
    thetas: &[f64],
    params: &FitParams,
    filter: &DetectionFilter,
    kappa0_hat: f64,
    noise: f64,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    let mut recs: Vec<_> = thetas.iter().map(|&t| ExperimentRecord::new(t, 0.0)).collect();
    let k = model_values(&recs, params, filter, kappa0_hat)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    for (r, k) in recs.iter_mut().zip(k) {
        r.kurtosis = k * (1.0 + noise * n.sample(&mut rng));
        r.k_err = Some((noise * k).abs());
    }
    Ok(recs)
}

struct Objective<'a> {
    records: &'a [ExperimentRecord],
    filter: &'a DetectionFilter,
    opts: FitOptions,
    weights: Vec<f64>,
}

impl Objective<'_> {
    fn rss(&self, p: &FitParams) -> f64 {
        if !p.in_box() {
            return f64::INFINITY;
        }
        match model_values(self.records, p, self.filter, self.opts.kappa0_hat) {
            Ok(m) => self
                .records
                .iter()
                .zip(&m)
                .zip(&self.weights)
                .map(|((r, m), w)| w * (m - r.kurtosis).powi(2))
                .sum(),
            // Threshold crossings and numerical failures act as a wall.
            Err(_) => f64::INFINITY,
        }
    }
}

/// Least-squares fit of (E₀, α, θ₀, g_μp) by Nelder–Mead in a box.
pub fn fit_drift_model(
    records: &[ExperimentRecord],
    init: FitParams,
    filter: &DetectionFilter,
    opts: FitOptions,
) -> Result<FitResult> {
    if records.is_empty() {
        return Err(OpoError::EmptyDataset);
    }
    if records.len() < 8 {
        return Err(OpoError::InvalidParameter {
            name: "records",
            reason: format!("{} records, need at least 8", records.len()),
        });
    }
    let lo = records.iter().map(|r| r.theta).fold(f64::INFINITY, f64::min);
    let hi = records.iter().map(|r| r.theta).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= PI / 2.0 {
        return Err(OpoError::InvalidParameter {
            name: "records",
            reason: format!("theta span {:.3} is not more than half a period", hi - lo),
        });
    }
    if !init.in_box() {
        return Err(OpoError::InvalidParameter {
            name: "init",
            reason: format!("{init:?} outside the parameter box"),
        });
    }
    let weights = records
        .iter()
        .map(|r| match (opts.weighted, r.k_err) {
            (true, Some(e)) if e > 0.0 => 1.0 / (e * e),
            _ => 1.0,
        })
        .collect();
    let obj = Objective {
        records,
        filter,
        opts,
        weights,
    };
    let free: Vec<usize> = (0..4).filter(|&i| !opts.fixed[i]).collect();
    let x0 = init.to_array();
    let embed = |y: &[f64]| {
        let mut a = x0;
        for (k, &i) in free.iter().enumerate() {
            a[i] = y[k];
        }
        FitParams::from_array(a)
    };
    let steps = [0.01, 0.002 + 0.2 * init.alpha.abs(), 0.2, 0.1 * init.g_mu];
    let start: Vec<f64> = free.iter().map(|&i| x0[i]).collect();
    let step: Vec<f64> = free
        .iter()
        .map(|&i| {
            // Step into the box from a vertex sitting on its edge.
            let s = steps[i];
            let mut t = x0;
            t[i] += s;
            if FitParams::from_array(t).in_box() { s } else { -s }
        })
        .collect();
    let nm = nelder_mead(|y| obj.rss(&embed(y)), &start, &step, opts.tol, opts.max_iter)?;
    let mut params = embed(&nm.x);
    let (half_widths, flat) = curvature(&obj, params, &free, nm.f);
    // The simplex wanders freely along unconstrained directions; report the
    // starting value there instead of wherever it stopped.
    let mut a = params.to_array();
    for name in &flat {
        let i = FitParams::NAMES.iter().position(|n| n == name).expect("known name");
        a[i] = x0[i];
    }
    params = FitParams::from_array(a);
    Ok(FitResult {
        params,
        drift: params.drift(opts.kappa0_hat)?,
        rss: nm.f,
        half_widths,
        flat,
        iterations: nm.iterations,
        history: nm.history,
    })
}

fn curvature(obj: &Objective, p: FitParams, free: &[usize], rss: f64) -> ([f64; 4], Vec<&'static str>) {
    let x = p.to_array();
    let h: Vec<f64> = (0..4)
        .map(|i| match i {
            0 => 1e-4 * x[0].max(1e-3),
            1 => 1e-4,
            2 => 1e-3,
            _ => 1e-3 * x[3],
        })
        .collect();
    let f = |d: &[(usize, f64)]| {
        let mut a = x;
        for &(i, s) in d {
            a[i] += s;
        }
        // Reflect probes that leave the box so the difference stays defined.
        let q = FitParams::from_array(a);
        if q.in_box() {
            obj.rss(&q)
        } else {
            let mut b = x;
            for &(i, s) in d {
                b[i] -= s;
            }
            obj.rss(&FitParams::from_array(b))
        }
    };
    let n = free.len();
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for (a, &i) in free.iter().enumerate() {
        hess[(a, a)] = (f(&[(i, h[i])]) - 2.0 * rss + f(&[(i, -h[i])])) / (h[i] * h[i]);
        for (b, &j) in free.iter().enumerate().skip(a + 1) {
            let v = (f(&[(i, h[i]), (j, h[j])]) - f(&[(i, h[i]), (j, -h[j])]) - f(&[(i, -h[i]), (j, h[j])])
                + f(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    // Curvature in units of each parameter's probe step.
    let scaled: Vec<f64> = free.iter().enumerate().map(|(a, &i)| hess[(a, a)].abs() * h[i] * h[i]).collect();
    let top = scaled.iter().copied().fold(0.0, f64::max);
    let is_flat: Vec<bool> = scaled.iter().map(|&c| !(c > 1e-10 * top) || top == 0.0).collect();
    let keep: Vec<usize> = (0..n).filter(|&a| !is_flat[a]).collect();
    let mut half = [0.0; 4];
    let mut flat = Vec::new();
    for (a, &i) in free.iter().enumerate() {
        if is_flat[a] {
            half[i] = f64::INFINITY;
            flat.push(FitParams::NAMES[i]);
        }
    }
    let dof = (obj.records.len() as f64 - keep.len() as f64).max(1.0);
    let sigma2 = rss / dof;
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |r, c| 0.5 * hess[(keep[r], keep[c])]);
    if let Some(inv) = sub.try_inverse() {
        for (r, &a) in keep.iter().enumerate() {
            half[free[a]] = (sigma2 * inv[(r, r)]).abs().sqrt();
        }
    } else {
        for &a in &keep {
            half[free[a]] = f64::INFINITY;
        }
    }
    (half, flat)
}

/// Outcome of a Nelder–Mead minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Nelder–Mead with standard coefficients. Converges when the spread of
/// vertex values falls below `tol` relative to the best value.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], tol: f64, max_iter: usize) -> Result<SimplexResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        let v = f(x0);
        return Ok(SimplexResult {
            x: vec![],
            f: v,
            iterations: 0,
            history: vec![v],
        });
    }
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut history = Vec::new();
    for it in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        history.push(vals[0]);
        let spread = (vals[n] - vals[0]).abs();
        // Simplex extent in units of the initial steps.
        let size = (1..=n)
            .flat_map(|i| (0..n).map(move |k| (i, k)))
            .map(|(i, k)| ((pts[i][k] - pts[0][k]) / step[k]).abs())
            .fold(0.0, f64::max);
        if vals[n].is_finite() && spread <= tol * (vals[0].abs() + 1e-300) || size < 1e-9 {
            return Ok(SimplexResult {
                x: pts[0].clone(),
                f: vals[0],
                iterations: it,
                history,
            });
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    pts[i] = (0..n).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    Err(OpoError::NonConvergence(max_iter))
}
