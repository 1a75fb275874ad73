//! Monte Carlo oracle for the filtered-quadrature kurtosis.
//!
//! First-order fields are positive-P style surrogates: β and β† are built
//! from two independent real OU processes so that their products reproduce
//! the normally ordered correlations of the tuned device.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cmat::{c, theta_vec, CMat2, C64};
use crate::error::{OpoError, Result};
use crate::kurtosis::filter_fourier;
use crate::model::{DetectionFilter, NoiseChannel, OpoParams, SpectrumModel};
use crate::perturbation::b1_split;

/// Number of cosines in a band-limited noise path.
pub const BAND_MODES: usize = 256;
/// Batches used for batch-means error bars.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_samples: usize,
    pub dt: f64,
    pub burn_in: f64,
    pub seed: u64,
    /// Include the second-order response; off gives the linear field only.
    pub second_order: bool,
    pub samples_per_trajectory: usize,
    /// Number of step halvings applied to `dt` with shared randomness.
    pub refine: u32,
}

impl McConfig {
    /// Step and burn-in at their largest admissible values for `params`.
    pub fn for_params(params: &OpoParams, n_samples: usize, seed: u64) -> Self {
        let e = params.e_mag;
        Self {
            n_samples,
            dt: 0.05 / (1.0 + e),
            burn_in: 10.0 / (1.0 - e),
            seed,
            second_order: true,
            samples_per_trajectory: 50,
            refine: 0,
        }
    }

    pub fn validate(&self, params: &OpoParams) -> Result<()> {
        let e = params.e_mag;
        let bad = |name, reason: String| Err(OpoError::InvalidParameter { name, reason });
        if self.n_samples < 1000 {
            return bad("n_samples", format!("{} < 1000", self.n_samples));
        }
        if !(self.dt > 0.0 && self.dt <= 0.05 / (1.0 + e) * (1.0 + 1e-12)) {
            return bad("dt", format!("{} outside (0, 0.05/(1+E)]", self.dt));
        }
        if !(self.burn_in >= 10.0 / (1.0 - e) * (1.0 - 1e-12)) {
            return bad("burn_in", format!("{} < 10/(1-E)", self.burn_in));
        }
        if self.samples_per_trajectory == 0 {
            return bad("samples_per_trajectory", "must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KurtosisEstimate {
    pub k_hat: f64,
    pub stderr: f64,
    pub n_effective: usize,
    pub m2: C64,
    pub m4: C64,
}

/// Moment estimate with a batch-means error bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: C64,
    pub stderr: f64,
}

/// First-order surrogate fields on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFields {
    pub dt: f64,
    /// Antisqueezed component β + β†.
    pub u: Vec<f64>,
    /// Squeezed component β† − β.
    pub v: Vec<f64>,
}

impl LinearFields {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn beta(&self, i: usize) -> C64 {
        c(0.5 * (self.u[i] - self.v[i]))
    }

    pub fn beta_dag(&self, i: usize) -> C64 {
        c(0.5 * (self.u[i] + self.v[i]))
    }
}

/// A sampled classical noise path and the pump's first-order response to it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    /// N(t); for white noise the value held over [t, t+dt).
    pub n: Vec<f64>,
    /// a(t) = ∫e^{−κ̂₀(t−s)}N(s)ds.
    pub a: Vec<f64>,
    /// Whether `n` is piecewise constant (white) rather than smooth.
    pub held: bool,
}

/// Second-order field α⁽²⁾ in the (p, q) = (α+α†, α†−α) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrder {
    pub p: Vec<C64>,
    pub q: Vec<C64>,
}

impl SecondOrder {
    pub fn alpha(&self, i: usize) -> [C64; 2] {
        [(self.p[i] - self.q[i]) * 0.5, (self.p[i] + self.q[i]) * 0.5]
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn ou_path(rate: f64, var: f64, dt: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let decay = (-rate * dt).exp();
    let kick = (var * (1.0 - decay * decay)).sqrt();
    let mut x = var.sqrt() * normal(rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        x = x * decay + kick * normal(rng);
    }
    out
}

/// Halves the step of a stationary OU path `refine` times by sampling each
/// midpoint from the exact bridge, so coarse points are kept.
fn refine_ou(mut x: Vec<f64>, rate: f64, var: f64, mut dt: f64, refine: u32, rng: &mut impl Rng) -> Vec<f64> {
    for _ in 0..refine {
        dt *= 0.5;
        let rho = (-rate * dt).exp();
        let w = rho / (1.0 + rho * rho);
        let sd = (var * (1.0 - rho * rho) / (1.0 + rho * rho)).sqrt();
        let mut out = Vec::with_capacity(2 * x.len());
        for pair in x.windows(2) {
            out.push(pair[0]);
            out.push(w * (pair[0] + pair[1]) + sd * normal(rng));
        }
        out.extend(x.last());
        x = out;
    }
    x
}

/// Number of fine grid points after `refine` halvings of `n` points.
pub fn refined_len(n: usize, refine: u32) -> usize {
    if n == 0 {
        0
    } else {
        (n - 1) * (1 << refine) + 1
    }
}

/// Stationary first-order surrogate fields over `n_steps` points of step
/// `dt`, refined to step dt/2^refine.
pub fn synthesize_linear_fields(
    params: &OpoParams,
    dt: f64,
    n_steps: usize,
    refine: u32,
    rng: &mut impl Rng,
) -> Result<LinearFields> {
    params.require_tuned()?;
    let e = params.e_mag;
    if e == 0.0 {
        return Err(OpoError::ZeroPump);
    }
    if e >= 1.0 {
        return Err(OpoError::AboveThreshold(e));
    }
    let (ru, vu) = (1.0 - e, 2.0 / (e * (1.0 - e)));
    let (rv, vv) = (1.0 + e, 2.0 / (e * (1.0 + e)));
    let u = ou_path(ru, vu, dt, n_steps, rng);
    let v = ou_path(rv, vv, dt, n_steps, rng);
    let u = refine_ou(u, ru, vu, dt, refine, rng);
    let v = refine_ou(v, rv, vv, dt, refine, rng);
    Ok(LinearFields {
        dt: dt / f64::from(1u32 << refine),
        u,
        v,
    })
}

/// Unit-variance classical noise drawn from `spectrum` on the same grid as
/// [`synthesize_linear_fields`].
pub fn sample_noise_path(
    spectrum: SpectrumModel,
    kappa0: f64,
    dt: f64,
    n_steps: usize,
    refine: u32,
    rng: &mut impl Rng,
) -> NoisePath {
    let coarse = n_steps;
    let n_steps = refined_len(coarse, refine);
    let dt_coarse = dt;
    let dt = dt / f64::from(1u32 << refine);
    match spectrum {
        SpectrumModel::DeltaLike => {
            let x = normal(rng);
            NoisePath {
                n: vec![x; n_steps],
                a: vec![x / kappa0; n_steps],
                held: false,
            }
        }
        SpectrumModel::White => {
            let decay = (-kappa0 * dt).exp();
            let gain = (1.0 - decay) / kappa0;
            let mut a = (0.5 / kappa0).sqrt() * normal(rng);
            // Wiener increments on the coarse grid, split by Brownian bridges.
            let mut dw: Vec<f64> = (0..coarse).map(|_| dt_coarse.sqrt() * normal(rng)).collect();
            let mut h = dt_coarse;
            for _ in 0..refine {
                h *= 0.5;
                let mut out = Vec::with_capacity(2 * dw.len());
                for &d in &dw {
                    let first = 0.5 * d + (0.5 * h).sqrt() * normal(rng);
                    out.push(first);
                    out.push(d - first);
                }
                dw = out;
            }
            let mut ns = Vec::with_capacity(n_steps);
            let mut av = Vec::with_capacity(n_steps);
            for &d in dw.iter().take(n_steps) {
                let x = d / dt;
                ns.push(x);
                av.push(a);
                a = a * decay + x * gain;
            }
            NoisePath { n: ns, a: av, held: true }
        }
        SpectrumModel::UniformBand { w_max } => {
            let amp = (2.0 / BAND_MODES as f64).sqrt();
            let modes: Vec<(f64, C64)> = (0..BAND_MODES)
                .map(|k| {
                    let w = (k as f64 + 0.5) * w_max / BAND_MODES as f64;
                    (w, C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
                })
                .collect();
            let resp: Vec<C64> = modes.iter().map(|&(w, _)| C64::new(kappa0, w).inv() * amp).collect();
            // The path is smooth on the scale 1/w_max, so evaluate it on a
            // coarse grid with w_max·Δ ≤ 0.01 and interpolate.
            let stride = ((0.01 / (w_max * dt)).floor() as usize).clamp(1, 1 << 16);
            let mut ns = Vec::with_capacity(n_steps);
            let mut av = Vec::with_capacity(n_steps);
            let big = stride as f64 * dt;
            let rot: Vec<C64> = modes.iter().map(|&(w, _)| C64::from_polar(1.0, w * big)).collect();
            let mut z: Vec<C64> = Vec::new();
            let mut coarse = |k: usize| {
                // Exact phasors every 4096 coarse points, rotations between.
                if k.is_multiple_of(4096) {
                    let t = k as f64 * big;
                    z = modes.iter().map(|&(w, ph)| ph * C64::from_polar(1.0, w * t)).collect();
                } else {
                    z.iter_mut().zip(&rot).for_each(|(z, r)| *z *= r);
                }
                let (mut nv, mut a) = (0.0, 0.0);
                for (z, r) in z.iter().zip(&resp) {
                    nv += z.re;
                    a += (r * z).re;
                }
                (amp * nv, a)
            };
            let mut lo = coarse(0);
            let mut k = 0;
            while k * stride < n_steps {
                let hi = coarse(k + 1);
                let i = k * stride;
                for j in 0..stride.min(n_steps - i) {
                    let f = j as f64 / stride as f64;
                    ns.push(lo.0 + f * (hi.0 - lo.0));
                    av.push(lo.1 + f * (hi.1 - lo.1));
                }
                lo = hi;
                k += 1;
            }
            NoisePath { n: ns, a: av, held: false }
        }
    }
}

/// Exact step of y' = −λy + s(t) for s linear across the step.
#[derive(Debug, Clone, Copy)]
struct LinStep {
    decay: C64,
    phi1: C64,
    phi2: C64,
}

impl LinStep {
    fn new(lambda: C64, h: f64) -> Self {
        let x = lambda * h;
        let decay = (-x).exp();
        // φ₁ = (1−e^{−λh})/λ and φ₂ = (h−φ₁)/(λh), with series near λh = 0.
        let (phi1, phi2) = if x.norm() < 1e-4 {
            (h * (c(1.0) - x * 0.5 + x * x / 6.0), h * (c(0.5) - x / 6.0 + x * x / 24.0))
        } else {
            let p1 = (c(1.0) - decay) / lambda;
            (p1, (c(h) - p1) / x)
        };
        Self { decay, phi1, phi2 }
    }

    fn apply(&self, y: C64, s0: C64, s1: C64) -> C64 {
        y * self.decay + s0 * self.phi1 + (s1 - s0) * self.phi2
    }
}

/// α⁽²⁾ driven by B⁽¹⁾(τ)·α⁽¹⁾(τ) for one channel's sampled path.
pub fn second_order_response(
    fields: &LinearFields,
    path: &NoisePath,
    channel: &NoiseChannel,
    params: &OpoParams,
) -> Result<SecondOrder> {
    let n = fields.len();
    if channel.weight == 0.0 {
        return Ok(SecondOrder {
            p: vec![C64::default(); n],
            q: vec![C64::default(); n],
        });
    }
    let (bc, bp) = b1_split(channel.kind, params)?;
    let g = channel.weight;
    let e = params.e_mag;
    let b = |i: usize| (bc.scale(c(path.n[i])) + bp.scale(c(path.a[i]))).scale(c(g));
    let src = |m: &CMat2, i: usize| {
        let s = m.mul_vec([fields.beta(i), fields.beta_dag(i)]);
        (s[0] + s[1], s[1] - s[0])
    };
    let (sp, sq) = (LinStep::new(c(1.0 - e), fields.dt), LinStep::new(c(1.0 + e), fields.dt));
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let (mut yp, mut yq) = (C64::default(), C64::default());
    for i in 0..n {
        p.push(yp);
        q.push(yq);
        if i + 1 == n {
            break;
        }
        let bi = b(i);
        let (sp0, sq0) = src(&bi, i);
        let (sp1, sq1) = if path.held { src(&bi, i + 1) } else { src(&b(i + 1), i + 1) };
        yp = sp.apply(yp, sp0, sp1);
        yq = sq.apply(yq, sq0, sq1);
    }
    Ok(SecondOrder { p, q })
}

/// Quadrature θᵀα of the first-order field plus an optional second order.
pub fn quadrature_series(theta: f64, fields: &LinearFields, second: Option<&SecondOrder>) -> Vec<C64> {
    let tv = theta_vec(theta);
    (0..fields.len())
        .map(|i| {
            let mut a = [fields.beta(i), fields.beta_dag(i)];
            if let Some(s) = second {
                let b = s.alpha(i);
                a[0] += b[0];
                a[1] += b[1];
            }
            tv[0] * a[0] + tv[1] * a[1]
        })
        .collect()
}

/// Filtered samples V = ∫₀^∞e^{−γ_f d}cos(Ω_f d)X(t−d)dd taken every
/// `spacing` after `burn_in`.
pub fn filtered_quadrature(x: &[C64], dt: f64, filter: &DetectionFilter, burn_in: f64, spacing: f64) -> Result<Vec<C64>> {
    let memory = 8.0 / filter.gamma_f;
    let start = ((burn_in.max(memory)) / dt).ceil() as usize;
    let every = ((spacing / dt).round() as usize).max(1);
    filtered_at(x, dt, filter, start, every)
}

fn filtered_at(x: &[C64], dt: f64, filter: &DetectionFilter, start: usize, every: usize) -> Result<Vec<C64>> {
    if x.len() <= start {
        return Err(OpoError::TrajectoryTooShort(format!(
            "{} steps, need more than {start}",
            x.len()
        )));
    }
    let lp = LinStep::new(C64::new(filter.gamma_f, -filter.omega_f), dt);
    let lm = LinStep::new(C64::new(filter.gamma_f, filter.omega_f), dt);
    let (mut yp, mut ym) = (C64::default(), C64::default());
    let mut out = Vec::new();
    for i in 0..x.len() {
        if i >= start && (i - start).is_multiple_of(every) {
            out.push((yp + ym) * 0.5);
        }
        if i + 1 < x.len() {
            yp = lp.apply(yp, x[i], x[i + 1]);
            ym = lm.apply(ym, x[i], x[i + 1]);
        }
    }
    Ok(out)
}

/// Filter response to a constant unit input, γ_f/(γ_f²+Ω_f²).
pub fn filter_dc_gain(filter: &DetectionFilter) -> f64 {
    filter_fourier(0.0, filter).re
}

fn batches(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..BATCHES).map(|b| b * n / BATCHES..(b + 1) * n / BATCHES).collect()
}

fn mean_pow(s: &[C64], k: i32) -> C64 {
    s.iter().map(|v| v.powi(k)).sum::<C64>() / s.len() as f64
}

fn batch_stderr(values: &[f64]) -> f64 {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (var / values.len() as f64).sqrt()
}

/// Mean of V^k with a batch-means error on its real part.
pub fn sample_moment(samples: &[C64], k: i32) -> Result<MomentEstimate> {
    if samples.len() < BATCHES * 2 {
        return Err(OpoError::TrajectoryTooShort(format!("{} samples", samples.len())));
    }
    let per: Vec<f64> = batches(samples.len()).into_iter().map(|r| mean_pow(&samples[r], k).re).collect();
    Ok(MomentEstimate {
        value: mean_pow(samples, k),
        stderr: batch_stderr(&per),
    })
}

fn k_of(m2: C64, m4: C64) -> f64 {
    (m4.re - 3.0 * m2.re * m2.re) / (3.0 * m2.re * m2.re)
}

/// K̂ = (m₄ − 3m₂²)/(3m₂²) with a 20-batch error bar.
pub fn sample_kurtosis(samples: &[C64]) -> Result<KurtosisEstimate> {
    if samples.len() < 1000 {
        return Err(OpoError::TrajectoryTooShort(format!("{} samples < 1000", samples.len())));
    }
    let m2 = sample_moment(samples, 2)?;
    if m2.value.re <= 0.0 || m2.value.re <= 3.0 * m2.stderr {
        return Err(OpoError::DegenerateVariance(m2.value.re));
    }
    let m4 = mean_pow(samples, 4);
    let per: Vec<f64> = batches(samples.len())
        .into_iter()
        .map(|r| k_of(mean_pow(&samples[r.clone()], 2), mean_pow(&samples[r], 4)))
        .collect();
    Ok(KurtosisEstimate {
        k_hat: k_of(m2.value, m4),
        stderr: batch_stderr(&per),
        n_effective: samples.len(),
        m2: m2.value,
        m4,
    })
}

/// Filtered samples from one trajectory with its own random stream.
pub fn trajectory_samples(
    index: u64,
    n_out: usize,
    theta: f64,
    channel: &NoiseChannel,
    params: &OpoParams,
    filter: &DetectionFilter,
    cfg: &McConfig,
) -> Result<Vec<C64>> {
    // Separate streams keep the classical path fixed under refinement.
    let stream = |k: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(2 * index + k);
        r
    };
    let spacing = 10.0 / filter.gamma_f;
    let burn = cfg.burn_in.max(8.0 / filter.gamma_f);
    let start = (burn / cfg.dt).ceil() as usize;
    let every = ((spacing / cfg.dt).round() as usize).max(1);
    let n_steps = start + every * n_out + 1;
    let fine = 1usize << cfg.refine;
    let fields = synthesize_linear_fields(params, cfg.dt, n_steps, cfg.refine, &mut stream(0))?;
    let second = if cfg.second_order {
        let path = sample_noise_path(channel.spectrum, params.kappa0(), cfg.dt, n_steps, cfg.refine, &mut stream(1));
        Some(second_order_response(&fields, &path, channel, params)?)
    } else {
        None
    };
    let x = quadrature_series(theta, &fields, second.as_ref());
    let mut v = filtered_at(&x, fields.dt, filter, start * fine, every * fine)?;
    v.truncate(n_out);
    Ok(v)
}

/// All samples of a run, ordered by trajectory index.
pub fn run_samples(
    theta: f64,
    channel: &NoiseChannel,
    params: &OpoParams,
    filter: &DetectionFilter,
    cfg: &McConfig,
) -> Result<Vec<C64>> {
    cfg.validate(params)?;
    let per = cfg.samples_per_trajectory;
    let n_traj = cfg.n_samples.div_ceil(per);
    let work = || {
        (0..n_traj)
            .into_par_iter()
            .map(|i| {
                let n_out = per.min(cfg.n_samples - i * per);
                trajectory_samples(i as u64, n_out, theta, channel, params, filter, cfg)
            })
            .collect::<Result<Vec<_>>>()
    };
    let chunks = match std::env::var("OPO_NG_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| OpoError::InvalidParameter {
                name: "OPO_NG_THREADS",
                reason: e.to_string(),
            })?
            .install(work)?,
        _ => work()?,
    };
    Ok(chunks.concat())
}

/// Monte Carlo K̂ at one quadrature phase.
pub fn mc_kurtosis(
    theta: f64,
    channel: &NoiseChannel,
    params: &OpoParams,
    filter: &DetectionFilter,
    cfg: &McConfig,
) -> Result<KurtosisEstimate> {
    sample_kurtosis(&run_samples(theta, channel, params, filter, cfg)?)
}
