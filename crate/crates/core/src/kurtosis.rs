//! Kurtosis excess of the filtered homodyne quadrature.
//!
//! The cross-correlation ς̃_ι(w) between first- and second-order filtered
//! fields is a sum over the four upper-half-plane poles of the ω-integrand.
//! Υ_θι is then the noise-spectrum average of its square.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cmat::{c, theta_vec, CMat2, C64, I};
use crate::error::{OpoError, Result};
use crate::linear::{char_freqs, green_numerator, sigma_tn_poly};
use crate::model::{ChannelKind, DetectionFilter, NoiseChannel, OpoParams, SpectrumModel};
use crate::perturbation::b1_scaled;
use crate::quad::{integrate, QuadOptions};

const POLE_TOL: f64 = 1e-9;

/// Filter poles Ω± = ±Ω_f − iγ_f.
pub fn filter_poles(filter: &DetectionFilter) -> (C64, C64) {
    (
        C64::new(filter.omega_f, -filter.gamma_f),
        C64::new(-filter.omega_f, -filter.gamma_f),
    )
}

pub fn filter_fourier_c(z: C64, filter: &DetectionFilter) -> C64 {
    let (op, om) = filter_poles(filter);
    0.5 * I * ((z - om).inv() + (z - op).inv())
}

/// Transfer function of the exponential-cosine detection window.
pub fn filter_fourier(omega: f64, filter: &DetectionFilter) -> C64 {
    filter_fourier_c(c(omega), filter)
}

/// ∫|F̃_f(ω)|² dω/2π, the energy of the filter kernel.
pub fn filter_energy(filter: &DetectionFilter) -> f64 {
    let (g, o) = (filter.gamma_f, filter.omega_f);
    0.25 / g + 0.25 * g / (g * g + o * o)
}

/// Pole data shared by the residue sums of a tuned device.
#[derive(Debug, Clone, Copy)]
struct Poles {
    wp: C64,
    wm: C64,
    op: C64,
    om: C64,
    /// ω_l = ω₊, ω₋, −Ω₊, −Ω₋.
    omega: [C64; 4],
    /// Residues of F̃(−ω)/((ω²−ω₊²)(ω²−ω₋²)) at ω_l.
    coef: [C64; 4],
    filter: DetectionFilter,
}

fn check_distinct(points: &[C64], what: &str) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm() < POLE_TOL {
                return Err(OpoError::DegeneratePole(format!(
                    "{what}: {} and {} coincide",
                    points[i], points[j]
                )));
            }
        }
    }
    Ok(())
}

impl Poles {
    fn new(params: &OpoParams, filter: &DetectionFilter) -> Result<Self> {
        params.require_tuned()?;
        if params.e_mag == 0.0 {
            return Err(OpoError::ZeroPump);
        }
        let cf = char_freqs(params);
        let (wp, wm) = (cf.omega_plus, cf.omega_minus);
        let (op, om) = filter_poles(filter);
        let omega = [wp, wm, -op, -om];
        check_distinct(&omega, "pole set")?;
        check_distinct(&[op, om, -wp, -wm], "transfer poles")?;
        for w in omega {
            assert!(w.im > 0.0, "pole {w} left the upper half plane");
        }
        let f = |z: C64| filter_fourier_c(z, filter);
        let q = |z: C64| (z * z - wp * wp) * (z * z - wm * wm);
        let coef = [
            f(-wp) / (2.0 * wp * (wp * wp - wm * wm)),
            f(-wm) / (2.0 * wm * (wm * wm - wp * wp)),
            -0.5 * I / q(op),
            -0.5 * I / q(om),
        ];
        Ok(Self {
            wp,
            wm,
            op,
            om,
            omega,
            coef,
            filter: *filter,
        })
    }

    fn denom(&self, z: C64) -> C64 {
        -(z + self.wp) * (z + self.wm)
    }

    /// H⁽ˡ⁾(w) = C_l·F̃(w+ω_l)/D̃(w+ω_l).
    fn h(&self, l: usize, w: C64) -> C64 {
        let z = w + self.omega[l];
        self.coef[l] * filter_fourier_c(z, &self.filter) / self.denom(z)
    }

    /// Poles z_p of F̃(z)/D̃(z) with their residues.
    fn transfer_residues(&self) -> [(C64, C64); 4] {
        let f = |z: C64| filter_fourier_c(z, &self.filter);
        [
            (self.op, 0.5 * I / self.denom(self.op)),
            (self.om, 0.5 * I / self.denom(self.om)),
            (-self.wp, -f(-self.wp) / (self.wm - self.wp)),
            (-self.wm, -f(-self.wm) / (self.wp - self.wm)),
        ]
    }
}

/// σ̃_ι(w, ω_l) = (1+T̂)[(κ̂₀−iw)·D̃(w+ω_l)G̃(w+ω_l)·B̃_ι(w)·σ̃_TN(ω_l)].
fn entire_part(kind: ChannelKind, l: usize, w: C64, poles: &Poles, params: &OpoParams) -> Result<CMat2> {
    let z = w + poles.omega[l];
    let m = green_numerator(z, params)
        * b1_scaled(kind, w, params)?
        * sigma_tn_poly(poles.omega[l], params.e_mag);
    Ok(m.symmetrize())
}

/// Σ_l H⁽ˡ⁾(w)·σ̃_ι(w, ω_l).
fn residue_sum(kind: ChannelKind, w: C64, poles: &Poles, params: &OpoParams) -> Result<CMat2> {
    let mut acc = CMat2::zero();
    for l in 0..4 {
        acc += entire_part(kind, l, w, poles, params)?.scale(poles.h(l, w));
    }
    Ok(acc)
}

fn varsigma_with(kind: ChannelKind, w: C64, poles: &Poles, params: &OpoParams) -> Result<CMat2> {
    let pre = I / (params.kappa0_hat - I * w);
    let s = residue_sum(kind, w, poles, params)?.scale(pre);
    if !s.is_finite() {
        return Err(OpoError::DegeneratePole(format!("w = {w} hits a pole")));
    }
    Ok(s)
}

/// Cross-correlation matrix ς̃_ι(w) of the filtered first- and second-order
/// fields, by residues.
pub fn varsigma(
    kind: ChannelKind,
    w: C64,
    params: &OpoParams,
    filter: &DetectionFilter,
) -> Result<CMat2> {
    let poles = Poles::new(params, filter)?;
    varsigma_with(kind, w, &poles, params)
}

fn band_options() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-10,
        max_intervals: 2000,
    }
}

/// Υ_θι for a unit-weight channel.
pub fn upsilon_theta(
    channel: &NoiseChannel,
    theta: f64,
    params: &OpoParams,
    filter: &DetectionFilter,
) -> Result<f64> {
    let poles = Poles::new(params, filter)?;
    upsilon_with(channel, theta, &poles, params)
}

fn upsilon_with(channel: &NoiseChannel, theta: f64, poles: &Poles, params: &OpoParams) -> Result<f64> {
    let kind = channel.kind;
    let tv = theta_vec(theta);
    let cw = |w: C64| -> Result<C64> { Ok(varsigma_with(kind, w, poles, params)?.bilinear(tv)) };
    match channel.spectrum {
        SpectrumModel::DeltaLike => {
            let c0 = cw(c(0.0))?;
            Ok((c0 * c0).re)
        }
        SpectrumModel::UniformBand { w_max } => {
            let mut err = None;
            let r = integrate(
                |w: f64| match (cw(c(w)), cw(c(-w))) {
                    (Ok(a), Ok(b)) => (a * b).re,
                    (Err(e), _) | (_, Err(e)) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                -w_max,
                w_max,
                band_options(),
            );
            if let Some(e) = err {
                return Err(e);
            }
            Ok(r.into_result()? / (2.0 * w_max))
        }
        SpectrumModel::White => upsilon_white(kind, tv, poles, params),
    }
}

/// Lower-half-plane singularities of c(w) = θᵀς̃(w)θ: the pump pole −iκ̂₀ and
/// the poles of each H⁽ˡ⁾.
fn lower_poles(poles: &Poles, params: &OpoParams) -> Vec<C64> {
    let mut v = vec![-I * params.kappa0_hat];
    for l in 0..4 {
        for (zp, _) in poles.transfer_residues() {
            let wp = zp - poles.omega[l];
            assert!(wp.im < 0.0, "w-pole {wp} not in the lower half plane");
            v.push(wp);
        }
    }
    v
}

/// A group of nearby poles enclosed by one circle.
struct Cluster {
    center: C64,
    radius: f64,
}

/// Single-linkage clusters whose enclosing circles stay well clear of every
/// other singularity (including the mirrored poles of c(−w)).
fn clusters(lower: &[C64]) -> Result<Vec<Cluster>> {
    let mirrored: Vec<C64> = lower.iter().map(|z| -z).collect();
    let mut tol = 1e-7;
    while tol < 1.0 {
        let n = lower.len();
        let mut label: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in 0..i {
                if (lower[i] - lower[j]).norm() < tol {
                    let (a, b) = (label[i], label[j]);
                    for x in label.iter_mut() {
                        if *x == a {
                            *x = b;
                        }
                    }
                }
            }
        }
        let mut groups: Vec<usize> = label.clone();
        groups.sort_unstable();
        groups.dedup();
        let mut out = Vec::new();
        let mut ok = true;
        for g in groups {
            let members: Vec<C64> = (0..n).filter(|&i| label[i] == g).map(|i| lower[i]).collect();
            let center = members.iter().sum::<C64>() / members.len() as f64;
            let d_in = members.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
            let d_out = (0..n)
                .filter(|&i| label[i] != g)
                .map(|i| lower[i])
                .chain(mirrored.iter().copied())
                .map(|z| (z - center).norm())
                .fold(f64::INFINITY, f64::min);
            if d_out < 4.0 * d_in {
                ok = false;
                break;
            }
            let radius = if d_in == 0.0 { 0.5 * d_out } else { (d_in * d_out).sqrt() };
            out.push(Cluster { center, radius });
        }
        if ok {
            return Ok(out);
        }
        tol *= 10.0;
    }
    Err(OpoError::DegeneratePole(
        "lower-half-plane poles cannot be separated".into(),
    ))
}

const CONTOUR_POINTS: usize = 256;

/// (1/2π)∫c(−w)c(w)dw closed in the lower half plane. The residue of each
/// pole cluster is a trapezoidal contour integral, which stays exact when
/// poles coincide (the pump pole meets −(ω₊+ω₋) whenever κ̂₀ = 2).
fn upsilon_white(kind: ChannelKind, tv: [C64; 2], poles: &Poles, params: &OpoParams) -> Result<f64> {
    let g = |w: C64| -> Result<C64> {
        let a = varsigma_with(kind, w, poles, params)?.bilinear(tv);
        let b = varsigma_with(kind, -w, poles, params)?.bilinear(tv);
        Ok(a * b)
    };
    let mut total = C64::default();
    let mut scale: f64 = 0.0;
    for cl in clusters(&lower_poles(poles, params))? {
        let mut acc = C64::default();
        for k in 0..CONTOUR_POINTS {
            let u = C64::from_polar(cl.radius, 2.0 * PI * (k as f64 + 0.5) / CONTOUR_POINTS as f64);
            let v = g(cl.center + u)? * u;
            scale = scale.max(v.norm());
            acc += v;
        }
        total += acc / CONTOUR_POINTS as f64;
    }
    // ∫dw/2π = −i·ΣRes over the lower half plane.
    let v = -I * total;
    if !v.re.is_finite() {
        return Err(OpoError::DegeneratePole("non-finite residue sum".into()));
    }
    if v.im.abs() > 1e-8 * scale.max(v.re.abs()) {
        log::warn!("residue sum carries imaginary part {:e}", v.im);
    }
    Ok(v.re)
}

/// Υ(θ) = u4·cos4θ + u2·cos2θ + u0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpsilonCoeffs {
    pub u4: f64,
    pub u2: f64,
    pub u0: f64,
}

impl UpsilonCoeffs {
    pub fn from_samples(at0: f64, at_quarter: f64, at_half: f64) -> Self {
        Self {
            u4: (at0 + at_half - 2.0 * at_quarter) / 4.0,
            u2: (at0 - at_half) / 2.0,
            u0: (at0 + at_half + 2.0 * at_quarter) / 4.0,
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.u4 * (4.0 * theta).cos() + self.u2 * (2.0 * theta).cos() + self.u0
    }
}

pub fn upsilon_coeffs(
    channel: &NoiseChannel,
    params: &OpoParams,
    filter: &DetectionFilter,
) -> Result<UpsilonCoeffs> {
    let poles = Poles::new(params, filter)?;
    let a = upsilon_with(channel, 0.0, &poles, params)?;
    let b = upsilon_with(channel, PI / 4.0, &poles, params)?;
    let cc = upsilon_with(channel, PI / 2.0, &poles, params)?;
    Ok(UpsilonCoeffs::from_samples(a, b, cc))
}

/// Normally ordered variance ⟨:V_θ⁽¹⁾²:⟩ of the filtered linear field.
pub fn linear_filtered_variance(theta: f64, params: &OpoParams, filter: &DetectionFilter) -> Result<f64> {
    let poles = Poles::new(params, filter)?;
    let tv = theta_vec(theta);
    let mut acc = C64::default();
    for l in 0..4 {
        let wl = poles.omega[l];
        acc += filter_fourier_c(wl, filter) * poles.coef[l] * sigma_tn_poly(wl, params.e_mag).bilinear(tv);
    }
    Ok((I * acc).re)
}

/// Vacuum contribution to the filtered output variance.
pub fn vacuum_filtered_variance(params: &OpoParams, filter: &DetectionFilter) -> f64 {
    let e = params.e_mag;
    filter_energy(filter) / (4.0 * params.gamma1_hat * e * e)
}

/// Variance used to normalize the kurtosis excess.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum KNormalization {
    /// The normally ordered linear variance at the same θ.
    #[default]
    NormalOrdered,
    /// Normally ordered variance plus the output vacuum level.
    WithVacuum,
    /// A fixed measured variance in the same units.
    Experimental(f64),
}

impl KNormalization {
    pub fn variance(&self, theta: f64, params: &OpoParams, filter: &DetectionFilter) -> Result<f64> {
        match *self {
            KNormalization::NormalOrdered => linear_filtered_variance(theta, params, filter),
            KNormalization::WithVacuum => Ok(linear_filtered_variance(theta, params, filter)?
                + vacuum_filtered_variance(params, filter)),
            KNormalization::Experimental(v) => {
                if v == 0.0 || !v.is_finite() {
                    Err(OpoError::DegenerateVariance(v))
                } else {
                    Ok(v)
                }
            }
        }
    }
}

fn canonical(channels: &[NoiseChannel]) -> Vec<NoiseChannel> {
    let mut v: Vec<_> = channels
        .iter()
        .filter(|ch| ch.kind != ChannelKind::ChiSignal)
        .copied()
        .collect();
    v.sort_by_key(|ch| ch.kind);
    v
}

/// Per-channel terms g_ι²Υ_θι/var² in canonical channel order.
pub fn kurtosis_terms(
    theta: f64,
    channels: &[NoiseChannel],
    params: &OpoParams,
    filter: &DetectionFilter,
    norm: KNormalization,
) -> Result<Vec<(ChannelKind, f64)>> {
    let report = crate::model::validity_check(params, channels);
    if !report.valid {
        log::warn!("perturbative bound violated (margin {:e})", report.margin);
    }
    let active = canonical(channels);
    if active.iter().all(|ch| ch.weight == 0.0) {
        return Ok(active.iter().map(|ch| (ch.kind, 0.0)).collect());
    }
    let poles = Poles::new(params, filter)?;
    let var = norm.variance(theta, params, filter)?;
    active
        .iter()
        .map(|ch| {
            if ch.weight == 0.0 {
                return Ok((ch.kind, 0.0));
            }
            let u = upsilon_with(ch, theta, &poles, params)?;
            Ok((ch.kind, ch.weight * ch.weight * u / (var * var)))
        })
        .collect()
}

/// K_θ ≃ Σ_ι g_ι²Υ_θι / var².
pub fn kurtosis_total(
    theta: f64,
    channels: &[NoiseChannel],
    params: &OpoParams,
    filter: &DetectionFilter,
    norm: KNormalization,
) -> Result<f64> {
    Ok(kurtosis_terms(theta, channels, params, filter, norm)?
        .iter()
        .map(|t| t.1)
        .sum())
}

/// How the drift formula's E₀ is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftScale {
    /// E₀ and the returned value are field amplitudes |E|.
    #[default]
    Amplitude,
    /// E₀ is a pump-power ratio E²; the formula yields E² and |E| is its root.
    Squared,
}

/// Slow cavity-detuning drift during a θ scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftModel {
    pub e0: f64,
    pub alpha: f64,
    pub theta0: f64,
    pub gamma_s: f64,
    pub gamma_p: f64,
    pub scale: DriftScale,
}

impl DriftModel {
    pub fn new(e0: f64, alpha: f64, theta0: f64, gamma_s: f64, gamma_p: f64, scale: DriftScale) -> Result<Self> {
        if !(gamma_s > 0.0) {
            return Err(OpoError::NonPositiveRate("gamma_s"));
        }
        if !(gamma_p > 0.0) {
            return Err(OpoError::NonPositiveRate("gamma_p"));
        }
        if !(0.0..1.0).contains(&e0) {
            return Err(OpoError::AboveThreshold(e0));
        }
        Ok(Self {
            e0,
            alpha,
            theta0,
            gamma_s,
            gamma_p,
            scale,
        })
    }

    /// Signal linewidth 1 and pump linewidth κ̂₀, the tuned cavity's own rates.
    pub fn for_cavity(e0: f64, alpha: f64, theta0: f64, kappa0_hat: f64, scale: DriftScale) -> Result<Self> {
        Self::new(e0, alpha, theta0, 1.0, kappa0_hat, scale)
    }

    /// The fitted drift reported for the 200 ms θ scan.
    pub fn reported_fit() -> Self {
        Self {
            e0: 0.932,
            alpha: 0.013,
            theta0: PI,
            gamma_s: 1.0,
            gamma_p: 2.0,
            scale: DriftScale::Squared,
        }
    }

    pub fn detuning(&self, theta: f64) -> f64 {
        self.alpha * (theta - self.theta0)
    }
}

/// |E(θ)| under the drift model.
pub fn excitation_with_detuning(drift: &DriftModel, theta: f64) -> f64 {
    let nu = drift.detuning(theta);
    let a = 1.0 + 4.0 * nu * nu / (drift.gamma_s * drift.gamma_s);
    let b = 1.0 + nu * nu / (drift.gamma_p * drift.gamma_p);
    let v = drift.e0 / (a * b).sqrt();
    match drift.scale {
        DriftScale::Amplitude => v,
        DriftScale::Squared => v.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KurtosisCurve {
    pub theta: Vec<f64>,
    pub k: Vec<f64>,
    pub e_mag: Vec<f64>,
    /// Per-channel contributions, aligned with `theta`.
    pub breakdown: Vec<(ChannelKind, Vec<f64>)>,
}

impl KurtosisCurve {
    pub fn e_span(&self) -> f64 {
        let lo = self.e_mag.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.e_mag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

/// K_θ over a θ grid with E rebuilt from the drift model at each point.
pub fn kurtosis_curve_with_drift(
    thetas: &[f64],
    drift: &DriftModel,
    channels: &[NoiseChannel],
    filter: &DetectionFilter,
    base: &OpoParams,
    norm: KNormalization,
) -> Result<KurtosisCurve> {
    let rows: Vec<(f64, Vec<(ChannelKind, f64)>)> = thetas
        .par_iter()
        .map(|&t| {
            let e = excitation_with_detuning(drift, t);
            if e >= 1.0 {
                return Err(OpoError::AboveThreshold(e));
            }
            let p = base.with_e(e)?;
            Ok((e, kurtosis_terms(t, channels, &p, filter, norm)?))
        })
        .collect::<Result<_>>()?;
    let kinds: Vec<ChannelKind> = rows
        .first()
        .map(|r| r.1.iter().map(|t| t.0).collect())
        .unwrap_or_default();
    let breakdown = kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, rows.iter().map(|r| r.1[i].1).collect()))
        .collect();
    Ok(KurtosisCurve {
        theta: thetas.to_vec(),
        k: rows.iter().map(|r| r.1.iter().map(|t| t.1).sum()).collect(),
        e_mag: rows.iter().map(|r| r.0).collect(),
        breakdown,
    })
}

/// Uniform grid of n points on (−π, π].
pub fn theta_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpectrumModel;
    use crate::quad::{integrate, QuadOptions};

    fn tuned(e: f64, k0: f64) -> OpoParams {
        OpoParams::tuned(e, k0).unwrap()
    }

    fn chan(kind: ChannelKind, g: f64) -> NoiseChannel {
        NoiseChannel::with_default_spectrum(kind, g).unwrap()
    }

    #[test]
    fn filter_at_zero_and_time_kernel() {
        let f = DetectionFilter::typical();
        let v = filter_fourier(0.0, &f);
        assert!((v.re - 0.15 / 0.1125).abs() < 1e-14 && v.im.abs() < 1e-14);
        for om in [0.0, 0.3, -0.7] {
            let r = integrate(
                |s: f64| (0.15 * s).exp() * (0.3 * s).cos() * (-I * om * s).exp(),
                -400.0,
                0.0,
                QuadOptions::new(1e-14, 1e-12),
            );
            assert!((r.value - filter_fourier(om, &f)).norm() < 1e-10);
        }
        let big = filter_fourier(1e6, &f);
        assert!((big * 1e6 - I).norm() < 1e-5);
        assert!(filter_fourier(0.3, &f).is_finite());
        let (a, b) = filter_poles(&f);
        assert!(a.im < 0.0 && b.im < 0.0);
    }

    #[test]
    fn zero_pump_couplings_vanish() {
        let p = tuned(1e-12, 2.0);
        let f = DetectionFilter::typical();
        for kind in [ChannelKind::CrystalTemperature, ChannelKind::PumpAmplitude] {
            let m = varsigma(kind, c(0.1), &p, &f);
            // Below the numerical E floor the pole set degenerates; either an
            // error or a vanishing matrix is acceptable.
            if let Ok(m) = m {
                assert!(m.max_abs() < 1e-6, "{kind}");
            }
        }
    }

    #[test]
    fn upsilon_even_and_nonnegative() {
        let f = DetectionFilter::typical();
        for (e, k0) in [(0.5, 2.0), (0.87, 3.5)] {
            let p = tuned(e, k0);
            for kind in ChannelKind::COUPLED {
                let ch = chan(kind, 1.0);
                for th in [0.1, 0.7, 1.3, 2.9] {
                    let a = upsilon_theta(&ch, th, &p, &f).unwrap();
                    let b = upsilon_theta(&ch, -th, &p, &f).unwrap();
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{kind} {th}");
                    assert!(a >= -1e-12 * a.abs().max(1.0), "{kind} {th}: {a}");
                }
            }
        }
    }

    #[test]
    fn coefficients_reconstruct_upsilon() {
        let f = DetectionFilter::typical();
        let p = tuned(0.87, 2.0);
        for kind in ChannelKind::COUPLED {
            let ch = chan(kind, 1.0);
            let u = upsilon_coeffs(&ch, &p, &f).unwrap();
            for th in [PI / 3.0, 0.2, 1.1, -2.4] {
                let d = upsilon_theta(&ch, th, &p, &f).unwrap();
                assert!((u.eval(th) - d).abs() <= 1e-8 * d.abs().max(u.u0.abs()), "{kind} {th}");
            }
        }
        let flat = UpsilonCoeffs::from_samples(2.0, 2.0, 2.0);
        assert_eq!((flat.u4, flat.u2, flat.u0), (0.0, 0.0, 2.0));
    }

    #[test]
    fn temperature_coefficients_flat_in_kappa0() {
        let f = DetectionFilter::typical();
        let ch = chan(ChannelKind::CrystalTemperature, 1.0);
        let base = upsilon_coeffs(&ch, &tuned(0.87, 2.0), &f).unwrap();
        for k0 in [5.0, 10.0] {
            let u = upsilon_coeffs(&ch, &tuned(0.87, k0), &f).unwrap();
            for (a, b) in [(u.u4, base.u4), (u.u2, base.u2), (u.u0, base.u0)] {
                assert!((a - b).abs() <= 0.01 * b.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn antisqueezed_variance_dominates() {
        let f = DetectionFilter::typical();
        for e in [0.2, 0.6, 0.95] {
            let p = tuned(e, 2.0);
            let a = linear_filtered_variance(0.0, &p, &f).unwrap();
            let s = linear_filtered_variance(PI / 2.0, &p, &f).unwrap();
            assert!(a > s.abs() && s < 0.0);
        }
    }

    #[test]
    fn broad_filter_recovers_squeezed_variance() {
        // A filter much wider than the cavity weights the whole squeezing
        // band by its DC response, once per filtered field.
        let p = tuned(0.5, 2.0);
        let f = DetectionFilter::new(1.0, 1e4).unwrap();
        let v = linear_filtered_variance(PI / 2.0, &p, &f).unwrap();
        let unfiltered = -1.0 / (2.0 * 0.5 * 1.5);
        let norm = filter_fourier(0.0, &f).re;
        assert!((v / (norm * norm * unfiltered) - 1.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn kurtosis_scales_with_weight_squared() {
        let f = DetectionFilter::typical();
        let p = tuned(0.92f64.sqrt(), 2.0);
        for th in [0.0, 0.5, 1.2] {
            let a = kurtosis_total(th, &[chan(ChannelKind::PumpAmplitude, 0.007)], &p, &f, KNormalization::WithVacuum)
                .unwrap();
            let b = kurtosis_total(th, &[chan(ChannelKind::PumpAmplitude, 0.014)], &p, &f, KNormalization::WithVacuum)
                .unwrap();
            assert!((b / a - 4.0).abs() < 1e-12);
        }
        let zero: Vec<_> = ChannelKind::COUPLED.iter().map(|&k| chan(k, 0.0)).collect();
        assert_eq!(kurtosis_total(0.3, &zero, &p, &f, KNormalization::NormalOrdered).unwrap(), 0.0);
    }

    #[test]
    fn pump_amplitude_peaks_at_zero() {
        let f = DetectionFilter::typical();
        let p = tuned(0.92f64.sqrt(), 2.0);
        let ch = [chan(ChannelKind::PumpAmplitude, 0.007)];
        let k = |t: f64| kurtosis_total(t, &ch, &p, &f, KNormalization::WithVacuum).unwrap();
        let k0 = k(0.0);
        for i in 1..100 {
            let t = PI * i as f64 / 100.0;
            assert!(k(t) <= k0 + 1e-12 * k0.abs(), "{t}");
        }
        assert!((k(PI) - k0).abs() < 1e-9 * k0.abs());
    }

    #[test]
    fn experimental_normalization_rejects_zero() {
        let f = DetectionFilter::typical();
        let p = tuned(0.5, 2.0);
        assert!(KNormalization::Experimental(0.0).variance(0.0, &p, &f).is_err());
        assert_eq!(KNormalization::Experimental(2.5).variance(0.0, &p, &f).unwrap(), 2.5);
    }

    #[test]
    fn drift_examples() {
        let d = DriftModel::new(0.9, 0.1, 0.5, 2.0, 1.0, DriftScale::Amplitude).unwrap();
        assert_eq!(excitation_with_detuning(&d, 0.5), 0.9);
        // ν = γ_p: (1 + 4/4)(1 + 1) = 4.
        let t = 0.5 + 1.0 / 0.1;
        assert!((excitation_with_detuning(&d, t) - 0.45).abs() < 1e-14);
        assert!(excitation_with_detuning(&d, 1e12) < 1e-10);
        assert!(DriftModel::new(1.0, 0.1, 0.0, 1.0, 1.0, DriftScale::Amplitude).is_err());
        assert!(DriftModel::new(0.5, 0.1, 0.0, 0.0, 1.0, DriftScale::Amplitude).is_err());
    }

    #[test]
    fn no_drift_gives_periodic_equal_peaks() {
        let f = DetectionFilter::typical();
        let drift = DriftModel::for_cavity(0.9, 0.0, PI, 2.0, DriftScale::Amplitude).unwrap();
        let grid = theta_grid(40);
        let ch = [chan(ChannelKind::PumpAmplitude, 0.007)];
        let curve =
            kurtosis_curve_with_drift(&grid, &drift, &ch, &f, &tuned(0.9, 2.0), KNormalization::WithVacuum).unwrap();
        assert_eq!(curve.e_span(), 0.0);
        for i in 0..20 {
            let (a, b) = (curve.k[i], curve.k[i + 20]);
            assert!((a - b).abs() <= 1e-10 * a.abs());
        }
    }

    #[test]
    fn reported_drift_is_asymmetric() {
        let f = DetectionFilter::typical();
        let grid = theta_grid(200);
        let ch = [chan(ChannelKind::PumpAmplitude, 0.007)];
        let drift = DriftModel::reported_fit();
        let curve =
            kurtosis_curve_with_drift(&grid, &drift, &ch, &f, &tuned(0.9, 2.0), KNormalization::WithVacuum).unwrap();
        let span = curve.e_span();
        assert!((span - 0.006).abs() < 0.2 * 0.006, "{span}");
        let near = |t0: f64| {
            let i = grid.iter().enumerate().min_by(|a, b| (a.1 - t0).abs().total_cmp(&(b.1 - t0).abs())).unwrap().0;
            curve.k[i]
        };
        assert!((near(0.0) - near(PI)).abs() > 1e-3 * near(0.0).abs());
    }

    #[test]
    fn band_and_delta_agree_for_narrow_band() {
        let f = DetectionFilter::typical();
        let p = tuned(0.8, 2.0);
        let narrow = NoiseChannel::new(ChannelKind::PumpAmplitude, 1.0, SpectrumModel::uniform_band(1e-4).unwrap()).unwrap();
        let delta = NoiseChannel::new(ChannelKind::PumpAmplitude, 1.0, SpectrumModel::DeltaLike).unwrap();
        let a = upsilon_theta(&narrow, 0.3, &p, &f).unwrap();
        let b = upsilon_theta(&delta, 0.3, &p, &f).unwrap();
        assert!((a / b - 1.0).abs() < 1e-4);
    }
}
