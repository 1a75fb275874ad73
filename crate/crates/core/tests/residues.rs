mod common;

use common::*;
use opo_ng::cmat::c;
use opo_ng::kurtosis::{linear_filtered_variance, upsilon_theta, varsigma};
use opo_ng::{ChannelKind, DetectionFilter, NoiseChannel, OpoParams, SpectrumModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn draws(seed: u64) -> Vec<(OpoParams, DetectionFilter, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..5)
        .map(|_| {
            let p = OpoParams::tuned(rng.gen_range(0.2..0.95), rng.gen_range(0.5..10.0)).unwrap();
            let f = DetectionFilter::new(rng.gen_range(0.1..1.0), rng.gen_range(0.05..0.5)).unwrap();
            (p, f, rng.gen_range(-1.0..1.0))
        })
        .collect()
}

#[test]
fn varsigma_matches_quadrature() {
    for (i, kind) in ChannelKind::COUPLED.into_iter().enumerate() {
        for (p, f, w) in draws(11 + i as u64) {
            let r = varsigma(kind, c(w), &p, &f).unwrap();
            let q = varsigma_quadrature(kind, w, &p, &f);
            assert!(mat_rel_err(&r, &q) < 1e-6, "{kind} {p:?} {f:?} w={w}");
        }
    }
}

#[test]
fn white_upsilon_matches_quadrature() {
    for kind in [ChannelKind::ChiPump, ChannelKind::PumpPhase] {
        for (p, f, th) in draws(40) {
            let ch = NoiseChannel::new(kind, 1.0, SpectrumModel::White).unwrap();
            let r = upsilon_theta(&ch, th, &p, &f).unwrap();
            let q = upsilon_white_quadrature(kind, th, &p, &f);
            assert!(rel_err(r, q) < 1e-6, "{kind} {p:?} θ={th}: {r} vs {q}");
        }
    }
}

#[test]
fn white_upsilon_at_double_pole() {
    // κ̂₀ = 2 puts the pump pole on top of a w-pole.
    let p = OpoParams::tuned(0.87, 2.0).unwrap();
    let f = DetectionFilter::typical();
    let ch = NoiseChannel::new(ChannelKind::PumpPhase, 1.0, SpectrumModel::White).unwrap();
    let r = upsilon_theta(&ch, 0.6, &p, &f).unwrap();
    let q = upsilon_white_quadrature(ChannelKind::PumpPhase, 0.6, &p, &f);
    assert!(rel_err(r, q) < 1e-8);
}

#[test]
fn linear_variance_matches_quadrature() {
    let f = DetectionFilter::typical();
    let p = OpoParams::tuned(0.9, 2.0).unwrap();
    for th in [0.0, 0.4, std::f64::consts::FRAC_PI_2] {
        let r = linear_filtered_variance(th, &p, &f).unwrap();
        let q = linear_variance_quadrature(th, &p, &f);
        assert!(rel_err(r, q) < 1e-8, "θ={th}: {r} vs {q}");
    }
}
