#![allow(clippy::excessive_precision)]

use mbvge::dependence::{lower_tail_ratio, CopulaModel};
use mbvge::{BvgePair, MixtureParams};

const SET1: [f64; 9] = [0.3, 1.0, 1.2, 1.0, 1.0, 1.0, 1.4, 2.0, 0.5];
const SET2: [f64; 9] = [0.6, 0.5, 0.4, 0.3, 2.0, 0.5, 1.5, 0.5, 1.5];
const POINTS: [(f64, f64); 6] = [(0.25, 1.75), (2.5, 0.4), (0.9, 0.9), (0.001, 0.002), (7.5, 12.25), (3.0, 3.0)];

// log densities evaluated in 128-bit arithmetic (mpmath)
const SET1_LN: [f64; 6] = [
    -3.7399435299258713218,
    -4.430732348014373298,
    -2.9403461067804786812,
    -8.4828250014066687627,
    -10.231305270891135632,
    -2.5314176682040716058,
];
const SET1_SUM: f64 = -32.356569925222599301;
const SET2_LN: [f64; 6] = [
    -2.501056439741124424,
    -4.7848100335142327381,
    -2.2351189984240522747,
    4.2882425456263807553,
    -29.324866146800325122,
    -5.4800246247845084747,
];
const SET2_SUM: f64 = -40.037633697637862278;

#[test]
fn log_density_matches_extended_precision() {
    for (set, ln, sum) in [(SET1, SET1_LN, SET1_SUM), (SET2, SET2_LN, SET2_SUM)] {
        let m = MixtureParams::from_array(set).unwrap();
        let pairs: Vec<BvgePair> = POINTS.iter().map(|&(a, b)| BvgePair::new(a, b, 0.0)).collect();
        for (p, want) in pairs.iter().zip(ln) {
            let got = m.ln_density(p);
            assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "{p:?}: {got} vs {want}");
        }
        let ll = m.loglik(&pairs).unwrap();
        assert!((ll - sum).abs() <= 1e-13 * sum.abs(), "{ll} vs {sum}");
    }
}

#[test]
fn lower_tail_ratio_follows_its_power_law() {
    // Near the origin the first component dominates both margins (its
    // marginal shapes are the smaller ones) and C(t, t) / t ≈ (t / p)^e with
    // e = a / (a + a3), a = max(a1, a2).
    for (set, t) in [(SET1, 1e-6), (SET1, 1e-8), (SET2, 1e-6)] {
        let m = MixtureParams::from_array(set).unwrap();
        let [p, a1, a2, a3, ..] = set;
        let a = a1.max(a2);
        let approx = (t / p).powf(a / (a + a3));
        let got = lower_tail_ratio(&m, CopulaModel::Distribution, t);
        assert!((got / approx - 1.0).abs() < 0.02, "t={t}: {got} vs {approx}");
    }
}
