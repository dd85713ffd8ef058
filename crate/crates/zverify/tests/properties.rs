use proptest::prelude::*;
use zverify::hankel::round_trip;
use zverify::propagators::{apply_transference, pseudo_envelope, pseudo_kernel, random_shells, shell_pair, PropagatorConfig, UniformGrid};
use zverify::spectral::OpKind;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hankel_round_trip_on_even_shells(c in 0.0..3.0f64, s in 0.5..1.2f64) {
        let r = round_trip(c, s, 20.0).unwrap();
        prop_assert!(r.error() < 1e-6, "c={c} s={s} err={}", r.error());
    }
}

#[test]
fn transference_on_l_is_bounded() {
    let p = PropagatorConfig::default();
    let grid = UniformGrid::covering(p.transference_xi[0], p.transference_xi[1], p.transference_dxi);
    for (c, s) in random_shells(11, 4) {
        let (f, rdf) = shell_pair(c, s);
        let t = apply_transference(OpKind::L, &f, &rdf, grid, p.transference_constant, p.rtol, p.transference_noise_tol).unwrap();
        assert!(!t.noisy, "noisy derivative for shell ({c}, {s})");
        assert!(t.l2rho_ratio() < 10.0 && t.sup_ratio().is_finite(), "ratio {} for shell ({c}, {s})", t.l2rho_ratio());
    }
}

#[test]
fn free_transference_vanishes() {
    let p = PropagatorConfig::default();
    let grid = UniformGrid::covering(p.transference_xi[0], p.transference_xi[1], p.transference_dxi);
    let (f, rdf) = shell_pair(2.5, 0.7);
    let t = apply_transference(OpKind::Free, &f, &rdf, grid, 4.0, p.rtol, p.transference_noise_tol).unwrap();
    assert!(t.sup_ratio() < 1e-4);
    assert!((t.fitted_constant - 4.0).abs() < 1e-4);
}

#[test]
fn pseudo_kernel_is_symmetric_and_enveloped() {
    let xs = [0.3, 0.8, 1.5, 2.5];
    let bump = |r: f64| (-(r - 2.0) * (r - 2.0)).exp();
    let cutoff = 8.0;
    let k = pseudo_kernel(OpKind::L, bump, &xs, &xs, cutoff, 1e-10).unwrap();
    let scale = k.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            assert!((k[i][j] - k[j][i]).abs() < 1e-8 * scale);
            let ratio = k[i][j].abs() / pseudo_envelope(xs[i], xs[j], cutoff);
            assert!(ratio < 10.0 * scale, "({i},{j}) ratio {ratio}");
        }
    }
}
