use semqam_core::constellation::{gray_qam, Constellation};
use semqam_core::metrics::weighted_ssv;
use semqam_core::source::SourceStatistics;
use semqam_core::theory::{gap_bound, kkt_residual, minimize_ssv, DescentConfig};
use semqam_core::Complex64;

/// One dominant symbol and two co-occurrence blocks.
fn block_source(m: usize, dominant: usize) -> SourceStatistics {
    let mut avg = vec![0.1; m];
    avg[dominant] = 0.9;
    let half = m / 2;
    let mut p = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                p[i * m + j] = if (i < half) == (j < half) { 4.0 } else { 1.0 };
            }
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    SourceStatistics::from_parts(avg, p).unwrap()
}

#[test]
fn descent_reaches_force_balance() {
    let s = block_source(4, 0);
    let g = gray_qam(4, 1.0).unwrap();
    let at_gray = kkt_residual(&g, &s, 1e-4).unwrap();
    assert!(!at_gray.is_stationary);
    assert!(at_gray.projected_gradient_norm > 1e-3);

    // a slightly perturbed start breaks the square's symmetry
    let mut pts = g.points().to_vec();
    pts[1] += Complex64::new(0.01, -0.02);
    let start = g.with_points(pts).unwrap();
    let opt = minimize_ssv(
        &start,
        &s,
        &DescentConfig {
            steps: 20_000,
            ..Default::default()
        },
    )
    .unwrap();
    let r = kkt_residual(&opt, &s, 1e-4).unwrap();
    assert!(r.kkt_residual_max < 1e-4, "{r:?}");
    assert!((opt.mean_power() - 1.0).abs() < 1e-9);
    assert!(weighted_ssv(&opt, &s).unwrap() < weighted_ssv(&g, &s).unwrap());
}

#[test]
fn optimized_constellations_beat_gray() {
    for (m, dominant) in [(4, 0), (16, 5), (16, 12)] {
        let s = block_source(m, dominant);
        assert!(s.delta > 0.0 && s.gamma > 0.0);
        let g = gray_qam(m, 1.0).unwrap();
        let opt = minimize_ssv(
            &g,
            &s,
            &DescentConfig {
                steps: 3000,
                ..Default::default()
            },
        )
        .unwrap();
        let gap = gap_bound(&s, &g, &opt, 1.0).unwrap();
        assert!(gap.empirical_gap > 0.0, "M = {m}: {gap:?}");
        assert!(gap.bound_value.is_finite() && gap.bound_value >= 0.0);
    }
}

#[test]
fn uniform_ring_is_stationary_for_uniform_source() {
    let m = 8;
    let pts: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64))
        .collect();
    let c = Constellation::identity(pts, 1.0).unwrap();
    let mut p = vec![1.0 / 56.0; 64];
    for i in 0..m {
        p[i * m + i] = 0.0;
    }
    let s = SourceStatistics::from_parts(vec![0.5; m], p).unwrap();
    let r = kkt_residual(&c, &s, 1e-10).unwrap();
    assert!(r.is_stationary, "{r:?}");
    assert!(r.projected_gradient_norm < 1e-10);
}
