use semqam_core::channel::{simulate_link, ChannelConfig};
use semqam_core::constellation::gray_qam;

fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[test]
fn gray_qpsk_ber_tracks_q_function() {
    let q = gray_qam(4, 1.0).unwrap();
    let n = 1_000_000;
    let concepts: Vec<u32> = (0..n).map(|i| (i % 4) as u32).collect();
    for (k, snr_db) in [4.0, 8.0, 10.0].into_iter().enumerate() {
        let es_n0 = 10f64.powf(snr_db / 10.0);
        let expected = q_function((2.0 * es_n0 / 2.0).sqrt());
        let r = simulate_link(
            &q,
            &concepts,
            &ChannelConfig {
                snr_db,
                seed: 100 + k as u64,
            },
        )
        .unwrap();
        let rel = (r.ber() - expected).abs() / expected;
        assert!(rel < 0.1, "{snr_db} dB: {} vs {expected}", r.ber());
    }
    assert!((q_function(10f64.sqrt()) - 7.83e-4).abs() < 1e-5);
}

#[test]
fn sixteen_qam_ser_tracks_union_expression() {
    // exact square-QAM SER: 1 - (1 - 2(1 - 1/√M) Q(√(3 Es/N0 / (M-1))))²
    let q = gray_qam(16, 1.0).unwrap();
    let n = 400_000;
    let concepts: Vec<u32> = (0..n).map(|i| (i % 16) as u32).collect();
    let snr_db = 14.0;
    let es_n0 = 10f64.powf(snr_db / 10.0);
    let pa = 2.0 * (1.0 - 0.25) * q_function((3.0 * es_n0 / 15.0).sqrt());
    let expected = 1.0 - (1.0 - pa).powi(2);
    let r = simulate_link(&q, &concepts, &ChannelConfig { snr_db, seed: 9 }).unwrap();
    assert!(
        (r.ser() - expected).abs() / expected < 0.05,
        "{} vs {expected}",
        r.ser()
    );
}
