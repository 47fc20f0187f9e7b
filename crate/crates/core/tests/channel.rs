use topojscc::autodiff::{Graph, Tensor};
use topojscc::channel::{
    noise_power, sample_training_snr, transmit, transmit_node, ChannelKind, ChannelRealization, TRAINING_SNRS_DB,
};
use topojscc::net::power_normalize_vec;
use topojscc::rng::substream;

#[test]
fn awgn_noise_power_matches_nominal() {
    for snr in [0.0, 10.0, 20.0] {
        let k = 100_000;
        let r = ChannelRealization::draw(ChannelKind::Awgn, k, snr, 1.0, &mut substream(1, &[snr as u64])).unwrap();
        let emp = r.noise.iter().map(|v| v * v).sum::<f64>() / k as f64;
        let nominal = 10f64.powf(-snr / 10.0);
        assert!((emp / nominal - 1.0).abs() < 0.02, "snr {snr}: {emp} vs {nominal}");
        assert_eq!(r.h, [1.0, 0.0]);
        assert_eq!(r.n0, noise_power(snr, 1.0).unwrap());
    }
}

#[test]
fn rayleigh_gain_has_unit_second_moment() {
    let mut rng = substream(2, &[]);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let r = ChannelRealization::draw(ChannelKind::Rayleigh, 1, f64::INFINITY, 1.0, &mut rng).unwrap();
        acc += r.h[0] * r.h[0] + r.h[1] * r.h[1];
    }
    assert!((acc / n as f64 - 1.0).abs() < 0.02);
}

#[test]
fn one_gain_per_image() {
    let z: Vec<f64> = (0..64).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
    let (y, r) = transmit(&z, ChannelKind::Rayleigh, f64::INFINITY, 1.0, &mut substream(3, &[])).unwrap();
    let k = 32;
    for l in 0..k {
        let (zr, zi) = (z[2 * l], z[2 * l + 1]);
        if zr * zr + zi * zi == 0.0 {
            continue;
        }
        // y_l / z_l is the same complex gain for every symbol.
        let m = zr * zr + zi * zi;
        let hr = (y[l] * zr + y[k + l] * zi) / m;
        let hi = (y[k + l] * zr - y[l] * zi) / m;
        assert!((hr - r.h[0]).abs() < 1e-12 && (hi - r.h[1]).abs() < 1e-12);
    }
}

#[test]
fn snr_draws_are_uniform_over_the_grid() {
    let mut rng = substream(4, &[]);
    let n = 10_000;
    let mut counts = [0usize; 5];
    for _ in 0..n {
        let s = sample_training_snr(&mut rng);
        counts[TRAINING_SNRS_DB.iter().position(|&v| v == s).unwrap()] += 1;
    }
    let (e, sd) = (n as f64 / 5.0, (n as f64 * 0.2 * 0.8).sqrt());
    for c in counts {
        assert!((c as f64 - e).abs() < 3.0 * sd, "{counts:?}");
    }
    let a: Vec<f64> = (0..20).map(|_| sample_training_snr(&mut substream(5, &[]))).collect();
    assert!(a.iter().all(|&v| v == a[0]));
}

#[test]
fn replay_and_graph_forward_are_bitwise_equal() {
    let s: Vec<f64> = (0..40).map(|i| (i as f64 * 0.31).sin()).collect();
    let z = power_normalize_vec(&s, 1.0).unwrap();
    for kind in [ChannelKind::Awgn, ChannelKind::Rayleigh] {
        let (y, r) = transmit(&z, kind, 5.0, 1.0, &mut substream(6, &[])).unwrap();
        assert_eq!(r.apply(&z, false).unwrap(), y);
        let mut g = Graph::new();
        let zn = g.leaf(Tensor::new(vec![1, 40], z.clone()).unwrap());
        let out = transmit_node(&mut g, zn, &[r], false).unwrap();
        assert_eq!(g.value(out).data(), y.as_slice());
    }
}

#[test]
fn per_sample_power_is_exact() {
    let mut rng = substream(7, &[]);
    for _ in 0..50 {
        use rand::Rng;
        let s: Vec<f64> = (0..2 * 37).map(|_| rng.random_range(-5.0..5.0)).collect();
        let z = power_normalize_vec(&s, 1.0).unwrap();
        let p = z.iter().map(|v| v * v).sum::<f64>() / 37.0;
        assert!((p - 1.0).abs() < 1e-12);
    }
}
