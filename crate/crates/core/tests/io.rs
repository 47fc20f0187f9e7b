use std::fs;

use proptest::prelude::*;
use topojscc::channel::ChannelKind;
use topojscc::checkpoint;
use topojscc::config::{DatasetSpec, RunConfig};
use topojscc::cubical::{betti_at, cubical_diagram};
use topojscc::image::Image;
use topojscc::net::init_params;
use topojscc::pgm::{encode_pgm, load_images, parse_pgm, save_pgm};
use topojscc::synth::{gen_synthetic, SynthKind, SyntheticSpec};
use topojscc::train::TrainConfig;

#[test]
fn p5_bytes_scale_to_unit_interval() {
    let mut bytes = b"P5\n# two by two\n2 2\n255\n".to_vec();
    bytes.extend([0u8, 255, 128, 64]);
    let im = parse_pgm(&bytes, "t.pgm".as_ref()).unwrap();
    assert_eq!(im.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    assert_eq!(encode_pgm(&im).unwrap(), b"P5\n2 2\n255\n\x00\xff\x80\x40".to_vec());
}

#[test]
fn malformed_headers_are_rejected() {
    for bad in [&b"P2\n2 2\n255\n0000"[..], b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0", b"P5\n2 x\n255\n\0\0\0\0", b"P5\n2 2\n255\n\0\0"] {
        assert!(parse_pgm(bad, "bad.pgm".as_ref()).is_err());
    }
}

#[test]
fn directory_loads_in_lexicographic_order_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = Image::new(2, 3, (0..6).map(|v| v as f64 * 50.0 / 255.0).collect()).unwrap();
    let b = Image::filled(2, 3, 1.0);
    save_pgm(&dir.path().join("b.pgm"), &a).unwrap();
    save_pgm(&dir.path().join("a.pgm"), &b).unwrap();
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let loaded = load_images(dir.path()).unwrap();
    let names: Vec<_> = loaded.iter().map(|(p, _)| p.file_name().unwrap().to_owned()).collect();
    assert_eq!(names, ["a.pgm", "b.pgm"]);
    assert_eq!(loaded[0].1, b);
    assert_eq!(loaded[1].1, a);
    let raw = fs::read(dir.path().join("b.pgm")).unwrap();
    assert_eq!(encode_pgm(&loaded[1].1).unwrap(), raw);
}

#[test]
fn empty_directory_and_mixed_sizes_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_images(dir.path()).is_err());
    save_pgm(&dir.path().join("a.pgm"), &Image::filled(2, 2, 0.0)).unwrap();
    save_pgm(&dir.path().join("b.pgm"), &Image::filled(2, 3, 0.0)).unwrap();
    assert!(load_images(dir.path()).is_err());
    assert!(load_images(&dir.path().join("missing.pgm")).is_err());
}

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    let train = (
        (0.01..0.99f64, any::<bool>(), any::<bool>(), 0.0..1.0f64, 0.0..1.0f64, 0.1..100.0f64),
        (2usize..256, 1e-6..1e-1f64, 1usize..500, 1usize..50, 0.0..0.5f64, 0.1..10.0f64, any::<u64>()),
    )
        .prop_map(|((rho, rayleigh, csi, li, ll, t), (bs, lr, ep, pat, vf, power, seed))| TrainConfig {
            rho,
            channel: if rayleigh { ChannelKind::Rayleigh } else { ChannelKind::Awgn },
            csi,
            lambda_img: li,
            lambda_lat: ll,
            anneal_t: t,
            batch_size: bs,
            learning_rate: lr,
            max_epochs: ep,
            patience: pat,
            val_fraction: vf,
            power,
            seed,
        });
    let dataset = prop_oneof![
        "[a-z][a-z0-9_/]{0,12}".prop_map(|p| DatasetSpec::Pgm(p.into())),
        (0usize..4, 1usize..1000, 4usize..16, 4usize..16, any::<u64>(), 1usize..6, any::<bool>()).prop_map(
            |(k, count, h, w, seed, features, exact)| {
                let kind = [SynthKind::Blobs, SynthKind::Rings, SynthKind::GridRoads, SynthKind::RingsRoads][k];
                DatasetSpec::Synthetic(SyntheticSpec {
                    features,
                    exact,
                    ..SyntheticSpec::new(kind, count, 4 * h, 4 * w, seed)
                })
            }
        ),
    ];
    (train, dataset, 1usize..1000).prop_map(|(train, dataset, eval_count)| RunConfig {
        train,
        dataset,
        eval_count,
    })
}

proptest! {
    #[test]
    fn config_dump_round_trips(cfg in config_strategy()) {
        let text = cfg.dump();
        prop_assert_eq!(RunConfig::parse(&text).unwrap(), cfg.clone());
        prop_assert_eq!(RunConfig::parse(&text).unwrap().dump(), text);
    }
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    assert!(RunConfig::parse("rho = 0.3\n# comment\n\n").is_ok());
    assert!(RunConfig::parse("colour = blue").is_err());
    assert!(RunConfig::parse("rho = 1.5").is_err());
    assert!(RunConfig::parse("channel = optical").is_err());
    assert!(RunConfig::parse("batch_size").is_err());
}

#[test]
fn checkpoint_file_round_trip_is_exact() {
    let model = init_params(11, 0.3, 16, 20).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&model, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(checkpoint::to_bytes(&back), fs::read(&path).unwrap());
    assert_eq!(back.shape, model.shape);
    for ((na, ta), (nb, tb)) in model.params().iter().zip(back.params()) {
        assert_eq!(na, &nb);
        assert_eq!(ta.data(), tb.data());
    }
    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&path, &bytes).unwrap();
    assert!(checkpoint::load(&path).is_err());
}

#[test]
fn synthetic_sets_meet_their_declared_topology() {
    for kind in [SynthKind::Blobs, SynthKind::Rings, SynthKind::GridRoads, SynthKind::RingsRoads] {
        let spec = SyntheticSpec::new(kind, 12, 32, 32, 5);
        let data = gen_synthetic(&spec).unwrap();
        assert_eq!(data, gen_synthetic(&spec).unwrap());
        for (im, &b) in data.images.iter().zip(&data.betti) {
            assert!(im.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(betti_at(&cubical_diagram(im, 1).unwrap(), 0.5), b, "{kind}");
        }
    }
}

#[test]
fn single_ring_has_one_persistent_loop() {
    let spec = SyntheticSpec {
        features: 1,
        exact: true,
        ..SyntheticSpec::new(SynthKind::Rings, 5, 32, 32, 1)
    };
    for im in gen_synthetic(&spec).unwrap().images {
        let d = cubical_diagram(&im, 1).unwrap();
        assert_eq!(d.of_dim(1).iter().filter(|p| p.persistence() > 0.5).count(), 1);
    }
}

#[test]
fn three_blobs_give_three_persistent_components() {
    let spec = SyntheticSpec {
        features: 3,
        exact: true,
        ..SyntheticSpec::new(SynthKind::Blobs, 5, 32, 32, 2)
    };
    for im in gen_synthetic(&spec).unwrap().images {
        let d = cubical_diagram(&im, 1).unwrap();
        assert_eq!(d.of_dim(0).iter().filter(|p| p.persistence() >= 0.5).count(), 3);
    }
}

#[test]
fn generator_rejects_bad_sizes() {
    assert!(gen_synthetic(&SyntheticSpec::new(SynthKind::Rings, 1, 12, 32, 0)).is_err());
    assert!(gen_synthetic(&SyntheticSpec::new(SynthKind::Rings, 1, 30, 32, 0)).is_err());
}
