use transop::encoder::{
    kl_laplace, mean_scale, spread_matrix, train_classifier, train_encoder, ClassifierConfig,
    EncoderConfig,
};
use transop::synth::{make_multiclass_dataset, two_class_spec};
use transop::{rng, Error, OperatorDictionary};

/// Stratified Monte Carlo estimate of `E_{x~Laplace(0,h)}[ln p_h(x) − ln p_ζ(x)]`.
/// `|x|` is exponential with mean `h`; one uniform draw per stratum.
fn kl_monte_carlo(h: f64, zeta: f64, samples: usize, seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    let mut total = 0.0;
    for i in 0..samples {
        let u = (i as f64 + rng::uniform(&mut r, 0.0, 1.0)) / samples as f64;
        let x = -h * (1.0 - u).ln();
        total += (zeta / h).ln() - x / h + x / zeta;
    }
    total / samples as f64
}

fn log_grid() -> Vec<f64> {
    (0..5).map(|i| 0.01 * 10f64.powf(i as f64 * 0.5)).collect()
}

#[test]
fn closed_form_kl_matches_monte_carlo() {
    for (i, h) in log_grid().into_iter().enumerate() {
        for (j, zeta) in log_grid().into_iter().enumerate() {
            let exact = kl_laplace(h, zeta).unwrap();
            let mc = kl_monte_carlo(h, zeta, 1_000_000, (i * 5 + j) as u64);
            assert!(
                (exact - mc).abs() < 1e-2,
                "h={h} zeta={zeta}: {exact} vs {mc}"
            );
        }
    }
}

#[test]
fn kl_is_zero_only_at_the_prior() {
    for h in log_grid() {
        for zeta in log_grid() {
            let v = kl_laplace(h, zeta).unwrap();
            if h == zeta {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > 0.0, "h={h} zeta={zeta}");
            }
        }
    }
    assert!(matches!(kl_laplace(0.0, 1.0), Err(Error::InvalidScale(_))));
    assert!(matches!(kl_laplace(1.0, -1.0), Err(Error::InvalidScale(_))));
}

#[test]
fn spread_matrix_matches_direct_averages() {
    let ds = make_multiclass_dataset(&two_class_spec(30), 3).unwrap();
    let dict = OperatorDictionary::new(ds.catalog.generators.clone(), 0.0).unwrap();
    let fit = train_classifier(&ds.points, &ClassifierConfig::default()).unwrap();
    let cfg = EncoderConfig {
        hidden: vec![8],
        epochs: 2,
        ..Default::default()
    };
    let (enc, log) = train_encoder(
        &cfg.new_encoder(&dict).unwrap(),
        &fit.classifier,
        &dict,
        &ds.points,
        &cfg,
    )
    .unwrap();
    let spread = spread_matrix(&enc, &ds.points).unwrap();
    for class in 0..2 {
        let members: Vec<_> = ds
            .points
            .iter()
            .filter(|p| p.label == Some(class))
            .collect();
        for op in 0..2 {
            let want = members
                .iter()
                .map(|p| enc.forward(&p.z).unwrap()[op])
                .sum::<f64>()
                / members.len() as f64;
            assert!((spread.get(class, op) - want).abs() < 1e-14);
        }
    }
    let overall = mean_scale(&enc, &ds.points).unwrap();
    assert!((log.mean_scale[2] - overall).abs() < 1e-15);
    assert!(spread.to_csv().starts_with("class,op0,op1\n0,"));
}
