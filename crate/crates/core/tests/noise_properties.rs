mod support;

use cyclo::noise::{gibbs_update_indicators, gibbs_update_mixture, sample_noise, weight_posterior};
use cyclo::{GaussianMixture, MixtureHyper};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_mixture() -> impl Strategy<Value = GaussianMixture> {
    (1usize..=4)
        .prop_flat_map(|k| {
            (
                proptest::collection::vec(0.05f64..1.0, k),
                proptest::collection::vec(-5.0f64..5.0, k),
                proptest::collection::vec(0.05f64..4.0, k),
            )
        })
        .prop_map(|(w, m, v)| {
            let total: f64 = w.iter().sum();
            let mut w: Vec<f64> = w.iter().map(|x| x / total).collect();
            let rest: f64 = w[1..].iter().sum();
            w[0] = 1.0 - rest;
            GaussianMixture::new(w, m, v).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_integrates_to_one(mix in arb_mixture()) {
        let m = 60_000;
        let step = 60.0 / m as f64;
        let vals: Vec<f64> = (0..=m).map(|t| mix.log_density(-30.0 + step * t as f64)).collect();
        let total = support::log_trapezoid(&vals, step).exp();
        prop_assert!((total - 1.0).abs() < 1e-6, "integral {}", total);
    }

    #[test]
    fn density_is_label_invariant(mix in arb_mixture(), x in -20.0f64..20.0) {
        let k = mix.k();
        let perm: Vec<usize> = (0..k).rev().collect();
        let swapped = mix.permuted(&perm);
        prop_assert_eq!(swapped.weights()[0], mix.weights()[k - 1]);
        let (a, b) = (mix.log_density(x), swapped.log_density(x));
        prop_assert!(a.is_finite());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn gibbs_recovers_separated_components() {
    let truth = GaussianMixture::new(vec![0.4, 0.6], vec![-2.0, 2.0], vec![0.5, 0.5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let residuals = sample_noise(&truth, 1000, &mut rng);
    let hyper = MixtureHyper::default();
    let mut mix = GaussianMixture::initial(&residuals, 2);
    let (mut lows, mut highs) = (Vec::new(), Vec::new());
    for sweep in 0..10_000 {
        let z = gibbs_update_indicators(&residuals, &mix, &mut rng);
        mix = gibbs_update_mixture(&residuals, &z, &mix, &hyper, &mut rng).unwrap();
        if sweep >= 1000 {
            let (a, b) = (mix.means()[0], mix.means()[1]);
            lows.push(a.min(b));
            highs.push(a.max(b));
        }
    }
    for (draws, want) in [(&lows, -2.0), (&highs, 2.0)] {
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((m - want).abs() < 3.0 * sd, "mean {m} sd {sd} truth {want}");
    }
}

#[test]
fn identical_components_give_weight_frequencies() {
    let mix = GaussianMixture::new(vec![0.2, 0.3, 0.5], vec![0.0; 3], vec![1.0; 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let residuals = vec![0.7; 10_000];
    let z = gibbs_update_indicators(&residuals, &mix, &mut rng);
    for (c, w) in mix.weights().iter().enumerate() {
        let f = z.iter().filter(|&&l| l == c).count() as f64 / z.len() as f64;
        assert!((f - w).abs() < 0.02, "component {c}: {f} vs {w}");
    }
}

#[test]
fn dirichlet_posterior_mean() {
    let conc = weight_posterior(&[900, 100], 1.0);
    assert_eq!(conc, vec![901.0, 101.0]);
    let mean = conc[0] / conc.iter().sum::<f64>();
    assert!((mean - 901.0 / 1002.0).abs() < 1e-15);
}

#[test]
fn empty_component_draws_follow_prior() {
    // component 1 never receives data; its mean draws should be N(0, 10)
    let residuals = vec![0.0; 5];
    let z = vec![0usize; 5];
    let hyper = MixtureHyper::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mix = GaussianMixture::new(vec![0.5, 0.5], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let mut draws = Vec::new();
    for _ in 0..10_000 {
        mix = gibbs_update_mixture(&residuals, &z, &mix, &hyper, &mut rng).unwrap();
        draws.push(mix.means()[1]);
    }
    use statrs::distribution::{ContinuousCDF, Normal};
    let prior = Normal::new(0.0, 10f64.sqrt()).unwrap();
    let ks = support::ks_statistic(&draws, |x| prior.cdf(x));
    // successive draws are independent for the empty component
    assert!(ks < support::ks_critical_1pct(draws.len()), "ks {ks}");
}
