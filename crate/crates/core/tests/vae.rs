use brdm_core::vae::{kl_to_standard_normal, Activation, VaeArch, VaePrior, ARRAY_NAMES};
use brdm_core::RngState;
use rand::Rng;
use rand_distr::StandardNormal;

fn seeded(arch: VaeArch, seed: u64) -> VaePrior {
    VaePrior::new(arch, 1e-2, &mut RngState::new(seed)).unwrap()
}

fn fixture_batch(rng: &mut RngState, n: usize, latent: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let batch = (0..n).map(|_| vec![rng.random_range(0.05..0.95)]).collect();
    let noise = (0..n)
        .map(|_| (0..latent).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    (batch, noise)
}

fn gradient_check(arch: VaeArch, seed: u64) -> f64 {
    let prior = seeded(arch, seed);
    let mut rng = RngState::new(seed + 100);
    let (batch, noise) = fixture_batch(&mut rng, 8, arch.latent_dim);
    let (_, grad) = prior.gradient(&batch, &noise).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (name, analytic) in grad.arrays().iter().map(|a| (a.name, a.values.to_vec())) {
        for (i, &g) in analytic.iter().enumerate() {
            let eval = |delta: f64| {
                let mut p = prior.clone();
                p.params.array_mut(name).unwrap()[i] += delta;
                p.elbo_with_noise(&batch, &noise).unwrap().elbo
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let scale = g.abs().max(numeric.abs());
            let rel = if scale == 0.0 {
                0.0
            } else {
                (g - numeric).abs() / scale
            };
            assert!(
                rel < 1e-4,
                "{name}[{i}]: analytic {g:e}, numeric {numeric:e}"
            );
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences_relu() {
    gradient_check(VaeArch::default(), 7);
}

#[test]
fn gradients_match_finite_differences_sigmoid() {
    let arch = VaeArch {
        activation: Activation::Sigmoid,
        ..VaeArch::default()
    };
    gradient_check(arch, 8);
}

#[test]
fn kl_closed_form_matches_monte_carlo() {
    let mut rng = RngState::new(31);
    let mu = [0.7, -0.4];
    let var = [0.3, 1.8];
    let closed = kl_to_standard_normal(&mu, &var).unwrap();
    let n = 1_000_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let mut log_ratio = 0.0;
        for (&m, &v) in mu.iter().zip(&var) {
            let xi: f64 = rng.sample(StandardNormal);
            let z = m + v.sqrt() * xi;
            // ln q(z) − ln p(z); the 2π terms cancel.
            log_ratio += -0.5 * v.ln() - 0.5 * xi * xi + 0.5 * z * z;
        }
        sum += log_ratio;
        sum_sq += log_ratio * log_ratio;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!(
        (mean - closed).abs() < 3.0 * se,
        "{mean} vs {closed} (se {se})"
    );
}

#[test]
fn kl_examples() {
    assert_eq!(kl_to_standard_normal(&[0.0], &[1.0]).unwrap(), 0.0);
    assert!((kl_to_standard_normal(&[1.0], &[1.0]).unwrap() - 0.5).abs() < 1e-15);
    assert!(kl_to_standard_normal(&[0.0], &[0.0]).is_err());
    assert!(kl_to_standard_normal(&[0.0, 1.0], &[1.0]).is_err());
}

#[test]
fn elbo_below_quadrature_log_likelihood() {
    let arch = VaeArch {
        latent_dim: 1,
        ..VaeArch::default()
    };
    let prior = seeded(arch, 12);
    let sigma2 = arch.decoder_variance;
    for x in [0.2, 0.5, 0.8] {
        // log ∫ N(z; 0, 1) exp(−(x − μθ(z))² / 2σ²) dz, matching the
        // reconstruction term's dropped normalizer.
        let n = 2001;
        let (lo, hi) = (-10.0, 10.0);
        let dz = (hi - lo) / (n - 1) as f64;
        let terms: Vec<f64> = (0..n)
            .map(|i| {
                let z: f64 = lo + i as f64 * dz;
                let d = x - prior.decode(&[z])[0];
                -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - d * d / (2.0 * sigma2)
            })
            .collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let integral: f64 = terms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                w * (t - m).exp()
            })
            .sum::<f64>()
            * dz;
        let log_lik = m + integral.ln();

        let mut rng = RngState::new(5);
        let draws = 100_000;
        let batch = vec![vec![x]; draws];
        let elbo = prior.elbo(&batch, &mut rng).unwrap().elbo;
        assert!(
            elbo <= log_lik + 1e-6,
            "x={x}: elbo {elbo} > log p {log_lik}"
        );
    }
}

#[test]
fn zero_network_outputs() {
    let prior = VaePrior::zeros(VaeArch::default(), 1e-2).unwrap();
    let (mu, var) = prior.encode(&[0.3]);
    assert_eq!(mu, vec![0.0, 0.0]);
    assert_eq!(var, vec![1e-6, 1e-6]);
    assert_eq!(prior.decode(&[0.4, -2.0]), vec![0.5]);
    let mut rng = RngState::new(0);
    for _ in 0..10 {
        assert_eq!(prior.sample_action(&mut rng), vec![0.5]);
    }
}

#[test]
fn degenerate_perfect_autoencoder_has_zero_elbo() {
    let mut prior = VaePrior::zeros(VaeArch::default(), 1e-2).unwrap();
    prior
        .set_array("encoder.var.bias", [2, 1], &[1.0 - 1e-6, 1.0 - 1e-6])
        .unwrap();
    let mut rng = RngState::new(1);
    let rep = prior.elbo(&[vec![0.5]], &mut rng).unwrap();
    assert_eq!(rep.reconstruction, 0.0);
    assert!(rep.kl.abs() < 1e-12);
    assert!(rep.elbo.abs() < 1e-12);
}

/// Forward pass recomputed from the exported arrays, row-major `[out][in]`.
fn oracle_layer(prior: &VaePrior, layer: &str, input: &[f64]) -> Vec<f64> {
    let arrays = prior.params.arrays();
    let find = |n: String| arrays.iter().find(|a| a.name == n).unwrap();
    let w = find(format!("{layer}.weight"));
    let b = find(format!("{layer}.bias"));
    (0..w.shape[0])
        .map(|o| {
            b.values[o]
                + (0..w.shape[1])
                    .map(|i| w.values[o * w.shape[1] + i] * input[i])
                    .sum::<f64>()
        })
        .collect()
}

fn oracle_forward(prior: &VaePrior, a: f64, z: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let relu = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    let h = relu(oracle_layer(prior, "encoder.hidden", &[a]));
    let mu = oracle_layer(prior, "encoder.mu", &h);
    let var = oracle_layer(prior, "encoder.var", &h)
        .into_iter()
        .map(|v| v.max(0.0) + 1e-6)
        .collect();
    let g = relu(oracle_layer(prior, "decoder.hidden", z));
    let out = oracle_layer(prior, "decoder.out", &g)[0];
    (mu, var, 1.0 / (1.0 + (-out).exp()))
}

#[test]
fn seeded_forward_pass_fixtures() {
    let prior = seeded(VaeArch::default(), 42);
    let (mu, var) = prior.encode(&[0.5]);
    let dec = prior.decode(&[0.0, 0.0])[0];
    let (omu, ovar, odec) = oracle_forward(&prior, 0.5, &[0.0, 0.0]);
    for (a, b) in mu.iter().chain(&var).zip(omu.iter().chain(&ovar)) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!((dec - odec).abs() < 1e-14);
    let frozen_mu = [-0.2431462383481671, 0.05658754172799522];
    let frozen_var = [1.1405332549445062, 0.8377322657058793];
    // Zero biases and z = 0 leave every pre-activation at zero.
    let frozen_dec = 0.5;
    for (a, b) in mu.iter().zip(frozen_mu) {
        assert!((a - b).abs() < 1e-12, "mu {mu:?}");
    }
    for (a, b) in var.iter().zip(frozen_var) {
        assert!((a - b).abs() < 1e-12, "var {var:?}");
    }
    assert!((dec - frozen_dec).abs() < 1e-12, "decode {dec}");
}

#[test]
fn forward_pass_finite_on_grid() {
    let prior = seeded(VaeArch::default(), 3);
    for i in 0..=100 {
        let a = i as f64 / 100.0;
        let (mu, var) = prior.encode(&[a]);
        assert!(mu.iter().chain(&var).all(|v| v.is_finite()));
        assert!(var.iter().all(|&v| v >= 1e-6));
    }
}

#[test]
fn samples_inside_unit_box() {
    let prior = seeded(VaeArch::default(), 4);
    let mut rng = RngState::new(2);
    for _ in 0..10_000 {
        let a = prior.sample_action(&mut rng)[0];
        assert!(a > 0.0 && a < 1.0);
    }
}

#[test]
fn zero_step_leaves_weights_unchanged() {
    let mut prior = VaePrior::new(VaeArch::default(), 0.0, &mut RngState::new(6)).unwrap();
    let before = prior.params.clone();
    let mut rng = RngState::new(1);
    prior.train_step(&[vec![0.3], vec![0.7]], &mut rng).unwrap();
    assert_eq!(prior.params, before);
    assert_eq!(prior.train_steps, 1);
}

fn cluster(rng: &mut RngState, n: usize, center: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| vec![center + 0.02 * rng.sample::<f64, _>(StandardNormal)])
        .collect()
}

fn mean_elbo(prior: &VaePrior, batch: &[Vec<f64>]) -> f64 {
    let mut rng = RngState::new(77);
    let reps = 200;
    (0..reps)
        .map(|_| prior.elbo(batch, &mut rng).unwrap().elbo)
        .sum::<f64>()
        / reps as f64
}

#[test]
fn training_raises_elbo_on_fixed_batch() {
    let mut rng = RngState::new(13);
    let batch = cluster(&mut rng, 32, 0.25);
    let mut prior = seeded(VaeArch::default(), 14);
    let before = mean_elbo(&prior, &batch);
    for _ in 0..2000 {
        prior.train_step(&batch, &mut rng).unwrap();
    }
    let after = mean_elbo(&prior, &batch);
    assert!(after > before, "{before} -> {after}");
}

#[test]
fn trained_prior_samples_near_data() {
    let mut rng = RngState::new(15);
    let mut prior = seeded(VaeArch::default(), 16);
    for _ in 0..3000 {
        let batch = cluster(&mut rng, 32, 0.25);
        prior.train_step(&batch, &mut rng).unwrap();
    }
    let n = 10_000;
    let mean = (0..n)
        .map(|_| prior.sample_action(&mut rng)[0])
        .sum::<f64>()
        / n as f64;
    assert!((mean - 0.25).abs() < 0.05, "sample mean {mean}");
}

#[test]
fn elbo_is_deterministic_per_seed() {
    let prior = seeded(VaeArch::default(), 17);
    let batch = vec![vec![0.1], vec![0.6]];
    let a = prior.elbo(&batch, &mut RngState::new(3)).unwrap();
    let b = prior.elbo(&batch, &mut RngState::new(3)).unwrap();
    assert_eq!(a, b);
    assert!(a.elbo <= a.reconstruction);
}

#[test]
fn arrays_cover_every_parameter() {
    let prior = seeded(VaeArch::default(), 18);
    let arrays = prior.params.arrays();
    let names: Vec<&str> = arrays.iter().map(|a| a.name).collect();
    assert_eq!(names, ARRAY_NAMES.to_vec());
    let total: usize = arrays.iter().map(|a| a.shape[0] * a.shape[1]).sum();
    assert_eq!(total, prior.params.len());
    assert_eq!(total, 16 + 16 + 32 + 2 + 32 + 2 + 32 + 16 + 16 + 1);
}
