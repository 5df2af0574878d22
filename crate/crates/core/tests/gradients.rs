use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spacemap_core::coarse_net::{backward, forward, MlpNetwork};

const H: f64 = 1e-6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Largest relative error between backprop and central differences over
/// every weight, bias and input of one random network, or `None` when the
/// sampled input sits too close to a ReLU kink.
pub fn worst_gradient_error(seed: u64) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=4);
    let mut sizes = vec![7];
    sizes.extend((0..depth).map(|_| rng.random_range(2..=12)));
    sizes.push(1);
    let mut net = MlpNetwork::new(&sizes, seed).unwrap();
    for l in 0..sizes.len() - 1 {
        net.layer_mut(l).1.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let x: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
    let (_, cache) = forward(&net, &x);
    if cache.min_hidden_preactivation() < 1e-3 {
        return None;
    }
    let g = backward(&net, &cache, 1.0).unwrap();
    let mut worst = 0.0f64;
    for l in 0..sizes.len() - 1 {
        for k in 0..net.weights()[l].len() {
            let (mut up, mut dn) = (net.clone(), net.clone());
            up.layer_mut(l).0[k] += H;
            dn.layer_mut(l).0[k] -= H;
            worst = worst.max(rel_err(g.weights[l][k], (up.predict(&x) - dn.predict(&x)) / (2.0 * H)));
        }
        for k in 0..net.biases()[l].len() {
            let (mut up, mut dn) = (net.clone(), net.clone());
            up.layer_mut(l).1[k] += H;
            dn.layer_mut(l).1[k] -= H;
            worst = worst.max(rel_err(g.biases[l][k], (up.predict(&x) - dn.predict(&x)) / (2.0 * H)));
        }
    }
    for i in 0..7 {
        let (mut up, mut dn) = (x.clone(), x.clone());
        up[i] += H;
        dn[i] -= H;
        worst = worst.max(rel_err(g.input[i], (net.predict(&up) - net.predict(&dn)) / (2.0 * H)));
    }
    Some(worst)
}

#[test]
fn backprop_matches_central_differences_on_random_networks() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 100 {
        if let Some(err) = worst_gradient_error(seed) {
            assert!(err <= 1e-5, "seed {seed}: {err:e}");
            checked += 1;
        }
        seed += 1;
    }
}
