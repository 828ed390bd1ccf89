//! Analytic gradients against central finite differences.

mod common;

use common::{batch_loss, central_diff, near_kink, random_unit, rel_err};
use hiermargin::embedder::{backward, EmbedderParams, Embedding, GradientAccumulator};
use hiermargin::pairloss::{loss, loss_and_grad, NegativePair, PairSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn random_dims(rng: &mut impl Rng) -> Vec<usize> {
    vec![
        rng.random_range(2..=8),
        rng.random_range(2..=16),
        rng.random_range(2..=8),
    ]
}

fn random_input(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn flat_params(p: &EmbedderParams) -> Vec<f64> {
    p.layers
        .iter()
        .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
        .collect()
}

fn with_flat(p: &EmbedderParams, flat: &[f64]) -> EmbedderParams {
    let mut out = p.clone();
    let mut k = 0;
    for l in &mut out.layers {
        for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
            *w = flat[k];
            k += 1;
        }
    }
    out
}

/// Upstream gradient check for a linear functional `<c, embed(x)>`.
#[test]
fn embedder_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 100 {
        let dims = random_dims(&mut rng);
        let p = EmbedderParams::init(&dims, rng.random()).unwrap();
        let x = random_input(&mut rng, dims[0]);
        let c: Vec<f64> = (0..dims[2]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let Ok(cache) = p.forward(&x) else { continue };

        let mut acc = GradientAccumulator::zeros_like(&p);
        let gx = backward(&p, &cache, &c, &mut acc).unwrap();

        let f = |q: &EmbedderParams, x: &[f64]| -> f64 {
            q.embed(x)
                .unwrap()
                .as_slice()
                .iter()
                .zip(&c)
                .map(|(a, b)| a * b)
                .sum()
        };
        let mut theta = flat_params(&p);
        let fd = central_diff(&mut theta, STEP, |t| f(&with_flat(&p, t), &x));
        assert!(
            rel_err(&acc.flat(), &fd) < 1e-4,
            "params rel err {}",
            rel_err(&acc.flat(), &fd)
        );
        let fdx = central_diff(&mut x.clone(), STEP, |xx| f(&p, xx));
        assert!(
            rel_err(&gx, &fdx) < 1e-4,
            "input rel err {} at {checked}: {gx:?} vs {fdx:?}",
            rel_err(&gx, &fdx)
        );
        checked += 1;
    }
}

#[test]
fn pair_loss_gradient_matches_finite_differences_on_sphere_inputs() {
    // Gradient of the pair loss w.r.t. the embedding coordinates alone.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 50 {
        let n = rng.random_range(2..=6);
        let dim = rng.random_range(2..=5);
        let embs: Vec<Embedding> = (0..n).map(|_| random_unit(&mut rng, dim)).collect();
        let mut pairs = PairSet::default();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.3) {
                    pairs.positives.push((i, j));
                } else {
                    pairs.negatives.push(NegativePair {
                        i,
                        j,
                        margin: rng.random_range(0.1..2.0),
                    });
                }
            }
        }
        if near_kink(&pairs, &embs, 1e-6) {
            continue;
        }
        let (_, grads) = loss_and_grad(&pairs, &embs);
        let mut flat: Vec<f64> = embs.iter().flat_map(|e| e.as_slice().to_vec()).collect();
        // Raw coordinates are perturbed freely; the loss only sees them
        // through Euclidean distances, so no renormalization here.
        let fd = central_diff(&mut flat, STEP, |v| {
            let es: Vec<Embedding> = v.chunks(dim).map(|c| Embedding::from_unit(c.to_vec())).collect();
            loss(&pairs, &es)
        });
        let analytic: Vec<f64> = grads.concat();
        assert!(rel_err(&analytic, &fd) < 1e-4);
        // Antisymmetry per pair: the summed gradient over all points is zero.
        for k in 0..dim {
            let s: f64 = grads.iter().map(|g| g[k]).sum();
            assert!(s.abs() < 1e-12);
        }
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_is_nonnegative_and_monotone_in_margin(seed in any::<u64>(), bump in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=6);
        let embs: Vec<Embedding> = (0..n).map(|_| random_unit(&mut rng, 3)).collect();
        let mut pairs = PairSet::default();
        for i in 0..n {
            for j in i + 1..n {
                pairs.negatives.push(NegativePair { i, j, margin: rng.random_range(0.0..2.0) });
            }
        }
        let (r, _) = loss_and_grad(&pairs, &embs);
        prop_assert!(r.total >= 0.0 && r.positive_term >= 0.0 && r.negative_term >= 0.0);
        let mut bigger = pairs.clone();
        bigger.negatives[0].margin += bump;
        prop_assert!(loss(&bigger, &embs) >= r.total);
    }

    #[test]
    fn pair_gradients_are_antisymmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_unit(&mut rng, 4);
        let b = random_unit(&mut rng, 4);
        for pairs in [
            PairSet { positives: vec![(0, 1)], negatives: vec![] },
            PairSet { positives: vec![], negatives: vec![NegativePair { i: 0, j: 1, margin: 2.5 }] },
        ] {
            let (_, g) = loss_and_grad(&pairs, &[a.clone(), b.clone()]);
            for (x, y) in g[0].iter().zip(&g[1]) {
                prop_assert!((x + y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn embeddings_have_unit_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = random_dims(&mut rng);
        let p = EmbedderParams::init(&dims, seed).unwrap();
        let x = random_input(&mut rng, dims[0]);
        if let Ok(e) = p.embed(&x) {
            let norm = e.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-6);
        }
    }
}

/// Full chain: pair loss -> normalization -> MLP parameters, one fixture.
#[test]
fn end_to_end_single_fixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let p = EmbedderParams::init(&[5, 9, 4], 3).unwrap();
    let xs: Vec<Vec<f64>> = (0..4).map(|_| random_input(&mut rng, 5)).collect();
    let pairs = PairSet {
        positives: vec![(0, 1), (2, 3)],
        negatives: vec![
            NegativePair {
                i: 0,
                j: 2,
                margin: 1.9,
            },
            NegativePair {
                i: 0,
                j: 3,
                margin: 1.9,
            },
            NegativePair {
                i: 1,
                j: 2,
                margin: 1.9,
            },
            NegativePair {
                i: 1,
                j: 3,
                margin: 1.9,
            },
        ],
    };
    let caches: Vec<_> = xs.iter().map(|x| p.forward(x).unwrap()).collect();
    let embs: Vec<Embedding> = caches.iter().map(|c| c.embedding().clone()).collect();
    assert!(!near_kink(&pairs, &embs, 1e-6));
    let (_, grads) = loss_and_grad(&pairs, &embs);
    let mut acc = GradientAccumulator::zeros_like(&p);
    for (c, g) in caches.iter().zip(&grads) {
        backward(&p, c, g, &mut acc).unwrap();
    }
    let mut theta = flat_params(&p);
    let fd = central_diff(&mut theta, STEP, |t| batch_loss(&with_flat(&p, t), &xs, &pairs));
    assert!(rel_err(&acc.flat(), &fd) < 1e-4);
}
