use super::*;
use crate::features::{ChannelKind, FeedbackChannel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn channel(kind: ChannelKind, n: usize, m: usize, rng: &mut ChaCha8Rng, density: f64) -> FeedbackChannel {
    let mut raw = Vec::new();
    for u in 0..n {
        for i in 0..m {
            if rng.random::<f64>() < density {
                raw.push((u, i, rng.random_range(-1.0..=1.0)));
            }
        }
    }
    FeedbackChannel::new(kind, n, m, raw, Interval::MODEL).unwrap()
}

fn instance(n: usize, m: usize, seed: u64) -> FeedbackChannels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeedbackChannels {
        rating: channel(ChannelKind::Rating, n, m, &mut rng, 0.5),
        helpfulness: channel(ChannelKind::Helpfulness, n, m, &mut rng, 0.4),
        centrality: channel(ChannelKind::Centrality, n, m, &mut rng, 0.5),
        view: channel(ChannelKind::View, n, m, &mut rng, 0.3),
    }
}

fn empty_channels(n: usize, m: usize) -> FeedbackChannels {
    FeedbackChannels {
        rating: FeedbackChannel::empty(ChannelKind::Rating, n, m, Interval::RATING),
        helpfulness: FeedbackChannel::empty(ChannelKind::Helpfulness, n, m, Interval::MODEL),
        centrality: FeedbackChannel::empty(ChannelKind::Centrality, n, m, Interval::MODEL),
        view: FeedbackChannel::empty(ChannelKind::View, n, m, Interval::VIEW),
    }
}

fn random_factors(n: usize, m: usize, k: usize, std: f64, seed: u64) -> LatentFactors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = LatentFactors::zeros(n, m, k);
    for a in x.matrices_mut() {
        a.mapv_inplace(|_| rng.random_range(-std..std));
    }
    x
}

fn random_hp(k: usize, variant: Variant, seed: u64) -> Hyperparameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l = || rng.random_range(0.05..0.6);
    Hyperparameters {
        k,
        variant,
        lambda_h: l(),
        lambda_d: l(),
        lambda_v: l(),
        lambda_we: l(),
        lambda_wc: l(),
        lambda_ws: l(),
        lambda_w: l(),
        lambda_z: l(),
        lambda_e: l(),
        lambda_f: l(),
        lambda_c: l(),
        lambda_o: l(),
        lambda_s: l(),
        lambda_u: l(),
        ..Hyperparameters::default()
    }
}

fn only(hp: Hyperparameters) -> Hyperparameters {
    let z = 0.0;
    Hyperparameters {
        lambda_h: z,
        lambda_d: z,
        lambda_v: z,
        lambda_we: z,
        lambda_wc: z,
        lambda_ws: z,
        lambda_w: z,
        lambda_z: z,
        lambda_e: z,
        lambda_f: z,
        lambda_c: z,
        lambda_o: z,
        lambda_s: z,
        lambda_u: z,
        ..hp
    }
}

/// Central differences of Φ, element by element.
fn finite_difference(
    x: &LatentFactors,
    ch: &FeedbackChannels,
    w: &CountWeights,
    hp: &Hyperparameters,
    h: f64,
) -> LatentFactors {
    let mut fd = LatentFactors::zeros(x.n_users(), x.n_items(), x.k());
    let mut probe = x.clone();
    for idx in 0..8 {
        let shape = x.matrices()[idx].dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let orig = x.matrices()[idx][[r, c]];
                probe.matrices_mut()[idx][[r, c]] = orig + h;
                let plus = objective(&probe, ch, w, hp).unwrap();
                probe.matrices_mut()[idx][[r, c]] = orig - h;
                let minus = objective(&probe, ch, w, hp).unwrap();
                probe.matrices_mut()[idx][[r, c]] = orig;
                fd.matrices_mut()[idx][[r, c]] = (plus - minus) / (2.0 * h);
            }
        }
    }
    fd
}

fn relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

#[test]
fn link_examples() {
    assert_eq!(link(0.0), 0.0);
    assert_eq!(link_derivative(0.0), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let t: f64 = rng.random_range(-5.0..5.0);
        assert_eq!(link(t) + link(-t), 0.0);
    }
    let h = 1e-5;
    let fd = (link(0.7 + h) - link(0.7 - h)) / (2.0 * h);
    assert!((fd - link_derivative(0.7)).abs() < 1e-8);
}

#[test]
fn empty_problem_at_origin_is_zero() {
    let ch = empty_channels(3, 2);
    let w = CountWeights::from_channels(&ch);
    let x = LatentFactors::zeros(3, 2, 4);
    let hp = Hyperparameters { k: 4, ..Default::default() };
    assert_eq!(objective(&x, &ch, &w, &hp).unwrap(), 0.0);
}

#[test]
fn single_rating_term() {
    // Rating 4 scales to 0.5; W = Z = 0 predicts 0.
    let rating = FeedbackChannel::new(ChannelKind::Rating, 1, 1, vec![(0, 0, 4.0)], Interval::RATING).unwrap();
    let ch = FeedbackChannels { rating, ..empty_channels(1, 1) };
    let w = CountWeights::from_channels(&ch);
    let hp = only(Hyperparameters { k: 2, ..Default::default() });
    assert_eq!(objective(&LatentFactors::zeros(1, 1, 2), &ch, &w, &hp).unwrap(), 0.125);
}

#[test]
fn coupling_term_and_gradient() {
    let ch = empty_channels(1, 1);
    let w = CountWeights::from_channels(&ch);
    let mut x = LatentFactors::zeros(1, 1, 3);
    x.w[[0, 0]] = 1.0;
    let hp = Hyperparameters { lambda_we: 1.0, ..only(Hyperparameters { k: 3, ..Default::default() }) };
    assert_eq!(objective(&x, &ch, &w, &hp).unwrap(), 0.5);

    // Nonzero W and E with the E prior on: dW = λ(W−E), dE = −λ(W−E) + λ_E n_e E.
    x.e[[0, 1]] = -0.5;
    x.w[[0, 2]] = 0.25;
    let hp = Hyperparameters { lambda_we: 0.7, lambda_e: 0.3, ..hp };
    let g = gradient(&x, &ch, &w, &hp).unwrap();
    let n_e = CountWeights::floored(w.n_e[0]);
    for c in 0..3 {
        let d = x.w[[0, c]] - x.e[[0, c]];
        assert!((g.w[[0, c]] - 0.7 * d).abs() < 1e-15);
        assert!((g.e[[0, c]] - (-0.7 * d + 0.3 * n_e * x.e[[0, c]])).abs() < 1e-15);
    }
    assert_eq!(g.z, Array2::<f64>::zeros((1, 3)));
}

#[test]
fn gradient_vanishes_at_origin() {
    let ch = instance(8, 6, 1);
    let w = CountWeights::from_channels(&ch);
    let hp = random_hp(3, Variant::RhcvPmf, 2);
    let g = gradient(&LatentFactors::zeros(8, 6, 3), &ch, &w, &hp).unwrap();
    assert_eq!(g.norm(), 0.0);
}

#[test]
fn gradient_matches_finite_differences_all_variants() {
    for (case, variant) in Variant::ALL.into_iter().cycle().take(12).enumerate() {
        let seed = case as u64;
        let (n, m, k) = (4 + case % 7, 3 + case % 6, 1 + case % 4);
        let ch = instance(n, m, 100 + seed);
        let w = CountWeights::from_channels(&ch);
        let hp = random_hp(k, variant, 200 + seed);
        let x = random_factors(n, m, k, 0.8, 300 + seed);
        let g = gradient(&x, &ch, &w, &hp).unwrap();
        let fd = finite_difference(&x, &ch, &w, &hp, 1e-5);
        for (name, (a, b)) in FACTOR_NAMES.iter().zip(g.matrices().into_iter().zip(fd.matrices())) {
            let err = relative_error(a, b);
            assert!(err < 1e-4, "case {case} {variant} {name}: relative error {err}");
        }
    }
}

#[test]
fn objective_is_nonnegative_and_permutation_invariant() {
    let ch = instance(7, 5, 9);
    let w = CountWeights::from_channels(&ch);
    let hp = random_hp(4, Variant::RhcvPmf, 10);
    let x = random_factors(7, 5, 4, 1.0, 11);
    let phi = objective(&x, &ch, &w, &hp).unwrap();
    assert!(phi >= 0.0);
    let perm = [2usize, 0, 3, 1];
    let mut y = x.clone();
    for (dst, src) in y.matrices_mut().into_iter().zip(x.matrices()) {
        for (new_col, &old_col) in perm.iter().enumerate() {
            dst.column_mut(new_col).assign(&src.column(old_col));
        }
    }
    let phi_perm = objective(&y, &ch, &w, &hp).unwrap();
    assert!((phi - phi_perm).abs() <= 1e-12 * phi);
}

#[test]
fn zeroed_weights_reduce_to_smaller_variants_bitwise() {
    let ch = instance(9, 7, 21);
    let w = CountWeights::from_channels(&ch);
    let x = random_factors(9, 7, 3, 0.7, 22);
    let hp = random_hp(3, Variant::RhcvPmf, 23);

    let explicit_off = Hyperparameters { lambda_h: 0.0, lambda_d: 0.0, lambda_we: 0.0, lambda_wc: 0.0, ..hp };
    let rv = hp.with_variant(Variant::RvPmf);
    assert_eq!(
        objective(&x, &ch, &w, &explicit_off).unwrap().to_bits(),
        objective(&x, &ch, &w, &rv).unwrap().to_bits()
    );
    assert_eq!(gradient(&x, &ch, &w, &explicit_off).unwrap(), gradient(&x, &ch, &w, &rv).unwrap());

    let all_off = Hyperparameters { lambda_v: 0.0, lambda_ws: 0.0, ..explicit_off };
    let mf = hp.with_variant(Variant::Mf);
    assert_eq!(
        objective(&x, &ch, &w, &all_off).unwrap().to_bits(),
        objective(&x, &ch, &w, &mf).unwrap().to_bits()
    );
    assert_eq!(gradient(&x, &ch, &w, &all_off).unwrap(), gradient(&x, &ch, &w, &mf).unwrap());
}

#[test]
fn parallel_evaluation_is_bit_identical() {
    let ch = instance(40, 30, 5);
    let w = CountWeights::from_channels(&ch);
    let hp = random_hp(4, Variant::RhcvPmf, 6);
    let x = random_factors(40, 30, 4, 0.5, 7);
    let seq = Objective::new(&ch, &w, &hp, false).unwrap();
    let par = Objective::new(&ch, &w, &hp, true).unwrap();
    assert_eq!(seq.value(&x).unwrap().to_bits(), par.value(&x).unwrap().to_bits());
    assert_eq!(seq.gradient(&x).unwrap(), par.gradient(&x).unwrap());
}

#[test]
fn small_step_decreases_objective() {
    for seed in 0..10 {
        let ch = instance(8, 6, 40 + seed);
        let w = CountWeights::from_channels(&ch);
        let hp = random_hp(3, Variant::ALL[seed as usize % 4], 50 + seed);
        let mut x = random_factors(8, 6, 3, 0.5, 60 + seed);
        let before = objective(&x, &ch, &w, &hp).unwrap();
        let g = gradient(&x, &ch, &w, &hp).unwrap();
        x.scaled_add(-1e-4, &g);
        assert!(objective(&x, &ch, &w, &hp).unwrap() < before);
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    let ch = instance(4, 3, 0);
    let w = CountWeights::from_channels(&ch);
    let hp = Hyperparameters { k: 2, ..Default::default() };
    assert!(matches!(
        objective(&LatentFactors::zeros(5, 3, 2), &ch, &w, &hp),
        Err(ModelError::DimensionMismatch { .. })
    ));
    assert!(matches!(
        objective(&LatentFactors::zeros(4, 3, 3), &ch, &w, &hp),
        Err(ModelError::DimensionMismatch { .. })
    ));
}

#[test]
fn predicted_ratings() {
    assert_eq!(predict_rating(&[0.0, 0.0], &[1.0, 2.0], Interval::RATING), 3.0);
    assert_eq!(predict_rating(&[f64::INFINITY], &[1.0], Interval::RATING), 5.0);
    assert_eq!(predict_rating(&[f64::NEG_INFINITY], &[1.0], Interval::RATING), 1.0);
    let t = 0.5f64.atanh();
    assert!((predict_rating(&[t], &[1.0], Interval::RATING) - 4.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let a: f64 = rng.random_range(-30.0..30.0);
        let r = predict_rating(&[a], &[1.0], Interval::RATING);
        assert!((1.0..=5.0).contains(&r));
    }
}
