//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use cir_usv::{model::usv_family_3f, CirModel, UsvFamilyParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub fn load(name: &str) -> CirModel {
    cir_usv::cli::load_model(&data_path(name)).expect("data model")
}

pub fn family_params(rng: &mut ChaCha8Rng) -> UsvFamilyParams {
    let beta11 = rng.random_range(-3.0..-0.1);
    let gap = rng.random_range(0.2..3.0);
    UsvFamilyParams {
        beta11,
        beta22: beta11 - gap,
        beta23: rng.random_range(0.1..3.0),
        rho2: rng.random_range(0.05..2.0),
    }
}

pub fn family_model(rng: &mut ChaCha8Rng) -> CirModel {
    let p = family_params(rng);
    let b = [
        rng.random_range(0.0..0.5),
        rng.random_range(0.0..0.5),
        rng.random_range(0.0..0.5),
    ];
    usv_family_3f(&p, b).expect("draw lies in the valid region")
}

/// Admissible two-factor model. Every fifth draw is degenerate: either two
/// identical factors or a second factor that never enters the short rate.
pub fn two_factor_model(rng: &mut ChaCha8Rng, i: usize) -> CirModel {
    let b = vec![rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)];
    match i % 10 {
        0 => {
            let (d, o, s, r) = (
                rng.random_range(-3.0..-0.1),
                rng.random_range(0.0..1.0),
                rng.random_range(0.5..4.0),
                rng.random_range(0.1..2.0),
            );
            CirModel::new(b, vec![vec![d, o], vec![o, d]], vec![s, s], vec![r, r]).unwrap()
        }
        5 => CirModel::new(
            b,
            vec![
                vec![rng.random_range(-3.0..-0.1), 0.0],
                vec![rng.random_range(0.0..1.5), rng.random_range(-3.0..-0.1)],
            ],
            vec![rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)],
            vec![rng.random_range(0.1..2.0), 0.0],
        )
        .unwrap(),
        _ => {
            let mut rho = vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
            if rng.random_bool(0.2) {
                rho[rng.random_range(0..2)] = 0.0;
            }
            if rho.iter().all(|&r| r == 0.0) {
                rho[0] = 1.0;
            }
            CirModel::new(
                b,
                vec![
                    vec![rng.random_range(-3.0..-0.1), rng.random_range(0.0..1.5)],
                    vec![rng.random_range(0.0..1.5), rng.random_range(-3.0..-0.1)],
                ],
                vec![rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)],
                rho,
            )
            .unwrap()
        }
    }
}

/// Diagonal model whose normalized `(beta, rho)` pairs fall into `classes`
/// well-separated groups, with arbitrary volatilities.
pub fn diagonal_model(rng: &mut ChaCha8Rng, d: usize, classes: usize) -> CirModel {
    assert!(classes >= 1 && classes <= d);
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    while pairs.len() < classes {
        let c = (rng.random_range(-3.0..-0.3), rng.random_range(0.2..2.0));
        if pairs
            .iter()
            .all(|p| (p.0 - c.0).abs() + (p.1 - c.1).abs() > 0.3)
        {
            pairs.push(c);
        }
    }
    let mut assign: Vec<usize> = (0..classes).collect();
    while assign.len() < d {
        assign.push(rng.random_range(0..classes));
    }
    for i in (1..d).rev() {
        let j = rng.random_range(0..=i);
        assign.swap(i, j);
    }
    let sigma2: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..4.0)).collect();
    let mut beta = vec![vec![0.0; d]; d];
    let mut rho = vec![0.0; d];
    for i in 0..d {
        let (bt, rt) = pairs[assign[i]];
        beta[i][i] = bt;
        rho[i] = 2.0 * rt / sigma2[i];
    }
    let b = (0..d).map(|_| rng.random_range(0.0..0.5)).collect();
    CirModel::new(b, beta, sigma2, rho).unwrap()
}

pub fn uniform_state(rng: &mut ChaCha8Rng, d: usize, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.0..hi)).collect()
}
