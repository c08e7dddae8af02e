mod common;

use common::*;
use hola_core::canonical::{build_plan, CanonicalOperators, StepPlan};
use hola_core::linalg::{expm, Mat};
use hola_core::potential::{shift, GaussianPotential, HyperbolicPotential};
use hola_core::sampler::{picard_step, sample_node_noise, ChainState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_state(k: usize, d: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(k, d, |_, _| StandardNormal.sample(rng))
}

fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn gauss_legendre_is_exact_for_polynomials() {
    let (x, w) = gauss_legendre(10);
    let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
    assert!((s - 2.0 / 19.0).abs() < 1e-14);
    assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
}

#[test]
fn canonical_operators_match_independent_construction() {
    for k in 2..=6 {
        for gamma in [0.5, 1.0, 2.0] {
            let ops = CanonicalOperators::new(k, gamma).unwrap();
            assert_eq!(ops.diffusion(), &diffusion(k, gamma));
            assert_eq!(ops.skew(), &skew(k, gamma));
            assert!((ops.linear_drift() - drift(k, gamma)).norm() < 1e-15);
        }
    }
}

#[test]
fn pade_and_taylor_exponentials_agree() {
    for k in 2..=5 {
        let a = drift(k, 2.0);
        for t in [0.01, 0.1, 1.0, 5.0] {
            let e = expm(&(&a * t)).unwrap();
            let oracle = taylor_expm(&(&a * t));
            assert!(rel_diff(&e, &oracle) < 1e-12, "K={k} t={t}");
        }
    }
}

#[test]
fn fast_step_matches_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 2..=4 {
        let m = (k - 1).max(2);
        let plan = build_plan(&CanonicalOperators::new(k, 2.0).unwrap(), m, 0.05).unwrap();
        for d in 1..=3 {
            let dense = DenseReference::new(k, d, 2.0, m, 0.05);
            let p = shift(HyperbolicPotential::new(d, 1.0).unwrap(), vec![0.3; d]).unwrap();
            for _ in 0..3 {
                let x = random_state(k, d, &mut rng);
                let noise = sample_node_noise(&plan, d, &mut rng);
                let mut s = ChainState::from_matrix(x.clone());
                picard_step(&plan, &p, &mut s, &noise, 3).unwrap();
                let want = dense.step(&p, &x, &noise, 3);
                let err = rel_diff(&s.x, &want);
                assert!(err < 1e-10, "K={k} d={d}: relative error {err:e}");
            }
        }
    }
}

#[test]
fn alpha_weights_match_quadrature() {
    for k in [3, 4, 5] {
        for gamma in [1.0, 2.0] {
            for h in [0.01, 0.1] {
                let m = k - 1;
                let plan = build_plan(&CanonicalOperators::new(k, gamma).unwrap(), m, h).unwrap();
                let a = drift(k, gamma);
                let nodes = equispaced(m);
                for (kk, &tau) in nodes.iter().enumerate() {
                    for j in 0..m {
                        let oracle = alpha_quadrature(&a, &nodes, j, tau, h);
                        let got = &plan.alpha()[kk][j];
                        let worst = (got - &oracle).abs().max();
                        assert!(
                            worst < 1e-9,
                            "K={k} γ={gamma} h={h} node {kk} basis {j}: {worst:e}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn noise_covariance_matches_quadrature() {
    for k in [3, 4, 5] {
        for gamma in [1.0, 2.0] {
            for h in [0.01, 0.1] {
                let m = k - 1;
                let plan = build_plan(&CanonicalOperators::new(k, gamma).unwrap(), m, h).unwrap();
                let a = drift(k, gamma);
                let dm = diffusion(k, gamma);
                let nodes = equispaced(m);
                for i in 0..m {
                    for j in 0..m {
                        let oracle = noise_block_quadrature(&a, &dm, nodes[i], nodes[j], h);
                        let got = plan.sigma_c().view((i * k, j * k), (k, k)).into_owned();
                        let worst = (got - oracle).abs().max();
                        assert!(
                            worst < 1e-9,
                            "K={k} γ={gamma} h={h} block ({i},{j}): {worst:e}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn separable_target_steps_coordinatewise() {
    // On U = ½ Σ λ_c x_c² every coordinate evolves independently, so a d-dim
    // step equals d one-dimensional steps with the matching noise columns.
    let plan: StepPlan = build_plan(&CanonicalOperators::new(4, 1.5).unwrap(), 3, 0.05).unwrap();
    let lambda = [0.5, 1.0, 3.0];
    let p = GaussianPotential::new(lambda.to_vec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_state(4, 3, &mut rng);
    let noise = sample_node_noise(&plan, 3, &mut rng);
    let mut joint = ChainState::from_matrix(x.clone());
    picard_step(&plan, &p, &mut joint, &noise, 3).unwrap();
    for (c, &l) in lambda.iter().enumerate() {
        let pc = GaussianPotential::new(vec![l]).unwrap();
        let xc = x.columns(c, 1).into_owned();
        let nc: Vec<Mat> = noise.iter().map(|w| w.columns(c, 1).into_owned()).collect();
        let mut s = ChainState::from_matrix(xc);
        picard_step(&plan, &pc, &mut s, &nc, 3).unwrap();
        assert!((s.x.column(0) - joint.x.column(c)).norm() < 1e-14);
    }
}

#[test]
fn kronecker_noise_covariance() {
    // Σ_C ⊗ I_d is the covariance of the flattened node noise: compare the
    // dense quadrature on A ⊗ I_d with the canonical blocks.
    let (k, d, gamma, h) = (3, 2, 2.0, 0.1);
    let plan = build_plan(&CanonicalOperators::new(k, gamma).unwrap(), 2, h).unwrap();
    let a = kron_identity(&drift(k, gamma), d);
    let dm = kron_identity(&diffusion(k, gamma), d);
    let dense = noise_block_quadrature(&a, &dm, 1.0, 1.0, h);
    let canonical = kron_identity(&plan.sigma_c().view((k, k), (k, k)).into_owned(), d);
    assert!((dense - canonical).abs().max() < 1e-12);
}

#[test]
fn reduced_backbone_spectrum_is_in_right_half_plane() {
    for k in 3..=8 {
        let q = CanonicalOperators::reduced_backbone(k);
        assert_eq!(q.shape(), (k - 1, k - 1));
        for z in q.complex_eigenvalues().iter() {
            assert!(z.re > 0.0, "K={k}: eigenvalue {z}");
        }
    }
}
