mod common;

use common::*;
use mnr::blanket::{corr_screen_blankets, nodewise_blankets};
use mnr::datagen::{build_cov, sample_mvn, CovKind, CovSpec};
use mnr::mnr::{adjust_pvalues, Adjustment};
use mnr::numkit::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Inverting the covariance block on {j} ∪ blanket(j) recovers θ_jj.
    #[test]
    fn block_inverse_identity(p in 2usize..=30, density in 0.02f64..0.4, seed in any::<u64>(), pick in any::<usize>()) {
        let rel = block_inverse_error(&sparse_precision(p, density, seed), pick % p);
        prop_assert!(rel <= 1e-8, "relative error {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lasso_kkt_conditions(n in 20usize..80, p in 2usize..40, rho in 0.0f64..0.9, frac in 0.02f64..0.95, seed in any::<u64>()) {
        let Some(ds) = kkt_problem(n, p, rho, seed) else {
            return Ok(());
        };
        let v = lasso_kkt_violation(&ds, frac * lambda_max(&ds));
        prop_assert!(v <= 1e-6, "KKT violation {v}");
    }
}

proptest! {
    #[test]
    fn holm_and_bh_invariants(p in prop::collection::vec(0.0f64..=1.0, 1..40), perm_seed in any::<u64>()) {
        let holm = adjust_pvalues(&p, Adjustment::Holm).unwrap();
        let bh = adjust_pvalues(&p, Adjustment::Bh).unwrap();
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
        for w in order.windows(2) {
            prop_assert!(holm[w[0]] <= holm[w[1]]);
            prop_assert!(bh[w[0]] <= bh[w[1]]);
        }
        for i in 0..p.len() {
            prop_assert!(holm[i] >= p[i] && holm[i] <= 1.0);
            prop_assert!(bh[i] >= p[i] && bh[i] <= 1.0);
            prop_assert!(bh[i] <= holm[i] + 1e-15);
        }
        // permutation equivariance
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        let mut perm: Vec<usize> = (0..p.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let q: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let holm_q = adjust_pvalues(&q, Adjustment::Holm).unwrap();
        let bh_q = adjust_pvalues(&q, Adjustment::Bh).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(holm_q[k], holm[i]);
            prop_assert_eq!(bh_q[k], bh[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn blanket_maps_are_valid_and_symmetric(p in 2usize..16, n in 30usize..120, rho in 0.1f64..0.9, cap in 1usize..6, seed in any::<u64>()) {
        let cov = build_cov(&CovSpec::new(CovKind::Toeplitz { rho }, p).unwrap()).unwrap();
        let x = sample_mvn(&cov, false, n, seed).unwrap();
        let cap = cap.min(p - 1);
        let nw = nodewise_blankets(&x, cap).unwrap();
        let cs = corr_screen_blankets(&x, cap).unwrap();
        for map in [&nw, &cs] {
            prop_assert!(map.validate().is_ok());
            for j in 0..p {
                prop_assert!(!map.neighbors(j).contains(&j));
                prop_assert!(map.neighbors(j).len() <= cap);
            }
        }
        for j in 0..p {
            for &k in nw.neighbors(j) {
                prop_assert!(nw.neighbors(k).contains(&j), "edge {j}-{k} not symmetric");
            }
        }
        prop_assert!(cs.neighbors.iter().all(|b| b.len() == cap));
    }
}

#[test]
fn corr_screen_is_permutation_equivariant() {
    let p = 12;
    let cov = build_cov(&CovSpec::new(CovKind::Toeplitz { rho: 0.7 }, p).unwrap()).unwrap();
    let x = sample_mvn(&cov, false, 80, 3).unwrap();
    let perm: Vec<usize> = (0..p).rev().collect();
    let xp = Matrix::from_fn(80, p, |i, k| x.get(i, perm[k]));
    let a = corr_screen_blankets(&x, 3).unwrap();
    let b = corr_screen_blankets(&xp, 3).unwrap();
    for k in 0..p {
        let mut mapped: Vec<usize> = b.neighbors(k).iter().map(|&m| perm[m]).collect();
        mapped.sort_unstable();
        let mut orig = a.neighbors(perm[k]).to_vec();
        orig.sort_unstable();
        assert_eq!(mapped, orig);
    }
}
