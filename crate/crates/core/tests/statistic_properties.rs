use dp_hotelling::hotelling::{
    pooled_covariance, t2_statistic, t_dp_statistic, PooledCovariance, PooledKind,
};
use dp_hotelling::mechanisms::{PrivacyBudget, PrivatizedSummary};
use dp_hotelling::numlin::{jacobi_eigen, Matrix, SymmetricMatrix};
use dp_hotelling::randkit::RngStream;
use proptest::prelude::*;

fn pd_matrix(d: usize, seed: u64) -> SymmetricMatrix {
    let mut rng = RngStream::new(seed, 0);
    let raw = SymmetricMatrix::from_upper_fn(d, |_, _| {
        dp_hotelling::randkit::sample_std_normal(&mut rng)
    });
    let mut eig = jacobi_eigen(&raw).unwrap();
    for (k, l) in eig.eigenvalues.iter_mut().enumerate() {
        *l = 0.2 + ((k + 1) as f64 * 0.731).fract() * 4.0;
    }
    eig.recompose()
}

fn random_rotation(d: usize, seed: u64) -> Matrix {
    jacobi_eigen(&pd_matrix(d, seed ^ 0xabc)).unwrap().eigenvectors
}

fn classical(cov: SymmetricMatrix, n1: usize, n2: usize) -> PooledCovariance {
    PooledCovariance {
        matrix: cov,
        kind: PooledKind::Classical,
        n1,
        n2,
    }
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rotation_invariance(d in 1usize..7, seed in any::<u64>(), n1 in 3usize..200, n2 in 3usize..200,
                           xs in vec_strategy(6), ys in vec_strategy(6)) {
        let cx = pd_matrix(d, seed);
        let cy = pd_matrix(d, seed.wrapping_add(1));
        let (mx, my) = (&xs[..d], &ys[..d]);
        let pooled = pooled_covariance(&cx, &cy, n1, n2, PooledKind::Classical).unwrap();
        let t = t2_statistic(mx, my, &pooled, n1, n2).unwrap();

        let q = random_rotation(d, seed);
        let rx = cx.congruence(&q).unwrap();
        let ry = cy.congruence(&q).unwrap();
        let pooled_r = pooled_covariance(&rx, &ry, n1, n2, PooledKind::Classical).unwrap();
        let tr = t2_statistic(&q.matvec(mx).unwrap(), &q.matvec(my).unwrap(), &pooled_r, n1, n2).unwrap();
        prop_assert!((t - tr).abs() <= 1e-8 * t.max(1.0), "{} vs {}", t, tr);

        // same through the private statistic with noise switched off
        let ps = |mx: Vec<f64>, my: Vec<f64>, cx: SymmetricMatrix, cy: SymmetricMatrix| PrivatizedSummary {
            mean_x_dp: mx, mean_y_dp: my, cov_x_dp: cx, cov_y_dp: cy,
            budget: PrivacyBudget::privacy_off(), n1, n2, bound_m: 2.0,
        };
        let a = t_dp_statistic(&ps(mx.to_vec(), my.to_vec(), cx.clone(), cy.clone())).unwrap();
        let b = t_dp_statistic(&ps(q.matvec(mx).unwrap(), q.matvec(my).unwrap(), rx, ry)).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
    }

    #[test]
    fn scale_invariance(d in 1usize..7, seed in any::<u64>(), s in 0.01f64..100.0,
                        xs in vec_strategy(6), ys in vec_strategy(6)) {
        let cov = pd_matrix(d, seed);
        let (mx, my) = (&xs[..d], &ys[..d]);
        let t = t2_statistic(mx, my, &classical(cov.clone(), 10, 14), 10, 14).unwrap();
        let r = s.sqrt();
        let sx: Vec<f64> = mx.iter().map(|v| v * r).collect();
        let sy: Vec<f64> = my.iter().map(|v| v * r).collect();
        let ts = t2_statistic(&sx, &sy, &classical(cov.scale(s), 10, 14), 10, 14).unwrap();
        prop_assert!((t - ts).abs() <= 1e-10 * t.max(1.0), "{} vs {}", t, ts);
    }

    #[test]
    fn private_statistic_is_nonnegative(d in 1usize..6, seed in any::<u64>(), eps in 0.01f64..10.0,
                                        xs in vec_strategy(5), ys in vec_strategy(5)) {
        let ps = PrivatizedSummary {
            mean_x_dp: xs[..d].to_vec(),
            mean_y_dp: ys[..d].to_vec(),
            cov_x_dp: pd_matrix(d, seed).scale(0.0),
            cov_y_dp: pd_matrix(d, seed ^ 1),
            budget: PrivacyBudget::new(eps).unwrap(),
            n1: 30,
            n2: 40,
            bound_m: 2.0,
        };
        prop_assert!(t_dp_statistic(&ps).unwrap() >= 0.0);
    }

    #[test]
    fn monotone_in_separation(d in 1usize..6, seed in any::<u64>(), dir in vec_strategy(5),
                              s1 in 0.0f64..5.0, ds in 0.01f64..5.0) {
        let dir = &dir[..d];
        prop_assume!(dir.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let pooled = classical(pd_matrix(d, seed), 20, 20);
        let zero = vec![0.0; d];
        let at = |s: f64| {
            let x: Vec<f64> = dir.iter().map(|v| v * s).collect();
            t2_statistic(&x, &zero, &pooled, 20, 20).unwrap()
        };
        prop_assert!(at(s1 + ds) > at(s1));
    }
}

#[test]
fn one_dimensional_case_is_squared_t() {
    // n₁ = 4, n₂ = 6, x̄ − ȳ = 0.5, s²_X = 2, s²_Y = 1
    let pooled = pooled_covariance(
        &SymmetricMatrix::diagonal(&[2.0]),
        &SymmetricMatrix::diagonal(&[1.0]),
        4,
        6,
        PooledKind::Classical,
    )
    .unwrap();
    let sp2 = (3.0 * 2.0 + 5.0 * 1.0) / 8.0;
    let t = 0.5 / (sp2 * (1.0 / 4.0 + 1.0 / 6.0f64)).sqrt();
    let t2 = t2_statistic(&[0.7], &[0.2], &pooled, 4, 6).unwrap();
    assert!((t2 - t * t).abs() < 1e-12);
}
