use exomix::bounds::{omega, thm1_bound, BoundInputs};
use exomix::contraction::poisson_inv_cdf;
use exomix::decay::DecaySequence;
use exomix::doeblin::doeblin_decompose;
use exomix::matrix::StochasticMatrix;
use exomix::mixing::{alpha_exact, tv_distance, JointDistribution};
use proptest::prelude::*;

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn stochastic(n: usize) -> impl Strategy<Value = StochasticMatrix> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, n), n)
        .prop_map(|rows| StochasticMatrix::from_rows(rows.into_iter().map(normalized).collect()).unwrap())
}

fn joint(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, cols), rows).prop_filter_map("zero mass", |t| {
        let s: f64 = t.iter().flatten().sum();
        (s > 1e-3).then(|| t.into_iter().map(|r| r.into_iter().map(|x| x / s).collect()).collect())
    })
}

fn jd(t: &[Vec<f64>]) -> JointDistribution {
    JointDistribution::from_rows(t.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn doeblin_reconstructs_and_is_maximal(p in (2usize..6).prop_flat_map(stochastic)) {
        let parts = doeblin_decompose(&p).unwrap();
        let n = p.n();
        // Largest eta with pi(x, .) >= eta nu for all x is the sum of column minima.
        let colmin: f64 = (0..n).map(|y| (0..n).map(|x| p.get(x, y)).fold(1.0, f64::min)).sum();
        prop_assert!((parts.eta - colmin).abs() < 1e-12);
        for x in 0..n {
            for y in 0..n {
                prop_assert!((parts.reconstruct(x, y) - p.get(x, y)).abs() < 1e-12);
                if let Some(nu) = &parts.nu {
                    prop_assert!(parts.eta * nu[y] <= p.get(x, y) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn alpha_is_symmetric_and_at_most_quarter(t in joint(3, 4)) {
        let j = jd(&t);
        let a = alpha_exact(&j).unwrap();
        let b = alpha_exact(&j.transpose()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=0.25 + 1e-12).contains(&a));
    }

    #[test]
    fn alpha_invariant_under_relabeling(t in joint(3, 3), perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let a = alpha_exact(&jd(&t)).unwrap();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&k| t[i][k]).collect()).collect();
        prop_assert!((a - alpha_exact(&jd(&permuted)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn coarsening_does_not_increase_alpha(t in joint(3, 4)) {
        let a = alpha_exact(&jd(&t)).unwrap();
        let merged: Vec<Vec<f64>> = t.iter().map(|r| vec![r[0] + r[1], r[2], r[3]]).collect();
        prop_assert!(alpha_exact(&jd(&merged)).unwrap() <= a + 1e-12);
    }

    #[test]
    fn tv_triangle(
        (p, q, r) in (2usize..7).prop_flat_map(|n| {
            let d = || prop::collection::vec(0.01f64..1.0, n).prop_map(normalized);
            (d(), d(), d())
        })
    ) {
        let pq = tv_distance(&p, &q).unwrap().value();
        let qr = tv_distance(&q, &r).unwrap().value();
        let pr = tv_distance(&p, &r).unwrap().value();
        prop_assert!(pr <= pq + qr + 1e-12);
        prop_assert!((pq - tv_distance(&q, &p).unwrap().value()).abs() < 1e-15);
    }

    #[test]
    fn poisson_quantile_monotone(lambda in 0.05f64..50.0, u in 0.0f64..1.0, v in 0.0f64..1.0, dl in 0.0f64..5.0) {
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        prop_assert!(poisson_inv_cdf(lambda, lo).unwrap() <= poisson_inv_cdf(lambda, hi).unwrap());
        prop_assert!(poisson_inv_cdf(lambda, u).unwrap() <= poisson_inv_cdf(lambda + dl, u).unwrap());
    }

    #[test]
    fn thm1_bound_non_increasing_in_n(rho in 0.05f64..0.9, q in 0.05f64..0.9, m in 1usize..4, r in 1usize..5) {
        let alpha = DecaySequence::geometric(0.25, q).unwrap();
        let mut prev = f64::INFINITY;
        for n in (r + 2 * m)..(r + 2 * m + 40) {
            let v = thm1_bound(&BoundInputs::new(n, r, m, rho, alpha.clone()), 1000).unwrap().value;
            prop_assert!(v <= prev + 1e-12, "n = {}: {} > {}", n, v, prev);
            prev = v;
        }
    }

    #[test]
    fn omega_non_increasing_in_t(a0 in 0.05f64..0.5, b0 in 0.0f64..0.5, beta in 0.05f64..0.8, r in 1usize..10) {
        let a = DecaySequence::geometric_from_one(a0 * (1.0 - beta), beta).unwrap();
        let b = DecaySequence::geometric_from_one(b0, beta).unwrap();
        let mut prev = f64::INFINITY;
        for t in r + 1..=r + 100 {
            let w = omega(&a, &b, t, r, 50).unwrap();
            prop_assert!(w <= prev + 1e-12, "t = {}: {} > {}", t, w, prev);
            prev = w;
        }
    }
}
