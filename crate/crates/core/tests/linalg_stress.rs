use hankel_nwidth::linalg::{self, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

#[test]
fn factorizations_meet_residual_bounds_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=20);
        let m = random(n, n, &mut rng);
        let nf = n as f64;

        let s = linalg::real_schur(&m).unwrap();
        let rec = &s.q * &s.t * s.q.transpose();
        assert!((rec - &m).norm() <= 1e-12 * m.norm() * nf);
        assert!((s.q.transpose() * &s.q - Matrix::identity(n, n)).norm() <= 1e-12 * nf);
        for j in 0..n {
            for i in (j + 2)..n {
                assert_eq!(s.t[(i, j)], 0.0);
            }
        }

        let cols = rng.gen_range(1..=20);
        let r = random(n, cols, &mut rng);
        let d = linalg::svd(&r).unwrap();
        let rec = &d.u * Matrix::from_diagonal(&d.s) * d.v.transpose();
        assert!((rec - &r).norm() <= 1e-12 * r.norm());
        assert!(d.s.iter().zip(d.s.iter().skip(1)).all(|(a, b)| a >= b));

        let sym = linalg::symmetrize(&m);
        let e = linalg::symmetric_eig(&sym).unwrap();
        let rec = &e.vectors * Matrix::from_diagonal(&e.values) * e.vectors.transpose();
        assert!((rec - &sym).norm() <= 1e-12 * sym.norm() * nf);
        assert!(e.values.iter().zip(e.values.iter().skip(1)).all(|(a, b)| a >= b));

        let psd = &r * r.transpose();
        let e = linalg::symmetric_eig(&psd).unwrap();
        assert!(e.values[n - 1] >= -1e-12 * psd.norm());

        let well = &m + Matrix::identity(n, n) * (2.0 * nf.sqrt() + 1.0);
        let rhs = random(n, 2, &mut rng);
        let x = linalg::solve(&well, &rhs).unwrap();
        let resid = (&well * &x - &rhs).norm();
        assert!(resid <= 1e-11 * well.norm() * x.norm());
    }
}

#[test]
fn expm_matches_eigen_route_on_symmetric_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.gen_range(1..=10);
        let m = linalg::symmetrize(&random(n, n, &mut rng));
        let e = linalg::expm(&m).unwrap();
        let eig = linalg::symmetric_eig(&m).unwrap();
        let oracle = &eig.vectors * Matrix::from_diagonal(&eig.values.map(f64::exp)) * eig.vectors.transpose();
        assert!((e - &oracle).norm() <= 1e-11 * oracle.norm());
    }
}
