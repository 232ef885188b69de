mod common;

use common::{on_ranks, random_hermitian, rel_diff};
use flame_core::dist_field::{Band, Layout};
use flame_core::fft::Direction;
use flame_core::model::{nonlinear_term, ModelParams};
use flame_core::oracle::{direct_convolution, direct_dft_2d, direct_quadratic_sum};
use num_complex::Complex;

fn max_norm(v: &[Complex<f64>]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[test]
fn fft2d_matches_direct_sum_30_by_30_on_3_ranks() {
    let layout = Layout::build(7, 3).unwrap();
    assert_eq!(layout.n_psi(), 30);
    let n = 30;
    let global = common::random_values(n * n, 5);
    for dir in [Direction::Forward, Direction::Inverse] {
        let got = on_ranks(3, 7, |sp| {
            let root = sp.rank() == 0;
            let f = sp.scatter_full(root.then_some(global.as_slice()))?;
            let g = sp.fft2d(f, dir)?;
            sp.gather_full(&g)
        })
        .unwrap();
        let want = direct_dft_2d(&global, n, dir);
        let err: Vec<_> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
        assert!(max_norm(&err) <= 1e-12 * max_norm(&want), "{dir:?}");
    }
}

#[test]
fn to_physical_evaluates_the_fourier_sum() {
    let k = 3;
    let band = random_hermitian(k, 1.0, 11);
    for np in [1, 2, 4] {
        let (grid, n) = on_ranks(np, k, |sp| {
            let f = sp.embed_padded(&band)?;
            let g = sp.to_physical(f)?;
            Ok((sp.gather_full(&g)?, sp.layout().n_psi()))
        });
        let grid = grid.unwrap();
        let mut worst: f64 = 0.0;
        for n2 in 0..n {
            for n1 in 0..n {
                let mut acc = Complex::new(0.0, 0.0);
                for (k1, k2, v) in band.iter() {
                    let e = (k1 * n1 as i64 + k2 * n2 as i64).rem_euclid(n as i64) as f64;
                    let a = -std::f64::consts::TAU * e / n as f64;
                    acc += v * Complex::new(a.cos(), a.sin());
                }
                worst = worst.max((grid[n2 * n + n1] - acc).norm());
            }
        }
        assert!(worst < 1e-13, "np={np}: {worst}");
        // Zero mode is the grid mean.
        let mean: Complex<f64> = grid.iter().sum::<Complex<f64>>() / (n * n) as f64;
        assert!((mean - band.get(0, 0)).norm() < 1e-15);
    }
}

#[test]
fn round_trip_through_physical_space() {
    let band = random_hermitian(4, 1.0, 3);
    let back = on_ranks(2, 4, |sp| {
        let f = sp.embed_padded(&band)?;
        let g = sp.to_physical(f)?;
        let c = sp.from_physical(g)?;
        sp.truncate_band(&c, 4)
    });
    assert!(rel_diff(&back, &band) < 1e-14);
}

#[test]
fn convolution_matches_brute_force() {
    for k in 1..=5 {
        let a = random_hermitian(k, 1.0, 100 + k as u64);
        let b = random_hermitian(k, 1.0, 200 + k as u64);
        let want = direct_convolution(&a, &b);
        for np in [1, 3] {
            let got = on_ranks(np, k, |sp| sp.convolve_bands(&a, &b));
            assert!(rel_diff(&got, &want) < 1e-12, "K={k} np={np}");
        }
    }
}

#[test]
fn nonlinear_term_matches_quadruple_sum() {
    let t = 200.0;
    for case in 0..20u64 {
        let k = 1 + (case as usize % 6);
        let np = [1, 2, 3, 4][case as usize % 4];
        let phi = random_hermitian(k, 1.0, 1000 + case);
        let p = ModelParams::<f64>::flame(k);
        let got = on_ranks(np, k, |sp| {
            let f = sp.embed_padded(&phi)?;
            let n = nonlinear_term(sp, &f, t, &p)?;
            sp.truncate_band(&n, k)
        });
        let mut want = direct_quadratic_sum(&phi);
        for v in want.data_mut() {
            *v *= -1.0 / (2.0 * t * t);
        }
        let e = rel_diff(&got, &want);
        assert!(e < 1e-12, "case {case} K={k} np={np}: {e:e}");
    }
}

#[test]
fn symmetrized_fields_are_real_on_the_grid() {
    for case in 0..20u64 {
        let k = 1 + (case as usize % 8);
        let np = [1, 2, 4][case as usize % 3];
        let w = 2 * k + 1;
        // Deliberately not Hermitian before the distributed pass.
        let raw = Band::from_data(k, common::random_values(w * w, 50 + case)).unwrap();
        let (grid, fixed) = on_ranks(np, k, |sp| {
            let mut f = sp.embed_padded(&raw)?;
            sp.symmetrize(&mut f, k)?;
            let band = sp.truncate_band(&f, k)?;
            let g = sp.to_physical(f)?;
            Ok((sp.gather_full(&g)?, band))
        });
        let grid = grid.unwrap();
        let re = grid.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let im = grid.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(im <= 1e-12 * re, "case {case}: {im:e} vs {re:e}");
        let mut serial = raw.clone();
        serial.symmetrize();
        assert_eq!(fixed, serial);
    }
}

#[test]
fn results_do_not_depend_on_rank_count_or_strategy() {
    use flame_core::dist_field::TransposeStrategy;
    let k = 5;
    let phi = random_hermitian(k, 1.0, 77);
    let p = ModelParams::<f64>::flame(k);
    let mut seen = Vec::new();
    for np in [1, 2, 4] {
        for s in [TransposeStrategy::AllToAll, TransposeStrategy::Gather] {
            seen.push(on_ranks(np, k, |sp| {
                sp.set_strategy(s);
                let f = sp.embed_padded(&phi)?;
                let n = nonlinear_term(sp, &f, 200.0, &p)?;
                sp.truncate_band(&n, k)
            }));
        }
    }
    assert!(seen.iter().all(|b| b == &seen[0]));
}
