mod common;

use common::*;
use masknet_core::linalg::*;
use masknet_core::Error;
use rand::Rng;

fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b).expect("same shape")
}

#[test]
fn kron_examples() {
    let k = kron(&Matrix::from_rows(&[&[1.0]]).unwrap(), &Matrix::from_rows(&[&[5.0]]).unwrap()).unwrap();
    assert_eq!(k, Matrix::from_rows(&[&[5.0]]).unwrap());
    assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(3)).unwrap(), Matrix::identity(6));
    let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
    let b = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
    let expected = Matrix::from_rows(&[
        &[0.0, 1.0, 0.0, 2.0],
        &[1.0, 0.0, 2.0, 0.0],
        &[0.0, 3.0, 0.0, 4.0],
        &[3.0, 0.0, 4.0, 0.0],
    ])
    .unwrap();
    assert_eq!(kron(&a, &b).unwrap(), expected);
}

#[test]
fn kron_matches_index_formula_and_nalgebra() {
    let mut rng = rng(10);
    for _ in 0..50 {
        let (ar, ac, br, bc) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
        let a = gaussian_matrix(&mut rng, ar, ac);
        let b = gaussian_matrix(&mut rng, br, bc);
        let k = kron(&a, &b).unwrap();
        for i in 0..ar {
            for j in 0..ac {
                for p in 0..br {
                    for q in 0..bc {
                        assert_eq!(k[(i * br + p, j * bc + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
        let oracle = to_na(&a).kronecker(&to_na(&b));
        assert_eq!(k.as_slice(), oracle.as_slice());
    }
}

#[test]
fn kron_cap_rejects_blow_up() {
    let a = Matrix::zeros(10, 10);
    assert!(matches!(kron_capped(&a, &a, 9_999), Err(Error::EntryCapExceeded { .. })));
    assert!(kron_capped(&a, &a, 10_000).is_ok());
}

#[test]
fn vectorize_examples_and_outer_product_identity() {
    let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
    assert_eq!(&*vectorize(&m), &[1.0, 3.0, 2.0, 4.0]);
    let col = Matrix::column_vector(&[4.0, 5.0, 6.0]);
    assert_eq!(&*vectorize(&col), &[4.0, 5.0, 6.0]);
    let mut rng = rng(11);
    for _ in 0..100 {
        let (na, nb) = (rng.random_range(1..6), rng.random_range(1..6));
        let a = gaussian_vec(&mut rng, na);
        let b = gaussian_vec(&mut rng, nb);
        let outer = Matrix::column_vector(&a).matmul(&Matrix::column_vector(&b).transpose()).unwrap();
        let lhs = vectorize(&outer);
        let rhs = kron_vec(&b, &a, DEFAULT_ENTRY_CAP).unwrap();
        assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
        assert_eq!(unvectorize(&lhs, a.len(), b.len()).unwrap(), outer);
    }
}

#[test]
fn mixed_product_and_vec_identity() {
    let mut rng = rng(12);
    for _ in 0..100 {
        let d: Vec<usize> = (0..6).map(|_| rng.random_range(1..5)).collect();
        let a = gaussian_matrix(&mut rng, d[0], d[1]);
        let b = gaussian_matrix(&mut rng, d[2], d[3]);
        let c = gaussian_matrix(&mut rng, d[1], d[4]);
        let dd = gaussian_matrix(&mut rng, d[3], d[5]);
        let lhs = kron(&a, &b).unwrap().matmul(&kron(&c, &dd).unwrap()).unwrap();
        let rhs = kron(&a.matmul(&c).unwrap(), &b.matmul(&dd).unwrap()).unwrap();
        assert!(max_diff(&lhs, &rhs) <= 1e-10);

        let x = gaussian_matrix(&mut rng, d[1], d[2]);
        let bm = gaussian_matrix(&mut rng, d[2], d[4]);
        let axb = a.matmul(&x).unwrap().matmul(&bm).unwrap();
        let via_kron = kron(&bm.transpose(), &a).unwrap().matvec(&vectorize(&x)).unwrap();
        assert!(max_abs_diff(&vectorize(&axb), &via_kron) <= 1e-10);
    }
}

#[test]
fn rank_one_svd_examples() {
    let mut rng = rng(13);
    let u0 = gaussian_vec(&mut rng, 4);
    let w0 = gaussian_vec(&mut rng, 3);
    let (nu, nw) = (norm(&u0), norm(&w0));
    let u0: Vec<f64> = u0.iter().map(|x| x / nu).collect();
    let w0: Vec<f64> = w0.iter().map(|x| x / nw).collect();
    let v = Matrix::column_vector(&u0).matmul(&Matrix::column_vector(&w0).transpose()).unwrap();
    let svd = rank_one_svd(&v).unwrap();
    assert!((svd.sigma - 1.0).abs() < 1e-10);
    let s = svd.u.dot(&u0).signum();
    assert!(max_abs_diff(&svd.u.scaled(s), &u0) < 1e-8);
    assert!(max_abs_diff(&svd.w.scaled(s), &w0) < 1e-8);

    let degenerate = rank_one_svd(&Matrix::identity(2).scaled(3.0)).unwrap();
    assert!((degenerate.sigma - 3.0).abs() < 1e-10);
    assert!((degenerate.u.norm() - 1.0).abs() < 1e-10);

    assert!(rank_one_svd(&Matrix::zeros(2, 2)).is_err());
}

#[test]
fn rank_one_svd_matches_full_svd_oracle() {
    let mut rng = rng(14);
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..8), rng.random_range(1..8));
        let v = gaussian_matrix(&mut rng, r, c);
        let svd = rank_one_svd(&v).unwrap();
        let mut sv: Vec<f64> = to_na(&v).singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!((svd.sigma - sv[0]).abs() <= 1e-10 * sv[0].max(1.0), "{} vs {}", svd.sigma, sv[0]);
        let approx = Matrix::column_vector(&svd.u)
            .matmul(&Matrix::column_vector(&svd.w).transpose())
            .unwrap()
            .scaled(svd.sigma);
        let resid = v.sub(&approx).unwrap().frobenius_norm();
        let tail: f64 = sv[1..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!(resid <= v.frobenius_norm());
        assert!((resid - tail).abs() <= 1e-8, "{resid} vs {tail}");
    }
}

#[test]
fn singular_bounds_examples_and_oracle() {
    let b = singular_bounds(&Matrix::identity(5)).unwrap();
    assert!((b.sigma_min - 1.0).abs() < 1e-12 && (b.sigma_max - 1.0).abs() < 1e-12);
    let b = singular_bounds(&Matrix::diag(&[2.0, 3.0])).unwrap();
    assert!((b.sigma_min - 2.0).abs() < 1e-12 && (b.sigma_max - 3.0).abs() < 1e-12);
    let mut rng = rng(15);
    for _ in 0..20 {
        let u = gaussian_matrix(&mut rng, 20, 6);
        let b = singular_bounds(&u).unwrap();
        let sv: Vec<f64> = to_na(&u).singular_values().iter().copied().collect();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((b.sigma_max - smax).abs() <= 1e-8 * smax);
        assert!((b.sigma_min - smin).abs() <= 1e-8 * smax);
    }
    assert!(singular_bounds(&Matrix::zeros(0, 0)).is_err());
}

/// Direct valid-padding strided cross-correlation over column-major maps.
fn direct_conv(g: &ConvGeometry, kernel: &Matrix, input: &[f64]) -> Vec<f64> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let mut out = vec![0.0; g.output_dim()];
    for o in 0..g.channels_out {
        for oc in 0..ow {
            for or in 0..oh {
                let mut acc = 0.0;
                for c in 0..g.channels_in {
                    for q in 0..g.kernel_width {
                        for p in 0..g.kernel_height {
                            let (ir, ic) = (or * g.stride + p, oc * g.stride + q);
                            acc += kernel[(o * g.kernel_height + p, c * g.kernel_width + q)]
                                * input[ir + g.in_height * (ic + g.in_width * c)];
                        }
                    }
                }
                out[or + oh * (oc + ow * o)] = acc;
            }
        }
    }
    out
}

#[test]
fn toeplitz_examples() {
    let k = Matrix::from_rows(&[&[1.5]]).unwrap();
    assert_eq!(conv_as_toeplitz(&k, 2, 2, 1, 1, 1).unwrap(), Matrix::identity(4).scaled(1.5));

    let avg = Matrix::from_fn(2, 2, |_, _| 0.25);
    let w = conv_as_toeplitz(&avg, 4, 4, 1, 1, 2).unwrap();
    assert_eq!((w.rows(), w.cols()), (4, 16));
    let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
    let g = ConvGeometry { in_height: 4, in_width: 4, channels_in: 1, channels_out: 1, kernel_height: 2, kernel_width: 2, stride: 2 };
    assert!(max_abs_diff(&w.matvec(&x).unwrap(), &direct_conv(&g, &avg, &x)) < 1e-12);

    let w = conv_as_toeplitz(&Matrix::from_fn(3, 3, |i, j| 1.0 + (i * 3 + j) as f64), 5, 5, 1, 1, 1).unwrap();
    assert_eq!((w.rows(), w.cols()), (9, 25));
    for r in 0..9 {
        assert_eq!((0..25).filter(|&c| w[(r, c)] != 0.0).count(), 9);
    }
    assert!(conv_as_toeplitz(&Matrix::zeros(6, 6), 5, 5, 1, 1, 1).is_err());
}

#[test]
fn toeplitz_matches_direct_convolution() {
    let mut rng = rng(16);
    for _ in 0..200 {
        let kh = rng.random_range(1..4);
        let kw = rng.random_range(1..4);
        let g = ConvGeometry {
            in_height: kh + rng.random_range(0..4),
            in_width: kw + rng.random_range(0..4),
            channels_in: rng.random_range(1..3),
            channels_out: rng.random_range(1..3),
            kernel_height: kh,
            kernel_width: kw,
            stride: rng.random_range(1..3),
        };
        let (kr, kc) = g.kernel_shape();
        let kernel = gaussian_matrix(&mut rng, kr, kc);
        let input = gaussian_vec(&mut rng, g.input_dim());
        let w = conv_as_toeplitz(&kernel, g.in_height, g.in_width, g.channels_in, g.channels_out, g.stride).unwrap();
        assert!(max_abs_diff(&w.matvec(&input).unwrap(), &direct_conv(&g, &kernel, &input)) <= 1e-12);
    }
}

#[test]
fn symmetric_eigenvalues_match_oracle() {
    let mut rng = rng(17);
    for _ in 0..20 {
        let a = gaussian_matrix(&mut rng, 7, 5).gram();
        let ours = symmetric_eigenvalues(&a).unwrap();
        let mut theirs: Vec<f64> = to_na(&a).symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        assert!(max_abs_diff(&ours, &theirs) <= 1e-9 * theirs[4]);
    }
}
