mod common;

use common::*;
use masknet_core::data::Examples;
use masknet_core::decoupling::*;
use masknet_core::linalg::Matrix;
use masknet_core::network::{forward_masked, loss, LossKind, MultiLayerSupport, NetworkParams};
use masknet_core::{Error, SupportMask};
use rand::Rng;

/// Widths with at most `budget` entries in the final lifted matrix.
fn random_widths(rng: &mut impl Rng, depth: usize, budget: u128) -> Vec<usize> {
    loop {
        let w: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=8)).collect();
        let cols: u128 = w.windows(2).map(|p| (p[0] * p[1]) as u128).product();
        if cols * (*w.last().unwrap() as u128) <= budget {
            return w;
        }
    }
}

#[test]
fn master_equivalence_over_random_networks() {
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let depth = 2 + trial % 3;
        let widths = random_widths(&mut rng, depth, 2_000_000);
        let net = random_net(&mut rng, &widths, (0.0, 0.0));
        let s = random_support(&mut rng, &net, 0.5);
        let x = gaussian_vec(&mut rng, widths[0]);
        let form = decouple_network(&net, &x, &s).unwrap();
        let direct = forward_masked(&net, &x, &s).unwrap();
        let err = rel_diff(&form.output().unwrap(), &direct);
        worst = worst.max(err);
    }
    assert!(worst <= 1e-10, "worst relative difference {worst}");
}

#[test]
fn two_layer_all_ones_is_product() {
    let mut rng = rng(2);
    for _ in 0..100 {
        let net = random_net(&mut rng, &[2, 2, 2], (0.0, 0.0));
        let x = gaussian_vec(&mut rng, 2);
        let first = decouple_first_layer(&x, &SupportMask::ones(2)).unwrap();
        let u2 = lift_next_layer(&first, &SupportMask::ones(2), net.layer(1).spec()).unwrap();
        let v = weight_vector(&net, 2).unwrap();
        let w21 = net.layer(1).weight().matmul(net.layer(0).weight()).unwrap();
        let expected = w21.matvec(&x).unwrap();
        assert!(rel_diff(&u2.matvec(&v).unwrap(), &expected) < 1e-12);
    }
}

#[test]
fn three_layer_random_masks_small_widths() {
    let mut rng = rng(3);
    for _ in 0..50 {
        let widths: Vec<usize> = (0..4).map(|_| rng.random_range(1..=4)).collect();
        let net = random_net(&mut rng, &widths, (0.0, 0.0));
        let s = random_support(&mut rng, &net, 0.6);
        let x = gaussian_vec(&mut rng, widths[0]);
        let u = decouple_sample(&net.specs(), &x, &s).unwrap().u;
        let v = weight_vector(&net, 3).unwrap();
        let y = forward_masked(&net, &x, &s).unwrap();
        assert!(rel_diff(&u.matvec(&v).unwrap(), &y) <= 1e-10);
    }
}

#[test]
fn weight_vector_dimension_is_product_of_sizes() {
    let mut rng = rng(4);
    for _ in 0..30 {
        let depth = rng.random_range(1..=3);
        let widths = random_widths(&mut rng, depth, 1_000_000);
        let net = random_net(&mut rng, &widths, (0.0, 0.0));
        for upto in 1..=net.depth() {
            let expected: usize = widths[..=upto].windows(2).map(|p| p[0] * p[1]).product();
            assert_eq!(weight_vector(&net, upto).unwrap().dim(), expected);
        }
    }
}

#[test]
fn u_depends_only_on_masks_and_v_only_on_weights() {
    let mut rng = rng(5);
    let widths = [3, 4, 2];
    let a = random_net(&mut rng, &widths, (0.0, 0.0));
    let b = random_net(&mut rng, &widths, (0.0, 0.0));
    let s = random_support(&mut rng, &a, 0.5);
    let x = gaussian_vec(&mut rng, 3);
    assert_eq!(decouple_network(&a, &x, &s).unwrap().u, decouple_network(&b, &x, &s).unwrap().u);
    let t = random_support(&mut rng, &a, 0.5);
    let x2 = gaussian_vec(&mut rng, 3);
    assert_eq!(decouple_network(&a, &x, &s).unwrap().v, decouple_network(&a, &x2, &t).unwrap().v);
}

#[test]
fn zeroed_unit_is_absorbed_downstream() {
    let mut rng = rng(6);
    let net = random_net(&mut rng, &[3, 4, 3, 2], (0.0, 0.0));
    let mut s = MultiLayerSupport::all_ones(&net);
    s.masks_mut()[0].set(1, false);
    let x = gaussian_vec(&mut rng, 3);
    let u = decouple_sample(&net.specs(), &x, &s).unwrap().u;
    // Perturbing the weights leaving unit 1 of layer 1 cannot change the output.
    let y = u.matvec(&weight_vector(&net, 3).unwrap()).unwrap();
    let mut w2 = net.layer(1).weight().clone();
    let rows = w2.rows();
    for i in 0..rows {
        w2.as_mut_slice()[i + rows] += 10.0;
    }
    let mut bumped = net.clone();
    bumped.set_parameters(1, w2).unwrap();
    let y2 = u.matvec(&weight_vector(&bumped, 3).unwrap()).unwrap();
    assert!(rel_diff(&y2, &y) < 1e-12);
}

fn teacher_dataset(rng: &mut impl Rng, n: usize) -> (NetworkParams, Examples, Vec<MultiLayerSupport>) {
    let net = random_net(rng, &[2, 2, 2], (0.0, 0.0));
    let supports: Vec<_> = (0..n).map(|_| random_support(rng, &net, 0.5)).collect();
    let xs: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(rng, 2)).collect();
    let ys: Vec<Vec<f64>> = xs
        .iter()
        .zip(&supports)
        .map(|(x, s)| forward_masked(&net, x, s).unwrap().into_vec())
        .collect();
    let ex = Examples::from_pairs(xs.iter().map(Vec::as_slice).zip(ys.iter().map(Vec::as_slice))).unwrap();
    (net, ex, supports)
}

#[test]
fn stacked_dataset_reproduces_outputs() {
    let mut rng = rng(7);
    let (net, ex, supports) = teacher_dataset(&mut rng, 3);
    let ds = assemble_lifted_dataset(&net.specs(), &ex, &supports).unwrap();
    assert_eq!(ds.m_total, 3 * 2);
    let v = weight_vector(&net, 2).unwrap();
    assert!(rel_diff(&ds.u_stacked.matvec(&v).unwrap(), &ds.y_stacked) < 1e-12);
    assert!(bilinear_objective(&ds, &v, LossKind::LeastSquares).unwrap() < 1e-24);
    let zero = vec![0.0; v.dim()];
    let yy: f64 = ds.y_stacked.iter().map(|y| y * y).sum();
    assert!((bilinear_objective(&ds, &zero, LossKind::LeastSquares).unwrap() - yy).abs() < 1e-12);

    let single = assemble_lifted_dataset(&net.specs(), &ex.subset(&[0]), &supports[..1]).unwrap();
    assert_eq!(single.u_stacked, decouple_sample(&net.specs(), ex.input(0), &supports[0]).unwrap().u);
}

#[test]
fn objective_matches_per_sample_losses() {
    let mut rng = rng(8);
    let (net, ex, supports) = teacher_dataset(&mut rng, 5);
    let ds = assemble_lifted_dataset(&net.specs(), &ex, &supports).unwrap();
    let other = random_net(&mut rng, &[2, 2, 2], (0.0, 0.0));
    let v = weight_vector(&other, 2).unwrap();
    let mut direct = 0.0;
    for (n, s) in supports.iter().enumerate() {
        let pred = forward_masked(&other, ex.input(n), s).unwrap();
        direct += loss(LossKind::LeastSquares, &pred, ex.target(n)).unwrap().0;
    }
    let lifted = bilinear_objective(&ds, &v, LossKind::LeastSquares).unwrap();
    assert!((lifted - direct).abs() <= 1e-10 * direct.max(1.0));
}

#[test]
fn oversized_lift_reports_dimensions() {
    let net_specs = NetworkParams::dense_specs(&[8, 8, 8, 8, 8]);
    let s = MultiLayerSupport::new(vec![SupportMask::ones(8); 3]);
    match decouple_sample(&net_specs, &[1.0; 8], &s) {
        Err(Error::EntryCapExceeded { rows, cols, .. }) => assert!(rows as u128 * cols as u128 > 100_000_000),
        other => panic!("expected an entry-cap error, got {other:?}"),
    }
    assert!(lift_next_layer(
        &decouple_first_layer(&[1.0], &SupportMask::ones(2)).unwrap(),
        &SupportMask::ones(3),
        &NetworkParams::dense_specs(&[3, 3])[0],
    )
    .is_err());
    let _ = Matrix::zeros(1, 1);
}
