use num_complex::Complex64;
use proptest::prelude::*;

use subnyquist_radar::hankel::{hankel_adjoint, hankelize};
use subnyquist_radar::metrics::hit_match;
use subnyquist_radar::tensor::{dictionaries_for_shape, CMatrix, CVector};
use subnyquist_radar::{
    build_index_sets, khatri_rao_support, multilinear_product, synthesize, RadarConfig, Target, TargetScene, Tensor3,
};

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn tensor(dims: [usize; 3]) -> impl Strategy<Value = Tensor3> {
    prop::collection::vec(complex(), dims[0] * dims[1] * dims[2])
        .prop_map(move |data| Tensor3::from_vec(dims, data).unwrap())
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(complex(), rows * cols).prop_map(move |data| CMatrix::from_vec(rows, cols, data))
}

fn dims() -> impl Strategy<Value = [usize; 3]> {
    (1..5usize, 1..5usize, 1..5usize).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #[test]
    fn mode_product_adjoint(
        (x, y, m, mode) in (dims(), 1..5usize, 0..3usize).prop_flat_map(|(d, rows, mode)| {
            let mut out = d;
            out[mode] = rows;
            (tensor(d), tensor(out), matrix(rows, d[mode]), Just(mode))
        })
    ) {
        // <M x, y> = <x, Mᴴ y>
        let lhs = x.mode_product(&m, mode).unwrap().inner(&y);
        let rhs = x.inner(&y.mode_product(&m.adjoint(), mode).unwrap());
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn multilinear_product_matches_kronecker(
        (x, a, b, f) in dims().prop_flat_map(|d| (tensor(d), matrix(2, d[0]), matrix(3, d[1]), matrix(2, d[2])))
    ) {
        let y = multilinear_product(&x, &a, &b, &f).unwrap();
        let vec_x = CVector::from_column_slice(x.as_slice());
        let expected = f.kronecker(&b).kronecker(&a) * vec_x;
        for (got, want) in y.as_slice().iter().zip(expected.iter()) {
            prop_assert!((got - want).norm() < 1e-10);
        }
    }

    #[test]
    fn hankel_lift_adjoint(v in prop::collection::vec(complex(), 2..20), seed in any::<u64>()) {
        let v = CVector::from_vec(v);
        let h = hankelize(&v).unwrap();
        let y = CMatrix::from_fn(h.nrows(), h.ncols(), |i, j| {
            Complex64::from_polar(1.0, (seed % 97) as f64 * 0.1 + i as f64 * 0.7 - j as f64 * 1.3)
        });
        let lhs = h.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>();
        let rhs = v.dotc(&hankel_adjoint(&y));
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn synthesis_is_linear_in_amplitudes(
        a in complex(), b in complex(),
        delay in 0.0..1.0f64, doa in -1.0..0.99f64, doppler in -0.5..0.49f64,
    ) {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let t = |amp| Target::new(amp, delay * cfg.pri, doa, doppler / cfg.pri);
        let za = synthesize(&TargetScene::new(vec![t(a)]), &cfg, &sets).unwrap();
        let zb = synthesize(&TargetScene::new(vec![t(b)]), &cfg, &sets).unwrap();
        let zab = synthesize(&TargetScene::new(vec![t(a + b)]), &cfg, &sets).unwrap();
        for ((x, y), s) in za.values.iter().zip(&zb.values).zip(&zab.values) {
            prop_assert!((x + y - s).norm() < 1e-10);
        }
    }

    #[test]
    fn support_matrix_matches_dense_path(
        cells in prop::collection::vec((0..4usize, 0..3usize, 0..5usize), 1..4),
        rows in prop::collection::btree_set((0..4usize, 0..3usize, 0..5usize), 1..10),
    ) {
        let shape = [4, 3, 5];
        let d = dictionaries_for_shape(shape);
        let support: Vec<[usize; 3]> = cells.iter().map(|&(a, b, c)| [a, b, c]).collect();
        let observed: Vec<[usize; 3]> = rows.iter().map(|&(a, b, c)| [a, b, c]).collect();
        let u = khatri_rao_support(&support, &d, &observed).unwrap();
        for (l, &cell) in support.iter().enumerate() {
            let mut x = Tensor3::zeros(shape);
            x[cell] = Complex64::new(1.0, 0.0);
            let full = multilinear_product(&x, &d.delay, &d.steering, &d.doppler).unwrap();
            for (e, &t) in observed.iter().enumerate() {
                prop_assert!((u[(e, l)] - full[t]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_maps_round_trip(n in 0..16usize, j in 0..20usize, p in 0..16usize) {
        let cfg = RadarConfig::reference();
        let t = Target::on_grid(&cfg, [n, j, p], Complex64::new(1.0, 0.0));
        prop_assert_eq!(cfg.grid().cell_of(&t).unwrap(), [n, j, p]);
    }

    #[test]
    fn hits_ignore_estimate_order(
        offsets in prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64), 3),
        rotate in 0..3usize,
    ) {
        let cfg = RadarConfig::reference();
        let g = cfg.grid();
        let base = [[2.0, 3.0, 1.0], [7.0, 12.0, -5.0], [11.0, 8.0, 4.0]];
        let mk = |[n, j, p]: [f64; 3]| Target::new(
            Complex64::new(1.0, 0.0),
            n * g.delay_bin_width(),
            -1.0 + j * g.doa_bin_width(),
            p * g.doppler_bin_width(),
        );
        let truth = TargetScene::new(base.iter().map(|&c| mk(c)).collect());
        let est: Vec<Target> = base
            .iter()
            .zip(&offsets)
            .map(|(c, o)| mk([c[0] + o.0, c[1] + o.1, c[2] + o.2]))
            .collect();
        let mut rotated = est.clone();
        rotated.rotate_left(rotate);
        let a = hit_match(&truth, &TargetScene::new(est), &cfg).hits;
        let b = hit_match(&truth, &TargetScene::new(rotated), &cfg).hits;
        prop_assert_eq!(a, b);
    }
}

#[test]
fn index_set_size_and_order() {
    let cfg = RadarConfig::reference();
    let sets = build_index_sets(&cfg).unwrap();
    assert_eq!(sets.len(), cfg.coeffs_per_channel * cfg.rx_count * cfg.total_pulses());
    assert!(sets.gamma.windows(2).all(|w| w[0] < w[1]));
}
