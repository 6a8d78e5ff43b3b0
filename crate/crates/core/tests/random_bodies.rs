//! Randomized property checks over perturbed-ball bodies: the cone-volume
//! identity, representation round trips, Wulff idempotence, homogeneity of
//! the functionals and measure bookkeeping.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use torlab_core::body::{
    polar_dual, radial_gauss_reverse_pred, support_from_radial, wulff_shape, Body, Partition,
    SigmaConvention,
};
use torlab_core::functionals::{crofton_audit, dual_measure, dual_rigidity_q, rigidity_tk};
use torlab_core::sphere::SphereGrid;
use torlab_core::torsion::solve_poisson_polar;

fn random_body(grid: &Arc<SphereGrid>, rng: &mut ChaCha8Rng) -> Body {
    // Fourier perturbation with 1/m^2 decay keeps omega well above zero.
    let mut coeffs = Vec::new();
    for m in 1..=5usize {
        let scale = 0.05 / (m * m) as f64;
        coeffs.push((m, rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)));
    }
    Body::from_support_fn(
        grid.clone(),
        move |x| {
            let t = x[1].atan2(x[0]);
            let mut h = 1.0;
            for (m, a, b) in &coeffs {
                h += a * (*m as f64 * t).cos() + b * (*m as f64 * t).sin();
            }
            h
        },
        SigmaConvention::Elementary,
    )
    .expect("perturbed ball is strictly convex")
}

#[test]
fn crofton_identity_on_random_bodies() {
    let grid = Arc::new(SphereGrid::circle(256).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let body = random_body(&grid, &mut rng);
        let audit = crofton_audit(&body, 1).unwrap();
        assert!(
            audit.rel_elementary <= 1e-3,
            "cone-volume discrepancy {:.3e}",
            audit.rel_elementary
        );
    }
}

#[test]
fn representation_roundtrips() {
    let grid = Arc::new(SphereGrid::circle(256).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let body = random_body(&grid, &mut rng);
        // support -> radial -> hull support.
        let back = support_from_radial(body.radial()).unwrap();
        for i in 0..grid.len() {
            let err = (back.values()[i] - body.support().values()[i]).abs();
            assert!(err < 1e-6, "roundtrip error {err:.3e}");
        }
        // Polar duality is an involution.
        let dd = polar_dual(&polar_dual(&body).unwrap()).unwrap();
        for i in 0..grid.len() {
            let err = (dd.support().values()[i] - body.support().values()[i]).abs();
            assert!(err < 1e-4, "bipolar error {err:.3e}");
        }
        // max/min of h and rho agree.
        assert!((body.support().max_value() - body.radial().max_value()).abs() < 1e-5);
        assert!((body.support().min_value() - body.radial().min_value()).abs() < 1e-5);
    }
}

#[test]
fn wulff_idempotence_on_random_fields() {
    let grid = Arc::new(SphereGrid::circle(128).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..8 {
        let f: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|x| {
                let t = x[1].atan2(x[0]);
                1.0 + rng.gen_range(-0.35..0.35) * (2.0 * t).cos()
                    + rng.gen_range(-0.2..0.2) * (3.0 * t).sin()
            })
            .collect();
        let w1 = wulff_shape(&grid, &f).unwrap();
        let w2 = wulff_shape(&grid, w1.values()).unwrap();
        for i in 0..grid.len() {
            assert!(w1.values()[i] <= f[i] + 1e-12);
            assert!((w2.values()[i] - w1.values()[i]).abs() <= 1e-10);
        }
    }
}

#[test]
fn homogeneity_fits_on_random_body() {
    let grid = Arc::new(SphereGrid::circle(128).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let body = random_body(&grid, &mut rng);
    let (k, p) = (1usize, -1.0);
    let lambdas = [0.5, 1.0, 2.0];
    let mut logs_q = Vec::new();
    let mut logs_t = Vec::new();
    for lam in lambdas {
        let b = body.scale(lam).unwrap();
        let sol = solve_poisson_polar(&b, 64, None).unwrap();
        logs_q.push(dual_rigidity_q(&b, &sol, k, p).ln());
        logs_t.push(rigidity_tk(&b, &sol, k).unwrap().t.ln());
    }
    let slope = |ys: &[f64]| {
        // Least squares in log lambda.
        let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
        let xm = xs.iter().sum::<f64>() / 3.0;
        let ym = ys.iter().sum::<f64>() / 3.0;
        let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        num / den
    };
    let sq = slope(&logs_q);
    assert!((sq - (p + 2.0)).abs() < 0.01 * (p + 2.0_f64).abs().max(1.0), "Q slope {sq}");
    let st = slope(&logs_t);
    let expect = (2.0 + 2.0) * k as f64;
    assert!((st - expect).abs() < 0.01 * expect, "T slope {st}");
}

#[test]
fn measure_partition_bookkeeping_random() {
    let grid = Arc::new(SphereGrid::circle(128).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let body = random_body(&grid, &mut rng);
    let sol = solve_poisson_polar(&body, 48, None).unwrap();
    let total = dual_rigidity_q(&body, &sol, 1, -1.0);
    for bins in [2usize, 5, 16, 64] {
        let m = dual_measure(&body, &sol, 1, -1.0, &Partition::angle_bins(bins)).unwrap();
        assert!((m.total - total).abs() <= 1e-12 * total.abs());
        let sum: f64 = m.entries.iter().map(|e| e.mass).sum();
        assert!((sum - total).abs() <= 1e-12 * total.abs());
    }
    // The predicate and region forms of the reverse Gauss image agree.
    let by_pred = radial_gauss_reverse_pred(&body, |d| d[1] >= 0.0);
    let count: usize = body.gauss().iter().filter(|g| g.alpha[1] >= 0.0).count();
    assert_eq!(by_pred.len(), count);
}
