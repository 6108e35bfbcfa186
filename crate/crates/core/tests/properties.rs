use std::f64::consts::TAU;

use isac_hbf::linalg::{c, fro2, hermitian_eigen, CMat};
use isac_hbf::model::steering_vector;
use isac_hbf::oblique_rcg::{retract, row_norm_defect, tangency_defect, tangent_project, ObliquePoint, TangentVector};
use isac_hbf::sca_analog::{matrix_to_phases, phases_to_matrix, AnalogPhases};
use isac_hbf::sdr_waveform::project_psd;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), rows * cols)
        .prop_map(move |v| CMat::from_iterator(rows, cols, v.into_iter().map(|(re, im)| c(re, im))))
        .prop_filter("rows must be nonzero", |m| m.row_iter().all(|r| r.norm() > 1e-3))
}

fn shaped() -> impl Strategy<Value = (CMat, CMat)> {
    (1usize..6, 1usize..5).prop_flat_map(|(n, m)| (matrix(n, m), matrix(n, m)))
}

proptest! {
    #[test]
    fn steering_vector_has_norm_sqrt_n(theta in -1.5..1.5f64, n in 1usize..40, delta in 0.1..1.0f64) {
        let a = steering_vector(theta, n, delta).unwrap();
        prop_assert!((a.norm_squared() - n as f64).abs() <= 1e-10 * n as f64);
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn retraction_stays_on_the_manifold((f, g) in shaped(), norm in 0.1..4.0f64, step in -5.0..5.0f64) {
        let x = ObliquePoint::project(&f, norm).unwrap();
        let z = tangent_project(&x, &g);
        let y = retract(&x, &TangentVector { z: &z.z * c(step, 0.0) }).unwrap();
        prop_assert!(row_norm_defect(&y.f, norm) <= 1e-12 * norm.max(1.0));
    }

    #[test]
    fn tangent_projection_is_an_orthogonal_projector((f, g) in shaped()) {
        let x = ObliquePoint::project(&f, 1.0).unwrap();
        let z = tangent_project(&x, &g);
        let scale = fro2(&g).sqrt().max(1.0);
        prop_assert!(tangency_defect(&x.f, &z.z) <= 1e-12 * scale);
        let again = tangent_project(&x, &z.z);
        prop_assert!(fro2(&(&again.z - &z.z)).sqrt() <= 1e-12 * scale);
        let residual = &g - &z.z;
        let cross: f64 = z.z.iter().zip(residual.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
        prop_assert!(cross.abs() <= 1e-10 * scale * scale);
    }

    #[test]
    fn phases_are_two_pi_periodic(theta in prop::collection::vec(-20.0..20.0f64, 6), shift in -3i32..3) {
        let a = phases_to_matrix(&AnalogPhases::new(theta.clone()), 3, 2).unwrap().u_rf;
        let moved: Vec<f64> = theta.iter().map(|t| t + TAU * shift as f64).collect();
        let b = phases_to_matrix(&AnalogPhases::new(moved), 3, 2).unwrap().u_rf;
        prop_assert!(fro2(&(&a - &b)).sqrt() <= 1e-12);
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-15));
        let back = phases_to_matrix(&matrix_to_phases(&a), 3, 2).unwrap().u_rf;
        prop_assert!(fro2(&(&a - &back)).sqrt() <= 1e-12);
    }

    #[test]
    fn psd_projection_is_psd_and_idempotent(m in (1usize..6).prop_flat_map(|n| matrix(n, n))) {
        let h = (&m + m.adjoint()) * c(0.5, 0.0);
        let p = project_psd(&h);
        let (values, _) = hermitian_eigen(&p);
        prop_assert!(values.iter().all(|&v| v >= -1e-10));
        prop_assert!(fro2(&(&project_psd(&p) - &p)).sqrt() <= 1e-10);
        prop_assert!(fro2(&(&p - &h)) <= fro2(&h) + 1e-9);
    }
}
