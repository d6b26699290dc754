use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    point_plane_signed_distance, so3_exp, Plane, Pose, TangentVec2, UnitNormal,
};
use crate::smoother::{Symbol, Value, Values};

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

fn rand_state(rng: &mut ChaCha8Rng) -> NavState {
    NavState {
        rotation: so3_exp(&rand_vec3(rng, 0.8)),
        position: rand_vec3(rng, 2.0),
        velocity: rand_vec3(rng, 1.0),
        bias_gyro: rand_vec3(rng, 0.01),
        bias_accel: rand_vec3(rng, 0.05),
    }
}

fn insert_state(values: &mut Values, kf: u64, x: &NavState) {
    values.insert(Symbol::pose(kf), Value::Pose(x.pose()));
    values.insert(Symbol::vel_bias(kf), Value::VelBias(x.vel_bias()));
}

// Central-difference check of a factor's analytic Jacobians.
fn check_factor_jacobian(factor: &Factor, values: &Values, rel_tol: f64, abs_floor: f64) {
    let lin = factor.linearize(values).expect("linearize");
    let h = 1e-6;
    for (ki, key) in factor.keys().iter().enumerate() {
        let dim = key.dim();
        for d in 0..dim {
            let mut delta = vec![0.0; dim];
            delta[d] = h;
            let mut plus = values.clone();
            plus.retract_symbol(key, &delta);
            delta[d] = -h;
            let mut minus = values.clone();
            minus.retract_symbol(key, &delta);
            let rp = factor.residual(&plus).expect("residual+");
            let rm = factor.residual(&minus).expect("residual-");
            let numeric = (rp - rm) / (2.0 * h);
            let analytic = lin.jacobians[ki].column(d);
            for r in 0..numeric.len() {
                let diff = (numeric[r] - analytic[r]).abs();
                let scale = analytic[r].abs().max(numeric[r].abs());
                assert!(
                    diff <= abs_floor + rel_tol * scale,
                    "factor jacobian mismatch key {} dim {} row {}: numeric {} analytic {}",
                    key,
                    d,
                    r,
                    numeric[r],
                    analytic[r]
                );
            }
        }
    }
}

#[test]
fn prior_factor_examples_and_jacobian() {
    let mut rng = rng(11);
    let noise = NoiseModels::default();
    for _ in 0..20 {
        let prior = rand_state(&mut rng);
        let factor = Factor::Prior(PriorFactor::new(0, prior, &noise));
        let mut values = Values::new();
        insert_state(&mut values, 0, &prior);
        // At the prior itself the residual vanishes.
        assert!(factor.residual(&values).unwrap().norm() < 1e-12);

        // Offset states: position block equals the offset; small rotations
        // equal the log map.
        let mut x = prior;
        x.position += Vector3::new(0.1, -0.2, 0.3);
        let w = Vector3::new(1e-4, -2e-4, 3e-4);
        x.rotation = x.rotation.retract(&w);
        let mut values2 = Values::new();
        insert_state(&mut values2, 0, &x);
        let r = prior_residual(&x, &prior);
        assert!((Vector3::new(r[3], r[4], r[5]) - Vector3::new(0.1, -0.2, 0.3)).norm() < 1e-12);
        assert!((Vector3::new(r[0], r[1], r[2]) - w).norm() < 1e-9);

        let mut perturbed = Values::new();
        let mut y = rand_state(&mut rng);
        y.position = prior.position + rand_vec3(&mut rng, 0.2);
        insert_state(&mut perturbed, 0, &y);
        check_factor_jacobian(&factor, &perturbed, 1e-5, 1e-8);
    }
}

#[test]
fn imu_factor_jacobian() {
    let mut rng = rng(23);
    let noise = ImuNoiseParams::default();
    for _ in 0..20 {
        let samples: Vec<_> = (0..20)
            .map(|_| (rand_vec3(&mut rng, 0.4), rand_vec3(&mut rng, 1.5), 0.005))
            .collect();
        let pim = imu_preintegrate(&samples, Vector3::zeros(), Vector3::zeros(), &noise).unwrap();
        let xi = rand_state(&mut rng);
        let xj = {
            let mut x = propagate_navstate(&xi, &pim, &GRAVITY);
            x.position += rand_vec3(&mut rng, 0.05);
            x.velocity += rand_vec3(&mut rng, 0.05);
            x.rotation = x.rotation.retract(&rand_vec3(&mut rng, 0.05));
            x.bias_gyro += rand_vec3(&mut rng, 0.001);
            x
        };
        let factor = Factor::Imu(ImuFactor::new(0, 1, pim, GRAVITY, &noise));
        let mut values = Values::new();
        insert_state(&mut values, 0, &xi);
        insert_state(&mut values, 1, &xj);
        check_factor_jacobian(&factor, &values, 1e-5, 1e-6);
    }
}

#[test]
fn projection_factor_examples_and_jacobian() {
    let cam = CameraModel::default_stereo();
    let mut rng = rng(37);

    // Synthesized measurement gives zero residual.
    let state = rand_state(&mut rng);
    let p_cam = Vector3::new(0.2, 0.1, 2.0);
    let landmark = state.pose().transform_point(&p_cam);
    let u = cam.fx * p_cam.x / p_cam.z + cam.cx;
    let v = cam.fy * p_cam.y / p_cam.z + cam.cy;
    let u_r = cam.fx * (p_cam.x - cam.baseline) / p_cam.z + cam.cx;
    let meas = PixelMeasurement::Stereo {
        u_left: u,
        u_right: u_r,
        v,
    };
    let r = projection_residual(&state, &landmark, &meas, &cam).unwrap();
    assert!(r.norm() < 1e-9);

    // Shifting the landmark 0.1 m deeper moves the pixel by the closed-form
    // pinhole difference.
    let landmark2 = state.pose().transform_point(&Vector3::new(0.2, 0.1, 2.1));
    let r = projection_residual(&state, &landmark2, &meas, &cam).unwrap();
    assert!((r[0] - (cam.fx * 0.2 / 2.1 + cam.cx - u)).abs() < 1e-9);
    assert!((r[2] - (cam.fy * 0.1 / 2.1 + cam.cy - v)).abs() < 1e-9);

    // Landmark behind the camera is a cheirality error.
    let behind = state.pose().transform_point(&Vector3::new(0.0, 0.0, -1.0));
    assert!(matches!(
        projection_residual(&state, &behind, &meas, &cam),
        Err(FactorError::Cheirality(_))
    ));

    // Jacobians, mono and stereo.
    for _ in 0..20 {
        let state = rand_state(&mut rng);
        let p_cam = Vector3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.4..0.4),
            rng.random_range(1.0..4.0),
        );
        let landmark = state.pose().transform_point(&p_cam);
        let mut noisy_px = |x: f64| x + rng.random_range(-2.0..2.0);
        let u = noisy_px(cam.fx * p_cam.x / p_cam.z + cam.cx);
        let v = noisy_px(cam.fy * p_cam.y / p_cam.z + cam.cy);
        let u_r = noisy_px(cam.fx * (p_cam.x - cam.baseline) / p_cam.z + cam.cx);

        let mut values = Values::new();
        insert_state(&mut values, 0, &state);
        values.insert(Symbol::landmark(7), Value::Landmark(landmark));

        let mono = Factor::Projection(ProjectionFactor::new(
            0,
            7,
            PixelMeasurement::Mono(Vector2::new(u, v)),
            cam,
            1.0,
        ));
        check_factor_jacobian(&mono, &values, 1e-5, 1e-7);

        let stereo = Factor::Projection(ProjectionFactor::new(
            0,
            7,
            PixelMeasurement::Stereo {
                u_left: u,
                u_right: u_r,
                v,
            },
            cam,
            1.5,
        ));
        check_factor_jacobian(&stereo, &values, 1e-5, 1e-7);
    }
}

// Noiseless multi-view setup: k poses on an arc observing one landmark.
fn consistent_structureless(
    rng: &mut ChaCha8Rng,
    k: usize,
    stereo: bool,
    cam: &CameraModel,
) -> (Values, Vec<(u64, PixelMeasurement)>) {
    let landmark = Vector3::new(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(2.5..4.0),
    );
    let mut values = Values::new();
    let mut obs = Vec::new();
    for i in 0..k {
        let angle = -0.15 + 0.3 * i as f64 / (k.max(2) - 1) as f64;
        let pose = Pose::new(
            so3_exp(&Vector3::new(0.0, angle, 0.0)),
            Vector3::new(rng.random_range(-0.6..0.6) + i as f64 * 0.3, 0.0, 0.0),
        );
        let state = NavState {
            rotation: pose.rotation,
            position: pose.translation,
            velocity: Vector3::zeros(),
            bias_gyro: Vector3::zeros(),
            bias_accel: Vector3::zeros(),
        };
        insert_state(&mut values, i as u64, &state);
        let p_cam = cam.world_to_camera(&pose).transform_point(&landmark);
        assert!(p_cam.z > 0.5);
        let u = cam.fx * p_cam.x / p_cam.z + cam.cx;
        let v = cam.fy * p_cam.y / p_cam.z + cam.cy;
        let px = if stereo {
            PixelMeasurement::Stereo {
                u_left: u,
                u_right: cam.fx * (p_cam.x - cam.baseline) / p_cam.z + cam.cx,
                v,
            }
        } else {
            PixelMeasurement::Mono(Vector2::new(u, v))
        };
        obs.push((i as u64, px));
    }
    (values, obs)
}

#[test]
fn structureless_dimension_law_and_consistency() {
    let cam = CameraModel::default_stereo();
    let mut r = rng(53);
    for k in 2..=5 {
        let (values, obs) = consistent_structureless(&mut r, k, false, &cam);
        let f = StructurelessFactor::new(obs, cam, 1.0);
        let res = f.projected_residual(&values).unwrap();
        assert_eq!(res.len(), 2 * k - 3);
        assert!(res.norm() < 1e-8, "noiseless residual {}", res.norm());
    }
    for k in 1..=4 {
        let (values, obs) = consistent_structureless(&mut r, k.max(1), true, &cam);
        let f = StructurelessFactor::new(obs, cam, 1.0);
        let res = f.projected_residual(&values).unwrap();
        assert_eq!(res.len(), 3 * k - 3);
        assert!(res.norm() < 1e-8);
    }
}

#[test]
fn structureless_insufficient_observations() {
    let cam = CameraModel::default_stereo();
    let state = NavState::identity();
    let meas = PixelMeasurement::Mono(Vector2::new(300.0, 200.0));
    let err = structureless_residual(&[state], &[meas], &cam);
    assert!(matches!(
        err,
        Err(FactorError::InsufficientObservations { .. })
    ));
}

#[test]
fn structureless_first_order_landmark_invariance() {
    // Perturbing the triangulated point by delta changes the null-space
    // projected residual only to second order. Oracle: stack the raw
    // reprojection residuals at (point + delta) against the original
    // measurements, project with the null-space basis built at the
    // unperturbed point by an independent Gram-Schmidt, and sweep delta.
    let cam = CameraModel::default_stereo();
    let mut r = rng(71);
    let (values, obs) = consistent_structureless(&mut r, 4, true, &cam);
    let f = StructurelessFactor::new(obs.clone(), cam, 1.0);
    let lin = f.linearize_full(&values).unwrap();
    let point = lin.point;

    // Null-space basis of the stacked landmark Jacobian (local oracle).
    let rows: usize = lin.blocks.iter().map(|(ri, _, _)| ri.len()).sum();
    let mut j_rho = DMatrix::zeros(rows, 3);
    let mut at = 0;
    for (ri, _, jr) in &lin.blocks {
        j_rho.view_mut((at, 0), (ri.len(), 3)).copy_from(jr);
        at += ri.len();
    }
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in 0..3 {
        let mut v: DVector<f64> = j_rho.column(c).into_owned();
        for q in &basis {
            let d = q.dot(&v);
            v -= q * d;
        }
        basis.push(v.normalize());
    }
    let mut nullspace: Vec<DVector<f64>> = Vec::new();
    for k in 0..rows {
        if nullspace.len() == rows - 3 {
            break;
        }
        let mut v = DVector::zeros(rows);
        v[k] = 1.0;
        for q in basis.iter().chain(nullspace.iter()) {
            let d = q.dot(&v);
            v -= q * d;
        }
        if v.norm() > 1e-8 {
            nullspace.push(v.normalize());
        }
    }

    let projected_norm_at = |delta: Vector3<f64>| -> f64 {
        let mut stacked = DVector::zeros(rows);
        let mut at = 0;
        for ((kf, px), _) in obs.iter().zip(&lin.blocks) {
            let pose = values.pose(&Symbol::pose(*kf)).unwrap();
            let eval =
                super::projection::evaluate_projection(pose, &(point + delta), px, &cam).unwrap();
            stacked.rows_mut(at, eval.residual.len()).copy_from(&eval.residual);
            at += eval.residual.len();
        }
        let mut n2 = 0.0;
        for q in &nullspace {
            let p = q.dot(&stacked);
            n2 += p * p;
        }
        n2.sqrt()
    };

    let norms: Vec<f64> = [1e-3, 2e-3, 4e-3]
        .iter()
        .map(|s| projected_norm_at(Vector3::new(*s, -*s, 0.5 * s)))
        .collect();
    // Quadratic scaling: doubling delta multiplies the norm by ~4.
    assert!(norms[1] / norms[0].max(1e-300) > 3.0, "{:?}", norms);
    assert!(norms[2] / norms[1].max(1e-300) > 3.0, "{:?}", norms);
    // And the raw (unprojected) residual grows linearly, confirming the
    // projection is what removes the first-order term.
    let raw = |delta: Vector3<f64>| -> f64 {
        let mut n2 = 0.0;
        for (kf, px) in &obs {
            let pose = values.pose(&Symbol::pose(*kf)).unwrap();
            let eval =
                super::projection::evaluate_projection(pose, &(point + delta), px, &cam).unwrap();
            n2 += eval.residual.norm_squared();
        }
        n2.sqrt()
    };
    let raw_norms: Vec<f64> = [1e-3, 2e-3]
        .iter()
        .map(|s| raw(Vector3::new(*s, -*s, 0.5 * s)))
        .collect();
    let ratio = raw_norms[1] / raw_norms[0];
    assert!(ratio > 1.8 && ratio < 2.2, "raw scaling {:?}", raw_norms);
}

#[test]
fn structureless_jacobian_noiseless() {
    let cam = CameraModel::default_stereo();
    let mut r = rng(97);
    for _ in 0..10 {
        let (values, obs) = consistent_structureless(&mut r, 3, true, &cam);
        let f = Factor::Structureless(StructurelessFactor::new(obs, cam, 1.0));
        check_factor_jacobian(&f, &values, 1e-5, 1e-6);
    }
    for _ in 0..10 {
        let (values, obs) = consistent_structureless(&mut r, 4, false, &cam);
        let f = Factor::Structureless(StructurelessFactor::new(obs, cam, 1.0));
        check_factor_jacobian(&f, &values, 1e-5, 1e-6);
    }
}

#[test]
fn structureless_schur_matches_projected_normal_equations() {
    // The landmark-eliminated accumulation used by the solver must equal the
    // null-space-projected factor's J^T J and -J^T r.
    let cam = CameraModel::default_stereo();
    let mut r = rng(113);
    let (mut values, obs) = consistent_structureless(&mut r, 4, true, &cam);
    // Perturb poses so the residual is nonzero.
    for i in 0..4u64 {
        let mut v = values.clone();
        let _ = v;
        values.retract_symbol(
            &Symbol::pose(i),
            &[
                r.random_range(-5e-3..5e-3),
                r.random_range(-5e-3..5e-3),
                r.random_range(-5e-3..5e-3),
                r.random_range(-5e-3..5e-3),
                r.random_range(-5e-3..5e-3),
                r.random_range(-5e-3..5e-3),
            ],
        );
    }
    let f = StructurelessFactor::new(obs, cam, 1.0);
    let lin = f.linearize_projected(&values).unwrap();

    // Reference normal equations from the projected form.
    let k = f.keys().len();
    let mut h_ref = DMatrix::zeros(6 * k, 6 * k);
    let mut g_ref = DVector::zeros(6 * k);
    for a in 0..k {
        let ja = &lin.jacobians[a];
        g_ref.rows_mut(6 * a, 6).copy_from(&(-ja.transpose() * &lin.residual));
        for b in 0..k {
            let jb = &lin.jacobians[b];
            h_ref
                .view_mut((6 * a, 6 * b), (6, 6))
                .copy_from(&(ja.transpose() * jb));
        }
    }

    // Schur accumulation from the full blocks.
    let full = f.linearize_full(&values).unwrap();
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    let mut c = Vector3::zeros();
    for (ri, _, jr) in &full.blocks {
        m += jr.transpose() * jr;
        c += jr.transpose() * ri;
    }
    let m_inv = m.try_inverse().unwrap();
    let mut h = DMatrix::zeros(6 * k, 6 * k);
    let mut g = DVector::zeros(6 * k);
    for (a, (ra, ja, jra)) in full.blocks.iter().enumerate() {
        h.view_mut((6 * a, 6 * a), (6, 6))
            .copy_from(&(ja.transpose() * ja));
        g.rows_mut(6 * a, 6).copy_from(&(-(ja.transpose() * ra)));
        for (b, (_, jb, jrb)) in full.blocks.iter().enumerate() {
            let ca = ja.transpose() * jra;
            let cb = jb.transpose() * jrb;
            let corr = ca * m_inv * cb.transpose();
            let mut view = h.view_mut((6 * a, 6 * b), (6, 6));
            view -= &corr;
        }
        let ca = ja.transpose() * jra;
        let gcorr = ca * (m_inv * c);
        let mut gv = g.rows_mut(6 * a, 6);
        gv += &gcorr;
    }

    assert!((h.clone() - h_ref.clone()).norm() < 1e-9 * (1.0 + h_ref.norm()));
    assert!((g.clone() - g_ref.clone()).norm() < 1e-9 * (1.0 + g_ref.norm()));

    // Cost identity: |N^T r|^2 == |r|^2 - c^T M^-1 c.
    let cost_fast = f.cost(&values).unwrap();
    let cost_proj = lin.residual.norm_squared();
    assert!((cost_fast - cost_proj).abs() < 1e-10 * (1.0 + cost_proj));
}

#[test]
fn regularity_residual_matches_signed_distance_and_jacobian() {
    let mut r = rng(131);
    for _ in 0..30 {
        let n = UnitNormal::new(rand_vec3(&mut r, 1.0) + Vector3::new(0.0, 0.0, 1.5)).unwrap();
        let plane = Plane::new(n, r.random_range(-2.0..2.0));
        let rho = rand_vec3(&mut r, 3.0);

        // v = 0, d = linearization distance: exactly the signed distance.
        let at_zero = regularity_residual(&plane, &TangentVec2::zeros(), plane.distance(), &rho);
        assert_eq!(at_zero, point_plane_signed_distance(&plane, &rho));

        // Jacobian against central differences at random v.
        let v = TangentVec2::new(r.random_range(-0.5..0.5), r.random_range(-0.5..0.5));
        let d = r.random_range(-2.0..2.0);
        let jac = regularity_residual_jacobian(&plane, &v, &rho);
        let h = 1e-6;
        let num_v1 = (regularity_residual(&plane, &(v + TangentVec2::new(h, 0.0)), d, &rho)
            - regularity_residual(&plane, &(v - TangentVec2::new(h, 0.0)), d, &rho))
            / (2.0 * h);
        let num_v2 = (regularity_residual(&plane, &(v + TangentVec2::new(0.0, h)), d, &rho)
            - regularity_residual(&plane, &(v - TangentVec2::new(0.0, h)), d, &rho))
            / (2.0 * h);
        assert!((num_v1 - jac[0]).abs() < 1e-6 + 1e-5 * jac[0].abs());
        assert!((num_v2 - jac[1]).abs() < 1e-6 + 1e-5 * jac[1].abs());
        assert!((jac[2] + 1.0).abs() < 1e-12);
        for k in 0..3 {
            let mut dr = Vector3::zeros();
            dr[k] = h;
            let num = (regularity_residual(&plane, &v, d, &(rho + dr))
                - regularity_residual(&plane, &v, d, &(rho - dr)))
                / (2.0 * h);
            assert!((num - jac[3 + k]).abs() < 1e-6 + 1e-5 * jac[3 + k].abs());
        }
    }
}

#[test]
fn regularity_factor_jacobian() {
    let mut r = rng(151);
    for _ in 0..20 {
        let n = UnitNormal::new(rand_vec3(&mut r, 1.0) + Vector3::new(0.2, 0.1, 1.4)).unwrap();
        let plane = Plane::new(n, r.random_range(-2.0..2.0));
        let rho = rand_vec3(&mut r, 2.0);
        let mut values = Values::new();
        values.insert(Symbol::landmark(3), Value::Landmark(rho));
        values.insert(Symbol::plane(0), Value::Plane(plane));
        let f = Factor::Regularity(RegularityFactor::new(3, 0, 0.05));
        check_factor_jacobian(&f, &values, 1e-5, 1e-7);
    }
}

#[test]
fn linear_gaussian_factor_jacobian_with_manifold_charts() {
    let mut r = rng(173);
    for _ in 0..10 {
        let pose = Pose::new(so3_exp(&rand_vec3(&mut r, 0.6)), rand_vec3(&mut r, 1.0));
        let plane = Plane::new(
            UnitNormal::new(rand_vec3(&mut r, 1.0) + Vector3::new(0.0, 0.0, 1.5)).unwrap(),
            r.random_range(-1.0..1.0),
        );
        let landmark = rand_vec3(&mut r, 2.0);
        let keys = vec![Symbol::pose(0), Symbol::landmark(1), Symbol::plane(0)];
        let lin_values = vec![
            Value::Pose(pose),
            Value::Landmark(landmark),
            Value::Plane(plane),
        ];
        let dim: usize = keys.iter().map(|k| k.dim()).sum();
        let rows = 8;
        let a = DMatrix::from_fn(rows, dim, |_, _| r.random_range(-1.0..1.0));
        let b = DVector::from_fn(rows, |_, _| r.random_range(-1.0..1.0));
        let f = Factor::LinearGaussian(LinearGaussianFactor::new(
            keys.clone(),
            lin_values,
            a,
            b,
        ));

        // Evaluate away from the linearization point.
        let mut values = Values::new();
        values.insert(
            Symbol::pose(0),
            Value::Pose(Pose::new(
                pose.rotation.retract(&rand_vec3(&mut r, 0.2)),
                pose.translation + rand_vec3(&mut r, 0.2),
            )),
        );
        values.insert(
            Symbol::landmark(1),
            Value::Landmark(landmark + rand_vec3(&mut r, 0.3)),
        );
        values.insert(
            Symbol::plane(0),
            Value::Plane(plane.retract(
                &TangentVec2::new(r.random_range(-0.2..0.2), r.random_range(-0.2..0.2)),
                r.random_range(-0.2..0.2),
            )),
        );
        check_factor_jacobian(&f, &values, 1e-5, 1e-7);
    }
}

#[test]
fn linear_gaussian_from_information_reproduces_quadratic() {
    let mut r = rng(191);
    let keys = vec![Symbol::landmark(0), Symbol::landmark(1)];
    let lin = vec![
        Value::Landmark(Vector3::zeros()),
        Value::Landmark(Vector3::zeros()),
    ];
    // Random PSD information with a known null direction is reproduced on
    // its range space.
    let a = DMatrix::from_fn(4, 6, |_, _| r.random_range(-1.0..1.0));
    let lambda = a.transpose() * &a;
    let eta = a.transpose() * DVector::from_fn(4, |_, _| r.random_range(-1.0..1.0));
    let f = LinearGaussianFactor::from_information(keys, lin, &lambda, &eta);
    assert_eq!(f.dim(), 4);

    let mut values = Values::new();
    let x0 = rand_vec3(&mut r, 1.0);
    let x1 = rand_vec3(&mut r, 1.0);
    values.insert(Symbol::landmark(0), Value::Landmark(x0));
    values.insert(Symbol::landmark(1), Value::Landmark(x1));
    let delta = DVector::from_vec(vec![x0.x, x0.y, x0.z, x1.x, x1.y, x1.z]);
    let expect = (delta.transpose() * &lambda * &delta)[(0, 0)] - 2.0 * eta.dot(&delta);
    let res = Factor::LinearGaussian(f.clone()).residual(&values).unwrap();
    let got = res.norm_squared();
    // Equal up to the constant |b|^2 term that the quadratic form drops.
    let at_zero = {
        let mut v = Values::new();
        v.insert(Symbol::landmark(0), Value::Landmark(Vector3::zeros()));
        v.insert(Symbol::landmark(1), Value::Landmark(Vector3::zeros()));
        Factor::LinearGaussian(f).residual(&v).unwrap().norm_squared()
    };
    assert!(((got - at_zero) - expect).abs() < 1e-9 * (1.0 + expect.abs()));
}
