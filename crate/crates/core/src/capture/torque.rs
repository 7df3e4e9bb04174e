use super::{CaptureError, Trajectory};

/// Finite-difference weights for the `order`-th derivative at `x0` over the
/// (possibly nonuniform) nodes `xs` (Fornberg's recursion).
pub fn finite_difference_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > order, "need more nodes than derivative order");
    let m = order;
    // c[j][k]: weight of node j for derivative k.
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// τ_j(t) = I_j · q̈_j(t), with q̈ from second differences on the physical
/// timeline (`raw_duration` seconds spread over the trajectory's span).
///
/// Interior waypoints use the three-point formula; endpoints use four-point
/// one-sided stencils when available. Two waypoints carry no curvature
/// information, so torque is zero.
pub fn estimate_torques(
    trajectory: &Trajectory,
    inertias: &[f64],
    raw_duration: f64,
) -> Result<Vec<Vec<f64>>, CaptureError> {
    let dof = trajectory.dof();
    if inertias.len() != dof {
        return Err(CaptureError::DimensionMismatch(format!(
            "{} inertias for {dof} joints",
            inertias.len()
        )));
    }
    if !(raw_duration > 0.0) || !raw_duration.is_finite() {
        return Err(CaptureError::InvalidRecord(format!("raw_duration must be > 0, got {raw_duration}")));
    }
    let n = trajectory.len();
    if n == 2 {
        return Ok(vec![vec![0.0; dof]; 2]);
    }
    let t0 = trajectory.first().t;
    let scale = raw_duration / trajectory.duration();
    let ts: Vec<f64> = trajectory.times().iter().map(|t| (t - t0) * scale).collect();
    let wps = trajectory.waypoints();

    let stencil = |i: usize| -> (usize, usize) {
        if n == 3 {
            (0, 3)
        } else if i == 0 {
            (0, 4)
        } else if i == n - 1 {
            (n - 4, n)
        } else {
            (i - 1, i + 2)
        }
    };

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = stencil(i);
        let w = finite_difference_weights(ts[i], &ts[lo..hi], 2);
        let row = (0..dof)
            .map(|j| {
                let acc: f64 = w.iter().zip(&wps[lo..hi]).map(|(wk, p)| wk * p.q[j]).sum();
                inertias[j] * acc
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::Waypoint;

    #[test]
    fn uniform_central_weights() {
        let w = finite_difference_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] + 2.0).abs() < 1e-12 && (w[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_sided_four_point_weights() {
        // Second-order accurate forward stencil: [2, -5, 4, -1] / h².
        let w = finite_difference_weights(0.0, &[0.0, 1.0, 2.0, 3.0], 2);
        for (a, b) in w.iter().zip([2.0, -5.0, 4.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_is_exact_on_nonuniform_grid() {
        let times = [0.0, 0.1, 0.35, 0.4, 0.8, 1.0];
        let traj = Trajectory::new(
            times.iter().map(|&t| Waypoint { q: vec![1.5 * t * t - t, 0.2], t }).collect(),
        )
        .unwrap();
        let tau = estimate_torques(&traj, &[2.0, 1.0], 1.0).unwrap();
        for row in tau {
            assert!((row[0] - 6.0).abs() < 1e-9, "{row:?}");
            assert!(row[1].abs() < 1e-9);
        }
    }

    #[test]
    fn raw_duration_rescales() {
        // q = t² on normalized time; over 2 s physical, q = (s/2)² so q̈ = 0.5.
        let traj = Trajectory::uniform((0..5).map(|k| vec![(k as f64 / 4.0).powi(2)]).collect()).unwrap();
        let tau = estimate_torques(&traj, &[1.0], 2.0).unwrap();
        assert!(tau.iter().all(|r| (r[0] - 0.5).abs() < 1e-9));
    }

    #[test]
    fn two_waypoints_zero_and_three_use_single_stencil() {
        let two = Trajectory::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(estimate_torques(&two, &[1.0], 1.0).unwrap(), vec![vec![0.0], vec![0.0]]);
        let three = Trajectory::uniform(vec![vec![0.0], vec![0.0], vec![1.0]]).unwrap();
        let tau = estimate_torques(&three, &[1.0], 1.0).unwrap();
        assert!(tau.iter().all(|r| (r[0] - 4.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = Trajectory::uniform(vec![vec![0.0], vec![1.0], vec![0.0]]).unwrap();
        assert!(estimate_torques(&t, &[1.0, 2.0], 1.0).is_err());
        assert!(estimate_torques(&t, &[1.0], 0.0).is_err());
    }
}
