use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Nyström discretization of `½ I − K` on the star contour
/// `r(θ) = 1 + a cos(wθ)` with `n` trapezoid nodes, where `K` is the
/// adjoint double-layer Laplace kernel
/// `K(x, y) = n(x)·(x − y) / (2π ‖x − y‖²)`.
///
/// The diagonal uses the smooth limit `κ(x) / (4π)` of the kernel.
pub fn bie_star(n: usize, amplitude: f64, arms: u32) -> Result<DenseMatrix> {
    if n < 3 || !(0.0..1.0).contains(&amplitude.abs()) {
        return Err(Error::InvalidParameter(format!(
            "star contour needs n ≥ 3 and |a| < 1, got n = {n}, a = {amplitude}"
        )));
    }
    let w = f64::from(arms);
    let h = 2.0 * PI / n as f64;
    struct Node {
        x: [f64; 2],
        normal: [f64; 2],
        speed: f64,
        curvature: f64,
    }
    let nodes: Vec<Node> = (0..n)
        .map(|j| {
            let t = h * j as f64;
            let (s, c) = t.sin_cos();
            let r = 1.0 + amplitude * (w * t).cos();
            let dr = -amplitude * w * (w * t).sin();
            let ddr = -amplitude * w * w * (w * t).cos();
            let d1 = [dr * c - r * s, dr * s + r * c];
            let d2 = [ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s];
            let speed = d1[0].hypot(d1[1]);
            Node {
                x: [r * c, r * s],
                normal: [d1[1] / speed, -d1[0] / speed],
                speed,
                curvature: (d1[0] * d2[1] - d1[1] * d2[0]) / speed.powi(3),
            }
        })
        .collect();
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        let (xi, xj) = (&nodes[i], &nodes[j]);
        let weight = h * xj.speed;
        if i == j {
            0.5 - weight * xi.curvature / (4.0 * PI)
        } else {
            let d = [xi.x[0] - xj.x[0], xi.x[1] - xj.x[1]];
            let dot = xi.normal[0] * d[0] + xi.normal[1] * d[1];
            -weight / (2.0 * PI) * dot / (d[0] * d[0] + d[1] * d[1])
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_rows_sum_to_zero() {
        // On the unit circle the kernel is 1/(4π) everywhere, so ½ − Σ_j w_j/(4π) = 0.
        let a = bie_star(64, 0.0, 5).unwrap();
        for i in 0..64 {
            let s: f64 = a.row(i).iter().sum();
            assert!(s.abs() < 1e-12, "row {i}: {s}");
            assert!((a[(i, (i + 7) % 64)] + 2.0 * PI / 64.0 / (4.0 * PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_weights_are_a_left_null_vector() {
        // Gauss's flux identity gives ∫ K(x, y) ds(x) = ½ for y on the curve,
        // so Σ_i w_i A_ij = 0 up to quadrature error.
        let n = 400;
        let a = bie_star(n, 0.3, 5).unwrap();
        let h = 2.0 * PI / n as f64;
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                let t = h * i as f64;
                let r = 1.0 + 0.3 * (5.0 * t).cos();
                let dr = -1.5 * (5.0 * t).sin();
                h * r.hypot(dr)
            })
            .collect();
        for j in (0..n).step_by(37) {
            let s: f64 = (0..n).map(|i| weights[i] * a[(i, j)]).sum();
            assert!(s.abs() < 1e-8, "column {j}: {s}");
        }
    }

    #[test]
    fn rejects_self_intersecting_parameters() {
        assert!(bie_star(100, 1.2, 5).is_err());
        assert!(bie_star(2, 0.1, 5).is_err());
    }
}
