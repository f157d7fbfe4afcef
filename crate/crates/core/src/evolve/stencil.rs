//! Fourth-order centred finite differences.

use super::Grid2D;

/// `(-u₊₂ + 8u₊₁ - 8u₋₁ + u₋₂) / 12`, to be divided by `h`.
#[inline(always)]
pub fn d1(um2: f64, um1: f64, up1: f64, up2: f64) -> f64 {
    (um2 - up2 + 8.0 * (up1 - um1)) * (1.0 / 12.0)
}

/// `(-u₋₂ + 16u₋₁ - 30u₀ + 16u₊₁ - u₊₂) / 12`, to be divided by `h²`.
#[inline(always)]
pub fn d2(um2: f64, um1: f64, u0: f64, up1: f64, up2: f64) -> f64 {
    (16.0 * (um1 + up1) - (um2 + up2) - 30.0 * u0) * (1.0 / 12.0)
}

/// Laplacian of a scalar row-major array; the two-node boundary ring is left at zero.
pub fn laplacian(field: &[f64], grid: &Grid2D) -> Vec<f64> {
    let n = grid.nodes();
    assert_eq!(field.len(), n * n, "field does not match grid");
    let inv = 1.0 / (grid.h * grid.h);
    let mut out = vec![0.0; n * n];
    for j in 2..n - 2 {
        for i in 2..n - 2 {
            let k = j * n + i;
            let f = |o: isize| field[(k as isize + o) as usize];
            let row = n as isize;
            out[k] = (d2(f(-2), f(-1), f(0), f(1), f(2))
                + d2(f(-2 * row), f(-row), f(0), f(row), f(2 * row)))
                * inv;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(g: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = g.nodes();
        let mut v = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let [x, y] = g.coords(i, j);
                v[j * n + i] = f(x, y);
            }
        }
        v
    }

    #[test]
    fn constant_field_has_zero_laplacian() {
        let g = Grid2D::new(2.0, 0.25, 16).unwrap();
        let lap = laplacian(&vec![3.5; 17 * 17], &g);
        assert!(lap.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quadratic_is_exact() {
        let g = Grid2D::new(2.0, 0.25, 16).unwrap();
        let lap = laplacian(&sample(&g, |x, y| x * x + y * y), &g);
        for j in 2..15 {
            for i in 2..15 {
                assert!((lap[j * 17 + i] - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quintic_is_exact() {
        let g = Grid2D::new(2.0, 0.25, 16).unwrap();
        let lap = laplacian(&sample(&g, |x, y| x.powi(5) + x * x * y * y * y), &g);
        for j in 2..15 {
            for i in 2..15 {
                let [x, y] = g.coords(i, j);
                let want = 20.0 * x.powi(3) + 2.0 * y.powi(3) + 6.0 * x * x * y;
                assert!((lap[j * 17 + i] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fourth_order_on_sine_product() {
        let k = std::f64::consts::FRAC_PI_4;
        let err = |h: f64| {
            let g = Grid2D::covering(h, 4.0).unwrap();
            let lap = laplacian(&sample(&g, |x, y| (k * x).sin() * (k * y).sin()), &g);
            let n = g.nodes();
            let mut e: f64 = 0.0;
            for j in 2..n - 2 {
                for i in 2..n - 2 {
                    let [x, y] = g.coords(i, j);
                    let want = -2.0 * k * k * (k * x).sin() * (k * y).sin();
                    e = e.max((lap[j * n + i] - want).abs());
                }
            }
            e
        };
        let order = (err(0.2) / err(0.1)).log2();
        assert!(order >= 3.9, "order {order}");
    }

    #[test]
    fn first_derivative_stencil_exact_on_quartic() {
        let h = 0.3;
        let f = |x: f64| x.powi(4) - 2.0 * x * x * x;
        let x = 0.7;
        let got = d1(f(x - 2.0 * h), f(x - h), f(x + h), f(x + 2.0 * h)) / h;
        let want = 4.0 * x.powi(3) - 6.0 * x * x;
        assert!((got - want).abs() < 1e-12);
    }
}
