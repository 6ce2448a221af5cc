//! Gauss-Legendre quadrature nodes, computed once by Newton iteration on the
//! Legendre polynomials. Used for the jump-mark integrals, whose integrands
//! are smooth on the bounded mark interval.

use std::sync::OnceLock;

/// Nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-based initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                // Evaluate P_n(x) and P_n'(x) by recurrence.
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let w = 2.0 / ((1.0 - x * x) * dp * dp);
                    nodes[i] = -x;
                    nodes[n - 1 - i] = x;
                    weights[i] = w;
                    weights[n - 1 - i] = w;
                    break;
                }
            }
        }
        Self { nodes, weights }
    }

    /// Integrate f over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// The shared 64-node rule used for all mark integrals.
pub fn gl64() -> &'static GaussLegendre {
    static CELL: OnceLock<GaussLegendre> = OnceLock::new();
    CELL.get_or_init(|| GaussLegendre::new(64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let gl = GaussLegendre::new(8);
        let val = gl.integrate(-1.0, 1.0, |z| z * z);
        assert!((val - 2.0 / 3.0).abs() < 1e-14);
        let val = gl.integrate(0.0, 2.0, |z| 3.0 * z.powi(5) - z + 1.0);
        assert!((val - (32.0 - 2.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn smooth_function() {
        let val = gl64().integrate(-1.0, 1.0, |z| (1.0 + 0.3 * z).ln());
        // Antiderivative of ln(1+γz) is (1+γz)(ln(1+γz)−1)/γ.
        let g = 0.3;
        let anti = |z: f64| (1.0 + g * z) * ((1.0 + g * z).ln() - 1.0) / g;
        assert!((val - (anti(1.0) - anti(-1.0))).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_interval() {
        let gl = gl64();
        let total: f64 = gl.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
