//! Lyapunov-function handles for generator evaluation.
//!
//! Both the classical and the quantum generators only ever need three things
//! from a candidate function: its value, a directional first derivative, and
//! the quadratic form of its second derivative along one direction. The
//! traits below expose exactly that; finite-difference defaults make
//! value-only functions usable, while the concrete functions used by the
//! certificates override them with exact expressions.

use crate::matrix::ComplexMatrix;

const FD_STEP: f64 = 1e-5;

fn fd_scale(norm: f64, dir_norm: f64) -> f64 {
    FD_STEP * (1.0 + norm) / dir_norm.max(1e-12)
}

/// Scalar function of a quantum state ρ.
pub trait StateFunctional: Send + Sync {
    fn value(&self, rho: &ComplexMatrix) -> f64;

    /// Directional derivative Tr(∇V · dir) at ρ.
    fn dderiv(&self, rho: &ComplexMatrix, dir: &ComplexMatrix) -> f64 {
        let h = fd_scale(rho.frobenius_norm(), dir.frobenius_norm());
        let up = rho + &dir.scale_re(h);
        let dn = rho - &dir.scale_re(h);
        (self.value(&up) - self.value(&dn)) / (2.0 * h)
    }

    /// Second-derivative quadratic form ⟨dir, ∇²V dir⟩ at ρ.
    fn d2quad(&self, rho: &ComplexMatrix, dir: &ComplexMatrix) -> f64 {
        let h = fd_scale(rho.frobenius_norm(), dir.frobenius_norm());
        let up = rho + &dir.scale_re(h);
        let dn = rho - &dir.scale_re(h);
        (self.value(&up) - 2.0 * self.value(rho) + self.value(&dn)) / (h * h)
    }
}

/// V(ρ) = Tr(Kρ) for Hermitian K.
pub struct LinearFunctional {
    pub k: ComplexMatrix,
}

impl StateFunctional for LinearFunctional {
    fn value(&self, rho: &ComplexMatrix) -> f64 {
        (&self.k * rho).trace_re()
    }

    fn dderiv(&self, _rho: &ComplexMatrix, dir: &ComplexMatrix) -> f64 {
        (&self.k * dir).trace_re()
    }

    fn d2quad(&self, _rho: &ComplexMatrix, _dir: &ComplexMatrix) -> f64 {
        0.0
    }
}

/// V(ρ) = Tr(Xρ)^δ for a PSD extension operator X and δ ∈ (0,1).
pub struct PowerTraceFunctional {
    pub x: ComplexMatrix,
    pub delta: f64,
}

impl PowerTraceFunctional {
    fn w(&self, rho: &ComplexMatrix) -> f64 {
        (&self.x * rho).trace_re()
    }
}

impl StateFunctional for PowerTraceFunctional {
    fn value(&self, rho: &ComplexMatrix) -> f64 {
        self.w(rho).max(0.0).powf(self.delta)
    }

    fn dderiv(&self, rho: &ComplexMatrix, dir: &ComplexMatrix) -> f64 {
        let w = self.w(rho);
        self.delta * w.powf(self.delta - 1.0) * (&self.x * dir).trace_re()
    }

    fn d2quad(&self, rho: &ComplexMatrix, dir: &ComplexMatrix) -> f64 {
        let w = self.w(rho);
        let dw = (&self.x * dir).trace_re();
        self.delta * (self.delta - 1.0) * w.powf(self.delta - 2.0) * dw * dw
    }
}

/// V(ρ) = Σ_{i≥1} √Tr(Π_i ρ) over the non-target blocks of a projective
/// decomposition (the target projector Π_0 is excluded).
pub struct BlockSqrtFunctional {
    pub projections: Vec<ComplexMatrix>,
}

impl BlockSqrtFunctional {
    fn populations(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.projections.iter().map(|p| (p * rho).trace_re().max(0.0)).collect()
    }
}

impl StateFunctional for BlockSqrtFunctional {
    fn value(&self, rho: &ComplexMatrix) -> f64 {
        self.populations(rho).iter().map(|&p| p.sqrt()).sum()
    }

    fn dderiv(&self, rho: &ComplexMatrix, dir: &ComplexMatrix) -> f64 {
        self.projections
            .iter()
            .zip(self.populations(rho))
            .map(|(proj, p)| {
                if p <= 0.0 {
                    0.0
                } else {
                    0.5 / p.sqrt() * (proj * dir).trace_re()
                }
            })
            .sum()
    }

    fn d2quad(&self, rho: &ComplexMatrix, dir: &ComplexMatrix) -> f64 {
        self.projections
            .iter()
            .zip(self.populations(rho))
            .map(|(proj, p)| {
                if p <= 0.0 {
                    0.0
                } else {
                    let dp = (proj * dir).trace_re();
                    -0.25 * p.powf(-1.5) * dp * dp
                }
            })
            .sum()
    }
}

/// Scalar function of a classical state vector.
pub trait LyapunovFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    fn dderiv(&self, x: &[f64], dir: &[f64]) -> f64 {
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = fd_scale(xn, dn);
        let up: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d).collect();
        let dn_: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - h * d).collect();
        (self.value(&up) - self.value(&dn_)) / (2.0 * h)
    }

    fn d2quad(&self, x: &[f64], dir: &[f64]) -> f64 {
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = fd_scale(xn, dn);
        let up: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d).collect();
        let dn_: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - h * d).collect();
        (self.value(&up) - 2.0 * self.value(x) + self.value(&dn_)) / (h * h)
    }
}

/// V(x) = |x|² in target-centered coordinates.
pub struct SquaredNorm;

impl LyapunovFunction for SquaredNorm {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn dderiv(&self, x: &[f64], dir: &[f64]) -> f64 {
        2.0 * x.iter().zip(dir).map(|(a, d)| a * d).sum::<f64>()
    }

    fn d2quad(&self, _x: &[f64], dir: &[f64]) -> f64 {
        2.0 * dir.iter().map(|d| d * d).sum::<f64>()
    }
}

/// Value-only wrapper: forces the finite-difference defaults even when a
/// caller holds a function with exact derivatives, mostly for tests.
pub struct ValueOnly<F: Fn(&[f64]) -> f64 + Send + Sync>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> LyapunovFunction for ValueOnly<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}
