//! Gaussian quadrature rules used by the pricers and density routines.

use crate::scalar::{lit, Scalar};

/// Gauss–Hermite rule normalized to the standard normal law:
/// `Σ wᵢ f(zᵢ) ≈ E[f(Z)]`, `Z ~ N(0,1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        // beyond ~150 nodes the normalized recurrence underflows at the outer roots
        assert!((1..=150).contains(&n), "Gauss-Hermite supports 1..=150 nodes");
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0_f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        // Physicists' rule (weight e^{-x²}) mapped to the standard normal.
        let scale = std::f64::consts::PI.sqrt();
        let nodes = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().rev().map(|v| v / scale).collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(Z)]` for a standard normal `Z`.
    pub fn expect<T: Scalar>(&self, mut f: impl FnMut(T) -> T) -> T {
        let mut acc = T::zero();
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + lit::<T>(*w) * f(lit(*z));
        }
        acc
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one node");
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        for i in 1..=n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 - 0.25) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            x[i - 1] = -z;
            x[n - i] = z;
            w[i - 1] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - i] = w[i - 1];
        }
        Self {
            nodes: x,
            weights: w,
        }
    }

    /// Composite rule over `[a, b]` split into `panels` equal pieces.
    pub fn integrate<T: Scalar>(&self, a: T, b: T, panels: usize, mut f: impl FnMut(T) -> T) -> T {
        let h = (b - a) / lit(panels as f64);
        let half: T = lit(0.5);
        let mut acc = T::zero();
        for p in 0..panels {
            let lo = a + h * lit(p as f64);
            let mid = lo + half * h;
            let mut panel = T::zero();
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                panel = panel + lit::<T>(*w) * f(mid + half * h * lit(*x));
            }
            acc = acc + panel * half * h;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_normal_moments() {
        let gh = GaussHermite::new(64);
        let total: f64 = gh.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        let m2 = gh.expect(|z: f64| z * z);
        let m4 = gh.expect(|z: f64| z.powi(4));
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
        // E[e^{aZ}] = e^{a²/2}
        let mgf = gh.expect(|z: f64| (0.7 * z).exp());
        assert!((mgf - (0.245_f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn hermite_odd_order_has_zero_node() {
        let gh = GaussHermite::new(5);
        assert!(gh.nodes[2].abs() < 1e-15);
        assert!(gh.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let gl = GaussLegendre::new(6);
        let v = gl.integrate(0.0_f64, 2.0, 3, |x| x.powi(11));
        assert!((v - 2.0_f64.powi(12) / 12.0).abs() < 1e-9);
        let s = gl.integrate(0.0_f64, std::f64::consts::PI, 8, |x| x.sin());
        assert!((s - 2.0).abs() < 1e-14);
    }
}
