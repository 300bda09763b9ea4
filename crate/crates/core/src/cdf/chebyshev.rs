//! Chebyshev-Gauss nodes and the Lagrange basis on them, evaluated in
//! barycentric form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_domain(x: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            value: x,
            domain: "[-1, 1]",
        })
    }
}

/// `T_m(x) = cos(m arccos x)`.
pub fn chebyshev_t(m: usize, x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok((m as f64 * x.acos()).cos())
}

/// Zeros of `T_m`, in descending order, with their barycentric weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridOrder")]
pub struct ChebyshevGrid {
    order: usize,
    nodes: Vec<f64>,
    #[serde(skip)]
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct GridOrder {
    order: usize,
}

impl TryFrom<GridOrder> for ChebyshevGrid {
    type Error = Error;

    fn try_from(g: GridOrder) -> Result<Self> {
        Self::new(g.order)
    }
}

impl ChebyshevGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidOrder(m));
        }
        let mf = m as f64;
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for j in 0..m {
            let angle = (2 * j + 1) as f64 * PI / (2.0 * mf);
            nodes.push(angle.cos());
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            weights.push(sign * angle.sin());
        }
        // cos((2j+1)pi/(2m)) leaves ~1e-17 residue at the centre for odd m.
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Ok(Self { order: m, nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `x` coincides with node `j`.
    fn node_hit(&self, x: f64) -> Option<usize> {
        self.nodes.iter().position(|&n| n == x)
    }

    /// Lagrange basis values `L_j(x)`.
    pub fn basis(&self, x: f64) -> Result<Vec<f64>> {
        check_domain(x)?;
        Ok(self.basis_unchecked(x))
    }

    pub(crate) fn basis_unchecked(&self, x: f64) -> Vec<f64> {
        if let Some(j) = self.node_hit(x) {
            let mut e = vec![0.0; self.order];
            e[j] = 1.0;
            return e;
        }
        let mut terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&n, &w)| w / (x - n))
            .collect();
        let denom: f64 = terms.iter().sum();
        for t in &mut terms {
            *t /= denom;
        }
        terms
    }

    /// `sum_j values[j] L_j(x)` by the second barycentric formula.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.order);
        if let Some(j) = self.node_hit(x) {
            return values[j];
        }
        let (mut num, mut den) = (0.0, 0.0);
        for ((&n, &w), &v) in self.nodes.iter().zip(&self.weights).zip(values) {
            let t = w / (x - n);
            num += t * v;
            den += t;
        }
        num / den
    }
}

/// Grid points used by [`lebesgue_constant`].
pub const LEBESGUE_GRID: usize = 4096;

/// `max_x sum_j |L_j(x)|` over an evenly spaced grid on `[-1, 1]`.
pub fn lebesgue_constant(m: usize) -> Result<f64> {
    let grid = ChebyshevGrid::new(m)?;
    let step = 2.0 / (LEBESGUE_GRID - 1) as f64;
    Ok((0..LEBESGUE_GRID)
        .map(|i| {
            let x = (-1.0 + i as f64 * step).min(1.0);
            grid.basis_unchecked(x).iter().map(|l| l.abs()).sum::<f64>()
        })
        .fold(0.0, f64::max))
}

/// `(2 / pi) ln(m + 1) + 1`
pub fn lebesgue_bound(m: usize) -> f64 {
    2.0 / PI * ((m + 1) as f64).ln() + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Direct product formula, independent of the barycentric weights.
    fn naive_basis(nodes: &[f64], x: f64) -> Vec<f64> {
        (0..nodes.len())
            .map(|j| {
                (0..nodes.len())
                    .filter(|&i| i != j)
                    .map(|i| (x - nodes[i]) / (nodes[j] - nodes[i]))
                    .product()
            })
            .collect()
    }

    fn chebyshev_recurrence(m: usize, x: f64) -> f64 {
        let (mut prev, mut cur) = (1.0, x);
        if m == 0 {
            return prev;
        }
        for _ in 1..m {
            let next = 2.0 * x * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    #[test]
    fn serde_round_trip_rebuilds_weights() {
        let g = ChebyshevGrid::new(7).unwrap();
        let back: ChebyshevGrid = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<ChebyshevGrid>(r#"{"order":0,"nodes":[]}"#).is_err());
    }

    #[test]
    fn node_examples() {
        assert_eq!(ChebyshevGrid::new(1).unwrap().nodes(), &[0.0]);
        let g2 = ChebyshevGrid::new(2).unwrap();
        assert_abs_diff_eq!(g2.nodes()[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(g2.nodes()[1], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        let g4 = ChebyshevGrid::new(4).unwrap();
        let expected = [0.923_879_532_511_286_7, 0.382_683_432_365_089_8, -0.382_683_432_365_089_8, -0.923_879_532_511_286_7];
        for (a, b) in g4.nodes().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(matches!(ChebyshevGrid::new(0), Err(Error::InvalidOrder(0))));
    }

    #[test]
    fn nodes_are_descending_and_symmetric() {
        for m in 1..=64 {
            let g = ChebyshevGrid::new(m).unwrap();
            let nodes = g.nodes();
            assert!(nodes.windows(2).all(|w| w[0] > w[1]));
            for j in 0..m {
                assert_abs_diff_eq!(nodes[j], -nodes[m - 1 - j], epsilon = 1e-15);
                assert!(nodes[j].abs() < 1.0);
            }
        }
    }

    #[test]
    fn chebyshev_t_examples() {
        for m in 0..20 {
            assert_abs_diff_eq!(chebyshev_t(m, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(chebyshev_t(2, 0.0).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chebyshev_t(5, 0.3).unwrap(), 0.99888, epsilon = 1e-12);
        assert_abs_diff_eq!(chebyshev_t(5, 0.3).unwrap(), chebyshev_recurrence(5, 0.3), epsilon = 1e-12);
        for m in 0..30 {
            for x in [-0.99, -0.5, 0.0, 0.123, 0.77] {
                assert_abs_diff_eq!(chebyshev_t(m, x).unwrap(), chebyshev_recurrence(m, x), epsilon = 1e-12);
            }
        }
        assert!(matches!(chebyshev_t(3, 1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn basis_is_kronecker_at_nodes() {
        for m in 1..=20 {
            let g = ChebyshevGrid::new(m).unwrap();
            for (k, &x) in g.nodes().iter().enumerate() {
                let l = g.basis(x).unwrap();
                for (j, v) in l.iter().enumerate() {
                    assert_eq!(*v, if j == k { 1.0 } else { 0.0 });
                }
            }
        }
        assert_eq!(ChebyshevGrid::new(1).unwrap().basis(0.37).unwrap(), vec![1.0]);
    }

    #[test]
    fn barycentric_matches_product_formula() {
        let g = ChebyshevGrid::new(3).unwrap();
        let fast = g.basis(0.2).unwrap();
        let slow = naive_basis(g.nodes(), 0.2);
        for (a, b) in fast.iter().zip(&slow) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for m in [2, 5, 8, 13, 20] {
            let g = ChebyshevGrid::new(m).unwrap();
            for x in [-1.0, -0.61, 0.05, 0.5, 1.0] {
                for (a, b) in g.basis(x).unwrap().iter().zip(naive_basis(g.nodes(), x)) {
                    assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for m in 1..=40 {
            let g = ChebyshevGrid::new(m).unwrap();
            for i in 0..1001 {
                let x = -1.0 + 2.0 * i as f64 / 1000.0;
                let s: f64 = g.basis(x).unwrap().iter().sum();
                assert!((s - 1.0).abs() <= 1e-10, "m={m} x={x} sum={s}");
            }
        }
    }

    #[test]
    fn lebesgue_examples_and_bound() {
        assert_abs_diff_eq!(lebesgue_constant(1).unwrap(), 1.0, epsilon = 1e-15);
        assert!(lebesgue_constant(2).unwrap() <= 1.699_398_305_132_12);
        assert!(lebesgue_constant(32).unwrap() <= 3.225_945_847_862_318);
        for m in 1..=64 {
            let l = lebesgue_constant(m).unwrap();
            assert!(l <= lebesgue_bound(m), "m={m}: {l} > {}", lebesgue_bound(m));
        }
    }
}
