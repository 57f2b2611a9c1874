//! Composite Gauss–Legendre rules on geometrically graded panels.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Quadrature nodes and weights on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// `panels` panels whose widths grow by `ratio` from left to right, `nodes_per_panel`
    /// Gauss–Legendre nodes on each.
    pub fn graded(horizon: f64, panels: usize, nodes_per_panel: usize, ratio: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::BadParameter(format!("horizon must be positive, got {horizon}")));
        }
        if !(ratio.is_finite() && ratio >= 1.0) {
            return Err(Error::BadParameter(format!("grading ratio must be >= 1, got {ratio}")));
        }
        let panels_nz = NonZeroUsize::new(panels)
            .ok_or_else(|| Error::BadParameter("at least one panel is required".into()))?;
        let degree = NonZeroUsize::new(nodes_per_panel)
            .ok_or_else(|| Error::BadParameter("at least one node per panel is required".into()))?;
        let rule = GaussLegendre::new(degree);
        let breaks = panel_breaks(horizon, panels_nz.get(), ratio);
        let mut nodes = Vec::with_capacity(panels * nodes_per_panel);
        let mut weights = Vec::with_capacity(panels * nodes_per_panel);
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for &(x, wt) in rule.as_node_weight_pairs() {
                nodes.push(mid + half * x);
                weights.push(half * wt);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn panel_breaks(horizon: f64, panels: usize, ratio: f64) -> Vec<f64> {
    let mut widths: Vec<f64> = (0..panels).map(|k| ratio.powi(k as i32)).collect();
    let total: f64 = widths.iter().sum();
    widths.iter_mut().for_each(|w| *w *= horizon / total);
    let mut breaks = Vec::with_capacity(panels + 1);
    breaks.push(0.0);
    let mut acc = 0.0;
    for w in &widths[..panels - 1] {
        acc += w;
        breaks.push(acc);
    }
    breaks.push(horizon);
    breaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_horizon() {
        let r = CompositeRule::graded(7.5, 12, 8, 1.6).unwrap();
        assert_eq!(r.len(), 96);
        assert!((r.weights.iter().sum::<f64>() - 7.5).abs() < 1e-13);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(r.nodes[0] > 0.0 && *r.nodes.last().unwrap() < 7.5);
    }

    #[test]
    fn panels_are_finer_near_zero() {
        let b = panel_breaks(10.0, 4, 2.0);
        assert!((b[1] - 10.0 / 15.0).abs() < 1e-14);
        assert_eq!(b[4], 10.0);
    }

    #[test]
    fn integrates_exponential() {
        let r = CompositeRule::graded(40.0, 12, 8, 1.6).unwrap();
        let val = r.integrate(|t| (-3.0 * t).exp());
        assert!((val - (1.0 - (-120.0f64).exp()) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(CompositeRule::graded(0.0, 2, 2, 1.0).is_err());
        assert!(CompositeRule::graded(1.0, 0, 2, 1.0).is_err());
        assert!(CompositeRule::graded(1.0, 2, 0, 1.0).is_err());
        assert!(CompositeRule::graded(1.0, 2, 2, 0.5).is_err());
    }
}
