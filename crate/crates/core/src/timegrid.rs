use crate::error::{Error, Result};

/// Partition `0 = t_0 < t_1 < ... < t_N = T` of the time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain("time grid needs at least one step".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Domain(format!("time grid must start at 0, got {}", nodes[0])));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::Domain(format!(
                "time grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { nodes })
    }

    pub fn uniform(final_time: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(final_time > 0.0) {
            return Err(Error::Domain("uniform grid needs N >= 1 and T > 0".into()));
        }
        let tau = final_time / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|j| j as f64 * tau).collect();
        nodes[steps] = final_time;
        Self::from_nodes(nodes)
    }

    /// Grid built from a list of step sizes.
    pub fn from_steps(steps: &[f64]) -> Result<Self> {
        let mut nodes = Vec::with_capacity(steps.len() + 1);
        nodes.push(0.0);
        let mut t = 0.0;
        for &tau in steps {
            if !(tau > 0.0) {
                return Err(Error::Domain(format!("step size must be positive, got {tau}")));
            }
            t += tau;
            nodes.push(t);
        }
        Self::from_nodes(nodes)
    }

    /// Piecewise-constant schedule: `k1` steps of `tau1` followed by `k2` of `tau2`.
    pub fn two_phase(tau1: f64, k1: usize, tau2: f64, k2: usize) -> Result<Self> {
        let steps: Vec<f64> = std::iter::repeat_n(tau1, k1)
            .chain(std::iter::repeat_n(tau2, k2))
            .collect();
        Self::from_steps(&steps)
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `t_j`.
    pub fn t(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// `tau_j = t_j - t_{j-1}` for `1 <= j <= N`.
    pub fn tau(&self, j: usize) -> f64 {
        self.nodes[j] - self.nodes[j - 1]
    }

    pub fn final_time(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}
