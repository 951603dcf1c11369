//! Running performance metrics of a sequence of landing points.

use nalgebra::Vector2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean landing point.
    pub r_bar: Vector2<f64>,
    /// Distance from the target to the mean landing point.
    pub eps: f64,
    /// Population standard deviation (1/i normalization) of the landing points.
    pub sigma: f64,
}

/// Metrics over all points. Panics on an empty slice.
pub fn running_metrics(points: &[Vector2<f64>], target: &Vector2<f64>) -> Metrics {
    assert!(!points.is_empty(), "running_metrics needs at least one point");
    let n = points.len() as f64;
    let r_bar = points.iter().sum::<Vector2<f64>>() / n;
    let var = points.iter().map(|p| (p - r_bar).norm_squared()).sum::<f64>() / n;
    Metrics {
        r_bar,
        eps: (target - r_bar).norm(),
        sigma: var.sqrt(),
    }
}

/// Stores every landing point so each prefix can be summarized exactly.
#[derive(Debug, Clone, Default)]
pub struct MetricsState {
    points: Vec<Vector2<f64>>,
    sum: Vector2<f64>,
}

impl MetricsState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: Vector2<f64>) {
        self.points.push(r);
        self.sum += r;
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vector2<f64>] {
        &self.points
    }

    /// Metrics over all points so far; `None` before the first point.
    pub fn current(&self, target: &Vector2<f64>) -> Option<Metrics> {
        if self.points.is_empty() {
            return None;
        }
        let n = self.points.len() as f64;
        let r_bar = self.sum / n;
        let var = self.points.iter().map(|p| (p - r_bar).norm_squared()).sum::<f64>() / n;
        Some(Metrics {
            r_bar,
            eps: (target - r_bar).norm(),
            sigma: var.sqrt(),
        })
    }
}
