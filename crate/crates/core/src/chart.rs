use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Domain predicate of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Everywhere,
    /// Open cube `(-half_width, half_width)^n`.
    Cube { half_width: f64 },
    /// Open ball of the given radius around the origin.
    Ball { radius: f64 },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Domain::Everywhere => x.iter().all(|v| v.is_finite()),
            Domain::Cube { half_width } => x.iter().all(|v| v.abs() < half_width),
            Domain::Ball { radius } => x.iter().map(|v| v * v).sum::<f64>() < radius * radius,
        }
    }
}

/// Single coordinate chart `x1..xn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    dim: usize,
    domain: Domain,
}

impl Chart {
    pub fn new(dim: usize, domain: Domain) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Shape(format!("chart dimension must be at least 2, got {dim}")));
        }
        Ok(Chart { dim, domain })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(dim, Domain::Everywhere)
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::new(dim, Domain::Ball { radius: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        (1..=self.dim).map(|i| format!("x{i}")).collect()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!("point has {} coordinates, chart has {}", x.len(), self.dim)));
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!("point {x:?} outside chart domain")));
        }
        Ok(())
    }
}

/// A chart point together with the jet order requested there.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    pub point: Vec<f64>,
    pub order: usize,
}

impl PointSample {
    pub fn new(chart: &Chart, point: Vec<f64>, order: usize) -> Result<Self> {
        chart.check_point(&point)?;
        Jet::check_order(order)?;
        Ok(PointSample { point, order })
    }
}
