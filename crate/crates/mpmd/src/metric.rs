//! Finite metric spaces: uniform and general, with axiom validation.

use serde::{Deserialize, Serialize};

/// Absolute tolerance for the triangle inequality; user matrices may carry
/// rounding noise.
pub const TRIANGLE_TOL: f64 = 1e-12;

/// A violated metric axiom, with the witnessing points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MetricViolation {
    Asymmetry { u: usize, v: usize },
    NonzeroDiagonal { v: usize },
    NonpositiveOffDiagonal { u: usize, v: usize },
    Triangle { x: usize, y: usize, z: usize },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("a metric space needs at least one point")]
    Empty,
    #[error("uniform distance must be positive, got {0}")]
    BadDelta(f64),
    #[error("distance matrix must be square, row {row} has {len} entries for {k} points")]
    NotSquare { row: usize, len: usize, k: usize },
    #[error("metric axioms violated: {0:?}")]
    Invalid(Vec<MetricViolation>),
    #[error("extremal distances need at least two points")]
    NoPairs,
}

/// A finite metric space over dense point indices `0..k`.
///
/// Labels are metadata only; all lookups go through indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    k: usize,
    dist: Vec<f64>,
    labels: Option<Vec<String>>,
    uniform_delta: Option<f64>,
}

impl MetricSpace {
    /// A `k`-point space with every off-diagonal distance equal to `delta`.
    pub fn uniform(k: usize, delta: f64) -> Result<Self, MetricError> {
        if k == 0 {
            return Err(MetricError::Empty);
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(MetricError::BadDelta(delta));
        }
        let mut dist = vec![delta; k * k];
        for i in 0..k {
            dist[i * k + i] = 0.0;
        }
        Ok(MetricSpace {
            k,
            dist,
            labels: None,
            uniform_delta: Some(delta),
        })
    }

    /// Validates an explicit distance matrix, collecting every violated
    /// axiom with its witnesses.
    pub fn general(matrix: &[Vec<f64>]) -> Result<Self, MetricError> {
        let k = matrix.len();
        if k == 0 {
            return Err(MetricError::Empty);
        }
        for (row, r) in matrix.iter().enumerate() {
            if r.len() != k {
                return Err(MetricError::NotSquare {
                    row,
                    len: r.len(),
                    k,
                });
            }
        }
        let mut violations = Vec::new();
        for v in 0..k {
            if matrix[v][v] != 0.0 {
                violations.push(MetricViolation::NonzeroDiagonal { v });
            }
        }
        for u in 0..k {
            for v in (u + 1)..k {
                if matrix[u][v] != matrix[v][u] {
                    violations.push(MetricViolation::Asymmetry { u, v });
                }
                if !(matrix[u][v] > 0.0) {
                    violations.push(MetricViolation::NonpositiveOffDiagonal { u, v });
                }
            }
        }
        for x in 0..k {
            for y in 0..k {
                for z in 0..k {
                    if x != y && y != z && x != z
                        && matrix[x][z] > matrix[x][y] + matrix[y][z] + TRIANGLE_TOL
                    {
                        violations.push(MetricViolation::Triangle { x, y, z });
                    }
                }
            }
        }
        if !violations.is_empty() {
            return Err(MetricError::Invalid(violations));
        }
        let mut dist = Vec::with_capacity(k * k);
        for r in matrix {
            dist.extend_from_slice(r);
        }
        let first = if k > 1 { matrix[0][1] } else { 0.0 };
        let uniform = k > 1
            && (0..k).all(|u| (0..k).all(|v| u == v || matrix[u][v] == first));
        Ok(MetricSpace {
            k,
            dist,
            labels: None,
            uniform_delta: if uniform { Some(first) } else { None },
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.k);
        self.labels = Some(labels);
        self
    }

    /// Number of points.
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn distance(&self, u: usize, v: usize) -> f64 {
        self.dist[u * self.k + v]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, v: usize) -> String {
        match &self.labels {
            Some(l) => l[v].clone(),
            None => format!("p{v}"),
        }
    }

    /// `Some(delta)` when all off-diagonal distances are equal.
    pub fn uniform_delta(&self) -> Option<f64> {
        self.uniform_delta
    }

    /// `(d_min, d_max, aspect_ratio)` over off-diagonal pairs.
    pub fn extremes(&self) -> Result<(f64, f64, f64), MetricError> {
        if self.k < 2 {
            return Err(MetricError::NoPairs);
        }
        let mut d_min = f64::INFINITY;
        let mut d_max = 0.0_f64;
        for u in 0..self.k {
            for v in (u + 1)..self.k {
                let d = self.distance(u, v);
                d_min = d_min.min(d);
                d_max = d_max.max(d);
            }
        }
        Ok((d_min, d_max, d_max / d_min))
    }

    pub fn d_max(&self) -> f64 {
        self.extremes().map(|(_, d, _)| d).unwrap_or(0.0)
    }
}

/// JSON encoding: `{"kind":"uniform","k":K,"delta":D}` or
/// `{"kind":"general","matrix":[[...],...],"labels":[...]}`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum MetricSpaceRepr {
    Uniform {
        k: usize,
        delta: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    General {
        matrix: Vec<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
}

impl Serialize for MetricSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match self.uniform_delta {
            Some(delta) => MetricSpaceRepr::Uniform {
                k: self.k,
                delta,
                labels: self.labels.clone(),
            },
            None => MetricSpaceRepr::General {
                matrix: (0..self.k)
                    .map(|u| (0..self.k).map(|v| self.distance(u, v)).collect())
                    .collect(),
                labels: self.labels.clone(),
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = MetricSpaceRepr::deserialize(d)?;
        let (space, labels) = match repr {
            MetricSpaceRepr::Uniform { k, delta, labels } => (
                MetricSpace::uniform(k, delta).map_err(serde::de::Error::custom)?,
                labels,
            ),
            MetricSpaceRepr::General { matrix, labels } => (
                MetricSpace::general(&matrix).map_err(serde::de::Error::custom)?,
                labels,
            ),
        };
        Ok(match labels {
            Some(l) if l.len() == space.k => space.with_labels(l),
            _ => space,
        })
    }
}
