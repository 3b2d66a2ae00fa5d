//! Foreground/background voting over reconstructed surface vertices.

use crate::geometry::Point3;
use crate::grid::HashGrid;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VoteOutcome {
    /// Indices of vertices with more foreground than background support.
    pub kept_vertices: Vec<usize>,
    /// Foreground point indices near any kept vertex, ascending.
    pub foreground: Vec<usize>,
}

/// Keeps a vertex when strictly more foreground than background points lie
/// strictly within `tau` of it. The refined foreground is every foreground
/// point within `tau` of a kept vertex.
pub fn surface_vote(vertices: &[Point3], foreground: &[Point3], background: &[Point3], tau: f64) -> VoteOutcome {
    let fg = HashGrid::new(foreground, tau);
    let bg = HashGrid::new(background, tau);
    let mut near = vec![false; foreground.len()];
    let mut kept = Vec::new();
    let mut ids = Vec::new();
    for (vi, v) in vertices.iter().enumerate() {
        ids.clear();
        fg.for_each_candidate(v, tau, |i| {
            if (foreground[i] - v).norm() < tau {
                ids.push(i);
            }
        });
        if ids.len() > bg.count_within(v, tau) {
            kept.push(vi);
            for &i in &ids {
                near[i] = true;
            }
        }
    }
    VoteOutcome {
        kept_vertices: kept,
        foreground: near.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect(),
    }
}
