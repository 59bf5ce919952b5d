use std::collections::{HashMap, HashSet};

use super::{Result, SplitRule};
use crate::mesh::{Edge, MeshError, Tessellation};

/// Outcome of one round of splits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct SplitCount {
    pub vertices: usize,
    pub degenerate: usize,
}

/// Edges to bisect for `ids` (first occurrence wins). Score-driven rules
/// pick the edge with the highest `score`.
pub(crate) fn plan_edges<F>(t: &Tessellation, ids: &[usize], rule: SplitRule, score: F) -> Vec<(usize, Edge)>
where
    F: Fn(Edge) -> f64,
{
    let mut seen = HashSet::new();
    let mut plan = Vec::new();
    for &id in ids {
        let e = match rule {
            SplitRule::LongestEdge | SplitRule::Barycenter => t.longest_edge(id),
            SplitRule::SteepestEdge | SplitRule::MidpointError => t.select_edge_by(id, &score),
        };
        if seen.insert(e) {
            plan.push((id, e));
        }
    }
    plan
}

/// Distinct edges of `ids` in first-seen order.
pub(crate) fn distinct_edges(t: &Tessellation, ids: &[usize]) -> Vec<Edge> {
    let mut seen = HashSet::new();
    ids.iter().flat_map(|&id| t.edges(id)).filter(|e| seen.insert(*e)).collect()
}

/// Applies planned bisections in order. A start simplex destroyed by an
/// earlier bisection of the round is replaced by its descendant that still
/// carries the edge.
pub(crate) fn apply_bisections(t: &mut Tessellation, plan: &[(usize, Edge)], values: &[f64]) -> Result<SplitCount> {
    let mut children: HashMap<usize, [usize; 2]> = HashMap::new();
    let mut count = SplitCount::default();
    for (&(start, e), &value) in plan.iter().zip(values) {
        let mut s = start;
        while !t.is_alive(s) {
            let pair = children[&s];
            s = if t.contains_edge(pair[0], e) { pair[0] } else { pair[1] };
        }
        match t.bisect_edge(s, e, value) {
            Ok(b) => {
                count.vertices += 1;
                for (p, c) in b.parents.iter().zip(&b.children) {
                    children.insert(*p, *c);
                }
            }
            Err(MeshError::Degenerate { .. }) => count.degenerate += 1,
            Err(err) => return Err(err.into()),
        }
    }
    Ok(count)
}

/// Splits each simplex at its barycenter with the supplied value.
pub(crate) fn apply_barycenters(t: &mut Tessellation, items: &[(usize, f64)]) -> Result<SplitCount> {
    let mut count = SplitCount::default();
    for &(id, value) in items {
        match t.insert_barycenter(id, value) {
            Ok(_) => count.vertices += 1,
            Err(MeshError::Degenerate { .. }) => count.degenerate += 1,
            Err(err) => return Err(err.into()),
        }
    }
    Ok(count)
}
