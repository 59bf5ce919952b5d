use super::{MeshError, Result, Tessellation};
use crate::geometry;

/// Undirected edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

impl Edge {
    pub fn new(u: usize, v: usize) -> Self {
        if u < v {
            Self { a: u, b: v }
        } else {
            Self { a: v, b: u }
        }
    }
}

/// Result of bisecting one edge: the new midpoint vertex and, for every
/// simplex of the edge star (ascending ids), its two children. The first
/// child replaces `edge.a` by the midpoint, the second replaces `edge.b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    pub edge: Edge,
    pub vertex: usize,
    pub parents: Vec<usize>,
    pub children: Vec<[usize; 2]>,
}

impl Tessellation {
    fn child_volume_check(&self, id: usize, verts: &[&[f64]]) -> Result<()> {
        let volume = geometry::simplex_volume(verts)?;
        if volume <= self.min_volume {
            return Err(MeshError::Degenerate { id, volume, min_volume: self.min_volume });
        }
        Ok(())
    }

    /// Splits a live simplex into N+1 children sharing a new vertex at its
    /// barycenter. Neighbor geometry is untouched; each child adopts the
    /// parent's neighbor across its outer face. On a degeneracy error the
    /// tessellation is left unchanged.
    pub fn insert_barycenter(&mut self, id: usize, value: f64) -> Result<Vec<usize>> {
        self.check_live(id)?;
        let k = self.dim + 1;
        let parent: Vec<usize> = self.simplex(id).to_vec();
        let outer: Vec<Option<usize>> = self.neighbors[id * k..(id + 1) * k].to_vec();
        let p = self.barycenter(id);
        for i in 0..k {
            let mut verts = self.simplex_vertices(id);
            verts[i] = &p;
            self.child_volume_check(id, &verts)?;
        }

        let m = self.push_vertex(&p, value);
        let base = self.slot_count();
        let mut ids = Vec::with_capacity(k);
        for i in 0..k {
            let mut verts = parent.clone();
            verts[i] = m;
            let nbrs: Vec<Option<usize>> = (0..k).map(|j| if j == i { outer[i] } else { Some(base + j) }).collect();
            ids.push(self.push_simplex(&verts, &nbrs));
        }
        for (i, n) in outer.iter().enumerate() {
            if let Some(n) = *n {
                self.relink(n, id, ids[i]);
            }
        }
        self.kill(id);
        self.revision += 1;
        Ok(ids)
    }

    /// Edges of a simplex in local-index order.
    pub fn edges(&self, id: usize) -> Vec<Edge> {
        let s = self.simplex(id);
        let mut out = Vec::with_capacity(s.len() * (s.len() - 1) / 2);
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                out.push(Edge::new(s[i], s[j]));
            }
        }
        out
    }

    pub fn edge_length_squared(&self, e: Edge) -> f64 {
        self.vertex(e.a).iter().zip(self.vertex(e.b)).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    pub fn midpoint(&self, e: Edge) -> Vec<f64> {
        self.vertex(e.a).iter().zip(self.vertex(e.b)).map(|(x, y)| 0.5 * (x + y)).collect()
    }

    /// Edge of `id` maximizing `score(value_a, value_b)`, then length, then
    /// preferring the lexicographically smallest vertex pair.
    pub fn select_edge<F>(&self, id: usize, score: F) -> Edge
    where
        F: Fn(f64, f64) -> f64,
    {
        self.select_edge_by(id, |e| score(self.values[e.a], self.values[e.b]))
    }

    /// Edge of `id` with the highest score, ties broken by length and then
    /// by the smaller edge.
    pub fn select_edge_by<F>(&self, id: usize, score: F) -> Edge
    where
        F: Fn(Edge) -> f64,
    {
        self.edges(id)
            .into_iter()
            .map(|e| (score(e), self.edge_length_squared(e), e))
            .max_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then_with(|| y.2.cmp(&x.2)))
            .map(|(_, _, e)| e)
            .expect("a simplex has at least one edge")
    }

    pub fn longest_edge(&self, id: usize) -> Edge {
        self.select_edge(id, |_, _| 0.0)
    }

    pub fn contains_edge(&self, id: usize, e: Edge) -> bool {
        let s = self.simplex(id);
        s.contains(&e.a) && s.contains(&e.b)
    }

    /// All live simplices containing `e`, found by walking face adjacency
    /// from `start`. Sorted ascending.
    pub fn edge_star(&self, start: usize, e: Edge) -> Result<Vec<usize>> {
        self.check_live(start)?;
        if !self.contains_edge(start, e) {
            return Err(MeshError::InvalidInput(format!("simplex {start} does not contain edge ({}, {})", e.a, e.b)));
        }
        let k = self.dim + 1;
        let mut star = vec![start];
        let mut cursor = 0;
        while cursor < star.len() {
            let s = star[cursor];
            cursor += 1;
            for local in 0..k {
                let v = self.simplices[s * k + local];
                if v == e.a || v == e.b {
                    continue;
                }
                if let Some(n) = self.neighbors[s * k + local] {
                    if !star.contains(&n) {
                        star.push(n);
                    }
                }
            }
        }
        star.sort_unstable();
        Ok(star)
    }

    /// Bisects `e` at its midpoint, splitting every simplex of its star in
    /// two. Conformity is preserved because all simplices sharing the edge
    /// are split at the same point. On a degeneracy error nothing changes.
    pub fn bisect_edge(&mut self, start: usize, e: Edge, value: f64) -> Result<Bisection> {
        let star = self.edge_star(start, e)?;
        let k = self.dim + 1;
        let m_coords = self.midpoint(e);
        for &s in &star {
            let verts = self.simplex_vertices(s);
            for end in [e.a, e.b] {
                let local = self.simplex(s).iter().position(|&v| v == end).unwrap();
                let mut child = verts.clone();
                child[local] = &m_coords;
                self.child_volume_check(s, &child)?;
            }
        }

        let m = self.push_vertex(&m_coords, value);
        let base = self.slot_count();
        let child_of = |t: usize, side: usize| -> usize {
            let j = star.binary_search(&t).expect("neighbor containing the edge is in the star");
            base + 2 * j + side
        };
        let mut children = Vec::with_capacity(star.len());
        let mut relinks = Vec::new();
        for &s in &star {
            let verts: Vec<usize> = self.simplex(s).to_vec();
            let nbrs: Vec<Option<usize>> = self.neighbors[s * k..(s + 1) * k].to_vec();
            let ia = verts.iter().position(|&v| v == e.a).unwrap();
            let ib = verts.iter().position(|&v| v == e.b).unwrap();
            let mut pair = [0usize; 2];
            for (side, (replaced, kept)) in [(ia, ib), (ib, ia)].into_iter().enumerate() {
                let mut cv = verts.clone();
                cv[replaced] = m;
                let cn: Vec<Option<usize>> = (0..k)
                    .map(|slot| {
                        if slot == replaced {
                            nbrs[slot]
                        } else if slot == kept {
                            Some(child_of(s, 1 - side))
                        } else {
                            nbrs[slot].map(|t| child_of(t, side))
                        }
                    })
                    .collect();
                let id = self.push_simplex(&cv, &cn);
                if let Some(out) = nbrs[replaced] {
                    relinks.push((out, s, id));
                }
                pair[side] = id;
            }
            children.push(pair);
        }
        for (out, old, new) in relinks {
            self.relink(out, old, new);
        }
        for &s in &star {
            self.kill(s);
        }
        self.revision += 1;
        Ok(Bisection { edge: e, vertex: m, parents: star, children })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::unit_grid_mesh;
    use crate::model::DomainBox;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn barycenter_split_of_tetrahedron() {
        let mut t = unit_grid_mesh(&[2, 2, 2]);
        let vol = t.total_volume();
        let nv = t.vertex_count();
        let parent_nbrs: Vec<Option<usize>> = t.neighbors(3).unwrap().to_vec();
        let kids = t.insert_barycenter(3, 0.5).unwrap();
        assert_eq!(kids.len(), 4);
        assert_eq!(t.vertex_count(), nv + 1);
        assert_eq!(t.live_count(), 6 + 3);
        assert_relative_eq!(t.total_volume(), vol, max_relative = 1e-12);
        t.check_conformity().unwrap();
        // Each former neighbor now sees exactly one child across the shared face.
        for n in parent_nbrs.into_iter().flatten() {
            let links = t.neighbors(n).unwrap();
            assert!(!links.contains(&Some(3)));
            assert_eq!(links.iter().filter(|l| l.is_some_and(|x| kids.contains(&x))).count(), 1);
        }
    }

    #[test]
    fn barycenter_split_in_two_dimensions() {
        let mut t = unit_grid_mesh(&[2, 2]);
        assert_eq!(t.insert_barycenter(0, 0.0).unwrap().len(), 3);
        t.check_conformity().unwrap();
    }

    #[test]
    fn dead_simplex_cannot_be_split() {
        let mut t = unit_grid_mesh(&[2, 2]);
        t.insert_barycenter(0, 0.0).unwrap();
        assert_eq!(t.insert_barycenter(0, 0.0).unwrap_err(), MeshError::Stale(0));
    }

    #[test]
    fn degenerate_child_rolls_back() {
        let mut t = unit_grid_mesh(&[2, 2]);
        t.min_volume = 1.0;
        let before = t.clone();
        assert!(matches!(t.insert_barycenter(0, 0.0), Err(MeshError::Degenerate { .. })));
        assert_eq!(t, before);
        let e = t.longest_edge(1);
        assert!(matches!(t.bisect_edge(1, e, 0.0), Err(MeshError::Degenerate { .. })));
        assert_eq!(t, before);
    }

    #[test]
    fn bisecting_cube_diagonal_splits_all_six() {
        let mut t = unit_grid_mesh(&[2, 2, 2]);
        let e = t.longest_edge(0);
        assert_eq!(e, Edge::new(0, 7));
        let b = t.bisect_edge(0, e, 1.0).unwrap();
        assert_eq!(b.parents, (0..6).collect::<Vec<_>>());
        assert_eq!(t.live_count(), 12);
        assert_eq!(t.vertex(b.vertex), &[0.5, 0.5, 0.5]);
        assert_relative_eq!(t.total_volume(), 1.0, max_relative = 1e-12);
        t.check_conformity().unwrap();
    }

    #[test]
    fn select_edge_prefers_score_then_length() {
        let t = unit_grid_mesh(&[2, 2]);
        // Affine values 1 + 2x - y: vertex values 1, 3, 0, 2 on the unit square.
        let e = t.select_edge(0, |a, b| (a - b).abs());
        let (va, vb) = (t.value(e.a), t.value(e.b));
        for other in t.edges(0) {
            assert!((t.value(other.a) - t.value(other.b)).abs() <= (va - vb).abs());
        }
    }

    fn random_split_sequence(sizes: &[usize], steps: usize, seed: u64, bisect: bool) -> Tessellation {
        let mut t = unit_grid_mesh(sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let box_volume = DomainBox::unit(sizes.len()).volume();
        for _ in 0..steps {
            let live: Vec<usize> = t.live_ids().collect();
            let id = live[rng.random_range(0..live.len())];
            let r = if bisect {
                let edges = t.edges(id);
                let e = edges[rng.random_range(0..edges.len())];
                t.bisect_edge(id, e, 0.0).map(|_| ())
            } else {
                t.insert_barycenter(id, 0.0).map(|_| ())
            };
            match r {
                Ok(()) | Err(MeshError::Degenerate { .. }) => {}
                Err(e) => panic!("{e}"),
            }
            t.validate().unwrap();
        }
        assert_relative_eq!(t.total_volume(), box_volume, max_relative = 1e-10);
        t
    }

    #[test]
    fn random_barycenter_insertions_stay_conforming() {
        let t = random_split_sequence(&[5, 5, 5], 1000, 7, false);
        t.check_conformity().unwrap();
    }

    #[test]
    fn random_bisections_stay_conforming() {
        let t = random_split_sequence(&[5, 5, 5], 1000, 11, true);
        t.check_conformity().unwrap();
        let t2 = random_split_sequence(&[4, 4], 500, 3, true);
        t2.check_conformity().unwrap();
    }
}
