//! Conforming simplex tessellations of a box.
//!
//! Simplices are stored as flat `(N+1)`-tuples of vertex indices. Neighbor
//! slot `i` of a simplex is the simplex across the face opposite its local
//! vertex `i`, or `None` on the domain boundary. Split simplices are
//! tombstoned and their ids are never reused; [`Tessellation::compact`]
//! renumbers before serialization.

mod kuhn;
mod locator;
mod split;

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{self, GeometryError};
use crate::model::DomainBox;

pub use kuhn::{kuhn_triangulate, KuhnLattice};
pub use locator::CellLocator;
pub use split::{Bisection, Edge};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("simplex {0} is not live")]
    Stale(usize),
    #[error("simplex {id} would produce a degenerate child (volume {volume:e} <= {min_volume:e})")]
    Degenerate { id: usize, volume: f64, min_volume: f64 },
    #[error("point {0:?} is not inside any simplex")]
    NotFound(Vec<f64>),
    #[error("locator was built for revision {built}, tessellation is at {current}")]
    StaleLocator { built: u64, current: u64 },
    #[error("cannot build a locator for an empty tessellation")]
    Empty,
    #[error("inconsistent tessellation: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, MeshError>;

/// Degeneracy threshold for a mesh of `simplices` elements over `domain`.
pub fn degeneracy_threshold(domain: &DomainBox, simplices: usize) -> f64 {
    1e-14 * domain.volume() / simplices.max(1) as f64
}

#[derive(Debug, Clone)]
pub struct Tessellation {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
    simplices: Vec<usize>,
    neighbors: Vec<Option<usize>>,
    alive: Vec<bool>,
    live: usize,
    domain: DomainBox,
    min_volume: f64,
    revision: u64,
}

impl PartialEq for Tessellation {
    /// Structural equality; the mutation counter is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.coords == other.coords
            && self.values == other.values
            && self.simplices == other.simplices
            && self.neighbors == other.neighbors
            && self.alive == other.alive
            && self.domain == other.domain
            && self.min_volume.to_bits() == other.min_volume.to_bits()
    }
}

impl Tessellation {
    /// Builds a tessellation from raw arrays, deriving adjacency by face
    /// matching.
    pub fn from_simplices(
        domain: DomainBox,
        coords: Vec<f64>,
        values: Vec<f64>,
        simplices: Vec<usize>,
        min_volume: f64,
    ) -> Result<Self> {
        let dim = domain.dim();
        let neighbors = build_adjacency(dim, &simplices)?;
        Self::from_parts(domain, coords, values, simplices, neighbors, min_volume)
    }

    /// Builds a tessellation from raw arrays including adjacency, validating
    /// index ranges and adjacency consistency.
    pub fn from_parts(
        domain: DomainBox,
        coords: Vec<f64>,
        values: Vec<f64>,
        simplices: Vec<usize>,
        neighbors: Vec<Option<usize>>,
        min_volume: f64,
    ) -> Result<Self> {
        let dim = domain.dim();
        let k = dim + 1;
        if coords.len() != values.len() * dim {
            return Err(MeshError::InvalidInput(format!(
                "{} coordinates for {} vertices in {dim}D",
                coords.len(),
                values.len()
            )));
        }
        if !simplices.len().is_multiple_of(k) || neighbors.len() != simplices.len() {
            return Err(MeshError::InvalidInput(format!(
                "simplex block of {} indices and {} neighbor slots for {k}-vertex simplices",
                simplices.len(),
                neighbors.len()
            )));
        }
        let count = simplices.len() / k;
        let t = Self {
            dim,
            coords,
            values,
            simplices,
            neighbors,
            alive: vec![true; count],
            live: count,
            domain,
            min_volume,
            revision: 0,
        };
        t.validate()?;
        Ok(t)
    }

    /// Checks index ranges, distinct vertices per simplex and that every
    /// neighbor link is reciprocal and shares the opposite face.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertex_count();
        let ns = self.slot_count();
        let k = self.dim + 1;
        for id in 0..ns {
            if !self.alive[id] {
                continue;
            }
            let s = self.simplex(id);
            for (i, &v) in s.iter().enumerate() {
                if v >= nv {
                    return Err(MeshError::Inconsistent(format!("simplex {id} references vertex {v} of {nv}")));
                }
                if s[..i].contains(&v) {
                    return Err(MeshError::Inconsistent(format!("simplex {id} repeats vertex {v}")));
                }
            }
            for local in 0..k {
                let Some(n) = self.neighbors[id * k + local] else { continue };
                if n >= ns || !self.alive[n] || n == id {
                    return Err(MeshError::Inconsistent(format!(
                        "simplex {id} has invalid neighbor {n} in slot {local}"
                    )));
                }
                let other = self.simplex(n);
                let shares = s.iter().enumerate().all(|(j, v)| j == local || other.contains(v));
                if !shares {
                    return Err(MeshError::Inconsistent(format!(
                        "simplex {id} and neighbor {n} do not share face {local}"
                    )));
                }
                let back = self.neighbors[n * k..(n + 1) * k].iter().filter(|x| **x == Some(id)).count();
                if back != 1 {
                    return Err(MeshError::Inconsistent(format!(
                        "neighbor {n} of simplex {id} does not link back exactly once"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// Minimum admissible simplex volume.
    pub fn min_volume(&self) -> f64 {
        self.min_volume
    }

    /// Counter bumped by every mutation; used to detect stale derived data.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn vertex_count(&self) -> usize {
        self.values.len()
    }

    /// Number of simplex ids ever allocated, live or tombstoned.
    pub fn slot_count(&self) -> usize {
        self.alive.len()
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn is_compact(&self) -> bool {
        self.live == self.slot_count()
    }

    pub fn is_alive(&self, id: usize) -> bool {
        self.alive.get(id).copied().unwrap_or(false)
    }

    pub fn live_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive.iter().enumerate().filter(|(_, a)| **a).map(|(i, _)| i)
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set_value(&mut self, v: usize, value: f64) {
        self.values[v] = value;
        self.revision += 1;
    }

    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(MeshError::InvalidInput(format!("{} values for {} vertices", values.len(), self.values.len())));
        }
        self.values = values;
        self.revision += 1;
        Ok(())
    }

    /// Vertex indices of a simplex slot (live or not).
    pub fn simplex(&self, id: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.simplices[id * k..(id + 1) * k]
    }

    pub fn simplex_block(&self) -> &[usize] {
        &self.simplices
    }

    pub fn neighbor_block(&self) -> &[Option<usize>] {
        &self.neighbors
    }

    pub fn check_live(&self, id: usize) -> Result<()> {
        if self.is_alive(id) {
            Ok(())
        } else {
            Err(MeshError::Stale(id))
        }
    }

    pub fn simplex_vertices(&self, id: usize) -> Vec<&[f64]> {
        self.simplex(id).iter().map(|&v| self.vertex(v)).collect()
    }

    pub fn simplex_values(&self, id: usize) -> Vec<f64> {
        self.simplex(id).iter().map(|&v| self.values[v]).collect()
    }

    pub fn volume(&self, id: usize) -> f64 {
        geometry::simplex_volume(&self.simplex_vertices(id)).unwrap_or(0.0)
    }

    pub fn barycenter(&self, id: usize) -> Vec<f64> {
        geometry::barycenter(&self.simplex_vertices(id))
    }

    /// Linear interpolant at the barycenter: the mean of the vertex values.
    pub fn barycenter_value(&self, id: usize) -> f64 {
        let s = self.simplex(id);
        s.iter().map(|&v| self.values[v]).sum::<f64>() / s.len() as f64
    }

    /// Face-adjacent simplices of a live simplex, slot `i` opposite vertex `i`.
    pub fn neighbors(&self, id: usize) -> Result<&[Option<usize>]> {
        self.check_live(id)?;
        let k = self.dim + 1;
        Ok(&self.neighbors[id * k..(id + 1) * k])
    }

    pub fn total_volume(&self) -> f64 {
        self.live_ids().map(|id| self.volume(id)).sum()
    }

    /// Interpolates at `p` using `locator` for point location.
    pub fn interpolate_at(&self, locator: &CellLocator, p: &[f64]) -> Result<f64> {
        let id = locator.locate(self, p)?;
        Ok(geometry::interpolate(&self.simplex_vertices(id), &self.simplex_values(id), p)?)
    }

    /// Copy with tombstones removed and live simplices renumbered in
    /// ascending id order. Vertices are kept as-is.
    pub fn compact(&self) -> Tessellation {
        let k = self.dim + 1;
        let mut remap = vec![usize::MAX; self.slot_count()];
        for (new, old) in self.live_ids().enumerate() {
            remap[old] = new;
        }
        let mut simplices = Vec::with_capacity(self.live * k);
        let mut neighbors = Vec::with_capacity(self.live * k);
        for old in self.live_ids() {
            simplices.extend_from_slice(self.simplex(old));
            neighbors.extend(self.neighbors[old * k..(old + 1) * k].iter().map(|n| n.map(|n| remap[n])));
        }
        Tessellation {
            dim: self.dim,
            coords: self.coords.clone(),
            values: self.values.clone(),
            simplices,
            neighbors,
            alive: vec![true; self.live],
            live: self.live,
            domain: self.domain.clone(),
            min_volume: self.min_volume,
            revision: 0,
        }
    }

    /// Full conformity check by face hashing: every face of a live simplex
    /// is shared by exactly two live simplices, or by one when it lies on
    /// the domain boundary, and stored adjacency agrees with the hashing.
    pub fn check_conformity(&self) -> Result<()> {
        let k = self.dim + 1;
        let mut faces: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for id in self.live_ids() {
            for local in 0..k {
                faces.entry(face_key(self.simplex(id), local)).or_default().push((id, local));
            }
        }
        for (face, owners) in &faces {
            match owners.as_slice() {
                [(a, la), (b, lb)] => {
                    if self.neighbors[a * k + la] != Some(*b) || self.neighbors[b * k + lb] != Some(*a) {
                        return Err(MeshError::Inconsistent(format!(
                            "face {face:?} shared by {a} and {b} is not linked"
                        )));
                    }
                }
                [(a, la)] => {
                    if self.neighbors[a * k + la].is_some() {
                        return Err(MeshError::Inconsistent(format!(
                            "face {face:?} of {a} has a neighbor but no partner"
                        )));
                    }
                    if !self.face_on_boundary(face) {
                        return Err(MeshError::Inconsistent(format!(
                            "interior face {face:?} of {a} has a single owner"
                        )));
                    }
                }
                more => {
                    return Err(MeshError::Inconsistent(format!("face {face:?} has {} owners", more.len())));
                }
            }
        }
        Ok(())
    }

    fn face_on_boundary(&self, face: &[usize]) -> bool {
        (0..self.dim).any(|ax| {
            let lo = self.domain.mins[ax];
            let hi = self.domain.maxs[ax];
            face.iter().all(|&v| self.vertex(v)[ax] == lo) || face.iter().all(|&v| self.vertex(v)[ax] == hi)
        })
    }

    fn push_vertex(&mut self, p: &[f64], value: f64) -> usize {
        self.coords.extend_from_slice(p);
        self.values.push(value);
        self.values.len() - 1
    }

    fn push_simplex(&mut self, verts: &[usize], nbrs: &[Option<usize>]) -> usize {
        self.simplices.extend_from_slice(verts);
        self.neighbors.extend_from_slice(nbrs);
        self.alive.push(true);
        self.live += 1;
        self.alive.len() - 1
    }

    fn kill(&mut self, id: usize) {
        self.alive[id] = false;
        self.live -= 1;
    }

    /// Replaces the back-link `old` with `new` in simplex `id`.
    fn relink(&mut self, id: usize, old: usize, new: usize) {
        let k = self.dim + 1;
        for slot in &mut self.neighbors[id * k..(id + 1) * k] {
            if *slot == Some(old) {
                *slot = Some(new);
                return;
            }
        }
    }
}

/// Sorted vertex indices of the face opposite `local`.
fn face_key(simplex: &[usize], local: usize) -> Vec<usize> {
    let mut f: Vec<usize> = simplex.iter().enumerate().filter(|(i, _)| *i != local).map(|(_, v)| *v).collect();
    f.sort_unstable();
    f
}

fn build_adjacency(dim: usize, simplices: &[usize]) -> Result<Vec<Option<usize>>> {
    let k = dim + 1;
    let count = simplices.len() / k;
    let mut neighbors = vec![None; simplices.len()];
    let mut open: HashMap<Vec<usize>, (usize, usize)> = HashMap::with_capacity(count * k / 2 + 1);
    for id in 0..count {
        let s = &simplices[id * k..(id + 1) * k];
        for local in 0..k {
            let key = face_key(s, local);
            match open.remove(&key) {
                Some((other, other_local)) => {
                    neighbors[id * k + local] = Some(other);
                    neighbors[other * k + other_local] = Some(id);
                }
                None => {
                    open.insert(key, (id, local));
                }
            }
        }
    }
    // A face seen a third time re-opens above, so count separately.
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    for id in 0..count {
        let s = &simplices[id * k..(id + 1) * k];
        for local in 0..k {
            let c = seen.entry(face_key(s, local)).or_default();
            *c += 1;
            if *c > 2 {
                return Err(MeshError::Inconsistent(format!("face shared by more than two simplices at {id}")));
            }
        }
    }
    Ok(neighbors)
}
