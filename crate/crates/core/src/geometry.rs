//! Dimension-generic simplex math.
//!
//! A simplex is passed around as a slice of vertex coordinate slices
//! (`&[&[f64]]`, N+1 entries of length N). All functions here are pure and
//! allocate only small scratch buffers.

use rand::Rng;
use thiserror::Error;

/// Containment tolerance on barycentric weights.
pub const INSIDE_TOL: f64 = 1e-12;

/// Relative tolerance used when a simplex is checked in isolation, i.e.
/// without a mesh-wide degeneracy threshold.
const SELF_DEGENERACY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate simplex (volume {volume:e})")]
    Degenerate { volume: f64 },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Normalized barycentric coordinates of a point with respect to a simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricWeights(Vec<f64>);

impl BarycentricWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// True when every weight is at least `-tol`.
    pub fn is_inside(&self, tol: f64) -> bool {
        self.0.iter().all(|&w| w >= -tol)
    }

    pub fn min_weight(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `n!` as a float. Exact for `n <= 18`.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn check_simplex(vertices: &[&[f64]]) -> Result<usize> {
    if vertices.len() < 2 {
        return Err(GeometryError::InvalidInput(format!(
            "a simplex needs at least 2 vertices, got {}",
            vertices.len()
        )));
    }
    let dim = vertices.len() - 1;
    for (i, v) in vertices.iter().enumerate() {
        if v.len() != dim {
            return Err(GeometryError::InvalidInput(format!("vertex {i} has {} coordinates, expected {dim}", v.len())));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidInput(format!("vertex {i} has a non-finite coordinate")));
        }
    }
    Ok(dim)
}

/// Edge matrix with `a[r * n + c] = X_{c+1}[r] - X_0[r]`.
fn edge_matrix(vertices: &[&[f64]], dim: usize) -> Vec<f64> {
    let x0 = vertices[0];
    let mut a = vec![0.0; dim * dim];
    for c in 0..dim {
        let xc = vertices[c + 1];
        for r in 0..dim {
            a[r * dim + c] = xc[r] - x0[r];
        }
    }
    a
}

/// In-place LU factorization with partial pivoting. Returns the determinant
/// and the row permutation, or `None` for an exactly singular matrix.
fn lu_factor(a: &mut [f64], n: usize) -> Option<(f64, Vec<usize>)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            perm.swap(k, piv);
            det = -det;
        }
        let d = a[k * n + k];
        det *= d;
        for r in (k + 1)..n {
            let f = a[r * n + k] / d;
            if f != 0.0 {
                a[r * n + k] = f;
                for c in (k + 1)..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
            } else {
                a[r * n + k] = 0.0;
            }
        }
    }
    Some((det, perm))
}

fn lu_solve(lu: &[f64], perm: &[usize], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for r in 0..n {
        for c in 0..r {
            x[r] -= lu[r * n + c] * x[c];
        }
    }
    for r in (0..n).rev() {
        for c in (r + 1)..n {
            x[r] -= lu[r * n + c] * x[c];
        }
        x[r] /= lu[r * n + r];
    }
    x
}

/// Volume of an N-simplex: `|det(X_1 - X_0, ..., X_N - X_0)| / N!`, which is
/// the homogeneous (N+1)x(N+1) determinant form reduced by one row operation.
pub fn simplex_volume(vertices: &[&[f64]]) -> Result<f64> {
    let dim = check_simplex(vertices)?;
    let mut a = edge_matrix(vertices, dim);
    Ok(match lu_factor(&mut a, dim) {
        Some((det, _)) => det.abs() / factorial(dim),
        None => 0.0,
    })
}

/// Largest per-axis extent of the vertex bounding box.
fn extent(vertices: &[&[f64]], dim: usize) -> f64 {
    (0..dim)
        .map(|ax| {
            let (lo, hi) =
                vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[ax]), hi.max(v[ax])));
            hi - lo
        })
        .fold(0.0, f64::max)
}

fn self_degeneracy_threshold(vertices: &[&[f64]], dim: usize) -> f64 {
    SELF_DEGENERACY_TOL * extent(vertices, dim).powi(dim as i32) / factorial(dim)
}

/// Solves `ΔX·λ = p − X_0` and sets `λ_0 = 1 − Σλ_i`.
pub fn barycentric_weights(vertices: &[&[f64]], p: &[f64]) -> Result<BarycentricWeights> {
    let dim = check_simplex(vertices)?;
    if p.len() != dim {
        return Err(GeometryError::InvalidInput(format!("point has {} coordinates, expected {dim}", p.len())));
    }
    if p.iter().any(|c| !c.is_finite()) {
        return Err(GeometryError::InvalidInput("point has a non-finite coordinate".into()));
    }
    let mut a = edge_matrix(vertices, dim);
    let Some((det, perm)) = lu_factor(&mut a, dim) else {
        return Err(GeometryError::Degenerate { volume: 0.0 });
    };
    let volume = det.abs() / factorial(dim);
    if volume <= self_degeneracy_threshold(vertices, dim) {
        return Err(GeometryError::Degenerate { volume });
    }
    let rhs: Vec<f64> = p.iter().zip(vertices[0]).map(|(pi, xi)| pi - xi).collect();
    let lambda = lu_solve(&a, &perm, dim, &rhs);
    let mut w = Vec::with_capacity(dim + 1);
    w.push(1.0 - lambda.iter().sum::<f64>());
    w.extend(lambda);
    Ok(BarycentricWeights(w))
}

/// Linear interpolation inside a simplex, `Σ f_i W_i / Σ W_i`.
pub fn interpolate(vertices: &[&[f64]], values: &[f64], p: &[f64]) -> Result<f64> {
    if values.len() != vertices.len() {
        return Err(GeometryError::InvalidInput(format!("{} values for {} vertices", values.len(), vertices.len())));
    }
    let w = barycentric_weights(vertices, p)?;
    let total: f64 = w.0.iter().sum();
    let acc: f64 = w.0.iter().zip(values).map(|(wi, fi)| wi * fi).sum();
    Ok(acc / total)
}

/// Barycenter (centroid) of the vertices.
pub fn barycenter(vertices: &[&[f64]]) -> Vec<f64> {
    let dim = vertices[0].len();
    let inv = 1.0 / vertices.len() as f64;
    (0..dim).map(|ax| vertices.iter().map(|v| v[ax]).sum::<f64>() * inv).collect()
}

/// Maps `n` independent uniform draws to convex-combination coefficients of
/// the `n + 1` vertices, uniformly distributed over the simplex.
///
/// With `λ_j = z_j^(1/(n+1-j))` for `j = 1..n`, `λ_0 = 1` and the closing
/// factor `λ_{n+1} = 0`, vertex `i` receives `(1 − λ_{i+1}) Π_{j≤i} λ_j`.
pub fn coefficients_from_uniforms(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut prod = 1.0;
    for i in 0..=n {
        let lambda_next = z.get(i).map_or(0.0, |zi| zi.powf(1.0 / (n - i) as f64));
        coeffs.push((1.0 - lambda_next) * prod);
        prod *= lambda_next;
    }
    coeffs
}

/// Point at the given convex-combination coefficients.
pub fn combine(vertices: &[&[f64]], coeffs: &[f64]) -> Vec<f64> {
    let dim = vertices[0].len();
    let mut p = vec![0.0; dim];
    for (v, &c) in vertices.iter().zip(coeffs) {
        for (pi, vi) in p.iter_mut().zip(v.iter()) {
            *pi += c * vi;
        }
    }
    p
}

/// Deterministic image of the unit cube point `z` in the simplex. Performs
/// no degeneracy check: a collapsed simplex maps everything to its single
/// location.
pub fn point_from_uniforms(vertices: &[&[f64]], z: &[f64]) -> Vec<f64> {
    combine(vertices, &coefficients_from_uniforms(z))
}

/// Draws a point uniformly distributed over the simplex volume.
pub fn sample_uniform_in_simplex<R: Rng + ?Sized>(vertices: &[&[f64]], rng: &mut R) -> Result<Vec<f64>> {
    let dim = check_simplex(vertices)?;
    let volume = simplex_volume(vertices)?;
    if volume <= self_degeneracy_threshold(vertices, dim) {
        return Err(GeometryError::Degenerate { volume });
    }
    let z: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    Ok(point_from_uniforms(vertices, &z))
}

/// Number of `k`-dimensional faces of an `n`-simplex: `C(n+1, k+1)`.
pub fn simplex_face_count(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return Err(GeometryError::InvalidInput(format!("face dimension {k} exceeds simplex dimension {n}")));
    }
    Ok(binomial((n + 1) as u64, (k + 1) as u64))
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}
