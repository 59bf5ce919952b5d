use super::{MeshError, Result, Tessellation};
use crate::geometry::{self, INSIDE_TOL};

const MIN_BUCKETS: usize = 64;
const MAX_BUCKETS: usize = 1 << 24;
const SNAP: f64 = 1e-9;

/// Uniform bucket grid over the domain box. Each bucket lists, in ascending
/// order, every live simplex whose bounding box overlaps it.
#[derive(Debug, Clone)]
pub struct CellLocator {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    spacing: Vec<f64>,
    resolution: Vec<usize>,
    offsets: Vec<usize>,
    ids: Vec<usize>,
    stamp: u64,
}

fn scale_resolution(extents: &[f64], side: f64) -> Vec<usize> {
    extents.iter().map(|e| ((e / side).round() as usize).max(1)).collect()
}

fn fit_budget(mut res: Vec<usize>) -> Vec<usize> {
    while res.iter().product::<usize>() > MAX_BUCKETS {
        let total: usize = res.iter().product();
        let shrink = (total as f64 / MAX_BUCKETS as f64).powf(1.0 / res.len() as f64) * 1.01;
        res = res.iter().map(|&r| ((r as f64 / shrink).floor() as usize).max(1)).collect();
    }
    res
}

fn snapped(q: f64) -> f64 {
    let r = q.round();
    if (q - r).abs() < SNAP {
        r
    } else {
        q
    }
}

struct Layout {
    resolution: Vec<usize>,
    spacing: Vec<f64>,
}

impl Layout {
    fn new(extents: &[f64], resolution: Vec<usize>) -> Self {
        let spacing = extents.iter().zip(&resolution).map(|(e, &r)| e / r as f64).collect();
        Self { resolution, spacing }
    }

    fn range(&self, ax: usize, lo: f64, hi: f64, min: f64) -> (usize, usize) {
        let r = self.resolution[ax];
        let a = snapped((lo - min) / self.spacing[ax]).floor().max(0.0) as usize;
        let b = (snapped((hi - min) / self.spacing[ax]).ceil() as usize).saturating_sub(1);
        let a = a.min(r - 1);
        (a, b.clamp(a, r - 1))
    }

    fn bucket_count(&self) -> usize {
        self.resolution.iter().product()
    }
}

fn bounding_box(t: &Tessellation, id: usize) -> (Vec<f64>, Vec<f64>) {
    let d = t.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &v in t.simplex(id) {
        for (ax, &x) in t.vertex(v).iter().enumerate() {
            lo[ax] = lo[ax].min(x);
            hi[ax] = hi[ax].max(x);
        }
    }
    (lo, hi)
}

impl CellLocator {
    /// Builds the bucket grid. The default resolution has about one bucket
    /// per live simplex with near-cubic buckets; when buckets sized to the
    /// median simplex bounding box give fewer candidates per bucket, that
    /// layout is used instead.
    pub fn build(t: &Tessellation) -> Result<Self> {
        if t.live_count() == 0 {
            return Err(MeshError::Empty);
        }
        let d = t.dim();
        let dom = t.domain();
        let extents: Vec<f64> = (0..d).map(|ax| dom.maxs[ax] - dom.mins[ax]).collect();
        let boxes: Vec<(Vec<f64>, Vec<f64>)> = t.live_ids().map(|id| bounding_box(t, id)).collect();

        let count = t.live_count().clamp(MIN_BUCKETS, MAX_BUCKETS);
        let side = (dom.volume() / count as f64).powf(1.0 / d as f64);
        let default = Layout::new(&extents, fit_budget(scale_resolution(&extents, side)));

        let median: Vec<f64> = (0..d)
            .map(|ax| {
                let mut e: Vec<f64> = boxes.iter().map(|(lo, hi)| hi[ax] - lo[ax]).collect();
                let mid = e.len() / 2;
                *e.select_nth_unstable_by(mid, f64::total_cmp).1
            })
            .collect();
        let fitted: Vec<usize> = extents
            .iter()
            .zip(&median)
            .map(|(e, m)| if *m > 0.0 { ((e / m).round() as usize).max(1) } else { 1 })
            .collect();
        let fitted = Layout::new(&extents, fit_budget(fitted));

        let entries = |layout: &Layout| -> usize {
            boxes
                .iter()
                .map(|(lo, hi)| {
                    (0..d)
                        .map(|ax| {
                            let (a, b) = layout.range(ax, lo[ax], hi[ax], dom.mins[ax]);
                            b - a + 1
                        })
                        .product::<usize>()
                })
                .sum()
        };
        let de = entries(&default);
        let fe = entries(&fitted);
        let layout = if (fe as f64 / fitted.bucket_count() as f64) < (de as f64 / default.bucket_count() as f64) {
            fitted
        } else {
            default
        };

        let buckets = layout.bucket_count();
        let mut strides = vec![1usize; d];
        for ax in 1..d {
            strides[ax] = strides[ax - 1] * layout.resolution[ax - 1];
        }
        let visit = |lo: &[f64], hi: &[f64], f: &mut dyn FnMut(usize)| {
            let ranges: Vec<(usize, usize)> = (0..d).map(|ax| layout.range(ax, lo[ax], hi[ax], dom.mins[ax])).collect();
            let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
            loop {
                f(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
                let mut ax = 0;
                loop {
                    if ax == d {
                        return;
                    }
                    idx[ax] += 1;
                    if idx[ax] <= ranges[ax].1 {
                        break;
                    }
                    idx[ax] = ranges[ax].0;
                    ax += 1;
                }
            }
        };

        let mut offsets = vec![0usize; buckets + 1];
        for (lo, hi) in &boxes {
            visit(lo, hi, &mut |b| offsets[b + 1] += 1);
        }
        for b in 0..buckets {
            offsets[b + 1] += offsets[b];
        }
        let mut fill = offsets.clone();
        let mut ids = vec![0usize; offsets[buckets]];
        for (id, (lo, hi)) in t.live_ids().zip(&boxes) {
            visit(lo, hi, &mut |b| {
                ids[fill[b]] = id;
                fill[b] += 1;
            });
        }

        Ok(Self {
            mins: dom.mins.clone(),
            maxs: dom.maxs.clone(),
            spacing: layout.spacing,
            resolution: layout.resolution,
            offsets,
            ids,
            stamp: t.slot_count() as u64,
        })
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn bucket_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Mean number of candidate simplices per bucket.
    pub fn mean_candidates(&self) -> f64 {
        self.ids.len() as f64 / self.bucket_count() as f64
    }

    /// Lowest live simplex id whose barycentric weights at `p` are all at
    /// least `-1e-12`.
    pub fn locate(&self, t: &Tessellation, p: &[f64]) -> Result<usize> {
        let current = t.slot_count() as u64;
        if current != self.stamp {
            return Err(MeshError::StaleLocator { built: self.stamp, current });
        }
        let d = self.resolution.len();
        if p.len() != d {
            return Err(MeshError::InvalidInput(format!("{}-D point for a {d}-D locator", p.len())));
        }
        let mut ranges = Vec::with_capacity(d);
        for ax in 0..d {
            let ext = self.maxs[ax] - self.mins[ax];
            let x = p[ax];
            if !x.is_finite() || x < self.mins[ax] - SNAP * ext || x > self.maxs[ax] + SNAP * ext {
                return Err(MeshError::NotFound(p.to_vec()));
            }
            let q = (x - self.mins[ax]) / self.spacing[ax];
            let r = self.resolution[ax] as f64 - 1.0;
            let a = (q - SNAP).floor().clamp(0.0, r) as usize;
            let b = (q + SNAP).floor().clamp(0.0, r) as usize;
            ranges.push((a, b));
        }

        let mut buckets = vec![0usize];
        let mut stride = 1;
        for (ax, &(a, b)) in ranges.iter().enumerate() {
            let mut next = Vec::with_capacity(buckets.len() * (b - a + 1));
            for base in &buckets {
                for i in a..=b {
                    next.push(base + i * stride);
                }
            }
            buckets = next;
            stride *= self.resolution[ax];
        }

        let contains = |id: usize| {
            geometry::barycentric_weights(&t.simplex_vertices(id), p).map(|w| w.is_inside(INSIDE_TOL)).unwrap_or(false)
        };
        if buckets.len() == 1 {
            let b = buckets[0];
            return self.ids[self.offsets[b]..self.offsets[b + 1]]
                .iter()
                .copied()
                .find(|&id| contains(id))
                .ok_or_else(|| MeshError::NotFound(p.to_vec()));
        }
        let mut cands: Vec<usize> =
            buckets.iter().flat_map(|&b| self.ids[self.offsets[b]..self.offsets[b + 1]].iter().copied()).collect();
        cands.sort_unstable();
        cands.dedup();
        cands.into_iter().find(|&id| contains(id)).ok_or_else(|| MeshError::NotFound(p.to_vec()))
    }
}
