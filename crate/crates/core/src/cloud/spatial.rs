//! Exact k-nearest-neighbour queries and farthest point sampling.
//!
//! Neighbour order is `(squared distance, index)` ascending everywhere, so
//! ties always resolve to the smaller index.

use std::cmp::Ordering;

use super::{dist2, Point, PointCloud};
use crate::error::{Error, Result};
use crate::par;

/// Below this size kNN scans all pairs.
const BRUTE_FORCE_MAX: usize = 256;

/// For every point, its `k` nearest other points.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodIndex {
    k: usize,
    neighbors: Vec<usize>,
    dists: Vec<f64>,
}

impl NeighborhoodIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.neighbors.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j * self.k..(j + 1) * self.k]
    }

    /// Euclidean distances matching [`Self::neighbors`].
    pub fn distances(&self, j: usize) -> &[f64] {
        &self.dists[j * self.k..(j + 1) * self.k]
    }

    fn from_lists(k: usize, lists: Vec<Vec<(f64, usize)>>) -> Self {
        let mut neighbors = Vec::with_capacity(lists.len() * k);
        let mut dists = Vec::with_capacity(lists.len() * k);
        for list in lists {
            debug_assert_eq!(list.len(), k);
            for (d2, i) in list {
                neighbors.push(i);
                dists.push(d2.sqrt());
            }
        }
        Self { k, neighbors, dists }
    }
}

#[inline]
fn cmp_candidate(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Exact kNN over `cloud`, self excluded.
pub fn knn(cloud: &PointCloud, k: usize) -> Result<NeighborhoodIndex> {
    let m = cloud.len();
    if k == 0 || k >= m {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            lo: 1,
            hi: m.saturating_sub(1),
        });
    }
    if m <= BRUTE_FORCE_MAX {
        return knn_brute_force(cloud, k);
    }
    let grid = PointGrid::new(cloud.points(), k);
    let lists = par::map_range(m, |j| grid.k_nearest(cloud.point(j), k, Some(j)));
    Ok(NeighborhoodIndex::from_lists(k, lists))
}

/// All-pairs kNN. Exposed so the grid path can be checked against it.
pub fn knn_brute_force(cloud: &PointCloud, k: usize) -> Result<NeighborhoodIndex> {
    let m = cloud.len();
    if k == 0 || k >= m {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            lo: 1,
            hi: m.saturating_sub(1),
        });
    }
    let pts = cloud.points();
    let lists = par::map_range(m, |j| {
        let mut cand: Vec<(f64, usize)> = (0..m)
            .filter(|&i| i != j)
            .map(|i| (dist2(&pts[i], &pts[j]), i))
            .collect();
        cand.select_nth_unstable_by(k - 1, cmp_candidate);
        cand.truncate(k);
        cand.sort_unstable_by(cmp_candidate);
        cand
    });
    Ok(NeighborhoodIndex::from_lists(k, lists))
}

/// Uniform bucket grid for exact nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct PointGrid<'a> {
    points: &'a [Point],
    origin: Point,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> PointGrid<'a> {
    /// `per_cell` is the rough number of points a query is expected to need.
    pub fn new(points: &'a [Point], per_cell: usize) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = hi - lo;
        let longest = extent.max();
        // Surfaces fill roughly six faces of the bounding grid.
        let target_cells = (points.len() as f64 / per_cell.max(1) as f64 * 6.0).max(1.0);
        let per_axis = target_cells.sqrt().clamp(1.0, 96.0);
        let cell = if longest > 0.0 { longest / per_axis } else { 1.0 };
        let dims = [0, 1, 2].map(|a| ((extent[a] / cell).floor() as usize + 1).min(128));
        let n_cells = dims[0] * dims[1] * dims[2];

        let mut counts = vec![0usize; n_cells + 1];
        let cell_ids: Vec<usize> = points
            .iter()
            .map(|p| {
                let c = Self::coords_of(p, &lo, cell, &dims);
                (c[2] * dims[1] + c[1]) * dims[0] + c[0]
            })
            .collect();
        for &c in &cell_ids {
            counts[c + 1] += 1;
        }
        for i in 0..n_cells {
            counts[i + 1] += counts[i];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0; points.len()];
        for (i, &c) in cell_ids.iter().enumerate() {
            items[fill[c]] = i;
            fill[c] += 1;
        }
        Self {
            points,
            origin: lo,
            cell,
            dims,
            starts,
            items,
        }
    }

    fn coords_of(p: &Point, origin: &Point, cell: f64, dims: &[usize; 3]) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - origin[a]) / cell).floor();
            if c <= 0.0 {
                0
            } else {
                (c as usize).min(dims[a] - 1)
            }
        })
    }

    fn bucket(&self, c: [usize; 3]) -> &[usize] {
        let id = (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0];
        &self.items[self.starts[id]..self.starts[id + 1]]
    }

    /// Visits every cell whose Chebyshev distance from `center` is exactly `r`.
    fn for_ring(&self, center: [isize; 3], r: isize, mut f: impl FnMut([usize; 3])) {
        let d = self.dims.map(|x| x as isize);
        for z in center[2] - r..=center[2] + r {
            if z < 0 || z >= d[2] {
                continue;
            }
            for y in center[1] - r..=center[1] + r {
                if y < 0 || y >= d[1] {
                    continue;
                }
                let on_shell_zy = (z - center[2]).abs() == r || (y - center[1]).abs() == r;
                let mut x = center[0] - r;
                while x <= center[0] + r {
                    if x >= 0 && x < d[0] {
                        f([x as usize, y as usize, z as usize]);
                    }
                    // Interior rows only touch the two end cells.
                    x += if on_shell_zy || r == 0 { 1 } else { 2 * r };
                }
            }
        }
    }

    /// The `k` nearest points to `q` ordered by `(distance, index)`,
    /// skipping `exclude`. Returns squared distances.
    pub fn k_nearest(&self, q: &Point, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let available = self.points.len() - usize::from(exclude.is_some());
        let k = k.min(available);
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k == 0 {
            return best;
        }
        let c = Self::coords_of(q, &self.origin, self.cell, &self.dims).map(|x| x as isize);
        let max_r = *self.dims.iter().max().unwrap() as isize;
        for r in 0..=max_r {
            self.for_ring(c, r, |cell| {
                for &i in self.bucket(cell) {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = (dist2(&self.points[i], q), i);
                    if best.len() == k && cmp_candidate(&cand, &best[k - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = best
                        .binary_search_by(|b| cmp_candidate(b, &cand))
                        .unwrap_or_else(|e| e);
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            });
            // Every unvisited point is at least r * cell away.
            if best.len() == k {
                let reach = r as f64 * self.cell;
                if best[k - 1].0 < reach * reach {
                    break;
                }
            }
        }
        best
    }

    /// Nearest point to `q` as `(squared distance, index)`.
    pub fn nearest(&self, q: &Point) -> (f64, usize) {
        self.k_nearest(q, 1, None)[0]
    }
}

/// Farthest point sampling. The first pick is `seed mod m`; each next pick
/// maximises the distance to the picked set, ties to the smaller index.
pub fn fps(cloud: &PointCloud, n: usize, seed: u64) -> Result<Vec<usize>> {
    let m = cloud.len();
    if n == 0 || n > m {
        return Err(Error::OutOfRange {
            what: "n",
            value: n,
            lo: 1,
            hi: m,
        });
    }
    let pts = cloud.points();
    let first = (seed % m as u64) as usize;
    let mut picked = Vec::with_capacity(n);
    let mut taken = vec![false; m];
    let mut min_d2 = vec![f64::INFINITY; m];
    let mut current = first;
    loop {
        picked.push(current);
        taken[current] = true;
        if picked.len() == n {
            break;
        }
        let anchor = pts[current];
        let mut next = usize::MAX;
        let mut next_d = f64::NEG_INFINITY;
        for i in 0..m {
            let d = dist2(&pts[i], &anchor);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
            if !taken[i] && min_d2[i] > next_d {
                next_d = min_d2[i];
                next = i;
            }
        }
        current = next;
    }
    Ok(picked)
}
