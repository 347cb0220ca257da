//! Uniform-grid neighbor search.

use std::collections::HashMap;

use crate::geometry::Vec2;

/// Below this many points a linear scan beats hashing.
const LINEAR_SCAN_MAX: usize = 48;

/// Buckets point indices into square cells of side `cell_size`.
#[derive(Debug, Clone)]
pub struct NeighborGrid {
    cell_size: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    linear: bool,
}

impl NeighborGrid {
    pub fn build(points: impl IntoIterator<Item = Vec2>, cell_size: f64) -> Self {
        let cell_size = if cell_size.is_finite() && cell_size > 0.0 { cell_size } else { 1.0 };
        let points: Vec<Vec2> = points.into_iter().collect();
        let linear = points.len() <= LINEAR_SCAN_MAX;
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        if !linear {
            for (i, p) in points.iter().enumerate() {
                cells.entry(Self::key(*p, cell_size)).or_default().push(i);
            }
        }
        Self { cell_size, cells, linear }
    }

    fn key(p: Vec2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Indices of points within `radius` of `center` (excluding `skip`), ascending.
    pub fn query(&self, points: &[Vec2], center: Vec2, radius: f64, skip: Option<usize>, out: &mut Vec<usize>) {
        out.clear();
        let r_sq = radius * radius;
        if self.linear {
            for (j, p) in points.iter().enumerate() {
                if Some(j) != skip && p.distance_squared(center) <= r_sq {
                    out.push(j);
                }
            }
            return;
        }
        let reach = (radius / self.cell_size).ceil().max(1.0) as i64;
        let (cx, cy) = Self::key(center, self.cell_size);
        // Very large radii relative to the cell size: scan every cell instead.
        if (2 * reach + 1).pow(2) as usize > self.cells.len() {
            for bucket in self.cells.values() {
                Self::collect(bucket, points, center, r_sq, skip, out);
            }
        } else {
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                        Self::collect(bucket, points, center, r_sq, skip, out);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    fn collect(bucket: &[usize], points: &[Vec2], center: Vec2, r_sq: f64, skip: Option<usize>, out: &mut Vec<usize>) {
        for &j in bucket {
            if Some(j) != skip && points[j].distance_squared(center) <= r_sq {
                out.push(j);
            }
        }
    }
}
