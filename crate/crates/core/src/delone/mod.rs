//! Delone point sets in one and two dimensions.
//!
//! A Delone set here is a finite point cloud in a box window together
//! with a verified packing radius r (exact minimum pairwise distance)
//! and covering radius R. In 1D the covering radius is exact from the
//! sorted gap scan; in 2D it is probed on a uniform grid of pitch at
//! most R/4, which certifies the reported value as correct on the probe
//! grid and the true radius as at most R + pitch*sqrt(2)/2. Adjacency
//! between points is Voronoi adjacency: cells sharing a face of positive
//! length, obtained from the Delaunay triangulation with degenerate-face
//! filtering.

pub mod predicates;
pub mod triangulate;

use serde::{Deserialize, Serialize};

use crate::error::Error;

use triangulate::{delaunay, positive_face_edges};

/// Validated point set with its Delone certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct DeloneSet {
    dim: usize,
    /// Always stored 2D; the second coordinate is 0 for 1D sets.
    points: Vec<[f64; 2]>,
    /// Per-axis [low, high]; axis 1 is [0, 0] for 1D sets.
    window: [[f64; 2]; 2],
    r_packing: f64,
    r_covering: f64,
}

impl DeloneSet {
    pub fn new_1d(xs: &[f64], window: [f64; 2]) -> Result<Self, Error> {
        let points: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        Self::build(1, points, [window, [0.0, 0.0]])
    }

    pub fn new_2d(points: Vec<[f64; 2]>, window: [[f64; 2]; 2]) -> Result<Self, Error> {
        Self::build(2, points, window)
    }

    fn build(dim: usize, points: Vec<[f64; 2]>, window: [[f64; 2]; 2]) -> Result<Self, Error> {
        if points.len() < 2 {
            return Err(Error::domain("a Delone set needs at least two points"));
        }
        for axis in 0..dim {
            let [lo, hi] = window[axis];
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::domain("window bounds must be finite"));
            }
            if hi <= lo {
                return Err(Error::degeneracy("window has no volume"));
            }
        }
        for p in &points {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::domain("points must be finite"));
            }
            for axis in 0..dim {
                if p[axis] < window[axis][0] || p[axis] > window[axis][1] {
                    return Err(Error::domain("point outside the window"));
                }
            }
        }
        let (r_packing, r_covering) = validate_delone(dim, &points, &window)?;
        Ok(DeloneSet {
            dim,
            points,
            window,
            r_packing,
            r_covering,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn window(&self) -> [[f64; 2]; 2] {
        self.window
    }

    pub fn r_packing(&self) -> f64 {
        self.r_packing
    }

    pub fn r_covering(&self) -> f64 {
        self.r_covering
    }

    /// Distance from a point of the set to the window boundary.
    pub fn boundary_distance(&self, index: usize) -> f64 {
        let p = self.points[index];
        let mut d = f64::INFINITY;
        for axis in 0..self.dim {
            d = d.min(p[axis] - self.window[axis][0]);
            d = d.min(self.window[axis][1] - p[axis]);
        }
        d
    }

    pub fn to_json(&self) -> String {
        let doc = DeloneJson {
            dim: self.dim,
            window: self.window[..self.dim].to_vec(),
            points: self
                .points
                .iter()
                .map(|p| p[..self.dim].to_vec())
                .collect(),
            r_packing: self.r_packing,
            r_covering: self.r_covering,
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    /// Parse and revalidate. The stored certificate must match what the
    /// point set actually satisfies.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: DeloneJson =
            serde_json::from_str(text).map_err(|e| Error::format(format!("delone json: {e}")))?;
        if doc.window.len() != doc.dim {
            return Err(Error::format("window rank does not match dim"));
        }
        let set = match doc.dim {
            1 => {
                let xs: Result<Vec<f64>, Error> = doc
                    .points
                    .iter()
                    .map(|row| {
                        if row.len() == 1 {
                            Ok(row[0])
                        } else {
                            Err(Error::format("1d point row must have one coordinate"))
                        }
                    })
                    .collect();
                Self::new_1d(&xs?, doc.window[0])
            }
            2 => {
                let pts: Result<Vec<[f64; 2]>, Error> = doc
                    .points
                    .iter()
                    .map(|row| {
                        if row.len() == 2 {
                            Ok([row[0], row[1]])
                        } else {
                            Err(Error::format("2d point row must have two coordinates"))
                        }
                    })
                    .collect();
                Self::new_2d(pts?, [doc.window[0], doc.window[1]])
            }
            other => Err(Error::format(format!("unsupported dim {other}"))),
        }?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        if !close(set.r_packing, doc.r_packing) || !close(set.r_covering, doc.r_covering) {
            return Err(Error::format(
                "stored (r, R) certificate does not match the point set",
            ));
        }
        Ok(set)
    }

    /// Points as CSV, one row per point, header names the coordinates.
    pub fn points_to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(if self.dim == 1 { "x\n" } else { "x,y\n" });
        for p in &self.points {
            if self.dim == 1 {
                out.push_str(&format!("{}\n", p[0]));
            } else {
                out.push_str(&format!("{},{}\n", p[0], p[1]));
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeloneJson {
    dim: usize,
    window: Vec<[f64; 2]>,
    points: Vec<Vec<f64>>,
    r_packing: f64,
    r_covering: f64,
}

/// Parse a points CSV written by [`DeloneSet::points_to_csv`]; returns
/// the dimension implied by the header and the coordinate rows.
pub fn points_from_csv(text: &str) -> Result<(usize, Vec<Vec<f64>>), Error> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::format("empty points csv"))?;
    let dim = match header.trim() {
        "x" => 1,
        "x,y" => 2,
        other => return Err(Error::format(format!("unrecognized header {other:?}"))),
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(Error::format(format!(
                "row {} has {} fields, expected {dim}",
                k + 2,
                fields.len()
            )));
        }
        let mut row = Vec::new();
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("row {}: bad number {f:?}", k + 2)))?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok((dim, rows))
}

/// Compute the (r, R) certificate for a point cloud in a window.
///
/// r is the exact minimum pairwise distance (coincident points are a
/// degeneracy error). R is exact in 1D; in 2D it is the maximum over a
/// window-filling probe grid, refined until the pitch is at most R/4.
pub fn validate_delone(
    dim: usize,
    points: &[[f64; 2]],
    window: &[[f64; 2]; 2],
) -> Result<(f64, f64), Error> {
    match dim {
        1 => {
            let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
            xs.sort_by(f64::total_cmp);
            let mut min_gap = f64::INFINITY;
            let mut max_half_gap = 0.0_f64;
            for w in xs.windows(2) {
                let g = w[1] - w[0];
                min_gap = min_gap.min(g);
                max_half_gap = max_half_gap.max(g / 2.0);
            }
            if min_gap == 0.0 {
                return Err(Error::degeneracy("duplicate points"));
            }
            let r_cov = max_half_gap
                .max(xs[0] - window[0][0])
                .max(window[0][1] - xs[xs.len() - 1]);
            Ok((min_gap, r_cov))
        }
        2 => {
            let r_pack = min_pairwise_distance(points)?;
            let r_cov = covering_radius_2d(points, window)?;
            Ok((r_pack, r_cov))
        }
        other => Err(Error::domain(format!("unsupported dimension {other}"))),
    }
}

/// Exact minimum pairwise distance via the sorted-strip sweep.
fn min_pairwise_distance(points: &[[f64; 2]]) -> Result<f64, Error> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].partial_cmp(&points[j]).expect("finite"));
    let mut best_sq = f64::INFINITY;
    for a in 0..order.len() {
        let p = points[order[a]];
        for &jb in &order[a + 1..] {
            let q = points[jb];
            let dx = q[0] - p[0];
            if dx * dx >= best_sq {
                break;
            }
            let dy = q[1] - p[1];
            let d_sq = dx * dx + dy * dy;
            if d_sq < best_sq {
                best_sq = d_sq;
            }
        }
    }
    if best_sq == 0.0 {
        return Err(Error::degeneracy("duplicate points"));
    }
    Ok(best_sq.sqrt())
}

fn covering_radius_2d(points: &[[f64; 2]], window: &[[f64; 2]; 2]) -> Result<f64, Error> {
    let side0 = window[0][1] - window[0][0];
    let side1 = window[1][1] - window[1][0];
    let mut pitch = side0.max(side1) / 8.0;
    let mut radius = 0.0;
    for _ in 0..12 {
        radius = probe_grid_max(points, window, pitch)?;
        if pitch <= radius / 4.0 {
            return Ok(radius);
        }
        pitch = radius / 4.5;
    }
    Ok(radius)
}

/// Largest distance from a probe to its nearest point, probing an even
/// subdivision of each side (even counts put a probe on the window
/// center, which is where the maximum sits for lattices).
fn probe_grid_max(points: &[[f64; 2]], window: &[[f64; 2]; 2], pitch: f64) -> Result<f64, Error> {
    let mut counts = [0usize; 2];
    for axis in 0..2 {
        let side = window[axis][1] - window[axis][0];
        let mut m = (side / pitch).ceil() as usize;
        if m % 2 == 1 {
            m += 1;
        }
        if m > 4000 {
            return Err(Error::size(
                "covering-radius probe grid exceeds 4000 per axis",
            ));
        }
        counts[axis] = m;
    }
    let mut worst_sq = 0.0_f64;
    for i in 0..=counts[0] {
        let x = window[0][0] + (window[0][1] - window[0][0]) * i as f64 / counts[0] as f64;
        for j in 0..=counts[1] {
            let y = window[1][0] + (window[1][1] - window[1][0]) * j as f64 / counts[1] as f64;
            let mut near_sq = f64::INFINITY;
            for p in points {
                let dx = p[0] - x;
                let dy = p[1] - y;
                let d_sq = dx * dx + dy * dy;
                if d_sq < near_sq {
                    near_sq = d_sq;
                }
            }
            if near_sq > worst_sq {
                worst_sq = near_sq;
            }
        }
    }
    Ok(worst_sq.sqrt())
}

/// Model chain with gaps 1 and the golden ratio: the cut-and-project
/// Fibonacci quasicrystal x_n = n + floor(n/phi + phase) * (phi - 1).
pub fn fibonacci_chain(count: usize, phase: f64) -> Result<DeloneSet, Error> {
    if count < 2 {
        return Err(Error::domain("chain needs at least two points"));
    }
    if !phase.is_finite() {
        return Err(Error::domain("phase must be finite"));
    }
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let xs: Vec<f64> = (0..count)
        .map(|n| {
            let n = n as f64;
            n + (n / phi + phase).floor() * (phi - 1.0)
        })
        .collect();
    let window = [xs[0], xs[count - 1]];
    DeloneSet::new_1d(&xs, window)
}

/// Square lattice with independent uniform displacements in
/// [-amplitude, amplitude]^2, drawn per site from the coordinate-keyed
/// stream so the same seed always yields the same cloud. Displacements
/// below 1/2 keep the set Delone with r >= 1 - 2*amplitude.
pub fn perturbed_lattice(
    nx: usize,
    ny: usize,
    amplitude: f64,
    seed: u64,
) -> Result<DeloneSet, Error> {
    if nx < 2 || ny < 1 {
        return Err(Error::domain("lattice needs at least a 2 x 1 grid"));
    }
    if !(0.0..0.5).contains(&amplitude) {
        return Err(Error::domain("amplitude must lie in [0, 1/2)"));
    }
    let mut points = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let mut p = [i as f64, j as f64];
            for axis in 0..2 {
                let bits = crate::rng::coordinate_value(seed, &[i as i64, j as i64, axis as i64]);
                p[axis as usize] += crate::rng::uniform_f64(bits, -amplitude, amplitude);
            }
            points.push(p);
        }
    }
    let window = [
        [-0.5, nx as f64 - 0.5],
        [-0.5, ny as f64 - 0.5],
    ];
    DeloneSet::new_2d(points, window)
}

/// Voronoi adjacency of a Delone set.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiAdjacency {
    n: usize,
    /// Undirected pairs (i < j), sorted.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    boundary: Vec<bool>,
}

impl VoronoiAdjacency {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// True when the point sits within 2R of the window boundary. The
    /// Voronoi cell of any deeper point is contained in the R-ball
    /// around it, so its cell and face structure cannot depend on the
    /// window at all.
    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.boundary[i]).collect()
    }
}

pub fn voronoi_adjacency(set: &DeloneSet) -> Result<VoronoiAdjacency, Error> {
    let n = set.len();
    let margin = 2.0 * set.r_covering();
    let boundary: Vec<bool> = (0..n).map(|i| set.boundary_distance(i) <= margin).collect();
    let edges: Vec<(usize, usize)> = match set.dim() {
        1 => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| set.points()[i][0].partial_cmp(&set.points()[j][0]).expect("finite"));
            let mut e: Vec<(usize, usize)> = order
                .windows(2)
                .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
                .collect();
            e.sort_unstable();
            e
        }
        _ => {
            let tri = delaunay(set.points())?;
            positive_face_edges(set.points(), &tri, set.r_packing())
        }
    };
    let mut neighbors = vec![Vec::new(); n];
    for &(i, j) in &edges {
        neighbors[i].push(j);
        neighbors[j].push(i);
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }
    Ok(VoronoiAdjacency {
        n,
        edges,
        neighbors,
        boundary,
    })
}

/// Points per unit window volume.
pub fn point_density(set: &DeloneSet) -> Result<f64, Error> {
    let mut volume = 1.0;
    for axis in 0..set.dim() {
        let [lo, hi] = set.window()[axis];
        let side = hi - lo;
        if side <= 0.0 {
            return Err(Error::degeneracy("window has no volume"));
        }
        volume *= side;
    }
    Ok(set.len() as f64 / volume)
}
