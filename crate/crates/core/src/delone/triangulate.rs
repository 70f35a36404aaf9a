//! Planar Delaunay triangulation by gift wrapping.
//!
//! For a directed edge (a, b) the circumcircles through a and b form a
//! pencil, totally ordered along the edge normal; the Delaunay apex on
//! the left side is the pencil minimum, so a single linear scan with the
//! in-circle predicate finds it. Quadratic overall, which is fine at the
//! few thousand points this crate targets, and every branch is decided
//! by an exact predicate so the walk cannot stall or emit overlapping
//! triangles. Cocircular families (square lattices) are resolved by the
//! index-keyed perturbation in [`super::predicates`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::Error;

use super::predicates::{incircle_sos, orient2d, Point};

#[derive(Debug, Clone)]
pub struct Triangulation {
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Undirected edges (i < j), sorted.
    pub edges: Vec<(usize, usize)>,
}

impl Triangulation {
    /// Map from undirected edge to the indices of its incident triangles
    /// (one entry for hull edges, two for interior edges).
    pub fn edge_triangles(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                let key = (u.min(v), u.max(v));
                map.entry(key).or_default().push(t);
            }
        }
        map
    }
}

/// Compare two points collinear with a common origin by distance along
/// the line. Pure coordinate comparisons, no arithmetic that could round.
fn collinear_closer(origin: Point, p: Point, q: Point) -> bool {
    let (dpx, dpy) = ((p[0] - origin[0]).abs(), (p[1] - origin[1]).abs());
    let (dqx, dqy) = ((q[0] - origin[0]).abs(), (q[1] - origin[1]).abs());
    if dpx != dqx {
        dpx < dqx
    } else {
        dpy < dqy
    }
}

/// Delaunay triangulation of a planar point set. Duplicate points are the
/// caller's problem; Delone set construction rejects them before this
/// runs. Fully collinear inputs yield the path of consecutive edges and
/// no triangles.
pub fn delaunay(points: &[Point]) -> Result<Triangulation, Error> {
    let n = points.len();
    for p in points {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::domain("triangulation input must be finite"));
        }
    }
    if n < 2 {
        return Ok(Triangulation {
            triangles: Vec::new(),
            edges: Vec::new(),
        });
    }

    // lexicographic minimum is a hull vertex
    let p0 = (0..n)
        .min_by(|&i, &j| {
            points[i]
                .partial_cmp(&points[j])
                .expect("finite coordinates")
        })
        .expect("nonempty");

    // hull neighbor of p0: no point strictly to its right, nearest among
    // collinear candidates
    let mut p1 = if p0 == 0 { 1 } else { 0 };
    for q in 0..n {
        if q == p0 || q == p1 {
            continue;
        }
        match orient2d(points[p0], points[p1], points[q]) {
            -1 => p1 = q,
            0 => {
                if collinear_closer(points[p0], points[q], points[p1]) {
                    p1 = q;
                }
            }
            _ => {}
        }
    }

    let degenerate = (0..n).all(|q| orient2d(points[p0], points[p1], points[q]) == 0);
    if degenerate {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            points[i]
                .partial_cmp(&points[j])
                .expect("finite coordinates")
        });
        let mut edges: Vec<(usize, usize)> = order
            .windows(2)
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .collect();
        edges.sort_unstable();
        return Ok(Triangulation {
            triangles: Vec::new(),
            edges,
        });
    }

    // directed edge (a, b) queued means: the region to the left of a->b
    // may be unexplored; resolved means its left triangle (or hull
    // status) is known, so a queued copy discovered from the other side
    // must be skipped rather than re-derived
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    let mut enqueued: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut resolved: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    queue.push_back((p0, p1));
    enqueued.insert((p0, p1));

    while let Some((a, b)) = queue.pop_front() {
        if resolved.contains(&(a, b)) {
            continue;
        }
        // pencil minimum among points strictly left of a->b
        let mut best: Option<usize> = None;
        for q in 0..n {
            if q == a || q == b {
                continue;
            }
            if orient2d(points[a], points[b], points[q]) != 1 {
                continue;
            }
            best = match best {
                None => Some(q),
                Some(c) => {
                    if incircle_sos(
                        [points[a], points[b], points[c], points[q]],
                        [a, b, c, q],
                    ) == 1
                    {
                        Some(q)
                    } else {
                        Some(c)
                    }
                }
            };
        }
        let Some(c) = best else {
            resolved.insert((a, b)); // hull edge: nothing on the left
            continue;
        };
        triangles.push([a, b, c]);
        for edge in [(a, b), (b, c), (c, a)] {
            resolved.insert(edge);
        }
        for rev in [(c, b), (a, c)] {
            if !resolved.contains(&rev) && enqueued.insert(rev) {
                queue.push_back(rev);
            }
        }
    }

    let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for tri in &triangles {
        for k in 0..3 {
            let (u, v) = (tri[k], tri[(k + 1) % 3]);
            edge_set.insert((u.min(v), u.max(v)));
        }
    }
    Ok(Triangulation {
        triangles,
        edges: edge_set.into_iter().collect(),
    })
}

/// Circumcenter of a non-degenerate triangle, computed in the frame of
/// its first vertex so lattice inputs stay exact regardless of offset.
pub fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let bx = b[0] - a[0];
    let by = b[1] - a[1];
    let cx = c[0] - a[0];
    let cy = c[1] - a[1];
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let d = 2.0 * (bx * cy - by * cx);
    let ux = (b2 * cy - c2 * by) / d;
    let uy = (c2 * bx - b2 * cx) / d;
    [a[0] + ux, a[1] + uy]
}

/// Delaunay edges whose shared Voronoi face has positive length.
///
/// An interior Delaunay edge is dual to the segment between the two
/// circumcenters of its flanking triangles; when a cocircular tie was
/// broken symbolically (the diagonals of a square lattice cell) that
/// segment degenerates to a point and the cells only touch at a corner,
/// so the edge is dropped. Hull edges are dual to unbounded faces and
/// always kept.
pub fn positive_face_edges(
    points: &[Point],
    triangulation: &Triangulation,
    r_packing: f64,
) -> Vec<(usize, usize)> {
    let threshold = 1e-9 * r_packing;
    let incidence = triangulation.edge_triangles();
    let mut kept = Vec::new();
    for (edge, tris) in &incidence {
        if tris.len() == 1 {
            kept.push(*edge);
            continue;
        }
        let centers: Vec<Point> = tris
            .iter()
            .map(|&t| {
                let [a, b, c] = triangulation.triangles[t];
                circumcenter(points[a], points[b], points[c])
            })
            .collect();
        let dx = centers[0][0] - centers[1][0];
        let dy = centers[0][1] - centers[1][1];
        if (dx * dx + dy * dy).sqrt() > threshold {
            kept.push(*edge);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: i64, ny: i64, offset: [f64; 2]) -> Vec<Point> {
        let mut pts = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                pts.push([i as f64 + offset[0], j as f64 + offset[1]]);
            }
        }
        pts
    }

    /// Every triangle CCW; every non-vertex point strictly outside its
    /// perturbed circumcircle; interior edges in exactly 2 triangles.
    fn assert_delaunay(points: &[Point], tri: &Triangulation) {
        for t in &tri.triangles {
            assert_eq!(
                orient2d(points[t[0]], points[t[1]], points[t[2]]),
                1,
                "triangle {t:?} not counterclockwise"
            );
            for q in 0..points.len() {
                if t.contains(&q) {
                    continue;
                }
                assert_eq!(
                    incircle_sos(
                        [points[t[0]], points[t[1]], points[t[2]], points[q]],
                        [t[0], t[1], t[2], q],
                    ),
                    -1,
                    "point {q} not outside circle of {t:?}"
                );
            }
        }
        for (edge, tris) in tri.edge_triangles() {
            assert!(
                tris.len() <= 2,
                "edge {edge:?} in {} triangles",
                tris.len()
            );
        }
    }

    #[test]
    fn two_points_single_edge() {
        let tri = delaunay(&[[0.0, 0.0], [2.0, 1.0]]).unwrap();
        assert!(tri.triangles.is_empty());
        assert_eq!(tri.edges, vec![(0, 1)]);
    }

    #[test]
    fn collinear_points_become_a_path() {
        let pts = vec![[3.0, 3.0], [0.0, 0.0], [2.0, 2.0], [1.0, 1.0], [4.0, 4.0]];
        let tri = delaunay(&pts).unwrap();
        assert!(tri.triangles.is_empty());
        assert_eq!(tri.edges, vec![(0, 2), (0, 4), (1, 3), (2, 3)]);
    }

    #[test]
    fn triangle_plus_interior_point() {
        let pts = vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [1.0, 1.0]];
        let tri = delaunay(&pts).unwrap();
        assert_eq!(tri.triangles.len(), 3);
        assert_eq!(tri.edges.len(), 6);
        assert_delaunay(&pts, &tri);
    }

    #[test]
    fn grid_3x3_euler_counts() {
        let pts = grid(3, 3, [0.0, 0.0]);
        let tri = delaunay(&pts).unwrap();
        // n = 9 points, 8 on the hull: 2n - 2 - h triangles, 3n - 3 - h edges
        assert_eq!(tri.triangles.len(), 8);
        assert_eq!(tri.edges.len(), 16);
        assert_delaunay(&pts, &tri);
    }

    #[test]
    fn grid_4x4_cocircular_stress() {
        let pts = grid(4, 4, [0.0, 0.0]);
        let tri = delaunay(&pts).unwrap();
        assert_eq!(tri.triangles.len(), 18);
        assert_eq!(tri.edges.len(), 33);
        assert_delaunay(&pts, &tri);
    }

    #[test]
    fn face_filter_drops_square_diagonals() {
        for offset in [[0.0, 0.0], [137.0, -86.0]] {
            let pts = grid(4, 4, offset);
            let tri = delaunay(&pts).unwrap();
            let kept = positive_face_edges(&pts, &tri, 0.5);
            // 4x4 grid has 24 axis-aligned unit edges; all 9 diagonals go
            let expected: BTreeSet<(usize, usize)> = {
                let mut s = BTreeSet::new();
                for i in 0..4usize {
                    for j in 0..4usize {
                        let id = i * 4 + j;
                        if j + 1 < 4 {
                            s.insert((id, id + 1));
                        }
                        if i + 1 < 4 {
                            s.insert((id, id + 4));
                        }
                    }
                }
                s
            };
            let got: BTreeSet<(usize, usize)> = kept.into_iter().collect();
            assert_eq!(got, expected, "offset {offset:?}");
        }
    }

    #[test]
    fn random_sets_satisfy_empty_circle() {
        // xorshift-style scramble, fixed seeds, no external rng
        for seed in [1u64, 2, 3, 4, 5] {
            let mut state = seed;
            let mut next = || {
                state = crate::rng::mix64(state.wrapping_add(0x9E37_79B9_7F4A_7C15));
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let pts: Vec<Point> = (0..40).map(|_| [next() * 10.0, next() * 10.0]).collect();
            let tri = delaunay(&pts).unwrap();
            assert!(!tri.triangles.is_empty());
            assert_delaunay(&pts, &tri);
            // hull edge count from incidence agrees with Euler's relation
            let hull = tri
                .edge_triangles()
                .values()
                .filter(|v| v.len() == 1)
                .count();
            assert_eq!(tri.triangles.len(), 2 * pts.len() - 2 - hull);
            assert_eq!(tri.edges.len(), 3 * pts.len() - 3 - hull);
        }
    }

    #[test]
    fn circumcenter_of_right_triangle() {
        let cc = circumcenter([0.0, 0.0], [2.0, 0.0], [0.0, 2.0]);
        assert_eq!(cc, [1.0, 1.0]);
        let shifted = circumcenter([100.0, 50.0], [102.0, 50.0], [100.0, 52.0]);
        assert_eq!(shifted, [101.0, 51.0]);
    }

    #[test]
    fn nonfinite_input_rejected() {
        assert!(delaunay(&[[0.0, 0.0], [f64::NAN, 1.0]]).is_err());
    }
}
