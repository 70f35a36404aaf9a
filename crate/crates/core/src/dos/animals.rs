//! Lattice-animal (polyomino) enumeration and the finite-cluster atoms of
//! the percolation density of states.
//!
//! Under site percolation at density p on the square lattice, a finite
//! occupied cluster congruent to a fixed shape S (a specific translate
//! class) appears with density p^|S| (1-p)^perimeter(S) per lattice site,
//! where the perimeter counts the distinct empty neighbor cells that keep
//! the cluster from growing. Every eigenvalue of the shape's adjacency
//! matrix has an eigenfunction supported on that cluster alone, so each
//! one contributes an atom to the integrated density of states with
//! per-site weight
//!
//! ```text
//! orientations(S) * p^|S| * (1-p)^perimeter(S)
//! ```
//!
//! per unit of spectral multiplicity, where orientations counts the
//! distinct fixed forms of the free (rotation/reflection) class. This
//! module enumerates every free shape up to a size cap, computes the
//! spectra exactly, and aggregates the predicted atoms.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::Error;
use crate::linalg::DenseMatrix;

/// Hard enumeration cap: 8 cells (369 free shapes, 2725 fixed) keeps the
/// enumeration and the per-shape eigenproblems instantaneous.
pub const MAX_ENUMERATION_CELLS: usize = 8;

/// Translation-normalized cell set: sorted, with componentwise minimum at
/// the origin.
type Cells = Vec<[i64; 2]>;

fn normalize(mut cells: Cells) -> Cells {
    let min_x = cells.iter().map(|c| c[0]).min().unwrap();
    let min_y = cells.iter().map(|c| c[1]).min().unwrap();
    for c in &mut cells {
        c[0] -= min_x;
        c[1] -= min_y;
    }
    cells.sort_unstable();
    cells
}

/// All fixed (translation-distinct) animals, grouped by cell count:
/// entry s-1 holds the animals with s cells, each translation-normalized.
fn fixed_animals(max_cells: usize) -> Vec<Vec<Cells>> {
    let mut by_size: Vec<Vec<Cells>> = Vec::with_capacity(max_cells);
    if max_cells == 0 {
        return by_size;
    }
    by_size.push(vec![vec![[0, 0]]]);
    for _ in 1..max_cells {
        let mut next: BTreeSet<Cells> = BTreeSet::new();
        for animal in by_size.last().unwrap() {
            let occupied: BTreeSet<[i64; 2]> = animal.iter().copied().collect();
            for cell in animal {
                for d in [[1i64, 0i64], [-1, 0], [0, 1], [0, -1]] {
                    let cand = [cell[0] + d[0], cell[1] + d[1]];
                    if occupied.contains(&cand) {
                        continue;
                    }
                    let mut grown = animal.clone();
                    grown.push(cand);
                    next.insert(normalize(grown));
                }
            }
        }
        by_size.push(next.into_iter().collect());
    }
    by_size
}

/// The eight symmetries of the square applied to a cell.
fn transform(cell: [i64; 2], which: usize) -> [i64; 2] {
    let [x, y] = cell;
    match which {
        0 => [x, y],
        1 => [-y, x],
        2 => [-x, -y],
        3 => [y, -x],
        4 => [-x, y],
        5 => [y, x],
        6 => [x, -y],
        _ => [-y, -x],
    }
}

/// Canonical representative of the free class: lexicographic minimum of
/// the eight transformed-and-normalized forms.
fn free_key(cells: &Cells) -> Cells {
    (0..8)
        .map(|t| normalize(cells.iter().map(|&c| transform(c, t)).collect()))
        .min()
        .unwrap()
}

/// Distinct empty neighbor cells of the shape (its site perimeter).
fn site_perimeter(cells: &Cells) -> usize {
    let occupied: BTreeSet<[i64; 2]> = cells.iter().copied().collect();
    let mut boundary = BTreeSet::new();
    for cell in cells {
        for d in [[1i64, 0i64], [-1, 0], [0, 1], [0, -1]] {
            let cand = [cell[0] + d[0], cell[1] + d[1]];
            if !occupied.contains(&cand) {
                boundary.insert(cand);
            }
        }
    }
    boundary.len()
}

/// Adjacency eigenvalues of the shape, ascending.
fn shape_spectrum(cells: &Cells) -> Result<Vec<f64>, Error> {
    let index: BTreeMap<[i64; 2], usize> =
        cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n = cells.len();
    let mut a = DenseMatrix::zeros(n);
    for (i, cell) in cells.iter().enumerate() {
        for d in [[1i64, 0i64], [0, 1]] {
            let cand = [cell[0] + d[0], cell[1] + d[1]];
            if let Some(&j) = index.get(&cand) {
                a.set(i, j, 1.0);
                a.set(j, i, 1.0);
            }
        }
    }
    let eig = crate::linalg::symmetric_eigen(&a, false)?;
    Ok(eig.values)
}

/// One free shape class with everything needed to weight its atoms.
#[derive(Debug, Clone, Serialize)]
pub struct ShapeRecord {
    /// Canonical free representative (translation-normalized, lexicographic
    /// minimum over the eight square symmetries).
    pub cells: Vec<[i64; 2]>,
    /// Number of cells.
    pub size: usize,
    /// Distinct fixed (translation-only) forms of this class.
    pub orientations: usize,
    /// Distinct empty neighbor cells.
    pub perimeter: usize,
    /// Adjacency eigenvalues, ascending.
    pub spectrum: Vec<f64>,
    /// Per-site density of clusters of this class:
    /// orientations * p^size * (1-p)^perimeter.
    pub density: f64,
}

/// Aggregated finite-cluster atom predictions at a fixed density p.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterAtomTable {
    pub max_cells: usize,
    pub p: f64,
    pub shapes: Vec<ShapeRecord>,
    /// (eigenvalue, per-site jump weight), ascending, merged within 1e-9.
    pub atoms: Vec<(f64, f64)>,
}

impl ClusterAtomTable {
    /// Total predicted atom weight within `tol` of `lambda`.
    pub fn weight_near(&self, lambda: f64, tol: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|&&(loc, _)| (loc - lambda).abs() <= tol)
            .map(|&(_, w)| w)
            .sum()
    }

    /// Probability that a given site lies in an occupied cluster of at
    /// most `max_cells` cells: sum over shapes of density * size.
    pub fn size_budget(&self) -> f64 {
        self.shapes
            .iter()
            .map(|s| s.density * s.size as f64)
            .sum()
    }
}

/// Free lattice-animal counts by size, mostly useful for auditing the
/// enumeration (1, 1, 2, 5, 12, ... for sizes 1, 2, 3, 4, 5, ...).
pub fn free_animal_counts(max_cells: usize) -> Result<Vec<usize>, Error> {
    check_cap(max_cells)?;
    let fixed = fixed_animals(max_cells);
    Ok(fixed
        .iter()
        .map(|animals| {
            let classes: BTreeSet<Cells> = animals.iter().map(free_key).collect();
            classes.len()
        })
        .collect())
}

/// Fixed lattice-animal counts by size (1, 2, 6, 19, 63, ...).
pub fn fixed_animal_counts(max_cells: usize) -> Result<Vec<usize>, Error> {
    check_cap(max_cells)?;
    Ok(fixed_animals(max_cells).iter().map(Vec::len).collect())
}

fn check_cap(max_cells: usize) -> Result<(), Error> {
    if max_cells == 0 {
        return Err(Error::domain("cluster size cap must be at least 1".to_string()));
    }
    if max_cells > MAX_ENUMERATION_CELLS {
        return Err(Error::size(format!(
            "cluster size cap {max_cells} exceeds the enumeration limit {MAX_ENUMERATION_CELLS}"
        )));
    }
    Ok(())
}

/// Enumerate all free shapes up to `max_cells` cells and predict the
/// finite-cluster atoms of the integrated density of states at density p.
pub fn cluster_atom_oracle(max_cells: usize, p: f64) -> Result<ClusterAtomTable, Error> {
    check_cap(max_cells)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "occupation density must lie in [0, 1], got {p}"
        )));
    }

    let fixed = fixed_animals(max_cells);
    let mut shapes = Vec::new();
    for animals in &fixed {
        let mut classes: BTreeMap<Cells, usize> = BTreeMap::new();
        for animal in animals {
            *classes.entry(free_key(animal)).or_insert(0) += 1;
        }
        for (cells, orientations) in classes {
            let size = cells.len();
            let perimeter = site_perimeter(&cells);
            let spectrum = shape_spectrum(&cells)?;
            let density =
                orientations as f64 * p.powi(size as i32) * (1.0 - p).powi(perimeter as i32);
            shapes.push(ShapeRecord {
                cells,
                size,
                orientations,
                perimeter,
                spectrum,
                density,
            });
        }
    }

    // Aggregate per-eigenvalue weights, then merge locations within 1e-9
    // (shape eigenvalues like 0 and +-1 recur across shapes exactly, up to
    // eigensolver roundoff).
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for shape in &shapes {
        for &lambda in &shape.spectrum {
            raw.push((lambda, shape.density));
        }
    }
    raw.sort_by(|a, b| f64::total_cmp(&a.0, &b.0));
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut group_start = 0usize;
    for i in 1..=raw.len() {
        if i == raw.len() || raw[i].0 - raw[group_start].0 > 1e-9 {
            let group = &raw[group_start..i];
            let mass: f64 = group.iter().map(|&(_, w)| w).sum();
            if mass > 0.0 {
                let loc = group.iter().map(|&(l, w)| l * w).sum::<f64>() / mass;
                atoms.push((loc, mass));
            }
            group_start = i;
        }
    }

    Ok(ClusterAtomTable {
        max_cells,
        p,
        shapes,
        atoms,
    })
}

/// Probability that a given site lies in an occupied cluster of at most
/// `max_cells` cells (the per-site mass accounted for by the oracle).
pub fn cluster_size_budget(p: f64, max_cells: usize) -> Result<f64, Error> {
    Ok(cluster_atom_oracle(max_cells, p)?.size_budget())
}
