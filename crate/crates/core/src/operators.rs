//! Finite symmetric operators attached to site sets.
//!
//! Operators store only the upper triangle, so symmetry is exact by
//! construction. Sites carry labels (lattice coordinates or point
//! indices) that survive restriction, which is what lets localized
//! traces and equivariance checks speak about geometry instead of raw
//! matrix indices.

use serde::{Deserialize, Serialize};

use crate::delone::{perturbed_lattice, voronoi_adjacency, DeloneSet, VoronoiAdjacency};
use crate::error::Error;
use crate::lattice::{sample_percolation, Boundary, LatticeBox, PercolationConfig};
use crate::linalg::{symmetric_eigen, DenseMatrix, EigenDecomposition};
use crate::rng;

/// Identity of a site: a lattice coordinate vector or an index into a
/// point cloud.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SiteLabel {
    Lattice(Vec<i64>),
    Point(usize),
}

impl SiteLabel {
    pub fn coords(&self) -> Option<&[i64]> {
        match self {
            SiteLabel::Lattice(c) => Some(c),
            SiteLabel::Point(_) => None,
        }
    }
}

/// Whether construction should verify that nonzero off-diagonal entries
/// respect the declared hopping range in the lattice L1 metric. Torus
/// operators wrap around the box, so their matrix-entry distances are
/// not lattice distances and the check must be skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeMetric {
    LatticeL1,
    Unchecked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricOperator {
    labels: Vec<SiteLabel>,
    /// Upper-triangle entries (i <= j), sorted by (i, j).
    entries: Vec<(u32, u32, f64)>,
    hopping_range: u32,
}

impl SymmetricOperator {
    pub fn from_triplets(
        labels: Vec<SiteLabel>,
        entries: &[(usize, usize, f64)],
        hopping_range: u32,
        metric: RangeMetric,
    ) -> Result<Self, Error> {
        let n = labels.len();
        if n > u32::MAX as usize {
            return Err(Error::size("too many sites"));
        }
        let mut norm: Vec<(u32, u32, f64)> = Vec::with_capacity(entries.len());
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::config(format!(
                    "entry ({i}, {j}) outside dimension {n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::config(format!("entry ({i}, {j}) is not finite")));
            }
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            norm.push((a as u32, b as u32, v));
        }
        norm.sort_unstable_by_key(|&(i, j, _)| (i, j));
        for w in norm.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::config(format!(
                    "duplicate entry ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        if metric == RangeMetric::LatticeL1 {
            for &(i, j, v) in &norm {
                if i == j || v == 0.0 {
                    continue;
                }
                if let (SiteLabel::Lattice(a), SiteLabel::Lattice(b)) =
                    (&labels[i as usize], &labels[j as usize])
                {
                    let dist: u64 = a
                        .iter()
                        .zip(b)
                        .map(|(x, y)| x.abs_diff(*y))
                        .sum();
                    if dist > hopping_range as u64 {
                        return Err(Error::config(format!(
                            "entry ({i}, {j}) reaches distance {dist}, beyond hopping range {hopping_range}"
                        )));
                    }
                }
            }
        }
        Ok(SymmetricOperator {
            labels,
            entries: norm,
            hopping_range,
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[SiteLabel] {
        &self.labels
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn hopping_range(&self) -> u32 {
        self.hopping_range
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let key = (a as u32, b as u32);
        match self
            .entries
            .binary_search_by_key(&key, |&(x, y, _)| (x, y))
        {
            Ok(pos) => self.entries[pos].2,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Result<DenseMatrix, Error> {
        let n = self.dim();
        if n > crate::DENSE_DIMENSION_LIMIT {
            return Err(Error::size(format!(
                "dimension {n} exceeds the dense limit {}",
                crate::DENSE_DIMENSION_LIMIT
            )));
        }
        let mut m = DenseMatrix::zeros(n);
        for &(i, j, v) in &self.entries {
            m.set(i as usize, j as usize, v);
            if i != j {
                m.set(j as usize, i as usize, v);
            }
        }
        Ok(m)
    }

    /// Full eigendecomposition of the dense form. A convergence failure
    /// dumps the operator in coordinate text next to the temp dir so the
    /// exact instance can be replayed, and the error names the path.
    pub fn eigen(&self, want_vectors: bool) -> Result<EigenDecomposition, Error> {
        symmetric_eigen(&self.to_dense()?, want_vectors).map_err(|err| match err {
            Error::Numerical(msg) => {
                let stamp = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_nanos())
                    .unwrap_or(0);
                let path = std::env::temp_dir().join(format!("idos-failed-operator-{stamp}.txt"));
                match std::fs::write(&path, self.to_coordinate_text()) {
                    Ok(()) => Error::numerical(format!(
                        "{msg}; operator dumped to {}",
                        path.display()
                    )),
                    Err(_) => Error::numerical(msg),
                }
            }
            other => other,
        })
    }

    /// Principal submatrix on the sites passing the predicate; labels
    /// are kept, so restricting commutes with reading geometry back out.
    pub fn restrict_where(&self, keep: impl Fn(&SiteLabel) -> bool) -> SymmetricOperator {
        let indices: Vec<usize> = (0..self.dim())
            .filter(|&i| keep(&self.labels[i]))
            .collect();
        self.restrict_indices(&indices)
            .expect("indices from enumeration are sorted and in range")
    }

    /// Principal submatrix on a sorted list of distinct site indices.
    pub fn restrict_indices(&self, indices: &[usize]) -> Result<SymmetricOperator, Error> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::config("restriction indices must be strictly increasing"));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= self.dim() {
                return Err(Error::config("restriction index out of range"));
            }
        }
        let mut position = vec![usize::MAX; self.dim()];
        for (new, &old) in indices.iter().enumerate() {
            position[old] = new;
        }
        let labels: Vec<SiteLabel> = indices.iter().map(|&i| self.labels[i].clone()).collect();
        let entries: Vec<(u32, u32, f64)> = self
            .entries
            .iter()
            .filter_map(|&(i, j, v)| {
                let (pi, pj) = (position[i as usize], position[j as usize]);
                if pi == usize::MAX || pj == usize::MAX {
                    None
                } else {
                    Some((pi as u32, pj as u32, v))
                }
            })
            .collect();
        Ok(SymmetricOperator {
            labels,
            entries,
            hopping_range: self.hopping_range,
        })
    }

    /// Text dump: a JSON header line with the structural data, then one
    /// "i j value" line per stored upper-triangle entry.
    pub fn to_coordinate_text(&self) -> String {
        let header = serde_json::json!({
            "dim": self.dim(),
            "hopping_range": self.hopping_range,
            "labels": self.labels,
        });
        let mut out = format!("# {header}\n");
        for &(i, j, v) in &self.entries {
            out.push_str(&format!("{i} {j} {v}\n"));
        }
        out
    }

    pub fn from_coordinate_text(text: &str) -> Result<Self, Error> {
        let mut lines = text.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::format("empty operator text"))?;
        let header_json = header_line
            .strip_prefix("# ")
            .ok_or_else(|| Error::format("operator text must start with a '# ' header"))?;
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Header {
            dim: usize,
            hopping_range: u32,
            labels: Vec<SiteLabel>,
        }
        let header: Header = serde_json::from_str(header_json)
            .map_err(|e| Error::format(format!("operator header: {e}")))?;
        if header.labels.len() != header.dim {
            return Err(Error::format("label count does not match dim"));
        }
        let mut entries = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::format(format!(
                    "line {}: expected 'i j value'",
                    k + 2
                )));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| Error::format(format!("line {}: bad row index", k + 2)))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| Error::format(format!("line {}: bad column index", k + 2)))?;
            let v: f64 = fields[2]
                .parse()
                .map_err(|_| Error::format(format!("line {}: bad value", k + 2)))?;
            entries.push((i, j, v));
        }
        SymmetricOperator::from_triplets(
            header.labels,
            &entries,
            header.hopping_range,
            RangeMetric::Unchecked,
        )
    }
}

/// The closed vocabulary of functions a localized trace can apply to an
/// operator's spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralFunction {
    /// Indicator of the open half-line below the threshold; strictly
    /// below, matching the eigenvalue counting convention.
    IndicatorBelow(f64),
    /// exp(-t x) for a fixed time t >= 0.
    HeatKernel(f64),
    /// Coefficients in ascending degree order.
    Polynomial(Vec<f64>),
    /// Interpolation through strictly increasing knots, clamped to zero
    /// outside the knot hull.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl SpectralFunction {
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            SpectralFunction::IndicatorBelow(t) => {
                if !t.is_finite() {
                    return Err(Error::domain("indicator threshold must be finite"));
                }
            }
            SpectralFunction::HeatKernel(t) => {
                if !t.is_finite() || *t < 0.0 {
                    return Err(Error::domain("heat kernel time must be nonnegative"));
                }
            }
            SpectralFunction::Polynomial(c) => {
                if c.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain("polynomial coefficients must be finite"));
                }
            }
            SpectralFunction::PiecewiseLinear(knots) => {
                if knots.len() < 2 {
                    return Err(Error::domain("piecewise function needs at least two knots"));
                }
                for w in knots.windows(2) {
                    if !(w[0].0 < w[1].0) {
                        return Err(Error::domain("knots must be strictly increasing"));
                    }
                }
                if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    return Err(Error::domain("knots must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SpectralFunction::IndicatorBelow(t) => {
                if x < *t {
                    1.0
                } else {
                    0.0
                }
            }
            SpectralFunction::HeatKernel(t) => (-t * x).exp(),
            SpectralFunction::Polynomial(c) => {
                let mut acc = 0.0;
                for &coeff in c.iter().rev() {
                    acc = acc * x + coeff;
                }
                acc
            }
            SpectralFunction::PiecewiseLinear(knots) => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x < first.0 || x > last.0 {
                    return 0.0;
                }
                let pos = knots.partition_point(|&(k, _)| k <= x);
                if pos == knots.len() {
                    return last.1;
                }
                let (x0, y0) = knots[pos - 1];
                let (x1, y1) = knots[pos];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

fn occupied_positions(config: &PercolationConfig) -> (Vec<usize>, Vec<Option<usize>>) {
    let occupied = config.occupied_indices();
    let mut position = vec![None; config.lattice_box.site_count()];
    for (k, &site) in occupied.iter().enumerate() {
        position[site] = Some(k);
    }
    (occupied, position)
}

/// Adjacency operator of the subgraph induced on occupied sites: entry 1
/// between occupied nearest neighbors, zero diagonal. The operator acts
/// on occupied sites only; vacant sites simply do not appear.
pub fn adjacency_operator(config: &PercolationConfig, boundary: Boundary) -> SymmetricOperator {
    percolation_operator(config, boundary, false)
}

/// Graph Laplacian of the induced subgraph: diagonal holds the occupied
/// neighbor count, off-diagonal entries are -1. Positive semidefinite.
pub fn laplacian_operator(config: &PercolationConfig, boundary: Boundary) -> SymmetricOperator {
    percolation_operator(config, boundary, true)
}

fn percolation_operator(
    config: &PercolationConfig,
    boundary: Boundary,
    laplacian: bool,
) -> SymmetricOperator {
    let bx = &config.lattice_box;
    let (occupied, position) = occupied_positions(config);
    let labels: Vec<SiteLabel> = occupied
        .iter()
        .map(|&site| SiteLabel::Lattice(bx.coords_of(site)))
        .collect();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut degree = vec![0usize; occupied.len()];
    for (k, &site) in occupied.iter().enumerate() {
        let coords = bx.coords_of(site);
        for neighbor in crate::lattice::site_neighbors(bx, &coords, boundary) {
            let n_index = bx.index_of(&neighbor);
            if let Some(m) = position[n_index] {
                degree[k] += 1;
                if m > k {
                    entries.push((k, m, if laplacian { -1.0 } else { 1.0 }));
                }
            }
        }
    }
    if laplacian {
        for (k, &d) in degree.iter().enumerate() {
            if d > 0 {
                entries.push((k, k, d as f64));
            }
        }
    }
    let metric = match boundary {
        Boundary::Open => RangeMetric::LatticeL1,
        Boundary::Torus => RangeMetric::Unchecked,
    };
    SymmetricOperator::from_triplets(labels, &entries, 1, metric)
        .expect("construction from a valid configuration cannot fail")
}

/// Anderson model on the full box: site potentials drawn uniformly from
/// [low, high] by the coordinate-keyed stream, constant hopping on
/// nearest-neighbor bonds.
pub fn anderson_operator(
    bx: &LatticeBox,
    boundary: Boundary,
    potential_low: f64,
    potential_high: f64,
    hopping: f64,
    seed: u64,
) -> Result<SymmetricOperator, Error> {
    if !potential_low.is_finite() || !potential_high.is_finite() || !hopping.is_finite() {
        return Err(Error::domain("anderson parameters must be finite"));
    }
    if potential_low > potential_high {
        return Err(Error::domain("potential_low must not exceed potential_high"));
    }
    let n = bx.site_count();
    let mut labels = Vec::with_capacity(n);
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (k, coords) in bx.iter_coords().enumerate() {
        let bits = rng::coordinate_value(seed, &coords);
        let v = rng::uniform_f64(bits, potential_low, potential_high);
        if v != 0.0 {
            entries.push((k, k, v));
        }
        if hopping != 0.0 {
            for neighbor in crate::lattice::site_neighbors(bx, &coords, boundary) {
                let m = bx.index_of(&neighbor);
                if m > k {
                    entries.push((k, m, hopping));
                }
            }
        }
        labels.push(SiteLabel::Lattice(coords));
    }
    let metric = match boundary {
        Boundary::Open => RangeMetric::LatticeL1,
        Boundary::Torus => RangeMetric::Unchecked,
    };
    SymmetricOperator::from_triplets(labels, &entries, 1, metric)
}

/// Which points of a Delone set the operator should act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeloneSiteMode {
    KeepAll,
    /// Act only on points whose Voronoi cell is provably unaffected by
    /// the window boundary.
    DropBoundary,
}

/// Adjacency operator of the Voronoi neighbor graph; labels index back
/// into the original point cloud.
pub fn delone_operator(adj: &VoronoiAdjacency, mode: DeloneSiteMode) -> SymmetricOperator {
    let kept: Vec<usize> = match mode {
        DeloneSiteMode::KeepAll => (0..adj.len()).collect(),
        DeloneSiteMode::DropBoundary => adj.interior_indices(),
    };
    let mut position = vec![usize::MAX; adj.len()];
    for (new, &old) in kept.iter().enumerate() {
        position[old] = new;
    }
    let labels: Vec<SiteLabel> = kept.iter().map(|&i| SiteLabel::Point(i)).collect();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for &(i, j) in adj.edges() {
        let (pi, pj) = (position[i], position[j]);
        if pi != usize::MAX && pj != usize::MAX {
            entries.push((pi, pj, 1.0));
        }
    }
    SymmetricOperator::from_triplets(labels, &entries, 1, RangeMetric::Unchecked)
        .expect("adjacency edges are in range and unique")
}

/// Heat semigroup exp(-t H) as a dense matrix, via the full spectral
/// decomposition.
pub fn heat_semigroup(op: &SymmetricOperator, t: f64) -> Result<DenseMatrix, Error> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::domain("semigroup time must be nonnegative"));
    }
    let eig = op.eigen(true)?;
    let n = op.dim();
    let vectors = eig.vectors().expect("vectors requested");
    let weights: Vec<f64> = eig.values.iter().map(|&l| (-t * l).exp()).collect();
    let mut out = DenseMatrix::zeros(n);
    for k in 0..n {
        let w = weights[k];
        let row = vectors.row(k);
        for x in 0..n {
            let wx = w * row[x];
            let out_row = out.row_mut(x);
            for y in 0..n {
                out_row[y] += wx * row[y];
            }
        }
    }
    Ok(out)
}

/// tr(chi_D F(H)): sum over sites in the domain of the diagonal matrix
/// elements of F(H). Sites of the ambient region missing from the
/// operator contribute zero automatically, because they have no row.
pub fn localized_trace(
    op: &SymmetricOperator,
    f: &SpectralFunction,
    in_domain: impl Fn(&SiteLabel) -> bool,
) -> Result<f64, Error> {
    f.validate()?;
    let eig = op.eigen(true)?;
    let mask: Vec<bool> = op.labels().iter().map(in_domain).collect();
    localized_trace_from_eigen(&eig, f, &mask)
}

/// Same as [`localized_trace`] with the decomposition precomputed, so a
/// batch of spectral functions pays for one diagonalization.
pub fn localized_trace_from_eigen(
    eig: &EigenDecomposition,
    f: &SpectralFunction,
    mask: &[bool],
) -> Result<f64, Error> {
    let vectors = eig
        .vectors()
        .ok_or_else(|| Error::config("localized trace needs eigenvectors"))?;
    if mask.len() != eig.values.len() {
        return Err(Error::config("mask length does not match dimension"));
    }
    let mut total = 0.0;
    for (k, &value) in eig.values.iter().enumerate() {
        let weight = f.eval(value);
        if weight == 0.0 {
            continue;
        }
        let row = vectors.row(k);
        let mut overlap = 0.0;
        for (x, &keep) in mask.iter().enumerate() {
            if keep {
                overlap += row[x] * row[x];
            }
        }
        total += weight * overlap;
    }
    Ok(total)
}

/// A random operator family: everything the engine needs to draw
/// realization r of the model on a given box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnsembleSpec {
    PercolationAdjacency { p: f64 },
    PercolationLaplacian { p: f64 },
    Anderson {
        potential_low: f64,
        potential_high: f64,
        hopping: f64,
    },
    DeloneVoronoi { amplitude: f64 },
}

/// Model-specific byproducts of a realization.
#[derive(Debug, Clone, PartialEq)]
pub enum RealizationDetail {
    Percolation { config: PercolationConfig },
    Anderson,
    Delone { set: DeloneSet },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizedOperator {
    pub operator: SymmetricOperator,
    /// Divisor turning an eigenvalue count into a spatial density: box
    /// volume for lattice models, point count for Delone sets.
    pub normalization: f64,
    pub detail: RealizationDetail,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            EnsembleSpec::PercolationAdjacency { p }
            | EnsembleSpec::PercolationLaplacian { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::domain("p must lie in [0, 1]"));
                }
            }
            EnsembleSpec::Anderson {
                potential_low,
                potential_high,
                hopping,
            } => {
                if !potential_low.is_finite()
                    || !potential_high.is_finite()
                    || !hopping.is_finite()
                {
                    return Err(Error::domain("anderson parameters must be finite"));
                }
                if potential_low > potential_high {
                    return Err(Error::domain("potential_low must not exceed potential_high"));
                }
            }
            EnsembleSpec::DeloneVoronoi { amplitude } => {
                if !(0.0..0.5).contains(amplitude) {
                    return Err(Error::domain("amplitude must lie in [0, 1/2)"));
                }
            }
        }
        Ok(())
    }

    /// Draw realization `realization` of the model on the box. The
    /// per-realization seed comes from the base seed through the stream
    /// splitter, and every random draw inside is keyed by absolute site
    /// coordinates, so enlarging the box extends a realization instead
    /// of resampling it.
    pub fn realize(
        &self,
        bx: &LatticeBox,
        boundary: Boundary,
        base_seed: u64,
        realization: u64,
    ) -> Result<RealizedOperator, Error> {
        self.validate()?;
        let seed = rng::realization_seed(base_seed, realization);
        match self {
            EnsembleSpec::PercolationAdjacency { p } => {
                let config = sample_percolation(bx, *p, seed)?;
                let operator = adjacency_operator(&config, boundary);
                Ok(RealizedOperator {
                    operator,
                    normalization: bx.site_count() as f64,
                    detail: RealizationDetail::Percolation { config },
                })
            }
            EnsembleSpec::PercolationLaplacian { p } => {
                let config = sample_percolation(bx, *p, seed)?;
                let operator = laplacian_operator(&config, boundary);
                Ok(RealizedOperator {
                    operator,
                    normalization: bx.site_count() as f64,
                    detail: RealizationDetail::Percolation { config },
                })
            }
            EnsembleSpec::Anderson {
                potential_low,
                potential_high,
                hopping,
            } => {
                let operator = anderson_operator(
                    bx,
                    boundary,
                    *potential_low,
                    *potential_high,
                    *hopping,
                    seed,
                )?;
                Ok(RealizedOperator {
                    operator,
                    normalization: bx.site_count() as f64,
                    detail: RealizationDetail::Anderson,
                })
            }
            EnsembleSpec::DeloneVoronoi { amplitude } => {
                if bx.dim() != 2 {
                    return Err(Error::config("delone ensemble needs a 2d box"));
                }
                if boundary != Boundary::Open {
                    return Err(Error::config("delone ensemble supports open boundary only"));
                }
                let sides = bx.sides();
                let set = perturbed_lattice(
                    sides[0] as usize,
                    sides[1] as usize,
                    *amplitude,
                    seed,
                )?;
                let adj = voronoi_adjacency(&set)?;
                let operator = delone_operator(&adj, DeloneSiteMode::KeepAll);
                Ok(RealizedOperator {
                    operator,
                    normalization: set.len() as f64,
                    detail: RealizationDetail::Delone { set },
                })
            }
        }
    }
}
