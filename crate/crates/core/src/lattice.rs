//! Finite boxes on the hypercubic lattice Z^d (d <= 3), Folner
//! exhaustions, and site-percolation configurations.
//!
//! Randomness is keyed by absolute lattice coordinate, not by box-local
//! site index: the configuration a box sees is literally the restriction
//! of the configuration any enclosing box sees for the same seed. That is
//! what makes exhaustion sequences consistent realizations of one ambient
//! configuration.

use crate::error::Error;
use crate::rng;
use serde::{Deserialize, Serialize};

/// Axis-aligned box of lattice sites: coordinates
/// `offset[a] ..= offset[a] + side[a] - 1` on each axis.
///
/// Sites are enumerated row-major with axis 0 slowest; `index_of` and
/// `coords_of` are inverse bijections onto `0..site_count()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    sides: Vec<i64>,
    offset: Vec<i64>,
}

impl LatticeBox {
    pub fn new(sides: Vec<i64>, offset: Vec<i64>) -> Result<Self, Error> {
        let d = sides.len();
        if d == 0 || d > 3 {
            return Err(Error::domain(format!(
                "box dimension must be 1..=3, got {d}"
            )));
        }
        if offset.len() != d {
            return Err(Error::config(format!(
                "offset has {} axes, sides has {d}",
                offset.len()
            )));
        }
        if sides.iter().any(|&s| s < 1) {
            return Err(Error::domain(format!("box sides must be >= 1, got {sides:?}")));
        }
        let mut count: u64 = 1;
        for &s in &sides {
            count = count
                .checked_mul(s as u64)
                .filter(|&c| c <= u32::MAX as u64)
                .ok_or_else(|| Error::size(format!("box volume overflows: sides {sides:?}")))?;
        }
        Ok(LatticeBox { sides, offset })
    }

    /// Cube of side `side` centered at the origin (offset -side/2),
    /// so sides 2, 4, 8 in d=1 give {-1,0}, {-2..1}, {-4..3}.
    pub fn centered(dim: usize, side: i64) -> Result<Self, Error> {
        LatticeBox::new(vec![side; dim], vec![-(side / 2); dim])
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[i64] {
        &self.sides
    }

    pub fn offset(&self) -> &[i64] {
        &self.offset
    }

    pub fn site_count(&self) -> usize {
        self.sides.iter().map(|&s| s as usize).product()
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        coords.len() == self.dim()
            && coords
                .iter()
                .zip(self.sides.iter().zip(&self.offset))
                .all(|(&c, (&s, &o))| c >= o && c < o + s)
    }

    pub fn contains_box(&self, inner: &LatticeBox) -> bool {
        inner.dim() == self.dim()
            && inner
                .offset
                .iter()
                .zip(&inner.sides)
                .zip(self.offset.iter().zip(&self.sides))
                .all(|((&io, &is), (&o, &s))| io >= o && io + is <= o + s)
    }

    /// Row-major site index of a coordinate inside the box.
    pub fn index_of(&self, coords: &[i64]) -> usize {
        debug_assert!(self.contains(coords));
        let mut idx = 0usize;
        for (a, &c) in coords.iter().enumerate() {
            idx = idx * self.sides[a] as usize + (c - self.offset[a]) as usize;
        }
        idx
    }

    /// Coordinates of a row-major site index.
    pub fn coords_of(&self, mut index: usize) -> Vec<i64> {
        debug_assert!(index < self.site_count());
        let d = self.dim();
        let mut coords = vec![0i64; d];
        for a in (0..d).rev() {
            let s = self.sides[a] as usize;
            coords[a] = self.offset[a] + (index % s) as i64;
            index /= s;
        }
        coords
    }

    /// Iterate all site coordinates in index order.
    pub fn iter_coords(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.site_count()).map(move |i| self.coords_of(i))
    }

    /// Number of sites with at least one lattice neighbour outside the box.
    pub fn boundary_site_count(&self) -> usize {
        let interior: usize = self
            .sides
            .iter()
            .map(|&s| (s - 2).max(0) as usize)
            .product();
        self.site_count() - interior
    }

    /// Fraction of sites on the inner boundary.
    pub fn boundary_ratio(&self) -> f64 {
        self.boundary_site_count() as f64 / self.site_count() as f64
    }

    /// Box grown by `pad` sites on every face.
    pub fn padded(&self, pad: i64) -> Result<LatticeBox, Error> {
        if pad < 0 {
            return Err(Error::domain(format!("padding must be >= 0, got {pad}")));
        }
        LatticeBox::new(
            self.sides.iter().map(|s| s + 2 * pad).collect(),
            self.offset.iter().map(|o| o - pad).collect(),
        )
    }
}

/// Nested sequence of boxes with strictly falling boundary-site fraction;
/// the finite stand-in for a Folner exhaustion of Z^d.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FolnerSequence {
    boxes: Vec<LatticeBox>,
}

impl FolnerSequence {
    /// Validate a hand-built sequence: same dimension, strictly nested,
    /// boundary ratio strictly decreasing.
    pub fn from_boxes(boxes: Vec<LatticeBox>) -> Result<Self, Error> {
        if boxes.is_empty() {
            return Err(Error::config("exhaustion needs at least one box".to_string()));
        }
        let d = boxes[0].dim();
        for w in boxes.windows(2) {
            if w[1].dim() != d {
                return Err(Error::config("exhaustion boxes mix dimensions".to_string()));
            }
            if !w[1].contains_box(&w[0]) {
                return Err(Error::config(format!(
                    "exhaustion not nested: {:?} does not contain {:?}",
                    w[1], w[0]
                )));
            }
            if w[1].boundary_ratio() >= w[0].boundary_ratio() {
                return Err(Error::config(format!(
                    "boundary ratio must strictly decrease, got {} then {}",
                    w[0].boundary_ratio(),
                    w[1].boundary_ratio()
                )));
            }
        }
        Ok(FolnerSequence { boxes })
    }

    pub fn boxes(&self) -> &[LatticeBox] {
        &self.boxes
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    pub fn largest(&self) -> &LatticeBox {
        self.boxes.last().unwrap()
    }
}

/// Centered cubic exhaustion from a strictly increasing side schedule.
pub fn folner_boxes(dim: usize, side_schedule: &[i64]) -> Result<FolnerSequence, Error> {
    if side_schedule.is_empty() {
        return Err(Error::config("empty side schedule".to_string()));
    }
    for w in side_schedule.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::config(format!(
                "side schedule must strictly increase, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let boxes = side_schedule
        .iter()
        .map(|&s| LatticeBox::centered(dim, s))
        .collect::<Result<Vec<_>, _>>()?;
    FolnerSequence::from_boxes(boxes)
}

/// One site-percolation configuration: each site of the box kept with
/// probability p, decided by the coordinate-keyed draw for `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct PercolationConfig {
    pub lattice_box: LatticeBox,
    pub p: f64,
    pub seed: u64,
    occupied: Vec<bool>,
}

impl PercolationConfig {
    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    pub fn is_occupied(&self, index: usize) -> bool {
        self.occupied[index]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&b| b).count()
    }

    /// Indices of occupied sites, ascending.
    pub fn occupied_indices(&self) -> Vec<usize> {
        (0..self.occupied.len()).filter(|&i| self.occupied[i]).collect()
    }
}

/// Sample a percolation configuration. Pure in (box, p, seed); any
/// nested box samples the restriction of the same ambient configuration.
pub fn sample_percolation(
    lattice_box: &LatticeBox,
    p: f64,
    seed: u64,
) -> Result<PercolationConfig, Error> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability must lie in [0,1], got {p}")));
    }
    let occupied = lattice_box
        .iter_coords()
        .map(|c| rng::unit_f64(rng::coordinate_value(seed, &c)) < p)
        .collect();
    Ok(PercolationConfig {
        lattice_box: lattice_box.clone(),
        p,
        seed,
        occupied,
    })
}

/// How a lattice translation treats the box edges.
#[derive(Debug, Clone, PartialEq)]
pub enum TranslationMode {
    /// Cyclic shift: coordinates wrap around the box.
    Torus,
    /// Open shift certified on a window: the window and its translate must
    /// both lie in the box; sites shifted in from outside become empty.
    Window(LatticeBox),
}

/// Translate a configuration by `shift`: occupied(x + shift) in the output
/// equals occupied(x) in the input (wrapped, or on the certified window).
pub fn translate_config(
    config: &PercolationConfig,
    shift: &[i64],
    mode: &TranslationMode,
) -> Result<PercolationConfig, Error> {
    let b = &config.lattice_box;
    if shift.len() != b.dim() {
        return Err(Error::config(format!(
            "shift has {} axes, box has {}",
            shift.len(),
            b.dim()
        )));
    }
    let mut occupied = vec![false; b.site_count()];
    match mode {
        TranslationMode::Torus => {
            for (idx, coords) in b.iter_coords().enumerate() {
                let target: Vec<i64> = coords
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| {
                        let s = b.sides()[a];
                        b.offset()[a] + (c - b.offset()[a] + shift[a]).rem_euclid(s)
                    })
                    .collect();
                occupied[b.index_of(&target)] = config.occupied[idx];
            }
        }
        TranslationMode::Window(window) => {
            if !b.contains_box(window) {
                return Err(Error::config(format!(
                    "window {window:?} not inside box {b:?}"
                )));
            }
            let shifted_window = LatticeBox::new(
                window.sides().to_vec(),
                window
                    .offset()
                    .iter()
                    .zip(shift)
                    .map(|(&o, &s)| o + s)
                    .collect(),
            )?;
            if !b.contains_box(&shifted_window) {
                return Err(Error::config(format!(
                    "shift {shift:?} pushes window outside box {b:?}"
                )));
            }
            for (target_idx, target) in b.iter_coords().enumerate() {
                let source: Vec<i64> = target.iter().zip(shift).map(|(&c, &s)| c - s).collect();
                if b.contains(&source) {
                    occupied[target_idx] = config.occupied[b.index_of(&source)];
                }
            }
        }
    }
    Ok(PercolationConfig {
        lattice_box: b.clone(),
        p: config.p,
        seed: config.seed,
        occupied,
    })
}

/// Adjacency convention for cluster decomposition and operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Neighbours only inside the box (Dirichlet-style restriction).
    Open,
    /// Neighbours wrap around the box faces.
    Torus,
}

/// Lattice neighbours of a site under the chosen boundary convention.
pub fn site_neighbors(b: &LatticeBox, coords: &[i64], boundary: Boundary) -> Vec<Vec<i64>> {
    let mut out = Vec::with_capacity(2 * b.dim());
    for a in 0..b.dim() {
        for delta in [-1i64, 1] {
            let mut n = coords.to_vec();
            n[a] += delta;
            match boundary {
                Boundary::Open => {
                    if b.contains(&n) {
                        out.push(n);
                    }
                }
                Boundary::Torus => {
                    let s = b.sides()[a];
                    n[a] = b.offset()[a] + (n[a] - b.offset()[a]).rem_euclid(s);
                    // a side of length 1 makes the wrapped step a self-loop;
                    // a side of length 2 reaches the same neighbour twice
                    if n != coords {
                        out.push(n);
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Connected components of the occupied set under nearest-neighbour
/// adjacency. Clusters come back as ascending site-index lists, ordered
/// by their smallest member.
pub fn clusters(config: &PercolationConfig, boundary: Boundary) -> Vec<Vec<usize>> {
    let b = &config.lattice_box;
    let n = b.site_count();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if !config.occupied[start] || seen[start] {
            continue;
        }
        let mut component = vec![start];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        while let Some(site) = queue.pop_front() {
            for ncoords in site_neighbors(b, &b.coords_of(site), boundary) {
                let nidx = b.index_of(&ncoords);
                if config.occupied[nidx] && !seen[nidx] {
                    seen[nidx] = true;
                    component.push(nidx);
                    queue.push_back(nidx);
                }
            }
        }
        component.sort_unstable();
        out.push(component);
    }
    out
}

/// Serialized form of a percolation configuration. The bitmap packs site
/// indices in row-major order, least significant bit of each byte first,
/// standard base64 with padding.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigJson {
    d: usize,
    sides: Vec<i64>,
    offset: Vec<i64>,
    p: f64,
    seed: u64,
    occupied: String,
}

pub fn config_to_json(config: &PercolationConfig) -> String {
    use base64::Engine;
    let n = config.occupied.len();
    let mut bytes = vec![0u8; n.div_ceil(8)];
    for (i, &b) in config.occupied.iter().enumerate() {
        if b {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    let doc = ConfigJson {
        d: config.lattice_box.dim(),
        sides: config.lattice_box.sides().to_vec(),
        offset: config.lattice_box.offset().to_vec(),
        p: config.p,
        seed: config.seed,
        occupied: base64::engine::general_purpose::STANDARD.encode(bytes),
    };
    serde_json::to_string_pretty(&doc).expect("config serialization cannot fail")
}

pub fn config_from_json(text: &str) -> Result<PercolationConfig, Error> {
    use base64::Engine;
    let doc: ConfigJson =
        serde_json::from_str(text).map_err(|e| Error::format(format!("config json: {e}")))?;
    if doc.d != doc.sides.len() {
        return Err(Error::format(format!(
            "field 'd': dimension {} does not match sides {:?}",
            doc.d, doc.sides
        )));
    }
    let b = LatticeBox::new(doc.sides, doc.offset)?;
    if !(0.0..=1.0).contains(&doc.p) {
        return Err(Error::format(format!(
            "field 'p': probability must lie in [0,1], got {}",
            doc.p
        )));
    }
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(doc.occupied.as_bytes())
        .map_err(|e| Error::format(format!("field 'occupied': bad base64: {e}")))?;
    let n = b.site_count();
    if bytes.len() != n.div_ceil(8) {
        return Err(Error::format(format!(
            "field 'occupied': bitmap holds {} bytes, box volume {} needs {}",
            bytes.len(),
            n,
            n.div_ceil(8)
        )));
    }
    for i in n..bytes.len() * 8 {
        if bytes[i / 8] & (1 << (i % 8)) != 0 {
            return Err(Error::format(
                "field 'occupied': nonzero padding bits past box volume".to_string(),
            ));
        }
    }
    let occupied = (0..n).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect();
    Ok(PercolationConfig {
        lattice_box: b,
        p: doc.p,
        seed: doc.seed,
        occupied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_bijection_round_trips() {
        for b in [
            LatticeBox::new(vec![7], vec![-3]).unwrap(),
            LatticeBox::new(vec![4, 5], vec![2, -9]).unwrap(),
            LatticeBox::new(vec![3, 2, 4], vec![-1, 0, 5]).unwrap(),
        ] {
            for i in 0..b.site_count() {
                let c = b.coords_of(i);
                assert!(b.contains(&c));
                assert_eq!(b.index_of(&c), i);
            }
        }
    }

    #[test]
    fn centered_boxes_match_convention() {
        let f = folner_boxes(1, &[2, 4, 8]).unwrap();
        let spans: Vec<(i64, i64)> = f
            .boxes()
            .iter()
            .map(|b| (b.offset()[0], b.offset()[0] + b.sides()[0] - 1))
            .collect();
        assert_eq!(spans, vec![(-1, 0), (-2, 1), (-4, 3)]);
    }

    #[test]
    fn boundary_ratios_two_then_three_quarters() {
        let f = folner_boxes(2, &[2, 4]).unwrap();
        assert_eq!(f.boxes()[0].boundary_ratio(), 1.0);
        assert_eq!(f.boxes()[1].boundary_ratio(), 0.75);
    }

    #[test]
    fn non_increasing_schedule_rejected() {
        match folner_boxes(1, &[4, 4]) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
        assert!(folner_boxes(2, &[8, 6]).is_err());
    }

    /// Second, independent boundary count: scan every site and probe its
    /// 2d lattice neighbours directly.
    fn boundary_by_scan(b: &LatticeBox) -> usize {
        b.iter_coords()
            .filter(|c| {
                (0..b.dim()).any(|a| {
                    let mut up = c.clone();
                    up[a] += 1;
                    let mut down = c.clone();
                    down[a] -= 1;
                    !b.contains(&up) || !b.contains(&down)
                })
            })
            .count()
    }

    #[test]
    fn boundary_count_matches_scan_oracle() {
        for b in [
            LatticeBox::new(vec![1], vec![0]).unwrap(),
            LatticeBox::new(vec![9], vec![-4]).unwrap(),
            LatticeBox::new(vec![2, 2], vec![0, 0]).unwrap(),
            LatticeBox::new(vec![5, 8], vec![-2, 1]).unwrap(),
            LatticeBox::new(vec![1, 6], vec![0, 0]).unwrap(),
            LatticeBox::new(vec![3, 4, 5], vec![0, -1, 2]).unwrap(),
        ] {
            assert_eq!(b.boundary_site_count(), boundary_by_scan(&b), "box {b:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_restriction_consistent() {
        let big = LatticeBox::new(vec![8, 8], vec![-4, -4]).unwrap();
        let small = LatticeBox::new(vec![4, 4], vec![-2, -2]).unwrap();
        let a = sample_percolation(&big, 0.37, 99).unwrap();
        let b = sample_percolation(&big, 0.37, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_percolation(&small, 0.37, 99).unwrap();
        for (i, coords) in small.iter_coords().enumerate() {
            assert_eq!(c.occupied()[i], a.occupied()[big.index_of(&coords)]);
        }
    }

    #[test]
    fn density_near_half_over_many_seeds() {
        let b = LatticeBox::new(vec![100, 100], vec![0, 0]).unwrap();
        let seeds = 1000u64;
        let mut occupied = 0usize;
        for r in 0..seeds {
            let cfg = sample_percolation(&b, 0.5, rng::realization_seed(0xD05, r)).unwrap();
            occupied += cfg.occupied_count();
        }
        let total = seeds as f64 * b.site_count() as f64;
        let density = occupied as f64 / total;
        let three_sigma = 3.0 * 0.5 / total.sqrt();
        assert!(
            (density - 0.5).abs() <= three_sigma,
            "density {density} outside 0.5 +- {three_sigma}"
        );
    }

    #[test]
    fn degenerate_probabilities() {
        let b = LatticeBox::new(vec![10], vec![0]).unwrap();
        assert_eq!(sample_percolation(&b, 0.0, 1).unwrap().occupied_count(), 0);
        assert_eq!(sample_percolation(&b, 1.0, 1).unwrap().occupied_count(), 10);
        assert!(matches!(
            sample_percolation(&b, 1.5, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            sample_percolation(&b, -0.1, 1),
            Err(Error::Domain(_))
        ));
    }

    fn config_from_bits(b: &LatticeBox, bits: &[u8]) -> PercolationConfig {
        PercolationConfig {
            lattice_box: b.clone(),
            p: 0.5,
            seed: 0,
            occupied: bits.iter().map(|&x| x != 0).collect(),
        }
    }

    #[test]
    fn torus_shift_of_1011_gives_1101() {
        let b = LatticeBox::new(vec![4], vec![0]).unwrap();
        let cfg = config_from_bits(&b, &[1, 0, 1, 1]);
        let shifted = translate_config(&cfg, &[1], &TranslationMode::Torus).unwrap();
        let bits: Vec<u8> = shifted.occupied().iter().map(|&x| x as u8).collect();
        assert_eq!(bits, vec![1, 1, 0, 1]);
    }

    #[test]
    fn torus_translation_preserves_density_and_inverts() {
        let b = LatticeBox::new(vec![5, 7], vec![-2, 0]).unwrap();
        let cfg = sample_percolation(&b, 0.42, 7).unwrap();
        let fwd = translate_config(&cfg, &[2, -3], &TranslationMode::Torus).unwrap();
        assert_eq!(fwd.occupied_count(), cfg.occupied_count());
        let back = translate_config(&fwd, &[-2, 3], &TranslationMode::Torus).unwrap();
        assert_eq!(back.occupied(), cfg.occupied());
    }

    #[test]
    fn windowed_translation_contract() {
        let b = LatticeBox::new(vec![8], vec![0]).unwrap();
        let w = LatticeBox::new(vec![3], vec![1]).unwrap();
        let cfg = sample_percolation(&b, 0.6, 3).unwrap();
        let mode = TranslationMode::Window(w.clone());
        let shifted = translate_config(&cfg, &[2], &TranslationMode::Window(w)).unwrap();
        for x in 1..4i64 {
            assert_eq!(
                shifted.occupied()[b.index_of(&[x + 2])],
                cfg.occupied()[b.index_of(&[x])]
            );
        }
        // shifting off the end of the box is refused
        assert!(matches!(
            translate_config(&cfg, &[5], &mode),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn full_3x3_is_one_cluster_open_and_torus() {
        let b = LatticeBox::new(vec![3, 3], vec![0, 0]).unwrap();
        let cfg = sample_percolation(&b, 1.0, 0).unwrap();
        for boundary in [Boundary::Open, Boundary::Torus] {
            let cl = clusters(&cfg, boundary);
            assert_eq!(cl.len(), 1);
            assert_eq!(cl[0].len(), 9);
        }
    }

    #[test]
    fn alternating_line_gives_singletons() {
        let b = LatticeBox::new(vec![5], vec![0]).unwrap();
        let cfg = config_from_bits(&b, &[1, 0, 1, 0, 1]);
        let cl = clusters(&cfg, Boundary::Open);
        assert_eq!(cl, vec![vec![0], vec![2], vec![4]]);
    }

    /// Independent union-find decomposition to check the flood fill.
    fn clusters_by_union_find(cfg: &PercolationConfig, boundary: Boundary) -> Vec<Vec<usize>> {
        let b = &cfg.lattice_box;
        let n = b.site_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..n {
            if !cfg.occupied()[i] {
                continue;
            }
            for nc in site_neighbors(b, &b.coords_of(i), boundary) {
                let j = b.index_of(&nc);
                if cfg.occupied()[j] {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..n {
            if cfg.occupied()[i] {
                let r = find(&mut parent, i);
                groups.entry(r).or_default().push(i);
            }
        }
        groups.into_values().collect()
    }

    #[test]
    fn clusters_match_union_find_oracle_and_partition() {
        for seed in 0..20u64 {
            let b = LatticeBox::new(vec![9, 9], vec![-4, -4]).unwrap();
            let cfg = sample_percolation(&b, 0.55, seed).unwrap();
            for boundary in [Boundary::Open, Boundary::Torus] {
                let a = clusters(&cfg, boundary);
                let o = clusters_by_union_find(&cfg, boundary);
                assert_eq!(a, o, "seed {seed}");
                // partition of the occupied set
                let mut all: Vec<usize> = a.iter().flatten().copied().collect();
                all.sort_unstable();
                assert_eq!(all, cfg.occupied_indices());
            }
        }
    }

    /// Translation-invariant configurations must be rare: on a 2x2 torus
    /// with p = 1/2 the exact invariance probability under a unit shift
    /// is (p^2 + (1-p)^2)^2 = 1/4, and the empirical fraction stays near
    /// it. This is the finite shadow of ergodicity: no positive-density
    /// set of configurations is fixed by a nontrivial translation orbit.
    #[test]
    fn invariant_fraction_within_freeness_bound() {
        let b = LatticeBox::new(vec![2, 2], vec![0, 0]).unwrap();
        let trials = 4000u64;
        let mut invariant = 0usize;
        for r in 0..trials {
            let cfg = sample_percolation(&b, 0.5, rng::realization_seed(0xF8EE, r)).unwrap();
            let shifted = translate_config(&cfg, &[1, 0], &TranslationMode::Torus).unwrap();
            if shifted.occupied() == cfg.occupied() {
                invariant += 1;
            }
        }
        let fraction = invariant as f64 / trials as f64;
        let bound = 0.25;
        let three_sigma = 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt();
        assert!(
            fraction <= bound + three_sigma,
            "invariant fraction {fraction} exceeds {bound} + {three_sigma}"
        );
    }

    #[test]
    fn json_round_trip_and_validation() {
        let b = LatticeBox::new(vec![5, 3], vec![-1, 0]).unwrap();
        let cfg = sample_percolation(&b, 0.7, 123).unwrap();
        let text = config_to_json(&cfg);
        let back = config_from_json(&text).unwrap();
        assert_eq!(back, cfg);

        // unknown fields are rejected
        let with_extra = text.replace("\"p\":", "\"extra\": 1,\n  \"p\":");
        assert!(matches!(config_from_json(&with_extra), Err(Error::Format(_))));

        // truncated bitmap is rejected
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut bad = doc.clone();
        bad["occupied"] = serde_json::Value::String("AA==".to_string());
        assert!(matches!(
            config_from_json(&bad.to_string()),
            Err(Error::Format(_))
        ));

        // out-of-range p is rejected
        let mut badp = doc;
        badp["p"] = serde_json::json!(1.5);
        assert!(matches!(
            config_from_json(&badp.to_string()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn padded_box_grows_symmetrically() {
        let b = LatticeBox::new(vec![4, 6], vec![-2, -3]).unwrap();
        let p = b.padded(3).unwrap();
        assert_eq!(p.sides(), &[10, 12]);
        assert_eq!(p.offset(), &[-5, -6]);
        assert!(p.contains_box(&b));
    }
}
