//! Spectral distribution functions and their transforms.
//!
//! The central object is [`DistributionFunction`]: a nondecreasing,
//! left-continuous step function N with finitely many jumps, normalized
//! eigenvalue counting being the main producer. The counting convention
//! is strictly-below: N(lambda) counts eigenvalues < lambda, so N is the
//! distribution function of the spectral measure with atoms sitting at
//! the jump locations and N continuous from the left.
//!
//! On top of it sit the Stieltjes--Laplace transform, a sup-distance
//! between two curves away from declared jumps, and a greedy extraction
//! of the atomic part with a certified approximation bound.

use crate::error::Error;

/// Left-continuous nondecreasing step function.
///
/// `values` has one more entry than `breakpoints`; N(lambda) equals
/// `values[k]` where k is the number of breakpoints strictly below
/// lambda. In particular N(b_k) = values[k-1] (left limit) and the jump
/// at b_k weighs `values[k] - values[k-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl DistributionFunction {
    /// Validated constructor: breakpoints strictly increasing and finite,
    /// values nondecreasing with len = breakpoints + 1.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, Error> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::config(format!(
                "distribution needs {} values for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("breakpoints must be finite".to_string()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "breakpoints must strictly increase".to_string(),
            ));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("values must be nondecreasing".to_string()));
        }
        Ok(DistributionFunction {
            breakpoints,
            values,
        })
    }

    /// The zero function.
    pub fn zero() -> Self {
        DistributionFunction {
            breakpoints: vec![],
            values: vec![0.0],
        }
    }

    /// Step function from (location, weight) jumps and a base level.
    /// Locations must strictly increase, weights be positive.
    pub fn from_jumps(base: f64, jumps: &[(f64, f64)]) -> Result<Self, Error> {
        let breakpoints: Vec<f64> = jumps.iter().map(|&(l, _)| l).collect();
        let mut values = Vec::with_capacity(jumps.len() + 1);
        values.push(base);
        let mut acc = base;
        for &(_, w) in jumps {
            if w <= 0.0 {
                return Err(Error::config(format!("jump weight must be positive, got {w}")));
            }
            acc += w;
            values.push(acc);
        }
        DistributionFunction::new(breakpoints, values)
    }

    /// Left-continuous evaluation: value indexed by the number of
    /// breakpoints strictly below lambda.
    pub fn eval(&self, lambda: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b < lambda);
        self.values[k]
    }

    /// Right limit at lambda.
    pub fn eval_right(&self, lambda: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= lambda);
        self.values[k]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// (location, weight) of every jump, ascending.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        self.breakpoints
            .iter()
            .enumerate()
            .map(|(k, &b)| (b, self.values[k + 1] - self.values[k]))
            .collect()
    }

    /// Total variation: final level minus base level.
    pub fn total_mass(&self) -> f64 {
        *self.values.last().unwrap() - self.values[0]
    }

    /// Pointwise convex combination structure is not needed; what the
    /// ensemble averages use is the mean of several curves on a common
    /// refinement of their breakpoints.
    pub fn mean_of(curves: &[DistributionFunction]) -> Result<DistributionFunction, Error> {
        if curves.is_empty() {
            return Err(Error::statistics("mean of zero curves".to_string()));
        }
        let mut breaks: Vec<f64> = curves
            .iter()
            .flat_map(|c| c.breakpoints.iter().copied())
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let inv = 1.0 / curves.len() as f64;
        let mut values = Vec::with_capacity(breaks.len() + 1);
        let base = curves.iter().map(|c| c.values[0]).sum::<f64>() * inv;
        values.push(base);
        for &b in &breaks {
            values.push(curves.iter().map(|c| c.eval_right(b)).sum::<f64>() * inv);
        }
        // drop zero-weight breakpoints picked up from the union
        let mut bp = Vec::with_capacity(breaks.len());
        let mut vv = vec![values[0]];
        for (k, &b) in breaks.iter().enumerate() {
            if values[k + 1] > values[k] {
                bp.push(b);
                vv.push(values[k + 1]);
            }
        }
        DistributionFunction::new(bp, vv)
    }
}

/// Normalized eigenvalue counting function: N(lambda) = #{i : e_i < lambda} / normalization.
///
/// Eigenvalues closer than 1e-8 times the spectral width are merged into
/// one jump at their mean; `normalization` must be positive.
pub fn counting_function(
    eigenvalues: &[f64],
    normalization: f64,
) -> Result<DistributionFunction, Error> {
    let pairs: Vec<(f64, f64)> = eigenvalues.iter().map(|&e| (e, 1.0)).collect();
    weighted_counting_function(&pairs, normalization)
}

/// Weighted counting function: each pair is (eigenvalue, weight), and the
/// curve jumps by weight / normalization at the eigenvalue. Nearby
/// eigenvalues (within 1e-8 of the spectral width) are merged into one
/// jump at their weighted mean location. Zero weights are fine; negative
/// weights are rejected since the result must be nondecreasing.
pub fn weighted_counting_function(
    pairs: &[(f64, f64)],
    normalization: f64,
) -> Result<DistributionFunction, Error> {
    if !(normalization > 0.0) {
        return Err(Error::domain(format!(
            "normalization must be positive, got {normalization}"
        )));
    }
    if pairs.iter().any(|&(e, w)| !e.is_finite() || !w.is_finite()) {
        return Err(Error::domain(
            "eigenvalues and weights must be finite".to_string(),
        ));
    }
    if pairs.iter().any(|&(_, w)| w < 0.0) {
        return Err(Error::domain("weights must be nonnegative".to_string()));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| f64::total_cmp(&a.0, &b.0));
    if sorted.is_empty() {
        return Ok(DistributionFunction::zero());
    }
    let width = sorted[sorted.len() - 1].0 - sorted[0].0;
    let merge_tol = 1e-8 * width;

    let inv = 1.0 / normalization;
    let mut breakpoints = Vec::new();
    let mut values = vec![0.0];
    let mut seen = 0.0f64;
    let mut group_start = 0usize;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i].0 - sorted[group_start].0 > merge_tol {
            let group = &sorted[group_start..i];
            let mass: f64 = group.iter().map(|&(_, w)| w).sum();
            if mass > 0.0 {
                let loc = group.iter().map(|&(e, w)| e * w).sum::<f64>() / mass;
                seen += mass;
                breakpoints.push(loc);
                values.push(seen * inv);
            }
            group_start = i;
        }
    }
    if breakpoints.is_empty() {
        return Ok(DistributionFunction::zero());
    }
    DistributionFunction::new(breakpoints, values)
}

/// Stieltjes--Laplace transform of dN at time t > 0:
/// integral of exp(-t lambda) dN(lambda), a finite sum over jumps.
pub fn laplace_transform(n: &DistributionFunction, t: f64) -> Result<f64, Error> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("Laplace time must be positive, got {t}")));
    }
    Ok(n.jumps()
        .iter()
        .map(|&(loc, w)| w * (-t * loc).exp())
        .sum())
}

/// Largest absolute gap between two Laplace transforms over a time grid.
pub fn laplace_agreement(
    n1: &DistributionFunction,
    n2: &DistributionFunction,
    times: &[f64],
) -> Result<f64, Error> {
    if times.is_empty() {
        return Err(Error::config("empty time grid".to_string()));
    }
    let mut worst: f64 = 0.0;
    for &t in times {
        let gap = (laplace_transform(n1, t)? - laplace_transform(n2, t)?).abs();
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// Exclusion zone for sup-distance comparisons: grid points within
/// `half_width` of any listed location are not compared (they sit on or
/// next to a jump, where the sup norm is the wrong yardstick).
#[derive(Debug, Clone, Default)]
pub struct JumpExclusion {
    pub locations: Vec<f64>,
    pub half_width: f64,
}

impl JumpExclusion {
    pub fn none() -> Self {
        Default::default()
    }

    pub fn admits(&self, x: f64) -> bool {
        self.locations
            .iter()
            .all(|&l| (x - l).abs() > self.half_width)
    }
}

#[derive(Debug, Clone)]
pub struct CdfDistance {
    pub sup_gap: f64,
    /// grid point realizing the sup
    pub at: f64,
    pub admitted: usize,
    pub excluded: usize,
}

/// Sup of |N1 - N2| over the admitted grid points.
/// Every point excluded is a degenerate comparison and an error.
pub fn cdf_distance(
    n1: &DistributionFunction,
    n2: &DistributionFunction,
    grid: &[f64],
    exclusion: &JumpExclusion,
) -> Result<CdfDistance, Error> {
    if grid.is_empty() {
        return Err(Error::config("empty comparison grid".to_string()));
    }
    let mut out = CdfDistance {
        sup_gap: 0.0,
        at: f64::NAN,
        admitted: 0,
        excluded: 0,
    };
    for &x in grid {
        if !exclusion.admits(x) {
            out.excluded += 1;
            continue;
        }
        out.admitted += 1;
        let gap = (n1.eval(x) - n2.eval(x)).abs();
        if gap > out.sup_gap || out.at.is_nan() {
            out.sup_gap = gap;
            out.at = x;
        }
    }
    if out.admitted == 0 {
        return Err(Error::degeneracy(
            "every grid point fell in a jump exclusion zone".to_string(),
        ));
    }
    Ok(out)
}

/// Purely atomic measure: strictly increasing locations, positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, Error> {
        if atoms.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::config("atom locations must strictly increase".to_string()));
        }
        if atoms.iter().any(|&(_, w)| w <= 0.0) {
            return Err(Error::config("atom weights must be positive".to_string()));
        }
        Ok(AtomicMeasure { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Weight of the atom nearest `loc` within `radius`, if any.
    pub fn weight_near(&self, loc: f64, radius: f64) -> Option<f64> {
        self.atoms
            .iter()
            .filter(|&&(l, _)| (l - loc).abs() <= radius)
            .map(|&(_, w)| w)
            .fold(None, |acc, w| Some(acc.unwrap_or(0.0) + w))
    }
}

/// Result of the greedy atomic-part extraction.
///
/// The greedy step repeatedly grabs the interval of length
/// `interval_length` capturing the most remaining jump mass. After k
/// rounds every length-bounded interval retains at most
/// `next_window_mass`, so the true k-interval supremum is certified to
/// lie below `captured_mass + k * next_window_mass`.
#[derive(Debug, Clone)]
pub struct PointPart {
    pub atoms: AtomicMeasure,
    pub captured_mass: f64,
    pub next_window_mass: f64,
    pub rounds: usize,
}

/// Extract the atomic part of dN: up to `k_max` windows of length
/// `interval_length`; windows capturing less than `mass_floor` are not
/// reported as atoms. Each atom sits at the mass centroid of its window.
pub fn point_part(
    n: &DistributionFunction,
    k_max: usize,
    interval_length: f64,
    mass_floor: f64,
) -> Result<PointPart, Error> {
    if !(interval_length > 0.0) {
        return Err(Error::domain(format!(
            "interval length must be positive, got {interval_length}"
        )));
    }
    if !(mass_floor > 0.0) {
        return Err(Error::domain(format!(
            "mass floor must be positive, got {mass_floor}"
        )));
    }
    if k_max == 0 {
        return Err(Error::domain("need at least one interval".to_string()));
    }

    let mut jumps = n.jumps();
    jumps.retain(|&(_, w)| w > 0.0);
    let mut alive: Vec<bool> = vec![true; jumps.len()];
    let mut found: Vec<(f64, f64)> = Vec::new();
    let mut captured = 0.0;
    let mut rounds = 0usize;
    let mut next_mass = 0.0;

    for round in 0..=k_max {
        // two-pointer scan over live jumps for the best window
        // [jump_i, jump_i + L]; anchoring windows at jumps loses nothing
        // for closed intervals
        let live_idx: Vec<usize> = (0..jumps.len()).filter(|&i| alive[i]).collect();
        let mut best_mass = 0.0f64;
        let mut best_range: Option<(usize, usize)> = None;
        let mut right = 0usize;
        let mut window_mass = 0.0f64;
        for li in 0..live_idx.len() {
            if right == li {
                window_mass += jumps[live_idx[right]].1;
                right += 1;
            }
            while right < live_idx.len()
                && jumps[live_idx[right]].0 <= jumps[live_idx[li]].0 + interval_length
            {
                window_mass += jumps[live_idx[right]].1;
                right += 1;
            }
            if window_mass > best_mass {
                best_mass = window_mass;
                best_range = Some((li, right));
            }
            window_mass -= jumps[live_idx[li]].1;
        }

        if round == k_max {
            next_mass = best_mass;
            break;
        }
        match best_range {
            Some((from, to)) if best_mass >= mass_floor => {
                rounds += 1;
                let members = &live_idx[from..to];
                let mass: f64 = members.iter().map(|&i| jumps[i].1).sum();
                let centroid: f64 =
                    members.iter().map(|&i| jumps[i].0 * jumps[i].1).sum::<f64>() / mass;
                for &i in members {
                    alive[i] = false;
                }
                captured += mass;
                found.push((centroid, mass));
            }
            _ => {
                // below the floor: stop, but keep the remaining best
                // window so the certificate stays valid
                next_mass = best_mass;
                break;
            }
        }
    }

    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    // windows are disjoint in jump content but centroids could still tie;
    // merge exact collisions defensively
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (l, w) in found {
        match merged.last_mut() {
            Some(last) if last.0 == l => last.1 += w,
            _ => merged.push((l, w)),
        }
    }
    Ok(PointPart {
        atoms: AtomicMeasure::new(merged)?,
        captured_mass: captured,
        next_window_mass: next_mass,
        rounds,
    })
}

/// Write a distribution as CSV: one line per breakpoint with the left and
/// right values (the jump is their difference).
pub fn write_distribution_csv(
    n: &DistributionFunction,
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(out, "lambda,n_left,n_right")?;
    for (k, &b) in n.breakpoints().iter().enumerate() {
        writeln!(out, "{b:e},{:e},{:e}", n.values()[k], n.values()[k + 1])?;
    }
    Ok(())
}

/// Write an atomic measure as CSV.
pub fn write_atoms_csv(m: &AtomicMeasure, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "location,weight")?;
    for &(l, w) in m.atoms() {
        writeln!(out, "{l:e},{w:e}")?;
    }
    Ok(())
}
