//! Robust planar orientation and in-circle predicates.
//!
//! Both predicates run a fast f64 evaluation with a conservative forward
//! error bound; results inside the uncertainty band are recomputed in
//! exact rational arithmetic (f64 inputs convert to rationals without
//! loss). In-circle ties, which are real events on lattice inputs where
//! four sites are exactly cocircular, are broken by a symbolic
//! perturbation: point k's paraboloid lift x^2 + y^2 is lowered by an
//! infinitesimal eps^(k+1) keyed to its global index, which makes every
//! tie-break a fixed function of point identity and therefore globally
//! consistent across predicate calls.

use num_bigint::BigInt;
use num_rational::BigRational;

pub type Point = [f64; 2];

fn big(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite coordinate")
}

fn sign_of(r: &BigRational) -> i8 {
    let zero = BigRational::from_integer(BigInt::from(0));
    match r.cmp(&zero) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    }
}

/// Orientation of the triple (a, b, c): +1 counterclockwise, -1
/// clockwise, 0 collinear.
pub fn orient2d(a: Point, b: Point, c: Point) -> i8 {
    let t1 = (b[0] - a[0]) * (c[1] - a[1]);
    let t2 = (b[1] - a[1]) * (c[0] - a[0]);
    let det = t1 - t2;
    // forward error of the 7-op expression stays far below 8 eps of the
    // term magnitudes
    let bound = 8.0 * f64::EPSILON * (t1.abs() + t2.abs());
    if det.abs() > bound {
        return if det > 0.0 { 1 } else { -1 };
    }
    orient2d_exact(a, b, c)
}

fn orient2d_exact(a: Point, b: Point, c: Point) -> i8 {
    let det = (big(b[0]) - big(a[0])) * (big(c[1]) - big(a[1]))
        - (big(b[1]) - big(a[1])) * (big(c[0]) - big(a[0]));
    sign_of(&det)
}

/// In-circle sign without tie-break: +1 when d lies strictly inside the
/// circumcircle of the counterclockwise triangle (a, b, c), -1 strictly
/// outside, 0 exactly cocircular. (For a clockwise triple the sign flips.)
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> i8 {
    let adx = a[0] - d[0];
    let ady = a[1] - d[1];
    let bdx = b[0] - d[0];
    let bdy = b[1] - d[1];
    let cdx = c[0] - d[0];
    let cdy = c[1] - d[1];
    let ad2 = adx * adx + ady * ady;
    let bd2 = bdx * bdx + bdy * bdy;
    let cd2 = cdx * cdx + cdy * cdy;

    let det = adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2)
        + ad2 * (bdx * cdy - cdx * bdy);
    let mag = adx.abs() * (bdy.abs() * cd2 + cdy.abs() * bd2)
        + ady.abs() * (bdx.abs() * cd2 + cdx.abs() * bd2)
        + ad2 * (bdx.abs() * cdy.abs() + cdx.abs() * bdy.abs());
    let bound = 16.0 * f64::EPSILON * mag;
    if det.abs() > bound {
        return if det > 0.0 { 1 } else { -1 };
    }
    incircle_exact(a, b, c, d)
}

fn incircle_exact(a: Point, b: Point, c: Point, d: Point) -> i8 {
    let adx = big(a[0]) - big(d[0]);
    let ady = big(a[1]) - big(d[1]);
    let bdx = big(b[0]) - big(d[0]);
    let bdy = big(b[1]) - big(d[1]);
    let cdx = big(c[0]) - big(d[0]);
    let cdy = big(c[1]) - big(d[1]);
    let ad2 = &adx * &adx + &ady * &ady;
    let bd2 = &bdx * &bdx + &bdy * &bdy;
    let cd2 = &cdx * &cdx + &cdy * &cdy;
    let det = &adx * (&bdy * &cd2 - &cdy * &bd2) - &ady * (&bdx * &cd2 - &cdx * &bd2)
        + &ad2 * (&bdx * &cdy - &cdx * &bdy);
    sign_of(&det)
}

/// In-circle with the index-keyed symbolic perturbation.
///
/// The lifted determinant D with rows (x, y, x^2 + y^2 - delta, 1) for
/// (a, b, c, d) is linear in each delta with coefficient
/// -(-1)^row * orient2d(other three in row order); lowering lift k by
/// eps^(index_k + 1) means the smallest global index dominates, so on an
/// exact tie the decision falls to the first row, in ascending index
/// order, whose complementary triple is not collinear. All-collinear
/// quadruples (no circumcircle at all) stay 0.
pub fn incircle_sos(pts: [Point; 4], indices: [usize; 4]) -> i8 {
    let s = incircle(pts[0], pts[1], pts[2], pts[3]);
    if s != 0 {
        return s;
    }
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by_key(|&row| indices[row]);
    for row in order {
        let others: Vec<Point> = (0..4).filter(|&r| r != row).map(|r| pts[r]).collect();
        let m = orient2d_exact(others[0], others[1], others[2]);
        if m != 0 {
            // sign of -(-1)^row * m
            return if row % 2 == 0 { -m } else { m };
        }
    }
    0
}
