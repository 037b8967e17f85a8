//! Oseledets splittings `ℝ² = E^u_x ⊕ E^s_x` of gapped cocycles and the
//! angle metric on the projective line.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::base::{stream_rng, BasePoint, BaseSystem};
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::matrix::{canonical_angle, Matrix2};

/// Singular-value ratio below which a window product has no preferred
/// direction.
pub const NO_GAP_RATIO: f64 = 1.0 + 1e-6;

/// A line through the origin, stored as its angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Direction(f64);

impl Direction {
    pub const HORIZONTAL: Direction = Direction(0.0);
    pub const VERTICAL: Direction = Direction(FRAC_PI_2);

    pub fn from_angle(theta: f64) -> Self {
        Direction(canonical_angle(theta))
    }

    /// The line spanned by a non-zero vector.
    pub fn from_vector(v: [f64; 2]) -> Self {
        // Pick the representative in the closed upper half plane so v and −v
        // give bit-identical angles.
        let [x, y] = if v[1] < 0.0 || (v[1] == 0.0 && v[0] < 0.0) { [-v[0], -v[1]] } else { v };
        Direction::from_angle(y.atan2(x))
    }

    pub fn angle(&self) -> f64 {
        self.0
    }

    pub fn unit_vector(&self) -> [f64; 2] {
        // cos(FRAC_PI_2) is 6e-17, not 0.
        if self.0 == FRAC_PI_2 {
            return [0.0, 1.0];
        }
        let (s, c) = self.0.sin_cos();
        [c, s]
    }

    /// The orthogonal line.
    pub fn perpendicular(&self) -> Direction {
        Direction::from_angle(self.0 + FRAC_PI_2)
    }
}

/// Angle between two lines, in `[0, π/2]`.
pub fn projective_distance(u: Direction, v: Direction) -> f64 {
    let d = (u.0 - v.0).abs();
    d.min(PI - d)
}

/// `ℙM · v`.
pub fn apply_projective(m: &Matrix2, v: Direction) -> Result<Direction> {
    m.check_invertible()?;
    Ok(Direction::from_vector(m.apply(v.unit_vector())))
}

fn ensure_gap(log_condition: f64) -> Result<()> {
    if log_condition > NO_GAP_RATIO.ln() {
        Ok(())
    } else {
        Err(LabError::NoGap(format!(
            "window product singular-value ratio {:.3e} is within 1e-6 of 1",
            log_condition.exp()
        )))
    }
}

/// Depth-`n` approximation of `E^u_x`: the most expanded output direction of
/// the backward-window product `Aⁿ(f^{−n}x)`.
pub fn unstable_direction(cocycle: &Cocycle, sys: &BaseSystem, x: &BasePoint, n: usize) -> Result<Direction> {
    let start = sys.apply_f(x, -(n as i64))?;
    let p = cocycle.product_renormalized(sys, &start, n as i64)?;
    ensure_gap(p.log_condition())?;
    Ok(Direction(p.normalized.top_left_singular_angle()))
}

/// Depth-`n` approximation of `E^s_x`: the most contracted input direction
/// of the forward product `Aⁿ(x)`.
pub fn stable_direction(cocycle: &Cocycle, sys: &BaseSystem, x: &BasePoint, n: usize) -> Result<Direction> {
    let p = cocycle.product_renormalized(sys, x, n as i64)?;
    ensure_gap(p.log_condition())?;
    Ok(Direction::from_angle(p.normalized.top_right_singular_angle() + FRAC_PI_2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splitting {
    pub unstable: Direction,
    pub stable: Direction,
    pub depth: usize,
    /// Largest one-step equivariance defect of the two directions.
    pub residual: f64,
}

/// `(E^u_x, E^s_x)` at depth `n`, without the equivariance residual.
pub fn splitting_directions(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    x: &BasePoint,
    n: usize,
) -> Result<(Direction, Direction)> {
    let unstable = unstable_direction(cocycle, sys, x, n)?;
    let stable = stable_direction(cocycle, sys, x, n)?;
    if projective_distance(unstable, stable) <= 1e-8 {
        return Err(LabError::NoGap("stable and unstable directions coincide".into()));
    }
    Ok((unstable, stable))
}

pub fn splitting(cocycle: &Cocycle, sys: &BaseSystem, x: &BasePoint, n: usize) -> Result<Splitting> {
    let (unstable, stable) = splitting_directions(cocycle, sys, x, n)?;
    let a = cocycle.evaluate(x)?;
    let fx = sys.apply_f(x, 1)?;
    let unstable_next = unstable_direction(cocycle, sys, &fx, n)?;
    let stable_next = stable_direction(cocycle, sys, &fx, n)?;
    let residual = projective_distance(apply_projective(&a, unstable)?, unstable_next)
        .max(projective_distance(apply_projective(&a, stable)?, stable_next));
    Ok(Splitting { unstable, stable, depth: n, residual })
}

/// Horizon a sampled shift point needs for a depth-`n` splitting with
/// residual.
pub fn splitting_horizon(cocycle: &Cocycle, n: usize) -> usize {
    n + cocycle.lookahead() + 2
}

/// Default depth `⌈40 / gap⌉`, capped.
pub fn default_depth(gap: f64, cap: usize) -> usize {
    if !(gap > 0.0) {
        return cap.max(1);
    }
    ((40.0 / gap).ceil() as usize).clamp(1, cap.max(1))
}

/// Splittings at `samples` μ-samples; entry `i` uses stream `i` of `seed`.
pub fn sample_splittings(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    n: usize,
    samples: usize,
    seed: u64,
) -> Vec<Result<Splitting>> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = sys.sample_point(splitting_horizon(cocycle, n), &mut stream_rng(seed, i as u64));
            splitting(cocycle, sys, &x, n)
        })
        .collect()
}

/// `(1/n) log ‖Aⁿ(x) v‖` for a unit vector along `v`.
pub fn vector_growth_rate(cocycle: &Cocycle, sys: &BaseSystem, x: &BasePoint, v: Direction, n: usize) -> Result<f64> {
    let mut w = v.unit_vector();
    let mut log_len = 0.0;
    cocycle.walk_orbit(sys, x, n as i64, |m| {
        w = m.apply(w);
        let len = w[0].hypot(w[1]);
        w = [w[0] / len, w[1] / len];
        log_len += len.ln();
        Ok(())
    })?;
    Ok(log_len / n as f64)
}
