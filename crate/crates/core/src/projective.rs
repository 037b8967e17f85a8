//! The projective cocycle `F_A(x, v) = (f(x), ℙA(x)v)`, the observable
//! `φ_A(x, v) = log ‖A(x)v‖/‖v‖`, empirical versions of the invariant
//! measures carried by the Oseledets directions, and the attraction test.
//!
//! Classifying every `F_A`-invariant measure is not something a computation
//! can do. What is checked here are the two consequences that carry the
//! weight: forward orbits of directions off `E^s` converge to `E^u` (and
//! backward orbits off `E^u` to `E^s`), and `∫φ_A` is linear along convex
//! combinations of the two graph measures.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::base::{stream_rng, BasePoint, BaseSystem};
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::oseledets::{
    apply_projective, projective_distance, splitting_directions, splitting_horizon, stable_direction,
    unstable_direction, Direction,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePoint {
    pub base: BasePoint,
    pub dir: Direction,
}

/// `F_A(p)`.
pub fn projective_step(cocycle: &Cocycle, sys: &BaseSystem, p: &ProjectivePoint) -> Result<ProjectivePoint> {
    let a = cocycle.evaluate(&p.base)?;
    Ok(ProjectivePoint { base: sys.apply_f(&p.base, 1)?, dir: apply_projective(&a, p.dir)? })
}

/// `φ_A(x, v)`.
pub fn phi(cocycle: &Cocycle, p: &ProjectivePoint) -> Result<f64> {
    let a = cocycle.evaluate(&p.base)?;
    let w = a.apply(p.dir.unit_vector());
    Ok(w[0].hypot(w[1]).ln())
}

/// `(1/n) Σ_{j<n} φ_A(F_A^j(p))`.
pub fn birkhoff_average(cocycle: &Cocycle, sys: &BaseSystem, p: &ProjectivePoint, n: usize) -> Result<f64> {
    let mut q = p.clone();
    let mut total = 0.0;
    for _ in 0..n {
        total += phi(cocycle, &q)?;
        q = projective_step(cocycle, sys, &q)?;
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// Graph of `x ↦ E^s_x` over μ.
    Stable,
    /// Graph of `x ↦ E^u_x` over μ.
    Unstable,
    Pushforward,
    Custom,
}

/// Weighted atoms on `M × ℙ(ℝ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalProjectiveMeasure {
    pub atoms: Vec<(ProjectivePoint, f64)>,
    pub kind: MeasureKind,
}

impl EmpiricalProjectiveMeasure {
    pub fn new(atoms: Vec<(ProjectivePoint, f64)>, kind: MeasureKind) -> Result<Self> {
        if atoms.is_empty() {
            return Err(LabError::InvalidArgument("a measure needs at least one atom".into()));
        }
        if atoms.iter().any(|(_, w)| !(*w > 0.0)) {
            return Err(LabError::InvalidArgument("atom weights must be positive".into()));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidArgument(format!("weights sum to {total}")));
        }
        Ok(EmpiricalProjectiveMeasure { atoms, kind })
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<ProjectivePoint>, kind: MeasureKind) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        let atoms: Vec<_> = points.into_iter().map(|p| (p, w)).collect();
        Self::new(atoms, kind)
    }

    /// `α·m₁ + β·m₂` with `α + β = 1`.
    pub fn convex_combination(alpha: f64, m1: &Self, beta: f64, m2: &Self) -> Result<Self> {
        if (alpha + beta - 1.0).abs() > 1e-12 || alpha < 0.0 || beta < 0.0 {
            return Err(LabError::InvalidArgument("need α, β ≥ 0 with α + β = 1".into()));
        }
        let atoms = m1
            .atoms
            .iter()
            .map(|(p, w)| (p.clone(), alpha * w))
            .chain(m2.atoms.iter().map(|(p, w)| (p.clone(), beta * w)))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        Self::new(atoms, MeasureKind::Custom)
    }

    /// Base points of the atoms, in order.
    pub fn base_marginal(&self) -> Vec<&BasePoint> {
        self.atoms.iter().map(|(p, _)| &p.base).collect()
    }

    /// `(F_A)_* m`.
    pub fn pushforward(&self, cocycle: &Cocycle, sys: &BaseSystem) -> Result<Self> {
        let atoms = self
            .atoms
            .par_iter()
            .map(|(p, w)| Ok((projective_step(cocycle, sys, p)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        Ok(EmpiricalProjectiveMeasure { atoms, kind: MeasureKind::Pushforward })
    }
}

/// Graph measures of `E^s` and `E^u` over the given base points.
pub fn build_invariant_measures_at(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    points: &[BasePoint],
    depth: usize,
) -> Result<(EmpiricalProjectiveMeasure, EmpiricalProjectiveMeasure)> {
    let dirs = points
        .par_iter()
        .map(|x| splitting_directions(cocycle, sys, x, depth))
        .collect::<Result<Vec<_>>>()?;
    let stable = points.iter().zip(&dirs).map(|(x, d)| ProjectivePoint { base: x.clone(), dir: d.1 }).collect();
    let unstable = points.iter().zip(&dirs).map(|(x, d)| ProjectivePoint { base: x.clone(), dir: d.0 }).collect();
    Ok((
        EmpiricalProjectiveMeasure::uniform(stable, MeasureKind::Stable)?,
        EmpiricalProjectiveMeasure::uniform(unstable, MeasureKind::Unstable)?,
    ))
}

/// `μ`-sample points for measure construction: sample `i` is stream `i`.
pub fn sample_base_points(cocycle: &Cocycle, sys: &BaseSystem, samples: usize, depth: usize, seed: u64) -> Vec<BasePoint> {
    (0..samples)
        .map(|i| sys.sample_point(splitting_horizon(cocycle, depth) + 2, &mut stream_rng(seed, i as u64)))
        .collect()
}

/// `(m_s, m_u)` with uniform weights over `samples` μ-samples.
pub fn build_invariant_measures(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    samples: usize,
    depth: usize,
    seed: u64,
) -> Result<(EmpiricalProjectiveMeasure, EmpiricalProjectiveMeasure)> {
    if samples == 0 {
        return Err(LabError::InvalidArgument("samples must be >= 1".into()));
    }
    cocycle.validate(sys)?;
    let points = sample_base_points(cocycle, sys, samples, depth, seed);
    build_invariant_measures_at(cocycle, sys, &points, depth)
}

/// `∫φ_A dm`, summed in atom order.
pub fn integrate_phi(cocycle: &Cocycle, m: &EmpiricalProjectiveMeasure) -> Result<f64> {
    let values = m.atoms.par_iter().map(|(p, w)| Ok(w * phi(cocycle, p)?)).collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum())
}

/// `∫φ_A dm` and the standard error of the weighted mean.
pub fn integrate_phi_with_stderr(cocycle: &Cocycle, m: &EmpiricalProjectiveMeasure) -> Result<(f64, f64)> {
    let values = m.atoms.par_iter().map(|(p, _)| phi(cocycle, p)).collect::<Result<Vec<f64>>>()?;
    let mean: f64 = values.iter().zip(&m.atoms).map(|(v, (_, w))| v * w).sum();
    let sum_w2: f64 = m.atoms.iter().map(|(_, w)| w * w).sum();
    let var: f64 = values.iter().zip(&m.atoms).map(|(v, (_, w))| w * (v - mean) * (v - mean)).sum();
    let n_eff = 1.0 / sum_w2;
    let stderr = if n_eff > 1.0 { (var * n_eff / (n_eff - 1.0) * sum_w2).sqrt() } else { 0.0 };
    Ok((mean, stderr))
}

/// Base factor of a test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseTest {
    One,
    /// Indicator of `x_index = symbol`.
    Cylinder { index: i64, symbol: u8 },
    /// `cos` or `sin` of `2π(k₁u + k₂v)`.
    Fourier { k1: i32, k2: i32, sine: bool },
}

/// Direction factor, well defined on `ℙ(ℝ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirTest {
    One,
    Cos2,
    Sin2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub base: BaseTest,
    pub dir: DirTest,
}

impl TestFunction {
    pub fn eval(&self, p: &ProjectivePoint) -> f64 {
        let g = match (self.base, &p.base) {
            (BaseTest::One, _) => 1.0,
            (BaseTest::Cylinder { index, symbol }, BasePoint::Shift(s)) => {
                // Atoms are built with enough horizon for the bank's indices.
                f64::from(u8::from(s.symbol(index).map(|x| x == symbol).unwrap_or(false)))
            }
            (BaseTest::Fourier { k1, k2, sine }, BasePoint::Torus(t)) => {
                let (u, v) = t.coords();
                let arg = 2.0 * PI * (k1 as f64 * u + k2 as f64 * v);
                if sine {
                    arg.sin()
                } else {
                    arg.cos()
                }
            }
            _ => 0.0,
        };
        let theta = p.dir.angle();
        let h = match self.dir {
            DirTest::One => 1.0,
            DirTest::Cos2 => (2.0 * theta).cos(),
            DirTest::Sin2 => (2.0 * theta).sin(),
        };
        g * h
    }
}

/// Cylinder indicators at indices −1, 0, 1 (shift) or Fourier modes with
/// `max(|k₁|, |k₂|) ≤ 2` (torus), times `{1, cos 2θ, sin 2θ}`. The constant
/// function is left out.
pub fn default_bank(sys: &BaseSystem) -> Vec<TestFunction> {
    let mut bases = vec![BaseTest::One];
    match sys.alphabet() {
        Some(a) => {
            for index in -1..=1 {
                for symbol in 0..a as u8 {
                    bases.push(BaseTest::Cylinder { index, symbol });
                }
            }
        }
        None => {
            for k1 in -2..=2i32 {
                for k2 in -2..=2i32 {
                    // One representative per ±k pair.
                    if (k1, k2) > (0, 0) {
                        bases.push(BaseTest::Fourier { k1, k2, sine: false });
                        bases.push(BaseTest::Fourier { k1, k2, sine: true });
                    }
                }
            }
        }
    }
    let mut bank = Vec::new();
    for base in bases {
        for dir in [DirTest::One, DirTest::Cos2, DirTest::Sin2] {
            if !(base == BaseTest::One && dir == DirTest::One) {
                bank.push(TestFunction { base, dir });
            }
        }
    }
    bank
}

fn integrate(m: &EmpiricalProjectiveMeasure, psi: &TestFunction) -> f64 {
    m.atoms.iter().map(|(p, w)| w * psi.eval(p)).sum()
}

/// `max_ψ |∫ψ d(F_A)_*m − ∫ψ dm_ref|` over the bank, where `m_ref` defaults
/// to `m`. Passing as reference the same construction evaluated at the image
/// base points compares atom by atom and removes base resampling noise.
pub fn invariance_defect(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    m: &EmpiricalProjectiveMeasure,
    bank: &[TestFunction],
    reference: Option<&EmpiricalProjectiveMeasure>,
) -> Result<f64> {
    let pushed = m.pushforward(cocycle, sys)?;
    let reference = reference.unwrap_or(m);
    Ok(bank
        .iter()
        .map(|psi| (integrate(&pushed, psi) - integrate(reference, psi)).abs())
        .fold(0.0, f64::max))
}

/// Grid directions `kπ/grid` kept when farther than this from the excluded
/// Oseledets direction.
pub const ATTRACTION_EXCLUSION: f64 = 0.1;
pub const ATTRACTION_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct AttractionReport {
    /// Median over (sample, direction) of `d(ℙA^j(x)v, E^u_{f^j x})`, `j = 0..=n`.
    pub forward_curve: Vec<f64>,
    /// Median of `d(ℙA^{−j}(x)v, E^s_{f^{−j} x})`, `j = 0..=n`.
    pub backward_curve: Vec<f64>,
    pub forward_final_median: f64,
    pub backward_final_median: f64,
    pub forward_count: usize,
    pub backward_count: usize,
    pub pass: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Per-sample forward and backward distance traces.
type Traces = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn attraction_traces(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    x: &BasePoint,
    grid: usize,
    n: usize,
    depth: usize,
) -> Result<Traces> {
    let e_u = unstable_direction(cocycle, sys, x, depth)?;
    let e_s = stable_direction(cocycle, sys, x, depth)?;
    let grid_dirs: Vec<Direction> = (0..grid).map(|k| Direction::from_angle(k as f64 * PI / grid as f64)).collect();

    let mut fwd: Vec<Direction> =
        grid_dirs.iter().copied().filter(|v| projective_distance(*v, e_s) > ATTRACTION_EXCLUSION).collect();
    let mut fwd_traces: Vec<Vec<f64>> = fwd.iter().map(|v| vec![projective_distance(*v, e_u)]).collect();
    let mut y = x.clone();
    for _ in 0..n {
        let a = cocycle.evaluate(&y)?;
        y = sys.apply_f(&y, 1)?;
        let target = unstable_direction(cocycle, sys, &y, depth)?;
        for (v, trace) in fwd.iter_mut().zip(&mut fwd_traces) {
            *v = apply_projective(&a, *v)?;
            trace.push(projective_distance(*v, target));
        }
    }

    let mut bwd: Vec<Direction> =
        grid_dirs.iter().copied().filter(|v| projective_distance(*v, e_u) > ATTRACTION_EXCLUSION).collect();
    let mut bwd_traces: Vec<Vec<f64>> = bwd.iter().map(|v| vec![projective_distance(*v, e_s)]).collect();
    let mut y = x.clone();
    for _ in 0..n {
        y = sys.apply_f(&y, -1)?;
        let inv = cocycle.evaluate(&y)?.inverse()?;
        let target = stable_direction(cocycle, sys, &y, depth)?;
        for (v, trace) in bwd.iter_mut().zip(&mut bwd_traces) {
            *v = apply_projective(&inv, *v)?;
            trace.push(projective_distance(*v, target));
        }
    }
    Ok((fwd_traces, bwd_traces))
}

/// Horizon needed by [`attraction_test`].
pub fn attraction_horizon(cocycle: &Cocycle, n: usize, depth: usize) -> usize {
    n + depth + cocycle.lookahead() + 2
}

/// Track grid directions for `n` steps forward (toward `E^u`) and backward
/// (toward `E^s`) from `samples` μ-samples.
pub fn attraction_test(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    samples: usize,
    grid: usize,
    n: usize,
    depth: usize,
    seed: u64,
) -> Result<AttractionReport> {
    if samples == 0 || grid == 0 {
        return Err(LabError::InvalidArgument("need samples >= 1 and grid >= 1".into()));
    }
    cocycle.validate(sys)?;
    let horizon = attraction_horizon(cocycle, n, depth);
    let traces = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = sys.sample_point(horizon, &mut stream_rng(seed, i as u64));
            attraction_traces(cocycle, sys, &x, grid, n, depth)
        })
        .collect::<Result<Vec<_>>>()?;
    let fwd: Vec<&Vec<f64>> = traces.iter().flat_map(|t| t.0.iter()).collect();
    let bwd: Vec<&Vec<f64>> = traces.iter().flat_map(|t| t.1.iter()).collect();
    let curve = |all: &[&Vec<f64>]| -> Vec<f64> { (0..=n).map(|j| median(all.iter().map(|t| t[j]).collect())).collect() };
    let forward_curve = curve(&fwd);
    let backward_curve = curve(&bwd);
    let forward_final_median = forward_curve[n];
    let backward_final_median = backward_curve[n];
    Ok(AttractionReport {
        pass: forward_final_median < ATTRACTION_THRESHOLD && backward_final_median < ATTRACTION_THRESHOLD,
        forward_curve,
        backward_curve,
        forward_final_median,
        backward_final_median,
        forward_count: fwd.len(),
        backward_count: bwd.len(),
    })
}
