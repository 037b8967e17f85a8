//! Continuity-in-measure experiments: perturbation families `A_k → A`,
//! coupled good-set estimates for the Oseledets directions, exponent
//! continuity tables, and a measurable-regularity probe for `x ↦ E^u_x`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::base::{stream_rng, BasePoint, BaseSystem, ShiftPoint};
use crate::cocycle::{holder_distance, Cocycle, Composition, MatrixField, Perturbation};
use crate::error::{LabError, Result};
use crate::oseledets::{projective_distance, splitting_directions, splitting_horizon, Direction};
use crate::spectrum::{lyapunov_exponents, spectral_gap, SpectrumReport};

/// z for a two-sided 95% interval.
const Z_95: f64 = 1.959_963_984_540_054;

/// `t_k = 2^{−k}` for `k = 1..=count`.
pub fn default_schedule(count: usize) -> Vec<f64> {
    (1..=count).map(|k| 0.5f64.powi(k as i32)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFamily {
    pub base: Cocycle,
    pub direction: MatrixField,
    /// Strictly decreasing positive magnitudes `t_1 > … > t_K`.
    pub schedule: Vec<f64>,
    pub rule: Composition,
}

impl PerturbationFamily {
    /// Validates the schedule and that every member stays invertible:
    /// exhaustively for word-table fields over a shift, on a 64×64 grid for
    /// torus fields.
    pub fn new(
        base: Cocycle,
        direction: MatrixField,
        schedule: Vec<f64>,
        rule: Composition,
        sys: &BaseSystem,
    ) -> Result<Self> {
        if schedule.is_empty() {
            return Err(LabError::InvalidArgument("empty perturbation schedule".into()));
        }
        if schedule.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(LabError::InvalidArgument("schedule magnitudes must be positive".into()));
        }
        if schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(LabError::InvalidArgument("schedule must be strictly decreasing".into()));
        }
        let family = PerturbationFamily { base, direction, schedule, rule };
        for k in 1..=family.len() {
            let member = family.perturb(k)?;
            member.validate(sys)?;
            for x in check_points(&member, sys) {
                member.evaluate(&x).map_err(|e| match e {
                    LabError::SingularValue { det } => LabError::SingularPerturbation { t: family.t(k), det },
                    other => other,
                })?;
            }
        }
        Ok(family)
    }

    pub fn len(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    /// `t_k`, with `t_0 = 0`.
    pub fn t(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.schedule[k - 1]
        }
    }

    /// `A_k`; `k = 0` gives `A` itself.
    pub fn perturb(&self, k: usize) -> Result<Cocycle> {
        if k > self.len() {
            return Err(LabError::InvalidArgument(format!("k = {k} outside 0..={}", self.len())));
        }
        if k == 0 {
            return Ok(self.base.clone());
        }
        if self.base.perturbation.is_some() {
            return Err(LabError::InvalidCocycle("base cocycle is already perturbed".into()));
        }
        let mut member = self.base.clone();
        member.perturbation = Some(Perturbation { direction: self.direction.clone(), t: self.t(k), rule: self.rule });
        Ok(member)
    }
}

fn check_points(cocycle: &Cocycle, sys: &BaseSystem) -> Vec<BasePoint> {
    match sys.alphabet() {
        Some(a) => {
            let depth = cocycle.lookahead() + 1;
            let count = a.pow(depth as u32);
            (0..count)
                .map(|mut idx| {
                    let mut word = vec![0u8; depth];
                    for slot in word.iter_mut().rev() {
                        *slot = (idx % a) as u8;
                        idx /= a;
                    }
                    BasePoint::Shift(ShiftPoint::from_fn(depth, |i| {
                        if i >= 0 && (i as usize) < depth {
                            word[i as usize]
                        } else {
                            0
                        }
                    }))
                })
                .collect()
        }
        None => (0..64 * 64)
            .map(|i| crate::cocycle::torus_point((i % 64) as f64 / 64.0, (i / 64) as f64 / 64.0))
            .collect(),
    }
}

/// Wilson score interval for `successes / trials` at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Keep the point estimate inside the interval despite rounding.
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Result of one coupled good-set estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodSetEstimate {
    pub g_hat: f64,
    pub ci: (f64, f64),
    /// Per-sample `(d(E^u_A, E^u_B), d(E^s_A, E^s_B))`.
    pub distances: Vec<(f64, f64)>,
}

/// Fraction of distance pairs with both entries below `epsilon`. Since the
/// projective diameter is π/2, `epsilon ≥ π/2` counts every sample.
pub fn good_fraction(distances: &[(f64, f64)], epsilon: f64) -> GoodSetEstimate {
    let good = distances
        .iter()
        .filter(|(du, ds)| epsilon >= FRAC_PI_2 || (*du < epsilon && *ds < epsilon))
        .count();
    GoodSetEstimate {
        g_hat: good as f64 / distances.len().max(1) as f64,
        ci: wilson_interval(good, distances.len()),
        distances: distances.to_vec(),
    }
}

/// Base points for the coupled estimator; sample `i` is stream `i`.
pub fn coupled_points(cocycles: &[&Cocycle], sys: &BaseSystem, samples: usize, depth: usize, seed: u64) -> Vec<BasePoint> {
    let lookahead = cocycles.iter().map(|c| c.lookahead()).max().unwrap_or(0);
    let horizon = depth + lookahead + 2;
    (0..samples).map(|i| sys.sample_point(horizon, &mut stream_rng(seed, i as u64))).collect()
}

fn directions_at(cocycle: &Cocycle, sys: &BaseSystem, points: &[BasePoint], depth: usize) -> Result<Vec<(Direction, Direction)>> {
    points.par_iter().map(|x| splitting_directions(cocycle, sys, x, depth)).collect()
}

fn pairwise(a: &[(Direction, Direction)], b: &[(Direction, Direction)]) -> Vec<(f64, f64)> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (projective_distance(x.0, y.0), projective_distance(x.1, y.1)))
        .collect()
}

/// Coupled estimate of `μ{x : d(E^u_{A_k}, E^u_A) < ε and d(E^s_{A_k}, E^s_A) < ε}`:
/// both cocycles are evaluated at the same μ-samples and the same depth.
#[allow(clippy::too_many_arguments)]
pub fn good_set_measure(
    a: &Cocycle,
    a_k: &Cocycle,
    sys: &BaseSystem,
    epsilon: f64,
    samples: usize,
    depth: usize,
    seed: u64,
) -> Result<GoodSetEstimate> {
    if samples == 0 || depth == 0 {
        return Err(LabError::InvalidArgument("need samples >= 1 and depth >= 1".into()));
    }
    a.validate(sys)?;
    a_k.validate(sys)?;
    let points = coupled_points(&[a, a_k], sys, samples, depth, seed);
    let da = directions_at(a, sys, &points, depth)?;
    let db = directions_at(a_k, sys, &points, depth)?;
    Ok(good_fraction(&pairwise(&da, &db), epsilon))
}

/// Sampling budgets for [`continuity_experiment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityBudget {
    pub samples: usize,
    /// Splitting depth; `None` picks `⌈40 / gap(A)⌉` capped at `max_depth`.
    pub depth: Option<usize>,
    pub max_depth: usize,
    /// Orbit length for the exponent estimates.
    pub spectrum_n: usize,
    /// Samples for the exponent estimates.
    pub spectrum_samples: usize,
    /// Pairs for Monte Carlo Hölder distances (ignored when exact).
    pub holder_pairs: usize,
    pub gap_floor: f64,
}

impl Default for ContinuityBudget {
    fn default() -> Self {
        ContinuityBudget {
            samples: 10_000,
            depth: None,
            max_depth: 400,
            spectrum_n: 1000,
            spectrum_samples: 1000,
            holder_pairs: 2000,
            gap_floor: crate::spectrum::DEFAULT_GAP_FLOOR,
        }
    }
}

/// Splitting-derived fields of a row; absent when the row is censored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodSetStats {
    pub g_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_du: f64,
    pub max_du: f64,
    pub mean_ds: f64,
    pub max_ds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodSetRow {
    pub k: usize,
    pub t: f64,
    pub holder_dist: f64,
    pub holder_exact: bool,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `None` when `A_k` showed no spectral gap (censored row).
    pub stats: Option<GoodSetStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodSetReport {
    pub rows: Vec<GoodSetRow>,
    pub epsilon: f64,
    pub samples: usize,
    pub depth: usize,
    pub seed: u64,
    pub base_spectrum: SpectrumReport,
}

impl GoodSetReport {
    /// `goodset.csv` body (without provenance header).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t,holder_dist,g_hat,ci_lo,ci_hi,lp_k,lm_k,mean_du,max_du,mean_ds,max_ds\n");
        for r in &self.rows {
            let stats = match &r.stats {
                Some(s) => format!(
                    "{:.6},{:.6},{:.6},{:.6e},{:.6e},{:.6e},{:.6e}",
                    s.g_hat, s.ci_lo, s.ci_hi, s.mean_du, s.max_du, s.mean_ds, s.max_ds
                ),
                None => "NA,NA,NA,NA,NA,NA,NA".to_string(),
            };
            let (stats_head, stats_tail) = stats.split_at(nth_comma(&stats, 3));
            out.push_str(&format!(
                "{},{:.6e},{:.6e},{},{:.9},{:.9}{}\n",
                r.k,
                r.t,
                r.holder_dist,
                stats_head,
                r.lambda_plus,
                r.lambda_minus,
                stats_tail
            ));
        }
        out
    }
}

// Byte index of the n-th comma (the separator before the 4th field).
fn nth_comma(s: &str, n: usize) -> usize {
    s.match_indices(',').nth(n - 1).map(|(i, _)| i).unwrap_or(s.len())
}

fn summarize(estimate: &GoodSetEstimate) -> GoodSetStats {
    let n = estimate.distances.len().max(1) as f64;
    let du = estimate.distances.iter().map(|d| d.0);
    let ds = estimate.distances.iter().map(|d| d.1);
    GoodSetStats {
        g_hat: estimate.g_hat,
        ci_lo: estimate.ci.0,
        ci_hi: estimate.ci.1,
        mean_du: du.clone().sum::<f64>() / n,
        max_du: du.fold(0.0, f64::max),
        mean_ds: ds.clone().sum::<f64>() / n,
        max_ds: ds.fold(0.0, f64::max),
    }
}

/// One row per family member: Hölder distance to `A`, coupled good-set
/// estimate, and the exponents of `A_k` on the same seed.
pub fn continuity_experiment(
    family: &PerturbationFamily,
    sys: &BaseSystem,
    epsilon: f64,
    budget: &ContinuityBudget,
    seed: u64,
) -> Result<GoodSetReport> {
    let a = &family.base;
    a.validate(sys)?;
    let base_spectrum = lyapunov_exponents(a, sys, budget.spectrum_n, budget.spectrum_samples, seed)?;
    let base_gap = spectral_gap(&base_spectrum, budget.gap_floor);
    if !base_gap.has_gap {
        return Err(LabError::NoGap(format!(
            "base cocycle gap {:.3e} (corrected {:.3e}) is not resolved",
            base_gap.gap, base_gap.corrected_gap
        )));
    }
    let depth = budget.depth.unwrap_or_else(|| crate::oseledets::default_depth(base_gap.gap, budget.max_depth));
    let members: Vec<Cocycle> = (1..=family.len()).map(|k| family.perturb(k)).collect::<Result<_>>()?;
    let mut all: Vec<&Cocycle> = vec![a];
    all.extend(members.iter());
    let points = coupled_points(&all, sys, budget.samples, depth, seed);
    let base_dirs = directions_at(a, sys, &points, depth)?;

    let mut rows = Vec::with_capacity(family.len());
    for (idx, member) in members.iter().enumerate() {
        let k = idx + 1;
        let holder = holder_distance(member, a, sys, budget.holder_pairs, seed)?;
        let spectrum = lyapunov_exponents(member, sys, budget.spectrum_n, budget.spectrum_samples, seed)?;
        let gapped = spectral_gap(&spectrum, budget.gap_floor).has_gap;
        let stats = if gapped {
            match directions_at(member, sys, &points, depth) {
                Ok(dirs) => Some(summarize(&good_fraction(&pairwise(&base_dirs, &dirs), epsilon))),
                Err(LabError::NoGap(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        rows.push(GoodSetRow {
            k,
            t: family.t(k),
            holder_dist: holder.total(),
            holder_exact: holder.exact,
            lambda_plus: spectrum.lambda_plus,
            lambda_minus: spectrum.lambda_minus,
            stats,
        });
    }
    Ok(GoodSetReport { rows, epsilon, samples: budget.samples, depth, seed, base_spectrum })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LusinRow {
    /// Cylinder half-length (shift) or box exponent `2^{−scale}` (torus).
    pub scale: usize,
    pub occupied_bins: usize,
    /// Count-weighted mean over bins with ≥ 2 points of the mean angular
    /// distance of `E^u` to the bin's circular mean direction.
    pub dispersion: f64,
}

fn bin_key(x: &BasePoint, scale: usize) -> Vec<u64> {
    match x {
        BasePoint::Shift(p) => {
            let s = scale as i64;
            (-s..s).map(|i| p.symbol(i).map(u64::from).unwrap_or(u64::MAX)).collect()
        }
        BasePoint::Torus(t) => {
            let shift = 64 - scale.min(63) as u32;
            vec![t.u >> shift, t.v >> shift]
        }
    }
}

/// Within-bin dispersion of `θ_u` as bins shrink. Descriptive only.
pub fn lusin_stability_probe(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    samples: usize,
    depth: usize,
    scales: &[usize],
    seed: u64,
) -> Result<Vec<LusinRow>> {
    cocycle.validate(sys)?;
    let max_scale = scales.iter().copied().max().unwrap_or(0);
    let horizon = splitting_horizon(cocycle, depth).max(max_scale + 1);
    let points: Vec<BasePoint> =
        (0..samples).map(|i| sys.sample_point(horizon, &mut stream_rng(seed, i as u64))).collect();
    let dirs = directions_at(cocycle, sys, &points, depth)?;
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let mut bins: BTreeMap<Vec<u64>, Vec<Direction>> = BTreeMap::new();
        for (x, d) in points.iter().zip(&dirs) {
            bins.entry(bin_key(x, scale)).or_default().push(d.0);
        }
        let (mut weighted, mut count) = (0.0, 0usize);
        for members in bins.values().filter(|m| m.len() >= 2) {
            let (c, s) = members.iter().fold((0.0, 0.0), |(c, s), d| {
                let t = 2.0 * d.angle();
                (c + t.cos(), s + t.sin())
            });
            let mean = Direction::from_angle(0.5 * s.atan2(c));
            let spread: f64 = members.iter().map(|d| projective_distance(*d, mean)).sum();
            weighted += spread;
            count += members.len();
        }
        rows.push(LusinRow {
            scale,
            occupied_bins: bins.len(),
            dispersion: if count > 0 { weighted / count as f64 } else { 0.0 },
        });
    }
    Ok(rows)
}
