//! Hölder cocycles `A: M → GL(2, ℝ)`, their products `Aⁿ(x)` for `n ∈ ℤ`,
//! Hölder norms and the fiber-bunching diagnostic.

use rayon::prelude::*;

use crate::base::{stream_rng, BaseKind, BasePoint, BaseSystem, ShiftPoint, TorusPoint};
use crate::error::{LabError, Result};
use crate::expr::MatrixExpr;
use crate::matrix::Matrix2;

/// A matrix-valued map on the base, not necessarily invertible.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixField {
    /// The same matrix everywhere; valid over any base.
    Constant(Matrix2),
    /// Depends on the word `x₀ … x_{depth−1}` of a shift point. `table` is
    /// indexed lexicographically: word `w` sits at `Σ wᵢ · alphabet^{depth−1−i}`.
    LocallyConstant { alphabet: usize, depth: usize, table: Vec<Matrix2> },
    /// Closed-form expression in torus coordinates.
    Pointwise { expr: MatrixExpr, source: String },
}

impl MatrixField {
    pub fn locally_constant(alphabet: usize, depth: usize, table: Vec<Matrix2>) -> Result<Self> {
        if alphabet < 2 || depth == 0 {
            return Err(LabError::InvalidCocycle("need alphabet >= 2 and depth >= 1".into()));
        }
        let expected = alphabet
            .checked_pow(depth as u32)
            .ok_or_else(|| LabError::InvalidCocycle("table too large".into()))?;
        if table.len() != expected {
            return Err(LabError::InvalidCocycle(format!(
                "table has {} entries, expected {expected} = {alphabet}^{depth}",
                table.len()
            )));
        }
        Ok(MatrixField::LocallyConstant { alphabet, depth, table })
    }

    /// One matrix per symbol, depending on `x₀` only.
    pub fn symbol_table(table: Vec<Matrix2>) -> Result<Self> {
        Self::locally_constant(table.len(), 1, table)
    }

    pub fn pointwise(source: &str) -> Result<Self> {
        Ok(MatrixField::Pointwise { expr: MatrixExpr::parse(source)?, source: source.to_string() })
    }

    /// Number of symbols beyond `x₀` read by one evaluation.
    pub fn lookahead(&self) -> usize {
        match self {
            MatrixField::LocallyConstant { depth, .. } => depth - 1,
            _ => 0,
        }
    }

    pub fn eval(&self, x: &BasePoint) -> Result<Matrix2> {
        match (self, x) {
            (MatrixField::Constant(m), _) => Ok(*m),
            (MatrixField::LocallyConstant { alphabet, depth, table }, BasePoint::Shift(p)) => {
                Ok(table[word_index(p, 0, *alphabet, *depth)?])
            }
            (MatrixField::Pointwise { expr, .. }, BasePoint::Torus(p)) => {
                let (u, v) = p.coords();
                Ok(expr.eval(u, v))
            }
            _ => Err(LabError::KindMismatch),
        }
    }

    fn check_base(&self, sys: &BaseSystem) -> Result<()> {
        match (self, &sys.kind) {
            (MatrixField::Constant(_), _) => Ok(()),
            (MatrixField::LocallyConstant { alphabet, .. }, BaseKind::Shift { measure }) => {
                if *alphabet == measure.alphabet() {
                    Ok(())
                } else {
                    Err(LabError::InvalidCocycle(format!(
                        "table alphabet {alphabet} differs from shift alphabet {}",
                        measure.alphabet()
                    )))
                }
            }
            (MatrixField::Pointwise { .. }, BaseKind::Torus { .. }) => Ok(()),
            (MatrixField::LocallyConstant { .. }, _) => {
                Err(LabError::InvalidCocycle("locally constant cocycles need a shift base".into()))
            }
            (MatrixField::Pointwise { .. }, _) => {
                Err(LabError::InvalidCocycle("pointwise cocycles need a torus base".into()))
            }
        }
    }
}

fn word_index(p: &ShiftPoint, start: i64, alphabet: usize, depth: usize) -> Result<usize> {
    let mut idx = 0usize;
    for i in 0..depth as i64 {
        idx = idx * alphabet + p.symbol(start + i)? as usize;
    }
    Ok(idx)
}

/// How a perturbation direction `B` is combined with the base cocycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    /// `A(x) · exp(t B(x))`
    MultiplicativeExp,
    /// `A(x) + t B(x)`
    Additive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub direction: MatrixField,
    pub t: f64,
    pub rule: Composition,
}

/// An r-Hölder cocycle generator `A: M → GL(2, ℝ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle {
    pub field: MatrixField,
    /// Hölder exponent r ∈ (0, 1].
    pub r: f64,
    pub perturbation: Option<Perturbation>,
}

impl Cocycle {
    pub fn new(field: MatrixField, r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(LabError::InvalidCocycle(format!("Hölder exponent {r} not in (0,1]")));
        }
        if let MatrixField::LocallyConstant { table, .. } = &field {
            for m in table {
                m.check_invertible()?;
            }
        }
        if let MatrixField::Constant(m) = &field {
            m.check_invertible()?;
        }
        Ok(Cocycle { field, r, perturbation: None })
    }

    pub fn constant(m: Matrix2) -> Result<Self> {
        Self::new(MatrixField::Constant(m), 1.0)
    }

    pub fn identity() -> Self {
        Cocycle { field: MatrixField::Constant(Matrix2::IDENTITY), r: 1.0, perturbation: None }
    }

    /// Check that the cocycle can be evaluated over `sys`.
    pub fn validate(&self, sys: &BaseSystem) -> Result<()> {
        self.field.check_base(sys)?;
        if let Some(p) = &self.perturbation {
            p.direction.check_base(sys)?;
        }
        Ok(())
    }

    pub fn lookahead(&self) -> usize {
        let own = self.field.lookahead();
        self.perturbation.as_ref().map_or(own, |p| own.max(p.direction.lookahead()))
    }

    /// True when the value does not depend on the point.
    pub fn is_constant(&self) -> bool {
        matches!(self.field, MatrixField::Constant(_))
            && self.perturbation.as_ref().is_none_or(|p| matches!(p.direction, MatrixField::Constant(_)))
    }

    fn eval_raw(&self, x: &BasePoint) -> Result<Matrix2> {
        let a = self.field.eval(x)?;
        Ok(match &self.perturbation {
            None => a,
            Some(p) if p.t == 0.0 => a,
            Some(p) => {
                let b = p.direction.eval(x)?;
                match p.rule {
                    Composition::MultiplicativeExp => a * b.scale(p.t).exp(),
                    Composition::Additive => a + b.scale(p.t),
                }
            }
        })
    }

    /// `A(x)`.
    pub fn evaluate(&self, x: &BasePoint) -> Result<Matrix2> {
        let m = self.eval_raw(x)?;
        m.check_invertible()?;
        Ok(m)
    }

    /// Calls `visit` with `A(f^j x)` for `j = 0, …, n−1` when `n > 0`, or for
    /// `j = −1, −2, …, n` when `n < 0`.
    pub(crate) fn walk_orbit(
        &self,
        sys: &BaseSystem,
        x: &BasePoint,
        n: i64,
        mut visit: impl FnMut(Matrix2) -> Result<()>,
    ) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        match (x, &sys.kind) {
            (BasePoint::Shift(p), BaseKind::Shift { .. }) => {
                let steps: Box<dyn Iterator<Item = i64>> =
                    if n > 0 { Box::new(0..n) } else { Box::new((n..0).rev()) };
                let constant = self.is_constant();
                // Horizon accounting holds even when no symbol is read.
                if n > 0 {
                    p.symbol(n - 1 + self.lookahead() as i64)?;
                } else {
                    p.symbol(n)?;
                }
                for j in steps {
                    let m = if constant {
                        self.evaluate(x)?
                    } else {
                        self.evaluate(&BasePoint::Shift(p.shifted(j)?))?
                    };
                    visit(m)?;
                }
                Ok(())
            }
            (BasePoint::Torus(p), BaseKind::Torus { .. }) => {
                let step = if n > 0 { 1 } else { -1 };
                let mut q = BasePoint::Torus(*p);
                if n < 0 {
                    q = sys.apply_f(&q, -1)?;
                }
                for k in 0..n.unsigned_abs() {
                    if k > 0 {
                        q = sys.apply_f(&q, step)?;
                    }
                    visit(self.evaluate(&q)?)?;
                }
                Ok(())
            }
            _ => Err(LabError::KindMismatch),
        }
    }

    /// Plain product `Aⁿ(x)`. Overflows for long orbits; use
    /// [`Cocycle::product_renormalized`] outside of tests.
    pub fn product(&self, sys: &BaseSystem, x: &BasePoint, n: i64) -> Result<Matrix2> {
        let mut acc = Matrix2::IDENTITY;
        if n > 0 {
            self.walk_orbit(sys, x, n, |m| {
                acc = m * acc;
                Ok(())
            })?;
        } else {
            self.walk_orbit(sys, x, n, |m| {
                acc = m.inverse()? * acc;
                Ok(())
            })?;
        }
        Ok(acc)
    }

    /// `Aⁿ(x)` as `e^{log_scale} · normalized` with `‖normalized‖ = 1`,
    /// rescaling after every factor.
    pub fn product_renormalized(&self, sys: &BaseSystem, x: &BasePoint, n: i64) -> Result<RenormProduct> {
        let mut acc = RenormProduct::identity(0);
        if n > 0 {
            self.walk_orbit(sys, x, n, |m| {
                acc.push_left(m);
                Ok(())
            })?;
        } else {
            self.walk_orbit(sys, x, n, |m| {
                acc.push_left_inverse(m)?;
                Ok(())
            })?;
        }
        acc.steps = n;
        Ok(acc)
    }
}

/// Overflow-safe product: the true value is `e^{log_scale} · normalized`.
///
/// `log_abs_det` is accumulated from the individual factors so the smallest
/// singular value `|det| / ‖·‖` stays accurate even when `normalized` is
/// numerically rank one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormProduct {
    pub normalized: Matrix2,
    pub log_scale: f64,
    pub log_abs_det: f64,
    pub steps: i64,
}

impl RenormProduct {
    pub fn identity(steps: i64) -> Self {
        RenormProduct { normalized: Matrix2::IDENTITY, log_scale: 0.0, log_abs_det: 0.0, steps }
    }

    /// Replace the product `P` by `M·P`.
    pub fn push_left(&mut self, m: Matrix2) {
        self.log_abs_det += m.det().abs().ln();
        self.renormalize(m * self.normalized);
    }

    /// Replace the product `P` by `M⁻¹·P`.
    pub fn push_left_inverse(&mut self, m: Matrix2) -> Result<()> {
        let inv = m.inverse()?;
        self.log_abs_det -= m.det().abs().ln();
        self.renormalize(inv * self.normalized);
        Ok(())
    }

    fn renormalize(&mut self, p: Matrix2) {
        let s = p.norm();
        self.normalized = p.scale(1.0 / s);
        self.log_scale += s.ln();
    }

    /// `log ‖P‖`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale
    }

    /// `log s_min(P) = log ‖P⁻¹‖⁻¹`.
    pub fn log_min_singular(&self) -> f64 {
        self.log_abs_det - self.log_scale
    }

    /// `log (s_max / s_min)`.
    pub fn log_condition(&self) -> f64 {
        2.0 * self.log_scale - self.log_abs_det
    }

    pub fn value(&self) -> Matrix2 {
        self.normalized.scale(self.log_scale.exp())
    }
}

/// `‖A‖_r = sup ‖A(x)‖ + sup ‖A(x) − A(y)‖ / d(x, y)^r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderNorm {
    pub sup_norm: f64,
    pub holder_constant: f64,
    /// False for Monte Carlo lower-bound estimates.
    pub exact: bool,
}

impl HolderNorm {
    pub fn total(&self) -> f64 {
        self.sup_norm + self.holder_constant
    }
}

/// Exact word table of a field that only reads `x₀ … x_{depth−1}`.
fn word_table(
    cocycle: &Cocycle,
    alphabet: usize,
    depth: usize,
) -> Option<Vec<Matrix2>> {
    let shift_like = |f: &MatrixField| matches!(f, MatrixField::Constant(_) | MatrixField::LocallyConstant { .. });
    if !shift_like(&cocycle.field) || !cocycle.perturbation.as_ref().is_none_or(|p| shift_like(&p.direction)) {
        return None;
    }
    let count = alphabet.pow(depth as u32);
    let mut table = Vec::with_capacity(count);
    for idx in 0..count {
        let word = word_digits(idx, alphabet, depth);
        let point = ShiftPoint::from_fn(depth, |i| if i >= 0 && (i as usize) < depth { word[i as usize] } else { 0 });
        table.push(cocycle.eval_raw(&BasePoint::Shift(point)).ok()?);
    }
    Some(table)
}

fn word_digits(mut idx: usize, alphabet: usize, depth: usize) -> Vec<u8> {
    let mut digits = vec![0u8; depth];
    for k in (0..depth).rev() {
        digits[k] = (idx % alphabet) as u8;
        idx /= alphabet;
    }
    digits
}

fn exact_table_norm(table: &[Matrix2], alphabet: usize, depth: usize, lambda: f64, r: f64) -> HolderNorm {
    let sup_norm = table.iter().map(Matrix2::norm).fold(0.0, f64::max);
    let mut holder_constant: f64 = 0.0;
    for i in 0..table.len() {
        let wi = word_digits(i, alphabet, depth);
        for j in (i + 1)..table.len() {
            let wj = word_digits(j, alphabet, depth);
            let k = wi.iter().zip(&wj).position(|(a, b)| a != b).unwrap_or(0);
            let q = (table[i] - table[j]).norm() / lambda.powf(k as f64 * r);
            holder_constant = holder_constant.max(q);
        }
    }
    HolderNorm { sup_norm, holder_constant, exact: true }
}

/// `‖A‖_r`; see [`holder_distance`] for the distance between two cocycles.
pub fn holder_norm(cocycle: &Cocycle, sys: &BaseSystem, pair_samples: usize, seed: u64) -> Result<HolderNorm> {
    holder_of(cocycle, None, sys, pair_samples, seed)
}

/// `‖A − B‖_r`, exact when both are locally constant over a shift.
pub fn holder_distance(
    a: &Cocycle,
    b: &Cocycle,
    sys: &BaseSystem,
    pair_samples: usize,
    seed: u64,
) -> Result<HolderNorm> {
    holder_of(a, Some(b), sys, pair_samples, seed)
}

fn holder_of(
    a: &Cocycle,
    b: Option<&Cocycle>,
    sys: &BaseSystem,
    pair_samples: usize,
    seed: u64,
) -> Result<HolderNorm> {
    if pair_samples == 0 {
        return Err(LabError::InvalidArgument("pair_samples must be >= 1".into()));
    }
    a.validate(sys)?;
    if let Some(b) = b {
        b.validate(sys)?;
    }
    let value = |x: &BasePoint| -> Result<Matrix2> {
        let va = a.eval_raw(x)?;
        Ok(match b {
            Some(b) => va - b.eval_raw(x)?,
            None => va,
        })
    };
    let all_constant = a.is_constant() && b.is_none_or(Cocycle::is_constant);
    if all_constant {
        let m = value(&sys.sample_point(0, &mut stream_rng(seed, 0)))?;
        return Ok(HolderNorm { sup_norm: m.norm(), holder_constant: 0.0, exact: true });
    }
    if let Some(alphabet) = sys.alphabet() {
        let depth = 1 + a.lookahead().max(b.map_or(0, Cocycle::lookahead));
        if let Some(ta) = word_table(a, alphabet, depth) {
            let table = match b {
                None => Some(ta),
                Some(b) => word_table(b, alphabet, depth)
                    .map(|tb| ta.iter().zip(&tb).map(|(x, y)| *x - *y).collect()),
            };
            if let Some(table) = table {
                return Ok(exact_table_norm(&table, alphabet, depth, sys.lambda, a.r));
            }
        }
    }
    // Monte Carlo lower bound: pairs at log-uniform separations.
    let estimates: Vec<(f64, f64)> = (0..pair_samples)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            use rand::Rng;
            let mut rng = stream_rng(seed, i as u64);
            let horizon = 64 + a.lookahead().max(b.map_or(0, Cocycle::lookahead));
            let x = sys.sample_point(horizon, &mut rng);
            let y = match &x {
                BasePoint::Torus(p) => {
                    let scale = 10f64.powf(-rng.random_range(1.0..7.0));
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    BasePoint::Torus(p.displaced(scale * angle.cos(), scale * angle.sin()))
                }
                BasePoint::Shift(p) => {
                    let k = rng.random_range(0..=16i64);
                    let alphabet = sys.alphabet().unwrap_or(2) as u8;
                    let flip = rng.random_range(1..alphabet);
                    let sign = if rng.random::<bool>() { 1 } else { -1 };
                    let target = sign * k;
                    BasePoint::Shift(ShiftPoint::from_fn(p.horizon(), |i| {
                        let s = p.symbol(i).unwrap_or(0);
                        if i == target { (s + flip) % alphabet } else { s }
                    }))
                }
            };
            let (vx, vy) = (value(&x)?, value(&y)?);
            let d = sys.distance(&x, &y)?;
            let q = if d > 0.0 { (vx - vy).norm() / d.powf(a.r) } else { 0.0 };
            Ok((vx.norm().max(vy.norm()), q))
        })
        .collect::<Result<_>>()?;
    let sup_norm = estimates.iter().map(|e| e.0).fold(0.0, f64::max);
    let holder_constant = estimates.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(HolderNorm { sup_norm, holder_constant, exact: false })
}

/// Verdict margin on the fitted θ̂.
pub const BUNCHING_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BunchingVerdict {
    Bunched,
    NotBunched,
    Inconclusive,
}

impl BunchingVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            BunchingVerdict::Bunched => "bunched",
            BunchingVerdict::NotBunched => "not_bunched",
            BunchingVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Sampled suprema `b_n = max ‖Aⁿ(x)‖ ‖Aⁿ(x)⁻¹‖ λ^{nr}` and the fitted
/// bound `b_n ≈ C₃ θⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BunchingReport {
    /// `log b_n` for `n = 0..=n_max`.
    pub log_b: Vec<f64>,
    pub theta_hat: f64,
    pub c3_hat: f64,
    pub verdict: BunchingVerdict,
    pub samples: usize,
    pub exact: bool,
}

impl BunchingReport {
    pub fn n_max(&self) -> usize {
        self.log_b.len() - 1
    }

    pub fn b(&self, n: usize) -> f64 {
        self.log_b[n].exp()
    }

    pub fn fitted(&self, n: usize) -> f64 {
        self.c3_hat * self.theta_hat.powi(n as i32)
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

pub fn bunching_check(
    cocycle: &Cocycle,
    sys: &BaseSystem,
    n_max: usize,
    x_samples: usize,
    seed: u64,
) -> Result<BunchingReport> {
    if n_max < 2 {
        return Err(LabError::InvalidArgument("n_max must be >= 2".into()));
    }
    cocycle.validate(sys)?;
    let exact = cocycle.is_constant();
    let samples = if exact { 1 } else { x_samples.max(1) };
    let horizon = n_max + cocycle.lookahead() + 1;
    let rate = cocycle.r * sys.lambda.ln();
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let x = sys.sample_point(horizon, &mut stream_rng(seed, i as u64));
            let mut acc = RenormProduct::identity(0);
            let mut log_b = Vec::with_capacity(n_max + 1);
            log_b.push(0.0);
            let mut n = 0;
            cocycle.walk_orbit(sys, &x, n_max as i64, |m| {
                acc.push_left(m);
                n += 1;
                log_b.push(acc.log_condition() + n as f64 * rate);
                Ok(())
            })?;
            Ok(log_b)
        })
        .collect::<Result<_>>()?;
    let log_b: Vec<f64> = (0..=n_max)
        .map(|n| per_sample.iter().map(|s| s[n]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let tail: Vec<usize> = (n_max / 2..=n_max).collect();
    let xs: Vec<f64> = tail.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|&n| log_b[n]).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    let theta_hat = slope.exp();
    let verdict = if theta_hat <= 1.0 - BUNCHING_MARGIN {
        BunchingVerdict::Bunched
    } else if theta_hat >= 1.0 + BUNCHING_MARGIN {
        BunchingVerdict::NotBunched
    } else {
        BunchingVerdict::Inconclusive
    };
    Ok(BunchingReport { log_b, theta_hat, c3_hat: intercept.exp(), verdict, samples, exact })
}

/// Torus-coordinate point helper for pointwise cocycles.
pub fn torus_point(u: f64, v: f64) -> BasePoint {
    BasePoint::Torus(TorusPoint::from_coords(u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::ShiftMeasure;

    fn shift() -> BaseSystem {
        BaseSystem::full_shift(ShiftMeasure::uniform(2), 0.5).unwrap()
    }

    fn two_symbol(a: Matrix2, b: Matrix2) -> Cocycle {
        Cocycle::new(MatrixField::symbol_table(vec![a, b]).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let c = two_symbol(Matrix2::diag(2.0, 0.5), Matrix2::diag(3.0, 1.0 / 3.0));
        let x = BasePoint::Shift(ShiftPoint::from_fn(3, |i| u8::from(i == 0)));
        assert_eq!(c.evaluate(&x).unwrap(), Matrix2::diag(3.0, 1.0 / 3.0));

        let k = Cocycle::constant(Matrix2::new(1.0, 2.0, 3.0, 4.0)).unwrap();
        assert_eq!(k.evaluate(&torus_point(0.3, 0.1)).unwrap(), Matrix2::new(1.0, 2.0, 3.0, 4.0));

        let rot = Cocycle::new(MatrixField::pointwise("rot(2*pi*u)").unwrap(), 1.0).unwrap();
        let m = rot.evaluate(&torus_point(0.25, 0.77)).unwrap();
        assert!(m.max_abs_diff(&Matrix2::rotation(std::f64::consts::FRAC_PI_2)) < 1e-15);
    }

    #[test]
    fn singular_values_rejected() {
        assert!(Cocycle::constant(Matrix2::new(1.0, 1.0, 1.0, 1.0)).is_err());
        let c = Cocycle::new(MatrixField::pointwise("diag(u, 1)").unwrap(), 1.0).unwrap();
        assert!(matches!(c.evaluate(&torus_point(0.0, 0.5)), Err(LabError::SingularValue { .. })));
    }

    #[test]
    fn product_examples() {
        let sys = shift();
        let x = sys.sample_point(10, &mut stream_rng(0, 0));
        let c = Cocycle::constant(Matrix2::diag(2.0, 0.5)).unwrap();
        assert_eq!(c.product(&sys, &x, 0).unwrap(), Matrix2::IDENTITY);
        assert_eq!(c.product(&sys, &x, 3).unwrap(), Matrix2::diag(8.0, 0.125));
        assert_eq!(c.product(&sys, &x, -2).unwrap(), Matrix2::diag(0.25, 4.0));
    }

    #[test]
    fn negative_product_is_inverse_of_shifted_forward() {
        let sys = shift();
        let c = two_symbol(Matrix2::new(1.0, 0.3, -0.2, 1.5), Matrix2::new(0.7, -1.0, 0.4, 0.9));
        let x = sys.sample_point(20, &mut stream_rng(3, 1));
        let back = c.product(&sys, &x, -7).unwrap();
        let fwd = c.product(&sys, &sys.apply_f(&x, -7).unwrap(), 7).unwrap();
        assert!((back * fwd).max_abs_diff(&Matrix2::IDENTITY) < 1e-12);
    }

    #[test]
    fn renormalized_examples() {
        let sys = shift();
        let x = sys.sample_point(12, &mut stream_rng(0, 0));
        let c = Cocycle::constant(Matrix2::diag(2.0, 0.5)).unwrap();
        let p = c.product_renormalized(&sys, &x, 10).unwrap();
        assert!((p.log_scale - 10.0 * 2f64.ln()).abs() < 1e-12);
        assert!(p.normalized.max_abs_diff(&Matrix2::diag(1.0, 2f64.powi(-20))) < 1e-15);
        let plain = c.product(&sys, &x, 10).unwrap();
        assert!(p.value().max_abs_diff(&plain) / plain.norm() < 1e-12);

        let z = c.product_renormalized(&sys, &x, 0).unwrap();
        assert_eq!((z.log_scale, z.normalized), (0.0, Matrix2::IDENTITY));
    }

    #[test]
    fn renormalized_identity_over_long_orbit() {
        let torus = BaseSystem::torus([[2, 1], [1, 1]]).unwrap();
        let p = Cocycle::identity().product_renormalized(&torus, &torus_point(0.3, 0.4), 1_000_000).unwrap();
        assert_eq!(p.log_scale, 0.0);
    }

    #[test]
    fn renormalized_does_not_overflow() {
        let torus = BaseSystem::torus([[2, 1], [1, 1]]).unwrap();
        let c = Cocycle::constant(Matrix2::new(1000.0, 3.0, -2.0, 1000.0)).unwrap();
        let p = c.product_renormalized(&torus, &torus_point(0.1, 0.2), 1_000_000).unwrap();
        assert!(p.log_scale.is_finite() && p.normalized.is_finite());
        assert!((p.normalized.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holder_norm_examples() {
        let sys = shift();
        let k = Cocycle::constant(Matrix2::diag(2.0, 0.5)).unwrap();
        let h = holder_norm(&k, &sys, 10, 0).unwrap();
        assert_eq!((h.sup_norm, h.holder_constant, h.exact), (2.0, 0.0, true));

        let c = two_symbol(Matrix2::diag(2.0, 0.5), Matrix2::diag(0.5, 2.0));
        let h = holder_norm(&c, &sys, 10, 0).unwrap();
        assert!(h.exact);
        assert!((h.sup_norm - 2.0).abs() < 1e-15);
        assert!((h.holder_constant - 1.5).abs() < 1e-15);
        assert!((h.total() - 3.5).abs() < 1e-15);

        let id = holder_norm(&Cocycle::identity(), &sys, 10, 0).unwrap();
        assert_eq!((id.sup_norm, id.holder_constant), (1.0, 0.0));
    }

    #[test]
    fn holder_norm_depth_two_uses_first_difference() {
        let sys = shift();
        // Value differs only through x₁: pairs differ first at index 1, d = λ₀.
        let a = Matrix2::diag(1.0, 1.0);
        let b = Matrix2::diag(2.0, 1.0);
        let field = MatrixField::locally_constant(2, 2, vec![a, b, a, b]).unwrap();
        let c = Cocycle::new(field, 1.0).unwrap();
        let h = holder_norm(&c, &sys, 1, 0).unwrap();
        assert!((h.holder_constant - 1.0 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn pointwise_holder_estimate_is_a_lower_bound() {
        let torus = BaseSystem::torus([[2, 1], [1, 1]]).unwrap();
        let c = Cocycle::new(MatrixField::pointwise("rot(2*pi*u)").unwrap(), 1.0).unwrap();
        let h = holder_norm(&c, &torus, 2000, 1).unwrap();
        assert!(!h.exact);
        // ‖R(2πu) − R(2πu')‖ ≤ 2π|u − u'| ≤ 2π d.
        assert!(h.holder_constant <= 2.0 * std::f64::consts::PI + 1e-6);
        assert!(h.holder_constant > 5.0);
        assert!((h.sup_norm - 1.0).abs() < 1e-12, "{h:?}");
    }

    #[test]
    fn bunching_examples() {
        let sys = shift();
        let root = 2f64.powf(0.25);
        let mild = Cocycle::constant(Matrix2::diag(root, 1.0 / root)).unwrap();
        let r = bunching_check(&mild, &sys, 40, 10, 0).unwrap();
        assert_eq!(r.verdict, BunchingVerdict::Bunched);
        assert!((r.theta_hat - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(r.exact && r.samples == 1);

        let strong = Cocycle::constant(Matrix2::diag(2.0, 0.5)).unwrap();
        let r = bunching_check(&strong, &sys, 40, 10, 0).unwrap();
        assert_eq!(r.verdict, BunchingVerdict::NotBunched);
        assert!((r.theta_hat - 2.0).abs() < 1e-9);
        assert!((r.b(10) - 1024.0).abs() < 1e-6);

        let r = bunching_check(&Cocycle::identity(), &sys, 20, 10, 0).unwrap();
        assert_eq!(r.verdict, BunchingVerdict::Bunched);
        assert!((r.b(7) - 0.5f64.powi(7)).abs() < 1e-15);
    }

    #[test]
    fn bunching_of_sampled_cocycle() {
        let sys = shift();
        let a = Matrix2::diag(1.2, 1.0 / 1.2);
        let c = two_symbol(a, Matrix2::rotation(0.1) * a);
        let r = bunching_check(&c, &sys, 60, 64, 5).unwrap();
        assert!(!r.exact);
        assert_eq!(r.verdict, BunchingVerdict::Bunched);
        assert!(r.theta_hat <= 0.72 + 1e-9);
    }

    #[test]
    fn bunching_needs_two_steps() {
        assert!(bunching_check(&Cocycle::identity(), &shift(), 1, 1, 0).is_err());
    }

    #[test]
    fn kind_mismatch_detected() {
        let torus = BaseSystem::torus([[2, 1], [1, 1]]).unwrap();
        let c = two_symbol(Matrix2::IDENTITY, Matrix2::diag(2.0, 0.5));
        assert!(c.validate(&torus).is_err());
        let p = Cocycle::new(MatrixField::pointwise("rot(u)").unwrap(), 1.0).unwrap();
        assert!(p.validate(&shift()).is_err());
    }
}
