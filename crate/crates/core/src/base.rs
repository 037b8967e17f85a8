//! Hyperbolic base dynamics: the two-sided full shift and hyperbolic toral
//! automorphisms, with their metrics, invariant measures and local product
//! structure.
//!
//! Shift points are finite symbol windows with an explicit horizon: every
//! orbit access outside the window is a [`LabError::HorizonExceeded`], never a
//! silent wraparound. Torus points live on the dyadic lattice
//! `(ℤ/2⁶⁴)²`, which an integer matrix of determinant ±1 permutes, so orbit
//! arithmetic is exact and composes bit-for-bit.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};

const TWO_64: f64 = 18_446_744_073_709_551_616.0;

/// Default metric base for the shift, `d(x, y) = λ₀^k`.
pub const DEFAULT_SHIFT_LAMBDA: f64 = 0.5;
/// Default local scales `ε = τ` for the torus.
pub const DEFAULT_TORUS_SCALE: f64 = 0.2;

/// Deterministic random stream `stream` of the master `seed`.
///
/// Streams are independent ChaCha8 sequences, so per-sample work can run in
/// any order and still reproduce.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Invariant measure on the full shift.
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftMeasure {
    Bernoulli { weights: Vec<f64> },
    Markov { transition: Vec<Vec<f64>>, stationary: Vec<f64> },
}

impl ShiftMeasure {
    pub fn bernoulli(weights: Vec<f64>) -> Result<Self> {
        check_probability_vector(&weights, "Bernoulli weights")?;
        Ok(ShiftMeasure::Bernoulli { weights })
    }

    pub fn uniform(alphabet: usize) -> Self {
        ShiftMeasure::Bernoulli { weights: vec![1.0 / alphabet as f64; alphabet] }
    }

    /// Stationary Markov measure. The chain must be irreducible and aperiodic.
    pub fn markov(transition: Vec<Vec<f64>>) -> Result<Self> {
        let a = transition.len();
        if a < 2 || transition.iter().any(|row| row.len() != a) {
            return Err(LabError::InvalidSystem("transition matrix must be square with size >= 2".into()));
        }
        for row in &transition {
            check_probability_vector(row, "transition row")?;
        }
        if !is_primitive(&transition) {
            return Err(LabError::InvalidSystem(
                "Markov chain must be irreducible and aperiodic".into(),
            ));
        }
        let stationary = stationary_vector(&transition);
        Ok(ShiftMeasure::Markov { transition, stationary })
    }

    pub fn alphabet(&self) -> usize {
        match self {
            ShiftMeasure::Bernoulli { weights } => weights.len(),
            ShiftMeasure::Markov { stationary, .. } => stationary.len(),
        }
    }
}

fn check_probability_vector(w: &[f64], what: &str) -> Result<()> {
    if w.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(LabError::InvalidSystem(format!("{what} must be non-negative")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(LabError::InvalidSystem(format!("{what} sum to {total}, expected 1")));
    }
    Ok(())
}

// Wielandt: a primitive a×a matrix has P^k > 0 for some k <= (a-1)^2 + 1.
fn is_primitive(p: &[Vec<f64>]) -> bool {
    let a = p.len();
    let support: Vec<Vec<bool>> = p.iter().map(|r| r.iter().map(|&x| x > 0.0).collect()).collect();
    let mut power = support.clone();
    for _ in 0..((a - 1) * (a - 1) + 1) {
        if power.iter().all(|r| r.iter().all(|&b| b)) {
            return true;
        }
        let mut next = vec![vec![false; a]; a];
        for i in 0..a {
            for j in 0..a {
                next[i][j] = (0..a).any(|k| power[i][k] && support[k][j]);
            }
        }
        power = next;
    }
    power.iter().all(|r| r.iter().all(|&b| b))
}

fn stationary_vector(p: &[Vec<f64>]) -> Vec<f64> {
    let a = p.len();
    let mut pi = vec![1.0 / a as f64; a];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; a];
        for (i, row) in p.iter().enumerate() {
            for (j, &pij) in row.iter().enumerate() {
                next[j] += pi[i] * pij;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change: f64 = next.iter().zip(&pi).map(|(x, y)| (x - y).abs()).sum();
        pi = next;
        if change < 1e-14 {
            break;
        }
    }
    pi
}

/// Which concrete base map.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseKind {
    Shift { measure: ShiftMeasure },
    Torus { matrix: [[i64; 2]; 2], inverse: [[i64; 2]; 2], stable: [f64; 2], unstable: [f64; 2] },
}

/// A hyperbolic homeomorphism with local product structure together with
/// its hyperbolicity constants and invariant measure.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSystem {
    pub kind: BaseKind,
    /// Contraction rate λ ∈ (0, 1).
    pub lambda: f64,
    /// Hyperbolicity constant C₁ ≥ 1.
    pub c1: f64,
    /// Local leaf scale ε.
    pub epsilon: f64,
    /// Bracket scale τ.
    pub tau: f64,
}

impl BaseSystem {
    /// Two-sided full shift on `measure.alphabet()` symbols with metric base
    /// `lambda0`. C₁ = 1 holds exactly for this metric.
    pub fn full_shift(measure: ShiftMeasure, lambda0: f64) -> Result<Self> {
        if measure.alphabet() < 2 {
            return Err(LabError::InvalidSystem("alphabet size must be >= 2".into()));
        }
        if !(lambda0 > 0.0 && lambda0 < 1.0) {
            return Err(LabError::InvalidSystem(format!("metric base {lambda0} not in (0,1)")));
        }
        Ok(BaseSystem { kind: BaseKind::Shift { measure }, lambda: lambda0, c1: 1.0, epsilon: 1.0, tau: 1.0 })
    }

    /// Hyperbolic toral automorphism with Lebesgue measure.
    pub fn torus(matrix: [[i64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        let det = a * d - b * c;
        if det.abs() != 1 {
            return Err(LabError::InvalidSystem(format!("torus matrix determinant {det} is not ±1")));
        }
        let tr = a + d;
        let disc = tr * tr - 4 * det;
        // Real eigenvalues, neither equal to ±1.
        if disc <= 0 || 1 - tr + det == 0 || 1 + tr + det == 0 {
            return Err(LabError::InvalidSystem("torus matrix is not hyperbolic".into()));
        }
        let root = (disc as f64).sqrt();
        let mu1 = (tr as f64 + root) / 2.0;
        let mu2 = (tr as f64 - root) / 2.0;
        let (mu_u, mu_s) = if mu1.abs() > mu2.abs() { (mu1, mu2) } else { (mu2, mu1) };
        let m = crate::matrix::Matrix2::new(a as f64, b as f64, c as f64, d as f64);
        let eigvec = |mu: f64| -> [f64; 2] {
            let v = if b != 0 { [m.b, mu - m.a] } else { [mu - m.d, m.c] };
            let n = v[0].hypot(v[1]);
            [v[0] / n, v[1] / n]
        };
        let inverse = [[d * det, -b * det], [-c * det, a * det]];
        Ok(BaseSystem {
            kind: BaseKind::Torus { matrix, inverse, stable: eigvec(mu_s), unstable: eigvec(mu_u) },
            lambda: mu_s.abs(),
            c1: 1.0,
            epsilon: DEFAULT_TORUS_SCALE,
            tau: DEFAULT_TORUS_SCALE,
        })
    }

    pub fn with_scales(mut self, epsilon: f64, tau: f64) -> Result<Self> {
        if !(epsilon > 0.0 && tau > 0.0) {
            return Err(LabError::InvalidSystem("epsilon and tau must be positive".into()));
        }
        self.epsilon = epsilon;
        self.tau = tau;
        Ok(self)
    }

    pub fn with_c1(mut self, c1: f64) -> Result<Self> {
        if !(c1 >= 1.0) {
            return Err(LabError::InvalidSystem("C1 must be >= 1".into()));
        }
        self.c1 = c1;
        Ok(self)
    }

    pub fn is_shift(&self) -> bool {
        matches!(self.kind, BaseKind::Shift { .. })
    }

    pub fn alphabet(&self) -> Option<usize> {
        match &self.kind {
            BaseKind::Shift { measure } => Some(measure.alphabet()),
            BaseKind::Torus { .. } => None,
        }
    }

    /// `f^j(x)`.
    pub fn apply_f(&self, x: &BasePoint, j: i64) -> Result<BasePoint> {
        match (&self.kind, x) {
            (BaseKind::Shift { .. }, BasePoint::Shift(p)) => p.shifted(j).map(BasePoint::Shift),
            (BaseKind::Torus { matrix, inverse, .. }, BasePoint::Torus(p)) => {
                let m = if j >= 0 { matrix } else { inverse };
                let mut q = *p;
                for _ in 0..j.unsigned_abs() {
                    q = q.mapped(m);
                }
                Ok(BasePoint::Torus(q))
            }
            _ => Err(LabError::KindMismatch),
        }
    }

    /// Base metric: `λ₀^k` on the shift, the flat max-circle metric on the torus.
    pub fn distance(&self, x: &BasePoint, y: &BasePoint) -> Result<f64> {
        match (x, y) {
            (BasePoint::Shift(p), BasePoint::Shift(q)) if self.is_shift() => {
                Ok(match p.first_disagreement(q) {
                    Some(k) => self.lambda.powi(k as i32),
                    None => 0.0,
                })
            }
            (BasePoint::Torus(p), BasePoint::Torus(q)) if !self.is_shift() => {
                Ok(circle_distance(p.u, q.u).max(circle_distance(p.v, q.v)))
            }
            _ => Err(LabError::KindMismatch),
        }
    }

    /// Draw a point from the invariant measure. Shift points get a window of
    /// `2·horizon + 1` symbols centred at offset 0.
    pub fn sample_point<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> BasePoint {
        match &self.kind {
            BaseKind::Shift { measure } => {
                let len = 2 * horizon + 1;
                let mut window = Vec::with_capacity(len);
                match measure {
                    ShiftMeasure::Bernoulli { weights } => {
                        for _ in 0..len {
                            window.push(draw(weights, rng));
                        }
                    }
                    ShiftMeasure::Markov { transition, stationary } => {
                        let mut s = draw(stationary, rng);
                        window.push(s);
                        for _ in 1..len {
                            s = draw(&transition[s as usize], rng);
                            window.push(s);
                        }
                    }
                }
                BasePoint::Shift(ShiftPoint::new(window, horizon).expect("window length matches horizon"))
            }
            BaseKind::Torus { .. } => BasePoint::Torus(TorusPoint { u: rng.random(), v: rng.random() }),
        }
    }

    /// The bracket `[x, y] = W^s_ε(x) ∩ W^u_ε(y)`.
    pub fn bracket(&self, x: &BasePoint, y: &BasePoint) -> Result<BasePoint> {
        let distance = self.distance(x, y)?;
        if distance > self.tau {
            return Err(LabError::PointsTooFar { distance, tau: self.tau });
        }
        match (&self.kind, x, y) {
            (BaseKind::Shift { .. }, BasePoint::Shift(p), BasePoint::Shift(q)) => {
                // Future of x, past of y; the result keeps x's window layout.
                let mut window = p.window.to_vec();
                let first = -(p.horizon as i64) - p.offset;
                for i in first..0 {
                    window[(p.offset + i + p.horizon as i64) as usize] = q.symbol(i)?;
                }
                Ok(BasePoint::Shift(ShiftPoint { window: window.into(), horizon: p.horizon, offset: p.offset }))
            }
            (BaseKind::Torus { stable, unstable, .. }, BasePoint::Torus(p), BasePoint::Torus(q)) => {
                let du = signed_lattice_diff(q.u, p.u);
                let dv = signed_lattice_diff(q.v, p.v);
                // s·e_s − t·e_u = y − x
                let det = stable[0] * (-unstable[1]) - (-unstable[0]) * stable[1];
                let s = (du * (-unstable[1]) - (-unstable[0]) * dv) / det;
                Ok(BasePoint::Torus(p.displaced(s * stable[0], s * stable[1])))
            }
            _ => Err(LabError::KindMismatch),
        }
    }

    /// Measure how `d(f^{±n}x, f^{±n}y)` compares with `C₁λⁿ d(x, y)`.
    pub fn local_leaf_check(&self, x: &BasePoint, y: &BasePoint, side: LeafSide, n_max: usize) -> Result<LeafReport> {
        let sign = match side {
            LeafSide::Stable => 1,
            LeafSide::Unstable => -1,
        };
        let d0 = self.distance(x, y)?;
        let mut ratios = Vec::with_capacity(n_max + 1);
        let (mut xn, mut yn) = (x.clone(), y.clone());
        for n in 0..=n_max {
            if n > 0 {
                xn = self.apply_f(&xn, sign)?;
                yn = self.apply_f(&yn, sign)?;
            }
            let dn = self.distance(&xn, &yn)?;
            ratios.push(if d0 == 0.0 { 0.0 } else { dn / (self.lambda.powi(n as i32) * d0) });
        }
        let violation = ratios.iter().any(|&r| r > self.c1 * (1.0 + 1e-9));
        Ok(LeafReport { side, ratios, violation })
    }
}

fn draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if u < acc && w > 0.0 {
            return i as u8;
        }
    }
    last_positive as u8
}

fn circle_distance(a: u64, b: u64) -> f64 {
    let d = a.wrapping_sub(b);
    d.min(d.wrapping_neg()) as f64 / TWO_64
}

/// `a − b` on the circle as a representative in `[−1/2, 1/2)`.
fn signed_lattice_diff(a: u64, b: u64) -> f64 {
    a.wrapping_sub(b) as i64 as f64 / TWO_64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafSide {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafReport {
    pub side: LeafSide,
    /// `d(f^{±n}x, f^{±n}y) / (λⁿ d(x, y))` for `n = 0..=n_max`.
    pub ratios: Vec<f64>,
    pub violation: bool,
}

/// A point of the base space.
#[derive(Debug, Clone, PartialEq)]
pub enum BasePoint {
    Shift(ShiftPoint),
    Torus(TorusPoint),
}

impl BasePoint {
    pub fn as_shift(&self) -> Option<&ShiftPoint> {
        match self {
            BasePoint::Shift(p) => Some(p),
            BasePoint::Torus(_) => None,
        }
    }

    pub fn as_torus(&self) -> Option<&TorusPoint> {
        match self {
            BasePoint::Torus(p) => Some(p),
            BasePoint::Shift(_) => None,
        }
    }
}

/// A bi-infinite sequence truncated to indices `[−H, H]`, viewed from the
/// current position `offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftPoint {
    window: Arc<[u8]>,
    horizon: usize,
    offset: i64,
}

impl ShiftPoint {
    /// `window[k]` holds the symbol at index `k − horizon`.
    pub fn new(window: Vec<u8>, horizon: usize) -> Result<Self> {
        if window.len() != 2 * horizon + 1 {
            return Err(LabError::InvalidArgument(format!(
                "window of length {} does not match horizon {horizon}",
                window.len()
            )));
        }
        Ok(ShiftPoint { window: window.into(), horizon, offset: 0 })
    }

    /// Window whose symbol at index `i ∈ [−H, H]` is `f(i)`.
    pub fn from_fn(horizon: usize, f: impl Fn(i64) -> u8) -> Self {
        let h = horizon as i64;
        ShiftPoint { window: (-h..=h).map(f).collect::<Vec<_>>().into(), horizon, offset: 0 }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Largest `R` such that every index in `[−R, R]` relative to the
    /// current position is readable.
    pub fn reach(&self) -> usize {
        self.horizon - self.offset.unsigned_abs() as usize
    }

    /// Symbol `x_i` of the current point.
    pub fn symbol(&self, i: i64) -> Result<u8> {
        let g = self.offset + i;
        if g.unsigned_abs() as usize > self.horizon {
            return Err(LabError::HorizonExceeded { requested: g, horizon: self.horizon });
        }
        Ok(self.window[(g + self.horizon as i64) as usize])
    }

    pub fn shifted(&self, j: i64) -> Result<Self> {
        let g = self.offset + j;
        if g.unsigned_abs() as usize > self.horizon {
            return Err(LabError::HorizonExceeded { requested: g, horizon: self.horizon });
        }
        Ok(ShiftPoint { window: Arc::clone(&self.window), horizon: self.horizon, offset: g })
    }

    /// Smallest `|i|` with `x_i ≠ y_i` within the common reach.
    pub fn first_disagreement(&self, other: &ShiftPoint) -> Option<usize> {
        let reach = self.reach().min(other.reach()) as i64;
        (0..=reach).find(|&k| {
            self.symbol(k).ok() != other.symbol(k).ok() || self.symbol(-k).ok() != other.symbol(-k).ok()
        })
        .map(|k| k as usize)
    }
}

/// A torus point `(u, v) = (k₁, k₂) / 2⁶⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusPoint {
    pub u: u64,
    pub v: u64,
}

impl TorusPoint {
    /// Nearest lattice point to `(u, v)` reduced mod 1.
    pub fn from_coords(u: f64, v: f64) -> Self {
        TorusPoint { u: to_lattice(u), v: to_lattice(v) }
    }

    pub fn coords(&self) -> (f64, f64) {
        (self.u as f64 / TWO_64, self.v as f64 / TWO_64)
    }

    fn mapped(&self, m: &[[i64; 2]; 2]) -> Self {
        let w = |r: [i64; 2]| (r[0] as u64).wrapping_mul(self.u).wrapping_add((r[1] as u64).wrapping_mul(self.v));
        TorusPoint { u: w(m[0]), v: w(m[1]) }
    }

    /// The point translated by `(du, dv)` with `|du|, |dv| < 1/2`.
    pub fn displaced(&self, du: f64, dv: f64) -> Self {
        let step = |x: f64| (x * TWO_64).round() as i128 as u64;
        TorusPoint { u: self.u.wrapping_add(step(du)), v: self.v.wrapping_add(step(dv)) }
    }
}

fn to_lattice(x: f64) -> u64 {
    let r = x.rem_euclid(1.0);
    // r * 2^64 is exact; 1.0 can appear from rounding of tiny negatives.
    let scaled = r * TWO_64;
    if scaled >= TWO_64 {
        0
    } else {
        scaled as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> BaseSystem {
        BaseSystem::torus([[2, 1], [1, 1]]).unwrap()
    }

    fn shift() -> BaseSystem {
        BaseSystem::full_shift(ShiftMeasure::uniform(2), 0.5).unwrap()
    }

    #[test]
    fn torus_fixed_point_and_half_point() {
        let sys = cat();
        let origin = BasePoint::Torus(TorusPoint::from_coords(0.0, 0.0));
        assert_eq!(sys.apply_f(&origin, 5).unwrap(), origin);
        let half = BasePoint::Torus(TorusPoint::from_coords(0.5, 0.5));
        let image = sys.apply_f(&half, 1).unwrap();
        assert_eq!(image.as_torus().unwrap().coords(), (0.5, 0.0));
    }

    #[test]
    fn shift_identity_and_horizon() {
        let sys = shift();
        let x = sys.sample_point(4, &mut stream_rng(1, 0));
        assert_eq!(sys.apply_f(&x, 0).unwrap(), x);
        assert!(sys.apply_f(&x, 4).is_ok());
        assert!(matches!(sys.apply_f(&x, 5), Err(LabError::HorizonExceeded { .. })));
        let y = sys.apply_f(&x, 3).unwrap();
        assert!(matches!(sys.apply_f(&y, 2), Err(LabError::HorizonExceeded { requested: 5, .. })));
        assert!(sys.apply_f(&y, -7).is_ok());
    }

    #[test]
    fn shift_distance_examples() {
        let sys = shift();
        let x = ShiftPoint::from_fn(10, |_| 0);
        let y = ShiftPoint::from_fn(10, |i| u8::from(i == -3));
        let (bx, by) = (BasePoint::Shift(x.clone()), BasePoint::Shift(y));
        assert_eq!(sys.distance(&bx, &bx).unwrap(), 0.0);
        assert_eq!(sys.distance(&bx, &by).unwrap(), 0.125);
        let z = BasePoint::Shift(ShiftPoint::from_fn(10, |i| u8::from(i == 0)));
        assert_eq!(sys.distance(&bx, &z).unwrap(), 1.0);
    }

    #[test]
    fn torus_distance_example() {
        let sys = cat();
        let x = BasePoint::Torus(TorusPoint::from_coords(0.1, 0.9));
        let y = BasePoint::Torus(TorusPoint::from_coords(0.9, 0.1));
        assert!((sys.distance(&x, &y).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn degenerate_bernoulli_gives_zero_window() {
        let sys = BaseSystem::full_shift(ShiftMeasure::bernoulli(vec![1.0, 0.0]).unwrap(), 0.5).unwrap();
        let x = sys.sample_point(50, &mut stream_rng(9, 3));
        let p = x.as_shift().unwrap();
        assert!((-50..=50).all(|i| p.symbol(i).unwrap() == 0));
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let sys = shift();
        let a = sys.sample_point(20, &mut stream_rng(42, 7));
        let b = sys.sample_point(20, &mut stream_rng(42, 7));
        let c = sys.sample_point(20, &mut stream_rng(42, 8));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fair_coin_frequency() {
        let sys = shift();
        let x = sys.sample_point(10_000, &mut stream_rng(5, 0));
        let p = x.as_shift().unwrap();
        let zeros = (-10_000..=10_000).filter(|&i| p.symbol(i).unwrap() == 0).count();
        let freq = zeros as f64 / 20_001.0;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn bracket_examples() {
        let sys = shift();
        let zeros = BasePoint::Shift(ShiftPoint::from_fn(6, |_| 0));
        let ones = BasePoint::Shift(ShiftPoint::from_fn(6, |_| 1));
        let spliced = sys.bracket(&zeros, &ones).unwrap();
        let expected = BasePoint::Shift(ShiftPoint::from_fn(6, |i| u8::from(i < 0)));
        assert_eq!(spliced, expected);
        assert_eq!(sys.bracket(&zeros, &zeros).unwrap(), zeros);

        let torus = cat();
        let o = BasePoint::Torus(TorusPoint::from_coords(0.0, 0.0));
        assert_eq!(torus.bracket(&o, &o).unwrap(), o);
    }

    #[test]
    fn bracket_rejects_distant_points() {
        let sys = cat();
        let x = BasePoint::Torus(TorusPoint::from_coords(0.0, 0.0));
        let y = BasePoint::Torus(TorusPoint::from_coords(0.4, 0.4));
        assert!(matches!(sys.bracket(&x, &y), Err(LabError::PointsTooFar { .. })));
    }

    #[test]
    fn torus_bracket_lies_on_both_leaves() {
        let sys = cat();
        let BaseKind::Torus { stable, unstable, .. } = sys.kind.clone() else { unreachable!() };
        let x = TorusPoint::from_coords(0.3, 0.6);
        let y = TorusPoint::from_coords(0.35, 0.55);
        let z = sys.bracket(&BasePoint::Torus(x), &BasePoint::Torus(y)).unwrap();
        let z = *z.as_torus().unwrap();
        // z − x parallel to e_s, z − y parallel to e_u.
        let cross = |d: [f64; 2], e: [f64; 2]| d[0] * e[1] - d[1] * e[0];
        let zx = [signed_lattice_diff(z.u, x.u), signed_lattice_diff(z.v, x.v)];
        let zy = [signed_lattice_diff(z.u, y.u), signed_lattice_diff(z.v, y.v)];
        assert!(cross(zx, stable).abs() < 1e-15);
        assert!(cross(zy, unstable).abs() < 1e-15);
    }

    #[test]
    fn stable_splice_contracts_at_exact_rate() {
        let sys = shift();
        let mut rng = stream_rng(11, 0);
        let x = sys.sample_point(40, &mut rng);
        let other = sys.sample_point(40, &mut rng);
        // Same future as x, different past.
        let y = sys.bracket(&x, &other).unwrap();
        let report = sys.local_leaf_check(&x, &y, LeafSide::Stable, 15).unwrap();
        assert!(!report.violation);
        let d0 = sys.distance(&x, &y).unwrap();
        if d0 > 0.0 {
            // Exact λ₀ decay while the disagreement stays inside the window.
            let k0 = d0.log(0.5).round() as usize;
            for (n, r) in report.ratios.iter().enumerate() {
                if k0 + n <= 40 - n {
                    assert_eq!(*r, 1.0, "n = {n}");
                }
            }
        }
        // Same past as x: unstable side.
        let w = sys.bracket(&other, &x).unwrap();
        assert!(!sys.local_leaf_check(&x, &w, LeafSide::Unstable, 15).unwrap().violation);
    }

    #[test]
    fn torus_stable_line_decay() {
        let sys = cat();
        let BaseKind::Torus { stable, .. } = sys.kind.clone() else { unreachable!() };
        let x = TorusPoint::from_coords(0.21, 0.77);
        let y = x.displaced(0.01 * stable[0], 0.01 * stable[1]);
        let report = sys
            .local_leaf_check(&BasePoint::Torus(x), &BasePoint::Torus(y), LeafSide::Stable, 10)
            .unwrap();
        assert!(!report.violation);
        // Linear-map oracle: the displacement scales by exactly λ each step.
        for r in &report.ratios {
            assert!((r - 1.0).abs() < 1e-6, "{r}");
        }
        assert!((sys.lambda - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn markov_validation() {
        assert!(ShiftMeasure::markov(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_err());
        let m = ShiftMeasure::markov(vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        let ShiftMeasure::Markov { stationary, .. } = m else { unreachable!() };
        assert!((stationary[0] - 0.75).abs() < 1e-12 && (stationary[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn torus_matrix_validation() {
        assert!(BaseSystem::torus([[1, 1], [0, 1]]).is_err());
        assert!(BaseSystem::torus([[2, 0], [0, 1]]).is_err());
        assert!(BaseSystem::torus([[0, 1], [-1, 0]]).is_err());
        assert!(BaseSystem::torus([[1, 1], [1, 0]]).is_ok());
    }
}
