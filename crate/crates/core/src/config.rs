//! Experiment documents: a TOML file with `[base]`, `[cocycle]`,
//! `[perturbation]` and `[budgets]` sections plus top-level `seed`,
//! `epsilon` and `output_dir`.
//!
//! ```toml
//! seed = 7
//! epsilon = 0.1
//!
//! [base]
//! kind = "shift"
//! weights = [0.5, 0.5]
//!
//! [cocycle]
//! kind = "locally_constant"
//! table = [[1.2, 0.0, 0.0, 0.8333333333333334], [1.194004998333631, -0.0831945138723568, 0.11980009997619379, 0.8291701377316882]]
//!
//! [perturbation]
//! rule = "multiplicative_exp"
//! count = 12
//! [perturbation.direction]
//! kind = "constant"
//! matrix = [0.0, -1.0, 1.0, 0.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::base::{BaseSystem, ShiftMeasure, DEFAULT_SHIFT_LAMBDA};
use crate::cocycle::{Cocycle, Composition, MatrixField};
use crate::continuity::{default_schedule, PerturbationFamily};
use crate::error::{LabError, Result};
use crate::matrix::Matrix2;

fn default_epsilon() -> f64 {
    0.1
}

fn default_output_dir() -> String {
    "out".to_string()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cocycle: Option<CocycleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSection>,
    #[serde(default)]
    pub budgets: Budgets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKindName {
    Shift,
    Torus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSection {
    pub kind: BaseKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<usize>,
    /// Bernoulli weights; uniform when neither this nor `transition` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Row-stochastic Markov matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    /// Torus automorphism; defaults to `[[2, 1], [1, 1]]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[i64; 2]; 2]>,
    /// Shift metric base `λ₀` (shift only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant,
    LocallyConstant,
    Pointwise,
}

/// A matrix field; which keys are required depends on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub kind: FieldKind,
    /// Row-major `[a, b, c, d]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[f64; 4]>,
    /// Word table in lexicographic order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 4]>>,
    /// Word length the table depends on (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
}

// Unknown keys are rejected by the flattened field section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleSection {
    #[serde(default = "one")]
    pub r: f64,
    #[serde(flatten)]
    pub field: FieldSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    MultiplicativeExp,
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    #[serde(default = "default_rule")]
    pub rule: RuleName,
    /// Explicit magnitudes; otherwise `2^{−k}`, `k = 1..=count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    pub direction: FieldSection,
}

fn default_rule() -> RuleName {
    RuleName::MultiplicativeExp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    pub samples: usize,
    /// Splitting depth; chosen from the measured gap when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Longest iterate for bunching fits and attraction curves.
    pub n_max: usize,
    /// Orbit length for exponent estimates.
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_samples: Option<usize>,
    /// Directions per sample in the attraction test.
    pub grid: usize,
    /// Point pairs for Monte Carlo Hölder estimates.
    pub pair_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            samples: 1000,
            depth: None,
            horizon: None,
            n_max: 100,
            n: 1000,
            spectrum_samples: None,
            grid: 16,
            pair_samples: 2000,
        }
    }
}

impl Budgets {
    pub fn spectrum_samples(&self) -> usize {
        self.spectrum_samples.unwrap_or(self.samples.min(1000))
    }

    /// Upper bound for an automatically chosen depth.
    pub fn depth_cap(&self) -> usize {
        match self.horizon {
            Some(h) => h.saturating_sub(self.n_max).max(1),
            None => 400,
        }
    }
}

fn matrix_of(entries: [f64; 4]) -> Matrix2 {
    Matrix2::new(entries[0], entries[1], entries[2], entries[3])
}

impl FieldSection {
    pub fn constant(m: Matrix2) -> Self {
        FieldSection { kind: FieldKind::Constant, matrix: Some([m.a, m.b, m.c, m.d]), table: None, depth: None, expr: None }
    }

    pub fn table(table: &[Matrix2], depth: usize) -> Self {
        FieldSection {
            kind: FieldKind::LocallyConstant,
            matrix: None,
            table: Some(table.iter().map(|m| [m.a, m.b, m.c, m.d]).collect()),
            depth: Some(depth),
            expr: None,
        }
    }

    pub fn pointwise(expr: &str) -> Self {
        FieldSection { kind: FieldKind::Pointwise, matrix: None, table: None, depth: None, expr: Some(expr.to_string()) }
    }

    pub fn build(&self, sys: &BaseSystem, section: &str) -> Result<MatrixField> {
        let need = |what: &str| LabError::Config(format!("[{section}] kind = {:?} needs `{what}`", self.kind));
        match self.kind {
            FieldKind::Constant => Ok(MatrixField::Constant(matrix_of(self.matrix.ok_or_else(|| need("matrix"))?))),
            FieldKind::LocallyConstant => {
                let table = self.table.as_ref().ok_or_else(|| need("table"))?;
                let alphabet = sys
                    .alphabet()
                    .ok_or_else(|| LabError::Config(format!("[{section}] locally_constant needs a shift base")))?;
                MatrixField::locally_constant(alphabet, self.depth.unwrap_or(1), table.iter().copied().map(matrix_of).collect())
            }
            FieldKind::Pointwise => MatrixField::pointwise(self.expr.as_deref().ok_or_else(|| need("expr"))?),
        }
    }
}

impl BaseSection {
    pub fn build(&self) -> Result<BaseSystem> {
        let mut sys = match self.kind {
            BaseKindName::Shift => {
                let measure = match (&self.weights, &self.transition) {
                    (Some(_), Some(_)) => {
                        return Err(LabError::Config("[base] give either `weights` or `transition`, not both".into()))
                    }
                    (Some(w), None) => ShiftMeasure::bernoulli(w.clone())?,
                    (None, Some(p)) => ShiftMeasure::markov(p.clone())?,
                    (None, None) => ShiftMeasure::uniform(self.alphabet.unwrap_or(2)),
                };
                if let Some(a) = self.alphabet {
                    if a != measure.alphabet() {
                        return Err(LabError::Config(format!(
                            "[base] alphabet = {a} but the measure has {} symbols",
                            measure.alphabet()
                        )));
                    }
                }
                if self.matrix.is_some() {
                    return Err(LabError::Config("[base] `matrix` is only valid for kind = \"torus\"".into()));
                }
                BaseSystem::full_shift(measure, self.lambda.unwrap_or(DEFAULT_SHIFT_LAMBDA))?
            }
            BaseKindName::Torus => {
                if self.alphabet.is_some() || self.weights.is_some() || self.transition.is_some() || self.lambda.is_some() {
                    return Err(LabError::Config(
                        "[base] alphabet, weights, transition and lambda are only valid for kind = \"shift\"".into(),
                    ));
                }
                BaseSystem::torus(self.matrix.unwrap_or([[2, 1], [1, 1]]))?
            }
        };
        if self.local_scale.is_some() || self.bracket_scale.is_some() {
            let (epsilon, tau) = (self.local_scale.unwrap_or(sys.epsilon), self.bracket_scale.unwrap_or(sys.tau));
            sys = sys.with_scales(epsilon, tau)?;
        }
        if let Some(c1) = self.c1 {
            sys = sys.with_c1(c1)?;
        }
        Ok(sys)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Config(e.message().to_string()))?;
        cfg.check_budgets()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check_budgets(&self) -> Result<()> {
        let b = &self.budgets;
        let positive = [
            ("samples", b.samples),
            ("n_max", b.n_max),
            ("n", b.n),
            ("grid", b.grid),
            ("pair_samples", b.pair_samples),
            ("depth", b.depth.unwrap_or(1)),
            ("horizon", b.horizon.unwrap_or(1)),
            ("spectrum_samples", b.spectrum_samples.unwrap_or(1)),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(LabError::Config(format!("[budgets] {name} must be positive")));
        }
        if let (Some(h), Some(d)) = (b.horizon, b.depth) {
            if h < d + b.n_max {
                return Err(LabError::Config(format!(
                    "[budgets] horizon = {h} is below depth + n_max = {}",
                    d + b.n_max
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(LabError::Config("epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn base_system(&self) -> Result<BaseSystem> {
        self.base.as_ref().ok_or_else(|| missing("base"))?.build()
    }

    pub fn cocycle(&self, sys: &BaseSystem) -> Result<Cocycle> {
        let section = self.cocycle.as_ref().ok_or_else(|| missing("cocycle"))?;
        let c = Cocycle::new(section.field.build(sys, "cocycle")?, section.r)?;
        c.validate(sys)?;
        Ok(c)
    }

    pub fn family(&self, sys: &BaseSystem) -> Result<PerturbationFamily> {
        let base = self.cocycle(sys)?;
        let section = self.perturbation.as_ref().ok_or_else(|| missing("perturbation"))?;
        let direction = section.direction.build(sys, "perturbation.direction")?;
        if section.direction.kind != self.cocycle.as_ref().map(|c| c.field.kind).unwrap_or(section.direction.kind)
            && section.direction.kind != FieldKind::Constant
        {
            return Err(LabError::Config(
                "[perturbation.direction] must be constant or of the same kind as the cocycle".into(),
            ));
        }
        let schedule = match (&section.schedule, section.count) {
            (Some(s), _) => s.clone(),
            (None, count) => default_schedule(count.unwrap_or(12)),
        };
        let rule = match section.rule {
            RuleName::MultiplicativeExp => Composition::MultiplicativeExp,
            RuleName::Additive => Composition::Additive,
        };
        PerturbationFamily::new(base, direction, schedule, rule, sys)
    }

    /// SHA-256 of the canonical serialization with `output_dir` blanked, so
    /// relocating outputs keeps the hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = String::new();
        Sha256::digest(canonical.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn missing(section: &str) -> LabError {
    LabError::Config(format!("missing [{section}] section"))
}
