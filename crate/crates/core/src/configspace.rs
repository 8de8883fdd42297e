//! Mixed continuous/integer/categorical search spaces.
//!
//! A [`ConfigSpace`] is an ordered list of hyperparameters plus a map of
//! hyperparameters that are pinned to constants. The original space has no
//! pinned entries; [`ConfigSpace::reduce`] produces a sub-space in which every
//! hyperparameter outside an importance set is pinned to an anchor value.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative Gaussian step used by [`ConfigSpace::neighbors`], as a fraction
/// of the search-domain range.
pub const NEIGHBOR_STEP: f64 = 0.2;

/// Tolerance under which two continuous values count as the same point.
pub const CONTINUOUS_DUPLICATE_TOL: f64 = 1e-12;

/// A single hyperparameter value. Categorical values are stored as the
/// ordinal index into the category list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Float(f64),
    Int(i64),
    Cat(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Continuous { lower: f64, upper: f64, log: bool },
    Integer { lower: i64, upper: i64, log: bool },
    Categorical { categories: Vec<String> },
}

impl Domain {
    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Continuous { lower, upper, .. }, Value::Float(v)) => {
                v.is_finite() && *v >= *lower && *v <= *upper
            }
            (Domain::Integer { lower, upper, .. }, Value::Int(v)) => *v >= *lower && *v <= *upper,
            (Domain::Categorical { categories }, Value::Cat(i)) => *i < categories.len(),
            _ => false,
        }
    }

    /// Numeric bounds in the search domain (log-transformed for log scales).
    pub(crate) fn search_bounds(&self) -> Option<(f64, f64)> {
        match self {
            Domain::Continuous { lower, upper, log } => Some(if *log {
                (lower.ln(), upper.ln())
            } else {
                (*lower, *upper)
            }),
            Domain::Integer { lower, upper, log } => {
                let (lo, hi) = (*lower as f64, *upper as f64);
                Some(if *log { (lo.ln(), hi.ln()) } else { (lo, hi) })
            }
            Domain::Categorical { .. } => None,
        }
    }

    fn is_log(&self) -> bool {
        matches!(
            self,
            Domain::Continuous { log: true, .. } | Domain::Integer { log: true, .. }
        )
    }

    /// Whether a one-dimensional move can change a value of this domain.
    fn is_mutable(&self) -> bool {
        match self {
            Domain::Integer { lower, upper, .. } => lower < upper,
            _ => true,
        }
    }

    pub(crate) fn decode_search(&self, s: f64) -> Value {
        match self {
            Domain::Continuous { lower, upper, log } => {
                let v = if *log { s.exp() } else { s };
                Value::Float(v.clamp(*lower, *upper))
            }
            Domain::Integer { lower, upper, log } => {
                let v = if *log { s.exp() } else { s };
                Value::Int((v.round() as i64).clamp(*lower, *upper))
            }
            Domain::Categorical { .. } => unreachable!("categorical has no search transform"),
        }
    }

    pub(crate) fn to_search(&self, value: &Value) -> f64 {
        let v = match value {
            Value::Float(v) => *v,
            Value::Int(v) => *v as f64,
            Value::Cat(i) => return *i as f64,
        };
        if self.is_log() {
            v.ln()
        } else {
            v
        }
    }

    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self {
            Domain::Continuous { lower, upper, log } => {
                if *log {
                    let s = rng.random_range(lower.ln()..=upper.ln());
                    Value::Float(s.exp().clamp(*lower, *upper))
                } else {
                    Value::Float(rng.random_range(*lower..=*upper))
                }
            }
            Domain::Integer { lower, upper, log } => {
                if *log {
                    let s = rng.random_range((*lower as f64).ln()..=(*upper as f64).ln());
                    Value::Int((s.exp().round() as i64).clamp(*lower, *upper))
                } else {
                    Value::Int(rng.random_range(*lower..=*upper))
                }
            }
            Domain::Categorical { categories } => Value::Cat(rng.random_range(0..categories.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameter {
    name: String,
    domain: Domain,
    default: Value,
}

impl Hyperparameter {
    /// Continuous hyperparameter on `[lower, upper]`. The default is the
    /// midpoint of the search domain (geometric midpoint for log scales).
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64, log: bool) -> Result<Self> {
        let name = name.into();
        let fail = |reason: &str| Error::InvalidHyperparameter {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if !lower.is_finite() || !upper.is_finite() {
            return Err(fail("bounds must be finite"));
        }
        if lower >= upper {
            return Err(fail("lower must be strictly below upper"));
        }
        if log && lower <= 0.0 {
            return Err(fail("log scale requires lower > 0"));
        }
        let default = if log {
            (0.5 * (lower.ln() + upper.ln())).exp().clamp(lower, upper)
        } else {
            0.5 * (lower + upper)
        };
        Ok(Self {
            name,
            domain: Domain::Continuous { lower, upper, log },
            default: Value::Float(default),
        })
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64, log: bool) -> Result<Self> {
        let name = name.into();
        let fail = |reason: &str| Error::InvalidHyperparameter {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if lower > upper {
            return Err(fail("lower must not exceed upper"));
        }
        if log && lower <= 0 {
            return Err(fail("log scale requires lower > 0"));
        }
        let default = if log {
            ((0.5 * ((lower as f64).ln() + (upper as f64).ln())).exp().round() as i64)
                .clamp(lower, upper)
        } else {
            lower + (upper - lower) / 2
        };
        Ok(Self {
            name,
            domain: Domain::Integer { lower, upper, log },
            default: Value::Int(default),
        })
    }

    /// Categorical hyperparameter; the first category is the default.
    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let name = name.into();
        let categories: Vec<String> = categories.into_iter().map(Into::into).collect();
        let mut seen = categories.clone();
        seen.sort();
        seen.dedup();
        if categories.len() < 2 || seen.len() != categories.len() {
            return Err(Error::InvalidHyperparameter {
                name,
                reason: "categorical needs at least two distinct categories".into(),
            });
        }
        Ok(Self {
            name,
            domain: Domain::Categorical { categories },
            default: Value::Cat(0),
        })
    }

    pub fn with_default(mut self, default: Value) -> Result<Self> {
        if !self.domain.contains(&default) {
            return Err(Error::InvalidHyperparameter {
                name: self.name,
                reason: format!("default {default:?} is outside the domain"),
            });
        }
        self.default = default;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn default_value(&self) -> Value {
        self.default
    }

    /// Index of a category label, for categorical hyperparameters.
    pub fn category_index(&self, label: &str) -> Option<usize> {
        match &self.domain {
            Domain::Categorical { categories } => categories.iter().position(|c| c == label),
            _ => None,
        }
    }

    /// Human-readable rendering of a value of this hyperparameter.
    pub fn format_value(&self, value: &Value) -> String {
        match (value, &self.domain) {
            (Value::Cat(i), Domain::Categorical { categories }) => {
                categories.get(*i).cloned().unwrap_or_else(|| format!("#{i}"))
            }
            (Value::Float(v), _) => format!("{v}"),
            (Value::Int(v), _) => format!("{v}"),
            (Value::Cat(i), _) => format!("#{i}"),
        }
    }
}

/// A point in a [`ConfigSpace`], one value per hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    values: Vec<Value>,
}

impl Configuration {
    pub fn new(values: Vec<Value>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value equality with a tolerance of [`CONTINUOUS_DUPLICATE_TOL`] on
    /// continuous entries and exact comparison elsewhere.
    pub fn same_point(&self, other: &Configuration) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| match (a, b) {
                (Value::Float(x), Value::Float(y)) => (x - y).abs() <= CONTINUOUS_DUPLICATE_TOL,
                _ => a == b,
            })
    }
}

impl std::ops::Index<usize> for Configuration {
    type Output = Value;

    fn index(&self, index: usize) -> &Value {
        &self.values[index]
    }
}

/// An ordered set of hyperparameters, some of which may be pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDef", into = "SpaceDef")]
pub struct ConfigSpace {
    params: Vec<Hyperparameter>,
    fixed: BTreeMap<usize, Value>,
}

impl ConfigSpace {
    pub fn new(params: Vec<Hyperparameter>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidSpace("no hyperparameters".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidSpace(format!("duplicate name `{}`", p.name)));
            }
        }
        Ok(Self {
            params,
            fixed: BTreeMap::new(),
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn params(&self) -> &[Hyperparameter] {
        &self.params
    }

    pub fn fixed(&self) -> &BTreeMap<usize, Value> {
        &self.fixed
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn tunable_count(&self) -> usize {
        self.params.len() - self.fixed.len()
    }

    pub fn is_tunable(&self, index: usize) -> bool {
        index < self.params.len() && !self.fixed.contains_key(&index)
    }

    /// Pins hyperparameter `index` to `value`.
    pub fn fix(mut self, index: usize, value: Value) -> Result<Self> {
        let param = self
            .params
            .get(index)
            .ok_or_else(|| Error::InvalidSpace(format!("index {index} out of range")))?;
        if !param.domain.contains(&value) {
            return Err(Error::IllegalConfiguration(format!(
                "fixed value {value:?} is outside the domain of `{}`",
                param.name
            )));
        }
        self.fixed.insert(index, value);
        Ok(self)
    }

    /// The same hyperparameters with every pin removed.
    pub fn unconstrained(&self) -> Self {
        Self {
            params: self.params.clone(),
            fixed: BTreeMap::new(),
        }
    }

    fn check_values(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: config.len(),
            });
        }
        for (p, v) in self.params.iter().zip(config.values()) {
            if !p.domain.contains(v) {
                return Err(Error::IllegalConfiguration(format!(
                    "value {v:?} outside the domain of `{}`",
                    p.name
                )));
            }
        }
        Ok(())
    }

    /// Checks domains and pinned values.
    pub fn validate(&self, config: &Configuration) -> Result<()> {
        self.check_values(config)?;
        for (&j, v) in &self.fixed {
            if config.values[j] != *v {
                return Err(Error::IllegalConfiguration(format!(
                    "`{}` must equal its fixed value {v:?}",
                    self.params[j].name
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        self.validate(config).is_ok()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let values = self
            .params
            .iter()
            .enumerate()
            .map(|(j, p)| match self.fixed.get(&j) {
                Some(v) => *v,
                None => p.domain.sample(rng),
            })
            .collect();
        Configuration { values }
    }

    pub fn sample_n<R: rand::Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Configuration> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    /// Per-hyperparameter defaults, overridden by pinned values.
    pub fn default_configuration(&self) -> Configuration {
        let values = self
            .params
            .iter()
            .enumerate()
            .map(|(j, p)| self.fixed.get(&j).copied().unwrap_or(p.default))
            .collect();
        Configuration { values }
    }

    /// Pins every hyperparameter outside `important` to the anchor's value.
    /// Always starts from the unpinned space, discarding existing pins.
    pub fn reduce(&self, important: &[usize], anchor: &Configuration) -> Result<Self> {
        self.check_values(anchor)?;
        if let Some(&bad) = important.iter().find(|&&j| j >= self.params.len()) {
            return Err(Error::InvalidSpace(format!("important index {bad} out of range")));
        }
        let fixed = (0..self.params.len())
            .filter(|j| !important.contains(j))
            .map(|j| (j, anchor.values[j]))
            .collect();
        Ok(Self {
            params: self.params.clone(),
            fixed,
        })
    }

    /// Numeric surrogate input: log-transformed continuous values, integers
    /// as reals, categorical ordinals.
    pub fn encode(&self, config: &Configuration) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.params.len());
        self.encode_into(config, &mut out);
        out
    }

    pub fn encode_into(&self, config: &Configuration, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.params.iter().zip(config.values()).map(|(p, v)| match (v, &p.domain) {
            (Value::Float(x), Domain::Continuous { log: true, .. }) => x.ln(),
            (Value::Float(x), _) => *x,
            (Value::Int(x), _) => *x as f64,
            (Value::Cat(i), _) => *i as f64,
        }));
    }

    /// One-dimensional perturbations of `config`. Each neighbor changes
    /// exactly one tunable hyperparameter.
    pub fn neighbors<R: rand::Rng + ?Sized>(
        &self,
        config: &Configuration,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<Configuration>> {
        let mutable: Vec<usize> = (0..self.params.len())
            .filter(|&j| self.is_tunable(j) && self.params[j].domain.is_mutable())
            .collect();
        if mutable.is_empty() {
            return Err(Error::NoTunableDimensions);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let j = mutable[rng.random_range(0..mutable.len())];
            let mut values = config.values.clone();
            values[j] = self.mutate(j, &config.values[j], rng);
            out.push(Configuration { values });
        }
        Ok(out)
    }

    fn mutate<R: rand::Rng + ?Sized>(&self, j: usize, current: &Value, rng: &mut R) -> Value {
        let domain = &self.params[j].domain;
        if let Domain::Categorical { categories } = domain {
            let Value::Cat(cur) = current else {
                unreachable!("validated configuration")
            };
            let pick = rng.random_range(0..categories.len() - 1);
            return Value::Cat(if pick >= *cur { pick + 1 } else { pick });
        }
        let (lo, hi) = domain.search_bounds().expect("numeric domain");
        let step = Normal::new(0.0, NEIGHBOR_STEP * (hi - lo)).expect("positive range");
        let s = domain.to_search(current);
        for _ in 0..16 {
            let candidate = domain.decode_search(s + step.sample(rng));
            if candidate != *current {
                return candidate;
            }
        }
        // Integer moves that keep rounding back onto the current value.
        match (domain, current) {
            (Domain::Integer { lower, upper, .. }, Value::Int(v)) => {
                let up = *v < *upper && (*v == *lower || rng.random_bool(0.5));
                Value::Int(if up { v + 1 } else { v - 1 })
            }
            _ => *current,
        }
    }

    pub fn format_configuration(&self, config: &Configuration) -> String {
        self.params
            .iter()
            .zip(config.values())
            .map(|(p, v)| format!("{}={}", p.name, p.format_value(v)))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// JSON document form of a space:
/// `{"hyperparameters": [{"name", "kind", "lower", "upper", "categories", "log", "default"}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDef {
    pub hyperparameters: Vec<HyperparameterDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperparameterDef {
    pub name: String,
    pub kind: HyperparameterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default)]
    pub log: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperparameterKind {
    Continuous,
    Integer,
    Categorical,
}

impl TryFrom<HyperparameterDef> for Hyperparameter {
    type Error = Error;

    fn try_from(def: HyperparameterDef) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidHyperparameter {
            name: def.name.clone(),
            reason: reason.to_string(),
        };
        let bounds = || match (def.lower, def.upper) {
            (Some(l), Some(u)) => Ok((l, u)),
            _ => Err(bad("numeric hyperparameters need lower and upper")),
        };
        let hp = match def.kind {
            HyperparameterKind::Continuous => {
                let (l, u) = bounds()?;
                Hyperparameter::continuous(def.name.clone(), l, u, def.log)?
            }
            HyperparameterKind::Integer => {
                let (l, u) = bounds()?;
                if l.fract() != 0.0 || u.fract() != 0.0 {
                    return Err(bad("integer bounds must be whole numbers"));
                }
                Hyperparameter::integer(def.name.clone(), l as i64, u as i64, def.log)?
            }
            HyperparameterKind::Categorical => {
                let cats = def
                    .categories
                    .clone()
                    .ok_or_else(|| bad("categorical needs categories"))?;
                Hyperparameter::categorical(def.name.clone(), cats)?
            }
        };
        let Some(default) = &def.default else {
            return Ok(hp);
        };
        let value = match (&hp.domain, default) {
            (Domain::Continuous { .. }, serde_json::Value::Number(n)) => {
                Value::Float(n.as_f64().ok_or_else(|| bad("default is not a number"))?)
            }
            (Domain::Integer { .. }, serde_json::Value::Number(n)) => match n.as_i64() {
                Some(v) => Value::Int(v),
                None => match n.as_f64() {
                    Some(f) if f.fract() == 0.0 => Value::Int(f as i64),
                    _ => return Err(bad("integer default must be a whole number")),
                },
            },
            (Domain::Categorical { .. }, serde_json::Value::String(s)) => Value::Cat(
                hp.category_index(s)
                    .ok_or_else(|| bad("default is not one of the categories"))?,
            ),
            _ => return Err(bad("default has the wrong type")),
        };
        hp.with_default(value)
    }
}

impl From<&Hyperparameter> for HyperparameterDef {
    fn from(hp: &Hyperparameter) -> Self {
        let default = Some(match (&hp.domain, hp.default) {
            (Domain::Categorical { categories }, Value::Cat(i)) => {
                serde_json::Value::String(categories[i].clone())
            }
            (_, Value::Float(v)) => serde_json::json!(v),
            (_, Value::Int(v)) => serde_json::json!(v),
            (_, Value::Cat(i)) => serde_json::json!(i),
        });
        match &hp.domain {
            Domain::Continuous { lower, upper, log } => Self {
                name: hp.name.clone(),
                kind: HyperparameterKind::Continuous,
                lower: Some(*lower),
                upper: Some(*upper),
                categories: None,
                log: *log,
                default,
            },
            Domain::Integer { lower, upper, log } => Self {
                name: hp.name.clone(),
                kind: HyperparameterKind::Integer,
                lower: Some(*lower as f64),
                upper: Some(*upper as f64),
                categories: None,
                log: *log,
                default,
            },
            Domain::Categorical { categories } => Self {
                name: hp.name.clone(),
                kind: HyperparameterKind::Categorical,
                lower: None,
                upper: None,
                categories: Some(categories.clone()),
                log: false,
                default,
            },
        }
    }
}

impl TryFrom<SpaceDef> for ConfigSpace {
    type Error = Error;

    fn try_from(def: SpaceDef) -> Result<Self> {
        let params = def
            .hyperparameters
            .into_iter()
            .map(Hyperparameter::try_from)
            .collect::<Result<Vec<_>>>()?;
        ConfigSpace::new(params)
    }
}

impl From<ConfigSpace> for SpaceDef {
    fn from(space: ConfigSpace) -> Self {
        SpaceDef {
            hyperparameters: space.params.iter().map(HyperparameterDef::from).collect(),
        }
    }
}
