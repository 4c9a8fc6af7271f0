//! Rate models for truncated, bilateral and catastrophe birth-death
//! processes, their symmetry weights, and rate-level symmetry checks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Default absolute residual tolerance for rate-level symmetry checks.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-12;

/// Window used for bilateral presets when the caller does not declare one.
pub const DEFAULT_WINDOW: (i64, i64) = (-64, 64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Absorbing,
    Reflecting,
    Bilateral,
    Catastrophe,
    #[serde(rename = "twod")]
    TwoD,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Absorbing => "absorbing",
            Family::Reflecting => "reflecting",
            Family::Bilateral => "bilateral",
            Family::Catastrophe => "catastrophe",
            Family::TwoD => "twod",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Absorbing,
    Reflecting,
    /// Bilateral process, no endpoints.
    None,
}

impl Family {
    pub fn boundary(self) -> BoundaryKind {
        match self {
            Family::Absorbing => BoundaryKind::Absorbing,
            Family::Reflecting => BoundaryKind::Reflecting,
            _ => BoundaryKind::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSpace {
    /// `{0, 1, ..., n}`.
    Truncated { n: i64 },
    /// Integers, with a caller-declared window `[lo, hi]` used for
    /// symmetry checks and, for tabulated rates, as the rate domain.
    Bilateral { lo: i64, hi: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetTag {
    ConstantAbsorbing,
    Ehrenfest,
    QuadraticEhrenfest,
    Sigmoidal,
    AlternatingA,
    AlternatingB,
    ConstantBilateral,
    ConstantCatastrophe,
    Custom,
}

impl PresetTag {
    pub const ALL: [PresetTag; 9] = [
        PresetTag::ConstantAbsorbing,
        PresetTag::Ehrenfest,
        PresetTag::QuadraticEhrenfest,
        PresetTag::Sigmoidal,
        PresetTag::AlternatingA,
        PresetTag::AlternatingB,
        PresetTag::ConstantBilateral,
        PresetTag::ConstantCatastrophe,
        PresetTag::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetTag::ConstantAbsorbing => "constant-absorbing",
            PresetTag::Ehrenfest => "ehrenfest",
            PresetTag::QuadraticEhrenfest => "quadratic-ehrenfest",
            PresetTag::Sigmoidal => "sigmoidal",
            PresetTag::AlternatingA => "alternating-a",
            PresetTag::AlternatingB => "alternating-b",
            PresetTag::ConstantBilateral => "constant-bilateral",
            PresetTag::ConstantCatastrophe => "constant-catastrophe",
            PresetTag::Custom => "custom",
        }
    }

    pub fn family(self) -> Option<Family> {
        Some(match self {
            PresetTag::ConstantAbsorbing => Family::Absorbing,
            PresetTag::Ehrenfest | PresetTag::QuadraticEhrenfest => Family::Reflecting,
            PresetTag::Sigmoidal
            | PresetTag::AlternatingA
            | PresetTag::AlternatingB
            | PresetTag::ConstantBilateral => Family::Bilateral,
            PresetTag::ConstantCatastrophe => Family::Catastrophe,
            PresetTag::Custom => return None,
        })
    }
}

impl fmt::Display for PresetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        PresetTag::ALL
            .iter()
            .copied()
            .find(|t| t.name() == norm)
            .ok_or_else(|| invalid("preset", format!("unknown preset `{s}`")))
    }
}

/// Parameters accepted by [`build_preset`]. Unused fields are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PresetParams<T> {
    pub n: Option<i64>,
    pub lambda: Option<T>,
    pub mu: Option<T>,
    pub alpha: Option<T>,
    pub c: Option<T>,
    pub window: Option<(i64, i64)>,
}

/// Tabulated rates starting at state `lo`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable<T> {
    pub lo: i64,
    pub lambda: Vec<T>,
    pub mu: Vec<T>,
    /// Empty for models without catastrophes.
    pub alpha: Vec<T>,
}

impl<T: Scalar> RateTable<T> {
    fn at(v: &[T], lo: i64, n: i64) -> T {
        if n < lo {
            return T::zero();
        }
        v.get((n - lo) as usize).copied().unwrap_or_else(T::zero)
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.lambda.len() as i64 - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preset<T> {
    ConstantAbsorbing { lambda: T, mu: T },
    Ehrenfest { alpha: T },
    QuadraticEhrenfest { alpha: T },
    Sigmoidal { lambda: T, mu: T, c: T },
    AlternatingA { lambda: T, mu: T },
    AlternatingB { lambda: T, mu: T },
    ConstantBilateral { lambda: T, mu: T },
    ConstantCatastrophe { lambda: T, mu: T, alpha: T },
    Custom(RateTable<T>),
}

impl<T: Scalar> Preset<T> {
    pub fn tag(&self) -> PresetTag {
        match self {
            Preset::ConstantAbsorbing { .. } => PresetTag::ConstantAbsorbing,
            Preset::Ehrenfest { .. } => PresetTag::Ehrenfest,
            Preset::QuadraticEhrenfest { .. } => PresetTag::QuadraticEhrenfest,
            Preset::Sigmoidal { .. } => PresetTag::Sigmoidal,
            Preset::AlternatingA { .. } => PresetTag::AlternatingA,
            Preset::AlternatingB { .. } => PresetTag::AlternatingB,
            Preset::ConstantBilateral { .. } => PresetTag::ConstantBilateral,
            Preset::ConstantCatastrophe { .. } => PresetTag::ConstantCatastrophe,
            Preset::Custom(_) => PresetTag::Custom,
        }
    }

    fn scaled(&self, g: T) -> Self {
        match self {
            Preset::ConstantAbsorbing { lambda, mu } => Preset::ConstantAbsorbing { lambda: *lambda * g, mu: *mu * g },
            Preset::Ehrenfest { alpha } => Preset::Ehrenfest { alpha: *alpha * g },
            Preset::QuadraticEhrenfest { alpha } => Preset::QuadraticEhrenfest { alpha: *alpha * g },
            Preset::Sigmoidal { lambda, mu, c } => Preset::Sigmoidal { lambda: *lambda * g, mu: *mu * g, c: *c },
            Preset::AlternatingA { lambda, mu } => Preset::AlternatingA { lambda: *lambda * g, mu: *mu * g },
            Preset::AlternatingB { lambda, mu } => Preset::AlternatingB { lambda: *lambda * g, mu: *mu * g },
            Preset::ConstantBilateral { lambda, mu } => Preset::ConstantBilateral { lambda: *lambda * g, mu: *mu * g },
            Preset::ConstantCatastrophe { lambda, mu, alpha } => Preset::ConstantCatastrophe {
                lambda: *lambda * g,
                mu: *mu * g,
                alpha: *alpha * g,
            },
            Preset::Custom(t) => Preset::Custom(RateTable {
                lo: t.lo,
                lambda: t.lambda.iter().map(|&v| v * g).collect(),
                mu: t.mu.iter().map(|&v| v * g).collect(),
                alpha: t.alpha.iter().map(|&v| v * g).collect(),
            }),
        }
    }
}

/// `(1 + c r^{m+1}) / (1 + c r^m)` with `c r^m = exp(ln c + m ln r)` kept finite.
fn sigmoid_ratio<T: Scalar>(c: T, ln_r: T, m: i64, shift: i64) -> T {
    if c == T::zero() {
        return T::one();
    }
    let a = c.ln() + T::int(m) * ln_r;
    let r_shift = (T::int(shift) * ln_r).exp();
    if a > T::zero() {
        let e = (-a).exp();
        (e + r_shift) / (e + T::one())
    } else {
        let e = a.exp();
        (T::one() + e * r_shift) / (T::one() + e)
    }
}

/// Birth, death and (optionally) catastrophe rates over a declared state space.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel<T> {
    family: Family,
    space: StateSpace,
    preset: Preset<T>,
}

impl<T: Scalar> RateModel<T> {
    /// Custom truncated model with absorbing endpoints; `lambda`, `mu` indexed `0..=N`.
    pub fn absorbing(lambda: Vec<T>, mu: Vec<T>) -> Result<Self> {
        Self::truncated(Family::Absorbing, lambda, mu)
    }

    /// Custom truncated model with reflecting endpoints; `lambda`, `mu` indexed `0..=N`.
    pub fn reflecting(lambda: Vec<T>, mu: Vec<T>) -> Result<Self> {
        Self::truncated(Family::Reflecting, lambda, mu)
    }

    fn truncated(family: Family, lambda: Vec<T>, mu: Vec<T>) -> Result<Self> {
        if lambda.len() != mu.len() {
            return Err(invalid("mu", "lambda and mu must have the same length"));
        }
        let n = lambda.len() as i64 - 1;
        let m = Self {
            family,
            space: StateSpace::Truncated { n },
            preset: Preset::Custom(RateTable { lo: 0, lambda, mu, alpha: Vec::new() }),
        };
        m.validate()?;
        Ok(m)
    }

    /// Custom bilateral model tabulated on the window `[lo, lo + len - 1]`.
    pub fn bilateral(lo: i64, lambda: Vec<T>, mu: Vec<T>) -> Result<Self> {
        Self::windowed(Family::Bilateral, lo, lambda, mu, Vec::new())
    }

    /// Custom bilateral model with catastrophes; `alpha` at state 0 must be zero.
    pub fn catastrophe(lo: i64, lambda: Vec<T>, mu: Vec<T>, alpha: Vec<T>) -> Result<Self> {
        Self::windowed(Family::Catastrophe, lo, lambda, mu, alpha)
    }

    fn windowed(family: Family, lo: i64, lambda: Vec<T>, mu: Vec<T>, alpha: Vec<T>) -> Result<Self> {
        if lambda.is_empty() || lambda.len() != mu.len() {
            return Err(invalid("mu", "lambda and mu must be nonempty and of equal length"));
        }
        if family == Family::Catastrophe && alpha.len() != lambda.len() {
            return Err(invalid("alpha", "alpha must have the same length as lambda"));
        }
        let hi = lo + lambda.len() as i64 - 1;
        let m = Self {
            family,
            space: StateSpace::Bilateral { lo, hi },
            preset: Preset::Custom(RateTable { lo, lambda, mu, alpha }),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn preset(&self) -> &Preset<T> {
        &self.preset
    }

    pub fn preset_tag(&self) -> PresetTag {
        self.preset.tag()
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.family.boundary()
    }

    /// `N` for truncated models.
    pub fn size(&self) -> Option<i64> {
        match self.space {
            StateSpace::Truncated { n } => Some(n),
            StateSpace::Bilateral { .. } => None,
        }
    }

    /// Declared window for bilateral models.
    pub fn window(&self) -> Option<(i64, i64)> {
        match self.space {
            StateSpace::Bilateral { lo, hi } => Some((lo, hi)),
            StateSpace::Truncated { .. } => None,
        }
    }

    /// States outside which no rate is known. `None` means rates are
    /// defined on all of the integers.
    pub fn rate_domain(&self) -> Option<(i64, i64)> {
        match (&self.space, &self.preset) {
            (StateSpace::Truncated { n }, _) => Some((0, *n)),
            (StateSpace::Bilateral { .. }, Preset::Custom(t)) => Some((t.lo, t.hi())),
            _ => None,
        }
    }

    /// Reflection `n -> axis - n` under which the bilateral symmetry
    /// conditions are stated. Zero except for the first alternating preset,
    /// which is symmetric about `1/2`.
    pub fn mirror_axis(&self) -> i64 {
        match self.preset {
            Preset::AlternatingA { .. } => 1,
            _ => 0,
        }
    }

    fn in_truncated_range(&self, n: i64) -> bool {
        match self.space {
            StateSpace::Truncated { n: big_n } => (0..=big_n).contains(&n),
            StateSpace::Bilateral { .. } => true,
        }
    }

    /// Birth rate `λ_n`.
    pub fn lambda(&self, n: i64) -> T {
        if !self.in_truncated_range(n) {
            return T::zero();
        }
        let big_n = self.size().unwrap_or(0);
        match &self.preset {
            Preset::ConstantAbsorbing { lambda, .. } => {
                if n >= 1 && n < big_n {
                    *lambda
                } else {
                    T::zero()
                }
            }
            Preset::Ehrenfest { alpha } => *alpha * T::int(big_n - n),
            Preset::QuadraticEhrenfest { alpha } => *alpha * T::int((big_n - n) * (big_n - n)),
            Preset::Sigmoidal { lambda, mu, c } => *lambda * sigmoid_ratio(*c, (*mu / *lambda).ln(), n, 1),
            Preset::AlternatingA { lambda, mu } | Preset::AlternatingB { lambda, mu } => {
                if n.rem_euclid(2) == 0 {
                    *lambda
                } else {
                    *mu
                }
            }
            Preset::ConstantBilateral { lambda, .. } | Preset::ConstantCatastrophe { lambda, .. } => *lambda,
            Preset::Custom(t) => RateTable::at(&t.lambda, t.lo, n),
        }
    }

    /// Death rate `μ_n`.
    pub fn mu(&self, n: i64) -> T {
        if !self.in_truncated_range(n) {
            return T::zero();
        }
        let big_n = self.size().unwrap_or(0);
        match &self.preset {
            Preset::ConstantAbsorbing { mu, .. } => {
                if n >= 1 && n < big_n {
                    *mu
                } else {
                    T::zero()
                }
            }
            Preset::Ehrenfest { alpha } => *alpha * T::int(n),
            Preset::QuadraticEhrenfest { alpha } => *alpha * T::int(n * n),
            Preset::Sigmoidal { lambda, mu, c } => *mu * sigmoid_ratio(*c, (*mu / *lambda).ln(), n, -1),
            Preset::AlternatingA { lambda, mu } => {
                if n.rem_euclid(2) == 0 {
                    *mu
                } else {
                    *lambda
                }
            }
            Preset::AlternatingB { lambda, mu } => {
                if n.rem_euclid(2) == 0 {
                    *lambda
                } else {
                    *mu
                }
            }
            Preset::ConstantBilateral { mu, .. } | Preset::ConstantCatastrophe { mu, .. } => *mu,
            Preset::Custom(t) => RateTable::at(&t.mu, t.lo, n),
        }
    }

    /// Catastrophe rate `α_n` (jump to 0). Zero at `n = 0` and for models
    /// without catastrophes.
    pub fn alpha(&self, n: i64) -> T {
        if n == 0 || self.family != Family::Catastrophe {
            return T::zero();
        }
        match &self.preset {
            Preset::ConstantCatastrophe { alpha, .. } => *alpha,
            Preset::Custom(t) => RateTable::at(&t.alpha, t.lo, n),
            _ => T::zero(),
        }
    }

    /// Total exit rate `λ_n + μ_n + α_n`.
    pub fn exit_rate(&self, n: i64) -> T {
        self.lambda(n) + self.mu(n) + self.alpha(n)
    }

    /// Same model with every rate multiplied by `gamma`.
    pub fn scaled(&self, gamma: T) -> Self {
        Self { family: self.family, space: self.space, preset: self.preset.scaled(gamma) }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        let nonneg = |v: T| v >= T::zero() && v.is_finite();
        match self.space {
            StateSpace::Truncated { n } => {
                if n <= 1 {
                    return Err(Error::StateSpaceTooSmall(n));
                }
                if let Preset::Custom(t) = &self.preset {
                    if t.lambda.iter().chain(&t.mu).any(|&v| !nonneg(v)) {
                        return Err(Error::InvalidRate { state: -1, reason: "rates must be finite and nonnegative".into() });
                    }
                }
                for s in 1..n {
                    if !positive(self.lambda(s)) || !positive(self.mu(s)) {
                        return Err(Error::InvalidRate { state: s, reason: "interior rates must be positive".into() });
                    }
                }
                let zero = T::zero();
                match self.family {
                    Family::Absorbing => {
                        for s in [0, n] {
                            if self.lambda(s) != zero || self.mu(s) != zero {
                                return Err(Error::InvalidRate {
                                    state: s,
                                    reason: "absorbing endpoints need zero birth and death rates".into(),
                                });
                            }
                        }
                    }
                    Family::Reflecting => {
                        if self.mu(0) != zero || !positive(self.lambda(0)) {
                            return Err(Error::InvalidRate {
                                state: 0,
                                reason: "reflecting endpoint 0 needs mu_0 = 0 and lambda_0 > 0".into(),
                            });
                        }
                        if self.lambda(n) != zero || !positive(self.mu(n)) {
                            return Err(Error::InvalidRate {
                                state: n,
                                reason: "reflecting endpoint N needs lambda_N = 0 and mu_N > 0".into(),
                            });
                        }
                    }
                    other => return Err(invalid("family", format!("{other} is not a truncated family"))),
                }
            }
            StateSpace::Bilateral { lo, hi } => {
                if lo > hi {
                    return Err(invalid("window", format!("empty window [{lo}, {hi}]")));
                }
                for s in lo..=hi {
                    if !positive(self.lambda(s)) || !positive(self.mu(s)) {
                        return Err(Error::InvalidRate { state: s, reason: "bilateral rates must be positive".into() });
                    }
                    if !nonneg(self.alpha(s)) {
                        return Err(Error::InvalidRate { state: s, reason: "catastrophe rates must be nonnegative".into() });
                    }
                }
                if let Preset::Custom(t) = &self.preset {
                    if self.family == Family::Catastrophe && (0 < lo || 0 > hi) {
                        return Err(invalid("window", "catastrophe window must contain state 0"));
                    }
                    if self.family == Family::Catastrophe && RateTable::at(&t.alpha, t.lo, 0) != T::zero() {
                        return Err(Error::InvalidRate { state: 0, reason: "alpha is not defined at state 0".into() });
                    }
                }
            }
        }
        Ok(())
    }

    /// Serialisable description, rates materialised over the declared space.
    pub fn to_document(&self) -> ModelDocument {
        let (states, n, window) = match self.space {
            StateSpace::Truncated { n } => ((0..=n).collect::<Vec<_>>(), Some(n), None),
            StateSpace::Bilateral { lo, hi } => ((lo..=hi).collect(), None, Some([lo, hi])),
        };
        let mut params = BTreeMap::new();
        let mut put = |k: &str, v: T| {
            params.insert(k.to_string(), v.as_f64());
        };
        match &self.preset {
            Preset::ConstantAbsorbing { lambda, mu }
            | Preset::AlternatingA { lambda, mu }
            | Preset::AlternatingB { lambda, mu }
            | Preset::ConstantBilateral { lambda, mu } => {
                put("lambda", *lambda);
                put("mu", *mu);
            }
            Preset::Ehrenfest { alpha } | Preset::QuadraticEhrenfest { alpha } => put("alpha", *alpha),
            Preset::Sigmoidal { lambda, mu, c } => {
                put("lambda", *lambda);
                put("mu", *mu);
                put("c", *c);
            }
            Preset::ConstantCatastrophe { lambda, mu, alpha } => {
                put("lambda", *lambda);
                put("mu", *mu);
                put("alpha", *alpha);
            }
            Preset::Custom(_) => {}
        }
        let alpha = if self.family == Family::Catastrophe {
            states.iter().map(|&s| self.alpha(s).as_f64()).collect()
        } else {
            Vec::new()
        };
        ModelDocument {
            family: self.family,
            n,
            window,
            preset: self.preset_tag(),
            params,
            lambda: states.iter().map(|&s| self.lambda(s).as_f64()).collect(),
            mu: states.iter().map(|&s| self.mu(s).as_f64()).collect(),
            alpha,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let cast = |v: f64| T::from_f64(v).ok_or_else(|| Error::Document(format!("value {v} not representable")));
        let casts = |v: &[f64]| v.iter().map(|&x| cast(x)).collect::<Result<Vec<T>>>();
        if doc.preset == PresetTag::Custom {
            return match doc.family {
                Family::Absorbing => Self::absorbing(casts(&doc.lambda)?, casts(&doc.mu)?),
                Family::Reflecting => Self::reflecting(casts(&doc.lambda)?, casts(&doc.mu)?),
                Family::Bilateral | Family::Catastrophe => {
                    let [lo, hi] = doc.window.ok_or_else(|| Error::Document("custom bilateral model needs `window`".into()))?;
                    if hi - lo + 1 != doc.lambda.len() as i64 {
                        return Err(Error::Document("window length does not match the rate arrays".into()));
                    }
                    if doc.family == Family::Bilateral {
                        Self::bilateral(lo, casts(&doc.lambda)?, casts(&doc.mu)?)
                    } else {
                        Self::catastrophe(lo, casts(&doc.lambda)?, casts(&doc.mu)?, casts(&doc.alpha)?)
                    }
                }
                Family::TwoD => Err(Error::Document("two-dimensional models are not rate models".into())),
            };
        }
        let get = |k: &str| doc.params.get(k).map(|&v| cast(v)).transpose();
        let params = PresetParams {
            n: doc.n,
            lambda: get("lambda")?,
            mu: get("mu")?,
            alpha: get("alpha")?,
            c: get("c")?,
            window: doc.window.map(|[a, b]| (a, b)),
        };
        let m = build_preset(doc.preset, params)?;
        if m.family != doc.family {
            return Err(Error::FamilyMismatch { expected: doc.family, found: m.family });
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        Self::from_document(&doc)
    }
}

/// JSON form of a [`RateModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub family: Family,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[i64; 2]>,
    pub preset: PresetTag,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
}

fn require<T: Scalar>(v: Option<T>, name: &'static str, allow_zero: bool) -> Result<T> {
    let v = v.ok_or_else(|| invalid(name, "required parameter missing"))?;
    let ok = v.is_finite() && if allow_zero { v >= T::zero() } else { v > T::zero() };
    if !ok {
        let bound = if allow_zero { "nonnegative" } else { "positive" };
        return Err(invalid(name, format!("must be {bound} and finite, got {v}")));
    }
    Ok(v)
}

fn require_n(n: Option<i64>) -> Result<i64> {
    let n = n.ok_or_else(|| invalid("N", "required parameter missing"))?;
    if n <= 1 {
        return Err(Error::StateSpaceTooSmall(n));
    }
    Ok(n)
}

/// Builds one of the named rate presets.
pub fn build_preset<T: Scalar>(tag: PresetTag, p: PresetParams<T>) -> Result<RateModel<T>> {
    let window = p.window.unwrap_or(DEFAULT_WINDOW);
    let bilateral = StateSpace::Bilateral { lo: window.0, hi: window.1 };
    let (family, space, preset) = match tag {
        PresetTag::ConstantAbsorbing => (
            Family::Absorbing,
            StateSpace::Truncated { n: require_n(p.n)? },
            Preset::ConstantAbsorbing { lambda: require(p.lambda, "lambda", false)?, mu: require(p.mu, "mu", false)? },
        ),
        PresetTag::Ehrenfest => (
            Family::Reflecting,
            StateSpace::Truncated { n: require_n(p.n)? },
            Preset::Ehrenfest { alpha: require(p.alpha, "alpha", false)? },
        ),
        PresetTag::QuadraticEhrenfest => (
            Family::Reflecting,
            StateSpace::Truncated { n: require_n(p.n)? },
            Preset::QuadraticEhrenfest { alpha: require(p.alpha, "alpha", false)? },
        ),
        PresetTag::Sigmoidal => (
            Family::Bilateral,
            bilateral,
            Preset::Sigmoidal {
                lambda: require(p.lambda, "lambda", false)?,
                mu: require(p.mu, "mu", false)?,
                c: require(p.c, "c", true)?,
            },
        ),
        PresetTag::AlternatingA => (
            Family::Bilateral,
            bilateral,
            Preset::AlternatingA { lambda: require(p.lambda, "lambda", false)?, mu: require(p.mu, "mu", false)? },
        ),
        PresetTag::AlternatingB => (
            Family::Bilateral,
            bilateral,
            Preset::AlternatingB { lambda: require(p.lambda, "lambda", false)?, mu: require(p.mu, "mu", false)? },
        ),
        PresetTag::ConstantBilateral => (
            Family::Bilateral,
            bilateral,
            Preset::ConstantBilateral { lambda: require(p.lambda, "lambda", false)?, mu: require(p.mu, "mu", false)? },
        ),
        PresetTag::ConstantCatastrophe => (
            Family::Catastrophe,
            bilateral,
            Preset::ConstantCatastrophe {
                lambda: require(p.lambda, "lambda", false)?,
                mu: require(p.mu, "mu", false)?,
                alpha: require(p.alpha, "alpha", true)?,
            },
        ),
        PresetTag::Custom => return Err(invalid("preset", "custom models are built from rate tables")),
    };
    let model = RateModel { family, space, preset };
    model.validate()?;
    Ok(model)
}

/// Weights `x_0..x_N` of the absorbing quasi-symmetry relation.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryWeights<T> {
    pub x: Vec<T>,
}

impl<T: Scalar> SymmetryWeights<T> {
    pub fn get(&self, n: i64) -> T {
        self.x[n as usize]
    }

    /// `N`.
    pub fn size(&self) -> i64 {
        self.x.len() as i64 - 1
    }
}

/// `x_0 = 1`, `x_n = (μ_n / λ_{N−n}) x_{n−1}` for `1 <= n <= N−1`,
/// `x_N = (μ_1 / λ_{N−1}) x_{N−1}`.
pub fn weights<T: Scalar>(model: &RateModel<T>) -> Result<SymmetryWeights<T>> {
    if model.family() != Family::Absorbing {
        return Err(Error::FamilyMismatch { expected: Family::Absorbing, found: model.family() });
    }
    let n = model.size().expect("absorbing models are truncated");
    let mut x = Vec::with_capacity(n as usize + 1);
    x.push(T::one());
    for s in 1..n {
        let prev = x[s as usize - 1];
        x.push(model.mu(s) / model.lambda(n - s) * prev);
    }
    let last = x[n as usize - 1];
    x.push(model.mu(1) / model.lambda(n - 1) * last);
    Ok(SymmetryWeights { x })
}

/// Outcome of a symmetry check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport<T> {
    pub family: Family,
    pub satisfied: bool,
    pub worst_residual: T,
    /// State at which the worst residual occurs, reported when not satisfied.
    pub violating_index: Option<i64>,
    pub tolerance: T,
}

impl<T: Scalar> SymmetryReport<T> {
    pub(crate) fn from_residuals(family: Family, tol: T, residuals: impl IntoIterator<Item = (i64, T)>) -> Self {
        let mut worst = T::zero();
        let mut at = None;
        for (i, r) in residuals {
            if r > worst || r.is_nan() {
                worst = if r.is_nan() { T::infinity() } else { r };
                at = Some(i);
            }
        }
        let satisfied = worst <= tol;
        Self { family, satisfied, worst_residual: worst, violating_index: if satisfied { None } else { at }, tolerance: tol }
    }

    pub fn into_result(self) -> Result<Self> {
        if self.satisfied {
            Ok(self)
        } else {
            Err(Error::Asymmetric {
                residual: self.worst_residual.as_f64(),
                index: self.violating_index,
                tol: self.tolerance.as_f64(),
            })
        }
    }
}

/// `|a − b|`, relative to `max(|a|, |b|)` once that exceeds one.
pub fn residual<T: Scalar>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    let d = (a - b).abs();
    if scale > T::one() {
        d / scale
    } else {
        d
    }
}

/// Rate-level symmetry check with the default tolerance.
pub fn check_symmetry<T: Scalar>(model: &RateModel<T>, family: Family) -> Result<SymmetryReport<T>> {
    check_symmetry_with_tol(model, family, T::lit(DEFAULT_SYMMETRY_TOL))
}

pub fn check_symmetry_with_tol<T: Scalar>(model: &RateModel<T>, family: Family, tol: T) -> Result<SymmetryReport<T>> {
    if model.family() != family {
        return Err(Error::FamilyMismatch { expected: family, found: model.family() });
    }
    let mut res = Vec::new();
    match family {
        Family::Absorbing => {
            let n = model.size().expect("truncated");
            for s in 1..=n - 2 {
                let lhs = model.lambda(s) * model.mu(s + 1);
                let rhs = model.lambda(n - s - 1) * model.mu(n - s);
                res.push((s, residual(lhs, rhs)));
            }
            for s in 1..n {
                let lhs = model.lambda(s) + model.mu(s);
                let rhs = model.lambda(n - s) + model.mu(n - s);
                res.push((s, residual(lhs, rhs)));
            }
        }
        Family::Reflecting => {
            let n = model.size().expect("truncated");
            for s in 0..=n {
                res.push((s, residual(model.lambda(s), model.mu(n - s))));
            }
        }
        Family::Bilateral | Family::Catastrophe => {
            let (lo, hi) = model.window().expect("bilateral");
            let axis = model.mirror_axis();
            for s in lo..=hi {
                let m = axis - s;
                if m < lo || m > hi {
                    continue;
                }
                res.push((s, residual(model.lambda(s), model.mu(m))));
                if family == Family::Catastrophe && s != 0 && m != 0 {
                    res.push((s, residual(model.alpha(s), model.alpha(m))));
                }
            }
        }
        Family::TwoD => {
            return Err(invalid("family", "use PlaneModel::symmetry_report for two-dimensional models"));
        }
    }
    Ok(SymmetryReport::from_residuals(family, tol, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: Option<i64>, lambda: Option<f64>, mu: Option<f64>, alpha: Option<f64>) -> PresetParams<f64> {
        PresetParams { n, lambda, mu, alpha, ..Default::default() }
    }

    #[test]
    fn ehrenfest_rates() {
        let m = build_preset(PresetTag::Ehrenfest, p(Some(4), None, None, Some(1.0))).unwrap();
        let l: Vec<f64> = (0..=4).map(|n| m.lambda(n)).collect();
        let u: Vec<f64> = (0..=4).map(|n| m.mu(n)).collect();
        assert_eq!(l, vec![4.0, 3.0, 2.0, 1.0, 0.0]);
        assert_eq!(u, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn constant_absorbing_zeroes_boundaries() {
        let m = build_preset(PresetTag::ConstantAbsorbing, p(Some(2), Some(1.0), Some(1.0), None)).unwrap();
        assert_eq!((0..=2).map(|n| m.lambda(n)).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
        assert_eq!((0..=2).map(|n| m.mu(n)).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn sigmoidal_value_at_zero() {
        let params = PresetParams { lambda: Some(2.0), mu: Some(1.0), c: Some(1.0), window: Some((-3, 3)), ..Default::default() };
        let m: RateModel<f64> = build_preset(PresetTag::Sigmoidal, params).unwrap();
        assert!((m.lambda(0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sigmoidal_far_states_stay_finite() {
        let params = PresetParams { lambda: Some(2.0), mu: Some(1.0), c: Some(3.0), window: Some((-5000, 5000)), ..Default::default() };
        let m: RateModel<f64> = build_preset(PresetTag::Sigmoidal, params).unwrap();
        for n in [-5000, -1200, 0, 1200, 5000] {
            assert!(m.lambda(n).is_finite() && m.lambda(n) > 0.0);
            assert!(m.mu(n).is_finite() && m.mu(n) > 0.0);
        }
        // Limits: lambda_n -> mu as n -> -inf, lambda as n -> +inf.
        assert!((m.lambda(-5000) - 1.0).abs() < 1e-12);
        assert!((m.lambda(5000) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn preset_errors() {
        assert!(matches!(
            build_preset(PresetTag::ConstantAbsorbing, p(Some(1), Some(1.0), Some(1.0), None)),
            Err(Error::StateSpaceTooSmall(1))
        ));
        assert!(matches!(
            build_preset(PresetTag::ConstantAbsorbing, p(Some(5), Some(-1.0), Some(1.0), None)),
            Err(Error::InvalidParameter { name: "lambda", .. })
        ));
        assert!(build_preset(PresetTag::Ehrenfest, p(Some(5), None, None, Some(0.0))).is_err());
        assert!(build_preset::<f64>(PresetTag::Custom, PresetParams::default()).is_err());
    }

    #[test]
    fn weights_examples() {
        let m = build_preset(PresetTag::ConstantAbsorbing, p(Some(4), Some(1.0), Some(1.0), None)).unwrap();
        assert_eq!(weights(&m).unwrap().x, vec![1.0; 5]);
        let m = build_preset(PresetTag::ConstantAbsorbing, p(Some(4), Some(1.0), Some(2.0), None)).unwrap();
        assert_eq!(weights(&m).unwrap().x, vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        let r = build_preset(PresetTag::Ehrenfest, p(Some(4), None, None, Some(1.0))).unwrap();
        assert!(matches!(weights(&r), Err(Error::FamilyMismatch { .. })));
    }

    #[test]
    fn symmetry_examples() {
        let m = build_preset(PresetTag::ConstantAbsorbing, p(Some(10), Some(1.0), Some(0.5), None)).unwrap();
        assert!(check_symmetry(&m, Family::Absorbing).unwrap().satisfied);
        let e = build_preset(PresetTag::Ehrenfest, p(Some(6), None, None, Some(1.0))).unwrap();
        assert!(check_symmetry(&e, Family::Reflecting).unwrap().satisfied);

        let mut lambda = vec![1.0; 7];
        let mut mu = vec![1.0; 7];
        lambda[3 + 1] = 2.0; // state 1
        mu[3 - 1] = 3.0; // state -1
        let b = RateModel::bilateral(-3, lambda, mu).unwrap();
        let r = check_symmetry(&b, Family::Bilateral).unwrap();
        assert!(!r.satisfied);
        assert_eq!(r.violating_index, Some(1));
        assert!(matches!(check_symmetry(&b, Family::Absorbing), Err(Error::FamilyMismatch { .. })));
    }

    #[test]
    fn rate_condition_violation_detected() {
        // Sum condition fails: lambda_1 + mu_1 = 3 but lambda_3 + mu_3 = 2.
        let m = RateModel::absorbing(vec![0.0, 1.0, 1.0, 1.0, 0.0], vec![0.0, 2.0, 1.0, 1.0, 0.0]).unwrap();
        let r = check_symmetry(&m, Family::Absorbing).unwrap();
        assert!(!r.satisfied);
        assert!(r.worst_residual > 0.1);
    }

    #[test]
    fn custom_validation() {
        assert!(RateModel::absorbing(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 0.5]).is_err());
        assert!(RateModel::reflecting(vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]).is_ok());
        assert!(RateModel::reflecting(vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]).is_err());
        assert!(RateModel::catastrophe(-1, vec![1.0; 3], vec![1.0; 3], vec![1.0, 0.5, 1.0]).is_err());
        assert!(RateModel::catastrophe(-1, vec![1.0; 3], vec![1.0; 3], vec![1.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let m = build_preset(
            PresetTag::ConstantCatastrophe,
            PresetParams { lambda: Some(1.0), mu: Some(1.0), alpha: Some(0.5), window: Some((-4, 4)), ..Default::default() },
        )
        .unwrap();
        let back = RateModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let c = RateModel::absorbing(vec![0.0, 1.0, 2.0, 1.0, 0.0], vec![0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let back = RateModel::<f64>::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let doc = c.to_document();
        assert_eq!(doc.n, Some(4));
        assert_eq!(doc.preset, PresetTag::Custom);
    }

    #[test]
    fn preset_tag_parsing() {
        assert_eq!("ehrenfest".parse::<PresetTag>().unwrap(), PresetTag::Ehrenfest);
        assert_eq!("Constant_Absorbing".parse::<PresetTag>().unwrap(), PresetTag::ConstantAbsorbing);
        assert!("nope".parse::<PresetTag>().is_err());
    }
}
