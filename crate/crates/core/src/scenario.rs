//! Scenario documents.
//!
//! A scenario is one JSON object:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "id": "klein-ma",
//!   "geometry": {"kind": "klein_ball", "n": 2},
//!   "checks": ["ma_residual", {"name": "convexity_certificate", "tol": 1e-9}],
//!   "points": {"count": 20, "seed": 7},
//!   "density": "(1 - x1^2 - x2^2)^(1/2)",
//!   "section": {"kind": "zero"},
//!   "tolerances": {"ma_residual.residual": 1e-10},
//!   "output": {"dir": "out", "format": "both"}
//! }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::GeometrySpec;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

macro_rules! checks {
    ($($variant:ident => $name:literal: $doc:literal,)*) => {
        /// Named residual suites.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum CheckName {
            $($variant,)*
        }

        impl CheckName {
            pub const ALL: &'static [CheckName] = &[$(CheckName::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(CheckName::$variant => $name,)*
                }
            }

            pub fn description(self) -> &'static str {
                match self {
                    $(CheckName::$variant => $doc,)*
                }
            }
        }

        impl FromStr for CheckName {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(CheckName::$variant),)*
                    _ => Err(Error::Scenario(format!("unknown check '{s}'"))),
                }
            }
        }
    };
}

checks! {
    Closedness => "closedness": "dΩ = 0 over all coordinate triples",
    Einstein => "einstein": "Ric(h) = λh with constant λ, also after a change of base connection",
    CurvatureDictionary => "curvature_dictionary": "torsion and curvature of D against Y, W and the algebraic bracket",
    BracketIdentities => "bracket_identities": "Lie brackets of lifted fields",
    CanonicalParallelism => "canonical_parallelism": "D h = 0 and D Ω = 0",
    LeviCivitaRoutes => "levi_civita_routes": "Levi-Civita of h from the metric and from D plus contorsion",
    UniversalRho => "universal_rho": "pullback of the universal Rho along sections equals their Rho",
    ClassifySection => "classify_section": "Lagrangian / non-degenerate classification and pullback identities",
    SecondFundamentalForms => "second_fundamental_forms": "closed-form and extrinsic second fundamental forms agree",
    SectionResiduals => "section_residuals": "minimal, totally geodesic and mean curvature residuals vanish",
    WeylFromDensity => "weyl_from_density": "the Weyl structure of a density preserves it",
    RhoEqualsMetric => "rho_equals_metric": "Rho of the density's Weyl structure equals the geometry's metric",
    HessianInvariance => "hessian_invariance": "projective Hessian unchanged under random changes of representative",
    MaResidual => "ma_residual": "det H(σ) = sign σ^(-n-2) and its companion identities",
    ConvexityCertificate => "convexity_certificate": "Monge-Ampère solution, positive Rho, minimal Lagrangian",
    WeylInvariance => "weyl_invariance": "Weyl curvature unchanged under random changes of representative",
    RhoChangeLaw => "rho_change_law": "P' = P + ∇Υ − Υ⊗Υ under random changes",
    TractorFlatness => "tractor_flatness": "cotractor curvature vanishes",
    TractorCurvature => "tractor_curvature": "cotractor curvature blocks equal (W, Y)",
    LineCorrespondence => "line_correspondence": "section to cotractor line round trip and covariance",
    HessianRecovery => "hessian_recovery": "symmetric part of the derivative of the splitting is H(σ)",
    EngineSoundness => "engine_soundness": "jets against finite differences, Leibniz rule and metricity",
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CheckRepr", into = "CheckRepr")]
pub struct CheckSpec {
    pub name: CheckName,
    /// Overrides every tolerance of this check.
    pub tol: Option<f64>,
    /// Sign of the Monge–Ampère equation; defaults to `(−1)ⁿ`.
    pub sign: Option<f64>,
}

impl CheckSpec {
    pub fn new(name: CheckName) -> Self {
        CheckSpec { name, tol: None, sign: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum CheckRepr {
    Name(String),
    Full {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sign: Option<f64>,
    },
}

impl TryFrom<CheckRepr> for CheckSpec {
    type Error = Error;

    fn try_from(r: CheckRepr) -> Result<Self> {
        match r {
            CheckRepr::Name(n) => Ok(CheckSpec::new(n.parse()?)),
            CheckRepr::Full { name, tol, sign } => {
                if let Some(s) = sign {
                    if s != 1.0 && s != -1.0 {
                        return Err(Error::Scenario(format!("sign must be 1 or -1, got {s}")));
                    }
                }
                if tol.is_some_and(|t| !(t >= 0.0)) {
                    return Err(Error::Scenario("tolerances must be non-negative".into()));
                }
                Ok(CheckSpec { name: name.parse()?, tol, sign })
            }
        }
    }
}

impl From<CheckSpec> for CheckRepr {
    fn from(c: CheckSpec) -> Self {
        if c.tol.is_none() && c.sign.is_none() {
            CheckRepr::Name(c.name.as_str().to_string())
        } else {
            CheckRepr::Full { name: c.name.as_str().to_string(), tol: c.tol, sign: c.sign }
        }
    }
}

/// Where sample points come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointPolicy {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Explicit base points; overrides `count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<Vec<f64>>>,
    /// Fiber coordinates on the bundle are drawn from `[-fiber_scale, fiber_scale)`.
    #[serde(default = "default_fiber_scale")]
    pub fiber_scale: f64,
}

fn default_count() -> usize {
    20
}

fn default_fiber_scale() -> f64 {
    1.0
}

impl Default for PointPolicy {
    fn default() -> Self {
        PointPolicy { count: default_count(), seed: 0, explicit: None, fiber_scale: default_fiber_scale() }
    }
}

/// Sections used by section-based checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SectionInput {
    /// `ψ = 0`.
    Zero,
    /// Covector components as expressions in `x1..xn`.
    Expressions { psi: Vec<String> },
    /// The Weyl structure of the scenario density.
    Density,
    /// `count` sections with random polynomial components.
    RandomPolynomial {
        count: usize,
        #[serde(default = "default_degree")]
        degree: usize,
    },
    /// `count` non-degenerate Lagrangian sections from random densities `exp(p)`.
    RandomLagrangian { count: usize },
}

fn default_degree() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err(Error::Scenario(format!("unknown format '{s}'"))),
        }
    }
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub id: String,
    pub geometry: GeometrySpec,
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub points: PointPolicy,
    /// Overrides keyed by `check` or `check.quantity`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    /// Weight-1 density component, an expression in `x1..xn`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionInput>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Scenario {
    pub fn from_json(src: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(src).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&src)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(Error::Scenario(format!("invalid scenario id '{}'", self.id)));
        }
        if self.checks.is_empty() {
            return Err(Error::Scenario("no checks listed".into()));
        }
        if self.geometry.dim() < 2 {
            return Err(Error::Scenario("geometry dimension must be at least 2".into()));
        }
        for key in self.tolerances.keys() {
            let check = key.split('.').next().unwrap_or_default();
            check.parse::<CheckName>()?;
        }
        if self.tolerances.values().any(|t| !(*t >= 0.0)) {
            return Err(Error::Scenario("tolerances must be non-negative".into()));
        }
        if let Some(pts) = &self.points.explicit {
            if pts.is_empty() || pts.iter().any(|p| p.len() != self.geometry.dim()) {
                return Err(Error::Scenario("explicit points must be non-empty and match the dimension".into()));
            }
        } else if self.points.count == 0 {
            return Err(Error::Scenario("point count must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_json(r#"{"schema_version":1,"id":"a","geometry":{"kind":"flat","n":3},"checks":["einstein","closedness"]}"#).unwrap();
        assert_eq!(s.points.count, 20);
        assert_eq!(s.checks[0], CheckSpec::new(CheckName::Einstein));
        assert_eq!(s.output.format, OutputFormat::Both);
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_check_is_rejected() {
        let err = Scenario::from_json(r#"{"schema_version":1,"id":"a","geometry":{"kind":"flat","n":2},"checks":["curvature_vibes"]}"#).unwrap_err();
        assert!(matches!(err, Error::Scenario(_)));
        let err = Scenario::from_json(r#"{"schema_version":1,"id":"a","geometry":{"kind":"flat","n":2},"checks":["einstein"],"tolerances":{"nope.x":1}}"#).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn parametrized_checks() {
        let s = Scenario::from_json(r#"{"schema_version":1,"id":"a","geometry":{"kind":"klein_ball","n":2},"checks":[{"name":"ma_residual","sign":1}],"density":"1"}"#).unwrap();
        assert_eq!(s.checks[0].sign, Some(1.0));
        assert!(Scenario::from_json(r#"{"schema_version":1,"id":"a","geometry":{"kind":"klein_ball","n":2},"checks":[{"name":"ma_residual","sign":2}]}"#).is_err());
    }

    #[test]
    fn wrong_schema_version() {
        assert!(Scenario::from_json(r#"{"schema_version":2,"id":"a","geometry":{"kind":"flat","n":2},"checks":["einstein"]}"#).is_err());
        assert!(Scenario::from_json(r#"{"id":"a","geometry":{"kind":"flat","n":2},"checks":["einstein"]}"#).is_err());
    }

    #[test]
    fn every_check_name_round_trips() {
        for c in CheckName::ALL {
            assert_eq!(c.as_str().parse::<CheckName>().unwrap(), *c);
        }
    }
}
