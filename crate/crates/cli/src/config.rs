//! Flat `key = value` experiment configuration with dotted section names.
//!
//! `#` starts a comment. Lists are comma separated. Unknown and repeated
//! keys are rejected with the offending line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use holozero::basis::{QuadratureConfig, DEFAULT_MAX_DEGREE};
use holozero::geometry::{TestForm, Weight, WeightModel};
use holozero::zeros::DEFAULT_POLISH_TOL;

use crate::registry;

pub const KNOWN_KEYS: &[&str] = &[
    "model.kind",
    "model.name",
    "model.coefficients",
    "model.curvature_floor",
    "model.truncation_radius",
    "model.n_ladder",
    "form.kind",
    "form.radius",
    "form.inner_radius",
    "basis.tol",
    "basis.max_degree",
    "basis.residual_threshold",
    "quad.radial_nodes",
    "quad.angular_nodes",
    "roots.polish_tol",
    "asym.b0",
    "asym.k",
    "asym.tol",
    "asym.region",
    "asym.slope_min",
    "asym.slope_max",
    "asym.min_r2",
    "asym.max_growth",
    "clt.samples",
    "clt.seed",
    "clt.audit_samples",
    "clt.audit_tol",
    "clt.shift_ratio_tol",
    "clt.ks_alpha",
    "clt.max_abs_skewness",
    "clt.max_abs_excess_kurtosis",
    "clt.conditions",
    "conditions.i_floor",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// 1-based line, 0 when the problem is a missing key.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}: {}", self.key, self.message)
        } else {
            write!(f, "config line {}: {}: {}", self.line, self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    BargmannFock,
    RadialPolynomial(Vec<f64>),
    Custom(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FormKind {
    PolyBump,
    PlateauBump,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model_kind: ModelKind,
    pub curvature_floor: f64,
    pub truncation_radius: f64,
    pub n_ladder: Vec<u32>,
    pub form_kind: FormKind,
    pub form_radius: f64,
    pub form_inner_radius: Option<f64>,
    pub basis_tol: f64,
    pub max_degree: usize,
    pub residual_threshold: f64,
    pub quad: QuadratureConfig,
    pub polish_tol: f64,
    pub b0: f64,
    pub k: u32,
    pub asym_tol: f64,
    pub asym_region: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    pub min_r2: f64,
    pub max_growth: f64,
    pub samples: usize,
    pub seed: u64,
    pub audit_samples: usize,
    pub audit_tol: f64,
    pub shift_ratio_tol: f64,
    pub ks_alpha: f64,
    pub max_abs_skewness: f64,
    pub max_abs_excess_kurtosis: f64,
    pub clt_conditions: bool,
    pub i_floor: f64,
    /// Keys as written in the file, for the run manifest.
    pub echo: BTreeMap<String, String>,
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.0.get(key).map_or(0, |e| e.0),
            key: key.into(),
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|e| e.1.as_str())
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(key, format!("cannot parse {v:?}"))),
        }
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.get(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.err(key, format!("must be positive and finite, got {v}")));
        }
        Ok(v)
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|_| self.err(key, format!("cannot parse list item {:?}", item.trim())))
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let number = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                line: number,
                key: content.into(),
                message: "expected `key = value`".into(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError {
                line: number,
                key: key.into(),
                message: "unknown key".into(),
            });
        }
        if value.is_empty() {
            return Err(ConfigError {
                line: number,
                key: key.into(),
                message: "empty value".into(),
            });
        }
        if let Some((first, _)) = map.insert(key.to_string(), (number, value.to_string())) {
            return Err(ConfigError {
                line: number,
                key: key.into(),
                message: format!("repeated key, first set on line {first}"),
            });
        }
    }
    Ok(Entries(map))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let e = tokenize(text)?;

        let kind = e.raw("model.kind").unwrap_or("bargmann_fock");
        if e.raw("model.coefficients").is_some() && kind != "radial_polynomial" {
            return Err(e.err("model.coefficients", "only used with model.kind = radial_polynomial"));
        }
        if e.raw("model.name").is_some() && kind != "custom" {
            return Err(e.err("model.name", "only used with model.kind = custom"));
        }
        let model_kind = match kind {
            "bargmann_fock" => ModelKind::BargmannFock,
            "radial_polynomial" => ModelKind::RadialPolynomial(
                e.list("model.coefficients")?
                    .ok_or_else(|| e.err("model.coefficients", "required for radial_polynomial"))?,
            ),
            "custom" => {
                let name = e.raw("model.name").ok_or_else(|| e.err("model.name", "required for custom"))?;
                if registry::custom_weight(name).is_none() {
                    return Err(e.err(
                        "model.name",
                        format!("unknown custom weight {name:?}; registered: {}", registry::CUSTOM_WEIGHTS.join(", ")),
                    ));
                }
                ModelKind::Custom(name.into())
            }
            other => {
                return Err(e.err(
                    "model.kind",
                    format!("expected bargmann_fock, radial_polynomial or custom, got {other:?}"),
                ))
            }
        };
        let curvature_floor = match (&model_kind, e.parse::<f64>("model.curvature_floor")?) {
            (_, Some(v)) => v,
            (ModelKind::BargmannFock, None) => 2.0,
            (_, None) => return Err(e.err("model.curvature_floor", "required for this model kind")),
        };

        let n_ladder: Vec<u32> = e
            .list("model.n_ladder")?
            .ok_or_else(|| e.err("model.n_ladder", "required"))?;
        if n_ladder.is_empty() || n_ladder.contains(&0) {
            return Err(e.err("model.n_ladder", "entries must be positive"));
        }

        let form_kind = match e.raw("form.kind").unwrap_or("poly_bump") {
            "poly_bump" => FormKind::PolyBump,
            "plateau_bump" => FormKind::PlateauBump,
            other => {
                return Err(e.err("form.kind", format!("expected poly_bump or plateau_bump, got {other:?}")));
            }
        };
        let form_radius = e.positive("form.radius", 1.0)?;
        let form_inner_radius = e.parse::<f64>("form.inner_radius")?;
        if form_kind == FormKind::PlateauBump && form_inner_radius.is_none() {
            return Err(e.err("form.inner_radius", "required for plateau_bump"));
        }

        let defaults = QuadratureConfig::default();
        let quad = QuadratureConfig {
            radial_nodes: e.get("quad.radial_nodes", defaults.radial_nodes)?,
            angular_nodes: e.get("quad.angular_nodes", defaults.angular_nodes)?,
            ..defaults
        };
        if quad.radial_nodes == 0 || quad.angular_nodes == 0 {
            return Err(e.err("quad.radial_nodes", "node counts must be positive"));
        }

        let cfg = RunConfig {
            model_kind,
            curvature_floor,
            truncation_radius: e.positive("model.truncation_radius", 2.0)?,
            n_ladder,
            form_kind,
            form_radius,
            form_inner_radius,
            basis_tol: e.positive("basis.tol", 1e-12)?,
            max_degree: e.get("basis.max_degree", DEFAULT_MAX_DEGREE)?,
            residual_threshold: e.positive("basis.residual_threshold", 1e-8)?,
            quad,
            polish_tol: e.positive("roots.polish_tol", DEFAULT_POLISH_TOL)?,
            b0: e.positive("asym.b0", 3.0)?,
            k: e.get("asym.k", 1)?,
            asym_tol: e.positive("asym.tol", 1e-20)?,
            asym_region: e.positive("asym.region", form_radius)?,
            slope_min: e.get("asym.slope_min", 0.9)?,
            slope_max: e.get("asym.slope_max", 1.1)?,
            min_r2: e.get("asym.min_r2", 0.99)?,
            max_growth: e.positive("asym.max_growth", 1.3)?,
            samples: e.get("clt.samples", 2000)?,
            seed: e.get("clt.seed", 0)?,
            audit_samples: e.get("clt.audit_samples", 100)?,
            audit_tol: e.positive("clt.audit_tol", 1e-3)?,
            shift_ratio_tol: e.positive("clt.shift_ratio_tol", 1e-3)?,
            ks_alpha: e.positive("clt.ks_alpha", 0.01)?,
            max_abs_skewness: e.positive("clt.max_abs_skewness", 0.15)?,
            max_abs_excess_kurtosis: e.positive("clt.max_abs_excess_kurtosis", 0.3)?,
            clt_conditions: e.get("clt.conditions", true)?,
            i_floor: e.get("conditions.i_floor", 0.0)?,
            echo: e.0.iter().map(|(k, (_, v))| (k.clone(), v.clone())).collect(),
        };
        if cfg.ks_alpha >= 1.0 {
            return Err(e.err("clt.ks_alpha", "must lie in (0, 1)"));
        }
        Ok(cfg)
    }

    pub fn weight(&self) -> Weight {
        match &self.model_kind {
            ModelKind::BargmannFock => Weight::BargmannFock,
            ModelKind::RadialPolynomial(c) => Weight::RadialPolynomial(c.clone()),
            ModelKind::Custom(name) => registry::custom_weight(name).expect("validated at parse time"),
        }
    }

    pub fn model(&self) -> holozero::Result<WeightModel> {
        WeightModel::new(self.weight(), self.curvature_floor, self.truncation_radius)
    }

    pub fn form(&self) -> holozero::Result<TestForm> {
        match self.form_kind {
            FormKind::PolyBump => TestForm::poly_bump(self.form_radius),
            FormKind::PlateauBump => TestForm::plateau_bump(self.form_inner_radius.unwrap_or(0.0), self.form_radius),
        }
    }
}

pub fn load(path: &Path) -> std::io::Result<String> {
    std::fs::read_to_string(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse("model.n_ladder = 50, 100\n").unwrap();
        assert_eq!(cfg.model_kind, ModelKind::BargmannFock);
        assert_eq!(cfg.n_ladder, vec![50, 100]);
        assert_eq!(cfg.samples, 2000);
        assert_eq!(cfg.curvature_floor, 2.0);
        assert_eq!(cfg.asym_region, 1.0);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\n\nmodel.n_ladder = 10 # trailing\nclt.seed=7\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.echo.len(), 2);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = RunConfig::parse("model.n_ladder = 10\n\nclt.sampels = 3\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.key, "clt.sampels");
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn malformed_values_are_rejected() {
        let err = RunConfig::parse("model.n_ladder = 10, x\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = RunConfig::parse("model.n_ladder = 10\nclt.samples = many\n").unwrap_err();
        assert_eq!((err.line, err.key.as_str()), (2, "clt.samples"));
        assert!(RunConfig::parse("model.n_ladder 10\n").is_err());
        assert!(RunConfig::parse("model.n_ladder = 10\nmodel.n_ladder = 20\n").is_err());
        assert!(RunConfig::parse("model.n_ladder = 10\nbasis.tol = -1\n").is_err());
    }

    #[test]
    fn model_kinds_need_their_parameters() {
        assert!(RunConfig::parse("model.n_ladder = 10\nmodel.kind = radial_polynomial\n").is_err());
        assert!(RunConfig::parse("model.n_ladder = 10\nmodel.kind = custom\nmodel.curvature_floor = 2\n").is_err());
        assert!(RunConfig::parse("model.n_ladder = 10\nmodel.coefficients = 0, 1\n").is_err());
        let cfg = RunConfig::parse(
            "model.n_ladder = 10\nmodel.kind = radial_polynomial\nmodel.coefficients = 0, 1, 0.05\nmodel.curvature_floor = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.model_kind, ModelKind::RadialPolynomial(vec![0.0, 1.0, 0.05]));
        assert!(cfg.model().is_ok());
        let err = RunConfig::parse("model.n_ladder = 10\nmodel.kind = custom\nmodel.name = nope\nmodel.curvature_floor = 2\n")
            .unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn plateau_form_needs_inner_radius() {
        assert!(RunConfig::parse("model.n_ladder = 10\nform.kind = plateau_bump\n").is_err());
        let cfg = RunConfig::parse("model.n_ladder = 10\nform.kind = plateau_bump\nform.inner_radius = 0.3\nform.radius = 0.9\n")
            .unwrap();
        assert!((cfg.form().unwrap().support_radius() - 0.9).abs() < 1e-15);
    }
}
