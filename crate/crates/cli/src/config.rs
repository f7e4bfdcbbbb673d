//! Run configuration: a TOML file with nested sections, every knob also
//! overridable from the command line. The resolved configuration is embedded
//! verbatim in every output JSON.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use slowshadow::geometry::{
    example_system, DomainBox, GradientSpec, GuidingFieldSet, GuidingHamiltonian, PolyField,
    SlowPoint,
};
use slowshadow::planner::{CurveSpec, ParametricCurve};
use slowshadow::symbolic::{default_embeddings, FastStateModel, ReducedMapParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub fields: FieldsConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub curve: CurveConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: defaults::seed(),
            output_dir: defaults::output_dir(),
            fields: FieldsConfig::default(),
            model: ModelConfig::default(),
            curve: CurveConfig::default(),
            planner: PlannerConfig::default(),
            verify: VerifyConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

mod defaults {
    pub fn seed() -> u64 {
        42
    }
    pub fn output_dir() -> String {
        "results".into()
    }
    pub fn mu() -> f64 {
        0.1
    }
    pub fn domain_lower() -> Vec<f64> {
        vec![-1.0, -1.0]
    }
    pub fn domain_upper() -> Vec<f64> {
        vec![1.0, 1.0]
    }
    pub fn r() -> f64 {
        0.5
    }
    pub fn lambda() -> f64 {
        0.3
    }
    pub fn eta() -> f64 {
        0.1
    }
    pub fn epsilon() -> f64 {
        0.01
    }
    pub fn l() -> f64 {
        1.0
    }
    pub fn k_max() -> usize {
        320
    }
    pub fn grid_resolution() -> usize {
        17
    }
    pub fn stall_horizon() -> f64 {
        1.0
    }
    pub fn samples_per_interval() -> usize {
        10
    }
    pub fn trials() -> u64 {
        200
    }
    pub fn n_values() -> Vec<usize> {
        vec![5, 10, 20, 30]
    }
    pub fn k0() -> f64 {
        1.0
    }
    pub fn experiments() -> Vec<String> {
        vec![
            "uniform-closeness".into(),
            "same-code-drift".into(),
            "shadow-error".into(),
        ]
    }
    pub fn sweep_epsilons() -> Vec<f64> {
        vec![1e-2, 5e-3, 2.5e-3]
    }
    pub fn sweep_k_max() -> usize {
        80
    }
}

/// Field-set specification: the worked example preset, or explicit
/// polynomial actions (d = 1) of total degree ≤ 2 with constant periods.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "defaults::mu")]
    pub mu: f64,
    #[serde(default)]
    pub actions: Vec<ActionConfig>,
    #[serde(default)]
    pub domain: DomainConfig,
}

fn default_preset() -> String {
    "example".into()
}

impl Default for FieldsConfig {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            mu: defaults::mu(),
            actions: Vec::new(),
            domain: DomainConfig::default(),
        }
    }
}

/// One polynomial action J(u,v) = constant + u·u_coef + v·v_coef
/// + uu·u² + uv·u·v + vv·v², with a constant period.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    pub label: String,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub uu: f64,
    #[serde(default)]
    pub uv: f64,
    #[serde(default)]
    pub vv: f64,
    #[serde(default = "one")]
    pub period: f64,
    #[serde(default)]
    pub finite_difference: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default = "defaults::domain_lower")]
    pub lower: Vec<f64>,
    #[serde(default = "defaults::domain_upper")]
    pub upper: Vec<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            lower: defaults::domain_lower(),
            upper: defaults::domain_upper(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "defaults::r")]
    pub r: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    /// Window half-width override; derived from λ when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Optional ε-proportional fast-state bias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_bias: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            r: defaults::r(),
            lambda: defaults::lambda(),
            eta: defaults::eta(),
            epsilon: defaults::epsilon(),
            window: None,
            epsilon_bias: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default = "default_curve_kind")]
    pub kind: String,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub angular_speed: Option<f64>,
    #[serde(default)]
    pub phase: Option<f64>,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub velocity: Option<Vec<f64>>,
    #[serde(default)]
    pub amplitude: Option<Vec<f64>>,
    #[serde(default)]
    pub frequency: Option<Vec<f64>>,
    #[serde(default)]
    pub phases: Option<Vec<f64>>,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
}

fn default_curve_kind() -> String {
    "circle".into()
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            kind: default_curve_kind(),
            center: None,
            radius: None,
            angular_speed: None,
            phase: None,
            start: None,
            velocity: None,
            amplitude: None,
            frequency: None,
            phases: None,
            points: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    #[serde(default = "defaults::l")]
    pub l: f64,
    #[serde(default = "defaults::k_max")]
    pub k_max: usize,
    #[serde(default = "defaults::grid_resolution")]
    pub grid_resolution: usize,
    #[serde(default = "defaults::stall_horizon")]
    pub stall_horizon: f64,
    #[serde(default = "defaults::samples_per_interval")]
    pub samples_per_interval: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            l: defaults::l(),
            k_max: defaults::k_max(),
            grid_resolution: defaults::grid_resolution(),
            stall_horizon: defaults::stall_horizon(),
            samples_per_interval: defaults::samples_per_interval(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "defaults::experiments")]
    pub experiments: Vec<String>,
    #[serde(default = "defaults::trials")]
    pub trials: u64,
    #[serde(default = "defaults::n_values")]
    pub n_values: Vec<usize>,
    #[serde(default = "defaults::k0")]
    pub k0: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            experiments: defaults::experiments(),
            trials: defaults::trials(),
            n_values: defaults::n_values(),
            k0: defaults::k0(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "defaults::sweep_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "defaults::sweep_k_max")]
    pub k_max: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            epsilons: defaults::sweep_epsilons(),
            k_max: defaults::sweep_k_max(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow!("config parse error in {}: {e}", path.display()))
    }

    pub fn domain(&self) -> Result<DomainBox> {
        DomainBox::new(
            self.fields.domain.lower.clone(),
            self.fields.domain.upper.clone(),
        )
        .context("fields.domain")
    }

    /// The configured actions as a raw list plus the domain. The spanning
    /// check accepts any count (and simply reports an unsatisfiable
    /// condition); forming a proper field set enforces n ≥ 2d+1.
    pub fn field_parts(&self) -> Result<(Vec<GuidingHamiltonian>, DomainBox)> {
        let domain = self.domain()?;
        match self.fields.preset.as_str() {
            "example" => {
                let set = example_system(self.fields.mu, [0.0; 3], [1.0; 3], domain.clone())
                    .context("fields preset `example`")?;
                Ok((set.fields().to_vec(), domain))
            }
            "polynomial" => {
                if domain.dim() != 1 {
                    bail!("polynomial actions are configured in (u, v); domain must have d = 1");
                }
                let mut fields = Vec::with_capacity(self.fields.actions.len());
                for action in &self.fields.actions {
                    let quad = nalgebra::DMatrix::from_row_slice(
                        2,
                        2,
                        &[2.0 * action.uu, action.uv, action.uv, 2.0 * action.vv],
                    );
                    let poly =
                        PolyField::new(action.constant, vec![action.u, action.v], Some(quad))
                            .with_context(|| format!("action `{}`", action.label))?;
                    if !action.period.is_finite() || action.period <= 0.0 {
                        bail!(
                            "action `{}` needs a positive period, got {}",
                            action.label,
                            action.period
                        );
                    }
                    let spec = if action.finite_difference {
                        GradientSpec::FiniteDifference
                    } else {
                        GradientSpec::Analytic
                    };
                    fields.push(
                        GuidingHamiltonian::new(
                            action.label.clone(),
                            poly,
                            spec,
                            PolyField::constant(2, action.period),
                        )
                        .with_context(|| format!("action `{}`", action.label))?,
                    );
                }
                Ok((fields, domain))
            }
            other => bail!("unknown fields preset `{other}` (expected `example` or `polynomial`)"),
        }
    }

    pub fn field_set(&self) -> Result<GuidingFieldSet> {
        let (fields, domain) = self.field_parts()?;
        GuidingFieldSet::new(fields, domain).context("fields")
    }

    pub fn reduced_map(&self) -> Result<ReducedMapParams> {
        let fields = self.field_set()?;
        let embed = default_embeddings(self.model.r, self.model.lambda, fields.len(), 2)
            .context("model embeddings")?;
        let bias = self
            .model
            .epsilon_bias
            .as_ref()
            .map(|b| DVector::from_row_slice(b));
        let fast = match self.model.window {
            Some(window) => {
                FastStateModel::with_window(self.model.r, self.model.lambda, window, embed, bias)
            }
            None => FastStateModel::new(self.model.r, self.model.lambda, embed, bias),
        }
        .context("model")?;
        ReducedMapParams::new(fields, fast, self.model.eta, self.model.epsilon).context("model")
    }

    pub fn curve(&self) -> Result<CurveSpec> {
        let point = |coords: &Vec<f64>, what: &str| -> Result<SlowPoint> {
            SlowPoint::new(coords.clone()).with_context(|| format!("curve.{what}"))
        };
        let pair = |values: &Option<Vec<f64>>, what: &str| -> Result<[f64; 2]> {
            let v = values.as_ref().ok_or_else(|| {
                anyhow!("curve.{what} is required for kind `{}`", self.curve.kind)
            })?;
            if v.len() != 2 {
                bail!("curve.{what} needs exactly two entries");
            }
            Ok([v[0], v[1]])
        };
        let spec = match self.curve.kind.as_str() {
            "circle" => CurveSpec::parametric(ParametricCurve::Circle {
                center: point(
                    self.curve.center.as_ref().unwrap_or(&vec![0.0, 0.0]),
                    "center",
                )?,
                radius: self.curve.radius.unwrap_or(0.5),
                angular_speed: self.curve.angular_speed.unwrap_or(1.0),
                phase: self.curve.phase.unwrap_or(0.0),
            }),
            "line" => CurveSpec::parametric(ParametricCurve::Line {
                start: point(
                    self.curve.start.as_ref().unwrap_or(&vec![0.0, 0.0]),
                    "start",
                )?,
                velocity: DVector::from_row_slice(
                    self.curve
                        .velocity
                        .as_ref()
                        .ok_or_else(|| anyhow!("curve.velocity is required for kind `line`"))?,
                ),
            }),
            "lissajous" => CurveSpec::parametric(ParametricCurve::Lissajous {
                center: point(
                    self.curve.center.as_ref().unwrap_or(&vec![0.0, 0.0]),
                    "center",
                )?,
                amplitude: pair(&self.curve.amplitude, "amplitude")?,
                frequency: pair(&self.curve.frequency, "frequency")?,
                phase: pair(
                    &self.curve.phases.clone().or(Some(vec![0.0, 0.0])),
                    "phases",
                )?,
            }),
            "polyline" => {
                let raw = self
                    .curve
                    .points
                    .as_ref()
                    .ok_or_else(|| anyhow!("curve.points is required for kind `polyline`"))?;
                let points = raw
                    .iter()
                    .map(|p| point(p, "points"))
                    .collect::<Result<Vec<_>>>()?;
                CurveSpec::polyline(points)
            }
            other => {
                bail!("unknown curve kind `{other}` (expected circle, line, lissajous or polyline)")
            }
        };
        spec.context("curve")
    }

    /// Resolved config as a JSON value, embedded in every output file.
    pub fn as_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves() {
        let config = RunConfig::default();
        let params = config.reduced_map().unwrap();
        assert_eq!(params.fields().len(), 3);
        assert!(config.curve().is_ok());
    }

    #[test]
    fn polynomial_fields_parse() {
        let text = r#"
            [fields]
            preset = "polynomial"

            [[fields.actions]]
            label = "c1"
            u = 0.1

            [[fields.actions]]
            label = "c2"
            v = 0.1

            [[fields.actions]]
            label = "c3"
            u = -0.1
            v = -0.1
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        let fields = config.field_set().unwrap();
        assert_eq!(fields.len(), 3);
        let z = SlowPoint::new(vec![0.3, -0.2]).unwrap();
        let g = fields.grad_action(0, &z).unwrap();
        assert_eq!(g.as_slice(), &[0.1, 0.0]);
    }

    #[test]
    fn quadratic_coefficients_differentiate_correctly() {
        let text = r#"
            [fields]
            preset = "polynomial"

            [[fields.actions]]
            label = "q"
            uu = 1.0
            uv = 2.0

            [[fields.actions]]
            label = "c2"
            v = 0.1

            [[fields.actions]]
            label = "c3"
            u = -0.1
            v = -0.1
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        let fields = config.field_set().unwrap();
        // J = u² + 2uv → ∇J = (2u + 2v, 2u).
        let z = SlowPoint::new(vec![0.25, -0.5]).unwrap();
        let g = fields.grad_action(0, &z).unwrap();
        assert!((g[0] - (-0.5)).abs() < 1e-14);
        assert!((g[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[model]\nr = 0.5\nbogus = 1.0\n";
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn unknown_preset_is_rejected() {
        let text = "[fields]\npreset = \"weird\"\n";
        let config: RunConfig = toml::from_str(text).unwrap();
        assert!(config.field_set().is_err());
    }
}
