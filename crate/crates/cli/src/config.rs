//! Scenario files: a TOML list of `[[scenario]]` tables, each with a `kind`
//! and a `parameters` table checked against that kind's schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;
use vdwlab_core::asymptotics::{linspace, SweepMethod, SweepTemplate};
use vdwlab_core::dispersion::natural_interaction;
use vdwlab_core::spectral::MethodChoice;
use vdwlab_core::{AtomSpec, GridSpec, PairInteraction, PotentialKind, SolverSettings, SystemConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: scenario `{scenario}`: {message}")]
    Invalid { path: String, scenario: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    GroundState,
    Sigma,
    Feshbach,
    Variational,
    Sweep,
    Stability,
    Partition,
    Combinatorics,
}

impl Kind {
    pub fn tag(self) -> &'static str {
        match self {
            Kind::GroundState => "ground_state",
            Kind::Sigma => "sigma",
            Kind::Feshbach => "feshbach",
            Kind::Variational => "variational",
            Kind::Sweep => "sweep",
            Kind::Stability => "stability",
            Kind::Partition => "partition",
            Kind::Combinatorics => "combinatorics",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    scenario: Vec<RawScenario>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    kind: Kind,
    output: Option<String>,
    parameters: Option<Spanned<toml::Value>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    /// `cartesian` or `radial`.
    #[serde(default = "cartesian")]
    pub geometry: String,
    #[serde(default = "one")]
    pub dim: usize,
    pub points: usize,
    pub half_width: Option<f64>,
    pub r_max: Option<f64>,
}

fn cartesian() -> String {
    "cartesian".into()
}

fn one() -> usize {
    1
}

impl GridParams {
    pub fn spec(&self) -> Result<GridSpec, String> {
        let g = match self.geometry.as_str() {
            "cartesian" => {
                let hw = self.half_width.ok_or("cartesian grids need `half_width`")?;
                if self.r_max.is_some() {
                    return Err("`r_max` belongs to radial grids".into());
                }
                GridSpec::cartesian(self.dim, self.points, hw)
            }
            "radial" => {
                let r = self.r_max.ok_or("radial grids need `r_max`")?;
                if self.half_width.is_some() {
                    return Err("`half_width` belongs to cartesian grids".into());
                }
                GridSpec::radial(self.points, r)
            }
            other => return Err(format!("unknown geometry `{other}`, expected `cartesian` or `radial`")),
        };
        g.map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomParams {
    /// `well1d`, `well3d`, `soft_coulomb1d` or `coulomb3d`.
    pub potential: String,
    #[serde(default = "unit_charge")]
    pub charge: u32,
    pub strength: Option<f64>,
    pub strengths: Option<[f64; 3]>,
    pub softening: Option<f64>,
    pub position: Option<Vec<f64>>,
}

fn unit_charge() -> u32 {
    1
}

impl AtomParams {
    pub fn atom(&self) -> Result<AtomSpec, String> {
        let unused = |name: &str, set: bool| if set { Err(format!("`{name}` does not apply to {}", self.potential)) } else { Ok(()) };
        let kind = match self.potential.as_str() {
            "well1d" => {
                unused("strengths", self.strengths.is_some())?;
                unused("softening", self.softening.is_some())?;
                PotentialKind::Well1d { strength: self.strength.unwrap_or(1.0) }
            }
            "well3d" => {
                unused("strength", self.strength.is_some())?;
                unused("softening", self.softening.is_some())?;
                PotentialKind::Well3d { strengths: self.strengths.unwrap_or([1.0; 3]) }
            }
            "soft_coulomb1d" => {
                unused("strength", self.strength.is_some())?;
                unused("strengths", self.strengths.is_some())?;
                PotentialKind::SoftCoulomb1d { softening: self.softening.unwrap_or(1.0) }
            }
            "coulomb3d" => {
                unused("strength", self.strength.is_some() || self.strengths.is_some())?;
                unused("softening", self.softening.is_some())?;
                PotentialKind::Coulomb3d
            }
            other => {
                return Err(format!(
                    "unknown potential `{other}`, expected well1d, well3d, soft_coulomb1d or coulomb3d"
                ))
            }
        };
        let dim = kind.dim().unwrap_or(1);
        let position = self.position.clone().unwrap_or_else(|| vec![0.0; dim]);
        let atom = AtomSpec::new(self.charge, kind, position);
        atom.validate().map_err(|e| e.to_string())?;
        Ok(atom)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionParams {
    /// `coulomb`, `soft_coulomb` or `dipole`.
    pub kind: String,
    pub softening: Option<f64>,
    pub prefactor: Option<f64>,
}

impl InteractionParams {
    pub fn interaction(&self) -> Result<PairInteraction, String> {
        match self.kind.as_str() {
            "coulomb" => Ok(PairInteraction::Coulomb),
            "soft_coulomb" => Ok(PairInteraction::SoftCoulomb { softening: self.softening.unwrap_or(1.0) }),
            "dipole" => Ok(PairInteraction::Dipole { prefactor: self.prefactor.unwrap_or(1.0) }),
            other => Err(format!("unknown interaction `{other}`, expected coulomb, soft_coulomb or dipole")),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub krylov_dim: Option<usize>,
    /// `auto`, `dense` or `iterative`.
    pub method: Option<MethodChoice>,
}

impl SolverParams {
    pub fn settings(&self, seed: u64) -> SolverSettings {
        let d = SolverSettings::default();
        SolverSettings {
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            krylov_dim: self.krylov_dim.unwrap_or(d.krylov_dim),
            method: self.method.unwrap_or(d.method),
            seed,
            ..d
        }
    }
}

/// Either a Drude pair at coupling `lambda` or explicit atoms.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub drude_lambda: Option<f64>,
    pub drude_strengths: Option<[f64; 2]>,
    #[serde(default)]
    pub atoms: Vec<AtomParams>,
    pub electrons: Option<usize>,
    pub interaction: Option<InteractionParams>,
}

impl SystemParams {
    pub fn config(&self) -> Result<SystemConfig, String> {
        if let Some(lambda) = self.drude_lambda {
            if !self.atoms.is_empty() || self.electrons.is_some() || self.interaction.is_some() {
                return Err("`drude_lambda` excludes `atoms`, `electrons` and `interaction`".into());
            }
            let [s1, s2] = self.drude_strengths.unwrap_or([1.0, 1.0]);
            return SystemConfig::drude_pair(s1, s2, lambda).map_err(|e| e.to_string());
        }
        if self.drude_strengths.is_some() {
            return Err("`drude_strengths` needs `drude_lambda`".into());
        }
        if self.atoms.is_empty() {
            return Err("give either `drude_lambda` or at least one atom".into());
        }
        let atoms: Vec<AtomSpec> = self.atoms.iter().map(AtomParams::atom).collect::<Result<_, _>>()?;
        let interaction = match &self.interaction {
            Some(i) => i.interaction()?,
            None => natural_interaction(&atoms[0]),
        };
        let n = self.electrons.unwrap_or_else(|| atoms.iter().map(|a| a.charge as usize).sum());
        SystemConfig::new(atoms, n, interaction).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateParams {
    pub system: SystemParams,
    pub grid: GridParams,
    #[serde(default = "one")]
    pub states: usize,
    #[serde(default)]
    pub solver: SolverParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaParams {
    /// Defaults to two unit Drude wells.
    pub atoms: Option<[AtomParams; 2]>,
    pub grid: GridParams,
    /// Several directions run the direction-independence check (3D only).
    #[serde(default)]
    pub directions: Vec<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeshbachParams {
    pub system: SystemParams,
    pub grid: GridParams,
    pub cutoff_radius: Option<f64>,
    #[serde(default)]
    pub measure_gap: bool,
    #[serde(default)]
    pub solver: SolverParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationalParams {
    pub system: SystemParams,
    pub grid: GridParams,
    pub cutoff_radius: Option<f64>,
    #[serde(default)]
    pub solver: SolverParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeParams {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    /// Drude coupling sweep with these well strengths.
    pub drude_strengths: Option<[f64; 2]>,
    /// Separation sweep of this atom pair.
    pub atoms: Option<[AtomParams; 2]>,
    pub interaction: Option<InteractionParams>,
    pub abscissae: Option<Vec<f64>>,
    pub range: Option<RangeParams>,
    #[serde(default = "all_methods")]
    pub methods: Vec<SweepMethod>,
    pub grid: GridParams,
    #[serde(default = "yes")]
    pub fit: bool,
    /// Largest-`|W|` points left out of the fit.
    #[serde(default = "two")]
    pub fit_drop: usize,
    #[serde(default)]
    pub solver: SolverParams,
}

fn all_methods() -> Vec<SweepMethod> {
    SweepMethod::ALL.to_vec()
}

fn yes() -> bool {
    true
}

fn two() -> usize {
    2
}

impl SweepParams {
    pub fn abscissae(&self) -> Result<Vec<f64>, String> {
        let xs = match (&self.abscissae, &self.range) {
            (Some(x), None) => x.clone(),
            (None, Some(r)) => linspace(r.from, r.to, r.count),
            _ => return Err("give exactly one of `abscissae` and `range`".into()),
        };
        if xs.is_empty() {
            return Err("sweep has no abscissae".into());
        }
        if let Some(w) = xs.windows(2).find(|w| w[0] >= w[1]) {
            return Err(format!("abscissae must be strictly increasing ({} then {})", w[0], w[1]));
        }
        Ok(xs)
    }

    pub fn template(&self) -> Result<SweepTemplate, String> {
        match (&self.drude_strengths, &self.atoms) {
            (Some([s1, s2]), None) => {
                if self.interaction.is_some() {
                    return Err("coupling sweeps fix the interaction".into());
                }
                Ok(SweepTemplate::drude(*s1, *s2))
            }
            (None, Some([a, b])) => {
                let (a, b) = (a.atom()?, b.atom()?);
                let interaction = match &self.interaction {
                    Some(i) => i.interaction()?,
                    None => natural_interaction(&a),
                };
                Ok(SweepTemplate::Separation { atoms: (a, b), interaction })
            }
            (None, None) => Ok(SweepTemplate::drude(1.0, 1.0)),
            _ => Err("give `drude_strengths` or `atoms`, not both".into()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderParams {
    pub atom: AtomParams,
    #[serde(default = "one_u32")]
    pub n_max: u32,
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityParams {
    pub ladders: Vec<LadderParams>,
    pub grid: GridParams,
    /// Run the Property (E') enumeration as well.
    #[serde(default)]
    pub prime: bool,
    #[serde(default)]
    pub solver: SolverParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionParams {
    pub system: SystemParams,
    pub grid: GridParams,
    pub scale: Option<f64>,
    #[serde(default = "samples")]
    pub samples: usize,
}

fn samples() -> usize {
    10_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "snake_case")]
pub enum CombinatoricsParams {
    Scan { z: u32, max_length: Option<usize> },
    Decompose { z: u32, charges: Vec<i32> },
    Witness { integers: Vec<i64> },
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Parameters {
    GroundState(GroundStateParams),
    Sigma(SigmaParams),
    Feshbach(FeshbachParams),
    Variational(VariationalParams),
    Sweep(SweepParams),
    Stability(StabilityParams),
    Partition(PartitionParams),
    Combinatorics(CombinatoricsParams),
}

#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub parameters: Parameters,
    pub output_path: String,
}

fn position(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn typed<T: serde::de::DeserializeOwned>(v: toml::Value) -> Result<T, String> {
    T::deserialize(v).map_err(|e| e.message().to_string())
}

/// Checks values that serde cannot: grids, systems, sweeps.
fn validate(p: &Parameters) -> Result<(), String> {
    match p {
        Parameters::GroundState(q) => {
            q.grid.spec()?;
            q.system.config()?;
            if q.states == 0 {
                return Err("`states` must be at least 1".into());
            }
        }
        Parameters::Sigma(q) => {
            q.grid.spec()?;
            if let Some([a, b]) = &q.atoms {
                a.atom()?;
                b.atom()?;
            }
        }
        Parameters::Feshbach(q) => {
            q.grid.spec()?;
            q.system.config()?;
        }
        Parameters::Variational(q) => {
            q.grid.spec()?;
            q.system.config()?;
        }
        Parameters::Sweep(q) => {
            q.grid.spec()?;
            q.abscissae()?;
            q.template()?;
            if q.methods.is_empty() {
                return Err("`methods` is empty".into());
            }
        }
        Parameters::Stability(q) => {
            q.grid.spec()?;
            if q.ladders.is_empty() {
                return Err("`ladders` is empty".into());
            }
            for l in &q.ladders {
                l.atom.atom()?;
            }
        }
        Parameters::Partition(q) => {
            q.grid.spec()?;
            q.system.config()?;
        }
        Parameters::Combinatorics(_) => {}
    }
    Ok(())
}

pub fn parse_str(src: &str, path: &str) -> Result<Vec<Scenario>, ConfigError> {
    let raw: RawFile = toml::from_str(src).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| position(src, s.start));
        ConfigError::Parse { path: path.into(), line, column, message: e.message().to_string() }
    })?;
    let mut names = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(raw.scenario.len());
    for s in raw.scenario {
        let invalid = |message: String| ConfigError::Invalid { path: path.into(), scenario: s.name.clone(), message };
        if s.name.is_empty() || s.name.contains(['/', '\\']) {
            return Err(invalid("names must be non-empty and free of path separators".into()));
        }
        if !names.insert(s.name.clone()) {
            return Err(invalid("duplicate scenario name".into()));
        }
        let (value, span) = match s.parameters {
            Some(p) => {
                let span = p.span();
                (p.into_inner(), Some(span))
            }
            None => (toml::Value::Table(Default::default()), None),
        };
        let at = |message: String| match span {
            Some(sp) => {
                let (line, column) = position(src, sp.start);
                ConfigError::Parse {
                    path: path.into(),
                    line,
                    column,
                    message: format!("scenario `{}` parameters: {message}", s.name),
                }
            }
            None => invalid(message),
        };
        let parameters = match s.kind {
            Kind::GroundState => Parameters::GroundState(typed(value).map_err(at)?),
            Kind::Sigma => Parameters::Sigma(typed(value).map_err(at)?),
            Kind::Feshbach => Parameters::Feshbach(typed(value).map_err(at)?),
            Kind::Variational => Parameters::Variational(typed(value).map_err(at)?),
            Kind::Sweep => Parameters::Sweep(typed(value).map_err(at)?),
            Kind::Stability => Parameters::Stability(typed(value).map_err(at)?),
            Kind::Partition => Parameters::Partition(typed(value).map_err(at)?),
            Kind::Combinatorics => Parameters::Combinatorics(typed(value).map_err(at)?),
        };
        validate(&parameters).map_err(invalid)?;
        let ext = if s.kind == Kind::Sweep { "csv" } else { "json" };
        let output_path = s.output.clone().unwrap_or_else(|| format!("{}.{ext}", s.name));
        if Path::new(&output_path).is_absolute() || output_path.contains("..") {
            return Err(invalid(format!("output `{output_path}` must be a relative path inside the output directory")));
        }
        out.push(Scenario { name: s.name, kind: s.kind, parameters, output_path });
    }
    Ok(out)
}

pub fn parse_config(path: &Path) -> Result<(Vec<Scenario>, Vec<u8>), ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
    let src = String::from_utf8_lossy(&bytes);
    Ok((parse_str(&src, &path.display().to_string())?, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIGMA: &str = r#"
[[scenario]]
name = "drude-sigma"
kind = "sigma"
[scenario.parameters]
grid = { points = 64, half_width = 8.0 }
"#;

    #[test]
    fn minimal_sigma_scenario_gets_defaults() {
        let s = parse_str(SIGMA, "t.toml").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].output_path, "drude-sigma.json");
        let Parameters::Sigma(p) = &s[0].parameters else { panic!() };
        assert!(p.atoms.is_none() && p.directions.is_empty());
    }

    #[test]
    fn misspelled_key_is_named_with_its_position() {
        let src = SIGMA.replace("grid =", "sgima = 1\ngrid =");
        let e = parse_str(&src, "t.toml").unwrap_err().to_string();
        assert!(e.contains("sgima"), "{e}");
        assert!(e.starts_with("t.toml:"), "{e}");
        let top = SIGMA.replace("kind = \"sigma\"", "kind = \"sigma\"\nsgima = 2");
        let e = parse_str(&top, "t.toml").unwrap_err().to_string();
        assert!(e.contains("sgima") && e.contains("t.toml:5:"), "{e}");
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let e = parse_str(&SIGMA.replace("\"sigma\"", "\"sgima\""), "t.toml").unwrap_err().to_string();
        assert!(e.contains("sgima"), "{e}");
    }

    #[test]
    fn sweep_abscissae_must_increase() {
        let src = r#"
[[scenario]]
name = "s"
kind = "sweep"
[scenario.parameters]
abscissae = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]
grid = { points = 32, half_width = 6.0 }
"#;
        let s = parse_str(src, "t.toml").unwrap();
        assert_eq!(s[0].output_path, "s.csv");
        let bad = src.replace("0.35, 0.4", "0.4, 0.35");
        let e = parse_str(&bad, "t.toml").unwrap_err().to_string();
        assert!(e.contains("strictly increasing"), "{e}");
    }

    #[test]
    fn empty_file_has_no_scenarios() {
        assert!(parse_str("", "t.toml").unwrap().is_empty());
    }

    #[test]
    fn output_must_stay_inside_the_directory() {
        let src = SIGMA.replace("kind = \"sigma\"", "kind = \"sigma\"\noutput = \"../x.json\"");
        assert!(parse_str(&src, "t.toml").is_err());
    }
}
