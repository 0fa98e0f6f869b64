//! Run configuration files.

use crate::error::CliError;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use spinldp_core::chain::file::load_interaction;
use spinldp_core::chain::Interaction;
use spinldp_core::kernel::operator::check_cap;
use spinldp_core::states::file::{load_triple, load_triple_spec};
use spinldp_core::states::FcsTriple;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Log moment generating function on the alpha grid.
    Mgf,
    /// Moment generating function and its Legendre transform.
    Rate,
    /// Spectral distributions of the energy density for each volume.
    Measure,
    /// Finite-volume large deviation bounds on the configured intervals.
    LdpCheck,
    /// Microcanonical against canonical entropy densities.
    Ensembles,
    /// Consistency, spectrum and primitivity of a triple.
    FcsValidate,
    /// Randomised checks of the expansional backends and identities.
    ExpansionalValidate,
    /// Leading eigenpair and convergence diagnostics of a transfer operator.
    TransferDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Gibbs state of an interaction file at inverse temperature `beta`.
    Gibbs { interaction: PathBuf, beta: f64 },
    /// Finitely correlated state from a triple file.
    Fcs { triple: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub interaction: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Direct,
    Increments,
    Transfer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_steps: usize,
    /// Volumes, increasing.
    pub n: Vec<usize>,
    /// Transfer operator window `M`.
    pub window: usize,
    /// Expansional margin `N`.
    pub margin: usize,
    pub mode: Mode,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            alpha_min: -4.0,
            alpha_max: 4.0,
            alpha_steps: 21,
            n: vec![8],
            window: 6,
            margin: 4,
            mode: Mode::Increments,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Bound on `|f(0)|`.
    pub normalization: f64,
    /// Slack on negative second differences of `f`.
    pub convexity: f64,
    /// Bound on `|Σ w - 1|` for spectral measures.
    pub mass: f64,
    /// Bound on the triple consistency violations.
    pub triple: f64,
    /// Bound on closed form against series residuals.
    pub series: f64,
    /// Bound on expansional identity residuals.
    pub identity: f64,
    /// Power iteration residual target.
    pub power: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            normalization: 1e-10,
            convexity: 1e-6,
            mass: 1e-10,
            triple: 1e-12,
            series: 1e-10,
            identity: 1e-9,
            power: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LdpCheckSpec {
    /// Closed intervals `[lo, hi]`.
    pub intervals: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EnsemblesSpec {
    /// Interaction files, one per observable.
    pub observables: Vec<PathBuf>,
    pub lambdas: Vec<f64>,
    pub x: Vec<f64>,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionalSpec {
    pub samples: usize,
    pub terms: usize,
    /// Sites of the random operators; each has dimension `site_dim`.
    pub sites: usize,
    pub site_dim: usize,
}

impl Default for ExpansionalSpec {
    fn default() -> Self {
        ExpansionalSpec { samples: 50, terms: 20, sites: 2, site_dim: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSpec {
    pub alpha: f64,
    pub probes: usize,
    pub steps: usize,
    /// First step used in the decay fit.
    pub fit_from: usize,
}

impl Default for TransferSpec {
    fn default() -> Self {
        TransferSpec { alpha: 0.5, probes: 3, steps: 12, fit_from: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FcsValidateSpec {
    /// Random positive inputs for the sandwich test.
    pub cone_samples: usize,
}

impl Default for FcsValidateSpec {
    fn default() -> Self {
        FcsValidateSpec { cone_samples: 100 }
    }
}

/// One experiment. Relative paths are resolved against the directory of the
/// configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    /// Seed for every randomised check.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ldp_check: Option<LdpCheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensembles: Option<EnsemblesSpec>,
    #[serde(default)]
    pub expansional: ExpansionalSpec,
    #[serde(default)]
    pub transfer: TransferSpec,
    #[serde(default)]
    pub fcs_validate: FcsValidateSpec,
    /// Written into manifests; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library_version: Option<String>,
}

/// Chain state with its source files loaded.
pub enum LoadedState {
    Gibbs { psi: Interaction, beta: f64 },
    Fcs(FcsTriple),
    /// A triple that failed validation; only `fcs-validate` accepts it.
    UncheckedFcs(FcsTriple),
}

impl LoadedState {
    pub fn site_dim(&self) -> usize {
        match self {
            LoadedState::Gibbs { psi, .. } => psi.site_dim(),
            LoadedState::Fcs(t) | LoadedState::UncheckedFcs(t) => t.site_dim(),
        }
    }

    pub fn bond_dim(&self) -> usize {
        match self {
            LoadedState::Gibbs { .. } => 1,
            LoadedState::Fcs(t) | LoadedState::UncheckedFcs(t) => t.bond_dim(),
        }
    }
}

/// A validated configuration with its inputs loaded.
pub struct Loaded {
    pub config: RunConfig,
    pub state: Option<LoadedState>,
    pub observable: Option<Interaction>,
    pub ensemble_observables: Vec<Interaction>,
}

/// Line of the first occurrence of `needle` at the start of a line, 1-based.
fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.lines().position(|l| l.trim_start().starts_with(needle)).map(|i| i + 1)
}

struct Ctx<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let loc = match line_of(self.text, key) {
            Some(l) => format!("{}:{l}", self.path.display()),
            None => self.path.display().to_string(),
        };
        CliError::Validation(format!("{loc}: {msg}"))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    joined.canonicalize().unwrap_or(joined)
}

fn core_err(ctx: &Ctx<'_>, key: &str, file: &Path, e: spinldp_core::Error) -> CliError {
    match e {
        spinldp_core::Error::DimensionCap { .. } => CliError::Cap(format!("{}: {e}", file.display())),
        _ => ctx.err(key, format!("{}: {e}", file.display())),
    }
}

fn require_file(ctx: &Ctx<'_>, key: &str, p: &Path) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(ctx.err(key, format!("file {} does not exist", p.display())))
    }
}

fn cap(what: &str, d: usize, sites: usize, extra: usize) -> Result<(), CliError> {
    check_cap(what, d, sites, extra).map(|_| ()).map_err(|e| CliError::Cap(e.to_string()))
}

/// Reads, resolves and validates a configuration file, loading every file it
/// references and checking dimension caps before any heavy work.
pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: cannot read: {e}", path.display())))?;
    let mut config: RunConfig = toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].lines().count().max(1));
        let loc = line.map_or(path.display().to_string(), |l| format!("{}:{l}", path.display()));
        CliError::Validation(format!("{loc}: {}", e.message()))
    })?;
    let ctx = Ctx { path, text: &text };
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };

    config.library_version = None;
    config.output_dir = resolve(&base, &config.output_dir);
    if let Some(s) = &mut config.state {
        match s {
            StateSpec::Gibbs { interaction, .. } => *interaction = resolve(&base, interaction),
            StateSpec::Fcs { triple } => *triple = resolve(&base, triple),
        }
    }
    if let Some(o) = &mut config.observable {
        o.interaction = resolve(&base, &o.interaction);
    }
    if let Some(e) = &mut config.ensembles {
        for p in &mut e.observables {
            *p = resolve(&base, p);
        }
    }
    validate_numbers(&ctx, &config)?;

    let exp = config.experiment;
    let needs_state = !matches!(exp, Experiment::ExpansionalValidate | Experiment::Ensembles);
    let needs_observable = matches!(
        exp,
        Experiment::Mgf | Experiment::Rate | Experiment::Measure | Experiment::LdpCheck | Experiment::TransferDiagnostics
    );
    let state = match (&config.state, needs_state) {
        (None, true) => return Err(ctx.err("experiment", "this experiment needs a [state] section")),
        (Some(s), true) => Some(load_state(&ctx, s, exp)?),
        _ => None,
    };
    if exp == Experiment::FcsValidate && !matches!(config.state, Some(StateSpec::Fcs { .. })) {
        return Err(ctx.err("kind", "fcs-validate needs a state of kind \"fcs\""));
    }
    let observable = match (&config.observable, needs_observable) {
        (None, true) => return Err(ctx.err("experiment", "this experiment needs an [observable] section")),
        (Some(o), true) => {
            require_file(&ctx, "interaction", &o.interaction)?;
            Some(load_interaction(&o.interaction).map_err(|e| core_err(&ctx, "interaction", &o.interaction, e))?)
        }
        _ => None,
    };
    if let (Some(s), Some(o)) = (&state, &observable) {
        if s.site_dim() != o.site_dim() {
            return Err(ctx.err("[observable]", "state and observable have different site dimensions"));
        }
    }
    let mut ensemble_observables = Vec::new();
    if exp == Experiment::Ensembles {
        let spec = config
            .ensembles
            .as_ref()
            .ok_or_else(|| ctx.err("experiment", "this experiment needs an [ensembles] section"))?;
        for p in &spec.observables {
            require_file(&ctx, "observables", p)?;
            ensemble_observables.push(load_interaction(p).map_err(|e| core_err(&ctx, "observables", p, e))?);
        }
    }
    if exp == Experiment::LdpCheck && config.ldp_check.is_none() {
        return Err(ctx.err("experiment", "this experiment needs an [ldp_check] section"));
    }
    let loaded = Loaded { config, state, observable, ensemble_observables };
    check_caps(&loaded)?;
    Ok(loaded)
}

fn load_state(ctx: &Ctx<'_>, s: &StateSpec, exp: Experiment) -> Result<LoadedState, CliError> {
    match s {
        StateSpec::Gibbs { interaction, beta } => {
            require_file(ctx, "interaction", interaction)?;
            let psi = load_interaction(interaction).map_err(|e| core_err(ctx, "interaction", interaction, e))?;
            Ok(LoadedState::Gibbs { psi, beta: *beta })
        }
        StateSpec::Fcs { triple } => {
            require_file(ctx, "triple", triple)?;
            if exp == Experiment::FcsValidate {
                let spec = load_triple_spec(triple).map_err(|e| core_err(ctx, "triple", triple, e))?;
                let t = spec.build_unchecked().map_err(|e| core_err(ctx, "triple", triple, e))?;
                Ok(LoadedState::UncheckedFcs(t))
            } else {
                Ok(LoadedState::Fcs(load_triple(triple).map_err(|e| core_err(ctx, "triple", triple, e))?))
            }
        }
    }
}

fn validate_numbers(ctx: &Ctx<'_>, c: &RunConfig) -> Result<(), CliError> {
    let g = &c.grid;
    if g.alpha_steps == 0 {
        return Err(ctx.err("alpha_steps", "alpha_steps must be positive"));
    }
    if !(g.alpha_min.is_finite() && g.alpha_max.is_finite()) || g.alpha_max < g.alpha_min {
        return Err(ctx.err("alpha_min", "alpha range must be finite with alpha_min <= alpha_max"));
    }
    if g.alpha_steps > 1 && g.alpha_max == g.alpha_min {
        return Err(ctx.err("alpha_steps", "several alpha steps need alpha_min < alpha_max"));
    }
    if g.n.is_empty() || g.n.contains(&0) {
        return Err(ctx.err("n", "volume list must be nonempty and positive"));
    }
    if g.n.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ctx.err("n", "volumes must be strictly increasing"));
    }
    if g.window == 0 {
        return Err(ctx.err("window", "window must be positive"));
    }
    let t = &c.tolerances;
    for (name, v) in [
        ("normalization", t.normalization),
        ("convexity", t.convexity),
        ("mass", t.mass),
        ("triple", t.triple),
        ("series", t.series),
        ("identity", t.identity),
        ("power", t.power),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ctx.err(name, format!("tolerance {name} must be positive")));
        }
    }
    if let Some(StateSpec::Gibbs { beta, .. }) = &c.state {
        if !beta.is_finite() {
            return Err(ctx.err("beta", "beta must be finite"));
        }
    }
    if let Some(l) = &c.ldp_check {
        if l.intervals.is_empty() {
            return Err(ctx.err("intervals", "interval list is empty"));
        }
        if l.intervals.iter().any(|[a, b]| !(a <= b)) {
            return Err(ctx.err("intervals", "intervals must satisfy lo <= hi"));
        }
    }
    if let Some(e) = &c.ensembles {
        if e.observables.is_empty() || e.observables.len() != e.lambdas.len() || e.lambdas.len() != e.x.len() {
            return Err(ctx.err("observables", "observables, lambdas and x must have equal nonzero length"));
        }
        if !(e.delta > 0.0) {
            return Err(ctx.err("delta", "delta must be positive"));
        }
    }
    let x = &c.expansional;
    if x.samples == 0 || x.sites == 0 || x.site_dim == 0 {
        return Err(ctx.err("samples", "expansional samples, sites and site_dim must be positive"));
    }
    let tr = &c.transfer;
    if tr.steps == 0 || tr.fit_from > tr.steps {
        return Err(ctx.err("steps", "transfer steps must be positive and at least fit_from"));
    }
    if !tr.alpha.is_finite() {
        return Err(ctx.err("alpha", "transfer alpha must be finite"));
    }
    Ok(())
}

fn check_caps(l: &Loaded) -> Result<(), CliError> {
    let c = &l.config;
    let n_max = *c.grid.n.last().unwrap();
    let uses_transfer = matches!(c.experiment, Experiment::Mgf | Experiment::Rate) && c.grid.mode == Mode::Transfer
        || c.experiment == Experiment::TransferDiagnostics;
    if let Some(s) = &l.state {
        let (d, b) = (s.site_dim(), s.bond_dim());
        match c.experiment {
            Experiment::Mgf | Experiment::Rate | Experiment::Measure | Experiment::LdpCheck => {
                if !uses_transfer || c.experiment == Experiment::LdpCheck {
                    cap("volume", d, n_max, b)?;
                }
            }
            Experiment::FcsValidate => cap("bond space", b, 2, 1)?,
            _ => {}
        }
        if uses_transfer {
            cap("transfer window", d, c.grid.window, b)?;
        }
    }
    if let Some(o) = l.ensemble_observables.first() {
        cap("ensemble volume", o.site_dim(), n_max, 1)?;
    }
    if c.experiment == Experiment::ExpansionalValidate {
        cap("expansional window", c.expansional.site_dim, c.expansional.sites, c.expansional.terms + 1)?;
    }
    Ok(())
}

/// Serialised configuration with resolved paths, as written to manifests.
pub fn manifest_text(c: &RunConfig) -> Result<String, CliError> {
    let mut m = c.clone();
    m.library_version = Some(spinldp_core::VERSION.to_string());
    toml::to_string(&m).map_err(|e| CliError::Io(format!("cannot serialise manifest: {e}")))
}
