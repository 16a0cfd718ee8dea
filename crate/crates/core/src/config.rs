//! Experiment configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. Positions are
//! written `x:y` and separated by `;`, other lists by `,`. Keys not present
//! keep the values of [`default_experiment`].
//!
//! ```text
//! name = kg-nonlinear
//! seed = 7
//! bands = 240
//! tx_positions = 0:0; 200:0; 200:200; 0:200
//! model = nonlinear
//! basis_degrees = 1,2,3,4,5,6
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::belief::BasisSpec;
use crate::error::{Error, Result};
use crate::harness::{BeliefForm, EkfSettings, ExperimentConfig, FeatureKind, ModelSpec, Selector};
use crate::kg::{PolicyConfig, PolicyMode};
use crate::positioning::Position2D;
use crate::spectrum::{
    cluster_bands, BandPlan, ScenarioConfig, ShadowProfile, DEFAULT_SMOOTHING_WINDOW,
    DEFAULT_TX_POWER_DBM,
};

pub const DEFAULT_BANDS: usize = 240;

const KEYS: &[&str] = &[
    "name",
    "seed",
    "runs",
    "periodicity",
    "output_dir",
    "bands",
    "tx_positions",
    "waypoints",
    "speed",
    "dt",
    "fc_start_mhz",
    "fc_step_mhz",
    "path_loss_exponent",
    "reference_distance",
    "shadow_sigma",
    "shadow_profile",
    "shadow_spread",
    "tx_power_dbm",
    "selector",
    "mode",
    "budget_n",
    "subset_k",
    "mc_samples",
    "belief",
    "model",
    "features",
    "basis_degrees",
    "prior_variance",
    "lambda",
    "bands_per_tx",
    "smoothing_window",
    "ekf",
    "ekf_accel_sigma",
    "ekf_measurement_variance",
    "ekf_initial_variance",
    "tx_survey_sweeps",
];

pub fn default_tx_positions() -> Vec<Position2D> {
    vec![
        Position2D::new(0.0, 0.0),
        Position2D::new(200.0, 0.0),
        Position2D::new(200.0, 200.0),
        Position2D::new(0.0, 200.0),
    ]
}

pub fn default_waypoints() -> Vec<Position2D> {
    vec![
        Position2D::new(40.0, 40.0),
        Position2D::new(160.0, 50.0),
        Position2D::new(150.0, 160.0),
        Position2D::new(50.0, 150.0),
        Position2D::new(40.0, 40.0),
    ]
}

/// Scenario with `bands` bands split evenly over `tx_positions`.
#[allow(clippy::too_many_arguments)]
pub fn build_scenario(
    plan: &BandPlan,
    bands: usize,
    tx_positions: Vec<Position2D>,
    waypoints: Vec<Position2D>,
    speed: f64,
    dt: f64,
    tx_power_dbm: f64,
    seed: u64,
) -> Result<ScenarioConfig> {
    Ok(ScenarioConfig {
        band_to_tx: cluster_bands(bands, tx_positions.len())?,
        bands: plan.models(bands)?,
        tx_positions,
        waypoints,
        speed,
        dt,
        tx_power_dbm,
        seed,
    })
}

pub fn default_experiment() -> ExperimentConfig {
    let scenario = build_scenario(
        &BandPlan::default(),
        DEFAULT_BANDS,
        default_tx_positions(),
        default_waypoints(),
        1.5,
        1.0,
        DEFAULT_TX_POWER_DBM,
        0,
    )
    .expect("default scenario is valid");
    let basis = BasisSpec::default_nonlinear();
    ExperimentConfig {
        name: "kg".into(),
        scenario,
        policy: PolicyConfig::default(),
        selector: Selector::Kg,
        belief_form: BeliefForm::Attribute,
        features: vec![FeatureKind::Freq; basis.degrees().len()],
        model: ModelSpec::Nonlinear(basis),
        prior_variance: 1.0,
        lambda: 0.2,
        bands_per_tx: 3,
        periodicity_p: 10,
        runs_n: 10,
        smoothing_window: DEFAULT_SMOOTHING_WINDOW,
        ekf: EkfSettings::default(),
        tx_survey_sweeps: 0,
        output_dir: PathBuf::from("out"),
    }
}

fn line_error(line: usize, message: String) -> Error {
    Error::Config(format!("line {line}: {message}"))
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(line_error(
                    line,
                    format!("expected `key = value`, found {content:?}"),
                ));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(line_error(line, format!("unknown key {key:?}")));
            }
            if map
                .insert(key.to_string(), (line, value.trim().to_string()))
                .is_some()
            {
                return Err(line_error(line, format!("duplicate key {key:?}")));
            }
        }
        Ok(Self { map })
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(line, v)| (*line, v.as_str()))
    }

    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, value)) => parse(value)
                .map(Some)
                .ok_or_else(|| line_error(line, format!("invalid value {value:?} for {key:?}"))),
        }
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key, |v| v.parse().ok())
    }
}

fn parse_positions(value: &str) -> Option<Vec<Position2D>> {
    value
        .split(';')
        .map(|p| {
            let (x, y) = p.split_once(':')?;
            Some(Position2D::new(
                x.trim().parse().ok()?,
                y.trim().parse().ok()?,
            ))
        })
        .collect()
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Option<Vec<T>> {
    value.split(',').map(|v| v.trim().parse().ok()).collect()
}

fn parse_feature(value: &str) -> Option<FeatureKind> {
    match value.trim() {
        "freq" => Some(FeatureKind::Freq),
        "rss_mean" => Some(FeatureKind::RssMean),
        "rss_std" => Some(FeatureKind::RssStd),
        _ => None,
    }
}

fn parse_switch(value: &str) -> Option<bool> {
    match value {
        "on" | "true" => Some(true),
        "off" | "false" => Some(false),
        _ => None,
    }
}

/// Parses a configuration text on top of [`default_experiment`].
///
/// With a nonlinear model and a single feature, the feature is repeated once
/// per basis degree, which turns it into a polynomial in that feature.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let e = Entries::parse(text)?;
    let mut cfg = default_experiment();

    if let Some(name) = e.raw("name") {
        cfg.name = name.1.to_string();
    }
    if let Some(v) = e.num("runs")? {
        cfg.runs_n = v;
    }
    if let Some(v) = e.num("periodicity")? {
        cfg.periodicity_p = v;
    }
    if let Some(v) = e.raw("output_dir") {
        cfg.output_dir = PathBuf::from(v.1);
    }

    let mut plan = BandPlan::default();
    let defaults = &cfg.scenario;
    let bands = e.num("bands")?.unwrap_or(defaults.band_count());
    if let Some(v) = e.num("fc_start_mhz")? {
        plan.fc_start_mhz = v;
    }
    if let Some(v) = e.num("fc_step_mhz")? {
        plan.fc_step_mhz = v;
    }
    if let Some(v) = e.num("path_loss_exponent")? {
        plan.n_pl = v;
    }
    if let Some(v) = e.num("reference_distance")? {
        plan.d0 = v;
    }
    if let Some(v) = e.num("shadow_sigma")? {
        plan.shadow_sigma = v;
    }
    let spread: f64 = e.num("shadow_spread")?.unwrap_or(0.0);
    plan.profile = match e.raw("shadow_profile").map(|v| v.1) {
        None | Some("flat") => ShadowProfile::Flat,
        Some("quadratic") => ShadowProfile::Quadratic { spread },
        Some(other) => {
            return Err(Error::Config(format!("unknown shadow_profile {other:?}")));
        }
    };
    cfg.scenario = build_scenario(
        &plan,
        bands,
        e.get("tx_positions", parse_positions)?
            .unwrap_or_else(default_tx_positions),
        e.get("waypoints", parse_positions)?
            .unwrap_or_else(default_waypoints),
        e.num("speed")?.unwrap_or(defaults.speed),
        e.num("dt")?.unwrap_or(defaults.dt),
        e.num("tx_power_dbm")?.unwrap_or(defaults.tx_power_dbm),
        e.num("seed")?.unwrap_or(defaults.seed),
    )?;

    cfg.selector = match e.raw("selector").map(|v| v.1) {
        None | Some("kg") => Selector::Kg,
        Some("random") => Selector::Random,
        Some("all") => Selector::All,
        Some(other) => return Err(Error::Config(format!("unknown selector {other:?}"))),
    };
    cfg.policy.mode = match e.raw("mode").map(|v| v.1) {
        None | Some("offline") => PolicyMode::Offline,
        Some("online") => PolicyMode::Online,
        Some(other) => return Err(Error::Config(format!("unknown mode {other:?}"))),
    };
    if let Some(v) = e.num("budget_n")? {
        cfg.policy.budget_n = v;
    }
    if let Some(v) = e.get("subset_k", |v| match v {
        "none" => Some(None),
        _ => v.parse().ok().map(Some),
    })? {
        cfg.policy.subset_k = v;
    }
    if let Some(v) = e.num("mc_samples")? {
        cfg.policy.mc_samples = v;
    }
    cfg.policy.seed = cfg.scenario.seed;

    cfg.belief_form = match e.raw("belief").map(|v| v.1) {
        None | Some("attribute") => BeliefForm::Attribute,
        Some("full") => BeliefForm::Full,
        Some(other) => return Err(Error::Config(format!("unknown belief {other:?}"))),
    };
    let mut features = match e.get("features", |v| v.split(',').map(parse_feature).collect())? {
        Some(f) => f,
        None => vec![FeatureKind::Freq],
    };
    cfg.model = match e.raw("model").map(|v| v.1) {
        Some("linear") => ModelSpec::Linear,
        None | Some("nonlinear") => {
            let degrees = match e.get("basis_degrees", parse_list::<u32>)? {
                Some(d) => d,
                None => BasisSpec::default_nonlinear().degrees().to_vec(),
            };
            if features.len() == 1 {
                features = vec![features[0]; degrees.len()];
            }
            ModelSpec::Nonlinear(BasisSpec::new(degrees)?)
        }
        Some(other) => return Err(Error::Config(format!("unknown model {other:?}"))),
    };
    cfg.features = features;
    if let Some(v) = e.num("prior_variance")? {
        cfg.prior_variance = v;
    }
    if let Some(v) = e.num("lambda")? {
        cfg.lambda = v;
    }
    if let Some(v) = e.num("bands_per_tx")? {
        cfg.bands_per_tx = v;
    }
    if let Some(v) = e.num("smoothing_window")? {
        cfg.smoothing_window = v;
    }
    if let Some(v) = e.get("ekf", parse_switch)? {
        cfg.ekf.enabled = v;
    }
    if let Some(v) = e.num("ekf_accel_sigma")? {
        cfg.ekf.accel_sigma = v;
    }
    if let Some(v) = e.num("ekf_measurement_variance")? {
        cfg.ekf.measurement_variance = v;
    }
    if let Some(v) = e.num("ekf_initial_variance")? {
        cfg.ekf.initial_variance = v;
    }
    if let Some(v) = e.num("tx_survey_sweeps")? {
        cfg.tx_survey_sweeps = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
