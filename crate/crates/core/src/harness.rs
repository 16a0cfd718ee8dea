//! End-to-end emulation: synthetic sweeps, periodic band selection, ranging,
//! multilateration and EKF smoothing, followed by error statistics.
//!
//! Every `periodicity_p` sweeps the selector picks the active bands of each
//! transmitter. Between selections the receiver is positioned from the
//! active bands only. The KG selector learns a belief over a per-band reward
//! (see [`band_reward`]) from `budget_n` measurements per selection epoch and
//! keeps that belief across epochs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DVector, Matrix4, Vector4};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::belief::{
    prior_from_attributes, update_attribute, update_full, AttributeBelief, BasisSpec, BeliefState,
    FeatureMatrix,
};
use crate::error::{Error, Result};
use crate::kg::{kgcb_step, step_seed, BeliefView, PolicyConfig};
use crate::positioning::{
    distance_from_pl, ekf_predict, ekf_update, estimate_tx_positions, multilaterate, EkfConfig,
    EkfState, PathLossModel, Position2D,
};
use crate::spectrum::{
    band_position, feature_moments, format_float, generate_scenario, smooth_rss, Scenario,
    ScenarioConfig, SweepRecord,
};

/// Environment variable capping the number of runs executed in parallel.
pub const THREADS_ENV: &str = "KGBAND_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Knowledge-gradient learning of band quality.
    Kg,
    /// Uniformly random bands per transmitter.
    Random,
    /// Every band, no selection.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefForm {
    Attribute,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Linear,
    Nonlinear(BasisSpec),
}

/// Raw per-band features, each rescaled to `[-1, 1]` across bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Position of the band in the band plan.
    Freq,
    /// Mean smoothed RSS over the selection window.
    RssMean,
    /// Standard deviation of the raw RSS over the selection window.
    RssStd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfSettings {
    pub enabled: bool,
    pub accel_sigma: f64,
    pub measurement_variance: f64,
    pub initial_variance: f64,
}

impl Default for EkfSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            accel_sigma: crate::positioning::DEFAULT_ACCEL_SIGMA,
            measurement_variance: crate::positioning::DEFAULT_MEASUREMENT_VARIANCE,
            initial_variance: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenario: ScenarioConfig,
    pub policy: PolicyConfig,
    pub selector: Selector,
    pub belief_form: BeliefForm,
    pub model: ModelSpec,
    pub features: Vec<FeatureKind>,
    /// Diagonal of the prior weight covariance.
    pub prior_variance: f64,
    /// Observation noise variance of every band reward.
    pub lambda: f64,
    pub bands_per_tx: usize,
    /// Re-select bands every this many sweeps.
    pub periodicity_p: usize,
    pub runs_n: usize,
    pub smoothing_window: usize,
    pub ekf: EkfSettings,
    /// Sweeps with known receiver position used to locate the transmitters;
    /// 0 means the transmitter positions are known.
    pub tx_survey_sweeps: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn basis(&self) -> BasisSpec {
        match &self.model {
            ModelSpec::Linear => BasisSpec::linear(self.features.len()),
            ModelSpec::Nonlinear(basis) => basis.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let m = self.scenario.band_count();
        self.policy.validate(m)?;
        if self.periodicity_p == 0 || self.runs_n == 0 {
            return Err(Error::Config(
                "periodicity and runs must be at least 1".into(),
            ));
        }
        if self.features.is_empty() {
            return Err(Error::Config("at least one feature is required".into()));
        }
        if let ModelSpec::Nonlinear(basis) = &self.model {
            if basis.degrees().len() != self.features.len() {
                return Err(Error::Config(format!(
                    "{} basis degrees for {} features",
                    basis.degrees().len(),
                    self.features.len()
                )));
            }
        }
        if !(self.prior_variance >= 0.0 && self.prior_variance.is_finite()) {
            return Err(Error::Config("prior_variance must be non-negative".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        let smallest_group = self
            .scenario
            .band_to_tx
            .iter()
            .map(Vec::len)
            .min()
            .unwrap_or(0);
        if self.bands_per_tx == 0 || self.bands_per_tx > smallest_group {
            return Err(Error::Config(format!(
                "bands_per_tx must lie in 1..={smallest_group}"
            )));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::Config("smoothing_window must be odd".into()));
        }
        if self.tx_survey_sweeps == 1 || self.tx_survey_sweeps == 2 {
            return Err(Error::Config(
                "tx_survey_sweeps must be 0 or at least 3".into(),
            ));
        }
        if self.ekf.enabled {
            EkfConfig::constant_velocity(
                self.scenario.dt,
                self.ekf.accel_sigma,
                self.ekf.measurement_variance,
            )?;
            if !(self.ekf.initial_variance > 0.0) {
                return Err(Error::Config(
                    "ekf_initial_variance must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Scenario of run `run`, seeded with `base seed + run`.
    pub fn run_scenario(&self, run: usize) -> ScenarioConfig {
        let mut sc = self.scenario.clone();
        sc.seed = self.scenario.seed.wrapping_add(run as u64);
        sc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionEpoch {
    /// Sweep index at which the selection was made.
    pub step: usize,
    /// Active bands, ascending.
    pub bands: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub truth: Vec<Position2D>,
    pub est_trajectory: Vec<Position2D>,
    pub chosen_bands: Vec<SelectionEpoch>,
    pub error_x: Vec<f64>,
    pub error_y: Vec<f64>,
    /// Seconds spent in selection and positioning.
    pub wall_time: f64,
    /// Seconds spent in band selection alone.
    pub selection_time: f64,
}

/// Reward of observing band `band` at one sweep: the negated absolute log
/// ranging error, `-|ln(d_hat / d)|`. Higher is better.
pub fn band_reward(
    model: &PathLossModel,
    rss_dbm: f64,
    tx_power_dbm: f64,
    receiver: &Position2D,
    tx: &Position2D,
) -> f64 {
    let d_hat = distance_from_pl(model, tx_power_dbm - rss_dbm);
    let d = receiver.distance_to(tx).max(f64::MIN_POSITIVE);
    -(d_hat / d).ln().abs()
}

fn rescale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0)
        .collect()
}

/// Raw feature rows for every band from the sweeps of the current window.
pub fn band_features(
    kinds: &[FeatureKind],
    raw_window: &[SweepRecord],
    smoothed_window: &[SweepRecord],
) -> Vec<Vec<f64>> {
    let m = raw_window[0].rss.len();
    let columns: Vec<Vec<f64>> = kinds
        .iter()
        .map(|kind| match kind {
            FeatureKind::Freq => (0..m).map(|b| band_position(b, m)).collect(),
            FeatureKind::RssMean => {
                let n = smoothed_window.len() as f64;
                let means: Vec<f64> = (0..m)
                    .map(|b| smoothed_window.iter().map(|s| s.rss[b]).sum::<f64>() / n)
                    .collect();
                rescale(&means)
            }
            FeatureKind::RssStd => match feature_moments(raw_window) {
                Ok(moments) => rescale(
                    &moments
                        .variance
                        .iter()
                        .map(|v| v.sqrt())
                        .collect::<Vec<_>>(),
                ),
                Err(_) => vec![0.0; m],
            },
        })
        .collect();
    (0..m)
        .map(|b| columns.iter().map(|c| c[b]).collect())
        .collect()
}

enum LearnedBelief {
    Attribute(AttributeBelief),
    Full(BeliefState),
}

/// Per-band ranging with the active bands of each transmitter: the geometric
/// mean of their distance estimates.
fn ranges(cfg: &ScenarioConfig, active: &[Vec<usize>], sweep: &SweepRecord) -> Vec<f64> {
    active
        .iter()
        .map(|bands| {
            let log_sum: f64 = bands
                .iter()
                .map(|&b| distance_from_pl(&cfg.bands[b], cfg.tx_power_dbm - sweep.rss[b]).ln())
                .sum();
            (log_sum / bands.len() as f64).exp()
        })
        .collect()
}

fn locate_transmitters(
    cfg: &ScenarioConfig,
    truth: &[Position2D],
    smoothed: &[SweepRecord],
    survey: usize,
) -> Result<Vec<Position2D>> {
    if survey == 0 {
        return Ok(cfg.tx_positions.clone());
    }
    let survey = survey.min(truth.len());
    cfg.band_to_tx
        .iter()
        .map(|bands| {
            let d: Vec<f64> = smoothed[..survey]
                .iter()
                .map(|s| ranges(cfg, std::slice::from_ref(bands), s)[0])
                .collect();
            Ok(estimate_tx_positions(&truth[..survey], &d)?.position)
        })
        .collect()
}

struct Tracker {
    ekf: Option<(EkfConfig, f64)>,
    state: Option<EkfState>,
    previous_fix: Option<Position2D>,
}

impl Tracker {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let ekf = if cfg.ekf.enabled {
            Some((
                EkfConfig::constant_velocity(
                    cfg.scenario.dt,
                    cfg.ekf.accel_sigma,
                    cfg.ekf.measurement_variance,
                )?,
                cfg.ekf.initial_variance,
            ))
        } else {
            None
        };
        Ok(Self {
            ekf,
            state: None,
            previous_fix: None,
        })
    }

    /// Filters one multilateration fix. The filter starts at the first fix
    /// and takes its velocity from the first two fixes.
    fn step(&mut self, fix: Position2D) -> Result<Position2D> {
        let Some((ekf_cfg, p0)) = &self.ekf else {
            return Ok(fix);
        };
        let estimate = match (self.state, self.previous_fix) {
            (Some(state), _) => {
                let predicted = ekf_predict(&state, ekf_cfg);
                let updated = ekf_update(&predicted, fix, ekf_cfg)?;
                self.state = Some(updated);
                updated.position()
            }
            (None, Some(prev)) => {
                let dt = ekf_cfg.dt;
                let state =
                    Vector4::new(fix.x, fix.y, (fix.x - prev.x) / dt, (fix.y - prev.y) / dt);
                self.state = Some(EkfState::new(state, Matrix4::identity() * *p0)?);
                fix
            }
            (None, None) => fix,
        };
        self.previous_fix = Some(fix);
        Ok(estimate)
    }
}

fn top_bands_per_tx(groups: &[Vec<usize>], means: &DVector<f64>, per_tx: usize) -> Vec<Vec<usize>> {
    groups
        .iter()
        .map(|group| {
            let mut ranked = group.clone();
            ranked.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
            ranked.truncate(per_tx);
            ranked.sort_unstable();
            ranked
        })
        .collect()
}

/// Runs one emulation on an already generated scenario.
pub fn run_on_scenario(
    cfg: &ExperimentConfig,
    run: usize,
    scenario: &Scenario,
) -> Result<RunResult> {
    let annotate = |sweep: usize| {
        move |e: Error| Error::Run {
            run,
            sweep,
            source: Box::new(e),
        }
    };
    let sc = cfg.run_scenario(run);
    let seed = sc.seed;
    let m = sc.band_count();
    let sweeps = &scenario.sweeps;
    let truth = &scenario.truth;
    if sweeps.len() != truth.len() || sweeps.iter().any(|s| s.rss.len() != m) {
        return Err(annotate(0)(Error::Dimension(
            "sweeps do not match the scenario".into(),
        )));
    }

    let started = Instant::now();
    let smoothed = smooth_rss(sweeps, cfg.smoothing_window).map_err(annotate(0))?;
    let tx_known =
        locate_transmitters(&sc, truth, &smoothed, cfg.tx_survey_sweeps).map_err(annotate(0))?;
    let owners = sc.owners();
    let basis = cfg.basis();
    let lambda = DVector::from_element(m, cfg.lambda);
    let mut learned: Option<LearnedBelief> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(step_seed(seed, usize::MAX));
    let mut tracker = Tracker::new(cfg).map_err(annotate(0))?;

    let mut active: Vec<Vec<usize>> = sc.band_to_tx.clone();
    let mut chosen_bands = Vec::new();
    let mut est_trajectory = Vec::with_capacity(truth.len());
    let mut selection_time = 0.0;

    for k in 0..sweeps.len() {
        if k % cfg.periodicity_p == 0 {
            let selection_started = Instant::now();
            let epoch = k / cfg.periodicity_p;
            let width = cfg.periodicity_p.min(k + 1);
            let window = k + 1 - width..k + 1;
            active = match cfg.selector {
                Selector::All => sc.band_to_tx.clone(),
                Selector::Random => sc
                    .band_to_tx
                    .iter()
                    .map(|group| {
                        let mut picked: Vec<usize> =
                            sample(&mut rng, group.len(), cfg.bands_per_tx)
                                .into_iter()
                                .map(|i| group[i])
                                .collect();
                        picked.sort_unstable();
                        picked
                    })
                    .collect(),
                Selector::Kg => {
                    let raw = band_features(
                        &cfg.features,
                        &sweeps[window.clone()],
                        &smoothed[window.clone()],
                    );
                    let features =
                        FeatureMatrix::from_raw(&raw, basis.clone()).map_err(annotate(k))?;
                    let mut belief = match learned.take() {
                        Some(b) => b,
                        None => {
                            let prior =
                                AttributeBelief::diagonal_prior(basis.width(), cfg.prior_variance)
                                    .map_err(annotate(k))?;
                            match cfg.belief_form {
                                BeliefForm::Attribute => LearnedBelief::Attribute(prior),
                                // the full form keeps the projection of the first epoch's features
                                BeliefForm::Full => LearnedBelief::Full(
                                    prior_from_attributes(&prior, &features, lambda.clone())
                                        .map_err(annotate(k))?,
                                ),
                            }
                        }
                    };
                    let policy = PolicyConfig {
                        seed: step_seed(seed, epoch),
                        ..cfg.policy.clone()
                    };
                    for n in 0..cfg.policy.budget_n {
                        let view = match &belief {
                            LearnedBelief::Attribute(ab) => BeliefView::Attribute {
                                belief: ab,
                                features: &features,
                                lambda: &lambda,
                            },
                            LearnedBelief::Full(b) => BeliefView::Full(b),
                        };
                        let x = kgcb_step(view, &policy, n).map_err(annotate(k))?.chosen;
                        let t = rng.random_range(window.clone());
                        let tx = owners[x];
                        let y = band_reward(
                            &sc.bands[x],
                            smoothed[t].rss[x],
                            sc.tx_power_dbm,
                            &truth[t],
                            &tx_known[tx],
                        );
                        belief = match belief {
                            LearnedBelief::Attribute(ab) => LearnedBelief::Attribute(
                                update_attribute(&ab, &features.row(x), y, lambda[x])
                                    .map_err(annotate(k))?,
                            ),
                            LearnedBelief::Full(b) => {
                                LearnedBelief::Full(update_full(&b, x, y).map_err(annotate(k))?)
                            }
                        };
                    }
                    let means = match &belief {
                        LearnedBelief::Attribute(ab) => {
                            ab.predicted_means(&features).map_err(annotate(k))?
                        }
                        LearnedBelief::Full(b) => b.mu().clone(),
                    };
                    learned = Some(belief);
                    top_bands_per_tx(&sc.band_to_tx, &means, cfg.bands_per_tx)
                }
            };
            let mut flat: Vec<usize> = active.iter().flatten().copied().collect();
            flat.sort_unstable();
            chosen_bands.push(SelectionEpoch {
                step: k,
                bands: flat,
            });
            selection_time += selection_started.elapsed().as_secs_f64();
        }
        let d = ranges(&sc, &active, &smoothed[k]);
        let fix = multilaterate(&tx_known, &d).map_err(annotate(k))?;
        est_trajectory.push(tracker.step(fix).map_err(annotate(k))?);
    }
    let wall_time = started.elapsed().as_secs_f64();

    let error_x = truth
        .iter()
        .zip(&est_trajectory)
        .map(|(t, e)| (t.x - e.x).abs())
        .collect();
    let error_y = truth
        .iter()
        .zip(&est_trajectory)
        .map(|(t, e)| (t.y - e.y).abs())
        .collect();
    Ok(RunResult {
        run,
        seed,
        times: sweeps.iter().map(|s| s.t).collect(),
        truth: truth.clone(),
        est_trajectory,
        chosen_bands,
        error_x,
        error_y,
        wall_time,
        selection_time,
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer")))?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn generate_run(cfg: &ExperimentConfig, run: usize) -> Result<Scenario> {
    generate_scenario(&cfg.run_scenario(run)).map_err(|e| Error::Run {
        run,
        sweep: 0,
        source: Box::new(e),
    })
}

/// Runs `runs_n` independent emulations; run `k` uses seed `base + k`.
/// Results are ordered by run index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    thread_pool()?.install(|| {
        (0..cfg.runs_n)
            .into_par_iter()
            .map(|run| {
                let scenario = generate_run(cfg, run)?;
                run_on_scenario(cfg, run, &scenario)
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub x: CoordStats,
    pub y: CoordStats,
    pub mean_wall_time: f64,
    pub mean_selection_time: f64,
}

fn coord_stats(values: &mut [f64]) -> CoordStats {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let rmse = (values.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    CoordStats {
        min: values[0],
        median: values[(n - 1) / 2],
        max: values[n - 1],
        mean,
        rmse,
    }
}

/// Order statistics over the concatenated per-step errors of all runs.
/// Even counts use the lower median.
pub fn summarize(results: &[RunResult]) -> Result<SummaryStats> {
    let mut ex: Vec<f64> = results
        .iter()
        .flat_map(|r| r.error_x.iter().copied())
        .collect();
    let mut ey: Vec<f64> = results
        .iter()
        .flat_map(|r| r.error_y.iter().copied())
        .collect();
    if ex.is_empty() || ey.is_empty() {
        return Err(Error::InsufficientData("no errors to summarize".into()));
    }
    let n = results.len() as f64;
    Ok(SummaryStats {
        x: coord_stats(&mut ex),
        y: coord_stats(&mut ey),
        mean_wall_time: results.iter().map(|r| r.wall_time).sum::<f64>() / n,
        mean_selection_time: results.iter().map(|r| r.selection_time).sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub stats: SummaryStats,
}

/// Runs every configuration on the same generated sweeps (paired comparison).
pub fn compare_policies(cfgs: &[ExperimentConfig]) -> Result<Vec<ComparisonRow>> {
    let Some(first) = cfgs.first() else {
        return Err(Error::Config("no configurations to compare".into()));
    };
    for cfg in cfgs {
        cfg.validate()?;
        if cfg.scenario != first.scenario || cfg.runs_n != first.runs_n {
            return Err(Error::Config(format!(
                "configuration {:?} does not share the scenario and seed set of {:?}",
                cfg.name, first.name
            )));
        }
    }
    thread_pool()?.install(|| {
        let scenarios: Vec<Scenario> = (0..first.runs_n)
            .into_par_iter()
            .map(|run| generate_run(first, run))
            .collect::<Result<_>>()?;
        cfgs.iter()
            .map(|cfg| {
                let results: Vec<RunResult> = scenarios
                    .par_iter()
                    .enumerate()
                    .map(|(run, sc)| run_on_scenario(cfg, run, sc))
                    .collect::<Result<_>>()?;
                Ok(ComparisonRow {
                    name: cfg.name.clone(),
                    stats: summarize(&results)?,
                })
            })
            .collect()
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut out: BufWriter<File>, path: &Path) -> Result<()> {
    out.flush().map_err(|e| Error::io(path, e))
}

pub const RESULTS_HEADER: &str = "run,step,t,truth_x,est_x,truth_y,est_y,error_x,error_y";
pub const PLOT_HEADER: &str = "t,truth_x,est_x,truth_y,est_y";
pub const STATS_HEADER: &str =
    "policy,min_x,median_x,max_x,mean_x,rmse_x,min_y,median_y,max_y,mean_y,rmse_y";
pub const TIMING_HEADER: &str = "policy,mean_wall_time,mean_selection_time";
pub const SELECTIONS_HEADER: &str = "run,epoch,step,bands";

/// One row per time step and run.
pub fn write_results_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{RESULTS_HEADER}").map_err(io)?;
    for r in results {
        for k in 0..r.truth.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.run,
                k,
                format_float(r.times[k]),
                format_float(r.truth[k].x),
                format_float(r.est_trajectory[k].x),
                format_float(r.truth[k].y),
                format_float(r.est_trajectory[k].y),
                format_float(r.error_x[k]),
                format_float(r.error_y[k]),
            )
            .map_err(io)?;
        }
    }
    finish(out, path)
}

/// Plot-ready trajectory of a single run.
pub fn write_plot_csv(path: &Path, result: &RunResult) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{PLOT_HEADER}").map_err(io)?;
    for k in 0..result.truth.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_float(result.times[k]),
            format_float(result.truth[k].x),
            format_float(result.est_trajectory[k].x),
            format_float(result.truth[k].y),
            format_float(result.est_trajectory[k].y),
        )
        .map_err(io)?;
    }
    finish(out, path)
}

/// Active bands per selection epoch, `;`-separated.
pub fn write_selections_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{SELECTIONS_HEADER}").map_err(io)?;
    for r in results {
        for (epoch, sel) in r.chosen_bands.iter().enumerate() {
            let bands: Vec<String> = sel.bands.iter().map(usize::to_string).collect();
            writeln!(out, "{},{},{},{}", r.run, epoch, sel.step, bands.join(";")).map_err(io)?;
        }
    }
    finish(out, path)
}

/// Error statistics, one row per policy. Timing lives in a separate file so
/// that this one is reproducible byte for byte.
pub fn write_stats_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{STATS_HEADER}").map_err(io)?;
    for row in rows {
        let mut line = row.name.clone();
        for c in [&row.stats.x, &row.stats.y] {
            for v in [c.min, c.median, c.max, c.mean, c.rmse] {
                line.push(',');
                line.push_str(&format_float(v));
            }
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    finish(out, path)
}

pub fn write_timing_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{TIMING_HEADER}").map_err(io)?;
    for row in rows {
        writeln!(
            out,
            "{},{},{}",
            row.name,
            format_float(row.stats.mean_wall_time),
            format_float(row.stats.mean_selection_time)
        )
        .map_err(io)?;
    }
    finish(out, path)
}

/// Reads back a file written by [`write_stats_csv`]; timing fields are zero.
pub fn read_stats_csv(path: &Path) -> Result<Vec<ComparisonRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 {
            if line != STATS_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: "unexpected stats header".into(),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse_error = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        if fields.len() != 11 {
            return Err(parse_error(format!(
                "expected 11 columns, found {}",
                fields.len()
            )));
        }
        let v = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_error(format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let coord = |o: usize| CoordStats {
            min: v[o],
            median: v[o + 1],
            max: v[o + 2],
            mean: v[o + 3],
            rmse: v[o + 4],
        };
        rows.push(ComparisonRow {
            name: fields[0].to_string(),
            stats: SummaryStats {
                x: coord(0),
                y: coord(5),
                mean_wall_time: 0.0,
                mean_selection_time: 0.0,
            },
        });
    }
    Ok(rows)
}

/// Number of covariance entries the configured belief keeps for `m` bands.
pub fn covariance_footprint(form: BeliefForm, m: usize, width: usize) -> usize {
    match form {
        BeliefForm::Full => m * m,
        BeliefForm::Attribute => width * width + m * width,
    }
}
