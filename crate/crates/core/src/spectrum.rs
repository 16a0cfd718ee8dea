//! Synthetic spectrum sweeps along a ground-truth path, their smoothing and
//! moments, the grouping of bands into virtual transmitters, and the sweep
//! file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::positioning::{pl_from_distance, PathLossModel, Position2D};

pub const DEFAULT_TX_POWER_DBM: f64 = 30.0;
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

/// One spectrum sweep: a timestamp and one RSS value (dBm) per band.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub t: f64,
    pub rss: Vec<f64>,
}

/// How the shadowing deviation varies across the band plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShadowProfile {
    /// Every band uses the base deviation.
    Flat,
    /// `sigma_m = base * (1 + spread * u_m^2)` with `u_m` the band position in `[-1, 1]`.
    Quadratic { spread: f64 },
}

/// Evenly spaced carriers sharing one propagation environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPlan {
    pub fc_start_mhz: f64,
    pub fc_step_mhz: f64,
    pub n_pl: f64,
    pub d0: f64,
    pub shadow_sigma: f64,
    pub profile: ShadowProfile,
}

impl Default for BandPlan {
    fn default() -> Self {
        Self {
            fc_start_mhz: 470.0,
            fc_step_mhz: 1.0,
            n_pl: 3.0,
            d0: 1.0,
            shadow_sigma: 2.0,
            profile: ShadowProfile::Flat,
        }
    }
}

/// Position of band `m` of `count` on `[-1, 1]`; a single band sits at 0.
pub fn band_position(m: usize, count: usize) -> f64 {
    if count <= 1 {
        0.0
    } else {
        2.0 * m as f64 / (count - 1) as f64 - 1.0
    }
}

impl BandPlan {
    pub fn models(&self, count: usize) -> Result<Vec<PathLossModel>> {
        (0..count)
            .map(|m| {
                let fc = self.fc_start_mhz + self.fc_step_mhz * m as f64;
                let sigma = match self.profile {
                    ShadowProfile::Flat => self.shadow_sigma,
                    ShadowProfile::Quadratic { spread } => {
                        let u = band_position(m, count);
                        self.shadow_sigma * (1.0 + spread * u * u)
                    }
                };
                PathLossModel::new(fc, self.d0, self.n_pl, sigma)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub waypoints: Vec<Position2D>,
    /// Receiver speed in m/s.
    pub speed: f64,
    /// Seconds per sweep.
    pub dt: f64,
    pub tx_positions: Vec<Position2D>,
    /// Bands owned by each transmitter.
    pub band_to_tx: Vec<Vec<usize>>,
    /// Propagation model per band; its `shadow_sigma` drives the shadowing draws.
    pub bands: Vec<PathLossModel>,
    pub tx_power_dbm: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    /// Owning transmitter of every band.
    pub fn owners(&self) -> Vec<usize> {
        let mut owner = vec![0; self.bands.len()];
        for (tx, group) in self.band_to_tx.iter().enumerate() {
            for &b in group {
                owner[b] = tx;
            }
        }
        owner
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.bands.len();
        if m == 0 {
            return Err(Error::Config("scenario needs at least one band".into()));
        }
        if self.tx_positions.len() < 4 {
            return Err(Error::Config(format!(
                "scenario needs at least 4 transmitters, got {}",
                self.tx_positions.len()
            )));
        }
        if self.band_to_tx.len() != self.tx_positions.len() {
            return Err(Error::Config(format!(
                "{} band groups for {} transmitters",
                self.band_to_tx.len(),
                self.tx_positions.len()
            )));
        }
        let mut seen = vec![false; m];
        for group in &self.band_to_tx {
            if group.is_empty() {
                return Err(Error::Config(
                    "every transmitter needs at least one band".into(),
                ));
            }
            for &b in group {
                if b >= m || seen[b] {
                    return Err(Error::Config(format!(
                        "band {b} is out of range or assigned twice"
                    )));
                }
                seen[b] = true;
            }
        }
        if let Some(b) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("band {b} has no transmitter")));
        }
        if self.waypoints.is_empty() {
            return Err(Error::Config("scenario needs at least one waypoint".into()));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) || !(self.dt > 0.0 && self.dt.is_finite())
        {
            return Err(Error::Config("speed and dt must be positive".into()));
        }
        let points = self.waypoints.iter().chain(&self.tx_positions);
        if !points.clone().all(Position2D::is_finite) || !self.tx_power_dbm.is_finite() {
            return Err(Error::Config("scenario coordinates must be finite".into()));
        }
        Ok(())
    }
}

/// Ground truth and the sweeps recorded along it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub truth: Vec<Position2D>,
    pub sweeps: Vec<SweepRecord>,
}

/// Positions every `spacing` meters of arc length along the polyline,
/// starting at the first waypoint.
pub fn sample_path(waypoints: &[Position2D], spacing: f64) -> Vec<Position2D> {
    let Some(&start) = waypoints.first() else {
        return Vec::new();
    };
    let lengths: Vec<f64> = waypoints
        .windows(2)
        .map(|w| w[0].distance_to(&w[1]))
        .collect();
    let total: f64 = lengths.iter().sum();
    let steps = ((total / spacing) * (1.0 + 1e-12)).floor() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    let mut segment = 0;
    let mut segment_start = 0.0;
    for k in 1..=steps {
        let s = (k as f64 * spacing).min(total);
        while segment + 1 < lengths.len() && s > segment_start + lengths[segment] {
            segment_start += lengths[segment];
            segment += 1;
        }
        let (a, b) = (waypoints[segment], waypoints[segment + 1]);
        let frac = if lengths[segment] > 0.0 {
            ((s - segment_start) / lengths[segment]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(Position2D::new(
            a.x + frac * (b.x - a.x),
            a.y + frac * (b.y - a.y),
        ));
    }
    out
}

/// Samples the path and records one RSS value per band and sweep.
///
/// Shadowing is drawn sweep by sweep, band by band, from a generator seeded
/// with `cfg.seed`; the geometry does not depend on the seed.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let truth = sample_path(&cfg.waypoints, cfg.speed * cfg.dt);
    let owners = cfg.owners();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut sweeps = Vec::with_capacity(truth.len());
    for (k, p) in truth.iter().enumerate() {
        let mut rss = Vec::with_capacity(cfg.bands.len());
        for (band, model) in cfg.bands.iter().enumerate() {
            let d = p.distance_to(&cfg.tx_positions[owners[band]]);
            let z: f64 = unit.sample(&mut rng);
            let shadow = if model.shadow_sigma > 0.0 {
                model.shadow_sigma * z
            } else {
                0.0
            };
            rss.push(cfg.tx_power_dbm - pl_from_distance(model, d, shadow)?);
        }
        sweeps.push(SweepRecord {
            t: k as f64 * cfg.dt,
            rss,
        });
    }
    Ok(Scenario { truth, sweeps })
}

/// Centered moving average per band; windows are truncated at both ends.
pub fn smooth_rss(sweeps: &[SweepRecord], window: usize) -> Result<Vec<SweepRecord>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window == 1 || sweeps.is_empty() {
        return Ok(sweeps.to_vec());
    }
    let m = sweeps[0].rss.len();
    let half = window / 2;
    let n = sweeps.len();
    let out = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            let span = &sweeps[lo..=hi];
            let rss = (0..m)
                .map(|band| span.iter().map(|s| s.rss[band]).sum::<f64>() / span.len() as f64)
                .collect();
            SweepRecord {
                t: sweeps[k].t,
                rss,
            }
        })
        .collect();
    Ok(out)
}

/// Contiguous split of `m` bands into `i` groups; the first `m mod i` groups
/// get one extra band.
pub fn cluster_bands(m: usize, i: usize) -> Result<Vec<Vec<usize>>> {
    if i == 0 || i > m {
        return Err(Error::Config(format!(
            "cannot split {m} bands into {i} transmitters"
        )));
    }
    let base = m / i;
    let extra = m % i;
    let mut groups = Vec::with_capacity(i);
    let mut start = 0;
    for g in 0..i {
        let size = base + usize::from(g < extra);
        groups.push((start..start + size).collect());
        start += size;
    }
    Ok(groups)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMoments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Per-band sample mean and unbiased sample variance over time.
pub fn feature_moments(sweeps: &[SweepRecord]) -> Result<FeatureMoments> {
    if sweeps.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "moments need at least 2 sweeps, got {}",
            sweeps.len()
        )));
    }
    let m = sweeps[0].rss.len();
    let n = sweeps.len() as f64;
    let mut mean = vec![0.0; m];
    for s in sweeps {
        for (acc, v) in mean.iter_mut().zip(&s.rss) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut variance = vec![0.0; m];
    for s in sweeps {
        for ((acc, v), mu) in variance.iter_mut().zip(&s.rss).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    variance.iter_mut().for_each(|v| *v /= n - 1.0);
    Ok(FeatureMoments { mean, variance })
}

/// Formats a value with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_sweeps<W: Write>(mut out: W, sweeps: &[SweepRecord]) -> std::io::Result<()> {
    let Some(first) = sweeps.first() else {
        return Ok(());
    };
    let mut header = String::from("t");
    for b in 0..first.rss.len() {
        header.push_str(&format!(",band_{b}"));
    }
    writeln!(out, "{header}")?;
    for s in sweeps {
        let mut line = format_float(s.t);
        for v in &s.rss {
            line.push(',');
            line.push_str(&format_float(*v));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_sweeps<R: BufRead>(input: R) -> Result<Vec<SweepRecord>> {
    let mut lines = input.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header = header.map_err(|e| parse_error(1, e.to_string()))?;
    let columns: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if columns.first() != Some(&"t")
        || columns
            .iter()
            .skip(1)
            .enumerate()
            .any(|(b, name)| *name != format!("band_{b}"))
    {
        return Err(parse_error(1, "header must be t,band_0,band_1,..."));
    }
    let width = columns.len();
    let mut sweeps = Vec::new();
    for (idx, line) in lines {
        let number = idx + 1;
        let line = line.map_err(|e| parse_error(number, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(parse_error(
                number,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        let values = fields
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_error(number, format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        sweeps.push(SweepRecord {
            t: values[0],
            rss: values[1..].to_vec(),
        });
    }
    Ok(sweeps)
}

pub fn save_sweeps(path: &Path, sweeps: &[SweepRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_sweeps(BufWriter::new(file), sweeps).map_err(|e| Error::io(path, e))
}

pub fn load_sweeps(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sweeps(BufReader::new(file))
}
