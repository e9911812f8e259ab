use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;

use super::config::*;
use super::{Artifact, ConfigError, LoadedConfig, Outcome};
use crate::correlations::{correlation_series, superpoly_test, CorrelationScheme, CorrelationSeries};
use crate::dimension::{local_dimension, DimensionMeasure};
use crate::error::{Error, Result};
use crate::grid::{discretize, GridPermutation, GridSpec};
use crate::hitting::{borel_cantelli_fraction, hitting_score, wp_hit_count, wp_union_measure, ShrinkingTargetSpec, WpWindow};
use crate::measure::MeasureModel;
use crate::observable::Observable;
use crate::orbit::{check_horizon, check_inputs, Horizon};
use crate::perturbation::{build_cover, towerize, CubeCover, PerturbationReport};
use crate::rate::RateSequence;
use crate::recurrence::{recurrence_score, window_union_measure, RecurrenceWindow};
use crate::space::{Point, Space};
use crate::system::{map_distance, SystemMap};

pub const DEFAULT_SAMPLES: u64 = 1000;

/// Map as configured, towerized at execution time when requested.
#[derive(Debug, Clone)]
struct SystemPlan {
    base: SystemMap,
    tower: Option<CubeCover>,
}

impl SystemPlan {
    fn grid_permutation(&self) -> Option<&GridPermutation> {
        match self.base.kind() {
            crate::system::MapKind::Grid(p) => Some(p),
            _ => None,
        }
    }

    /// The map to study, and the tower report if one was built.
    fn build(&self) -> Result<(SystemMap, Option<PerturbationReport>)> {
        match (&self.tower, self.grid_permutation()) {
            (Some(cover), Some(perm)) => {
                let report = towerize(perm, cover)?;
                Ok((SystemMap::grid(report.permutation.clone()), Some(report)))
            }
            _ => Ok((self.base.clone(), None)),
        }
    }
}

#[derive(Debug, Clone)]
enum Work {
    Recurrence {
        f: Observable,
        rate: RateSequence,
        horizon: Horizon,
        window: Option<RecurrenceWindow>,
    },
    Hitting {
        f: Observable,
        rate: RateSequence,
        y: Point,
        horizon: Horizon,
        window: WpWindow,
    },
    Perturb {
        cover: CubeCover,
        check: Option<(u64, f64)>,
    },
    Correlations {
        phi: Observable,
        psi: Observable,
        horizons: Vec<u64>,
        period_multiples: bool,
        scheme: CorrelationScheme,
        norm_grid: GridSpec,
        p_list: Vec<f64>,
    },
    Dimension {
        measure: DimensionMeasure,
        y: Point,
        r_min: f64,
        r_max: f64,
    },
    BorelCantelli {
        spec: ShrinkingTargetSpec,
        m: u64,
        horizon: u64,
    },
    MapDistance {
        other: SystemPlan,
        boxes: Vec<f64>,
        samples_per_box: usize,
    },
}

/// A fully validated run, ready to execute.
#[derive(Debug, Clone)]
pub struct Plan {
    scenario: Scenario,
    seed: u64,
    samples: u64,
    system: Option<SystemPlan>,
    work: Work,
}

fn keyed<T>(loaded: &LoadedConfig, key: &str, r: Result<T>) -> std::result::Result<T, ConfigError> {
    r.map_err(|e| loaded.error(key, e))
}

fn require<'a, T>(loaded: &LoadedConfig, key: &str, v: &'a Option<T>) -> std::result::Result<&'a T, ConfigError> {
    v.as_ref().ok_or_else(|| loaded.error(key, "missing required key"))
}

fn build_system(loaded: &LoadedConfig, section: &str, c: &SystemConfig) -> std::result::Result<SystemPlan, ConfigError> {
    let key = |k: &str| format!("{section}.{k}");
    let mut map = match c.kind {
        SystemKind::Identity => {
            let dim = *require(loaded, &key("dim"), &c.dim)?;
            if dim == 0 {
                return Err(loaded.error(&key("dim"), "must be positive"));
            }
            SystemMap::identity(Space::torus(dim))
        }
        SystemKind::Rotation => {
            let alpha = require(loaded, &key("alpha"), &c.alpha)?;
            keyed(loaded, &key("alpha"), SystemMap::rotation(alpha.clone()))?
        }
        SystemKind::Automorphism => {
            let m = require(loaded, &key("matrix"), &c.matrix)?;
            keyed(loaded, &key("matrix"), SystemMap::toral_automorphism(m))?
        }
        SystemKind::Cat => SystemMap::cat_map(),
        SystemKind::Permutation => {
            let path = require(loaded, &key("path"), &c.path)?;
            let perm = File::open(path)
                .map_err(Error::from)
                .and_then(|f| GridPermutation::read_from(BufReader::new(f)));
            SystemMap::grid(keyed(loaded, &key("path"), perm)?)
        }
    };
    if let Some(level) = c.level {
        if c.kind == SystemKind::Permutation {
            return Err(loaded.error(&key("level"), "a loaded permutation is already discretized"));
        }
        let grid = keyed(loaded, &key("level"), GridSpec::new(map.space(), level))?;
        map = SystemMap::grid(keyed(loaded, &key("level"), discretize(&map, grid))?);
    }
    let tower = match &c.towerize {
        None => None,
        Some(t) => {
            let grid = match map.kind() {
                crate::system::MapKind::Grid(p) => *p.grid(),
                _ => return Err(loaded.error(&key("towerize"), "needs a grid system; set `level`")),
            };
            Some(keyed(loaded, &key("towerize.delta"), build_cover(grid, t.delta, t.epsilon))?)
        }
    };
    Ok(SystemPlan { base: map, tower })
}

fn build_observable(
    loaded: &LoadedConfig,
    section: &str,
    c: Option<&ObservableConfig>,
    space: &Space,
) -> std::result::Result<Observable, ConfigError> {
    let key = |k: &str| format!("{section}.{k}");
    let Some(c) = c else {
        return Ok(Observable::Identity);
    };
    let f = match c.kind {
        ObservableKind::Identity => Observable::Identity,
        ObservableKind::Cos => {
            let axis = c.axis.unwrap_or(0);
            if axis >= space.dim() {
                return Err(loaded.error(&key("axis"), format!("must be below the dimension {}", space.dim())));
            }
            Observable::cos_coordinate(space.dim(), axis)
        }
        ObservableKind::Trig => {
            let freqs = require(loaded, &key("frequencies"), &c.frequencies)?;
            keyed(loaded, &key("frequencies"), Observable::trig(freqs.clone()))?
        }
    };
    let f = match c.amplitude {
        Some(a) => keyed(loaded, &key("amplitude"), f.scaled(a))?,
        None => f,
    };
    keyed(loaded, &key("kind"), f.check_space(space))?;
    Ok(f)
}

fn build_rate(loaded: &LoadedConfig, c: Option<&RateConfig>) -> std::result::Result<RateSequence, ConfigError> {
    let Some(c) = c else {
        return keyed(loaded, "rate", RateSequence::power(1.0));
    };
    match c.kind {
        RateKind::Pow => keyed(loaded, "rate.beta", RateSequence::power(c.beta.unwrap_or(1.0))),
        RateKind::Powlog => {
            let gamma = *require(loaded, "rate.gamma", &c.gamma)?;
            keyed(loaded, "rate.beta", RateSequence::power_log(c.beta.unwrap_or(1.0), gamma))
        }
        RateKind::Table => {
            let values = require(loaded, "rate.values", &c.values)?;
            keyed(loaded, "rate.values", RateSequence::table(values.clone()))
        }
    }
}

fn point(loaded: &LoadedConfig, key: &str, space: Space, coords: &[f64]) -> std::result::Result<Point, ConfigError> {
    keyed(loaded, key, Point::new(space, coords.to_vec()))
}

fn correlation_horizons(loaded: &LoadedConfig, c: &CorrelationsConfig) -> std::result::Result<Vec<u64>, ConfigError> {
    let set = [c.horizons.is_some(), c.max_power.is_some(), c.linear.is_some()];
    if set.iter().filter(|b| **b).count() != 1 {
        return Err(loaded.error("correlations.horizons", "set exactly one of horizons, max_power, linear"));
    }
    if let Some(h) = &c.horizons {
        return Ok(h.clone());
    }
    if let Some(p) = c.max_power {
        if p > 40 {
            return Err(loaded.error("correlations.max_power", "must be at most 40"));
        }
        return Ok((0..=p).map(|i| 1u64 << i).collect());
    }
    Ok((1..=c.linear.unwrap_or(0)).collect())
}

impl Plan {
    /// Build and check every object the scenario needs, without iterating
    /// any map.
    pub fn prepare(loaded: &LoadedConfig, scenario: Scenario) -> std::result::Result<Plan, ConfigError> {
        let cfg = &loaded.config;
        if let Some(s) = cfg.scenario {
            if s != scenario {
                return Err(loaded.error("scenario", format!("config is for `{s}`, not `{scenario}`")));
            }
        }
        let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
        if samples == 0 {
            return Err(loaded.error("samples", "must be positive"));
        }
        if cfg.threads == Some(0) {
            return Err(loaded.error("threads", "must be positive"));
        }
        let system = match (&cfg.system, scenario) {
            (None, Scenario::Dimension) => None,
            (None, _) => return Err(loaded.error("system", "missing required section")),
            (Some(c), _) => Some(build_system(loaded, "system", c)?),
        };
        let space = system.as_ref().map(|s| s.base.space());
        let work = match scenario {
            Scenario::Recurrence => {
                let sys = system.as_ref().expect("checked above");
                let space = space.expect("system present");
                let c = require(loaded, "recurrence", &cfg.recurrence)?;
                let f = build_observable(loaded, "observable", cfg.observable.as_ref(), &space)?;
                let rate = build_rate(loaded, cfg.rate.as_ref())?;
                let horizon = keyed(loaded, "recurrence.horizon", Horizon::new(c.start.unwrap_or(1), c.horizon))?;
                keyed(loaded, "recurrence.horizon", check_horizon(&sys.base, &rate, horizon.end))?;
                let window = match (c.m, c.l, c.k) {
                    (None, None, None) => None,
                    (Some(m), Some(l), Some(k)) => {
                        let w = keyed(loaded, "recurrence.m", RecurrenceWindow::new(m, l, k))?;
                        keyed(loaded, "recurrence.l", check_horizon(&sys.base, &rate, l))?;
                        if samples < 100 {
                            return Err(loaded.error("samples", "window estimates need at least 100 samples"));
                        }
                        Some(w)
                    }
                    _ => return Err(loaded.error("recurrence.m", "m, l and k must be set together")),
                };
                Work::Recurrence { f, rate, horizon, window }
            }
            Scenario::Hitting => {
                let sys = system.as_ref().expect("checked above");
                let space = space.expect("system present");
                let c = require(loaded, "hitting", &cfg.hitting)?;
                let f = build_observable(loaded, "observable", cfg.observable.as_ref(), &space)?;
                let rate = build_rate(loaded, cfg.rate.as_ref())?;
                let y = point(loaded, "hitting.y", space, &c.y)?;
                let horizon = keyed(loaded, "hitting.horizon", Horizon::new(c.start.unwrap_or(1), c.horizon))?;
                let window = keyed(loaded, "hitting.p", WpWindow::new(c.p, c.m, c.l))?;
                keyed(loaded, "hitting.horizon", check_horizon(&sys.base, &rate, horizon.end.max(c.l)))?;
                keyed(loaded, "hitting.y", check_inputs(&sys.base, &f, &[&y]))?;
                if samples < 100 {
                    return Err(loaded.error("samples", "union estimates need at least 100 samples"));
                }
                Work::Hitting { f, rate, y, horizon, window }
            }
            Scenario::Perturb => {
                let sys = system.as_ref().expect("checked above");
                let c = require(loaded, "perturb", &cfg.perturb)?;
                if sys.tower.is_some() {
                    return Err(loaded.error("system.towerize", "perturb towerizes the system itself"));
                }
                let grid = match sys.grid_permutation() {
                    Some(p) => *p.grid(),
                    None => return Err(loaded.error("system.level", "perturb needs a grid system")),
                };
                let cover = keyed(loaded, "perturb.delta", build_cover(grid, c.delta, c.epsilon))?;
                let check = match (c.check_period, c.check_fraction) {
                    (None, None) => None,
                    (Some(p), Some(q)) => {
                        if !(0.0..=1.0).contains(&q) {
                            return Err(loaded.error("perturb.check_fraction", "must lie in [0, 1]"));
                        }
                        Some((p, q))
                    }
                    _ => {
                        return Err(loaded.error(
                            "perturb.check_period",
                            "check_period and check_fraction must be set together",
                        ))
                    }
                };
                Work::Perturb { cover, check }
            }
            Scenario::Correlations => {
                let sys = system.as_ref().expect("checked above");
                let space = space.expect("system present");
                let c = require(loaded, "correlations", &cfg.correlations)?;
                let phi = build_observable(loaded, "observable", cfg.observable.as_ref(), &space)?;
                let psi = match &c.psi {
                    Some(p) => build_observable(loaded, "correlations.psi", Some(p), &space)?,
                    None => phi.clone(),
                };
                let norm_grid = keyed(loaded, "correlations.level", GridSpec::new(space, c.level))?;
                keyed(loaded, "observable", crate::correlations::lipschitz_norm(&phi, &norm_grid).map(|_| ()))?;
                keyed(loaded, "correlations.psi", crate::correlations::lipschitz_norm(&psi, &norm_grid).map(|_| ()))?;
                let horizons = correlation_horizons(loaded, c)?;
                if c.period_multiples && sys.tower.is_none() {
                    return Err(loaded.error("correlations.period_multiples", "needs `system.towerize`"));
                }
                let probe = keyed(
                    loaded,
                    "correlations.horizons",
                    CorrelationSeries::from_theta(horizons.clone(), vec![0.0; horizons.len()]),
                )?;
                keyed(loaded, "correlations.horizons", superpoly_test(&probe, &c.p_list).map(|_| ()))?;
                let scheme = match c.scheme {
                    SchemeKind::Grid => CorrelationScheme::FullGrid(norm_grid),
                    SchemeKind::MonteCarlo => CorrelationScheme::MonteCarlo { samples, seed: cfg.seed },
                };
                Work::Correlations {
                    phi,
                    psi,
                    horizons,
                    period_multiples: c.period_multiples,
                    scheme,
                    norm_grid,
                    p_list: c.p_list.clone(),
                }
            }
            Scenario::Dimension => {
                let c = require(loaded, "dimension", &cfg.dimension)?;
                let grid = keyed(loaded, "dimension.level", GridSpec::torus(c.dim, c.level))?;
                let y = point(loaded, "dimension.y", grid.space(), &c.y)?;
                let measure = match c.scheme {
                    DimensionScheme::Exact => DimensionMeasure::Uniform(grid),
                    DimensionScheme::MonteCarlo => DimensionMeasure::MonteCarlo {
                        model: MeasureModel::lebesgue(grid.space()),
                        samples,
                        seed: cfg.seed,
                    },
                };
                let d = grid.space().diameter();
                if !(c.r_min > 0.0 && c.r_min < c.r_max) {
                    return Err(loaded.error("dimension.r_min", "need 0 < r_min < r_max"));
                }
                if c.r_max > d / 2.0 {
                    return Err(loaded.error("dimension.r_max", format!("must be at most {}", d / 2.0)));
                }
                Work::Dimension {
                    measure,
                    y,
                    r_min: c.r_min,
                    r_max: c.r_max,
                }
            }
            Scenario::BorelCantelli => {
                let sys = system.as_ref().expect("checked above");
                let space = space.expect("system present");
                let c = require(loaded, "bc", &cfg.bc)?;
                let y = point(loaded, "bc.y", space, &c.y)?;
                let spec = keyed(loaded, "bc.beta", ShrinkingTargetSpec::new(y, c.beta))?;
                if c.m == 0 || c.m > c.horizon {
                    return Err(loaded.error("bc.m", "need 1 <= m <= horizon"));
                }
                keyed(loaded, "bc.horizon", RateSequence::power(1.0).and_then(|r| check_horizon(&sys.base, &r, c.horizon)))?;
                if samples < 100 {
                    return Err(loaded.error("samples", "fractions need at least 100 samples"));
                }
                Work::BorelCantelli {
                    spec,
                    m: c.m,
                    horizon: c.horizon,
                }
            }
            Scenario::MapDistance => {
                let c = require(loaded, "mapdist", &cfg.mapdist)?;
                let other = build_system(loaded, "mapdist.other", &c.other)?;
                let sys = system.as_ref().expect("checked above");
                if other.base.space() != sys.base.space() {
                    return Err(loaded.error(
                        "mapdist.other",
                        format!("space {} differs from {}", other.base.space(), sys.base.space()),
                    ));
                }
                if c.samples_per_box == 0 {
                    return Err(loaded.error("mapdist.samples_per_box", "must be positive"));
                }
                Work::MapDistance {
                    other,
                    boxes: c.boxes.clone(),
                    samples_per_box: c.samples_per_box,
                }
            }
        };
        Ok(Plan {
            scenario,
            seed: cfg.seed,
            samples,
            system,
            work,
        })
    }

    /// Run the scenario in memory.
    pub fn execute(&self) -> Result<Outcome> {
        let mut out = Outcome {
            scenario: self.scenario,
            summary: Vec::new(),
            artifacts: Vec::new(),
            failures: Vec::new(),
        };
        let built = self.system.as_ref().map(SystemPlan::build).transpose()?;
        push(&mut out, "scenario", self.scenario);
        push(&mut out, "seed", self.seed);
        if let Some((map, tower)) = &built {
            push(&mut out, "system", map);
            push(&mut out, "metric", "linf");
            if let Some(r) = tower {
                push(&mut out, "tower.max_displacement", r.max_displacement);
                push(&mut out, "tower.common_period", opt(r.common_period));
            }
        }
        let (seed, samples) = (self.seed, self.samples);
        match &self.work {
            Work::Recurrence { f, rate, horizon, window } => {
                let (map, _) = built.as_ref().expect("prepared with a system");
                let measure = map.natural_measure();
                let points: Vec<Point> = (0..samples).map(|i| measure.sample(seed, i)).collect();
                let scores = points
                    .par_iter()
                    .map(|x| recurrence_score(map, f, rate, x, *horizon))
                    .collect::<Result<Vec<f64>>>()?;
                push(&mut out, "observable", f);
                push(&mut out, "rate", rate);
                push(&mut out, "horizon", format!("[{}, {}]", horizon.start, horizon.end));
                push(&mut out, "samples", samples);
                stats(&mut out, "score", &scores);
                out.artifacts.push(csv_artifact("scores.csv", |w| {
                    let d = map.space().dim();
                    let mut header = vec!["index".to_string()];
                    header.extend((0..d).map(|j| format!("x{j}")));
                    header.push("score".into());
                    w.write_record(&header)?;
                    for (i, (x, s)) in points.iter().zip(&scores).enumerate() {
                        let mut row = vec![i.to_string()];
                        row.extend(x.coords().iter().map(f64::to_string));
                        row.push(s.to_string());
                        w.write_record(&row)?;
                    }
                    Ok(())
                })?);
                if let Some(w) = window {
                    let est = window_union_measure(map, f, rate, w, &measure, samples, seed)?;
                    push(&mut out, "window", format!("m={},l={},k={}", w.m, w.l, w.k));
                    push(&mut out, "window.estimate", est.value);
                    push(&mut out, "window.std_error", est.std_error);
                    out.artifacts.push(csv_artifact("window.csv", |c| {
                        c.write_record(["system", "f", "rate", "m", "l", "k", "estimate", "stderr", "S", "seed"])?;
                        c.write_record([
                            map.to_string(),
                            f.to_string(),
                            rate.to_string(),
                            w.m.to_string(),
                            w.l.to_string(),
                            w.k.to_string(),
                            est.value.to_string(),
                            est.std_error.to_string(),
                            samples.to_string(),
                            seed.to_string(),
                        ])
                    })?);
                }
            }
            Work::Hitting { f, rate, y, horizon, window } => {
                let (map, _) = built.as_ref().expect("prepared with a system");
                let measure = map.natural_measure();
                let points: Vec<Point> = (0..samples).map(|i| measure.sample(seed, i)).collect();
                let rows = points
                    .par_iter()
                    .map(|x| Ok((hitting_score(map, f, rate, x, y, *horizon)?, wp_hit_count(map, f, rate, x, y, window)?)))
                    .collect::<Result<Vec<(f64, u64)>>>()?;
                let scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
                let est = wp_union_measure(map, f, rate, y, window, &measure, samples, seed)?;
                push(&mut out, "observable", f);
                push(&mut out, "rate", rate);
                push(&mut out, "y", format!("{:?}", y.coords()));
                push(&mut out, "horizon", format!("[{}, {}]", horizon.start, horizon.end));
                push(&mut out, "samples", samples);
                stats(&mut out, "score", &scores);
                push(&mut out, "wp.window", format!("p={},m={},l={}", window.p, window.m, window.l));
                push(&mut out, "wp.estimate", est.value);
                push(&mut out, "wp.std_error", est.std_error);
                out.artifacts.push(csv_artifact("hits.csv", |w| {
                    let d = map.space().dim();
                    let mut header = vec!["index".to_string()];
                    header.extend((0..d).map(|j| format!("x{j}")));
                    header.push("score".into());
                    header.push("wp_hits".into());
                    w.write_record(&header)?;
                    for (i, (x, (s, h))) in points.iter().zip(&rows).enumerate() {
                        let mut row = vec![i.to_string()];
                        row.extend(x.coords().iter().map(f64::to_string));
                        row.push(s.to_string());
                        row.push(h.to_string());
                        w.write_record(&row)?;
                    }
                    Ok(())
                })?);
                out.artifacts.push(csv_artifact("union.csv", |c| {
                    c.write_record(["system", "f", "y", "rate", "p", "m", "l", "estimate", "stderr", "S", "seed"])?;
                    c.write_record([
                        map.to_string(),
                        f.to_string(),
                        format!("{:?}", y.coords()),
                        rate.to_string(),
                        window.p.to_string(),
                        window.m.to_string(),
                        window.l.to_string(),
                        est.value.to_string(),
                        est.std_error.to_string(),
                        samples.to_string(),
                        seed.to_string(),
                    ])
                })?);
            }
            Work::Perturb { cover, check } => {
                let (map, _) = built.as_ref().expect("prepared with a system");
                let tau = match map.kind() {
                    crate::system::MapKind::Grid(p) => p,
                    _ => unreachable!("prepare requires a grid system"),
                };
                let report = towerize(tau, cover)?;
                for line in report.summary().lines() {
                    if let Some((k, v)) = line.split_once(" = ") {
                        push(&mut out, k, v);
                    }
                }
                if let Some((p, q)) = check {
                    let got = report.periodicity.fraction(*p);
                    push(&mut out, format!("fraction({p})"), got);
                    if got < *q {
                        out.failures.push(format!("fraction({p}) = {got} is below {q}"));
                    }
                }
                out.artifacts.push(csv_artifact_raw("histogram.csv", |w| report.write_histogram_csv(w))?);
                let mut gprm = Vec::new();
                report.permutation.write_to(&mut gprm)?;
                out.artifacts.push(Artifact {
                    name: "permutation.gprm".into(),
                    bytes: gprm,
                });
            }
            Work::Correlations {
                phi,
                psi,
                horizons,
                period_multiples,
                scheme,
                norm_grid,
                p_list,
            } => {
                let (map, tower) = built.as_ref().expect("prepared with a system");
                let horizons = if *period_multiples {
                    let q = tower
                        .as_ref()
                        .and_then(|r| r.common_period)
                        .ok_or_else(|| Error::invalid("period_multiples", "common period overflowed"))?;
                    horizons
                        .iter()
                        .map(|&h| {
                            u64::try_from(q * h as u128)
                                .map_err(|_| Error::invalid("period_multiples", "horizon overflows u64"))
                        })
                        .collect::<Result<Vec<u64>>>()?
                } else {
                    horizons.clone()
                };
                let series = correlation_series(map, phi, psi, &horizons, scheme, norm_grid)?;
                let report = superpoly_test(&series, p_list)?;
                push(&mut out, "phi", phi);
                push(&mut out, "psi", psi);
                push(&mut out, "scheme", scheme);
                push(&mut out, "phi_norm", series.phi_norm);
                push(&mut out, "psi_norm", series.psi_norm);
                push(&mut out, "resolution", series.resolution);
                for fit in &report.fits {
                    push(&mut out, format!("verdict.p{}", fit.p), fit.verdict);
                    push(&mut out, format!("ratio.p{}", fit.p), fit.ratio);
                }
                out.artifacts.push(csv_artifact_raw("series.csv", |w| series.write_csv(w))?);
                out.artifacts.push(csv_artifact_raw("decay.csv", |w| report.write_csv(w))?);
            }
            Work::Dimension { measure, y, r_min, r_max } => {
                let est = local_dimension(measure, y, *r_min, *r_max)?;
                push(&mut out, "measure", measure.tag());
                push(&mut out, "y", format!("{:?}", y.coords()));
                push(&mut out, "slope", est.slope);
                push(&mut out, "residual", est.residual);
                push(&mut out, "radii", est.radii.len());
                push(&mut out, "excluded", est.excluded.len());
                out.artifacts.push(csv_artifact_raw("masses.csv", |w| est.write_csv(w))?);
            }
            Work::BorelCantelli { spec, m, horizon } => {
                let (map, _) = built.as_ref().expect("prepared with a system");
                let measure = map.natural_measure();
                let est = borel_cantelli_fraction(map, spec, *m, *horizon, &measure, samples, seed)?;
                push(&mut out, "y", format!("{:?}", spec.y.coords()));
                push(&mut out, "beta", spec.beta);
                push(&mut out, "window", format!("[{m}, {horizon}]"));
                push(&mut out, "fraction", est.value);
                push(&mut out, "std_error", est.std_error);
                push(&mut out, "samples", samples);
                out.artifacts.push(csv_artifact("bc.csv", |c| {
                    c.write_record(["system", "y", "beta", "m", "N", "estimate", "stderr", "S", "seed"])?;
                    c.write_record([
                        map.to_string(),
                        format!("{:?}", spec.y.coords()),
                        spec.beta.to_string(),
                        m.to_string(),
                        horizon.to_string(),
                        est.value.to_string(),
                        est.std_error.to_string(),
                        samples.to_string(),
                        seed.to_string(),
                    ])
                })?);
            }
            Work::MapDistance {
                other,
                boxes,
                samples_per_box,
            } => {
                let (map, _) = built.as_ref().expect("prepared with a system");
                let (other, _) = other.build()?;
                let d = map_distance(map, &other, boxes, *samples_per_box, seed)?;
                push(&mut out, "other", &other);
                push(&mut out, "distance", d);
                out.artifacts.push(csv_artifact("mapdist.csv", |c| {
                    c.write_record(["system", "other", "distance", "samples_per_box", "seed"])?;
                    c.write_record([
                        map.to_string(),
                        other.to_string(),
                        d.to_string(),
                        samples_per_box.to_string(),
                        seed.to_string(),
                    ])
                })?);
            }
        }
        Ok(out)
    }
}

fn push(out: &mut Outcome, key: impl Into<String>, value: impl std::fmt::Display) {
    out.summary.push((key.into(), value.to_string()));
}

fn opt(v: Option<u128>) -> String {
    v.map(|q| q.to_string()).unwrap_or_else(|| "overflow".into())
}

fn stats(out: &mut Outcome, name: &str, values: &[f64]) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    push(out, format!("{name}.min"), sorted[0]);
    push(out, format!("{name}.median"), median);
    push(out, format!("{name}.max"), sorted[n - 1]);
    push(out, format!("{name}.mean"), crate::correlations::det_sum(values) / n as f64);
}

fn csv_artifact(
    name: &str,
    body: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
) -> Result<Artifact> {
    let mut bytes = Vec::new();
    {
        let mut w = crate::csv_writer(&mut bytes);
        body(&mut w).map_err(std::io::Error::from)?;
        w.flush()?;
    }
    Ok(Artifact {
        name: name.into(),
        bytes,
    })
}

fn csv_artifact_raw(name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Artifact> {
    let mut bytes = Vec::new();
    body(&mut bytes)?;
    Ok(Artifact {
        name: name.into(),
        bytes,
    })
}
