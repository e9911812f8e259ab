use crate::error::{Error, Result};
use crate::observable::Observable;
use crate::rate::RateSequence;
use crate::space::Point;
use crate::system::{MapKind, SystemMap, MAX_ANALYTIC_HORIZON};

/// Index range `[start, end]` of a finite-horizon minimum.
///
/// `start = 1` is the full horizon. A later start drops the initial
/// transient, which is how a `liminf` is approximated by a tail minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Horizon {
    pub start: u64,
    pub end: u64,
}

impl Horizon {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if start < 1 || end < start {
            return Err(Error::invalid(
                "horizon",
                format!("need 1 <= start <= end, got [{start}, {end}]"),
            ));
        }
        Ok(Horizon { start, end })
    }

    /// `[1, end]`.
    pub fn full(end: u64) -> Result<Self> {
        Self::new(1, end)
    }

    /// `[ceil(end / 2), end]`.
    pub fn tail_half(end: u64) -> Result<Self> {
        Self::new(end.div_ceil(2).max(1), end)
    }
}

pub(crate) fn check_horizon(map: &SystemMap, rate: &RateSequence, last: u64) -> Result<()> {
    rate.check_horizon(last)?;
    if last > MAX_ANALYTIC_HORIZON && !matches!(map.kind(), MapKind::Grid(_)) {
        return Err(Error::invalid(
            "horizon",
            format!("{last} exceeds the analytic-map cap of {MAX_ANALYTIC_HORIZON}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_inputs(map: &SystemMap, f: &Observable, points: &[&Point]) -> Result<()> {
    for p in points {
        map.check_point(p)?;
    }
    f.check_space(&map.space())
}

/// Walks `n = 1..=last`, handing `d(f(T^n x), target)` to `visit` until it
/// returns `false`.
pub(crate) struct OrbitScan<'a> {
    map: &'a SystemMap,
    f: &'a Observable,
    x: Vec<f64>,
    fx: Vec<f64>,
}

impl<'a> OrbitScan<'a> {
    pub(crate) fn new(map: &'a SystemMap, f: &'a Observable) -> Self {
        let space = map.space();
        OrbitScan {
            map,
            f,
            x: vec![0.0; space.dim()],
            fx: vec![0.0; f.codomain_dim(&space)],
        }
    }

    /// `f(point)` into a fresh buffer.
    pub(crate) fn image(&self, point: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.fx.len()];
        self.f.eval_into(point, &mut out);
        out
    }

    #[inline]
    pub(crate) fn run(
        &mut self,
        start: &[f64],
        target: &[f64],
        last: u64,
        mut visit: impl FnMut(u64, f64) -> bool,
    ) {
        let space = self.map.space();
        self.x.copy_from_slice(start);
        for n in 1..=last {
            self.map.step(&mut self.x);
            self.f.eval_into(&self.x, &mut self.fx);
            if !visit(n, self.f.distance(&space, &self.fx, target)) {
                break;
            }
        }
    }

    /// `min_{n in horizon} r_n d(f(T^n x), target)`.
    pub(crate) fn min_score(
        &mut self,
        rate: &RateSequence,
        start: &[f64],
        target: &[f64],
        horizon: Horizon,
    ) -> f64 {
        let mut best = f64::INFINITY;
        self.run(start, target, horizon.end, |n, d| {
            if n >= horizon.start {
                best = best.min(rate.value(n) * d);
            }
            // nothing can go below zero
            best > 0.0
        });
        best
    }
}
