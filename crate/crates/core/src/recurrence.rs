//! Finite-horizon recurrence statistics.
//!
//! The quantity of interest is `liminf r_n d(f(T^n x), f(x))`. Everything
//! here works with exact minima over finite index windows, and the window is
//! always part of the result.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::measure::{monte_carlo_fraction, MeasureEstimate, MeasureModel};
use crate::observable::Observable;
use crate::orbit::{check_horizon, check_inputs, Horizon, OrbitScan};
use crate::rate::RateSequence;
use crate::space::Point;
use crate::system::SystemMap;

/// Indices `m..=l` and threshold `k` of the window union `⋃_{n=m}^{l} X_{n,k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceWindow {
    pub m: u64,
    pub l: u64,
    pub k: f64,
}

impl RecurrenceWindow {
    pub fn new(m: u64, l: u64, k: f64) -> Result<Self> {
        if m < 1 || l < m {
            return Err(Error::invalid("window", format!("need 1 <= m <= l, got m={m}, l={l}")));
        }
        if !(k > 0.0) {
            return Err(Error::invalid("k", "threshold must be positive"));
        }
        Ok(RecurrenceWindow { m, l, k })
    }
}

/// `min_{n in horizon} r_n d(f(T^n x), f(x))`, in one orbit pass.
pub fn recurrence_score(
    map: &SystemMap,
    f: &Observable,
    rate: &RateSequence,
    x: &Point,
    horizon: Horizon,
) -> Result<f64> {
    check_inputs(map, f, &[x])?;
    check_horizon(map, rate, horizon.end)?;
    let mut scan = OrbitScan::new(map, f);
    let fx = scan.image(x.coords());
    Ok(scan.min_score(rate, x.coords(), &fx, horizon))
}

/// Membership of `x` in `X_{n,k} = {x : r_n d(f(T^n x), f(x)) < k}`.
pub fn in_window_set(
    map: &SystemMap,
    f: &Observable,
    rate: &RateSequence,
    x: &Point,
    n: u64,
    k: f64,
) -> Result<bool> {
    if n < 1 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    if !(k > 0.0) {
        return Err(Error::invalid("k", "threshold must be positive"));
    }
    check_inputs(map, f, &[x])?;
    check_horizon(map, rate, n)?;
    let mut scan = OrbitScan::new(map, f);
    let fx = scan.image(x.coords());
    let mut inside = false;
    scan.run(x.coords(), &fx, n, |j, d| {
        if j == n {
            inside = rate.value(n) * d < k;
        }
        true
    });
    Ok(inside)
}

fn union_member(
    scan: &mut OrbitScan<'_>,
    rate: &RateSequence,
    w: &RecurrenceWindow,
    x: &[f64],
) -> bool {
    let fx = scan.image(x);
    let mut hit = false;
    scan.run(x, &fx, w.l, |n, d| {
        hit = n >= w.m && rate.value(n) * d < w.k;
        !hit
    });
    hit
}

/// Monte Carlo estimate of `μ(⋃_{n=m}^{l} X_{n,k})`.
#[allow(clippy::too_many_arguments)]
pub fn window_union_measure(
    map: &SystemMap,
    f: &Observable,
    rate: &RateSequence,
    w: &RecurrenceWindow,
    measure: &MeasureModel,
    samples: u64,
    seed: u64,
) -> Result<MeasureEstimate> {
    if samples < 100 {
        return Err(Error::invalid("samples", "need at least 100 samples"));
    }
    f.check_space(&map.space())?;
    map.space().check_same(&measure.space())?;
    check_horizon(map, rate, w.l)?;
    Ok(monte_carlo_fraction(measure, samples, seed, |x| {
        union_member(&mut OrbitScan::new(map, f), rate, w, x)
    }))
}

/// Exact `μ(⋃_{n=m}^{l} X_{n,k})` over the cell centers of `grid`.
pub fn exhaustive_window_union_measure(
    map: &SystemMap,
    f: &Observable,
    rate: &RateSequence,
    w: &RecurrenceWindow,
    grid: &GridSpec,
) -> Result<f64> {
    f.check_space(&map.space())?;
    map.space().check_same(&grid.space())?;
    check_horizon(map, rate, w.l)?;
    let dim = grid.dim();
    let hits: u64 = (0..grid.cell_count())
        .into_par_iter()
        .map_init(
            || (OrbitScan::new(map, f), vec![0.0; dim]),
            |(scan, x), i| {
                grid.center_into(i, x);
                union_member(scan, rate, w, x) as u64
            },
        )
        .sum();
    Ok(hits as f64 / grid.cell_count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridPermutation;
    use crate::space::Space;

    fn pow1() -> RateSequence {
        RateSequence::power(1.0).unwrap()
    }

    #[test]
    fn identity_scores_zero() {
        let id = SystemMap::identity(Space::torus(2));
        let x = Point::on_torus(vec![0.3, 0.7]);
        for f in [Observable::Identity, Observable::cos_coordinate(2, 1)] {
            let s = recurrence_score(&id, &f, &pow1(), &x, Horizon::full(17).unwrap()).unwrap();
            assert_eq!(s, 0.0);
            assert!(in_window_set(&id, &f, &pow1(), &x, 5, 1e-9).unwrap());
        }
        let est = window_union_measure(
            &id,
            &Observable::Identity,
            &pow1(),
            &RecurrenceWindow::new(3, 9, 0.1).unwrap(),
            &MeasureModel::lebesgue(Space::torus(2)),
            500,
            1,
        )
        .unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn quarter_rotation_hits_exactly() {
        let t = SystemMap::rotation(vec![0.25]).unwrap();
        let x = Point::on_torus(vec![0.0]);
        let s = recurrence_score(&t, &Observable::Identity, &pow1(), &x, Horizon::full(4).unwrap()).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn half_rotation_window_membership() {
        let t = SystemMap::rotation(vec![0.5]).unwrap();
        let x = Point::on_torus(vec![0.25]);
        assert!(!in_window_set(&t, &Observable::Identity, &pow1(), &x, 1, 0.4).unwrap());
        assert!(in_window_set(&t, &Observable::Identity, &pow1(), &x, 1, 0.6).unwrap());
        assert!(in_window_set(&t, &Observable::Identity, &pow1(), &x, 0, 0.6).is_err());
        assert!(in_window_set(&t, &Observable::Identity, &pow1(), &x, 1, 0.0).is_err());
    }

    #[test]
    fn single_cycle_window_is_empty() {
        // one 256-cycle: every step moves at least one cell until the period closes
        let g = GridSpec::torus(1, 8).unwrap();
        let t = SystemMap::grid(GridPermutation::shift(g, &[1]).unwrap());
        let w = RecurrenceWindow::new(1, 255, 0.5 * g.cell_width()).unwrap();
        let exact = exhaustive_window_union_measure(&t, &Observable::Identity, &pow1(), &w, &g).unwrap();
        assert_eq!(exact, 0.0);
        let mc = window_union_measure(&t, &Observable::Identity, &pow1(), &w, &t.natural_measure(), 300, 5).unwrap();
        assert_eq!(mc.value, 0.0);
        assert!(window_union_measure(&t, &Observable::Identity, &pow1(), &w, &t.natural_measure(), 99, 5).is_err());
    }

    #[test]
    fn table_rate_must_cover_window() {
        let t = SystemMap::rotation(vec![0.1]).unwrap();
        let r = RateSequence::table(vec![1.0; 5]).unwrap();
        let x = Point::on_torus(vec![0.0]);
        assert!(recurrence_score(&t, &Observable::Identity, &r, &x, Horizon::full(5).unwrap()).is_ok());
        assert!(recurrence_score(&t, &Observable::Identity, &r, &x, Horizon::full(6).unwrap()).is_err());
    }

    #[test]
    fn horizon_validation() {
        assert!(Horizon::new(0, 3).is_err());
        assert!(Horizon::new(4, 3).is_err());
        assert_eq!(Horizon::tail_half(7).unwrap(), Horizon { start: 4, end: 7 });
        assert_eq!(Horizon::tail_half(1).unwrap(), Horizon { start: 1, end: 1 });
        let t = SystemMap::rotation(vec![0.1]).unwrap();
        let x = Point::on_torus(vec![0.0]);
        let too_long = Horizon::full(crate::system::MAX_ANALYTIC_HORIZON + 1).unwrap();
        assert!(recurrence_score(&t, &Observable::Identity, &pow1(), &x, too_long).is_err());
    }
}
