//! Finite-horizon hitting statistics and shrinking-target fractions.
//!
//! "Infinitely many n" is replaced by "at least once in `[m, l]`"; the window
//! is an explicit argument everywhere.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::measure::{monte_carlo_fraction, MeasureEstimate, MeasureModel};
use crate::observable::Observable;
use crate::orbit::{check_horizon, check_inputs, Horizon, OrbitScan};
use crate::rate::RateSequence;
use crate::space::Point;
use crate::system::SystemMap;

/// A target point together with its cached image `f(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingTarget {
    y: Point,
    fy: Vec<f64>,
}

impl HittingTarget {
    pub fn new(f: &Observable, y: Point) -> Result<Self> {
        let space = y.space();
        f.check_space(&space)?;
        let mut fy = vec![0.0; f.codomain_dim(&space)];
        f.eval_into(y.coords(), &mut fy);
        Ok(HittingTarget { y, fy })
    }

    pub fn point(&self) -> &Point {
        &self.y
    }

    pub fn image(&self) -> &[f64] {
        &self.fy
    }

    /// True when `f(y)` recomputes to the cached value.
    pub fn is_consistent(&self, f: &Observable) -> bool {
        let mut fy = vec![0.0; self.fy.len()];
        f.eval_into(self.y.coords(), &mut fy);
        fy == self.fy
    }

    /// `μ(f^{-1}(f(y)))`, known exactly only for grid tables.
    pub fn fiber_mass(&self, f: &Observable) -> Option<f64> {
        f.fiber_mass(self.y.coords())
    }
}

/// Radius multiplier `p` and index window `[m, l]` of a `W_p` count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WpWindow {
    pub p: u64,
    pub m: u64,
    pub l: u64,
}

impl WpWindow {
    pub fn new(p: u64, m: u64, l: u64) -> Result<Self> {
        if p < 1 {
            return Err(Error::invalid("p", "must be >= 1"));
        }
        if m < 1 || l < m {
            return Err(Error::invalid("window", format!("need 1 <= m <= l, got m={m}, l={l}")));
        }
        Ok(WpWindow { p, m, l })
    }
}

/// Target `y` with radii `t_n = n^{-1/β}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkingTargetSpec {
    pub y: Point,
    pub beta: f64,
}

impl ShrinkingTargetSpec {
    pub fn new(y: Point, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", "must be positive and finite"));
        }
        Ok(ShrinkingTargetSpec { y, beta })
    }

    #[inline]
    pub fn radius(&self, n: u64) -> f64 {
        (n as f64).powf(-1.0 / self.beta)
    }
}

/// `min_{n in horizon} r_n d(f(T^n x), f(y))`, in one orbit pass.
pub fn hitting_score(
    map: &SystemMap,
    f: &Observable,
    rate: &RateSequence,
    x: &Point,
    y: &Point,
    horizon: Horizon,
) -> Result<f64> {
    check_inputs(map, f, &[x, y])?;
    check_horizon(map, rate, horizon.end)?;
    let mut scan = OrbitScan::new(map, f);
    let fy = scan.image(y.coords());
    Ok(scan.min_score(rate, x.coords(), &fy, horizon))
}

/// `#{n in [m, l] : d(f(T^n x), f(y)) < p / r_n}`.
pub fn wp_hit_count(
    map: &SystemMap,
    f: &Observable,
    rate: &RateSequence,
    x: &Point,
    y: &Point,
    w: &WpWindow,
) -> Result<u64> {
    check_inputs(map, f, &[x, y])?;
    check_horizon(map, rate, w.l)?;
    let mut scan = OrbitScan::new(map, f);
    let fy = scan.image(y.coords());
    let p = w.p as f64;
    let mut count = 0;
    scan.run(x.coords(), &fy, w.l, |n, d| {
        if n >= w.m && d < p / rate.value(n) {
            count += 1;
        }
        true
    });
    Ok(count)
}

fn wp_member(scan: &mut OrbitScan<'_>, rate: &RateSequence, fy: &[f64], w: &WpWindow, x: &[f64]) -> bool {
    let p = w.p as f64;
    let mut hit = false;
    scan.run(x, fy, w.l, |n, d| {
        hit = n >= w.m && d < p / rate.value(n);
        !hit
    });
    hit
}

/// Monte Carlo estimate of `μ(⋃_{n=m}^{l} T^{-n} f^{-1}(B(f(y), p/r_n)))`.
#[allow(clippy::too_many_arguments)]
pub fn wp_union_measure(
    map: &SystemMap,
    f: &Observable,
    rate: &RateSequence,
    y: &Point,
    w: &WpWindow,
    measure: &MeasureModel,
    samples: u64,
    seed: u64,
) -> Result<MeasureEstimate> {
    if samples < 100 {
        return Err(Error::invalid("samples", "need at least 100 samples"));
    }
    check_inputs(map, f, &[y])?;
    map.space().check_same(&measure.space())?;
    check_horizon(map, rate, w.l)?;
    let fy = OrbitScan::new(map, f).image(y.coords());
    Ok(monte_carlo_fraction(measure, samples, seed, |x| {
        wp_member(&mut OrbitScan::new(map, f), rate, &fy, w, x)
    }))
}

/// Exact version of [`wp_union_measure`] over the cell centers of `grid`.
pub fn exhaustive_wp_union_measure(
    map: &SystemMap,
    f: &Observable,
    rate: &RateSequence,
    y: &Point,
    w: &WpWindow,
    grid: &GridSpec,
) -> Result<f64> {
    check_inputs(map, f, &[y])?;
    map.space().check_same(&grid.space())?;
    check_horizon(map, rate, w.l)?;
    let fy = OrbitScan::new(map, f).image(y.coords());
    let dim = grid.dim();
    let hits: u64 = (0..grid.cell_count())
        .into_par_iter()
        .map_init(
            || (OrbitScan::new(map, f), vec![0.0; dim]),
            |(scan, x), i| {
                grid.center_into(i, x);
                wp_member(scan, rate, &fy, w, x) as u64
            },
        )
        .sum();
    Ok(hits as f64 / grid.cell_count() as f64)
}

/// Fraction of sampled points with `d(T^n x, y) < t_n` for some `n in [m, N]`.
pub fn borel_cantelli_fraction(
    map: &SystemMap,
    spec: &ShrinkingTargetSpec,
    m: u64,
    horizon: u64,
    measure: &MeasureModel,
    samples: u64,
    seed: u64,
) -> Result<MeasureEstimate> {
    if m < 1 || horizon <= m {
        return Err(Error::invalid("window", format!("need N > m >= 1, got m={m}, N={horizon}")));
    }
    if samples < 1 {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    map.check_point(&spec.y)?;
    map.space().check_same(&measure.space())?;
    check_horizon(map, &RateSequence::Shrinking { beta: spec.beta }, horizon)?;
    let f = Observable::Identity;
    let y = spec.y.coords();
    Ok(monte_carlo_fraction(measure, samples, seed, |x| {
        let mut hit = false;
        OrbitScan::new(map, &f).run(x, y, horizon, |n, d| {
            hit = n >= m && d < spec.radius(n);
            !hit
        });
        hit
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridPermutation;
    use crate::recurrence::recurrence_score;
    use crate::space::Space;

    fn pow(beta: f64) -> RateSequence {
        RateSequence::power(beta).unwrap()
    }

    #[test]
    fn direct_hit_and_self_target() {
        let t = SystemMap::rotation(vec![0.5]).unwrap();
        let x = Point::on_torus(vec![0.0]);
        let y = Point::on_torus(vec![0.5]);
        let h = Horizon::full(1).unwrap();
        assert_eq!(hitting_score(&t, &Observable::Identity, &pow(1.0), &x, &y, h).unwrap(), 0.0);

        let id = SystemMap::identity(Space::torus(1));
        let x = Point::on_torus(vec![0.37]);
        assert_eq!(hitting_score(&id, &Observable::Identity, &pow(1.0), &x, &x, h).unwrap(), 0.0);
        let count = wp_hit_count(&id, &Observable::Identity, &pow(1.0), &x, &x, &WpWindow::new(3, 1, 100).unwrap());
        assert_eq!(count.unwrap(), 100);
    }

    #[test]
    fn self_target_matches_recurrence_exactly() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let t = SystemMap::rotation(vec![golden, 0.1]).unwrap();
        let f = Observable::trig(vec![vec![1, 2], vec![0, 1]]).unwrap();
        let r = RateSequence::power_log(1.5, 0.5).unwrap();
        let x = Point::on_torus(vec![0.2, 0.9]);
        for h in [Horizon::full(500).unwrap(), Horizon::new(100, 900).unwrap()] {
            let a = hitting_score(&t, &f, &r, &x, &x, h).unwrap();
            let b = recurrence_score(&t, &f, &r, &x, h).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn short_cycles_keep_far_target_out_of_reach() {
        // eight 8-cycles on 64 cells; x cycles through cells 0..8, y sits in cell 36
        let g = GridSpec::torus(1, 6).unwrap();
        let forward: Vec<u32> = (0..64u32).map(|i| (i / 8) * 8 + (i + 1) % 8).collect();
        let t = SystemMap::grid(GridPermutation::from_forward(g, forward).unwrap());
        let x = Point::on_torus(g.center(0));
        let y = Point::on_torus(g.center(36));
        let n = 1000;
        let s = hitting_score(&t, &Observable::Identity, &pow(1.0), &x, &y, Horizon::tail_half(n).unwrap()).unwrap();
        assert!(s >= n as f64 * g.cell_width(), "{s}");
        // 1/n falls below the 29-cell gap from n = 3 on
        let w = WpWindow::new(1, 3, n).unwrap();
        assert_eq!(wp_hit_count(&t, &Observable::Identity, &pow(1.0), &x, &y, &w).unwrap(), 0);
        // radii p / r_n <= 10^-3 never reach a cell boundary point from a center
        let late = WpWindow::new(1, 10, n).unwrap();
        let tiny = exhaustive_wp_union_measure(&t, &Observable::Identity, &pow(3.0), &Point::on_torus(vec![0.0]), &late, &g);
        assert_eq!(tiny.unwrap(), 0.0);
    }

    #[test]
    fn wide_balls_capture_everything() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let t = SystemMap::rotation(vec![golden]).unwrap();
        let y = Point::on_torus(vec![0.3]);
        // p / r_m = 1 exceeds the torus diameter 1/2
        let w = WpWindow::new(5, 5, 20).unwrap();
        let est = wp_union_measure(&t, &Observable::Identity, &pow(1.0), &y, &w, &MeasureModel::lebesgue(Space::torus(1)), 200, 3);
        assert_eq!(est.unwrap().value, 1.0);
        let spec = ShrinkingTargetSpec::new(y, 1.0).unwrap();
        let bc = borel_cantelli_fraction(&t, &spec, 1, 4, &MeasureModel::lebesgue(Space::torus(1)), 200, 3).unwrap();
        assert_eq!(bc.value, 1.0);
    }

    #[test]
    fn identity_never_reaches_a_distant_target() {
        let id = SystemMap::identity(Space::torus(1));
        let spec = ShrinkingTargetSpec::new(Point::on_torus(vec![0.5]), 1.0).unwrap();
        // t_n <= 1/100 for n >= 100, so only samples within 1/100 of y count
        let bc = borel_cantelli_fraction(&id, &spec, 100, 200, &MeasureModel::lebesgue(Space::torus(1)), 5000, 9).unwrap();
        assert!(bc.value < 0.03, "{}", bc.value);
        assert!(borel_cantelli_fraction(&id, &spec, 5, 5, &MeasureModel::lebesgue(Space::torus(1)), 10, 9).is_err());
    }

    #[test]
    fn target_cache_and_fiber() {
        let g = GridSpec::torus(1, 3).unwrap();
        let f = Observable::table(g, (0..8).map(|i| (i % 4) as f64).collect()).unwrap();
        let target = HittingTarget::new(&f, Point::on_torus(vec![0.3])).unwrap();
        assert!(target.is_consistent(&f));
        assert_eq!(target.image(), &[2.0]);
        assert_eq!(target.fiber_mass(&f), Some(0.25));
        assert!(!target.is_consistent(&Observable::cos_coordinate(1, 0)));
        assert_eq!(target.fiber_mass(&Observable::Identity), None);
    }

    #[test]
    fn window_validation() {
        assert!(WpWindow::new(0, 1, 2).is_err());
        assert!(WpWindow::new(1, 3, 2).is_err());
        assert!(ShrinkingTargetSpec::new(Point::on_torus(vec![0.0]), 0.0).is_err());
        let s = ShrinkingTargetSpec::new(Point::on_torus(vec![0.0]), 2.0).unwrap();
        assert_eq!(s.radius(4), 0.5);
    }
}
