//! Measure-preserving maps on tori and grid boxes.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridPermutation, GridSpec};
use crate::measure::{sample_rng, MeasureModel};
use crate::space::{wrap_unit, Point, Space};

/// Largest dimension accepted for toral automorphisms.
pub const MAX_AUTOMORPHISM_DIM: usize = 8;

/// Orbit horizons above this are refused for analytic maps (rotation drift).
pub const MAX_ANALYTIC_HORIZON: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct SystemMap {
    space: Space,
    kind: MapKind,
}

#[derive(Debug, Clone)]
pub enum MapKind {
    Identity,
    Rotation(Vec<f64>),
    ToralAutomorphism(Automorphism),
    /// Sends a point to the center of the image of its cell.
    Grid(Arc<GridPermutation>),
    /// Applied first to last.
    Composition(Vec<SystemMap>),
}

/// Integer matrix with determinant ±1 acting on `T^d`, with its integer inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphism {
    dim: usize,
    matrix: Vec<i64>,
    inverse: Vec<i64>,
}

impl Automorphism {
    pub fn new(rows: &[Vec<i64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_AUTOMORPHISM_DIM {
            return Err(Error::invalid(
                "matrix",
                format!("dimension {dim} outside 1..={MAX_AUTOMORPHISM_DIM}"),
            ));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("matrix", "must be square"));
        }
        let matrix: Vec<i64> = rows.concat();
        let det = determinant(&matrix, dim);
        if det != 1 && det != -1 {
            return Err(Error::NotUnimodular { det: det as i64 });
        }
        // A^{-1} = adj(A) / det, and det = ±1
        let mut inverse = vec![0i64; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let minor = minor(&matrix, dim, j, i);
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                inverse[i * dim + j] = (sign * determinant(&minor, dim - 1) * det) as i64;
            }
        }
        Ok(Automorphism {
            dim,
            matrix,
            inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[i64] {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &[i64] {
        &self.inverse
    }

    #[inline]
    fn act(m: &[i64], dim: usize, x: &mut [f64]) {
        let mut tmp = [0.0f64; MAX_AUTOMORPHISM_DIM];
        for i in 0..dim {
            let row = &m[i * dim..(i + 1) * dim];
            tmp[i] = wrap_unit(row.iter().zip(x.iter()).map(|(&a, &v)| a as f64 * v).sum());
        }
        x.copy_from_slice(&tmp[..dim]);
    }
}

fn minor(m: &[i64], dim: usize, skip_row: usize, skip_col: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity((dim - 1) * (dim - 1));
    for r in (0..dim).filter(|&r| r != skip_row) {
        for c in (0..dim).filter(|&c| c != skip_col) {
            out.push(m[r * dim + c]);
        }
    }
    out
}

/// Laplace expansion in i128; only small matrices reach here.
fn determinant(m: &[i64], dim: usize) -> i128 {
    match dim {
        0 => 1,
        1 => m[0] as i128,
        2 => m[0] as i128 * m[3] as i128 - m[1] as i128 * m[2] as i128,
        _ => (0..dim)
            .map(|c| {
                let sign = if c % 2 == 0 { 1 } else { -1 };
                sign * m[c] as i128 * determinant(&minor(m, dim, 0, c), dim - 1)
            })
            .sum(),
    }
}

impl SystemMap {
    pub fn identity(space: Space) -> Self {
        SystemMap {
            space,
            kind: MapKind::Identity,
        }
    }

    /// Translation by `alpha` on `T^d`.
    pub fn rotation(alpha: impl Into<Vec<f64>>) -> Result<Self> {
        let alpha: Vec<f64> = alpha.into();
        if alpha.is_empty() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("alpha", "must be a non-empty vector of finite reals"));
        }
        Ok(SystemMap {
            space: Space::torus(alpha.len()),
            kind: MapKind::Rotation(alpha),
        })
    }

    pub fn toral_automorphism(rows: &[Vec<i64>]) -> Result<Self> {
        let a = Automorphism::new(rows)?;
        Ok(SystemMap {
            space: Space::torus(a.dim),
            kind: MapKind::ToralAutomorphism(a),
        })
    }

    /// The cat map `[[2,1],[1,1]]`.
    pub fn cat_map() -> Self {
        Self::toral_automorphism(&[vec![2, 1], vec![1, 1]]).expect("unimodular")
    }

    pub fn grid(perm: impl Into<Arc<GridPermutation>>) -> Self {
        let perm = perm.into();
        SystemMap {
            space: perm.grid().space(),
            kind: MapKind::Grid(perm),
        }
    }

    /// `maps[last] ∘ … ∘ maps[0]`.
    pub fn composition(maps: Vec<SystemMap>) -> Result<Self> {
        let first = maps.first().ok_or(Error::EmptyComposition)?;
        let space = first.space;
        for m in &maps {
            space.check_same(&m.space)?;
        }
        Ok(SystemMap {
            space,
            kind: MapKind::Composition(maps),
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    /// Every variant here is invertible.
    pub fn has_inverse(&self) -> bool {
        true
    }

    /// True if some component is a grid permutation.
    pub fn is_grid_backed(&self) -> bool {
        self.sampling_grid().is_some()
    }

    /// Grid of the first grid-backed component. Statistics over such maps
    /// sample this grid's cell centers (its counting measure).
    pub fn sampling_grid(&self) -> Option<GridSpec> {
        match &self.kind {
            MapKind::Grid(p) => Some(*p.grid()),
            MapKind::Composition(ms) => ms.iter().find_map(|m| m.sampling_grid()),
            _ => None,
        }
    }

    /// Uniform measure matching this map: cell centers for grid-backed maps,
    /// Lebesgue otherwise.
    pub fn natural_measure(&self) -> MeasureModel {
        match self.sampling_grid() {
            Some(g) => MeasureModel::grid(g),
            None => MeasureModel::lebesgue(self.space),
        }
    }

    /// Apply the map once, in place.
    #[inline]
    pub fn step(&self, x: &mut [f64]) {
        match &self.kind {
            MapKind::Identity => {}
            MapKind::Rotation(alpha) => {
                for (c, a) in x.iter_mut().zip(alpha) {
                    *c = wrap_unit(*c + a);
                }
            }
            MapKind::ToralAutomorphism(a) => Automorphism::act(&a.matrix, a.dim, x),
            MapKind::Grid(p) => {
                let g = p.grid();
                g.center_into(p.apply(g.cell_of(x)), x);
            }
            MapKind::Composition(ms) => {
                for m in ms {
                    m.step(x);
                }
            }
        }
    }

    /// Apply the inverse map once, in place.
    #[inline]
    pub fn step_inverse(&self, x: &mut [f64]) {
        match &self.kind {
            MapKind::Identity => {}
            MapKind::Rotation(alpha) => {
                for (c, a) in x.iter_mut().zip(alpha) {
                    *c = wrap_unit(*c - a);
                }
            }
            MapKind::ToralAutomorphism(a) => Automorphism::act(&a.inverse, a.dim, x),
            MapKind::Grid(p) => {
                let g = p.grid();
                g.center_into(p.apply_inverse(g.cell_of(x)), x);
            }
            MapKind::Composition(ms) => {
                for m in ms.iter().rev() {
                    m.step_inverse(x);
                }
            }
        }
    }

    /// `n` forward steps in place; grid maps chase the permutation directly.
    pub fn advance(&self, x: &mut [f64], n: u64) {
        if n == 0 {
            return;
        }
        if let MapKind::Grid(p) = &self.kind {
            let g = p.grid();
            let mut c = g.cell_of(x);
            for _ in 0..n {
                c = p.apply(c);
            }
            g.center_into(c, x);
            return;
        }
        for _ in 0..n {
            self.step(x);
        }
    }

    pub(crate) fn check_point(&self, x: &Point) -> Result<()> {
        self.space.check_same(&x.space())
    }
}

/// `T^n(x)`.
pub fn iterate(map: &SystemMap, x: &Point, n: u64) -> Result<Point> {
    map.check_point(x)?;
    let mut coords = x.coords().to_vec();
    map.advance(&mut coords, n);
    Ok(Point::from_raw(map.space, coords))
}

/// `T^{-n}(x)`.
pub fn iterate_inverse(map: &SystemMap, x: &Point, n: u64) -> Result<Point> {
    map.check_point(x)?;
    let mut coords = x.coords().to_vec();
    for _ in 0..n {
        map.step_inverse(&mut coords);
    }
    Ok(Point::from_raw(map.space, coords))
}

impl fmt::Display for SystemMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MapKind::Identity => write!(f, "identity[{}]", self.space),
            MapKind::Rotation(a) => write!(f, "rotation{a:?}"),
            MapKind::ToralAutomorphism(a) => write!(f, "automorphism{:?}", a.matrix),
            MapKind::Grid(p) => write!(f, "grid[{}]", p.grid()),
            MapKind::Composition(ms) => {
                write!(f, "compose(")?;
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Sampled distance between two maps.
///
/// On tori this is the sampled sup of `d(T x, S x)`. On boxes it is the
/// truncated series `Σ_i u_i / (1 + u_i)` over the nested boxes
/// `[-a_i, a_i]^d`, where `u_i` is the sampled max of `|T x - S x|` and
/// `|T⁻¹ x - S⁻¹ x|` over box `i`. If either map is grid-backed the samples
/// are cell centers of its grid.
pub fn map_distance(
    t: &SystemMap,
    s: &SystemMap,
    boxes: &[f64],
    samples_per_box: usize,
    seed: u64,
) -> Result<f64> {
    t.space.check_same(&s.space)?;
    if samples_per_box == 0 {
        return Err(Error::invalid("samples_per_box", "must be positive"));
    }
    let space = t.space;
    let grid = t.sampling_grid().or_else(|| s.sampling_grid());
    match space {
        Space::Torus { .. } => {
            let model = match grid {
                Some(g) => MeasureModel::grid(g),
                None => MeasureModel::lebesgue(space),
            };
            Ok(sup_over_samples(space, samples_per_box, |i, x| {
                model.sample_into(seed, i, x);
            }, t, s, false))
        }
        Space::Box { half_width, .. } => {
            if boxes.is_empty() {
                return Err(Error::invalid("boxes", "at least one box is required on box spaces"));
            }
            let mut prev = 0.0;
            for &a in boxes {
                if !(a > prev && a <= half_width) {
                    return Err(Error::invalid(
                        "boxes",
                        format!("half-widths must increase strictly within (0, {half_width}]"),
                    ));
                }
                prev = a;
            }
            let mut total = 0.0;
            for (b, &a) in boxes.iter().enumerate() {
                let stream_base = (b as u64) << 40;
                let u = sup_over_samples(space, samples_per_box, |i, x| {
                    sample_in_box(grid.as_ref(), a, seed, stream_base | i, x);
                }, t, s, true);
                total += u / (1.0 + u);
            }
            Ok(total)
        }
    }
}

fn sup_over_samples(
    space: Space,
    samples: usize,
    draw: impl Fn(u64, &mut [f64]) + Sync,
    t: &SystemMap,
    s: &SystemMap,
    with_inverse: bool,
) -> f64 {
    let d = space.dim();
    (0..samples as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; d], vec![0.0; d], vec![0.0; d]),
            |(x, a, b), i| {
                draw(i, x);
                a.copy_from_slice(x);
                b.copy_from_slice(x);
                t.step(a);
                s.step(b);
                let mut u = space.distance(a, b);
                if with_inverse {
                    a.copy_from_slice(x);
                    b.copy_from_slice(x);
                    t.step_inverse(a);
                    s.step_inverse(b);
                    u = u.max(space.distance(a, b));
                }
                u
            },
        )
        .reduce(|| 0.0, f64::max)
}

fn sample_in_box(grid: Option<&GridSpec>, a: f64, seed: u64, stream: u64, x: &mut [f64]) {
    use rand::Rng;
    let mut rng = sample_rng(seed, stream);
    for c in x.iter_mut() {
        *c = rng.random_range(-a..a);
    }
    if let Some(g) = grid {
        let cell = g.cell_of(x);
        g.center_into(cell, x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn half_rotation_has_period_two() {
        let t = SystemMap::rotation(vec![0.5]).unwrap();
        let x = Point::on_torus(vec![0.25]);
        assert_eq!(iterate(&t, &x, 2).unwrap().coords(), &[0.25]);
        assert_eq!(iterate(&t, &x, 0).unwrap(), x);
    }

    #[test]
    fn cat_map_hand_evaluation() {
        let t = SystemMap::cat_map();
        let x = Point::on_torus(vec![0.5, 0.5]);
        assert_eq!(iterate(&t, &x, 1).unwrap().coords(), &[0.5, 0.0]);
    }

    #[test]
    fn unimodularity_enforced() {
        assert!(matches!(
            SystemMap::toral_automorphism(&[vec![2, 0], vec![0, 1]]),
            Err(Error::NotUnimodular { det: 2 })
        ));
        let a = Automorphism::new(&[vec![2, 1], vec![1, 1]]).unwrap();
        assert_eq!(a.inverse_matrix(), &[1, -1, -1, 2]);
        let b = Automorphism::new(&[vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]).unwrap();
        assert_eq!(b.inverse_matrix(), &[1, -1, 1, 0, 1, -1, 0, 0, 1]);
        assert!(SystemMap::composition(vec![]).is_err());
    }

    #[test]
    fn space_mismatch_rejected() {
        let t = SystemMap::rotation(vec![0.1, 0.2]).unwrap();
        assert!(iterate(&t, &Point::on_torus(vec![0.1]), 1).is_err());
        assert!(SystemMap::composition(vec![t, SystemMap::cat_map(), SystemMap::rotation(vec![0.3]).unwrap()]).is_err());
    }

    #[test]
    fn inverse_round_trip_spot_check() {
        let perm = GridPermutation::shift(GridSpec::torus(2, 4).unwrap(), &[3, -1]).unwrap();
        let maps = vec![
            SystemMap::rotation(vec![golden(), 2f64.sqrt() - 1.0]).unwrap(),
            SystemMap::cat_map(),
            SystemMap::grid(perm.clone()),
            SystemMap::composition(vec![SystemMap::cat_map(), SystemMap::rotation(vec![0.3, 0.1]).unwrap()]).unwrap(),
        ];
        let grid = *perm.grid();
        for m in &maps {
            let model = m.natural_measure();
            for i in 0..1000 {
                let mut x = vec![0.0; 2];
                model.sample_into(7, i, &mut x);
                let orig = x.clone();
                m.step(&mut x);
                m.step_inverse(&mut x);
                let err = Space::torus(2).distance(&x, &orig);
                assert!(err < 1e-12, "{m}: {err}");
            }
        }
        // grid maps are exact on cell centers
        let g = SystemMap::grid(perm);
        for i in 0..grid.cell_count() {
            let mut x = grid.center(i);
            g.step(&mut x);
            g.step_inverse(&mut x);
            assert_eq!(x, grid.center(i));
        }
    }

    #[test]
    fn group_law() {
        let perm = GridPermutation::shift(GridSpec::torus(1, 6).unwrap(), &[5]).unwrap();
        let g = SystemMap::grid(perm);
        let r = SystemMap::rotation(vec![golden()]).unwrap();
        let c = SystemMap::cat_map();
        for (a, b) in [(0u64, 7u64), (3, 11), (40, 17), (100, 1)] {
            let x = Point::on_torus(vec![0.3141]);
            let whole = iterate(&g, &x, a + b).unwrap();
            let split = iterate(&g, &iterate(&g, &x, a).unwrap(), b).unwrap();
            assert_eq!(whole, split);

            let whole = iterate(&r, &x, a + b).unwrap();
            let split = iterate(&r, &iterate(&r, &x, a).unwrap(), b).unwrap();
            assert!(torus_distance(&whole, &split) < 1e-9);

            let y = Point::on_torus(vec![0.3141, 0.2718]);
            let whole = iterate(&c, &y, a.min(20) + b.min(10)).unwrap();
            let split = iterate(&c, &iterate(&c, &y, a.min(20)).unwrap(), b.min(10)).unwrap();
            assert!(torus_distance(&whole, &split) < 1e-9);
        }
    }

    fn torus_distance(a: &Point, b: &Point) -> f64 {
        crate::space::torus_distance(a, b).unwrap()
    }

    #[test]
    fn map_distance_examples() {
        let t = SystemMap::rotation(vec![0.25]).unwrap();
        let s = SystemMap::rotation(vec![0.30]).unwrap();
        assert_eq!(map_distance(&t, &t, &[], 1000, 1).unwrap(), 0.0);
        let d = map_distance(&t, &s, &[], 1000, 1).unwrap();
        assert!((d - 0.05).abs() < 1e-12, "{d}");

        let grid = GridSpec::torus(1, 5).unwrap();
        let shift = SystemMap::grid(GridPermutation::shift(grid, &[1]).unwrap());
        let id = SystemMap::identity(grid.space());
        assert_eq!(map_distance(&id, &shift, &[], 2000, 3).unwrap(), 1.0 / 32.0);
    }

    #[test]
    fn map_distance_monotone_in_samples() {
        let t = SystemMap::cat_map();
        let s = SystemMap::composition(vec![SystemMap::cat_map(), SystemMap::rotation(vec![0.01, 0.0]).unwrap()]).unwrap();
        let mut prev = 0.0;
        for n in [10, 100, 1000] {
            let d = map_distance(&t, &s, &[], n, 9).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn map_distance_on_boxes() {
        let grid = GridSpec::cube(1, 6, 4.0).unwrap();
        let id = SystemMap::identity(grid.space());
        let shift = SystemMap::grid(GridPermutation::shift(grid, &[1]).unwrap());
        assert!(map_distance(&id, &shift, &[], 10, 1).is_err());
        assert!(map_distance(&id, &shift, &[2.0, 1.0], 10, 1).is_err());
        assert_eq!(map_distance(&id, &id, &[1.0, 2.0, 4.0], 100, 1).unwrap(), 0.0);
        // one cell is 1/8; away from the wrap every sampled cell moves exactly one cell
        let w = grid.cell_width();
        let v = map_distance(&id, &shift, &[1.0, 2.0], 500, 2).unwrap();
        assert!((v - 2.0 * w / (1.0 + w)).abs() < 1e-12, "{v}");
    }
}
