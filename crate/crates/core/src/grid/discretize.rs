use rayon::prelude::*;

use crate::error::Result;
use crate::grid::permutation::Bitmap;
use crate::grid::{GridPermutation, GridSpec};
use crate::system::SystemMap;

/// Nearest-permutation approximation of `map` on `grid`.
///
/// Cells are assigned in index order to the cell containing the image of
/// their center. When that cell is taken, the search widens ring by ring
/// (Chebyshev step distance, i.e. breadth-first over king moves) and takes
/// the lowest-index free cell of the first ring that has one.
pub fn discretize(map: &SystemMap, grid: GridSpec) -> Result<GridPermutation> {
    map.space().check_same(&grid.space())?;
    let dim = grid.dim();
    let targets: Vec<usize> = (0..grid.cell_count())
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |x, i| {
                grid.center_into(i, x);
                map.step(x);
                grid.cell_of(x)
            },
        )
        .collect();

    let mut taken = Bitmap::new(grid.cell_count());
    let mut forward = Vec::with_capacity(grid.cell_count());
    let mut ring = RingSearch::new(&grid);
    for &target in &targets {
        let cell = if !taken.get(target) {
            target
        } else {
            ring.nearest_free(target, &taken)
        };
        taken.set(cell);
        forward.push(cell as u32);
    }
    GridPermutation::from_forward(grid, forward)
}

/// Largest distance from `map(center(i))` to `center(perm(i))`, in cell widths.
pub fn displacement_in_cells(map: &SystemMap, perm: &GridPermutation) -> f64 {
    let grid = perm.grid();
    let space = grid.space();
    let dim = grid.dim();
    let worst = (0..grid.cell_count())
        .into_par_iter()
        .map_init(
            || (vec![0.0; dim], vec![0.0; dim]),
            |(x, c), i| {
                grid.center_into(i, x);
                map.step(x);
                grid.center_into(perm.apply(i), c);
                space.distance(x, c)
            },
        )
        .reduce(|| 0.0, f64::max);
    worst / grid.cell_width()
}

struct RingSearch<'a> {
    grid: &'a GridSpec,
    base: Vec<i64>,
    offset: Vec<i64>,
    coords: Vec<usize>,
}

impl<'a> RingSearch<'a> {
    fn new(grid: &'a GridSpec) -> Self {
        let d = grid.dim();
        RingSearch {
            grid,
            base: vec![0; d],
            offset: vec![0; d],
            coords: vec![0; d],
        }
    }

    fn nearest_free(&mut self, target: usize, taken: &Bitmap) -> usize {
        let n = self.grid.per_axis() as i64;
        for a in 0..self.grid.dim() {
            self.base[a] = self.grid.axis_coord(target, a) as i64;
        }
        for r in 1..=n {
            if let Some(c) = self.best_in_ring(r, taken) {
                return c;
            }
        }
        unreachable!("a bijection always leaves a free cell while cells remain unassigned")
    }

    fn best_in_ring(&mut self, r: i64, taken: &Bitmap) -> Option<usize> {
        let d = self.grid.dim();
        let n = self.grid.per_axis() as i64;
        let torus = self.grid.space().is_torus();
        let side = 2 * r + 1;
        let total = (side as u64).pow(d as u32);
        let mut best: Option<usize> = None;
        'codes: for code in 0..total {
            let mut c = code;
            let mut on_ring = false;
            for a in 0..d {
                self.offset[a] = (c % side as u64) as i64 - r;
                c /= side as u64;
                on_ring |= self.offset[a].abs() == r;
            }
            if !on_ring {
                continue;
            }
            for a in 0..d {
                let mut k = self.base[a] + self.offset[a];
                if torus {
                    k = k.rem_euclid(n);
                } else if k < 0 || k >= n {
                    continue 'codes;
                }
                self.coords[a] = k as usize;
            }
            let idx = self.grid.index_of(&self.coords);
            if !taken.get(idx) && best.is_none_or(|b| idx < b) {
                best = Some(idx);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn identity_discretizes_to_identity() {
        for g in [
            GridSpec::torus(1, 6).unwrap(),
            GridSpec::torus(2, 4).unwrap(),
            GridSpec::cube(2, 3, 2.0).unwrap(),
        ] {
            let id = SystemMap::identity(g.space());
            assert_eq!(discretize(&id, g).unwrap(), GridPermutation::identity(g));
        }
    }

    #[test]
    fn golden_rotation_at_sixteen_cells() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let g = GridSpec::torus(1, 4).unwrap();
        let p = discretize(&SystemMap::rotation(vec![golden]).unwrap(), g).unwrap();
        for i in 0..16 {
            assert_eq!(p.apply(i), (i + 10) % 16);
        }
        assert_eq!(p.cycle_decomposition().histogram, BTreeMap::from([(8, 16)]));
    }

    #[test]
    fn cat_map_bound_exhaustive() {
        let g = GridSpec::torus(2, 5).unwrap();
        let cat = SystemMap::cat_map();
        let p = discretize(&cat, g).unwrap();
        assert_eq!(p.len(), 1024);
        for i in 0..p.len() {
            assert_eq!(p.apply_inverse(p.apply(i)), i);
        }
        assert!(displacement_in_cells(&cat, &p) <= 1.0 + 2f64.sqrt());
    }

    #[test]
    fn ring_search_prefers_nearest_then_lowest_index() {
        let g = GridSpec::torus(2, 3).unwrap();
        let mut taken = Bitmap::new(g.cell_count());
        let target = g.index_of(&[4, 4]);
        taken.set(target);
        let mut ring = RingSearch::new(&g);
        assert_eq!(ring.nearest_free(target, &taken), g.index_of(&[3, 3]));
        for c in g.neighbors(target) {
            taken.set(c);
        }
        // first free ring is at step distance 2; its lowest index is (2, 2)
        assert_eq!(ring.nearest_free(target, &taken), g.index_of(&[2, 2]));

        let line = GridSpec::cube(1, 3, 1.0).unwrap();
        let mut taken = Bitmap::new(8);
        taken.set(0);
        taken.set(1);
        let mut ring = RingSearch::new(&line);
        // no wrap on boxes: from cell 0 the nearest free cell is 2
        assert_eq!(ring.nearest_free(0, &taken), 2);
    }

    #[test]
    fn bound_holds_for_several_maps_up_to_level_six() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let maps = [
            SystemMap::rotation(vec![golden, 2f64.sqrt() - 1.0]).unwrap(),
            SystemMap::cat_map(),
            SystemMap::toral_automorphism(&[vec![1, 1], vec![0, 1]]).unwrap(),
        ];
        for level in 1..=6 {
            let g = GridSpec::torus(2, level).unwrap();
            for m in &maps {
                let p = discretize(m, g).unwrap();
                let disp = displacement_in_cells(m, &p);
                assert!(disp <= 1.0 + 2f64.sqrt(), "{m} at level {level}: {disp}");
            }
        }
    }
}
