//! Cell layout, user placement and large-scale fading.
//!
//! Base stations sit on a hexagonal lattice with spacing `√3·R` (R is the
//! hexagon circumradius). The network wraps around a sublattice of index
//! `L`, so the `L` cells tile a torus and every cell sees the same
//! neighbourhood for any `L`. Distances take the nearest image over the
//! lattice translations around the identity.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Result, SimError};
use crate::rng::{substream, TAG_POSITION, TAG_SHADOWING};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Point = [f64; 2];

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Axial neighbour directions of the hex lattice, walked in ring order.
const AXIAL_DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub cell_radius: f64,
    pub min_distance: f64,
    pub bs_positions: Vec<Point>,
    /// Per cell, the user positions (empty until [`drop_users`] runs).
    pub user_positions: Vec<Vec<Point>>,
    /// Wrap-around translations, identity first.
    pub translations: Vec<Point>,
}

fn axial_to_xy(q: i64, r: i64, spacing: f64) -> Point {
    [spacing * (q as f64 + 0.5 * r as f64), spacing * (SQRT3 / 2.0) * r as f64]
}

fn spiral_axial(count: usize) -> Vec<(i64, i64)> {
    let mut out = vec![(0, 0)];
    let mut ring = 1i64;
    while out.len() < count {
        let (mut q, mut r) = (-ring, ring);
        for &(dq, dr) in &AXIAL_DIRS {
            for _ in 0..ring {
                out.push((q, r));
                q += dq;
                r += dr;
            }
        }
        ring += 1;
    }
    out.truncate(count);
    out
}

fn axial_norm((q, r): (i64, i64)) -> i64 {
    q * q + q * r + r * r
}

fn axial_add(a: (i64, i64), b: (i64, i64), m: i64) -> (i64, i64) {
    (a.0 + m * b.0, a.1 + m * b.1)
}

/// Lagrange-reduces a basis of an axial sublattice.
fn reduce_basis(mut b1: (i64, i64), mut b2: (i64, i64)) -> [(i64, i64); 2] {
    loop {
        if axial_norm(b2) < axial_norm(b1) {
            std::mem::swap(&mut b1, &mut b2);
        }
        // Axial inner product: q₁q₂ + (q₁r₂ + r₁q₂)/2 + r₁r₂, kept doubled.
        let dot2 = 2 * b1.0 * b2.0 + b1.0 * b2.1 + b1.1 * b2.0 + 2 * b1.1 * b2.1;
        let n1 = axial_norm(b1);
        if dot2.abs() <= n1 {
            return [b1, b2];
        }
        let m = (dot2 as f64 / (2 * n1) as f64).round() as i64;
        b2 = axial_add(b2, b1, -m);
    }
}

/// Reduced basis (axial coordinates) of the wrap-around lattice for `cells`
/// cells: among all index-`cells` sublattices of the hex grid, the one whose
/// shortest vector is longest, so images are as far apart as possible. For
/// hexagonal counts this is the usual `i² + ij + j²` cluster.
pub fn wrap_lattice(cells: usize) -> [(i64, i64); 2] {
    let n = cells as i64;
    let mut best: Option<[(i64, i64); 2]> = None;
    let mut best_key = (0, 0);
    for a in (1..=n).filter(|a| n % a == 0) {
        let d = n / a;
        for b in 0..a {
            let basis = reduce_basis((a, 0), (b, d));
            let key = (axial_norm(basis[0]), axial_norm(basis[1]));
            // Longest shortest vector, then the most balanced second vector.
            if best.is_none() || key.0 > best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
                best = Some(basis);
                best_key = key;
            }
        }
    }
    best.expect("cells ≥ 1")
}

/// Whether two axial points differ by a vector of the lattice spanned by `basis`.
fn congruent(p: (i64, i64), q: (i64, i64), basis: &[(i64, i64); 2]) -> bool {
    let (dq, dr) = (p.0 - q.0, p.1 - q.1);
    let [(a, b), (c, d)] = *basis;
    let det = a * d - b * c;
    // Solve m·(a,b) + n·(c,d) = (dq,dr) over the integers.
    let m = dq * d - dr * c;
    let n = a * dr - b * dq;
    m % det == 0 && n % det == 0
}

/// One representative per lattice coset, taken in spiral order so the cells
/// form a compact patch around the origin.
fn cell_sites(cells: usize, basis: &[(i64, i64); 2]) -> Vec<(i64, i64)> {
    let mut sites: Vec<(i64, i64)> = Vec::with_capacity(cells);
    let mut ring_size = 1;
    while sites.len() < cells {
        ring_size += 1;
        sites.clear();
        for p in spiral_axial(3 * ring_size * (ring_size + 1) + 1) {
            if sites.len() == cells {
                break;
            }
            if !sites.iter().any(|&s| congruent(p, s, basis)) {
                sites.push(p);
            }
        }
    }
    sites
}

pub fn build_layout(config: &SystemConfig) -> CellGeometry {
    let spacing = SQRT3 * config.cell_radius;
    let basis = wrap_lattice(config.num_cells);
    let bs_positions = cell_sites(config.num_cells, &basis)
        .into_iter()
        .map(|(q, r)| axial_to_xy(q, r, spacing))
        .collect();
    let mut shifts: Vec<(i64, i64)> = (-2..=2)
        .flat_map(|m| (-2..=2).map(move |n| (m, n)))
        .map(|(m, n)| axial_add(axial_add((0, 0), basis[0], m), basis[1], n))
        .collect();
    shifts.sort_by_key(|&s| (axial_norm(s), s));
    shifts.dedup();
    let translations = shifts.into_iter().map(|(q, r)| axial_to_xy(q, r, spacing)).collect();
    CellGeometry {
        cell_radius: config.cell_radius,
        min_distance: config.min_distance,
        bs_positions,
        user_positions: vec![Vec::new(); config.num_cells],
        translations,
    }
}

impl CellGeometry {
    pub fn num_cells(&self) -> usize {
        self.bs_positions.len()
    }

    /// Wrap-around distance from `point` to the base station of cell `bs`.
    pub fn wrapped_distance(&self, point: Point, bs: usize) -> f64 {
        let b = self.bs_positions[bs];
        self.translations
            .iter()
            .map(|t| (point[0] - b[0] - t[0]).hypot(point[1] - b[1] - t[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Wrapped BS-to-BS distances seen from `cell`, sorted.
    pub fn neighbour_distances(&self, cell: usize) -> Vec<f64> {
        let mut d: Vec<f64> = (0..self.num_cells())
            .filter(|&l| l != cell)
            .map(|l| self.wrapped_distance(self.bs_positions[cell], l))
            .collect();
        d.sort_by(f64::total_cmp);
        d
    }

    /// Whether `point` lies in the hexagonal cell around base station `cell`
    /// (boundary included).
    pub fn in_cell(&self, point: Point, cell: usize) -> bool {
        let b = self.bs_positions[cell];
        in_unit_hexagon([
            (point[0] - b[0]) / self.cell_radius,
            (point[1] - b[1]) / self.cell_radius,
        ])
    }
}

/// Pointy-top hexagon of circumradius 1 centred at the origin.
fn in_unit_hexagon(u: Point) -> bool {
    let apothem = SQRT3 / 2.0 + 1e-12;
    (0..3).all(|m| {
        let (s, c) = (m as f64 * std::f64::consts::FRAC_PI_3).sin_cos();
        (u[0] * c + u[1] * s).abs() <= apothem
    })
}

/// Uniform position in the unit hexagon with `|u| ≥ min_radius`.
fn sample_in_cell<R: Rng>(rng: &mut R, min_radius: f64) -> Point {
    loop {
        let u = [
            (rng.random::<f64>() * 2.0 - 1.0) * SQRT3 / 2.0,
            rng.random::<f64>() * 2.0 - 1.0,
        ];
        let r = u[0].hypot(u[1]);
        if r > 0.0 && r >= min_radius && in_unit_hexagon(u) {
            return u;
        }
    }
}

/// Places `K` users uniformly in every cell, outside the exclusion disc.
/// Cell `j` draws from its own substream, so its users do not depend on how
/// many other cells exist.
pub fn drop_users(geometry: &CellGeometry, config: &SystemConfig, seed: u64) -> CellGeometry {
    let radius = geometry.cell_radius;
    let min_radius = geometry.min_distance / radius;
    let mut out = geometry.clone();
    out.user_positions = geometry
        .bs_positions
        .iter()
        .enumerate()
        .map(|(j, bs)| {
            let mut rng = substream(seed, &[TAG_POSITION, j as u64]);
            (0..config.users_per_cell)
                .map(|_| {
                    let u = sample_in_cell(&mut rng, min_radius);
                    [bs[0] + radius * u[0], bs[1] + radius * u[1]]
                })
                .collect()
        })
        .collect();
    out
}

/// Large-scale gains `beta[l][j][k]` from BS `l` to user `k` of cell `j`.
///
/// Gains are relative to `reference_gain`, the gain of an unshadowed user at
/// the cell edge. Configured SNRs are defined at that reference, so every
/// formula sees the noise as `σ² · reference_gain`. Scaling the whole map
/// (gains and reference together) is a change of units and changes nothing
/// downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleMap {
    num_cells: usize,
    users_per_cell: usize,
    beta: Vec<f64>,
    reference_gain: f64,
}

impl LargeScaleMap {
    /// Builds a map from a flat `L·L·K` vector in `[l][j][k]` order.
    pub fn from_flat(num_cells: usize, users_per_cell: usize, beta: Vec<f64>) -> Result<Self> {
        let expected = num_cells * num_cells * users_per_cell;
        if beta.len() != expected {
            return Err(SimError::ShapeMismatch {
                expected: format!("{expected} gains"),
                found: format!("{}", beta.len()),
            });
        }
        if let Some(bad) = beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(SimError::InvalidConfig(format!("large-scale gain {bad} is not finite and >= 0")));
        }
        Ok(LargeScaleMap {
            num_cells,
            users_per_cell,
            beta,
            reference_gain: 1.0,
        })
    }

    pub fn from_fn(num_cells: usize, users_per_cell: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut beta = Vec::with_capacity(num_cells * num_cells * users_per_cell);
        for l in 0..num_cells {
            for j in 0..num_cells {
                for k in 0..users_per_cell {
                    beta.push(f(l, j, k));
                }
            }
        }
        LargeScaleMap {
            num_cells,
            users_per_cell,
            beta,
            reference_gain: 1.0,
        }
    }

    #[inline]
    pub fn index(&self, l: usize, j: usize, k: usize) -> usize {
        (l * self.num_cells + j) * self.users_per_cell + k
    }

    #[inline]
    pub fn get(&self, l: usize, j: usize, k: usize) -> f64 {
        self.beta[self.index(l, j, k)]
    }

    pub fn set(&mut self, l: usize, j: usize, k: usize, value: f64) {
        let i = self.index(l, j, k);
        self.beta[i] = value;
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.beta
    }

    pub fn reference_gain(&self) -> f64 {
        self.reference_gain
    }

    /// Serving-cell gains `beta[j][j][k]` of cell `j`.
    pub fn serving_gains(&self, j: usize) -> Vec<f64> {
        (0..self.users_per_cell).map(|k| self.get(j, j, k)).collect()
    }

    /// The same physical system expressed in units `factor` times smaller.
    pub fn scaled(&self, factor: f64) -> Self {
        LargeScaleMap {
            num_cells: self.num_cells,
            users_per_cell: self.users_per_cell,
            beta: self.beta.iter().map(|b| b * factor).collect(),
            reference_gain: self.reference_gain * factor,
        }
    }

    /// Noise power in the map's gain units.
    pub fn effective_noise(&self, config: &SystemConfig) -> f64 {
        config.noise_power * self.reference_gain
    }
}

/// Distance-based gain `(d/R)^(-α)` with a shadowing term in dB.
pub fn path_gain(distance: f64, cell_radius: f64, exponent: f64, shadowing_db: f64) -> f64 {
    (distance / cell_radius).powf(-exponent) * 10f64.powf(shadowing_db / 10.0)
}

pub fn compute_large_scale(geometry: &CellGeometry, config: &SystemConfig, seed: u64) -> Result<LargeScaleMap> {
    let cells = geometry.num_cells();
    let users = config.users_per_cell;
    if geometry.user_positions.len() != cells || geometry.user_positions.iter().any(|u| u.len() != users) {
        return Err(SimError::ShapeMismatch {
            expected: format!("{cells} cells x {users} users"),
            found: format!(
                "{:?}",
                geometry.user_positions.iter().map(Vec::len).collect::<Vec<_>>()
            ),
        });
    }
    let mut beta = Vec::with_capacity(cells * cells * users);
    for l in 0..cells {
        for j in 0..cells {
            let mut rng = substream(seed, &[TAG_SHADOWING, l as u64, j as u64]);
            for k in 0..users {
                let d = geometry.wrapped_distance(geometry.user_positions[j][k], l);
                let z: f64 = StandardNormal.sample(&mut rng);
                beta.push(path_gain(
                    d,
                    geometry.cell_radius,
                    config.path_loss_exponent,
                    config.shadowing_db * z,
                ));
            }
        }
    }
    LargeScaleMap::from_flat(cells, users, beta)
}

/// Geometry plus gains for one user drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub geometry: CellGeometry,
    pub beta: LargeScaleMap,
}

impl Scenario {
    pub fn generate(config: &SystemConfig, seed: u64) -> Result<Self> {
        let geometry = drop_users(&build_layout(config), config, seed);
        let beta = compute_large_scale(&geometry, config, seed)?;
        Ok(Scenario { geometry, beta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(cells: usize) -> SystemConfig {
        SystemConfig {
            num_cells: cells,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn single_cell_layout() {
        let g = build_layout(&config(1));
        assert_eq!(g.bs_positions, vec![[0.0, 0.0]]);
        assert!(g.neighbour_distances(0).is_empty());
    }

    #[test]
    fn two_cells_one_spacing_apart() {
        let g = build_layout(&config(2));
        let d = g.wrapped_distance(g.bs_positions[0], 1);
        let direct = (g.bs_positions[1][0] - g.bs_positions[0][0]).hypot(g.bs_positions[1][1] - g.bs_positions[0][1]);
        assert!((d - 2.0 * 500.0 * 30f64.to_radians().cos()).abs() < 1e-9);
        assert!((d - direct).abs() < 1e-9);
        assert!((d - 866.025_403_784).abs() < 1e-6);
    }

    #[test]
    fn seven_cells_symmetric_neighbourhood() {
        let g = build_layout(&config(7));
        let spacing = SQRT3 * 500.0;
        for cell in 0..7 {
            let d = g.neighbour_distances(cell);
            assert_eq!(d.len(), 6);
            for x in d {
                assert!((x - spacing).abs() < 1e-6, "cell {cell}: {x}");
            }
        }
    }

    #[test]
    fn every_cell_count_has_uniform_statistics() {
        let spacing = SQRT3 * 500.0;
        for cells in 2..=19 {
            let g = build_layout(&config(cells));
            let reference = g.neighbour_distances(0);
            assert!(reference[0] > spacing - 1e-6, "L={cells}: {reference:?}");
            for cell in 1..cells {
                let d = g.neighbour_distances(cell);
                for (a, b) in d.iter().zip(&reference) {
                    assert!((a - b).abs() < 1e-6, "L={cells} cell {cell}");
                }
            }
        }
    }

    #[test]
    fn wrapped_distance_is_nearest_image() {
        // Brute force over a wide window of lattice images.
        let spacing = SQRT3 * 500.0;
        for cells in [2, 5, 8, 12, 18] {
            let cfg = config(cells);
            let g = drop_users(&build_layout(&cfg), &cfg, 3);
            let basis = wrap_lattice(cells);
            for j in 0..cells {
                for &u in &g.user_positions[j] {
                    for l in 0..cells {
                        let b = g.bs_positions[l];
                        let mut best = f64::INFINITY;
                        for m in -6..=6 {
                            for n in -6..=6 {
                                let (q, r) = axial_add(axial_add((0, 0), basis[0], m), basis[1], n);
                                let t = axial_to_xy(q, r, spacing);
                                best = best.min((u[0] - b[0] - t[0]).hypot(u[1] - b[1] - t[1]));
                            }
                        }
                        assert!((g.wrapped_distance(u, l) - best).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn wrap_lattices() {
        for (cells, norm) in [(1, 1), (3, 3), (4, 4), (7, 7), (12, 12), (19, 19)] {
            let [b1, b2] = wrap_lattice(cells);
            assert_eq!((axial_norm(b1), axial_norm(b2)), (norm, norm), "L={cells}");
        }
        for cells in 1..=30 {
            let [(a, b), (c, d)] = wrap_lattice(cells);
            assert_eq!((a * d - b * c).unsigned_abs() as usize, cells);
        }
    }

    #[test]
    fn drops_are_deterministic_and_inside_cells() {
        let cfg = config(7);
        let layout = build_layout(&cfg);
        let a = drop_users(&layout, &cfg, 42);
        let b = drop_users(&layout, &cfg, 42);
        assert_eq!(a, b);
        assert_ne!(a, drop_users(&layout, &cfg, 43));
        for (j, users) in a.user_positions.iter().enumerate() {
            assert_eq!(users.len(), cfg.users_per_cell);
            for &u in users {
                assert!(a.in_cell(u, j));
                let b = a.bs_positions[j];
                assert!((u[0] - b[0]).hypot(u[1] - b[1]) >= 35.0);
                // Own base station is the nearest one after wrapping.
                let own = a.wrapped_distance(u, j);
                for l in 0..cfg.num_cells {
                    assert!(a.wrapped_distance(u, l) >= own - 1e-9);
                }
            }
        }
    }

    /// Closed-form mean distance from the centre of a hexagon (circumradius
    /// `r`) with a disc of radius `r0` removed, for a uniform point.
    fn hexagon_minus_disc_mean_distance(r: f64, r0: f64) -> f64 {
        let a = r * SQRT3 / 2.0;
        let phi = std::f64::consts::PI / 6.0;
        let sec = 1.0 / phi.cos();
        let int_sec3 = 0.5 * (sec * phi.tan() + (sec + phi.tan()).ln());
        let moment_hex = 12.0 * a.powi(3) / 3.0 * int_sec3;
        let area_hex = 1.5 * SQRT3 * r * r;
        let moment_disc = 2.0 * std::f64::consts::PI * r0.powi(3) / 3.0;
        let area_disc = std::f64::consts::PI * r0 * r0;
        (moment_hex - moment_disc) / (area_hex - area_disc)
    }

    #[test]
    fn mean_user_distance_matches_closed_form() {
        let cfg = SystemConfig {
            num_cells: 1,
            users_per_cell: 10_000,
            ..SystemConfig::default()
        };
        let g = drop_users(&build_layout(&cfg), &cfg, 5);
        let mean = g.user_positions[0].iter().map(|u| u[0].hypot(u[1])).sum::<f64>() / 10_000.0;
        let expected = hexagon_minus_disc_mean_distance(500.0, 35.0);
        assert!((mean / expected - 1.0).abs() < 0.01, "{mean} vs {expected}");
    }

    fn single_user_at(distance: f64, shadowing_db: f64, users: usize) -> (CellGeometry, SystemConfig) {
        let cfg = SystemConfig {
            num_cells: 1,
            users_per_cell: users,
            shadowing_db,
            ..SystemConfig::default()
        };
        let mut g = build_layout(&cfg);
        g.user_positions = vec![vec![[0.0, distance]; users]];
        (g, cfg)
    }

    #[test]
    fn reference_and_half_radius_gain() {
        let (g, cfg) = single_user_at(500.0, 0.0, 1);
        let beta = compute_large_scale(&g, &cfg, 0).unwrap();
        assert!((beta.get(0, 0, 0) - 1.0).abs() < 1e-12);
        let (g, cfg) = single_user_at(250.0, 0.0, 1);
        let beta = compute_large_scale(&g, &cfg, 0).unwrap();
        assert!((beta.get(0, 0, 0) - 2f64.powf(3.8)).abs() < 1e-9);
        assert!((beta.get(0, 0, 0) - 13.929).abs() < 1e-3);
    }

    #[test]
    fn shadowing_spread_in_db() {
        let (g, cfg) = single_user_at(300.0, 8.0, 100_000);
        let beta = compute_large_scale(&g, &cfg, 11).unwrap();
        let db: Vec<f64> = beta.as_flat().iter().map(|b| 10.0 * b.log10()).collect();
        let mean = db.iter().sum::<f64>() / db.len() as f64;
        let var = db.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (db.len() - 1) as f64;
        assert!((var.sqrt() - 8.0).abs() < 0.1, "std {}", var.sqrt());
    }

    #[test]
    fn serving_gain_dominates_without_shadowing() {
        let cfg = SystemConfig {
            shadowing_db: 0.0,
            ..SystemConfig::default()
        };
        let s = Scenario::generate(&cfg, 3).unwrap();
        for j in 0..7 {
            for k in 0..10 {
                for l in 0..cfg.num_cells {
                    assert!(s.beta.get(j, j, k) >= s.beta.get(l, j, k));
                }
            }
        }
    }

    #[test]
    fn scale_covariance() {
        let cfg = SystemConfig::default();
        let big = SystemConfig {
            cell_radius: 1000.0,
            min_distance: 70.0,
            ..cfg.clone()
        };
        let a = Scenario::generate(&cfg, 9).unwrap();
        let b = Scenario::generate(&big, 9).unwrap();
        for (ua, ub) in a.geometry.user_positions.iter().flatten().zip(b.geometry.user_positions.iter().flatten()) {
            assert_eq!([2.0 * ua[0], 2.0 * ua[1]], *ub);
        }
        for (x, y) in a.beta.as_flat().iter().zip(b.beta.as_flat()) {
            assert!((x / y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scenario_determinism_and_positivity() {
        let cfg = SystemConfig::default();
        let a = Scenario::generate(&cfg, 1234).unwrap();
        assert_eq!(a, Scenario::generate(&cfg, 1234).unwrap());
        assert!(a.beta.as_flat().iter().all(|b| b.is_finite() && *b > 0.0));
    }

    #[test]
    fn cell_users_independent_of_cell_count() {
        let small = Scenario::generate(&config(2), 8).unwrap();
        let large = Scenario::generate(&config(7), 8).unwrap();
        assert_eq!(small.geometry.user_positions[1], large.geometry.user_positions[1]);
    }

    #[test]
    fn map_shape_checked() {
        assert!(LargeScaleMap::from_flat(2, 2, vec![1.0; 7]).is_err());
        assert!(LargeScaleMap::from_flat(2, 2, vec![1.0; 8]).is_ok());
    }
}
