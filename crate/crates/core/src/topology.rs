//! Hexagonal macro grid on a torus, three-sector sites, and random drops of
//! macro UEs and femto links.
//!
//! Sites sit on a triangular lattice with basis vectors
//! `u = ISD·(cos 30°, sin 30°)` and `v = ISD·(0, 1)`, where the inter-site
//! distance is `ISD = √3 · cell_radius_m` (the site hexagon circumradius is
//! the cell radius). This gives flat-top site hexagons whose vertices sit at
//! 0°, 60°, ..., so sector boresights at 0°/120°/240° point at vertices.
//! Site `(row, col)` is at `col·u + row·v`. The torus is rhombic and spanned
//! by the wrap vectors `W1 = cols·u` and `W2 = rows·v`; every position lives
//! in the fundamental parallelogram `{a·W1 + b·W2 : a, b ∈ [0, 1)}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Bearing in degrees, counter-clockwise from +x, in (-180, 180].
    pub fn bearing_deg(self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub num_site_rows: usize,
    pub num_site_cols: usize,
    pub cell_radius_m: f64,
    pub sectors_per_site: usize,
    pub macro_ues_per_cell: usize,
    /// Femto links per macro cell. Zero is allowed and yields a macro-only drop.
    pub femtos_per_cell: usize,
    pub femto_link_distance_m: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            num_site_rows: 4,
            num_site_cols: 6,
            cell_radius_m: 500.0,
            sectors_per_site: 3,
            macro_ues_per_cell: 10,
            femtos_per_cell: 10,
            femto_link_distance_m: 20.0,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_site_rows == 0 || self.num_site_cols == 0 {
            return err("site grid dimensions must be at least 1");
        }
        if self.sectors_per_site == 0 || self.macro_ues_per_cell == 0 {
            return err("sectors_per_site and macro_ues_per_cell must be at least 1");
        }
        if !(self.cell_radius_m > 0.0) {
            return err("cell_radius_m must be positive");
        }
        if !(self.femto_link_distance_m > 0.0 && self.femto_link_distance_m < self.cell_radius_m)
        {
            return err("femto_link_distance_m must be in (0, cell_radius_m)");
        }
        Ok(())
    }

    pub fn inter_site_distance(&self) -> f64 {
        3f64.sqrt() * self.cell_radius_m
    }

    pub fn num_sites(&self) -> usize {
        self.num_site_rows * self.num_site_cols
    }

    pub fn num_cells(&self) -> usize {
        self.num_sites() * self.sectors_per_site
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub row: usize,
    pub col: usize,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub site: usize,
    pub sector: usize,
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemtoLink {
    pub bs: Point,
    pub ue: Point,
}

/// One Monte-Carlo realization. Indices are zero-based; positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDrop {
    pub rows: usize,
    pub cols: usize,
    pub inter_site_distance_m: f64,
    pub sites: Vec<Site>,
    pub cells: Vec<Cell>,
    pub macro_ues: Vec<Point>,
    /// Serving cell per macro UE; empty until association has run.
    pub serving_cell: Vec<usize>,
    pub femtos: Vec<FemtoLink>,
    pub wrap_vectors: [Point; 2],
}

/// Builds sites and cells only.
pub fn build_grid(config: &TopologyConfig) -> NetworkDrop {
    let isd = config.inter_site_distance();
    let (rows, cols) = (config.num_site_rows, config.num_site_cols);
    let u = lattice_u(isd);
    let v = lattice_v(isd);
    let mut sites = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            sites.push(Site {
                row,
                col,
                position: u * col as f64 + v * row as f64,
            });
        }
    }
    let sectors = config.sectors_per_site;
    let mut cells = Vec::with_capacity(sites.len() * sectors);
    for site in 0..sites.len() {
        for sector in 0..sectors {
            cells.push(Cell {
                site,
                sector,
                azimuth_deg: 360.0 * sector as f64 / sectors as f64,
            });
        }
    }
    NetworkDrop {
        rows,
        cols,
        inter_site_distance_m: isd,
        sites,
        cells,
        macro_ues: Vec::new(),
        serving_cell: Vec::new(),
        femtos: Vec::new(),
        wrap_vectors: [u * cols as f64, v * rows as f64],
    }
}

fn lattice_u(isd: f64) -> Point {
    Point::new(isd * 30f64.to_radians().cos(), isd * 0.5)
}

fn lattice_v(isd: f64) -> Point {
    Point::new(0.0, isd)
}

/// Places macro UEs and femto links uniformly over the torus. Serving cells
/// are assigned afterwards from pilot strengths (see
/// [`crate::channel::associate_strongest`]).
pub fn drop_users<R: Rng + ?Sized>(
    grid: &NetworkDrop,
    config: &TopologyConfig,
    rng: &mut R,
) -> NetworkDrop {
    let mut drop = grid.clone();
    let n_cells = grid.cells.len();
    drop.macro_ues = (0..config.macro_ues_per_cell * n_cells)
        .map(|_| drop.uniform_point(rng))
        .collect();
    drop.serving_cell.clear();
    let d = config.femto_link_distance_m;
    drop.femtos = (0..config.femtos_per_cell * n_cells)
        .map(|_| {
            let bs = drop.uniform_point(rng);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let ue = drop.wrap_into_domain(bs + Point::new(d * phi.cos(), d * phi.sin()));
            FemtoLink { bs, ue }
        })
        .collect();
    drop
}

impl NetworkDrop {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_femtos(&self) -> usize {
        self.femtos.len()
    }

    pub fn cell_position(&self, cell: usize) -> Point {
        self.sites[self.cells[cell].site].position
    }

    /// Torus coordinates `(a, b)` with `p = a·W1 + b·W2`.
    pub fn lattice_coords(&self, p: Point) -> (f64, f64) {
        let [w1, w2] = self.wrap_vectors;
        // W2 is vertical, so the system is lower triangular.
        let a = p.x / w1.x;
        let b = (p.y - a * w1.y) / w2.y;
        (a, b)
    }

    fn from_coords(&self, a: f64, b: f64) -> Point {
        let [w1, w2] = self.wrap_vectors;
        w1 * a + w2 * b
    }

    fn uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen();
        self.from_coords(a, b)
    }

    pub fn wrap_into_domain(&self, p: Point) -> Point {
        let (a, b) = self.lattice_coords(p);
        let (mut a, mut b) = (a - a.floor(), b - b.floor());
        // floor can round to exactly 1.0 for tiny negative inputs
        if a >= 1.0 {
            a = 0.0;
        }
        if b >= 1.0 {
            b = 0.0;
        }
        self.from_coords(a, b)
    }

    pub fn in_domain(&self, p: Point) -> bool {
        let (a, b) = self.lattice_coords(p);
        let eps = 1e-12;
        (-eps..1.0 + eps).contains(&a) && (-eps..1.0 + eps).contains(&b)
    }

    /// Shortest vector from `a` to any lattice image of `b`.
    pub fn wrap_delta(&self, a: Point, b: Point) -> Point {
        let d = b - a;
        let (ca, cb) = self.lattice_coords(d);
        let base = self.from_coords(ca - ca.round(), cb - cb.round());
        let [w1, w2] = self.wrap_vectors;
        let mut best = base;
        let mut best_n2 = base.x * base.x + base.y * base.y;
        for m in -1..=1 {
            for n in -1..=1 {
                if m == 0 && n == 0 {
                    continue;
                }
                let c = base + w1 * m as f64 + w2 * n as f64;
                let n2 = c.x * c.x + c.y * c.y;
                if n2 < best_n2 {
                    best = c;
                    best_n2 = n2;
                }
            }
        }
        best
    }

    /// Wrap-around distance and the image of `b` that attains it.
    pub fn wrap_distance(&self, a: Point, b: Point) -> (f64, Point) {
        let d = self.wrap_delta(a, b);
        (d.norm(), a + d)
    }

    /// Neighbor sites in the six lattice directions 30°, 90°, ..., 330°.
    /// Duplicates appear on grids smaller than 3×3.
    pub fn site_neighbors(&self, site: usize) -> [(usize, f64); 6] {
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        let r = self.sites[site].row as isize;
        let c = self.sites[site].col as isize;
        let at = |dc: isize, dr: isize| -> usize {
            let rr = (r + dr).rem_euclid(rows);
            let cc = (c + dc).rem_euclid(cols);
            (rr * cols + cc) as usize
        };
        [
            (at(1, 0), 30.0),
            (at(0, 1), 90.0),
            (at(-1, 1), 150.0),
            (at(-1, 0), 210.0),
            (at(0, -1), 270.0),
            (at(1, -1), 330.0),
        ]
    }

    /// Cell of `site` whose boresight is closest to `bearing_deg`; lowest
    /// sector wins ties.
    pub fn cell_toward(&self, site: usize, bearing_deg: f64) -> usize {
        let sectors = self.cells.len() / self.sites.len();
        let first = site * sectors;
        (first..first + sectors)
            .min_by(|&x, &y| {
                let dx = angle_diff_deg(self.cells[x].azimuth_deg, bearing_deg).abs();
                let dy = angle_diff_deg(self.cells[y].azimuth_deg, bearing_deg).abs();
                dx.total_cmp(&dy)
            })
            .expect("site has at least one cell")
    }

    /// Cells sharing a boundary with `cell`: the co-sited cells plus, for
    /// each of the two neighbor sites straddling the boresight, the
    /// neighbor's cell facing back across the shared hexagon edge.
    pub fn adjacent_cells(&self, cell: usize) -> Vec<usize> {
        let site = self.cells[cell].site;
        let az = self.cells[cell].azimuth_deg;
        let sectors = self.cells.len() / self.sites.len();
        let mut out: Vec<usize> = (site * sectors..(site + 1) * sectors)
            .filter(|&c| c != cell)
            .collect();
        for (nb, dir) in self.site_neighbors(site) {
            if nb != site && angle_diff_deg(dir, az).abs() < 60.0 {
                let facing = self.cell_toward(nb, dir + 180.0);
                if !out.contains(&facing) {
                    out.push(facing);
                }
            }
        }
        out
    }

    /// Sites on the outer ring of the row/column grid (used for
    /// edge-versus-center homogeneity checks).
    pub fn is_edge_site(&self, site: usize) -> bool {
        let s = &self.sites[site];
        s.row == 0 || s.col == 0 || s.row + 1 == self.rows || s.col + 1 == self.cols
    }
}

/// Signed difference `a - b` wrapped to (-180, 180].
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % 360.0;
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_grid() -> NetworkDrop {
        build_grid(&TopologyConfig::default())
    }

    #[test]
    fn grid_counts() {
        let g = paper_grid();
        assert_eq!(g.sites.len(), 24);
        assert_eq!(g.cells.len(), 72);
        let az: Vec<f64> = g.cells[..3].iter().map(|c| c.azimuth_deg).collect();
        assert_eq!(az, vec![0.0, 120.0, 240.0]);
    }

    #[test]
    fn single_site_grid() {
        let cfg = TopologyConfig {
            num_site_rows: 1,
            num_site_cols: 1,
            ..Default::default()
        };
        let g = build_grid(&cfg);
        assert_eq!(g.sites.len(), 1);
        assert_eq!(g.cells.len(), 3);
        let isd = cfg.inter_site_distance();
        // every non-trivial image of a point is at least one lattice pitch away
        let p = Point::new(10.0, 20.0);
        let [w1, w2] = g.wrap_vectors;
        for img in [p + w1, p + w2, p - w1 + w2] {
            assert!(g.wrap_distance(p, img).0 < 1e-6);
            assert!((img - p).norm() >= isd - 1e-9);
        }
    }

    #[test]
    fn wrap_identity_and_symmetry() {
        let g = paper_grid();
        let p = Point::new(1234.0, 567.0);
        assert!(g.wrap_distance(p, p).0.abs() < 1e-12);
        let [w1, w2] = g.wrap_vectors;
        assert!(g.wrap_distance(p, p + w1).0 < 1e-9);
        assert!(g.wrap_distance(p, p - w2).0 < 1e-9);
        let q = Point::new(4000.0, 2500.0);
        let (d1, _) = g.wrap_distance(p, q);
        let (d2, _) = g.wrap_distance(q, p);
        assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn opposite_corners_are_close() {
        let g = paper_grid();
        let [w1, w2] = g.wrap_vectors;
        let a = Point::new(1.0, 1.0);
        let far = w1 + w2 - Point::new(1.0, 1.0);
        let diag = (w1 + w2).norm();
        assert!(g.wrap_distance(a, far).0 < diag / 2.0);
    }

    #[test]
    fn wrap_matches_brute_force_images() {
        let g = paper_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let [w1, w2] = g.wrap_vectors;
        for _ in 0..2000 {
            let a = g.uniform_point(&mut rng);
            let b = g.uniform_point(&mut rng);
            let mut best = f64::INFINITY;
            for m in -2..=2 {
                for n in -2..=2 {
                    let img = b + w1 * m as f64 + w2 * n as f64;
                    best = best.min((img - a).norm());
                }
            }
            let (d, img) = g.wrap_distance(a, b);
            assert!((d - best).abs() < 1e-9, "{d} vs {best}");
            assert!(d <= (b - a).norm() + 1e-9);
            assert!(((img - a).norm() - d).abs() < 1e-9);
        }
    }

    #[test]
    fn femto_ues_at_link_distance() {
        let cfg = TopologyConfig::default();
        let g = build_grid(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = drop_users(&g, &cfg, &mut rng);
        assert_eq!(d.femtos.len(), 720);
        assert_eq!(d.macro_ues.len(), 720);
        for f in &d.femtos {
            let (dist, _) = d.wrap_distance(f.bs, f.ue);
            assert!((dist - 20.0).abs() < 1e-9);
            assert!(d.in_domain(f.bs) && d.in_domain(f.ue));
        }
        assert!(d.macro_ues.iter().all(|&p| d.in_domain(p)));
    }

    #[test]
    fn drops_are_deterministic() {
        let cfg = TopologyConfig::default();
        let g = build_grid(&cfg);
        let a = drop_users(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let b = drop_users(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn neighbors_are_one_pitch_away() {
        let g = paper_grid();
        let isd = g.inter_site_distance_m;
        for s in 0..g.sites.len() {
            let nbs = g.site_neighbors(s);
            for (nb, dir) in nbs {
                let d = g.wrap_delta(g.sites[s].position, g.sites[nb].position);
                assert!((d.norm() - isd).abs() < 1e-6);
                assert!(angle_diff_deg(d.bearing_deg(), dir).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn each_cell_has_four_neighbors() {
        let g = paper_grid();
        for c in 0..g.cells.len() {
            let adj = g.adjacent_cells(c);
            assert_eq!(adj.len(), 4, "cell {c}: {adj:?}");
            for &o in &adj {
                assert!(g.adjacent_cells(o).contains(&c), "adjacency not symmetric");
            }
        }
    }

    #[test]
    fn angle_diff_wraps() {
        assert_eq!(angle_diff_deg(10.0, 350.0), 20.0);
        assert_eq!(angle_diff_deg(350.0, 10.0), -20.0);
        assert_eq!(angle_diff_deg(180.0, 0.0), 180.0);
    }
}
