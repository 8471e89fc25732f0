//! Link gains: per-class path loss, correlated lognormal shadowing and the
//! three-sector macro antenna pattern.
//!
//! All gains are stored linear and reciprocal: one value per geometry pair,
//! used for both link directions. Fast fading is not modeled.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{db_to_lin, Direction};
use crate::topology::{angle_diff_deg, NetworkDrop, Point};

/// Distances below this are clamped before evaluating path loss.
pub const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkClass {
    /// Macro BS to outdoor macro UE.
    MbsMue,
    /// Macro BS to an indoor femto node (one outer wall).
    MbsFemto,
    /// Femto BS to its own femto UE.
    FbsFueServing,
    /// Femto node to a femto node of a different house (two outer walls).
    FemtoToFemtoCross,
    /// Femto node to outdoor macro UE (one outer wall).
    FemtoToMue,
}

impl LinkClass {
    pub fn outer_wall_loss_db(self) -> f64 {
        match self {
            LinkClass::MbsMue | LinkClass::FbsFueServing => 0.0,
            LinkClass::MbsFemto | LinkClass::FemtoToMue => 10.0,
            LinkClass::FemtoToFemtoCross => 20.0,
        }
    }
}

/// Path loss in dB; `r` in meters, clamped to [`MIN_DISTANCE_M`].
pub fn path_loss_db(class: LinkClass, r: f64) -> f64 {
    let r = r.max(MIN_DISTANCE_M);
    match class {
        LinkClass::FbsFueServing => 38.46 + 20.0 * r.log10() + 0.7 * r,
        _ => 15.3 + 37.6 * r.log10() + class.outer_wall_loss_db(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    pub theta_3db_deg: f64,
    pub a_max_db: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self {
            theta_3db_deg: 70.0,
            a_max_db: 20.0,
        }
    }
}

impl AntennaPattern {
    /// `-min(12 (θ/θ3dB)², A_m)` in dB; θ is taken modulo 360°.
    pub fn gain_db(&self, theta_deg: f64) -> f64 {
        let t = angle_diff_deg(theta_deg, 0.0);
        -(12.0 * (t / self.theta_3db_deg).powi(2)).min(self.a_max_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowingModel {
    pub sigma_macro_db: f64,
    pub inter_site_corr: f64,
    pub intra_site_corr: f64,
    pub sigma_femto_db: f64,
}

impl Default for ShadowingModel {
    fn default() -> Self {
        Self {
            sigma_macro_db: 8.1,
            inter_site_corr: 0.5,
            intra_site_corr: 1.0,
            sigma_femto_db: 4.0,
        }
    }
}

impl ShadowingModel {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.inter_site_corr)
            && (0.0..=1.0).contains(&self.intra_site_corr)
            && self.inter_site_corr <= self.intra_site_corr
            && self.sigma_macro_db >= 0.0
            && self.sigma_femto_db >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "shadowing needs 0 <= inter_site_corr <= intra_site_corr <= 1 and sigma >= 0"
                    .into(),
            ))
        }
    }

    /// Draws one node's shadowing toward every cell. Co-sited cells are
    /// correlated by `intra_site_corr`, different sites by `inter_site_corr`.
    fn draw_macro<R: Rng + ?Sized>(
        &self,
        cells_per_site: usize,
        sites: usize,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        let common: f64 = rng.sample(StandardNormal);
        let a = self.inter_site_corr.sqrt();
        let b = (self.intra_site_corr - self.inter_site_corr).sqrt();
        let c = (1.0 - self.intra_site_corr).sqrt();
        for _ in 0..sites {
            let site: f64 = rng.sample(StandardNormal);
            for _ in 0..cells_per_site {
                let own: f64 = if c > 0.0 {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                };
                out.push(self.sigma_macro_db * (a * common + b * site + c * own));
            }
        }
    }
}

/// Shadowing in dB per directed geometry pair (reused for both directions).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Shadowing {
    /// `[ue * cells + cell]`
    pub macro_mue: Vec<f64>,
    /// `[femto * cells + cell]`, toward the femto UE.
    pub macro_fue: Vec<f64>,
    /// `[femto * ues + ue]`
    pub fbs_mue: Vec<f64>,
    /// `[femto * ues + ue]`
    pub fue_mue: Vec<f64>,
    /// `[l * femtos + j]`: femto BS `l` to femto UE `j`; the diagonal is the serving link.
    pub fbs_fue: Vec<f64>,
    /// `[l * femtos + j]`: femto UE `l` to femto BS `j`, `l != j` (diagonal unused).
    pub fue_fbs: Vec<f64>,
}

impl Shadowing {
    pub fn zeros(drop: &NetworkDrop) -> Self {
        let (c, u, n) = (drop.num_cells(), drop.macro_ues.len(), drop.num_femtos());
        Self {
            macro_mue: vec![0.0; u * c],
            macro_fue: vec![0.0; n * c],
            fbs_mue: vec![0.0; n * u],
            fue_mue: vec![0.0; n * u],
            fbs_fue: vec![0.0; n * n],
            fue_fbs: vec![0.0; n * n],
        }
    }
}

pub fn sample_shadowing<R: Rng + ?Sized>(
    drop: &NetworkDrop,
    model: &ShadowingModel,
    rng: &mut R,
) -> Shadowing {
    let sites = drop.sites.len();
    let per_site = drop.num_cells() / sites;
    let (u, n) = (drop.macro_ues.len(), drop.num_femtos());
    let mut sh = Shadowing::default();
    sh.macro_mue.reserve(u * drop.num_cells());
    for _ in 0..u {
        model.draw_macro(per_site, sites, rng, &mut sh.macro_mue);
    }
    sh.macro_fue.reserve(n * drop.num_cells());
    for _ in 0..n {
        model.draw_macro(per_site, sites, rng, &mut sh.macro_fue);
    }
    let sigma = model.sigma_femto_db;
    let mut iid = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    sh.fbs_mue = iid(n * u);
    sh.fue_mue = iid(n * u);
    sh.fbs_fue = iid(n * n);
    sh.fue_fbs = iid(n * n);
    for j in 0..n {
        sh.fue_fbs[j * n + j] = 0.0;
    }
    sh
}

/// Linear gains for every link the simulator needs, shared by UL and DL.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTables {
    pub cells: usize,
    pub ues: usize,
    pub femtos: usize,
    /// `[cell * ues + ue]`
    pub cell_mue: Vec<f64>,
    /// `[cell * femtos + j]`, macro BS to femto UE `j`.
    pub cell_fue: Vec<f64>,
    /// `[j * ues + ue]`
    pub fbs_mue: Vec<f64>,
    /// `[j * ues + ue]`
    pub fue_mue: Vec<f64>,
    /// Femto BS `j` to femto UE `j`.
    pub serving: Vec<f64>,
    /// `[l * femtos + j]`: femto BS `l` to femto UE `j`, zero on the diagonal.
    pub fbs_fue: Vec<f64>,
    /// `[l * femtos + j]`: femto UE `l` to femto BS `j`, zero on the diagonal.
    pub fue_fbs: Vec<f64>,
}

impl GainTables {
    pub fn cell_mue(&self, cell: usize, ue: usize) -> f64 {
        self.cell_mue[cell * self.ues + ue]
    }

    pub fn cell_fue(&self, cell: usize, femto: usize) -> f64 {
        self.cell_fue[cell * self.femtos + femto]
    }
}

/// Linear gain from a macro cell to a point, using the nearest wrap image.
pub fn macro_link_gain(
    drop: &NetworkDrop,
    cell: usize,
    p: Point,
    class: LinkClass,
    pattern: &AntennaPattern,
    shadow_db: f64,
) -> f64 {
    let d = drop.wrap_delta(drop.cell_position(cell), p);
    let theta = d.bearing_deg() - drop.cells[cell].azimuth_deg;
    db_to_lin(pattern.gain_db(theta) - path_loss_db(class, d.norm()) + shadow_db)
}

fn omni_gain(drop: &NetworkDrop, a: Point, b: Point, class: LinkClass, shadow_db: f64) -> f64 {
    let (r, _) = drop.wrap_distance(a, b);
    db_to_lin(-path_loss_db(class, r) + shadow_db)
}

pub fn compute_gains(drop: &NetworkDrop, sh: &Shadowing, pattern: &AntennaPattern) -> GainTables {
    let (c, u, n) = (drop.num_cells(), drop.macro_ues.len(), drop.num_femtos());
    let mut cell_mue = vec![0.0; c * u];
    let mut cell_fue = vec![0.0; c * n];
    for cell in 0..c {
        for (ue, &p) in drop.macro_ues.iter().enumerate() {
            cell_mue[cell * u + ue] =
                macro_link_gain(drop, cell, p, LinkClass::MbsMue, pattern, sh.macro_mue[ue * c + cell]);
        }
        for (j, f) in drop.femtos.iter().enumerate() {
            cell_fue[cell * n + j] =
                macro_link_gain(drop, cell, f.ue, LinkClass::MbsFemto, pattern, sh.macro_fue[j * c + cell]);
        }
    }
    let mut fbs_mue = vec![0.0; n * u];
    let mut fue_mue = vec![0.0; n * u];
    for (j, f) in drop.femtos.iter().enumerate() {
        for (ue, &p) in drop.macro_ues.iter().enumerate() {
            fbs_mue[j * u + ue] = omni_gain(drop, f.bs, p, LinkClass::FemtoToMue, sh.fbs_mue[j * u + ue]);
            fue_mue[j * u + ue] = omni_gain(drop, f.ue, p, LinkClass::FemtoToMue, sh.fue_mue[j * u + ue]);
        }
    }
    let mut serving = vec![0.0; n];
    let mut fbs_fue = vec![0.0; n * n];
    let mut fue_fbs = vec![0.0; n * n];
    for (l, fl) in drop.femtos.iter().enumerate() {
        for (j, fj) in drop.femtos.iter().enumerate() {
            if l == j {
                serving[j] = omni_gain(drop, fj.bs, fj.ue, LinkClass::FbsFueServing, sh.fbs_fue[j * n + j]);
            } else {
                fbs_fue[l * n + j] =
                    omni_gain(drop, fl.bs, fj.ue, LinkClass::FemtoToFemtoCross, sh.fbs_fue[l * n + j]);
                fue_fbs[l * n + j] =
                    omni_gain(drop, fl.ue, fj.bs, LinkClass::FemtoToFemtoCross, sh.fue_fbs[l * n + j]);
            }
        }
    }
    GainTables {
        cells: c,
        ues: u,
        femtos: n,
        cell_mue,
        cell_fue,
        fbs_mue,
        fue_mue,
        serving,
        fbs_fue,
        fue_fbs,
    }
}

/// Serves every macro UE from the cell with the largest pilot gain (all
/// cells transmit pilots at equal power). Lowest cell index wins ties.
pub fn associate_strongest(drop: &mut NetworkDrop, gains: &GainTables) {
    drop.serving_cell = (0..gains.ues)
        .map(|ue| {
            let mut best = 0;
            for cell in 1..gains.cells {
                if gains.cell_mue(cell, ue) > gains.cell_mue(best, ue) {
                    best = cell;
                }
            }
            best
        })
        .collect();
}

/// Victim-side gains seen by the femto transmitters in one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandGains {
    /// Macro receiver ids: UE indices (DL) or cell indices (UL).
    pub receivers: Vec<usize>,
    /// Row-major `receivers × femtos`.
    pub gains: Vec<f64>,
}

/// `G[k][i][j]`: gain from femto transmitter `j` to macro receiver `i` of subband `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub num_femtos: usize,
    pub subbands: Vec<SubbandGains>,
}

impl GainMatrix {
    /// Builds from nested `[k][i][j]` vectors; receiver ids are `0..M(k)`.
    pub fn from_dense(g: &[Vec<Vec<f64>>], num_femtos: usize) -> Result<Self> {
        let mut subbands = Vec::with_capacity(g.len());
        for (k, rows) in g.iter().enumerate() {
            let mut gains = Vec::with_capacity(rows.len() * num_femtos);
            for row in rows {
                if row.len() != num_femtos {
                    return Err(Error::Dimension(format!(
                        "subband {k}: row has {} entries, expected {num_femtos}",
                        row.len()
                    )));
                }
                gains.extend_from_slice(row);
            }
            subbands.push(SubbandGains {
                receivers: (0..rows.len()).collect(),
                gains,
            });
        }
        Ok(Self {
            num_femtos,
            subbands,
        })
    }

    pub fn num_subbands(&self) -> usize {
        self.subbands.len()
    }

    pub fn num_receivers(&self, k: usize) -> usize {
        self.subbands[k].receivers.len()
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.subbands[k].gains[i * self.num_femtos + j]
    }

    #[inline]
    pub fn row(&self, k: usize, i: usize) -> &[f64] {
        let n = self.num_femtos;
        &self.subbands[k].gains[i * n..(i + 1) * n]
    }

    /// Multiplies every entry by `factor` (unit normalization).
    pub fn scaled(mut self, factor: f64) -> Self {
        for sb in &mut self.subbands {
            sb.gains.iter_mut().for_each(|g| *g *= factor);
        }
        self
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "subband,receiver,femto,gain").map_err(io)?;
        for (k, sb) in self.subbands.iter().enumerate() {
            for (i, &rx) in sb.receivers.iter().enumerate() {
                for j in 0..self.num_femtos {
                    writeln!(w, "{k},{rx},{j},{:e}", self.get(k, i, j)).map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }
}

/// Gathers `G[k][i][j]` for one direction. `victims[k]` lists the macro
/// receivers of subband `k`: macro UEs in the DL, cells in the UL.
pub fn build_gain_matrix(
    gains: &GainTables,
    victims: &[Vec<usize>],
    num_subbands: usize,
    direction: Direction,
) -> Result<GainMatrix> {
    if victims.len() != num_subbands {
        return Err(Error::Dimension(format!(
            "victim lists cover {} subbands, plan has {num_subbands}",
            victims.len()
        )));
    }
    let n = gains.femtos;
    let subbands = victims
        .iter()
        .map(|rxs| {
            let mut g = Vec::with_capacity(rxs.len() * n);
            for &rx in rxs {
                match direction {
                    Direction::Downlink => g.extend((0..n).map(|j| gains.fbs_mue[j * gains.ues + rx])),
                    Direction::Uplink => g.extend_from_slice(&gains.cell_fue[rx * n..(rx + 1) * n]),
                }
            }
            SubbandGains {
                receivers: rxs.clone(),
                gains: g,
            }
        })
        .collect();
    Ok(GainMatrix {
        num_femtos: n,
        subbands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_grid, drop_users, FemtoLink, TopologyConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn antenna_reference_values() {
        let a = AntennaPattern::default();
        assert_eq!(a.gain_db(0.0), 0.0);
        assert!((a.gain_db(70.0) + 12.0).abs() < 1e-12);
        assert!((a.gain_db(180.0) + 20.0).abs() < 1e-12);
        for t in [5.0, 33.0, 90.0, 179.0] {
            assert_eq!(a.gain_db(t), a.gain_db(-t));
            assert!(a.gain_db(t) >= -20.0 && a.gain_db(t) <= 0.0);
        }
    }

    #[test]
    fn path_loss_reference_values() {
        assert!((path_loss_db(LinkClass::MbsMue, 1000.0) - 128.1).abs() < 1e-9);
        let serving = 38.46 + 20.0 * 20f64.log10() + 14.0;
        assert!((path_loss_db(LinkClass::FbsFueServing, 20.0) - serving).abs() < 1e-12);
        assert!((serving - 78.48).abs() < 0.01);
        assert!((path_loss_db(LinkClass::FemtoToMue, 100.0) - 100.5).abs() < 1e-9);
        assert_eq!(path_loss_db(LinkClass::MbsMue, 0.0), path_loss_db(LinkClass::MbsMue, 1.0));
    }

    #[test]
    fn distance_doubling_slope() {
        for class in [LinkClass::MbsMue, LinkClass::MbsFemto, LinkClass::FemtoToFemtoCross, LinkClass::FemtoToMue] {
            let d = path_loss_db(class, 400.0) - path_loss_db(class, 200.0);
            assert!((d - 37.6 * 2f64.log10()).abs() < 1e-9);
            assert!((d - 11.3).abs() < 0.05);
        }
    }

    #[test]
    fn path_loss_monotone() {
        let classes = [
            LinkClass::MbsMue,
            LinkClass::MbsFemto,
            LinkClass::FbsFueServing,
            LinkClass::FemtoToFemtoCross,
            LinkClass::FemtoToMue,
        ];
        for class in classes {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..2000 {
                let pl = path_loss_db(class, i as f64 * 0.75);
                assert!(pl >= prev);
                prev = pl;
            }
        }
    }

    fn small_drop(seed: u64) -> NetworkDrop {
        let cfg = TopologyConfig {
            num_site_rows: 2,
            num_site_cols: 3,
            macro_ues_per_cell: 4,
            femtos_per_cell: 2,
            ..Default::default()
        };
        drop_users(&build_grid(&cfg), &cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn co_sited_cells_share_shadowing() {
        let d = small_drop(1);
        let sh = sample_shadowing(&d, &ShadowingModel::default(), &mut ChaCha8Rng::seed_from_u64(2));
        let c = d.num_cells();
        for ue in 0..d.macro_ues.len() {
            for site in 0..d.sites.len() {
                let v = sh.macro_mue[ue * c + 3 * site];
                assert_eq!(v, sh.macro_mue[ue * c + 3 * site + 1]);
                assert_eq!(v, sh.macro_mue[ue * c + 3 * site + 2]);
            }
        }
    }

    #[test]
    fn macro_shadowing_moments() {
        // Monte-Carlo oracle: many single-node draws against two sites.
        let model = ShadowingModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 100_000;
        let mut buf = Vec::with_capacity(6);
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..draws {
            buf.clear();
            model.draw_macro(3, 2, &mut rng, &mut buf);
            let (a, b) = (buf[0], buf[3]);
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
        let nf = draws as f64;
        let (ma, mb) = (sa / nf, sb / nf);
        let va = saa / nf - ma * ma;
        let vb = sbb / nf - mb * mb;
        let cov = sab / nf - ma * mb;
        let s2 = 8.1f64 * 8.1;
        assert!((va / s2 - 1.0).abs() < 0.02, "var {va}");
        assert!((vb / s2 - 1.0).abs() < 0.02, "var {vb}");
        let rho = cov / (va * vb).sqrt();
        assert!((rho - 0.5).abs() < 0.02, "rho {rho}");
    }

    #[test]
    fn femto_shadowing_variance() {
        let d = small_drop(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut all = Vec::new();
        while all.len() < 100_000 {
            let sh = sample_shadowing(&d, &ShadowingModel::default(), &mut rng);
            all.extend(sh.fbs_mue);
        }
        let n = all.len() as f64;
        let m = all.iter().sum::<f64>() / n;
        let v = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        assert!((v / 16.0 - 1.0).abs() < 0.02, "var {v}");
    }

    #[test]
    fn co_located_femto_gain() {
        let mut d = small_drop(6);
        let site = d.cell_position(0);
        d.femtos = vec![FemtoLink {
            bs: site + Point::new(20.0, 0.0),
            ue: site,
        }];
        let sh = Shadowing::zeros(&d);
        let pattern = AntennaPattern::default();
        let g = compute_gains(&d, &sh, &pattern);
        let expect = db_to_lin(pattern.gain_db(0.0) - path_loss_db(LinkClass::MbsFemto, 1.0));
        assert!((g.cell_fue(0, 0) / expect - 1.0).abs() < 1e-12);
        let gm = build_gain_matrix(&g, &[vec![0, 1]], 1, Direction::Uplink).unwrap();
        assert!((gm.get(0, 0, 0) / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gains_are_positive_and_reciprocal() {
        let mut d = small_drop(8);
        let sh = sample_shadowing(&d, &ShadowingModel::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let g = compute_gains(&d, &sh, &AntennaPattern::default());
        associate_strongest(&mut d, &g);
        for v in g.cell_mue.iter().chain(&g.cell_fue).chain(&g.fbs_mue).chain(&g.serving) {
            assert!(v.is_finite() && *v > 0.0);
        }
        // Swapping endpoints leaves a geometry pair's loss unchanged.
        let f = &d.femtos[0];
        let ue = d.macro_ues[0];
        let ab = omni_gain(&d, f.bs, ue, LinkClass::FemtoToMue, 0.0);
        let ba = omni_gain(&d, ue, f.bs, LinkClass::FemtoToMue, 0.0);
        assert!((ab / ba - 1.0).abs() < 1e-12);
        for (ue, &s) in d.serving_cell.iter().enumerate() {
            for c in 0..d.num_cells() {
                assert!(g.cell_mue(c, ue) <= g.cell_mue(s, ue));
            }
        }
    }

    #[test]
    fn gain_matrix_dimension_mismatch() {
        let d = small_drop(2);
        let g = compute_gains(&d, &Shadowing::zeros(&d), &AntennaPattern::default());
        assert!(matches!(
            build_gain_matrix(&g, &[vec![0]], 4, Direction::Downlink),
            Err(Error::Dimension(_))
        ));
    }
}
