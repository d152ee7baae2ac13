//! Synthetic 2D head-and-neck phantom and its dose deposition matrix.

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const TUMOR: &str = "tumor";
pub const MYELON: &str = "myelon";
pub const LEFT_PAROTIS: &str = "left_parotis";
pub const RIGHT_PAROTIS: &str = "right_parotis";
pub const UNCLASSIFIED: &str = "unclassified";

/// A disk given by its center offset from the grid center and its radius,
/// all in voxel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub dx: f64,
    pub dy: f64,
    pub radius: f64,
}

impl Disk {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = (x - self.dx, y - self.dy);
        u * u + v * v <= self.radius * self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomConfig {
    pub grid_size: usize,
    pub beams: usize,
    pub beamlets_per_beam: usize,
    /// Lateral distance between neighbouring beamlet axes.
    pub beamlet_spacing: f64,
    /// Attenuation per voxel length of depth.
    pub mu: f64,
    /// Lateral Gaussian falloff width.
    pub sigma: f64,
    pub tumor: Disk,
    pub myelon: Disk,
    pub left_parotis: Disk,
    pub right_parotis: Disk,
    pub seed: u64,
    /// Relative spread of per-beamlet output factors drawn from `seed`;
    /// zero gives identical beamlets.
    pub output_jitter: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            grid_size: 64,
            beams: 5,
            beamlets_per_beam: 32,
            beamlet_spacing: 1.0,
            mu: 0.05,
            sigma: 1.0,
            tumor: Disk {
                dx: 0.0,
                dy: 0.0,
                radius: 8.0,
            },
            myelon: Disk {
                dx: 0.0,
                dy: 13.0,
                radius: 3.0,
            },
            left_parotis: Disk {
                dx: -15.0,
                dy: -3.0,
                radius: 5.0,
            },
            right_parotis: Disk {
                dx: 15.0,
                dy: -3.0,
                radius: 5.0,
            },
            seed: 0,
            output_jitter: 0.0,
        }
    }
}

fn parse_disk(kv: &KeyValues, key: &str, default: Disk) -> Result<Disk> {
    match kv.get_list::<f64>(key)? {
        None => Ok(default),
        Some(v) if v.len() == 3 => Ok(Disk {
            dx: v[0],
            dy: v[1],
            radius: v[2],
        }),
        Some(_) => Err(Error::Config(format!("`{key}` needs `dx dy radius`"))),
    }
}

impl PhantomConfig {
    /// Reads the phantom keys from a key-value file; missing keys keep their
    /// defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = PhantomConfig::default();
        let cfg = PhantomConfig {
            grid_size: kv.get_or("grid_size", d.grid_size)?,
            beams: kv.get_or("beams", d.beams)?,
            beamlets_per_beam: kv.get_or("beamlets_per_beam", d.beamlets_per_beam)?,
            beamlet_spacing: kv.get_or("beamlet_spacing", d.beamlet_spacing)?,
            mu: kv.get_or("mu", d.mu)?,
            sigma: kv.get_or("sigma", d.sigma)?,
            tumor: parse_disk(kv, "tumor", d.tumor)?,
            myelon: parse_disk(kv, "myelon", d.myelon)?,
            left_parotis: parse_disk(kv, "left_parotis", d.left_parotis)?,
            right_parotis: parse_disk(kv, "right_parotis", d.right_parotis)?,
            seed: kv.get_or("seed", d.seed)?,
            output_jitter: kv.get_or("output_jitter", d.output_jitter)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let cfg = Self::from_key_values(&kv)?;
        kv.reject_unknown()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let disk = |d: &Disk| format!("{} {} {}", d.dx, d.dy, d.radius);
        format!(
            "grid_size = {}\nbeams = {}\nbeamlets_per_beam = {}\nbeamlet_spacing = {}\nmu = {}\nsigma = {}\n\
             tumor = {}\nmyelon = {}\nleft_parotis = {}\nright_parotis = {}\nseed = {}\noutput_jitter = {}\n",
            self.grid_size,
            self.beams,
            self.beamlets_per_beam,
            self.beamlet_spacing,
            self.mu,
            self.sigma,
            disk(&self.tumor),
            disk(&self.myelon),
            disk(&self.left_parotis),
            disk(&self.right_parotis),
            self.seed,
            self.output_jitter
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 4 || self.beams == 0 || self.beamlets_per_beam == 0 {
            return Err(Error::Config(
                "phantom needs grid_size >= 4 and at least one beamlet".into(),
            ));
        }
        let positive = [self.beamlet_spacing, self.sigma];
        if positive.iter().any(|&v| !(v > 0.0) || !v.is_finite()) || !(self.mu >= 0.0) {
            return Err(Error::Config(
                "beamlet_spacing and sigma must be positive, mu nonnegative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.output_jitter) {
            return Err(Error::Config("output_jitter must lie in [0, 1)".into()));
        }
        let disks = self.organs();
        for (name, d) in &disks {
            if !(d.radius > 0.0) {
                return Err(Error::Config(format!("{name} radius must be positive")));
            }
        }
        for i in 0..disks.len() {
            for j in i + 1..disks.len() {
                let (a, b) = (disks[i].1, disks[j].1);
                let dist = ((a.dx - b.dx).powi(2) + (a.dy - b.dy).powi(2)).sqrt();
                if dist < a.radius + b.radius {
                    return Err(Error::Config(format!(
                        "structures {} and {} overlap",
                        disks[i].0, disks[j].0
                    )));
                }
            }
        }
        Ok(())
    }

    fn organs(&self) -> [(&'static str, Disk); 4] {
        [
            (TUMOR, self.tumor),
            (MYELON, self.myelon),
            (LEFT_PAROTIS, self.left_parotis),
            (RIGHT_PAROTIS, self.right_parotis),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    pub name: String,
    pub voxels: Vec<usize>,
}

/// Dense dose matrix (voxels × beamlets, row-major) with named structures.
#[derive(Clone, Debug, PartialEq)]
pub struct DoseModel {
    grid_size: usize,
    n_voxels: usize,
    n_beamlets: usize,
    p: Vec<f64>,
    structures: Vec<Structure>,
}

impl DoseModel {
    pub fn new(
        grid_size: usize,
        n_beamlets: usize,
        p: Vec<f64>,
        structures: Vec<Structure>,
    ) -> Result<Self> {
        let n_voxels = grid_size * grid_size;
        if p.len() != n_voxels * n_beamlets {
            return Err(Error::Config(format!(
                "dose matrix has {} entries, expected {} x {}",
                p.len(),
                n_voxels,
                n_beamlets
            )));
        }
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "dose matrix entries must be finite and nonnegative".into(),
            ));
        }
        let mut owner = vec![false; n_voxels];
        for s in &structures {
            for &v in &s.voxels {
                if v >= n_voxels {
                    return Err(Error::Config(format!(
                        "voxel {v} outside the grid in {}",
                        s.name
                    )));
                }
                if owner[v] {
                    return Err(Error::Config(format!(
                        "voxel {v} belongs to two structures"
                    )));
                }
                owner[v] = true;
            }
        }
        Ok(DoseModel {
            grid_size,
            n_voxels,
            n_beamlets,
            p,
            structures,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn n_voxels(&self) -> usize {
        self.n_voxels
    }

    pub fn n_beamlets(&self) -> usize {
        self.n_beamlets
    }

    pub fn matrix(&self) -> &[f64] {
        &self.p
    }

    pub fn row(&self, voxel: usize) -> &[f64] {
        &self.p[voxel * self.n_beamlets..(voxel + 1) * self.n_beamlets]
    }

    pub fn structures(&self) -> &[Structure] {
        &self.structures
    }

    pub fn structure(&self, name: &str) -> Result<&Structure> {
        self.structures
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("unknown structure `{name}`")))
    }

    /// d = P x over all voxels.
    pub fn dose(&self, x: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.n_beamlets, x.len())?;
        Ok((0..self.n_voxels)
            .map(|v| crate::vector::dot(self.row(v), x))
            .collect())
    }

    /// Writes `dose_matrix.csv`, `structures.csv` and `model.cfg` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut out = String::new();
        let header: Vec<String> = (0..self.n_beamlets).map(|j| format!("b{j}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for v in 0..self.n_voxels {
            let row: Vec<String> = self.row(v).iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(dir.join("dose_matrix.csv"), out)?;
        let mut out = String::from("voxel_index,structure_name\n");
        for s in &self.structures {
            for v in &s.voxels {
                writeln!(out, "{v},{}", s.name).unwrap();
            }
        }
        fs::write(dir.join("structures.csv"), out)?;
        fs::write(
            dir.join("model.cfg"),
            format!(
                "grid_size = {}\nbeamlets = {}\n",
                self.grid_size, self.n_beamlets
            ),
        )?;
        Ok(())
    }

    /// Reads a model written by [`DoseModel::export`].
    pub fn import(dir: &Path) -> Result<Self> {
        let meta = KeyValues::parse(&fs::read_to_string(dir.join("model.cfg"))?)?;
        let grid_size: usize = meta.require("grid_size")?;
        let n_beamlets: usize = meta.require("beamlets")?;
        let text = fs::read_to_string(dir.join("dose_matrix.csv"))?;
        let mut p = Vec::with_capacity(grid_size * grid_size * n_beamlets);
        for (i, line) in text.lines().enumerate().skip(1) {
            for field in line.split(',') {
                p.push(field.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!(
                        "dose_matrix.csv line {}: bad number `{field}`",
                        i + 1
                    ))
                })?);
            }
        }
        let text = fs::read_to_string(dir.join("structures.csv"))?;
        let mut structures: Vec<Structure> = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let (v, name) = line.split_once(',').ok_or_else(|| {
                Error::Config(format!(
                    "structures.csv line {}: expected two fields",
                    i + 1
                ))
            })?;
            let v: usize = v.trim().parse().map_err(|_| {
                Error::Config(format!("structures.csv line {}: bad voxel index", i + 1))
            })?;
            let name = name.trim();
            match structures.iter_mut().find(|s| s.name == name) {
                Some(s) => s.voxels.push(v),
                None => structures.push(Structure {
                    name: name.to_string(),
                    voxels: vec![v],
                }),
            }
        }
        DoseModel::new(grid_size, n_beamlets, p, structures)
    }
}

/// Builds the phantom: a body disk filling the grid, four organ disks, the
/// remaining body voxels as unclassified tissue, and straight parallel
/// beamlets from equiangular beams with exponential depth attenuation and a
/// Gaussian lateral profile.
pub fn build_phantom(cfg: &PhantomConfig) -> Result<DoseModel> {
    cfg.validate()?;
    let n = cfg.grid_size;
    let center = (n as f64 - 1.0) / 2.0;
    let body_radius = n as f64 / 2.0;
    let inner = body_radius - 0.5;
    let n_beamlets = cfg.beams * cfg.beamlets_per_beam;

    let organs = cfg.organs();
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); organs.len() + 1];
    for row in 0..n {
        for col in 0..n {
            let (x, y) = (col as f64 - center, row as f64 - center);
            if x * x + y * y > inner * inner {
                continue;
            }
            let v = row * n + col;
            match organs.iter().position(|(_, d)| d.contains(x, y)) {
                Some(i) => sets[i].push(v),
                None => sets[organs.len()].push(v),
            }
        }
    }
    for (i, (name, _)) in organs.iter().enumerate() {
        if sets[i].is_empty() {
            return Err(Error::Config(format!(
                "structure {name} contains no voxel inside the body"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let output: Vec<f64> = (0..n_beamlets)
        .map(|_| 1.0 + cfg.output_jitter * (2.0 * rng.gen::<f64>() - 1.0))
        .collect();

    let mut p = vec![0.0; n * n * n_beamlets];
    let two_sigma_sq = 2.0 * cfg.sigma * cfg.sigma;
    for b in 0..cfg.beams {
        let theta = 2.0 * std::f64::consts::PI * b as f64 / cfg.beams as f64;
        let (dx, dy) = (theta.cos(), theta.sin());
        for row in 0..n {
            for col in 0..n {
                let (x, y) = (col as f64 - center, row as f64 - center);
                let along = x * dx + y * dy;
                let lateral = -x * dy + y * dx;
                let depth = (along + body_radius).max(0.0);
                let atten = (-cfg.mu * depth).exp();
                let v = row * n + col;
                for j in 0..cfg.beamlets_per_beam {
                    let offset = (j as f64 - (cfg.beamlets_per_beam as f64 - 1.0) / 2.0)
                        * cfg.beamlet_spacing;
                    let k = b * cfg.beamlets_per_beam + j;
                    let l = lateral - offset;
                    p[v * n_beamlets + k] = output[k] * atten * (-l * l / two_sigma_sq).exp();
                }
            }
        }
    }

    let names = [TUMOR, MYELON, LEFT_PAROTIS, RIGHT_PAROTIS, UNCLASSIFIED];
    let structures = names
        .iter()
        .zip(sets)
        .map(|(name, voxels)| Structure {
            name: name.to_string(),
            voxels,
        })
        .collect();
    DoseModel::new(n, n_beamlets, p, structures)
}
