//! Reference potentials, sensor layout, synthetic observations and the
//! operator-learning dataset.
//!
//! Observation noise is `N(0, sigma^2)` drawn independently for the real and
//! the imaginary part of each sensor value. Each quadrature node draws from its
//! own ChaCha stream keyed by `(seed, node index)`, so generation order does
//! not affect the result.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::SpectralGrid;
use crate::quadrature::QuadratureRule;
use crate::tssp::{Propagator, SolveConfig};

pub const NOISE_CONVENTION: &str = "independent N(0, sigma^2) on real and imaginary parts";

/// `V(x) = x^2`.
pub fn potential_quadratic(x: f64) -> f64 {
    x * x
}

/// `V(x, z) = (1 + z / 2) x^2`.
pub fn potential_stochastic(x: f64, z: f64) -> f64 {
    (1.0 + 0.5 * z) * x * x
}

/// Grid indices nearest to `n` equally spaced coordinates spanning the stored
/// points `x_0 .. x_{M-1}`. Sorted and distinct.
pub fn place_sensors(grid: &SpectralGrid, n: usize) -> Result<Vec<usize>> {
    let m = grid.len();
    if n == 0 || n > m {
        return Err(Error::invalid(format!("cannot place {n} sensors on {m} grid points")));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let span = (m - 1) as f64;
    let mut idx: Vec<usize> = (0..n)
        .map(|i| ((i as f64 * span / (n - 1) as f64).round() as usize).min(m - 1))
        .collect();
    idx.dedup();
    Ok(idx)
}

/// Branch-net input: real parts followed by imaginary parts.
pub fn pack_observations(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|v| v.re).chain(values.iter().map(|v| v.im)).collect()
}

/// Noisy terminal-time observations at fixed sensors for every quadrature node.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub grid: SpectralGrid,
    pub sensors: Vec<usize>,
    pub rule: QuadratureRule,
    /// `per_z[k][i]` is the observation at sensor `i` for node `k`.
    pub per_z: Vec<Vec<Complex64>>,
    pub sigma: f64,
    pub seed: u64,
    pub solve_meta: SolveConfig,
}

impl ObservationSet {
    pub fn sensor_x(&self) -> Vec<f64> {
        self.sensors.iter().map(|&j| self.grid.x(j)).collect()
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::invalid("noise level must be nonnegative"));
        }
        if self.sensors.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sensors must be sorted and distinct"));
        }
        if self.sensors.iter().any(|&s| s >= self.grid.len()) {
            return Err(Error::invalid("sensor index outside the grid"));
        }
        if self.per_z.len() != self.rule.len() || self.per_z.iter().any(|r| r.len() != self.sensors.len()) {
            return Err(Error::invalid("observation table does not match nodes x sensors"));
        }
        Ok(())
    }

    pub fn header_json(&self) -> Result<String> {
        let h = ObservationHeader {
            sigma: self.sigma,
            seed: self.seed,
            sensors: self.sensors.clone(),
            nodes: self.rule.nodes().to_vec(),
            weights: self.rule.weights().to_vec(),
            grid: GridRecord { a: self.grid.a(), b: self.grid.b(), m: self.grid.len() },
            solve_meta: self.solve_meta,
            noise: NOISE_CONVENTION.to_string(),
        };
        Ok(serde_json::to_string_pretty(&h)?)
    }

    pub fn body_csv(&self) -> String {
        let mut out = String::from("node_idx,sensor_idx,x,re_obs,im_obs\n");
        for (k, row) in self.per_z.iter().enumerate() {
            for (&s, v) in self.sensors.iter().zip(row) {
                let _ = writeln!(out, "{k},{s},{:.16e},{:.16e},{:.16e}", self.grid.x(s), v.re, v.im);
            }
        }
        out
    }

    pub fn from_parts(header: &str, body: &str) -> Result<Self> {
        let h: ObservationHeader = serde_json::from_str(header)?;
        let grid = SpectralGrid::new(h.grid.a, h.grid.b, h.grid.m)?;
        let rule = QuadratureRule::new(h.nodes, h.weights)?;
        let mut per_z = vec![Vec::with_capacity(h.sensors.len()); rule.len()];
        for (n, line) in body.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(Error::invalid(format!("observation csv line {} needs 5 columns", n + 1)));
            }
            let bad = |e: &dyn std::fmt::Display| Error::invalid(format!("observation csv line {}: {e}", n + 1));
            let k: usize = cols[0].parse().map_err(|e| bad(&e))?;
            let s: usize = cols[1].parse().map_err(|e| bad(&e))?;
            let re: f64 = cols[3].parse().map_err(|e| bad(&e))?;
            let im: f64 = cols[4].parse().map_err(|e| bad(&e))?;
            let row = per_z.get_mut(k).ok_or_else(|| bad(&"node index out of range"))?;
            if h.sensors.get(row.len()) != Some(&s) {
                return Err(bad(&"sensor order does not match the header"));
            }
            row.push(Complex64::new(re, im));
        }
        let set = ObservationSet {
            grid,
            sensors: h.sensors,
            rule,
            per_z,
            sigma: h.sigma,
            seed: h.seed,
            solve_meta: h.solve_meta,
        };
        set.validate()?;
        Ok(set)
    }

    /// Writes `<stem>.json` (header) and `<stem>.csv` (body) into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.json")), self.header_json()?)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.body_csv())?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let header = std::fs::read_to_string(dir.join(format!("{stem}.json")))?;
        let body = std::fs::read_to_string(dir.join(format!("{stem}.csv")))?;
        Self::from_parts(&header, &body)
    }
}

#[derive(Serialize, Deserialize)]
struct GridRecord {
    a: f64,
    b: f64,
    #[serde(rename = "M")]
    m: usize,
}

#[derive(Serialize, Deserialize)]
struct ObservationHeader {
    sigma: f64,
    seed: u64,
    sensors: Vec<usize>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    grid: GridRecord,
    solve_meta: SolveConfig,
    noise: String,
}

/// Noise-free terminal fields `psi(T; z)` for each `z`, solved in parallel.
pub fn terminal_fields(
    potential: &(dyn Fn(f64, f64) -> f64 + Sync),
    psi0: &WaveField,
    cfg: &SolveConfig,
    zs: &[f64],
) -> Result<Vec<WaveField>> {
    let prop = Propagator::new(*psi0.grid(), *cfg)?;
    let pts = psi0.grid().points();
    zs.par_iter()
        .map(|&z| {
            let v: Vec<f64> = pts.iter().map(|&x| potential(x, z)).collect();
            prop.solve(psi0, &v)
        })
        .collect()
}

/// Sensor values of `field` with noise from stream `stream` of `seed`.
pub fn noisy_sensor_values(
    field: &WaveField,
    sensors: &[usize],
    sigma: f64,
    seed: u64,
    stream: u64,
) -> Result<Vec<Complex64>> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise level must be nonnegative, got {sigma}")));
    }
    let clean = sensors.iter().map(|&s| field.values()[s]);
    if sigma == 0.0 {
        return Ok(clean.collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    Ok(clean
        .map(|v| v + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn generate_observations(
    true_potential: &(dyn Fn(f64, f64) -> f64 + Sync),
    psi0: &WaveField,
    cfg: &SolveConfig,
    rule: &QuadratureRule,
    sensors: &[usize],
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    let grid = *psi0.grid();
    let terminals = terminal_fields(true_potential, psi0, cfg, rule.nodes())?;
    let per_z = terminals
        .iter()
        .enumerate()
        .map(|(k, f)| noisy_sensor_values(f, sensors, sigma, seed, k as u64))
        .collect::<Result<Vec<_>>>()?;
    let set = ObservationSet {
        grid,
        sensors: sensors.to_vec(),
        rule: rule.clone(),
        per_z,
        sigma,
        seed,
        solve_meta: *cfg,
    };
    set.validate()?;
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub node: usize,
    pub z: f64,
    /// Packed observations, see [`pack_observations`].
    pub u: Vec<f64>,
    pub y: f64,
    /// Known potential at the left and right ends of the domain for this node.
    pub boundary: [f64; 2],
}

/// One record per (node, evaluation point) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticDataset {
    pub records: Vec<DatasetRecord>,
    /// Known `(V(a; z_k), V(b; z_k))` per node.
    pub targets: Vec<[f64; 2]>,
    pub eval_indices: Vec<usize>,
}

impl StochasticDataset {
    pub fn m_eval(&self) -> usize {
        self.eval_indices.len()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn records_from_jsonl(text: &str) -> Result<Vec<DatasetRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }
}

/// Evenly spread grid indices, all of them when `m_eval == M`.
pub fn evaluation_indices(grid: &SpectralGrid, m_eval: usize) -> Result<Vec<usize>> {
    let m = grid.len();
    if m_eval == 0 || m_eval > m {
        return Err(Error::invalid(format!("need 1..={m} evaluation points, got {m_eval}")));
    }
    Ok((0..m_eval).map(|i| i * m / m_eval).collect())
}

pub fn assemble_stochastic_dataset(
    obs: &ObservationSet,
    m_eval: usize,
    true_potential: &dyn Fn(f64, f64) -> f64,
) -> Result<StochasticDataset> {
    let grid = obs.grid;
    let eval_indices = evaluation_indices(&grid, m_eval)?;
    let mut records = Vec::with_capacity(m_eval * obs.rule.len());
    let mut targets = Vec::with_capacity(obs.rule.len());
    for (k, (&z, row)) in obs.rule.nodes().iter().zip(&obs.per_z).enumerate() {
        let boundary = [true_potential(grid.a(), z), true_potential(grid.b(), z)];
        targets.push(boundary);
        let u = pack_observations(row);
        for &j in &eval_indices {
            records.push(DatasetRecord { node: k, z, u: u.clone(), y: grid.x(j), boundary });
        }
    }
    Ok(StochasticDataset { records, targets, eval_indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use crate::tssp::GaussianPacket;
    use std::f64::consts::PI;

    fn grid(m: usize) -> SpectralGrid {
        SpectralGrid::new(-PI / 2.0, PI / 2.0, m).unwrap()
    }

    #[test]
    fn potentials() {
        assert_eq!(potential_stochastic(0.7, 0.0), potential_quadratic(0.7));
        assert!((potential_stochastic(1.0, 0.9603) - 1.48015).abs() < 1e-12);
        assert_eq!(potential_quadratic(0.0), 0.0);
    }

    #[test]
    fn sensor_layouts() {
        let g = grid(16);
        assert_eq!(place_sensors(&g, 16).unwrap(), (0..16).collect::<Vec<_>>());
        assert_eq!(place_sensors(&g, 2).unwrap(), vec![0, 15]);
        assert!(place_sensors(&g, 17).is_err());

        let g = grid(1000);
        let s = place_sensors(&g, 50).unwrap();
        assert_eq!(s.len(), 50);
        // nearest indices to i * 999 / 49
        for (i, &j) in s.iter().enumerate() {
            let target = i as f64 * 999.0 / 49.0;
            assert!((j as f64 - target).abs() <= 0.5);
        }
        assert!(s.windows(2).all(|w| (19..=21).contains(&(w[1] - w[0]))));
    }

    fn small_obs(sigma: f64, seed: u64) -> ObservationSet {
        let g = grid(64);
        let cfg = SolveConfig::new(0.1, 0.3, 30).unwrap();
        let psi0 = GaussianPacket::default().field(g, cfg.eps);
        let sensors = place_sensors(&g, 10).unwrap();
        generate_observations(&potential_stochastic, &psi0, &cfg, &gauss_legendre(4).unwrap(), &sensors, sigma, seed)
            .unwrap()
    }

    #[test]
    fn clean_observations_equal_solver_output() {
        let obs = small_obs(0.0, 1);
        let g = obs.grid;
        let psi0 = GaussianPacket::default().field(g, 0.1);
        let terms = terminal_fields(&potential_stochastic, &psi0, &obs.solve_meta, obs.nodes()).unwrap();
        for (row, t) in obs.per_z.iter().zip(&terms) {
            for (v, &s) in row.iter().zip(&obs.sensors) {
                assert_eq!(*v, t.values()[s]);
            }
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        assert_eq!(small_obs(0.05, 3), small_obs(0.05, 3));
        assert_ne!(small_obs(0.05, 3), small_obs(0.05, 4));
    }

    #[test]
    fn noise_statistics() {
        let g = grid(8);
        let field = WaveField::from_fn(g, |_| Complex64::new(0.3, -0.2));
        let sigma = 0.05;
        let (mut re, mut im) = (vec![], vec![]);
        for stream in 0..10_000u64 {
            let v = noisy_sensor_values(&field, &[2], sigma, 77, stream).unwrap()[0];
            re.push(v.re - 0.3);
            im.push(v.im + 0.2);
        }
        for d in [&re, &im] {
            let (mean, std) = crate::stats::mean_std(d);
            assert!((std - sigma).abs() < 0.03 * sigma, "std {std}");
            assert!(mean.abs() < 3.0 * sigma / (d.len() as f64).sqrt(), "mean {mean}");
        }
    }

    #[test]
    fn file_format_roundtrip() {
        let obs = small_obs(0.02, 5);
        let back = ObservationSet::from_parts(&obs.header_json().unwrap(), &obs.body_csv()).unwrap();
        assert_eq!(back, obs);
        let dir = tempfile::tempdir().unwrap();
        obs.save(dir.path(), "obs").unwrap();
        assert_eq!(ObservationSet::load(dir.path(), "obs").unwrap(), obs);
        let header: serde_json::Value = serde_json::from_str(&obs.header_json().unwrap()).unwrap();
        for key in ["sigma", "seed", "sensors", "nodes", "solve_meta"] {
            assert!(header.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn dataset_shapes() {
        let obs = small_obs(0.0, 1);
        let ds = assemble_stochastic_dataset(&obs, 64, &potential_stochastic).unwrap();
        assert_eq!(ds.records.len(), 64 * 4);
        assert!(ds.records.iter().all(|r| r.u.len() == 2 * obs.sensors.len()));
        let ds1 = assemble_stochastic_dataset(&obs, 1, &potential_stochastic).unwrap();
        assert_eq!(ds1.records.len(), 4);
        for (nodes, m_eval) in [(1, 1), (3, 7), (8, 32)] {
            let mut o = obs.clone();
            o.rule = gauss_legendre(nodes).unwrap();
            o.per_z = vec![o.per_z[0].clone(); nodes];
            let d = assemble_stochastic_dataset(&o, m_eval, &potential_stochastic).unwrap();
            assert_eq!(d.records.len(), nodes * m_eval);
        }
        let k = 2;
        let z = obs.nodes()[k];
        assert_eq!(ds.targets[k], [potential_stochastic(-PI / 2.0, z), potential_stochastic(PI / 2.0, z)]);
        let back = StochasticDataset::records_from_jsonl(&ds.to_jsonl().unwrap()).unwrap();
        assert_eq!(back, ds.records);
    }

    #[test]
    fn paper_scale_record_count() {
        let g = grid(1000);
        let rule = gauss_legendre(8).unwrap();
        let obs = ObservationSet {
            grid: g,
            sensors: place_sensors(&g, 50).unwrap(),
            rule,
            per_z: vec![vec![Complex64::new(0.0, 0.0); 50]; 8],
            sigma: 0.05,
            seed: 0,
            solve_meta: SolveConfig::default(),
        };
        let ds = assemble_stochastic_dataset(&obs, 1000, &potential_stochastic).unwrap();
        assert_eq!(ds.records.len(), 8000);
    }
}
