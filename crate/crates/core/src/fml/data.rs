//! Per-device task data, the synthetic non-IID generator and a seeded sampler.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Example;

/// Generative parameters of one device's Gaussian-cluster task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Rotation applied to the shared class layout, radians.
    pub rotation: f64,
    /// One 2-D mean per class.
    pub means: Vec<[f64; 2]>,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub generator: ClusterParams,
}

impl TaskDataset {
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok(())
    }

    /// Train-set size `D_n`.
    pub fn data_size(&self) -> usize {
        self.train.len()
    }
}

/// Draws mini-batches without replacement from a seeded stream.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }

    /// A batch of `size` distinct examples; the whole set, in order, when
    /// `size >= data.len()`.
    pub fn sample(&mut self, data: &[Example], size: usize) -> Result<Vec<Example>> {
        if data.is_empty() || size == 0 {
            return Err(Error::EmptyBatch);
        }
        if size >= data.len() {
            return Ok(data.to_vec());
        }
        let mut idx = rand::seq::index::sample(&mut self.rng, data.len(), size).into_vec();
        idx.sort_unstable();
        Ok(idx.into_iter().map(|i| data[i].clone()).collect())
    }
}

/// Shape of the synthetic task family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTaskConfig {
    pub classes: usize,
    /// Distance of every class mean from the origin.
    pub radius: f64,
    /// Isotropic standard deviation of each cluster.
    pub spread: f64,
    pub train_min: usize,
    pub train_max: usize,
    pub test_size: usize,
}

impl Default for SyntheticTaskConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            radius: 2.0,
            spread: 0.8,
            train_min: 40,
            train_max: 120,
            test_size: 100,
        }
    }
}

impl SyntheticTaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synthetic tasks: {m}")));
        if self.classes < 2 {
            return bad("need at least 2 classes");
        }
        if !(self.radius > 0.0 && self.spread > 0.0) {
            return bad("radius and spread must be positive");
        }
        if self.train_min == 0 || self.train_max < self.train_min {
            return bad("train size range must satisfy 0 < min <= max");
        }
        if self.test_size == 0 {
            return bad("test size must be positive");
        }
        Ok(())
    }

    /// Class layout of device `n` of `n_devices`: evenly spaced means rotated
    /// by `noniid·π·n/N`.
    pub fn cluster_params(&self, n: usize, n_devices: usize, noniid: f64) -> ClusterParams {
        let rotation = noniid * PI * n as f64 / n_devices as f64;
        let means = (0..self.classes)
            .map(|c| {
                let angle = 2.0 * PI * c as f64 / self.classes as f64 + rotation;
                [self.radius * angle.cos(), self.radius * angle.sin()]
            })
            .collect();
        ClusterParams {
            rotation,
            means,
            spread: self.spread,
        }
    }

    pub fn generate(&self, n_devices: usize, seed: u64, noniid: f64) -> Result<Vec<TaskDataset>> {
        self.validate()?;
        if n_devices == 0 {
            return Err(Error::InvalidArgument("n_devices must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&noniid) {
            return Err(Error::InvalidArgument(format!(
                "noniid degree {noniid} outside [0, 1]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_devices)
            .map(|n| {
                let generator = self.cluster_params(n, n_devices, noniid);
                let train_len = rng.random_range(self.train_min..=self.train_max);
                let train = draw_examples(&generator, train_len, &mut rng);
                let test = draw_examples(&generator, self.test_size, &mut rng);
                Ok(TaskDataset {
                    train,
                    test,
                    generator,
                })
            })
            .collect()
    }
}

/// Balanced-ish draw: labels cycle through the classes, then points are
/// sampled around the label's mean.
fn draw_examples(p: &ClusterParams, count: usize, rng: &mut ChaCha8Rng) -> Vec<Example> {
    let noise = Normal::new(0.0, p.spread).expect("spread validated positive");
    let offset = rng.random_range(0..p.means.len());
    (0..count)
        .map(|i| {
            let label = (i + offset) % p.means.len();
            let [mx, my] = p.means[label];
            let x = mx + noise.sample(rng);
            let y = my + noise.sample(rng);
            Example::class(vec![x, y], label)
        })
        .collect()
}

/// Default-shaped synthetic family.
pub fn make_synthetic_tasks(n_devices: usize, seed: u64, noniid: f64) -> Result<Vec<TaskDataset>> {
    SyntheticTaskConfig::default().generate(n_devices, seed, noniid)
}

const DUMP_FORMAT: &str = "tofml-tasks";
const DUMP_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TaskDump {
    format: String,
    version: u32,
    tasks: Vec<TaskDataset>,
}

/// JSON text dump: `{"format":"tofml-tasks","version":1,"tasks":[...]}`.
pub fn dump_tasks(tasks: &[TaskDataset]) -> Result<String> {
    let dump = TaskDump {
        format: DUMP_FORMAT.into(),
        version: DUMP_VERSION,
        tasks: tasks.to_vec(),
    };
    serde_json::to_string(&dump).map_err(|e| Error::Format {
        what: "task dump",
        reason: e.to_string(),
    })
}

pub fn load_tasks(text: &str) -> Result<Vec<TaskDataset>> {
    let fmt = |reason: String| Error::Format {
        what: "task dump",
        reason,
    };
    let dump: TaskDump = serde_json::from_str(text).map_err(|e| fmt(e.to_string()))?;
    if dump.format != DUMP_FORMAT {
        return Err(fmt(format!("unknown format tag {:?}", dump.format)));
    }
    if dump.version != DUMP_VERSION {
        return Err(fmt(format!("unsupported version {}", dump.version)));
    }
    for t in &dump.tasks {
        t.validate()?;
    }
    Ok(dump.tasks)
}

pub fn write_tasks(path: &Path, tasks: &[TaskDataset]) -> Result<()> {
    crate::harness::io::write_atomic(path, dump_tasks(tasks)?.as_bytes())
}

pub fn read_tasks(path: &Path) -> Result<Vec<TaskDataset>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_tasks(&text)
}
