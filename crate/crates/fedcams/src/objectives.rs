//! Synthetic federated objectives with controllable cross-client
//! heterogeneity and stochastic-gradient noise. All clients share one
//! design matrix; heterogeneity enters only through per-client target
//! shifts, so heterogeneity 0 means literally identical datasets and the
//! measured global variance is exactly zero.

use crate::error::{Error, Result};
use crate::rng::{SeedSpec, StreamPurpose};
use crate::vector::ParamVector;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Objective family. The quadratic is the workhorse (closed-form minimum,
/// known smoothness); logistic and the tiny MLP exist for convex-nonsmooth
/// and nonconvex smoke tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Quadratic,
    Logistic,
    Mlp,
}

/// Everything needed to build an Objective, minus the seed (supplied at
/// build time so one config can be rerun under many seeds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub dim: usize,
    pub num_clients: usize,
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default)]
    pub noise: f64,
    pub samples_per_client: usize,
    #[serde(default)]
    pub clip_threshold: Option<f64>,
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.num_clients < 1 || self.samples_per_client < 1 {
            return Err(Error::Config(
                "dim, num_clients and samples_per_client must all be >= 1".into(),
            ));
        }
        if !(self.heterogeneity.is_finite() && self.heterogeneity >= 0.0) {
            return Err(Error::Config(
                "heterogeneity must be finite and >= 0".into(),
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config("noise must be finite and >= 0".into()));
        }
        if let Some(g) = self.clip_threshold {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Config(
                    "clip_threshold must be finite and > 0".into(),
                ));
            }
        }
        if self.kind == ObjectiveKind::Mlp {
            mlp_hidden_units(self.dim)?;
        }
        Ok(())
    }
}

/// One client's local data: row-major design matrix plus targets.
/// For quadratic and logistic the feature dimension equals the model
/// dimension; the MLP uses MLP_INPUT_DIM features and a flattened
/// parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientDataset {
    pub client: usize,
    pub feature_dim: usize,
    pub features: Vec<f64>,
    pub targets: Vec<f64>,
}

impl ClientDataset {
    pub fn samples(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.feature_dim..(j + 1) * self.feature_dim]
    }
}

pub const MLP_INPUT_DIM: usize = 4;
pub const MLP_MAX_HIDDEN: usize = 64;

/// Distance multiplier for the quadratic kind's common solution vector.
pub const QUADRATIC_SOLUTION_SCALE: f64 = 6.0;

/// Hidden-unit count implied by the parameter dimension: the flattened
/// layout W1(H x 4) + b1(H) + w2(H) + b2 needs d = 6H + 1.
fn mlp_hidden_units(dim: usize) -> Result<usize> {
    let ok = dim >= 7 && (dim - 1).is_multiple_of(MLP_INPUT_DIM + 2);
    let hidden = if ok {
        (dim - 1) / (MLP_INPUT_DIM + 2)
    } else {
        0
    };
    if !ok || hidden > MLP_MAX_HIDDEN {
        return Err(Error::Config(format!(
            "mlp parameter dim must be 6*H + 1 with 1 <= H <= {MLP_MAX_HIDDEN} (got dim {dim})"
        )));
    }
    Ok(hidden)
}

/// Immutable handle owning all client datasets; safe to share across
/// worker threads.
#[derive(Clone, Debug)]
pub struct Objective {
    kind: ObjectiveKind,
    dim: usize,
    noise: f64,
    clip_threshold: Option<f64>,
    clients: Vec<ClientDataset>,
}

/// Estimated local and global gradient variances at a point.
#[derive(Clone, Copy, Debug)]
pub struct VarianceEstimate {
    pub sigma_l_sq: f64,
    pub sigma_g_sq: f64,
}

fn draw_vec(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn matvec(rows: &[f64], width: usize, x: &[f64]) -> Vec<f64> {
    rows.chunks_exact(width)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

impl Objective {
    /// Generate the datasets this description calls for. All kinds derive
    /// the shared parts from the DataCommon stream and per-client parts
    /// from DataClient streams, so client i's data never depends on m.
    pub fn build(spec: &ObjectiveSpec, seed: &SeedSpec) -> Result<Objective> {
        spec.validate()?;
        let s = spec.samples_per_client;
        let d = spec.dim;
        let h = spec.heterogeneity;
        let mut common = seed.stream(StreamPurpose::DataCommon, 0, 0);
        let clients = match spec.kind {
            ObjectiveKind::Quadratic => {
                let matrix = draw_vec(&mut common, s * d);
                // Random direction, fixed length: the common solution sits
                // QUADRATIC_SOLUTION_SCALE units per coordinate (RMS) from the
                // zero initializer on every seed. Adaptive servers move O(eta)
                // per coordinate per round, so a nearby or seed-shrunken
                // optimum would start runs inside the overshoot regime and
                // ring instead of descend. The per-client offset scale
                // (heterogeneity) is unaffected.
                let raw = draw_vec(&mut common, d);
                let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let len = QUADRATIC_SOLUTION_SCALE * (d as f64).sqrt();
                let w_star: Vec<f64> = raw.iter().map(|v| len * v / norm).collect();
                let b_common = matvec(&matrix, d, &w_star);
                (0..spec.num_clients)
                    .map(|i| {
                        let mut cs = seed.stream(StreamPurpose::DataClient, i as u64, 0);
                        let offset = draw_vec(&mut cs, s);
                        let targets = b_common
                            .iter()
                            .zip(&offset)
                            .map(|(b, o)| b + h * o)
                            .collect();
                        ClientDataset {
                            client: i,
                            feature_dim: d,
                            features: matrix.clone(),
                            targets,
                        }
                    })
                    .collect()
            }
            ObjectiveKind::Logistic => {
                let matrix = draw_vec(&mut common, s * d);
                let w_star = draw_vec(&mut common, d);
                (0..spec.num_clients)
                    .map(|i| {
                        let mut cs = seed.stream(StreamPurpose::DataClient, i as u64, 0);
                        let offset = draw_vec(&mut cs, d);
                        let w_i: Vec<f64> =
                            w_star.iter().zip(&offset).map(|(w, o)| w + h * o).collect();
                        let targets = matvec(&matrix, d, &w_i)
                            .iter()
                            .map(|&z| if z >= 0.0 { 1.0 } else { -1.0 })
                            .collect();
                        ClientDataset {
                            client: i,
                            feature_dim: d,
                            features: matrix.clone(),
                            targets,
                        }
                    })
                    .collect()
            }
            ObjectiveKind::Mlp => {
                let p = MLP_INPUT_DIM;
                let raw = draw_vec(&mut common, p);
                let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let mu: Vec<f64> = raw.iter().map(|v| 1.5 * v / norm).collect();
                let mut base = Vec::with_capacity(s * p);
                let mut labels = Vec::with_capacity(s);
                for j in 0..s {
                    let y = if j < s.div_ceil(2) { 1.0 } else { -1.0 };
                    labels.push(y);
                    let noise_row = draw_vec(&mut common, p);
                    base.extend(mu.iter().zip(&noise_row).map(|(m, n)| y * m + n));
                }
                (0..spec.num_clients)
                    .map(|i| {
                        let mut cs = seed.stream(StreamPurpose::DataClient, i as u64, 0);
                        let shift = draw_vec(&mut cs, p);
                        let features = base
                            .chunks_exact(p)
                            .flat_map(|row| {
                                row.iter()
                                    .zip(&shift)
                                    .map(|(a, c)| a + h * c)
                                    .collect::<Vec<_>>()
                            })
                            .collect();
                        ClientDataset {
                            client: i,
                            feature_dim: p,
                            features,
                            targets: labels.clone(),
                        }
                    })
                    .collect()
            }
        };
        Ok(Objective {
            kind: spec.kind,
            dim: d,
            noise: spec.noise,
            clip_threshold: spec.clip_threshold,
            clients,
        })
    }

    /// Wrap explicit datasets (CSV loads, hand-built test fixtures).
    pub fn from_datasets(
        kind: ObjectiveKind,
        dim: usize,
        clients: Vec<ClientDataset>,
        noise: f64,
        clip_threshold: Option<f64>,
    ) -> Result<Objective> {
        if clients.is_empty() {
            return Err(Error::Config("need at least one client dataset".into()));
        }
        let expected_fd = match kind {
            ObjectiveKind::Mlp => {
                mlp_hidden_units(dim)?;
                MLP_INPUT_DIM
            }
            _ => dim,
        };
        let samples = clients[0].samples();
        if samples == 0 {
            return Err(Error::Config("client datasets must be non-empty".into()));
        }
        for ds in &clients {
            if ds.feature_dim != expected_fd {
                return Err(Error::Config(format!(
                    "client {} has feature dim {}, expected {expected_fd}",
                    ds.client, ds.feature_dim
                )));
            }
            if ds.samples() != samples || ds.features.len() != samples * expected_fd {
                return Err(Error::Config(format!(
                    "client {} has inconsistent sample count",
                    ds.client
                )));
            }
        }
        Ok(Objective {
            kind,
            dim,
            noise,
            clip_threshold,
            clients,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn samples_per_client(&self) -> usize {
        self.clients[0].samples()
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn client_data(&self, i: usize) -> Result<&ClientDataset> {
        self.clients.get(i).ok_or(Error::UnknownClient {
            id: i,
            num_clients: self.clients.len(),
        })
    }

    fn check_model_dim(&self, x: &ParamVector) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: x.dim(),
                right: self.dim,
            });
        }
        Ok(())
    }

    fn row_loss(&self, ds: &ClientDataset, x: &[f64], j: usize) -> f64 {
        let row = ds.row(j);
        match self.kind {
            ObjectiveKind::Quadratic => {
                let r = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - ds.targets[j];
                0.5 * r * r
            }
            ObjectiveKind::Logistic => {
                let z: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                softplus(-ds.targets[j] * z)
            }
            ObjectiveKind::Mlp => {
                let (out, _) = mlp_forward(x, row);
                softplus(-ds.targets[j] * out)
            }
        }
    }

    /// Add this row's loss gradient into acc (unscaled).
    fn add_row_gradient(&self, ds: &ClientDataset, x: &[f64], j: usize, acc: &mut [f64]) {
        let row = ds.row(j);
        match self.kind {
            ObjectiveKind::Quadratic => {
                let r = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - ds.targets[j];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += r * v;
                }
            }
            ObjectiveKind::Logistic => {
                let y = ds.targets[j];
                let z: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                let g = -y * sigmoid(-y * z);
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += g * v;
                }
            }
            ObjectiveKind::Mlp => {
                let y = ds.targets[j];
                let (out, hidden) = mlp_forward(x, row);
                let g_out = -y * sigmoid(-y * out);
                mlp_backward(x, row, &hidden, g_out, acc);
            }
        }
    }

    /// F_i(x): mean per-sample loss over client i's data.
    pub fn client_loss(&self, i: usize, x: &ParamVector) -> Result<f64> {
        self.check_model_dim(x)?;
        let ds = self.client_data(i)?;
        let s = ds.samples();
        let total: f64 = (0..s).map(|j| self.row_loss(ds, x.as_slice(), j)).sum();
        Ok(total / s as f64)
    }

    /// f(x) = (1/m) sum_i F_i(x), exact over all data.
    pub fn loss(&self, x: &ParamVector) -> Result<f64> {
        let m = self.clients.len();
        let mut total = 0.0;
        for i in 0..m {
            total += self.client_loss(i, x)?;
        }
        Ok(total / m as f64)
    }

    /// Exact per-client gradient of F_i.
    pub fn client_gradient(&self, i: usize, x: &ParamVector) -> Result<ParamVector> {
        self.check_model_dim(x)?;
        let ds = self.client_data(i)?;
        let s = ds.samples();
        let mut acc = vec![0.0; self.dim];
        for j in 0..s {
            self.add_row_gradient(ds, x.as_slice(), j, &mut acc);
        }
        for a in &mut acc {
            *a /= s as f64;
        }
        Ok(ParamVector::from_vec(acc))
    }

    /// Exact gradient of f: the client average, no sampling anywhere.
    pub fn full_gradient(&self, x: &ParamVector) -> Result<ParamVector> {
        self.check_model_dim(x)?;
        let m = self.clients.len();
        let mut acc = vec![0.0; self.dim];
        for i in 0..m {
            let g = self.client_gradient(i, x)?;
            for (a, &v) in acc.iter_mut().zip(g.as_slice()) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= m as f64;
        }
        Ok(ParamVector::from_vec(acc))
    }

    /// Unbiased estimator of grad F_i(x): a mini-batch of rows drawn with
    /// replacement (the full dataset, deterministically, when batch covers
    /// it), plus optional Gaussian noise with per-coordinate std
    /// noise/sqrt(d), then l2 clipping if a threshold is set.
    pub fn stochastic_gradient(
        &self,
        i: usize,
        x: &ParamVector,
        batch: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<ParamVector> {
        self.check_model_dim(x)?;
        if batch == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        let ds = self.client_data(i)?;
        let s = ds.samples();
        let mut acc = vec![0.0; self.dim];
        let count = if batch >= s {
            for j in 0..s {
                self.add_row_gradient(ds, x.as_slice(), j, &mut acc);
            }
            s
        } else {
            for _ in 0..batch {
                let j = rng.gen_range(0..s);
                self.add_row_gradient(ds, x.as_slice(), j, &mut acc);
            }
            batch
        };
        for a in &mut acc {
            *a /= count as f64;
        }
        if self.noise > 0.0 {
            let std = self.noise / (self.dim as f64).sqrt();
            for a in &mut acc {
                *a += std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let mut g = ParamVector::from_vec(acc);
        if let Some(limit) = self.clip_threshold {
            let norm = g.l2_norm();
            if norm > limit {
                g = g.scale(limit / norm);
            }
        }
        Ok(g)
    }

    /// Monte Carlo local variance plus exact global variance at x.
    /// sigma_l^2 averages ||g - grad F_i(x)||^2 over clients and draws at
    /// the given batch size; sigma_g^2 is (1/m) sum ||grad F_i - grad f||^2.
    pub fn measure_variances(
        &self,
        x: &ParamVector,
        draws: usize,
        batch: usize,
        seed: &SeedSpec,
    ) -> Result<VarianceEstimate> {
        if draws < 1 {
            return Err(Error::Config("draws must be >= 1".into()));
        }
        let m = self.clients.len();
        let mut local_acc = 0.0;
        for i in 0..m {
            let exact = self.client_gradient(i, x)?;
            for draw in 0..draws {
                let mut rng = seed.stream(StreamPurpose::Variance, i as u64, draw as u64);
                let g = self.stochastic_gradient(i, x, batch, &mut rng)?;
                local_acc += g.sub(&exact)?.l2_norm_sq();
            }
        }
        // Dispersion around the mean, computed on deviations from client
        // 0's gradient. Variance is translation-invariant, and centering
        // first makes the result exactly zero when all client gradients
        // are bit-identical (summing m copies and dividing by m need not
        // return the original value in floating point).
        let anchor = self.client_gradient(0, x)?;
        let mut devs = Vec::with_capacity(m);
        let mut dev_mean = ParamVector::zeros(self.dim);
        for i in 0..m {
            let dev = self.client_gradient(i, x)?.sub(&anchor)?;
            dev_mean = dev_mean.add(&dev)?;
            devs.push(dev);
        }
        dev_mean = dev_mean.scale(1.0 / m as f64);
        let mut global_acc = 0.0;
        for dev in &devs {
            global_acc += dev.sub(&dev_mean)?.l2_norm_sq();
        }
        Ok(VarianceEstimate {
            sigma_l_sq: local_acc / (m * draws) as f64,
            sigma_g_sq: global_acc / m as f64,
        })
    }

    /// Closed-form minimizer of the quadratic by solving the normal
    /// equations with a dense Cholesky factorization.
    pub fn minimizer(&self) -> Result<ParamVector> {
        if self.kind != ObjectiveKind::Quadratic {
            return Err(Error::Config(
                "closed-form minimizer exists only for quadratic".into(),
            ));
        }
        let d = self.dim;
        let m = self.clients.len();
        let s = self.samples_per_client();
        let scale = 1.0 / (m * s) as f64;
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for ds in &self.clients {
            for j in 0..ds.samples() {
                let row = ds.row(j);
                for a in 0..d {
                    rhs[a] += scale * row[a] * ds.targets[j];
                    for b in a..d {
                        gram[a * d + b] += scale * row[a] * row[b];
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                gram[a * d + b] = gram[b * d + a];
            }
        }
        cholesky_solve(&gram, &rhs, d)
            .map(ParamVector::from_vec)
            .ok_or_else(|| {
                Error::Config("normal equations are singular (rank-deficient data)".into())
            })
    }

    /// f at the closed-form minimizer.
    pub fn min_value(&self) -> Result<f64> {
        let xstar = self.minimizer()?;
        self.loss(&xstar)
    }

    /// Write one CSV per client under dir: rows are samples, features
    /// first, target last.
    pub fn dump_csv(&self, dir: &Path) -> Result<()> {
        let io_err = |p: &Path, e: std::io::Error| Error::Io {
            path: p.display().to_string(),
            source: e,
        };
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for ds in &self.clients {
            let path = dir.join(format!("client_{:04}.csv", ds.client));
            let mut out = String::new();
            for j in 0..ds.samples() {
                for v in ds.row(j) {
                    out.push_str(&format!("{v},"));
                }
                out.push_str(&format!("{}\n", ds.targets[j]));
            }
            std::fs::write(&path, out).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }

    /// Rebuild an objective from dump_csv output. Noise and clipping are
    /// runtime knobs, not data, so they are passed in fresh.
    pub fn load_csv(
        kind: ObjectiveKind,
        dim: usize,
        dir: &Path,
        noise: f64,
        clip_threshold: Option<f64>,
    ) -> Result<Objective> {
        let io_err = |p: &Path, e: std::io::Error| Error::Io {
            path: p.display().to_string(),
            source: e,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("client_") && n.ends_with(".csv"))
                    .unwrap_or(false)
            })
            .collect();
        paths.sort();
        let mut clients = Vec::new();
        for (i, path) in paths.iter().enumerate() {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let mut features = Vec::new();
            let mut targets = Vec::new();
            let mut feature_dim = None;
            for (ln, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let cells: Vec<f64> = line
                    .split(',')
                    .map(|c| {
                        c.trim().parse::<f64>().map_err(|e| {
                            Error::Config(format!("{}:{}: bad number: {e}", path.display(), ln + 1))
                        })
                    })
                    .collect::<Result<_>>()?;
                if cells.len() < 2 {
                    return Err(Error::Config(format!(
                        "{}:{}: need at least one feature and a target",
                        path.display(),
                        ln + 1
                    )));
                }
                let fd = cells.len() - 1;
                if *feature_dim.get_or_insert(fd) != fd {
                    return Err(Error::Config(format!(
                        "{}:{}: ragged row width",
                        path.display(),
                        ln + 1
                    )));
                }
                features.extend_from_slice(&cells[..fd]);
                targets.push(cells[fd]);
            }
            let feature_dim = feature_dim
                .ok_or_else(|| Error::Config(format!("{}: empty dataset", path.display())))?;
            clients.push(ClientDataset {
                client: i,
                feature_dim,
                features,
                targets,
            });
        }
        Objective::from_datasets(kind, dim, clients, noise, clip_threshold)
    }
}

/// Forward pass of the tanh MLP; returns the scalar output and hidden
/// activations for reuse in the backward pass.
fn mlp_forward(params: &[f64], row: &[f64]) -> (f64, Vec<f64>) {
    let p = MLP_INPUT_DIM;
    let hcount = (params.len() - 1) / (p + 2);
    let (w1, rest) = params.split_at(hcount * p);
    let (b1, rest) = rest.split_at(hcount);
    let (w2, b2) = rest.split_at(hcount);
    let mut hidden = Vec::with_capacity(hcount);
    let mut out = b2[0];
    for u in 0..hcount {
        let pre: f64 = w1[u * p..(u + 1) * p]
            .iter()
            .zip(row)
            .map(|(w, a)| w * a)
            .sum::<f64>()
            + b1[u];
        let h = pre.tanh();
        out += w2[u] * h;
        hidden.push(h);
    }
    (out, hidden)
}

/// Accumulate d(loss)/d(params) for one row given d(loss)/d(out).
fn mlp_backward(params: &[f64], row: &[f64], hidden: &[f64], g_out: f64, acc: &mut [f64]) {
    let p = MLP_INPUT_DIM;
    let hcount = hidden.len();
    let w2 = &params[hcount * p + hcount..hcount * p + 2 * hcount];
    let (acc_w1, acc_rest) = acc.split_at_mut(hcount * p);
    let (acc_b1, acc_rest) = acc_rest.split_at_mut(hcount);
    let (acc_w2, acc_b2) = acc_rest.split_at_mut(hcount);
    acc_b2[0] += g_out;
    for u in 0..hcount {
        let h = hidden[u];
        acc_w2[u] += g_out * h;
        let g_pre = g_out * w2[u] * (1.0 - h * h);
        acc_b1[u] += g_pre;
        for (a, &r) in acc_w1[u * p..(u + 1) * p].iter_mut().zip(row) {
            *a += g_pre * r;
        }
    }
}

/// Solve the SPD system G x = b via Cholesky; None if the factorization
/// breaks down (rank-deficient Gram matrix).
fn cholesky_solve(gram: &[f64], rhs: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..=a {
            let mut sum = gram[a * d + b];
            for k in 0..b {
                sum -= l[a * d + k] * l[b * d + k];
            }
            if a == b {
                if sum <= 1e-12 {
                    return None;
                }
                l[a * d + a] = sum.sqrt();
            } else {
                l[a * d + b] = sum / l[b * d + b];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; d];
    for a in 0..d {
        let mut sum = rhs[a];
        for k in 0..a {
            sum -= l[a * d + k] * y[k];
        }
        y[a] = sum / l[a * d + a];
    }
    let mut x = vec![0.0; d];
    for a in (0..d).rev() {
        let mut sum = y[a];
        for k in a + 1..d {
            sum -= l[k * d + a] * x[k];
        }
        x[a] = sum / l[a * d + a];
    }
    Some(x)
}
