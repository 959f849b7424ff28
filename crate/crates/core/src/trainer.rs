//! The denoising trainer and sampler.
//!
//! Each training step runs two nested optimizations per molecule: an E-step
//! that infers the molecule's latent input from its noisy signals by a few
//! gradient-descent iterations starting at the origin, and an M-step that
//! jointly Adam-updates the denoiser (predicting clean signals) and the
//! latent model (reconstructing noisy signals) with the latent held fixed.
//! Sampling runs the reverse diffusion over signals attached to training-set
//! topologies, re-inferring the latent at every step.
//!
//! Determinism: every molecule stream is derived from (seed, epoch, dataset
//! index) and every sample stream from (seed, sample index), so parallel
//! scheduling never changes results. Gradient reduction is sequential in
//! dataset order.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::{ConfigError, RunConfig};
use crate::diffusion::{self, DiffusionSchedule, ScheduleError};
use crate::molgraph::MolecularGraph;
use crate::nn::{self, AdamState, ConditionalInr, GradientBundle};
use crate::rng;
use crate::signal::{self, EvaluationKind, SignalLayout};
use crate::spectral::{EigenError, DEFAULT_TOL};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("molecule {index}: atom type {ty} outside alphabet of size {alphabet_size}")]
    AlphabetMismatch { index: usize, ty: usize, alphabet_size: usize },
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("eigensolver: {0}")]
    Eigen(#[from] EigenError),
    #[error("schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
}

/// A molecule ready for training: evaluation kinds, coordinates, and one-hot
/// targets, all in the fixed node-then-pair order.
#[derive(Debug, Clone)]
pub struct PreparedMolecule {
    pub kinds: Vec<EvaluationKind>,
    pub coords: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

pub fn prepare_molecule(
    g: &MolecularGraph,
    layout: &SignalLayout,
    d: usize,
) -> Result<PreparedMolecule, EigenError> {
    let mf = signal::encode_molecule(g, layout, d, DEFAULT_TOL)?;
    let mut kinds = Vec::with_capacity(mf.evaluations.len());
    let mut coords = Vec::with_capacity(mf.evaluations.len());
    let mut targets = Vec::with_capacity(mf.evaluations.len());
    for e in mf.evaluations {
        kinds.push(e.kind);
        coords.push(e.coordinate);
        targets.push(e.target);
    }
    Ok(PreparedMolecule { kinds, coords, targets })
}

/// Mean squared reconstruction error over evaluations, `sum_f` inside.
fn batch_mse(outputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let total: f64 = outputs
        .iter()
        .zip(targets)
        .map(|(y, t)| y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    total / outputs.len() as f64
}

/// `d(mean MSE)/dy` per evaluation.
fn mse_output_gradients(outputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let scale = 2.0 / outputs.len() as f64;
    outputs
        .iter()
        .zip(targets)
        .map(|(y, t)| y.iter().zip(t).map(|(a, b)| scale * (a - b)).collect())
        .collect()
}

#[derive(Debug, Clone)]
pub struct EStepResult {
    pub z: Vec<f64>,
    pub loss: f64,
}

/// Infers the latent input for one molecule: starting from the origin, runs
/// `iters` rounds of exact mean-MSE gradient descent against the noisy
/// signals. The network is never modified. Returns the final latent and the
/// loss observed in the last round (before its update).
pub fn e_step(
    latent_net: &ConditionalInr,
    coords: &[Vec<f64>],
    noisy: &[Vec<f64>],
    iters: usize,
    lr: f64,
) -> EStepResult {
    assert!(iters >= 1, "e_step needs at least one iteration");
    assert_eq!(coords.len(), noisy.len(), "coordinate/signal count mismatch");
    let mut z = vec![0.0; latent_net.dims.k];
    let mut loss = f64::INFINITY;
    for _ in 0..iters {
        let (outputs, tape) = latent_net.forward_batch(&z, coords);
        loss = batch_mse(&outputs, noisy);
        let dys = mse_output_gradients(&outputs, noisy);
        let grad_z = latent_net.latent_gradient(&tape, &dys);
        z = nn::sgd_latent_step(&z, &grad_z, lr);
    }
    EStepResult { z, loss }
}

/// Per-molecule data entering an M-step: the latent from the E-step, the
/// noisy signals, and the borrowed prepared molecule.
#[derive(Debug)]
pub struct MoleculeStepData<'a> {
    pub prepared: &'a PreparedMolecule,
    pub noisy: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub e_loss: f64,
}

/// Loss components of one M-step, averaged over the batch. `l_m` is
/// accumulated independently of `l_denoise` and `l_out` so the additive
/// decomposition is observable, not definitional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub l_e: f64,
    pub l_denoise: f64,
    pub l_out: f64,
    pub l_m: f64,
}

/// One Adam update of the denoiser (against clean targets) and the latent
/// model (against noisy signals), gradients averaged over the batch. Latents
/// are treated as constants: no gradient flows into the E-step trajectory.
pub fn m_step(
    denoiser: &mut ConditionalInr,
    latent_net: &mut ConditionalInr,
    batch: &[MoleculeStepData<'_>],
    adam_denoiser: &mut AdamState,
    adam_latent: &mut AdamState,
) -> LossRecord {
    assert!(!batch.is_empty(), "m_step needs a non-empty batch");
    struct MolGrads {
        denoiser: GradientBundle,
        latent: GradientBundle,
        l_denoise: f64,
        l_out: f64,
    }

    let per_molecule: Vec<MolGrads> = batch
        .par_iter()
        .map(|data| {
            let (outputs, tape) = denoiser.forward_batch(&data.z, &data.prepared.coords);
            let l_denoise = batch_mse(&outputs, &data.prepared.targets);
            let dys = mse_output_gradients(&outputs, &data.prepared.targets);
            let g_denoiser = denoiser.backward_batch(&tape, &dys);

            let (outputs, tape) = latent_net.forward_batch(&data.z, &data.prepared.coords);
            let l_out = batch_mse(&outputs, &data.noisy);
            let dys = mse_output_gradients(&outputs, &data.noisy);
            let g_latent = latent_net.backward_batch(&tape, &dys);

            MolGrads { denoiser: g_denoiser, latent: g_latent, l_denoise, l_out }
        })
        .collect();

    let n = batch.len() as f64;
    let mut g_denoiser = GradientBundle::zeros_like(denoiser);
    let mut g_latent = GradientBundle::zeros_like(latent_net);
    let mut l_denoise = 0.0;
    let mut l_out = 0.0;
    let mut l_m = 0.0;
    let mut l_e = 0.0;
    for (grads, data) in per_molecule.iter().zip(batch) {
        g_denoiser.add_assign(&grads.denoiser);
        g_latent.add_assign(&grads.latent);
        l_denoise += grads.l_denoise;
        l_out += grads.l_out;
        l_m += grads.l_denoise + grads.l_out;
        l_e += data.e_loss;
    }
    g_denoiser.scale(1.0 / n);
    g_latent.scale(1.0 / n);

    nn::adam_step(denoiser, adam_denoiser, &g_denoiser);
    nn::adam_step(latent_net, adam_latent, &g_latent);

    LossRecord { l_e: l_e / n, l_denoise: l_denoise / n, l_out: l_out / n, l_m: l_m / n }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_e: f64,
    pub l_out: f64,
    pub l_denoise: f64,
    pub l_m: f64,
    pub wall_ms: u64,
}

/// CSV rendering of the per-epoch training log.
pub fn render_log_csv(logs: &[EpochLog]) -> String {
    let mut out = String::from("epoch,L_e,L_out,L_denoise,L_m,wall_ms\n");
    for log in logs {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            log.epoch, log.l_e, log.l_out, log.l_denoise, log.l_m, log.wall_ms
        ));
    }
    out
}

/// Shuffled dataset order for one epoch; a pure function of (seed, epoch).
fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let mut stream = rng::stream(seed, rng::STREAM_SHUFFLE, epoch as u64, 0);
    order.shuffle(&mut stream);
    order
}

/// Draws this molecule's diffusion step and noisy signals from its own
/// stream, then runs the E-step.
fn molecule_training_step<'a>(
    prepared: &'a PreparedMolecule,
    latent_net: &ConditionalInr,
    schedule: &DiffusionSchedule,
    cfg: &RunConfig,
    epoch: usize,
    index: usize,
) -> MoleculeStepData<'a> {
    let mut stream = rng::stream(cfg.train.seed, rng::STREAM_TRAIN, epoch as u64, index as u64);
    let t = stream.random_range(1..=schedule.t_max());
    let f = prepared.targets[0].len();
    let noisy: Vec<Vec<f64>> = prepared
        .targets
        .iter()
        .map(|y0| {
            let noise: Vec<f64> = (0..f).map(|_| stream.sample(StandardNormal)).collect();
            schedule.q_sample(y0, t, &noise)
        })
        .collect();
    let est = e_step(latent_net, &prepared.coords, &noisy, cfg.train.inner_iters, cfg.train.inner_lr);
    MoleculeStepData { prepared, noisy, z: est.z, e_loss: est.loss }
}

/// Full training loop. Returns the checkpoint and one log entry per epoch.
pub fn train(
    dataset: &[MolecularGraph],
    cfg: &RunConfig,
) -> Result<(Checkpoint, Vec<EpochLog>), TrainError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for (index, g) in dataset.iter().enumerate() {
        if let Some(&ty) = g.atom_types().iter().find(|&&t| t >= cfg.alphabet.len()) {
            return Err(TrainError::AlphabetMismatch {
                index,
                ty,
                alphabet_size: cfg.alphabet.len(),
            });
        }
    }

    let layout = signal::signal_layout(&cfg.alphabet);
    let prepared: Vec<PreparedMolecule> = dataset
        .par_iter()
        .map(|g| prepare_molecule(g, &layout, cfg.model.d))
        .collect::<Result<_, _>>()?;
    let schedule =
        diffusion::build_schedule(cfg.diffusion.t_max, cfg.diffusion.beta_min, cfg.diffusion.beta_max)?;

    let dims = cfg.network_dims();
    let mut denoiser = nn::init_network(
        dims,
        cfg.model.activation,
        cfg.model.omega0,
        rng::derive_seed(cfg.train.seed, rng::STREAM_INIT_DENOISER, 0, 0),
    );
    let mut latent_net = nn::init_network(
        dims,
        cfg.model.activation,
        cfg.model.omega0,
        rng::derive_seed(cfg.train.seed, rng::STREAM_INIT_LATENT, 0, 0),
    );
    let mut adam_denoiser = AdamState::new(&denoiser, cfg.train.outer_lr);
    let mut adam_latent = AdamState::new(&latent_net, cfg.train.outer_lr);

    let mut logs = Vec::with_capacity(cfg.train.epochs);
    for epoch in 1..=cfg.train.epochs {
        let started = std::time::Instant::now();
        let order = epoch_order(dataset.len(), cfg.train.seed, epoch);
        let mut sums = (0.0, 0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.train.batch_size) {
            let batch: Vec<MoleculeStepData> = chunk
                .par_iter()
                .map(|&index| {
                    molecule_training_step(
                        &prepared[index],
                        &latent_net,
                        &schedule,
                        cfg,
                        epoch,
                        index,
                    )
                })
                .collect();
            let record =
                m_step(&mut denoiser, &mut latent_net, &batch, &mut adam_denoiser, &mut adam_latent);
            if !(record.l_m.is_finite() && record.l_e.is_finite()) {
                return Err(TrainError::NonFiniteLoss { epoch });
            }
            let w = chunk.len() as f64;
            sums.0 += record.l_e * w;
            sums.1 += record.l_out * w;
            sums.2 += record.l_denoise * w;
            sums.3 += record.l_m * w;
        }
        let n = dataset.len() as f64;
        logs.push(EpochLog {
            epoch,
            l_e: sums.0 / n,
            l_out: sums.1 / n,
            l_denoise: sums.2 / n,
            l_m: sums.3 / n,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }

    Ok((Checkpoint::from_networks(cfg, &denoiser, &latent_net), logs))
}

/// Reverse-diffusion sampling: draws `count` source topologies uniformly
/// with replacement, runs signals from the normal prior down to `t = 0`
/// (re-inferring the latent each step, mean-return at the final step), and
/// decodes. Decodes may be invalid; callers score them.
pub fn sample(
    ckpt: &Checkpoint,
    topologies: &[MolecularGraph],
    count: usize,
    seed: u64,
) -> Result<Vec<MolecularGraph>, TrainError> {
    if topologies.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let alphabet = ckpt.alphabet()?;
    for (index, g) in topologies.iter().enumerate() {
        if let Some(&ty) = g.atom_types().iter().find(|&&t| t >= alphabet.len()) {
            return Err(TrainError::AlphabetMismatch { index, ty, alphabet_size: alphabet.len() });
        }
    }
    let layout = signal::signal_layout(&alphabet);
    let denoiser = ckpt.denoiser_network()?;
    let latent_net = ckpt.latent_network()?;
    let dcfg = ckpt.diffusion_config();
    let schedule = diffusion::build_schedule(dcfg.t_max, dcfg.beta_min, dcfg.beta_max)?;
    let tcfg = ckpt.trainer_config();

    let prepared: Vec<PreparedMolecule> = topologies
        .par_iter()
        .map(|g| prepare_molecule(g, &layout, ckpt.dims.d))
        .collect::<Result<_, _>>()?;

    let f = ckpt.dims.f;
    let graphs: Vec<MolecularGraph> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng::stream(seed, rng::STREAM_SAMPLE, i as u64, 0);
            let pm = &prepared[stream.random_range(0..prepared.len())];
            let mut signals: Vec<Vec<f64>> = pm
                .coords
                .iter()
                .map(|_| (0..f).map(|_| stream.sample(StandardNormal)).collect())
                .collect();
            for t in (1..=schedule.t_max()).rev() {
                let est =
                    e_step(&latent_net, &pm.coords, &signals, tcfg.inner_iters, tcfg.inner_lr);
                let clean = denoiser.predict_batch(&est.z, &pm.coords);
                for (sig, y0_hat) in signals.iter_mut().zip(&clean) {
                    let (mu, sigma) = schedule.posterior_params(y0_hat, sig, t);
                    if t > 1 {
                        let noise: Vec<f64> =
                            (0..f).map(|_| stream.sample(StandardNormal)).collect();
                        *sig = diffusion::posterior_sample(&mu, sigma, &noise);
                    } else {
                        *sig = mu;
                    }
                }
            }
            signal::decode_sample(&pm.kinds, &signals, &alphabet)
                .expect("sampler emits layout-consistent signals")
        })
        .collect();

    Ok(graphs)
}
