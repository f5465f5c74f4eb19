use std::fmt::Write as _;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::Rng;

use super::dataset::{gen_ce_dataset, gen_fus_dataset, ChannelSource, Dataset};
use super::{default_snr_grid, SystemConfig};
use crate::error::{Error, Result};
use crate::models::{CeNet, FusNet, DEFAULT_L2};
use crate::neuralnet::{loss_mse_l2, AdamState, Mlp};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub batch: usize,
    pub epochs_ce: usize,
    pub epochs_fus: usize,
    pub lr_ce: f64,
    pub lr_fus: f64,
    pub l2: f64,
    /// Per-sample SNR is drawn uniformly from this grid.
    pub snr_grid_db: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_train: 20_000,
            n_val: 4_000,
            batch: 80,
            epochs_ce: 40,
            epochs_fus: 100,
            lr_ce: 1e-3,
            lr_fus: 1e-3,
            l2: DEFAULT_L2,
            snr_grid_db: default_snr_grid(),
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    /// The full-size sample counts.
    pub fn paper_scale() -> Self {
        Self { n_train: 100_000, n_val: 20_000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_val == 0 {
            return Err(Error::InvalidConfig("n_train and n_val must be positive".into()));
        }
        if self.batch == 0 || self.batch > self.n_train {
            return Err(Error::InvalidConfig(format!(
                "batch must lie in 1..={} (n_train), got {}",
                self.n_train, self.batch
            )));
        }
        if !(self.lr_ce > 0.0 && self.lr_fus > 0.0) {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidConfig("l2 must be non-negative".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidConfig("snr grid is empty".into()));
        }
        Ok(())
    }

    /// Gradient steps per epoch, `⌈S/ν⌉`.
    pub fn steps_per_epoch(&self) -> usize {
        self.n_train.div_ceil(self.batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch losses. Row 0 holds the losses of the untrained net.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub epochs: Vec<EpochLoss>,
}

impl LossHistory {
    pub fn initial(&self) -> Option<EpochLoss> {
        self.epochs.first().copied()
    }

    pub fn last(&self) -> Option<EpochLoss> {
        self.epochs.last().copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:.6e},{:.6e}", e.epoch, e.train_loss, e.val_loss);
        }
        s
    }
}

fn eval_loss(net: &Mlp, data: &Dataset) -> Result<f64> {
    let pred = net.infer(data.inputs.view())?;
    loss_mse_l2(pred.view(), data.labels.view(), net)
}

fn finite_or_diverged(epoch: usize, loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Diverged { epoch, loss })
    }
}

/// Minibatch Adam over `epochs` passes. Each epoch reshuffles and takes
/// `⌈S/ν⌉` steps without replacement; the last batch may be short.
pub fn train<R: Rng + ?Sized>(
    net: &mut Mlp,
    data: &Dataset,
    val: &Dataset,
    epochs: usize,
    lr: f64,
    batch: usize,
    rng: &mut R,
) -> Result<LossHistory> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if batch == 0 {
        return Err(Error::InvalidConfig("batch must be positive".into()));
    }
    let mut history = LossHistory::default();
    history.epochs.push(EpochLoss {
        epoch: 0,
        train_loss: finite_or_diverged(0, eval_loss(net, data)?)?,
        val_loss: finite_or_diverged(0, eval_loss(net, val)?)?,
    });
    if epochs == 0 {
        return Ok(history);
    }

    let mut adam = AdamState::new(lr, net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut steps = 0usize;
        for idx in order.chunks(batch) {
            let x = data.inputs.select(Axis(0), idx);
            let y = data.labels.select(Axis(0), idx);
            let pass = net.forward_train(x.view())?;
            let loss = finite_or_diverged(epoch, loss_mse_l2(pass.output.view(), y.view(), net)?)?;
            let grads = net.backward(&pass.cache, y.view())?;
            adam.step(net, &grads).map_err(|_| Error::Diverged { epoch, loss: f64::NAN })?;
            sum += loss;
            steps += 1;
        }
        history.epochs.push(EpochLoss {
            epoch,
            train_loss: sum / steps as f64,
            val_loss: finite_or_diverged(epoch, eval_loss(net, val)?)?,
        });
    }
    Ok(history)
}

/// The trained networks for one `(λ, L)` cell.
#[derive(Debug, Clone)]
pub struct CellModels {
    pub ce: CeNet,
    pub fus: FusNet,
}

#[derive(Debug, Clone)]
pub struct CellTraining {
    pub models: CellModels,
    pub loss_ce: LossHistory,
    pub loss_fus: LossHistory,
}

/// Trains CE-Net, then builds the FUS-Net set through the trained CE-Net and
/// trains FUS-Net. Every random draw derives from `cfg.seed`.
pub fn train_cell(sys: &SystemConfig, cfg: &TrainConfig) -> Result<CellTraining> {
    sys.validate()?;
    cfg.validate()?;
    let n = sys.n_subcarriers();
    let seed = cfg.seed;
    let grid = &cfg.snr_grid_db;

    let mut ce = CeNet::new(n, cfg.l2, &mut stream(derive_seed(seed, "ce-init", 0), 0))?;
    let ce_train = gen_ce_dataset(sys, grid, cfg.n_train, derive_seed(seed, "ce-train", 0), cfg.workers)?;
    let ce_val = gen_ce_dataset(sys, grid, cfg.n_val, derive_seed(seed, "ce-val", 0), cfg.workers)?;
    let mut shuffle = stream(derive_seed(seed, "ce-shuffle", 0), 0);
    let loss_ce = train(ce.net_mut(), &ce_train, &ce_val, cfg.epochs_ce, cfg.lr_ce, cfg.batch, &mut shuffle)?;
    drop((ce_train, ce_val));
    ce.mark_trained();

    let mut fus = FusNet::new(n, cfg.l2, &mut stream(derive_seed(seed, "fus-init", 0), 0))?;
    let src = ChannelSource::CeNet(&ce);
    let fus_train = gen_fus_dataset(sys, src, grid, cfg.n_train, derive_seed(seed, "fus-train", 0), cfg.workers)?;
    let fus_val = gen_fus_dataset(sys, src, grid, cfg.n_val, derive_seed(seed, "fus-val", 0), cfg.workers)?;
    let mut shuffle = stream(derive_seed(seed, "fus-shuffle", 0), 0);
    let loss_fus = train(fus.net_mut(), &fus_train, &fus_val, cfg.epochs_fus, cfg.lr_fus, cfg.batch, &mut shuffle)?;
    fus.mark_trained();

    Ok(CellTraining { models: CellModels { ce, fus }, loss_ce, loss_fus })
}
