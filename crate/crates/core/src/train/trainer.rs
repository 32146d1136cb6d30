use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{save_model, MssrModel};
use crate::scalar::Scalar;
use crate::train::{adam_step, batch_loss, loss_and_grad, lr_schedule, AdamState, TrainConfig, TrainSample};

pub const LOG_FILE: &str = "train_log.csv";
pub const LOG_HEADER: &str = "epoch,mean_loss,lr,seconds";

/// Owns a model and its optimizer state; one [`step`](Self::step) is one
/// forward/backward/update on a batch.
pub struct Trainer<T> {
    pub model: MssrModel<T>,
    pub adam: AdamState<T>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: MssrModel<T>, config: &TrainConfig) -> Self {
        let adam = AdamState::new(model.parameter_count(), config);
        Trainer { model, adam }
    }

    pub fn step(&mut self, batch: &[&TrainSample<T>]) -> Result<T> {
        self.model.zero_grad();
        let loss = loss_and_grad(&mut self.model, batch)?;
        adam_step(&mut self.model, &mut self.adam)?;
        Ok(loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Mean per-sample loss of the final model, keyed by up-scale factor.
    pub final_loss_by_scale: BTreeMap<u8, f64>,
    pub checkpoints: Vec<PathBuf>,
    pub log_path: PathBuf,
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch:04}.mssr")
}

/// Trains `model` in place for `config.total_epochs` epochs. Each epoch is a
/// seeded shuffle of the whole mixed-scale dataset; a checkpoint and a log
/// row are written after every epoch.
pub fn train<T: Scalar>(
    model: &mut MssrModel<T>,
    dataset: &[TrainSample<T>],
    config: &TrainConfig,
    checkpoint_dir: &Path,
) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::Argument("training dataset is empty".into()));
    }
    config.validate()?;
    fs::create_dir_all(checkpoint_dir).map_err(|e| Error::io(checkpoint_dir, e))?;
    let log_path = checkpoint_dir.join(LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);
    writeln!(log, "{LOG_HEADER}").map_err(|e| Error::io(&log_path, e))?;

    let mut trainer = Trainer::new(model.clone(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epochs = Vec::with_capacity(config.total_epochs);
    let mut checkpoints = Vec::with_capacity(config.total_epochs);

    for epoch in 0..config.total_epochs {
        let started = Instant::now();
        let lr = lr_schedule(epoch, config);
        trainer.adam.lr = lr;
        order.shuffle(&mut rng);

        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainSample<T>> = chunk.iter().map(|&i| &dataset[i]).collect();
            let loss = trainer.step(&batch)?;
            total += loss.as_f64() * batch.len() as f64;
        }
        let mean_loss = total / dataset.len() as f64;

        let ckpt = checkpoint_dir.join(checkpoint_name(epoch));
        save_model(&trainer.model, &ckpt)?;
        checkpoints.push(ckpt);

        let seconds = if config.record_wall_time {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        writeln!(log, "{epoch},{mean_loss:e},{lr:e},{seconds:.3}").map_err(|e| Error::io(&log_path, e))?;
        log.flush().map_err(|e| Error::io(&log_path, e))?;
        log::info!("epoch {epoch}: mean loss {mean_loss:.6e}, lr {lr:e}, {seconds:.1}s");
        epochs.push(EpochRecord {
            epoch,
            mean_loss,
            lr,
            seconds,
        });
    }

    *model = trainer.model;
    let final_loss_by_scale = loss_by_scale(model, dataset, config.batch_size)?;
    Ok(TrainReport {
        epochs,
        final_loss_by_scale,
        checkpoints,
        log_path,
    })
}

/// Mean per-sample loss (`||r - F(x)||^2 / 2`) for each scale present.
pub fn loss_by_scale<T: Scalar>(
    model: &MssrModel<T>,
    dataset: &[TrainSample<T>],
    batch_size: usize,
) -> Result<BTreeMap<u8, f64>> {
    let mut groups: BTreeMap<u8, Vec<&TrainSample<T>>> = BTreeMap::new();
    for s in dataset {
        groups.entry(s.scale).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|(scale, samples)| {
            let mut total = 0.0;
            for chunk in samples.chunks(batch_size.max(1)) {
                total += batch_loss(model, chunk)?.as_f64() * chunk.len() as f64;
            }
            Ok((scale, total / samples.len() as f64))
        })
        .collect()
}
