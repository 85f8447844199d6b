//! Desk-scale training of the interpolators.
//!
//! The loss is the code length, in bits per original pixel, of every
//! entropy-coded subband of a patch: the fixed-length coarsest subband is
//! excluded since the networks cannot change it.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{estimate_bits, Model, RateEstimate};
use crate::colorspace::ColorSpace;
use crate::error::{Error, Result};
use crate::imageio::read_image;
use crate::interpolator::{context_tensor, to_symbol_units, IcnnConfig, IcnnWeights, ALPHA_SCALE, VALUE_SCALE};
use crate::nnet::{Adam, AdamConfig, Tape, Tensor};
use crate::plane::{Plane, CHANNELS};
use crate::probmodel::{bits_with_grad, LikelihoodGrad};
use crate::pyramid::{build_pyramid, Subband};

/// Per-scale bpp of the best configuration in the reference results
/// (scales 1..5), for side-by-side printing.
pub const REFERENCE_SCALE_BPP: [f64; 5] = [5.465, 1.841, 0.553, 0.160, 0.045];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub patch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub lr_floor: f64,
    /// Validations without a relative improvement above `plateau_threshold`
    /// before the learning rate decays.
    pub patience: usize,
    pub plateau_threshold: f64,
    pub max_steps: usize,
    /// Steps between validations (and checkpoints).
    pub eval_every: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub log_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            patch_size: 64,
            learning_rate: 1e-4,
            lr_decay: 0.5,
            lr_floor: 1e-5,
            patience: 5,
            plateau_threshold: 1e-3,
            max_steps: 5000,
            eval_every: 100,
            seed: 0,
            adam: AdamConfig::default(),
            log_path: None,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, icnn: &IcnnConfig) -> Result<()> {
        let arg = |m: String| Err(Error::Argument(m));
        if self.batch_size == 0 || self.max_steps == 0 || self.eval_every == 0 {
            return arg("batch size, step count and validation interval must be positive".into());
        }
        let unit = 1usize.checked_shl(icnn.scales as u32).unwrap_or(usize::MAX);
        if self.patch_size == 0 || self.patch_size % unit != 0 {
            return arg(format!(
                "patch size {} is not a multiple of 2^{} = {unit}",
                self.patch_size, icnn.scales
            ));
        }
        if !(self.lr_floor > 0.0 && self.lr_floor <= self.learning_rate) {
            return arg(format!(
                "learning rate floor {} must be in (0, {}]",
                self.lr_floor, self.learning_rate
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return arg(format!("decay factor {} outside (0, 1]", self.lr_decay));
        }
        Ok(())
    }
}

/// Learning-rate schedule: multiply by `decay` (down to `floor`) after
/// `patience` validations without a relative improvement of `threshold`.
#[derive(Clone, Debug)]
pub struct PlateauScheduler {
    lr: f64,
    decay: f64,
    floor: f64,
    patience: usize,
    threshold: f64,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, decay: f64, floor: f64, patience: usize, threshold: f64) -> Self {
        Self {
            lr,
            decay,
            floor,
            patience,
            threshold,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    pub fn from_config(c: &TrainConfig) -> Self {
        Self::new(c.learning_rate, c.lr_decay, c.lr_floor, c.patience, c.plateau_threshold)
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Records a validation loss and returns the learning rate to use next.
    pub fn observe(&mut self, val: f64) -> f64 {
        if val < self.best * (1.0 - self.threshold) {
            self.best = val;
            self.stale = 0;
        } else {
            self.best = self.best.min(val);
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr = (self.lr * self.decay).max(self.floor);
                self.stale = 0;
            }
        }
        self.lr
    }
}

/// Training or evaluation images, held as RGB planes.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub paths: Vec<PathBuf>,
    pub images: Vec<Plane>,
}

impl Corpus {
    pub fn from_images(images: Vec<Plane>) -> Self {
        Self {
            paths: Vec::new(),
            images,
        }
    }

    pub fn from_paths(paths: &[PathBuf]) -> Result<Self> {
        let images = paths.iter().map(read_image).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            paths: paths.to_vec(),
            images,
        })
    }

    /// Every `.ppm`/`.png` file directly inside `dir`, in name order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut paths = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if matches!(ext.as_deref(), Some("ppm" | "png")) {
                paths.push(path);
            }
        }
        paths.sort();
        if paths.is_empty() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no .ppm or .png images"),
            ));
        }
        Self::from_paths(&paths)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Draws random patches: a uniformly chosen image, then a uniformly placed
/// `patch x patch` crop (the whole extent along dimensions that are smaller).
#[derive(Clone, Debug)]
pub struct PatchSampler {
    rng: ChaCha8Rng,
    patch: usize,
}

impl PatchSampler {
    pub fn new(seed: u64, patch: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            patch,
        }
    }

    pub fn sample(&mut self, corpus: &Corpus) -> Plane {
        let img = &corpus.images[self.rng.gen_range(0..corpus.len())];
        let ph = self.patch.min(img.height());
        let pw = self.patch.min(img.width());
        let u0 = self.rng.gen_range(0..=img.height() - ph);
        let v0 = self.rng.gen_range(0..=img.width() - pw);
        crop(img, u0, v0, ph, pw)
    }
}

pub fn crop(img: &Plane, u0: usize, v0: usize, h: usize, w: usize) -> Plane {
    let mut out = Plane::zeros(h, w, img.space());
    for c in 0..CHANNELS {
        for u in 0..h {
            for v in 0..w {
                out.set(c, u, v, img.get(c, u0 + u, v0 + v));
            }
        }
    }
    out
}

/// Code length of one image split by scale, subband and channel.
#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub pixels: usize,
    /// `bits[i][b][c]` as in [`RateEstimate::bits`].
    pub bits: Vec<[[f64; 3]; 3]>,
}

impl LossBreakdown {
    pub fn total_bits(&self) -> f64 {
        self.bits.iter().flatten().flatten().sum()
    }

    pub fn bpp(&self) -> f64 {
        self.total_bits() / self.pixels as f64
    }
}

/// Loss of one RGB image, optionally with gradients accumulated into `grads`
/// (one tensor per parameter tensor, canonical order) scaled by `grad_scale`.
fn image_loss(
    weights: &IcnnWeights<f64>,
    image: &Plane,
    mut grads: Option<(&mut [Tensor<f64>], f64)>,
) -> Result<LossBreakdown> {
    if image.space() != ColorSpace::Rgb || image.is_empty() {
        return Err(Error::Argument("loss needs a non-empty RGB image".into()));
    }
    let config = weights.config();
    let k = config.mixtures;
    let pyr = build_pyramid(&image.to_ycocgr()?, config.scales)?;
    let mut breakdown = LossBreakdown {
        pixels: image.pixels(),
        bits: vec![[[0.0; 3]; 3]; config.scales],
    };
    let supports = ColorSpace::YCoCgR.supports();
    let mut lg = LikelihoodGrad::default();
    let mut means = vec![0.0; k];
    for scale in (1..=config.scales).rev() {
        let level = pyr.level(scale);
        for band in Subband::ORDER {
            let target = level.band(band);
            let n = target.pixels();
            if n == 0 {
                continue;
            }
            let ctx_planes: Vec<&Plane> = match band {
                Subband::X11 => vec![&level.x00],
                Subband::X01 => vec![&level.x00, &level.x11],
                Subband::X10 => vec![&level.x00, &level.x11, &level.x01],
            };
            let mut tape = Tape::new();
            let ctx: Vec<_> = ctx_planes
                .iter()
                .map(|p| tape.leaf(context_tensor::<f64>(p)))
                .collect();
            let (params, outs) = weights.forward_tape(&mut tape, scale, band, &ctx, target.shape())?;
            let raw = to_symbol_units(config, outs.map(|v| tape.value(v).clone()));
            let (pi, mu, sigma, alpha) = (raw.pi.data(), raw.mu.data(), raw.sigma.data(), raw.alpha.data());
            let per_mix_alpha = raw.alpha.shape()[2] != 3;
            let mut g = [pi, mu, sigma, alpha].map(|t| vec![0.0; t.len()]);
            let scale_grad = grads.as_ref().map_or(0.0, |(_, s)| *s);
            let bits = &mut breakdown.bits[scale - 1][band.index()];
            for p in 0..n {
                let v = [0, 1, 2].map(|c| target.channel(c)[p]);
                for c in 0..CHANNELS {
                    let base = (p * CHANNELS + c) * k;
                    for m in 0..k {
                        let coef = |j: usize| {
                            if per_mix_alpha {
                                alpha[(p * 3 + j) * k + m]
                            } else {
                                alpha[p * 3 + j]
                            }
                        };
                        means[m] = mu[base + m]
                            + match c {
                                0 => 0.0,
                                1 => coef(0) * v[0] as f64,
                                _ => coef(1) * v[0] as f64 + coef(2) * v[1] as f64,
                            };
                    }
                    let b = bits_with_grad(
                        v[c],
                        &pi[base..base + k],
                        &means,
                        &sigma[base..base + k],
                        supports[c],
                        &mut lg,
                    )?;
                    bits[c] += b;
                    if grads.is_none() {
                        continue;
                    }
                    for m in 0..k {
                        g[0][base + m] += lg.logits[m] * scale_grad;
                        g[1][base + m] += lg.means[m] * scale_grad;
                        g[2][base + m] += lg.log_scales[m] * scale_grad;
                        let gm = lg.means[m] * scale_grad;
                        let idx = |j: usize| {
                            if per_mix_alpha {
                                (p * 3 + j) * k + m
                            } else {
                                p * 3 + j
                            }
                        };
                        match c {
                            1 => g[3][idx(0)] += gm * v[0] as f64,
                            2 => {
                                g[3][idx(1)] += gm * v[0] as f64;
                                g[3][idx(2)] += gm * v[1] as f64;
                            }
                            _ => {}
                        }
                    }
                }
            }
            let Some((acc, _)) = grads.as_mut() else {
                continue;
            };
            // Back from symbol units to network units.
            g[1].iter_mut().for_each(|x| *x *= VALUE_SCALE);
            g[3].iter_mut().for_each(|x| *x *= ALPHA_SCALE);
            let seeds = outs
                .iter()
                .zip(g)
                .map(|(&var, data)| {
                    let shape = tape.value(var).shape().to_vec();
                    Ok((var, Tensor::from_vec(&shape, data)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut back = tape.backward_seeded(seeds)?;
            for (idx, w, b) in params {
                if let Some(gw) = back.take(w) {
                    acc[2 * idx].add_assign(&gw)?;
                }
                if let Some(gb) = back.take(b) {
                    acc[2 * idx + 1].add_assign(&gb)?;
                }
            }
        }
    }
    Ok(breakdown)
}

/// Per-image code length by scale, subband and channel.
pub fn loss_breakdown(weights: &IcnnWeights<f64>, image: &Plane) -> Result<LossBreakdown> {
    image_loss(weights, image, None)
}

fn check_finite(loss: f64, weights: &IcnnWeights<f64>) -> Result<f64> {
    if loss.is_finite() {
        return Ok(loss);
    }
    let mut max_abs = 0.0f64;
    let mut non_finite = 0usize;
    for t in weights.tensors() {
        for &v in t.data() {
            if v.is_finite() {
                max_abs = max_abs.max(v.abs());
            } else {
                non_finite += 1;
            }
        }
    }
    Err(Error::Numeric(format!(
        "loss is {loss}; parameters: {} total, {non_finite} non-finite, max |w| = {max_abs:.4e}",
        weights.num_scalars()
    )))
}

/// Mean bits per pixel over `patches` (RGB planes).
pub fn loss(weights: &IcnnWeights<f64>, patches: &[Plane]) -> Result<f64> {
    if patches.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let per: Vec<f64> = patches
        .par_iter()
        .map(|p| image_loss(weights, p, None).map(|b| b.bpp()))
        .collect::<Result<_>>()?;
    check_finite(per.iter().sum::<f64>() / patches.len() as f64, weights)
}

/// [`loss`] and its gradient, one tensor per parameter tensor in the order
/// of [`IcnnWeights::tensors`].
pub fn loss_and_grad(weights: &IcnnWeights<f64>, patches: &[Plane]) -> Result<(f64, Vec<Tensor<f64>>)> {
    if patches.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let zeros = || -> Vec<Tensor<f64>> {
        weights.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect()
    };
    let per: Vec<(f64, Vec<Tensor<f64>>)> = patches
        .par_iter()
        .map(|p| {
            let mut g = zeros();
            let scale = 1.0 / (p.pixels() * patches.len()) as f64;
            let b = image_loss(weights, p, Some((&mut g, scale)))?;
            Ok((b.bpp(), g))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut grads = zeros();
    for (l, g) in per {
        total += l;
        for (acc, t) in grads.iter_mut().zip(&g) {
            acc.add_assign(t)?;
        }
    }
    let loss = check_finite(total / patches.len() as f64, weights)?;
    if grads.iter().any(|g| !g.all_finite()) {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok((loss, grads))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub lr: f64,
    pub train_bpp: f64,
    pub val_bpp: Option<f64>,
}

pub struct TrainOutcome {
    pub weights: IcnnWeights<f32>,
    pub log: Vec<LogRow>,
}

fn csv_row(row: &LogRow) -> String {
    let val = row.val_bpp.map_or(String::new(), |v| format!("{v:.6}"));
    format!("{},{:e},{:.6},{}\n", row.step, row.lr, row.train_bpp, val)
}

/// Trains from a seeded initialization. Validation runs on `val` (whole
/// images) every `eval_every` steps and at the end; when `val` is empty the
/// training images are used. `progress` sees every log row as it is made.
pub fn train(
    icnn: &IcnnConfig,
    corpus: &Corpus,
    val: &Corpus,
    config: &TrainConfig,
    mut progress: impl FnMut(&LogRow),
) -> Result<TrainOutcome> {
    config.validate(icnn)?;
    if corpus.is_empty() {
        return Err(Error::Argument("training corpus is empty".into()));
    }
    let val = if val.is_empty() { corpus } else { val };
    let mut weights = IcnnWeights::<f64>::build(icnn, config.seed)?;
    let mut adam = Adam::new(config.adam, weights.tensors().iter().map(|t| t.len()));
    let mut sampler = PatchSampler::new(config.seed ^ 0x5eed_5eed, config.patch_size);
    let mut sched = PlateauScheduler::from_config(config);
    let mut log_file = match &config.log_path {
        Some(p) => {
            let mut f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            f.write_all(b"step,lr,train_bpp,val_bpp\n").map_err(|e| Error::io(p, e))?;
            Some((f, p.clone()))
        }
        None => None,
    };
    let mut log = Vec::new();
    let mut record = |row: LogRow, log: &mut Vec<LogRow>| -> Result<()> {
        if let Some((f, p)) = log_file.as_mut() {
            f.write_all(csv_row(&row).as_bytes()).map_err(|e| Error::io(p.clone(), e))?;
        }
        progress(&row);
        log.push(row);
        Ok(())
    };

    let val0 = loss(&weights, &val.images)?;
    sched.observe(val0);
    record(
        LogRow {
            step: 0,
            lr: sched.lr(),
            train_bpp: f64::NAN,
            val_bpp: Some(val0),
        },
        &mut log,
    )?;
    let mut window = 0.0;
    let mut window_n = 0;
    for step in 1..=config.max_steps {
        let batch: Vec<Plane> = (0..config.batch_size).map(|_| sampler.sample(corpus)).collect();
        let (l, grads) = loss_and_grad(&weights, &batch)?;
        let lr = sched.lr();
        adam.step(&mut weights.tensors_mut(), &grads, lr)?;
        window += l;
        window_n += 1;
        if step % config.eval_every == 0 || step == config.max_steps {
            let v = loss(&weights, &val.images)?;
            sched.observe(v);
            record(
                LogRow {
                    step,
                    lr,
                    train_bpp: window / window_n as f64,
                    val_bpp: Some(v),
                },
                &mut log,
            )?;
            window = 0.0;
            window_n = 0;
            if let Some(p) = &config.checkpoint_path {
                crate::interpolator::save_weights(&weights.cast(), p)?;
            }
        }
    }
    Ok(TrainOutcome {
        weights: weights.cast(),
        log,
    })
}

/// Per-image rates and their means, in the per-scale layout of the
/// reference results.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub names: Vec<String>,
    pub rates: Vec<RateEstimate>,
}

impl EvalReport {
    pub fn scales(&self) -> usize {
        self.rates.first().map_or(0, |r| r.scales())
    }

    fn mean(&self, f: impl Fn(&RateEstimate) -> f64) -> f64 {
        self.rates.iter().map(f).sum::<f64>() / self.rates.len().max(1) as f64
    }

    pub fn mean_scale_bpp(&self, scale: usize) -> f64 {
        self.mean(|r| r.scale_bpp(scale))
    }

    pub fn mean_fixed_bpp(&self) -> f64 {
        self.mean(|r| r.fixed_bpp())
    }

    /// Mean over images of modelled plus fixed bits per pixel (no header).
    pub fn mean_bpp(&self) -> f64 {
        self.mean(|r| (r.coded_bits() + r.fixed_bits) / r.pixels() as f64)
    }

    pub fn mean_bpsp(&self) -> f64 {
        self.mean_bpp() / CHANNELS as f64
    }

    /// Text table: one row per scale, the fixed-length subband, and totals,
    /// with the reference values alongside where they exist.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>10} {:>10}", "", "bpp", "reference");
        for i in 1..=self.scales() {
            let reference = REFERENCE_SCALE_BPP
                .get(i - 1)
                .filter(|_| self.scales() == REFERENCE_SCALE_BPP.len())
                .map_or("-".to_string(), |r| format!("{r:.3}"));
            let _ = writeln!(s, "{:<10} {:>10.3} {:>10}", format!("scale {i}"), self.mean_scale_bpp(i), reference);
        }
        let _ = writeln!(s, "{:<10} {:>10.3} {:>10}", "x00 fixed", self.mean_fixed_bpp(), "-");
        let _ = writeln!(s, "{:<10} {:>10.3} {:>10}", "total", self.mean_bpp(), "-");
        let _ = writeln!(s, "{:<10} {:>10.3} {:>10}", "bpsp", self.mean_bpsp(), "-");
        let _ = writeln!(s, "{:<10} {:>10.3} {:>10}", "raw RGB", 24.0, "-");
        s
    }
}

/// Rate of every corpus image under `model`, no coder involved.
pub fn evaluate(corpus: &Corpus, model: &Model) -> Result<EvalReport> {
    let rates = corpus
        .images
        .iter()
        .map(|img| estimate_bits(img, model))
        .collect::<Result<Vec<_>>>()?;
    let names = (0..corpus.len())
        .map(|i| {
            corpus
                .paths
                .get(i)
                .map_or(format!("image {i}"), |p| p.display().to_string())
        })
        .collect();
    Ok(EvalReport { names, rates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> IcnnConfig {
        IcnnConfig {
            channels: 3,
            layers: 3,
            mixtures: 2,
            scales: 2,
            share_across_scales: false,
            alpha_per_mixture: false,
        }
    }

    fn patch(seed: u64, n: usize) -> Plane {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rgb = Vec::with_capacity(n * n * 3);
        for u in 0..n {
            for v in 0..n {
                let base = (u * 9 + v * 5) as i32;
                for c in 0..3 {
                    rgb.push((base + c * 30 + rng.gen_range(-6..=6)).clamp(0, 255) as u8);
                }
            }
        }
        Plane::from_rgb8(n, n, &rgb).unwrap()
    }

    #[test]
    fn scheduler_two_plateaus() {
        let mut s = PlateauScheduler::new(1e-4, 0.5, 1e-5, 2, 1e-3);
        s.observe(10.0);
        for _ in 0..4 {
            s.observe(10.0);
        }
        assert!((s.lr() - 2.5e-5).abs() < 1e-18);
        for _ in 0..10 {
            s.observe(10.0);
        }
        assert_eq!(s.lr(), 1e-5);
        s.observe(5.0);
        assert_eq!(s.best(), 5.0);
    }

    #[test]
    fn config_validation() {
        let icnn = IcnnConfig::default();
        assert!(TrainConfig::default().validate(&icnn).is_ok());
        assert!(TrainConfig { patch_size: 48, ..Default::default() }.validate(&icnn).is_err());
        assert!(TrainConfig { lr_floor: 1e-3, ..Default::default() }.validate(&icnn).is_err());
    }

    #[test]
    fn loss_matches_mixture_rate() {
        let w = IcnnWeights::<f64>::build(&tiny(), 3).unwrap();
        let img = patch(1, 8);
        let b = loss_breakdown(&w, &img).unwrap();
        let est = estimate_bits(&img, &Model::Learned(&w.cast())).unwrap();
        assert!(b.bits.iter().flatten().flatten().all(|&x| x >= 0.0));
        // Same mixtures, evaluated with an f32 network in the codec.
        assert!((b.total_bits() - est.mixture_bits).abs() < 1e-4 * b.total_bits());
    }

    /// Zero biases put dead ReLUs exactly on their kink, where central
    /// differences are meaningless; move them off it.
    fn jitter_biases(w: &mut IcnnWeights<f64>, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in w.tensors_mut() {
            if t.shape().len() == 1 {
                t.data_mut().iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.3));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut w = IcnnWeights::<f64>::build(&tiny(), 4).unwrap();
        jitter_biases(&mut w, 5);
        let batch = [patch(2, 8), patch(3, 8)];
        let (l0, g) = loss_and_grad(&w, &batch).unwrap();
        assert!((l0 - loss(&w, &batch).unwrap()).abs() < 1e-12);
        let h = 1e-5;
        let mut worst = 0.0f64;
        for t in 0..g.len() {
            for i in (0..g[t].len()).step_by(7) {
                let mut plus = w.clone();
                plus.tensors_mut()[t].data_mut()[i] += h;
                let mut minus = w.clone();
                minus.tensors_mut()[t].data_mut()[i] -= h;
                let fd = (loss(&plus, &batch).unwrap() - loss(&minus, &batch).unwrap()) / (2.0 * h);
                let a = g[t].data()[i];
                let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn training_is_deterministic_and_logs() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::from_images((0..3).map(|s| patch(s, 8)).collect());
        let config = TrainConfig {
            batch_size: 2,
            patch_size: 8,
            learning_rate: 1e-3,
            max_steps: 4,
            eval_every: 2,
            seed: 9,
            log_path: Some(dir.path().join("log.csv")),
            ..Default::default()
        };
        let a = train(&tiny(), &corpus, &Corpus::default(), &config, |_| {}).unwrap();
        let b = train(&tiny(), &corpus, &Corpus::default(), &config, |_| {}).unwrap();
        assert_eq!(a.weights.checksum(), b.weights.checksum());
        assert_eq!(a.log.len(), 3);
        let csv = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("step,lr,train_bpp,val_bpp"));
    }
}
