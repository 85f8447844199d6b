//! Discretized Gaussian mixture model over integer symbols.
//!
//! Each sub-pixel gets a mixture of `K` Gaussians integrated over unit bins
//! `[x - 0.5, x + 0.5]`. Mass beyond the ends of the symbol support is folded
//! into the edge symbols, so the probabilities over the finite alphabet sum
//! to one. Channels are modelled in the order Y, Co, Cg; later channels see
//! earlier ones only through a linear shift of their means.
//!
//! The standard normal CDF is evaluated with `erfc` from the `libm` crate,
//! which is part of what makes encoder and decoder tables agree bit for bit.

use crate::colorspace::SymbolSupport;
use crate::error::{Error, Result};
use crate::nnet::{Real, Tensor};

pub const SIGMA_MIN: f64 = 0.01;
pub const SIGMA_MAX: f64 = 2048.0;
/// Probability floor applied before taking logarithms.
pub const P_MIN: f64 = 1.0 / (1u64 << 20) as f64;
pub const CDF_BITS: u32 = 16;
pub const CDF_TOTAL: u32 = 1 << CDF_BITS;

/// Beyond this many standard deviations the normal CDF is taken as exactly
/// 0 or 1 when building coding tables.
const SATURATION_Z: f64 = 12.0;

#[inline]
fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// `1 - normal_cdf(z)` without cancellation.
#[inline]
fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * libm::exp(-0.5 * z * z)
}

/// Standard normal mass between two z-scores; `None` stands for an
/// infinite bound.
fn interval_mass(lo: Option<f64>, hi: Option<f64>) -> f64 {
    match (lo, hi) {
        (None, None) => 1.0,
        (None, Some(b)) => normal_cdf(b),
        (Some(a), None) => normal_sf(a),
        (Some(a), Some(b)) => {
            if a >= 0.0 {
                normal_sf(a) - normal_sf(b)
            } else if b <= 0.0 {
                normal_cdf(b) - normal_cdf(a)
            } else {
                1.0 - normal_cdf(a) - normal_sf(b)
            }
        }
    }
}

/// Bin edges of symbol `x` in z-score units, with tail folding.
#[inline]
fn bin_edges(x: i32, support: SymbolSupport, mu: f64, sigma: f64) -> (Option<f64>, Option<f64>) {
    let lo = (x > support.lo).then(|| (x as f64 - 0.5 - mu) / sigma);
    let hi = (x < support.hi).then(|| (x as f64 + 0.5 - mu) / sigma);
    (lo, hi)
}

/// Mixture parameters of one sub-pixel.
#[derive(Clone, Copy, Debug)]
pub struct Mixture<'a> {
    pub weights: &'a [f64],
    pub means: &'a [f64],
    pub scales: &'a [f64],
}

impl<'a> Mixture<'a> {
    pub fn new(weights: &'a [f64], means: &'a [f64], scales: &'a [f64]) -> Result<Self> {
        if weights.len() != means.len() || means.len() != scales.len() || weights.is_empty() {
            return Err(Error::Shape(format!(
                "mixture with {}/{}/{} weights/means/scales",
                weights.len(),
                means.len(),
                scales.len()
            )));
        }
        Ok(Self {
            weights,
            means,
            scales,
        })
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
        let (w, m, s) = (self.weights, self.means, self.scales);
        (0..w.len()).map(move |k| (w[k], m[k], s[k]))
    }
}

fn check_symbol(x: i32, support: SymbolSupport) -> Result<()> {
    if support.contains(x) {
        Ok(())
    } else {
        Err(Error::Range(format!(
            "symbol {x} outside [{}, {}]",
            support.lo, support.hi
        )))
    }
}

/// Probability of symbol `x`.
pub fn pmf(x: i32, mix: &Mixture, support: SymbolSupport) -> Result<f64> {
    check_symbol(x, support)?;
    Ok(mix
        .components()
        .map(|(w, mu, sigma)| {
            let (a, b) = bin_edges(x, support, mu, sigma);
            w * interval_mass(a, b)
        })
        .sum())
}

/// Code length of `x` in bits, with the probability floored at [`P_MIN`].
pub fn bits(x: i32, mix: &Mixture, support: SymbolSupport) -> Result<f64> {
    Ok(-pmf(x, mix, support)?.max(P_MIN).log2())
}

/// Code length of `x` under the distribution the coding tables realize:
/// every symbol keeps one count of `2^16` and the rest is shared in
/// proportion to the mixture, so `q = (1 + p (2^16 - n)) / 2^16` up to
/// rounding of the shares.
pub fn table_bits(x: i32, mix: &Mixture, support: SymbolSupport) -> Result<f64> {
    let p = pmf(x, mix, support)?;
    let spare = (CDF_TOTAL as usize).saturating_sub(support.len()) as f64;
    Ok(-((1.0 + p * spare) / CDF_TOTAL as f64).log2())
}

/// Raw network outputs for one subband, already mapped to symbol units.
/// Every tensor is `[h, w, n]`: `pi`, `mu`, `sigma` have `3K` maps ordered
/// channel-major (Y, Co, Cg) then mixture; `alpha` has the coefficients
/// `(a, b, c)`, either once per pixel or once per mixture (`3K` maps, ordered
/// coefficient-major).
#[derive(Clone, Debug, PartialEq)]
pub struct RawParams<T> {
    pub mixtures: usize,
    pub pi: Tensor<T>,
    pub mu: Tensor<T>,
    pub sigma: Tensor<T>,
    pub alpha: Tensor<T>,
}

/// Activated mixture parameters for every pixel of a subband.
#[derive(Clone, Debug, PartialEq)]
pub struct DistParams {
    pixels: usize,
    mixtures: usize,
    alpha_per_mixture: bool,
    pi: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    alpha: Vec<f64>,
}

#[inline]
pub(crate) fn log_sigma_bounds() -> (f64, f64) {
    (SIGMA_MIN.ln(), SIGMA_MAX.ln())
}

/// Softmax in place with the usual max shift.
pub(crate) fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = libm::exp(l - max);
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

#[inline]
pub(crate) fn sigma_from_raw(raw: f64) -> f64 {
    let (lo, hi) = log_sigma_bounds();
    libm::exp(raw.clamp(lo, hi))
}

/// Turns raw head outputs into mixture parameters: softmax over the mixture
/// logits of each channel, `sigma = exp(clamp(raw))`, means and coefficients
/// unchanged.
pub fn activate<T: Real>(raw: &RawParams<T>) -> Result<DistParams> {
    let k = raw.mixtures;
    if k == 0 {
        return Err(Error::Argument("mixture count must be positive".into()));
    }
    let shape = raw.pi.shape();
    if shape.len() != 3 || shape[2] != 3 * k {
        return Err(Error::Shape(format!("pi maps {shape:?} for K={k}")));
    }
    let pixels = shape[0] * shape[1];
    for (name, t, n) in [
        ("mu", &raw.mu, 3 * k),
        ("sigma", &raw.sigma, 3 * k),
    ] {
        if t.shape() != [shape[0], shape[1], n] {
            return Err(Error::Shape(format!("{name} maps {:?}", t.shape())));
        }
    }
    let alpha_per_mixture = match raw.alpha.shape() {
        [h, w, 3] if *h == shape[0] && *w == shape[1] => false,
        [h, w, n] if *h == shape[0] && *w == shape[1] && *n == 3 * k => true,
        s => return Err(Error::Shape(format!("alpha maps {s:?}"))),
    };
    let to_f64 = |name: &str, t: &Tensor<T>| -> Result<Vec<f64>> {
        let v: Vec<f64> = t.data().iter().map(|x| x.as_f64()).collect();
        if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite {name} output at index {bad}"
            )));
        }
        Ok(v)
    };
    let logits = to_f64("pi", &raw.pi)?;
    let mu = to_f64("mu", &raw.mu)?;
    let sigma_raw = to_f64("sigma", &raw.sigma)?;
    let alpha = to_f64("alpha", &raw.alpha)?;

    let mut pi = vec![0.0; logits.len()];
    for (l, p) in logits.chunks_exact(k).zip(pi.chunks_exact_mut(k)) {
        softmax(l, p);
    }
    let sigma = sigma_raw.into_iter().map(sigma_from_raw).collect();
    Ok(DistParams {
        pixels,
        mixtures: k,
        alpha_per_mixture,
        pi,
        mu,
        sigma,
        alpha,
    })
}

impl DistParams {
    /// Builds parameters directly, mostly for tests and tools. `alpha` holds
    /// 3 values per pixel, or `3K` when `alpha_per_mixture` is set.
    pub fn from_parts(
        mixtures: usize,
        pi: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        alpha: Vec<f64>,
    ) -> Result<Self> {
        if mixtures == 0 || pi.len() % (3 * mixtures) != 0 {
            return Err(Error::Shape("mixture weights do not tile pixels".into()));
        }
        let pixels = pi.len() / (3 * mixtures);
        if mu.len() != pi.len() || sigma.len() != pi.len() {
            return Err(Error::Shape("means/scales length mismatch".into()));
        }
        let alpha_per_mixture = if alpha.len() == 3 * pixels {
            false
        } else if alpha.len() == 3 * mixtures * pixels {
            true
        } else {
            return Err(Error::Shape("coefficient length mismatch".into()));
        };
        if sigma.iter().any(|s| !(*s >= SIGMA_MIN)) {
            return Err(Error::Range(format!("scale below {SIGMA_MIN}")));
        }
        Ok(Self {
            pixels,
            mixtures,
            alpha_per_mixture,
            pi,
            mu,
            sigma,
            alpha,
        })
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn mixtures(&self) -> usize {
        self.mixtures
    }

    pub fn mixture(&self, pixel: usize, channel: usize) -> Mixture<'_> {
        let k = self.mixtures;
        let r = (pixel * 3 + channel) * k..(pixel * 3 + channel + 1) * k;
        Mixture {
            weights: &self.pi[r.clone()],
            means: &self.mu[r.clone()],
            scales: &self.sigma[r],
        }
    }

    /// Coefficient `j` (0 = a, 1 = b, 2 = c) for mixture `k` of a pixel.
    #[inline]
    fn coefficient(&self, pixel: usize, j: usize, k: usize) -> f64 {
        if self.alpha_per_mixture {
            self.alpha[(pixel * 3 + j) * self.mixtures + k]
        } else {
            self.alpha[pixel * 3 + j]
        }
    }

    fn shift_means(&mut self, pixel: usize, channel: usize, j: usize, value: f64) {
        let k = self.mixtures;
        for m in 0..k {
            let shift = self.coefficient(pixel, j, m) * value;
            self.mu[(pixel * 3 + channel) * k + m] += shift;
        }
    }

    /// Applies the first channel's decoded values: second-channel means gain
    /// `a * v1`, third-channel means gain `b * v1`.
    pub fn condition_on_first(&mut self, first: &[i32]) -> Result<()> {
        self.check_len(first.len())?;
        for (p, &v) in first.iter().enumerate() {
            self.shift_means(p, 1, 0, v as f64);
            self.shift_means(p, 2, 1, v as f64);
        }
        Ok(())
    }

    /// Applies the second channel's decoded values: third-channel means gain
    /// `c * v2`.
    pub fn condition_on_second(&mut self, second: &[i32]) -> Result<()> {
        self.check_len(second.len())?;
        for (p, &v) in second.iter().enumerate() {
            self.shift_means(p, 2, 2, v as f64);
        }
        Ok(())
    }

    /// Both conditioning steps at once.
    pub fn update_means(mut self, first: &[i32], second: &[i32]) -> Result<Self> {
        self.condition_on_first(first)?;
        self.condition_on_second(second)?;
        Ok(self)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.pixels {
            return Err(Error::Shape(format!(
                "{n} values for {} pixels",
                self.pixels
            )));
        }
        Ok(())
    }
}

/// Integer cumulative frequencies: `cum[0] = 0`, `cum[n] = 2^16`, every
/// symbol with frequency at least one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedCdf {
    cum: Vec<u32>,
}

impl QuantizedCdf {
    /// Validates a cumulative table.
    pub fn from_cum(cum: Vec<u32>) -> Result<Self> {
        if cum.len() < 2 || cum[0] != 0 || *cum.last().unwrap() != CDF_TOTAL {
            return Err(Error::Argument(
                "cumulative table must run from 0 to 2^16".into(),
            ));
        }
        if cum.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(
                "cumulative table must be strictly increasing".into(),
            ));
        }
        Ok(Self { cum })
    }

    pub fn cum(&self) -> &[u32] {
        &self.cum
    }

    pub fn symbols(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn freq(&self, symbol: usize) -> u32 {
        self.cum[symbol + 1] - self.cum[symbol]
    }

    pub fn probability(&self, symbol: usize) -> f64 {
        self.freq(symbol) as f64 / CDF_TOTAL as f64
    }
}

/// Reusable buffers for building coding tables.
#[derive(Clone, Debug, Default)]
pub struct CdfScratch {
    pmf: Vec<f64>,
    order: Vec<(f64, u32)>,
}

/// Largest-remainder apportionment of `2^16` over `pmf`, after reserving one
/// count per symbol. Ties in the remainder go to the lower symbol index.
fn apportion(pmf: &mut [f64], order: &mut Vec<(f64, u32)>, cum: &mut [u32]) -> Result<()> {
    let n = pmf.len();
    if n == 0 || n > CDF_TOTAL as usize {
        return Err(Error::Capacity(format!(
            "{n} symbols do not fit a 2^{CDF_BITS} table"
        )));
    }
    debug_assert_eq!(cum.len(), n + 1);
    let mut total = 0.0;
    for p in pmf.iter_mut() {
        if !(*p >= 0.0) {
            *p = 0.0;
        }
        total += *p;
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numeric("probability mass does not normalize".into()));
    }
    let spare = (CDF_TOTAL as usize - n) as f64;
    let mut assigned: u64 = 0;
    order.clear();
    for (s, p) in pmf.iter().enumerate() {
        let share = p / total * spare;
        let whole = share.floor();
        cum[s + 1] = whole as u32;
        assigned += whole as u64;
        order.push((share - whole, s as u32));
    }
    let mut left = (CDF_TOTAL as u64 - n as u64).saturating_sub(assigned) as usize;
    if left > 0 {
        let by_remainder = |a: &(f64, u32), b: &(f64, u32)| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
        };
        while left > 0 {
            let take = left.min(n);
            if take < n {
                order.select_nth_unstable_by(take - 1, by_remainder);
            }
            for &(_, s) in &order[..take] {
                cum[s as usize + 1] += 1;
            }
            left -= take;
        }
    }
    cum[0] = 0;
    for s in 0..n {
        cum[s + 1] = cum[s] + cum[s + 1] + 1;
    }
    if cum[n] != CDF_TOTAL {
        return Err(Error::Numeric(format!(
            "quantized table sums to {} instead of {CDF_TOTAL}",
            cum[n]
        )));
    }
    Ok(())
}

/// Quantizes an arbitrary probability vector.
pub fn quantize_pmf(pmf: &[f64]) -> Result<QuantizedCdf> {
    let mut p = pmf.to_vec();
    let mut cum = vec![0; pmf.len() + 1];
    apportion(&mut p, &mut Vec::new(), &mut cum)?;
    Ok(QuantizedCdf { cum })
}

/// Quantized table for a uniform distribution over `support`.
pub fn flat_cdf(support: SymbolSupport) -> Result<QuantizedCdf> {
    quantize_pmf(&vec![1.0; support.len()])
}

/// Writes the quantized table of `mix` into `cum` (length `support.len()+1`).
///
/// Bin probabilities are taken as differences of the mixture CDF at the
/// `n - 1` interior bin edges; the edges beyond `lo` and `hi` are the folded
/// tails, i.e. exactly 0 and 1.
pub fn fill_quantized_cdf(
    mix: &Mixture,
    support: SymbolSupport,
    scratch: &mut CdfScratch,
    cum: &mut [u32],
) -> Result<()> {
    let n = support.len();
    if n > CDF_TOTAL as usize {
        return Err(Error::Capacity(format!(
            "{n} symbols do not fit a 2^{CDF_BITS} table"
        )));
    }
    if cum.len() != n + 1 {
        return Err(Error::Shape(format!(
            "table of {} entries for {n} symbols",
            cum.len()
        )));
    }
    // pmf[j] temporarily holds the mixture CDF at the upper edge of symbol j.
    scratch.pmf.clear();
    scratch.pmf.resize(n, 0.0);
    for (w, mu, sigma) in mix.components() {
        for j in 0..n - 1 {
            let z = (support.lo as f64 + j as f64 + 0.5 - mu) / sigma;
            if z > SATURATION_Z {
                for c in &mut scratch.pmf[j..n - 1] {
                    *c += w;
                }
                break;
            }
            if z >= -SATURATION_Z {
                scratch.pmf[j] += w * normal_cdf(z);
            }
        }
    }
    let mut prev = 0.0;
    for j in 0..n {
        let c = if j + 1 == n { 1.0 } else { scratch.pmf[j] };
        scratch.pmf[j] = c - prev;
        prev = c;
    }
    apportion(&mut scratch.pmf, &mut scratch.order, cum)
}

pub fn quantize_cdf(mix: &Mixture, support: SymbolSupport) -> Result<QuantizedCdf> {
    let mut cum = vec![0; support.len() + 1];
    fill_quantized_cdf(mix, support, &mut CdfScratch::default(), &mut cum)?;
    Ok(QuantizedCdf { cum })
}

/// Gradients of one sub-pixel's code length with respect to the raw mixture
/// logits, the (conditioned) means and the raw log-scales.
#[derive(Clone, Debug, Default)]
pub struct LikelihoodGrad {
    pub logits: Vec<f64>,
    pub means: Vec<f64>,
    pub log_scales: Vec<f64>,
}

/// Code length in bits of `x` under raw parameters, together with its
/// gradient. Where the floor [`P_MIN`] or the scale clamp is active the
/// corresponding gradient is zero.
pub fn bits_with_grad(
    x: i32,
    logits: &[f64],
    means: &[f64],
    log_scales: &[f64],
    support: SymbolSupport,
    grad: &mut LikelihoodGrad,
) -> Result<f64> {
    check_symbol(x, support)?;
    let k = logits.len();
    grad.logits.clear();
    grad.logits.resize(k, 0.0);
    grad.means.clear();
    grad.means.resize(k, 0.0);
    grad.log_scales.clear();
    grad.log_scales.resize(k, 0.0);

    let mut weights = vec![0.0; k];
    softmax(logits, &mut weights);
    let (slo, shi) = log_sigma_bounds();
    let mut mass = vec![0.0; k];
    let mut p = 0.0;
    for m in 0..k {
        let sigma = sigma_from_raw(log_scales[m]);
        let (a, b) = bin_edges(x, support, means[m], sigma);
        mass[m] = interval_mass(a, b);
        p += weights[m] * mass[m];
        let (pa, za) = a.map_or((0.0, 0.0), |a| (normal_pdf(a), a));
        let (pb, zb) = b.map_or((0.0, 0.0), |b| (normal_pdf(b), b));
        // d mass / d mu and d mass / d log sigma.
        grad.means[m] = weights[m] * (pa - pb) / sigma;
        grad.log_scales[m] = if log_scales[m] > slo && log_scales[m] < shi {
            weights[m] * (za * pa - zb * pb)
        } else {
            0.0
        };
    }
    if !p.is_finite() {
        return Err(Error::Numeric("non-finite probability".into()));
    }
    if p < P_MIN {
        grad.means.iter_mut().for_each(|g| *g = 0.0);
        grad.log_scales.iter_mut().for_each(|g| *g = 0.0);
        return Ok(-P_MIN.log2());
    }
    let dbits_dp = -1.0 / (p * std::f64::consts::LN_2);
    for m in 0..k {
        grad.logits[m] = dbits_dp * weights[m] * (mass[m] - p);
        grad.means[m] *= dbits_dp;
        grad.log_scales[m] *= dbits_dp;
    }
    Ok(-p.log2())
}
