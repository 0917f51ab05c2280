//! Conditional GAN on low-dimensional labeled data.
//!
//! Both networks see a one-hot label appended to their input: the generator
//! maps `z ++ onehot(y)` to a point, the discriminator maps `x ++ onehot(y)`
//! to a logit. Training alternates one discriminator and one generator Adam
//! step on the non-saturating loss. Data are standardized per coordinate
//! before training and generated points are mapped back.

use log::debug;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{mlp_backward_acc, mlp_forward, Activation, MlpGrads, MlpParams};
use crate::datamodel::{ClassId, ClassSet, EmbeddingRow, LabeledEmbeddingSet, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            latent_dim: 8,
            hidden: vec![32, 32],
            activation: Activation::Relu,
            steps: 4000,
            batch: 64,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            seed: 0,
        }
    }
}

impl GanConfig {
    fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.batch == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("latent_dim, batch and hidden widths must be positive"));
        }
        let betas_ok = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2);
        if !(self.lr > 0.0 && self.lr.is_finite() && betas_ok) {
            return Err(Error::invalid("lr must be positive and betas in [0, 1)"));
        }
        Ok(())
    }
}

/// First and second moment estimates for one network, in parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamMoments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamMoments<T> {
    pub fn zeros(n: usize) -> Self {
        AdamMoments {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }

    /// One bias-corrected Adam update; `t` counts from 1.
    fn step(&mut self, params: &mut MlpParams<T>, grads: &MlpGrads<T>, cfg: &GanConfig, t: usize) {
        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let lr = T::lit(cfg.lr);
        let eps = T::lit(1e-8);
        let c1 = T::one() - b1.powi(t as i32);
        let c2 = T::one() - b2.powi(t as i32);
        let it = params
            .values_mut()
            .zip(grads.values())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()));
        for ((p, &g), (m, v)) in it {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyGanState<T> {
    pub gen: MlpParams<T>,
    pub disc: MlpParams<T>,
    pub latent_dim: usize,
    pub data_dim: usize,
    pub classes: ClassSet,
    /// Per-coordinate standardization: the generator works on `(x - shift) / scale`.
    pub shift: Vec<T>,
    pub scale: Vec<T>,
    pub gen_moments: AdamMoments<T>,
    pub disc_moments: AdamMoments<T>,
    pub step: usize,
    pub seed: u64,
}

impl<T: Scalar> ToyGanState<T> {
    /// Seeded initialization; what training with zero steps returns.
    pub fn init(train: &LabeledEmbeddingSet<T>, config: &GanConfig) -> Result<Self> {
        config.validate()?;
        let k = train.classes.len();
        if k < 2 {
            return Err(Error::invalid("conditional GAN needs at least 2 classes"));
        }
        if train.len() < 2 {
            return Err(Error::invalid("conditional GAN needs at least 2 training rows"));
        }
        let d = train.dim;
        let n = T::from_usize_lossy(train.len());
        let shift: Vec<T> = (0..d)
            .map(|j| train.rows.iter().map(|r| r.vector[j]).sum::<T>() / n)
            .collect();
        let scale: Vec<T> = (0..d)
            .map(|j| {
                let var = train.rows.iter().map(|r| (r.vector[j] - shift[j]).powi(2)).sum::<T>() / n;
                if var > T::zero() {
                    var.sqrt()
                } else {
                    T::one()
                }
            })
            .collect();

        let mut rng = rng_for(config.seed, "gan/init");
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&config.hidden);
            s.push(output);
            s
        };
        let gen = MlpParams::random(&sizes(config.latent_dim + k, d), config.activation, &mut rng)?;
        let disc = MlpParams::random(&sizes(d + k, 1), config.activation, &mut rng)?;
        Ok(ToyGanState {
            gen_moments: AdamMoments::zeros(gen.num_params()),
            disc_moments: AdamMoments::zeros(disc.num_params()),
            gen,
            disc,
            latent_dim: config.latent_dim,
            data_dim: d,
            classes: train.classes.clone(),
            shift,
            scale,
            step: 0,
            seed: config.seed,
        })
    }

    fn with_onehot(&self, head: &[T], label: ClassId) -> Vec<T> {
        let mut v = Vec::with_capacity(head.len() + self.classes.len());
        v.extend_from_slice(head);
        v.extend((0..self.classes.len()).map(|c| if c == label.index() { T::one() } else { T::zero() }));
        v
    }

    /// Generator output for latent `z` and class `label`, in data coordinates.
    pub fn generate(&self, z: &[T], label: ClassId) -> Result<Vec<T>> {
        let (x, _) = mlp_forward(&self.gen, &self.with_onehot(z, label))?;
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| v * self.scale[j] + self.shift[j])
            .collect())
    }
}

fn standard_normal<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z)
        })
        .collect()
}

fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn train_conditional_gan<T: Scalar>(train: &LabeledEmbeddingSet<T>, config: &GanConfig) -> Result<ToyGanState<T>> {
    let mut state = ToyGanState::init(train, config)?;
    if train.rows.iter().any(|r| r.vector.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("training data must be finite"));
    }
    let data: Vec<(Vec<T>, ClassId)> = train
        .rows
        .iter()
        .map(|r| {
            let x = r
                .vector
                .iter()
                .enumerate()
                .map(|(j, &v)| (v - state.shift[j]) / state.scale[j])
                .collect();
            (x, r.label)
        })
        .collect();
    let mut rng = rng_for(config.seed, "gan/train");
    let inv_b = T::one() / T::from_usize_lossy(config.batch);
    let d = state.data_dim;

    for step in 0..config.steps {
        let t = step + 1;

        let mut gd = MlpGrads::zeros_like(&state.disc);
        let mut d_loss = T::zero();
        for _ in 0..config.batch {
            let (x, y) = &data[rng.random_range(0..data.len())];
            let (l, cache) = mlp_forward(&state.disc, &state.with_onehot(x, *y))?;
            d_loss += softplus(-l[0]);
            mlp_backward_acc(&state.disc, &cache, &[sigmoid(l[0]) - T::one()], &mut gd)?;

            let z = standard_normal(&mut rng, state.latent_dim);
            let (xf, _) = mlp_forward(&state.gen, &state.with_onehot(&z, *y))?;
            let (l, cache) = mlp_forward(&state.disc, &state.with_onehot(&xf, *y))?;
            d_loss += softplus(l[0]);
            mlp_backward_acc(&state.disc, &cache, &[sigmoid(l[0])], &mut gd)?;
        }
        d_loss *= inv_b;
        if !d_loss.is_finite() {
            return Err(Error::Diverged {
                step,
                what: "discriminator loss".into(),
            });
        }
        gd.scale(inv_b);
        state.disc_moments.step(&mut state.disc, &gd, config, t);

        let mut gg = MlpGrads::zeros_like(&state.gen);
        let mut scratch = MlpGrads::zeros_like(&state.disc);
        let mut g_loss = T::zero();
        for _ in 0..config.batch {
            let y = data[rng.random_range(0..data.len())].1;
            let z = standard_normal(&mut rng, state.latent_dim);
            let (xf, gcache) = mlp_forward(&state.gen, &state.with_onehot(&z, y))?;
            let (l, dcache) = mlp_forward(&state.disc, &state.with_onehot(&xf, y))?;
            g_loss += softplus(-l[0]);
            mlp_backward_acc(&state.disc, &dcache, &[sigmoid(l[0]) - T::one()], &mut scratch)?;
            let dx = scratch.input[..d].to_vec();
            mlp_backward_acc(&state.gen, &gcache, &dx, &mut gg)?;
        }
        g_loss *= inv_b;
        if !g_loss.is_finite() {
            return Err(Error::Diverged {
                step,
                what: "generator loss".into(),
            });
        }
        gg.scale(inv_b);
        state.gen_moments.step(&mut state.gen, &gg, config, t);
        if !(state.gen.is_finite() && state.disc.is_finite()) {
            return Err(Error::Diverged {
                step,
                what: "GAN parameters".into(),
            });
        }
        state.step = t;
        if t % 500 == 0 {
            debug!("gan step {t}: d_loss {d_loss:.4} g_loss {g_loss:.4}");
        }
    }
    Ok(state)
}

/// Draws `n` labeled points: `quotas[c]` of class `c`, in class order, with
/// `z ~ N(0, I)`.
pub fn sample_synthetic<T: Scalar>(
    state: &ToyGanState<T>,
    n: usize,
    quotas: &[usize],
    seed: u64,
) -> Result<LabeledEmbeddingSet<T>> {
    if n == 0 {
        return Err(Error::invalid("synthetic sample size must be positive"));
    }
    if quotas.len() != state.classes.len() || quotas.iter().sum::<usize>() != n {
        return Err(Error::invalid(format!(
            "quota mismatch: {quotas:?} over {} classes does not sum to {n}",
            state.classes.len()
        )));
    }
    let mut rng = rng_for(seed, "gan/sample");
    let mut rows = Vec::with_capacity(n);
    for (c, &q) in quotas.iter().enumerate() {
        let label = ClassId(c as u32);
        for _ in 0..q {
            let z = standard_normal(&mut rng, state.latent_dim);
            rows.push(EmbeddingRow {
                example_id: format!("syn{}", rows.len()),
                label,
                vector: state.generate(&z, label)?,
            });
        }
    }
    LabeledEmbeddingSet::new(Split::Syn, state.data_dim, state.classes.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toygan::mixture::{sample_mixture, MixtureComponent, MixtureSpec};

    fn data() -> LabeledEmbeddingSet<f64> {
        let comp = |m: f64| MixtureComponent {
            mean: vec![m, -m],
            cov: vec![vec![0.2, 0.0], vec![0.0, 0.2]],
            weight: 0.5,
        };
        let spec = MixtureSpec {
            components: vec![comp(-2.0), comp(2.0)],
            train_size: 64,
            test_size: 4,
            seed: 1,
        };
        sample_mixture(&spec, Split::Train).unwrap()
    }

    fn small() -> GanConfig {
        GanConfig {
            hidden: vec![8],
            steps: 5,
            batch: 8,
            ..GanConfig::default()
        }
    }

    #[test]
    fn zero_steps_is_initialization() {
        let cfg = GanConfig { steps: 0, ..small() };
        let s = train_conditional_gan(&data(), &cfg).unwrap();
        assert_eq!(s, ToyGanState::init(&data(), &cfg).unwrap());
        assert_eq!(s.gen.output_dim(), 2);
        assert_eq!(s.disc.output_dim(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let a = train_conditional_gan(&data(), &small()).unwrap();
        let b = train_conditional_gan(&data(), &small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.step, 5);
        assert_ne!(a.gen, ToyGanState::init(&data(), &small()).unwrap().gen);
    }

    #[test]
    fn synthetic_labels_follow_quotas() {
        let s = ToyGanState::init(&data(), &small()).unwrap();
        let syn = sample_synthetic(&s, 7, &[3, 4], 9).unwrap();
        assert_eq!(syn.class_counts(), vec![3, 4]);
        assert_eq!(syn, sample_synthetic(&s, 7, &[3, 4], 9).unwrap());
        let one = sample_synthetic(&s, 5, &[0, 5], 9).unwrap();
        assert!(one.rows.iter().all(|r| r.label == ClassId(1)));
        assert!(sample_synthetic(&s, 6, &[3, 4], 9).is_err());
        assert!(sample_synthetic(&s, 0, &[0, 0], 9).is_err());
    }

    #[test]
    fn loss_helpers_are_stable() {
        assert_eq!(softplus(-1000.0f64), 0.0);
        assert_eq!(softplus(1000.0f64), 1000.0);
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert_eq!(sigmoid(0.0f64), 0.5);
    }
}
