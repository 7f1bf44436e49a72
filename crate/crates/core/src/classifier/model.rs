//! PointNet-lite: a shared per-point MLP, channel-wise max-pool and a small
//! fully connected head. Backprop is written out by hand and is exact.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::Point;
use crate::error::{Error, Result};
use crate::rng;

/// Layer widths. `point` starts at 3 (coordinates), `head` starts at the
/// last point width and ends at the class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub point: Vec<usize>,
    pub head: Vec<usize>,
}

impl Architecture {
    /// 3→64→128→256, max-pool, 256→128→C.
    pub fn pointnet_lite(num_classes: usize) -> Self {
        Self {
            point: vec![3, 64, 128, 256],
            head: vec![256, 128, num_classes],
        }
    }

    /// Same topology with custom widths; used for small test models.
    pub fn custom(point_hidden: &[usize], head_hidden: &[usize], num_classes: usize) -> Self {
        let mut point = vec![3];
        point.extend_from_slice(point_hidden);
        let mut head = vec![*point.last().unwrap()];
        head.extend_from_slice(head_hidden);
        head.push(num_classes);
        Self { point, head }
    }

    pub fn num_classes(&self) -> usize {
        *self.head.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        if self.point.len() < 2 || self.point[0] != 3 {
            return Err(Error::Invalid("point MLP must start at width 3".into()));
        }
        if self.head.len() < 2 || self.head[0] != *self.point.last().unwrap() {
            return Err(Error::Invalid("head must start at the pooled width".into()));
        }
        if self.num_classes() < 2 || self.point.iter().chain(&self.head).any(|&w| w == 0) {
            return Err(Error::Invalid("widths must be positive and C >= 2".into()));
        }
        Ok(())
    }
}

/// Dense layer stored transposed (`in × out`) so a row batch multiplies
/// directly: `Y = X · Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub(crate) wt: DMatrix<f64>,
    pub(crate) b: DVector<f64>,
}

impl Linear {
    fn zeros(input: usize, output: usize) -> Self {
        Self {
            wt: DMatrix::zeros(input, output),
            b: DVector::zeros(output),
        }
    }

    pub fn inputs(&self) -> usize {
        self.wt.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.wt.ncols()
    }

    /// Weight `W[o][i]` in the conventional `out × in` orientation.
    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.wt[(i, o)]
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.b
    }
}

/// Network parameters. Also used as the container for parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    arch: Architecture,
    pub(crate) point_layers: Vec<Linear>,
    pub(crate) head_layers: Vec<Linear>,
}

/// Activations kept from a forward pass for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: DMatrix<f64>,
    /// Post-ReLU output of each point layer, `m × width`.
    point_acts: Vec<DMatrix<f64>>,
    pooled: DVector<f64>,
    /// Winning point per pooled channel (lowest index on ties).
    argmax: Vec<usize>,
    /// Post-ReLU output of each hidden head layer.
    head_acts: Vec<DVector<f64>>,
    logits: DVector<f64>,
}

impl ForwardCache {
    pub fn logits(&self) -> &DVector<f64> {
        &self.logits
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    pub fn pooled(&self) -> &DVector<f64> {
        &self.pooled
    }

    /// Same max-pool winners and ReLU on/off pattern in every layer, i.e.
    /// both passes sit in one linear piece of the network.
    pub fn same_linear_region(&self, other: &ForwardCache) -> bool {
        let on = |v: &f64| *v > 0.0;
        self.argmax == other.argmax
            && self.point_acts.len() == other.point_acts.len()
            && self.point_acts.iter().zip(&other.point_acts).all(|(a, b)| a.shape() == b.shape() && a.iter().map(on).eq(b.iter().map(on)))
            && self.head_acts.iter().zip(&other.head_acts).all(|(a, b)| a.iter().map(on).eq(b.iter().map(on)))
    }
}

impl ClassifierModel {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let point_layers = arch.point.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect();
        let head_layers = arch.head.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect();
        Ok(Self {
            arch,
            point_layers,
            head_layers,
        })
    }

    /// He-normal weights, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        let mut rng = rng::seeded(seed);
        for layer in model.point_layers.iter_mut().chain(model.head_layers.iter_mut()) {
            let std = (2.0 / layer.inputs() as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("positive std");
            for w in layer.wt.iter_mut() {
                *w = dist.sample(&mut rng);
            }
        }
        Ok(model)
    }

    /// Small random biases too; handy for gradient checks where zero biases
    /// leave many ReLUs sitting exactly on their kink.
    pub fn init_with_biases(arch: Architecture, seed: u64) -> Result<Self> {
        let mut model = Self::init(arch, seed)?;
        let mut rng = rng::seeded(rng::derive(seed, 1));
        for layer in model.layers_mut() {
            for b in layer.b.iter_mut() {
                *b = rng.random_range(-0.1..0.1);
            }
        }
        Ok(model)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Linear> {
        self.point_layers.iter().chain(self.head_layers.iter())
    }

    pub(crate) fn layers_mut(&mut self) -> impl Iterator<Item = &mut Linear> {
        self.point_layers.iter_mut().chain(self.head_layers.iter_mut())
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|l| l.wt.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.wt.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// `self += alpha * other`, parameter-wise.
    pub fn axpy(&mut self, alpha: f64, other: &ClassifierModel) {
        for (a, b) in self.layers_mut().zip(other.layers()) {
            for (x, y) in a.wt.iter_mut().zip(b.wt.iter()) {
                *x += alpha * y;
            }
            a.b.axpy(alpha, &b.b, 1.0);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for l in self.layers_mut() {
            l.wt *= alpha;
            l.b *= alpha;
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.arch.clone()).expect("architecture already validated")
    }

    pub fn forward(&self, points: &[Point]) -> ForwardCache {
        let m = points.len();
        let input = DMatrix::from_fn(m, 3, |r, c| points[r][c]);
        let mut point_acts: Vec<DMatrix<f64>> = Vec::with_capacity(self.point_layers.len());
        for layer in &self.point_layers {
            let prev = point_acts.last().unwrap_or(&input);
            let mut z = prev * &layer.wt;
            for (c, mut col) in z.column_iter_mut().enumerate() {
                let b = layer.b[c];
                col.apply(|v| *v = (*v + b).max(0.0));
            }
            point_acts.push(z);
        }
        let last = point_acts.last().unwrap();
        let width = last.ncols();
        let mut pooled = DVector::zeros(width);
        let mut argmax = vec![0usize; width];
        for (c, col) in last.column_iter().enumerate() {
            let mut best = col[0];
            let mut at = 0;
            for (r, &v) in col.iter().enumerate().skip(1) {
                if v > best {
                    best = v;
                    at = r;
                }
            }
            pooled[c] = best;
            argmax[c] = at;
        }
        let mut head_acts: Vec<DVector<f64>> = Vec::with_capacity(self.head_layers.len() - 1);
        let n_head = self.head_layers.len();
        let mut logits = DVector::zeros(0);
        for (i, layer) in self.head_layers.iter().enumerate() {
            let prev = head_acts.last().unwrap_or(&pooled);
            let mut z = layer.wt.tr_mul(prev) + &layer.b;
            if i + 1 < n_head {
                z.apply(|v| *v = v.max(0.0));
                head_acts.push(z);
            } else {
                logits = z;
            }
        }
        ForwardCache {
            input,
            point_acts,
            pooled,
            argmax,
            head_acts,
            logits,
        }
    }

    pub fn logits(&self, points: &[Point]) -> DVector<f64> {
        self.forward(points).logits
    }

    /// Argmax class, lowest index on ties.
    pub fn predict(&self, points: &[Point]) -> usize {
        argmax(&self.logits(points))
    }

    /// Backprop `dlogits` to the input coordinates.
    pub fn input_grad(&self, cache: &ForwardCache, dlogits: &DVector<f64>) -> Vec<Point> {
        self.backward(cache, dlogits, None)
    }

    /// Backprop `dlogits` to the input and accumulate parameter gradients
    /// into `grads` (which must share this model's architecture).
    pub fn backward_into(&self, cache: &ForwardCache, dlogits: &DVector<f64>, grads: &mut ClassifierModel) -> Vec<Point> {
        self.backward(cache, dlogits, Some(grads))
    }

    fn backward(&self, cache: &ForwardCache, dlogits: &DVector<f64>, mut grads: Option<&mut ClassifierModel>) -> Vec<Point> {
        let m = cache.input.nrows();
        // Head, last layer first.
        let mut upstream = dlogits.clone();
        for i in (0..self.head_layers.len()).rev() {
            let layer = &self.head_layers[i];
            let input = if i == 0 { &cache.pooled } else { &cache.head_acts[i - 1] };
            if let Some(g) = grads.as_deref_mut() {
                g.head_layers[i].wt.ger(1.0, input, &upstream, 1.0);
                g.head_layers[i].b += &upstream;
            }
            let mut down = &layer.wt * &upstream;
            if i > 0 {
                // ReLU mask of the hidden head activation feeding this layer.
                for (d, a) in down.iter_mut().zip(cache.head_acts[i - 1].iter()) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            upstream = down;
        }
        let dpooled = upstream;

        // Only points that win some channel receive gradient.
        let mut rows: Vec<usize> = cache.argmax.clone();
        rows.sort_unstable();
        rows.dedup();
        let mut row_of = vec![usize::MAX; m];
        for (r, &p) in rows.iter().enumerate() {
            row_of[p] = r;
        }
        let n_layers = self.point_layers.len();
        let last_width = self.point_layers[n_layers - 1].outputs();
        let mut dact = DMatrix::zeros(rows.len(), last_width);
        for (c, &p) in cache.argmax.iter().enumerate() {
            dact[(row_of[p], c)] += dpooled[c];
        }
        for l in (0..n_layers).rev() {
            let layer = &self.point_layers[l];
            let act = &cache.point_acts[l];
            // dZ = dA ⊙ 1[A > 0]
            for c in 0..dact.ncols() {
                for (r, &p) in rows.iter().enumerate() {
                    if act[(p, c)] <= 0.0 {
                        dact[(r, c)] = 0.0;
                    }
                }
            }
            let prev_full = if l == 0 { &cache.input } else { &cache.point_acts[l - 1] };
            let prev = prev_full.select_rows(rows.iter());
            if let Some(g) = grads.as_deref_mut() {
                g.point_layers[l].wt.gemm_tr(1.0, &prev, &dact, 1.0);
                for (c, col) in dact.column_iter().enumerate() {
                    g.point_layers[l].b[c] += col.sum();
                }
            }
            dact = &dact * layer.wt.transpose();
        }
        let mut out = vec![Point::zeros(); m];
        for (r, &p) in rows.iter().enumerate() {
            out[p] = Point::new(dact[(r, 0)], dact[(r, 1)], dact[(r, 2)]);
        }
        out
    }

    /// Flat parameter vector: for each layer (point layers, then head),
    /// weights row-major in `out × in` order followed by the bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in self.layers() {
            for o in 0..l.outputs() {
                for i in 0..l.inputs() {
                    out.push(l.wt[(i, o)]);
                }
            }
            out.extend(l.b.iter());
        }
        out
    }

    pub fn from_flat(arch: Architecture, flat: &[f64]) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        if flat.len() != model.num_params() {
            return Err(Error::Invalid(format!(
                "expected {} parameters, found {}",
                model.num_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for l in model.layers_mut() {
            for o in 0..l.outputs() {
                for i in 0..l.inputs() {
                    l.wt[(i, o)] = it.next().unwrap();
                }
            }
            for b in l.b.iter_mut() {
                *b = it.next().unwrap();
            }
        }
        if !model.is_finite() {
            return Err(Error::Invalid("non-finite parameter".into()));
        }
        Ok(model)
    }
}

pub fn argmax(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}
