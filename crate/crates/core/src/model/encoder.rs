//! Pre-norm self-attention encoder over one token sequence, with a reverse
//! pass that accumulates exact gradients into a [`Gradients`] buffer.
//!
//! Block: `h = x + Attn(LN1(x))`, `y = h + W2·gelu(W1·LN2(h))`, followed by a
//! final layer norm. Key positions at or past `valid_len` are masked out of
//! attention. Only the first `out_rows` rows of the last block are computed,
//! since the regression head reads the `[CLS]` row alone.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::params::{Gradients, Init, ParamStore};

const LN_EPS: f64 = 1e-5;
const INIT_RANGE: f64 = 0.05;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub d: usize,
    pub heads: usize,
    pub ff: usize,
}

impl Dims {
    fn head_dim(&self) -> usize {
        self.d / self.heads
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerIds {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct EncoderIds {
    pub tok_emb: usize,
    layers: Vec<LayerIds>,
    final_g: usize,
    final_b: usize,
}

impl EncoderIds {
    pub(crate) fn register<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        vocab_size: usize,
        dims: Dims,
        layers: usize,
    ) -> Self {
        let (d, ff) = (dims.d, dims.ff);
        let w = Init::Uniform(INIT_RANGE);
        let tok_emb = store.add("embed.tokens", &[vocab_size, d], w, rng);
        let layers = (0..layers)
            .map(|l| {
                let mut add = |name: &str, shape: &[usize], init: Init| {
                    store.add(&format!("layer{l}.{name}"), shape, init, rng)
                };
                LayerIds {
                    ln1_g: add("attn_norm.gain", &[d], Init::Ones),
                    ln1_b: add("attn_norm.bias", &[d], Init::Zeros),
                    wq: add("attn.query.weight", &[d, d], Init::Uniform(INIT_RANGE)),
                    bq: add("attn.query.bias", &[d], Init::Zeros),
                    wk: add("attn.key.weight", &[d, d], Init::Uniform(INIT_RANGE)),
                    bk: add("attn.key.bias", &[d], Init::Zeros),
                    wv: add("attn.value.weight", &[d, d], Init::Uniform(INIT_RANGE)),
                    bv: add("attn.value.bias", &[d], Init::Zeros),
                    wo: add("attn.output.weight", &[d, d], Init::Uniform(INIT_RANGE)),
                    bo: add("attn.output.bias", &[d], Init::Zeros),
                    ln2_g: add("ff_norm.gain", &[d], Init::Ones),
                    ln2_b: add("ff_norm.bias", &[d], Init::Zeros),
                    w1: add("ff.in.weight", &[d, ff], Init::Uniform(INIT_RANGE)),
                    b1: add("ff.in.bias", &[ff], Init::Zeros),
                    w2: add("ff.out.weight", &[ff, d], Init::Uniform(INIT_RANGE)),
                    b2: add("ff.out.bias", &[d], Init::Zeros),
                }
            })
            .collect();
        let final_g = store.add("final_norm.gain", &[d], Init::Ones, rng);
        let final_b = store.add("final_norm.bias", &[d], Init::Zeros, rng);
        Self {
            tok_emb,
            layers,
            final_g,
            final_b,
        }
    }
}

/// Fixed sinusoidal position table, `max_len x d`.
pub(crate) fn sinusoidal_positions(max_len: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((max_len, d), |(pos, i)| {
        let pair = (i / 2) as f64;
        let angle = pos as f64 / 10_000f64.powf(2.0 * pair / d as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044_715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let th = (GELU_C * (u + 0.044_715 * u * u * u)).tanh();
    0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * 0.044_715 * u * u)
}

struct NormCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

fn norm_forward(x: ArrayView2<f64>, g: ArrayView1<f64>, b: ArrayView1<f64>) -> (Array2<f64>, NormCache) {
    let (rows, d) = x.dim();
    let mut xhat = Array2::zeros((rows, d));
    let mut rstd = Array1::zeros(rows);
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for (o, v) in xhat.row_mut(r).iter_mut().zip(row) {
            *o = (v - mean) * rs;
        }
    }
    let y = &xhat * &g + b;
    (y, NormCache { xhat, rstd })
}

/// Returns dx; adds parameter gradients into `dg`, `db`.
fn norm_backward(
    dy: ArrayView2<f64>,
    cache: &NormCache,
    g: ArrayView1<f64>,
    grads: &mut Gradients,
    store: &ParamStore,
    (g_id, b_id): (usize, usize),
) -> Array2<f64> {
    let (rows, d) = dy.dim();
    {
        let mut dg = grads.vec_mut(store, g_id);
        dg += &(&dy * &cache.xhat).sum_axis(Axis(0));
    }
    {
        let mut db = grads.vec_mut(store, b_id);
        db += &dy.sum_axis(Axis(0));
    }
    let dxhat = &dy * &g;
    let mut dx = Array2::zeros((rows, d));
    for r in 0..rows {
        let dh = dxhat.row(r);
        let xh = cache.xhat.row(r);
        let mean_dh = dh.sum() / d as f64;
        let mean_dhx = dh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        let rs = cache.rstd[r];
        for ((o, a), b) in dx.row_mut(r).iter_mut().zip(dh).zip(xh) {
            *o = rs * (a - mean_dh - b * mean_dhx);
        }
    }
    dx
}

struct LayerCache {
    ln1: NormCache,
    a: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    ln2: NormCache,
    b: Array2<f64>,
    u: Array2<f64>,
    act: Array2<f64>,
}

fn add_bias(mut m: Array2<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    m += &b;
    m
}

fn layer_forward(
    p: &ParamStore,
    ids: &LayerIds,
    dims: Dims,
    x: ArrayView2<f64>,
    valid_len: usize,
    out_rows: usize,
) -> (Array2<f64>, LayerCache) {
    let dh = dims.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let (a, ln1) = norm_forward(x, p.vec(ids.ln1_g), p.vec(ids.ln1_b));
    let a_q = a.slice(s![..out_rows, ..]);
    let q = add_bias(a_q.dot(&p.mat(ids.wq)), p.vec(ids.bq));
    let k = add_bias(a.dot(&p.mat(ids.wk)), p.vec(ids.bk));
    let v = add_bias(a.dot(&p.mat(ids.wv)), p.vec(ids.bv));

    let mut ctx = Array2::zeros((out_rows, dims.d));
    let mut probs = Vec::with_capacity(dims.heads);
    for h in 0..dims.heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut sc = q.slice(cols).dot(&k.slice(cols).t());
        for mut row in sc.rows_mut() {
            let max = row
                .iter()
                .take(valid_len)
                .fold(f64::NEG_INFINITY, |m, &v| m.max(v * scale));
            let mut sum = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                *v = if j < valid_len { (*v * scale - max).exp() } else { 0.0 };
                sum += *v;
            }
            row.mapv_inplace(|v| v / sum);
        }
        ctx.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
        probs.push(sc);
    }

    let o = add_bias(ctx.dot(&p.mat(ids.wo)), p.vec(ids.bo));
    let h1 = &x.slice(s![..out_rows, ..]) + &o;
    let (b, ln2) = norm_forward(h1.view(), p.vec(ids.ln2_g), p.vec(ids.ln2_b));
    let u = add_bias(b.dot(&p.mat(ids.w1)), p.vec(ids.b1));
    let act = u.mapv(gelu);
    let y = &h1 + &add_bias(act.dot(&p.mat(ids.w2)), p.vec(ids.b2));
    let cache = LayerCache {
        ln1,
        a,
        q,
        k,
        v,
        probs,
        ctx,
        ln2,
        b,
        u,
        act,
    };
    (y, cache)
}

/// `dy` covers the computed output rows; returns dx over all `n` rows.
fn layer_backward(
    p: &ParamStore,
    ids: &LayerIds,
    dims: Dims,
    c: &LayerCache,
    dy: Array2<f64>,
    grads: &mut Gradients,
) -> Array2<f64> {
    let out_rows = dy.nrows();
    let n = c.a.nrows();
    let dh = dims.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    // Feed-forward branch.
    general_mat_mul(1.0, &c.act.t(), &dy, 1.0, &mut grads.mat_mut(p, ids.w2));
    grads.vec_mut(p, ids.b2).scaled_add(1.0, &dy.sum_axis(Axis(0)));
    let dact = dy.dot(&p.mat(ids.w2).t());
    let mut du = dact;
    du.zip_mut_with(&c.u, |g, &u| *g *= gelu_grad(u));
    general_mat_mul(1.0, &c.b.t(), &du, 1.0, &mut grads.mat_mut(p, ids.w1));
    grads.vec_mut(p, ids.b1).scaled_add(1.0, &du.sum_axis(Axis(0)));
    let db = du.dot(&p.mat(ids.w1).t());
    let dh1 = dy + norm_backward(db.view(), &c.ln2, p.vec(ids.ln2_g), grads, p, (ids.ln2_g, ids.ln2_b));

    // Attention branch.
    general_mat_mul(1.0, &c.ctx.t(), &dh1, 1.0, &mut grads.mat_mut(p, ids.wo));
    grads.vec_mut(p, ids.bo).scaled_add(1.0, &dh1.sum_axis(Axis(0)));
    let dctx = dh1.dot(&p.mat(ids.wo).t());

    let mut dq = Array2::zeros((out_rows, dims.d));
    let mut dk = Array2::zeros((n, dims.d));
    let mut dv = Array2::zeros((n, dims.d));
    for (h, prob) in c.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dctx_h = dctx.slice(cols);
        let dprob = dctx_h.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&prob.t().dot(&dctx_h));
        let mut ds = dprob;
        for (mut ds_row, p_row) in ds.rows_mut().into_iter().zip(prob.rows()) {
            let dot: f64 = ds_row.iter().zip(p_row).map(|(a, b)| a * b).sum();
            for (g, &pr) in ds_row.iter_mut().zip(p_row) {
                *g = pr * (*g - dot) * scale;
            }
        }
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }

    let a_q = c.a.slice(s![..out_rows, ..]);
    general_mat_mul(1.0, &a_q.t(), &dq, 1.0, &mut grads.mat_mut(p, ids.wq));
    grads.vec_mut(p, ids.bq).scaled_add(1.0, &dq.sum_axis(Axis(0)));
    general_mat_mul(1.0, &c.a.t(), &dk, 1.0, &mut grads.mat_mut(p, ids.wk));
    grads.vec_mut(p, ids.bk).scaled_add(1.0, &dk.sum_axis(Axis(0)));
    general_mat_mul(1.0, &c.a.t(), &dv, 1.0, &mut grads.mat_mut(p, ids.wv));
    grads.vec_mut(p, ids.bv).scaled_add(1.0, &dv.sum_axis(Axis(0)));

    let mut da = dk.dot(&p.mat(ids.wk).t());
    general_mat_mul(1.0, &dv, &p.mat(ids.wv).t(), 1.0, &mut da);
    {
        let mut da_q = da.slice_mut(s![..out_rows, ..]);
        general_mat_mul(1.0, &dq, &p.mat(ids.wq).t(), 1.0, &mut da_q);
    }
    let mut dx = norm_backward(da.view(), &c.ln1, p.vec(ids.ln1_g), grads, p, (ids.ln1_g, ids.ln1_b));
    dx.slice_mut(s![..out_rows, ..]).scaled_add(1.0, &dh1);
    dx
}

/// Activations of one encoded sequence, kept for the reverse pass.
pub(crate) struct SeqCache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    final_norm: NormCache,
}

pub(crate) struct Encoder<'a> {
    pub params: &'a ParamStore,
    pub ids: &'a EncoderIds,
    pub dims: Dims,
    pub positions: &'a Array2<f64>,
}

impl Encoder<'_> {
    fn embed_scale(&self) -> f64 {
        (self.dims.d as f64).sqrt()
    }

    /// Runs the encoder and returns the final-layer rows `0..out_rows`.
    pub fn forward(
        &self,
        tokens: &[usize],
        valid_len: usize,
        out_rows: usize,
    ) -> (Array2<f64>, SeqCache) {
        let p = self.params;
        let n = tokens.len();
        let emb = p.mat(self.ids.tok_emb);
        let scale = self.embed_scale();
        let mut x = Array2::zeros((n, self.dims.d));
        for (t, &id) in tokens.iter().enumerate() {
            let mut row = x.row_mut(t);
            row.assign(&self.positions.row(t));
            row.scaled_add(scale, &emb.row(id));
        }
        let depth = self.ids.layers.len();
        let mut layers = Vec::with_capacity(depth);
        for (l, lid) in self.ids.layers.iter().enumerate() {
            let rows = if l + 1 == depth { out_rows } else { n };
            let (y, cache) = layer_forward(p, lid, self.dims, x.view(), valid_len, rows);
            layers.push(cache);
            x = y;
        }
        let (z, final_norm) = norm_forward(x.view(), p.vec(self.ids.final_g), p.vec(self.ids.final_b));
        let cache = SeqCache {
            ids: tokens.to_vec(),
            layers,
            final_norm,
        };
        (z, cache)
    }

    /// Back-propagates `dz` (gradient w.r.t. the returned rows).
    pub fn backward(&self, cache: &SeqCache, dz: Array2<f64>, grads: &mut Gradients) {
        let p = self.params;
        let mut dx = norm_backward(
            dz.view(),
            &cache.final_norm,
            p.vec(self.ids.final_g),
            grads,
            p,
            (self.ids.final_g, self.ids.final_b),
        );
        for (lid, lc) in self.ids.layers.iter().zip(&cache.layers).rev() {
            dx = layer_backward(p, lid, self.dims, lc, dx, grads);
        }
        let scale = self.embed_scale();
        let mut demb = grads.mat_mut(p, self.ids.tok_emb);
        for (t, &id) in cache.ids.iter().enumerate() {
            demb.row_mut(id).scaled_add(scale, &dx.row(t));
        }
    }

    /// Attention weights per layer and head (`n x n` each), computing every
    /// row of every layer.
    pub fn attention_maps(&self, tokens: &[usize], valid_len: usize) -> Vec<Vec<Array2<f64>>> {
        let p = self.params;
        let n = tokens.len();
        let emb = p.mat(self.ids.tok_emb);
        let mut x = Array2::zeros((n, self.dims.d));
        for (t, &id) in tokens.iter().enumerate() {
            let mut row = x.row_mut(t);
            row.assign(&self.positions.row(t));
            row.scaled_add(self.embed_scale(), &emb.row(id));
        }
        let mut maps = Vec::new();
        for lid in &self.ids.layers {
            let (y, cache) = layer_forward(p, lid, self.dims, x.view(), valid_len, n);
            maps.push(cache.probs);
            x = y;
        }
        maps
    }
}
