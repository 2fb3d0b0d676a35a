//! Reverse-mode automatic differentiation over vectors of `f64`.
//!
//! A [`Tape`] records operations on vectors while reading parameters from a
//! borrowed [`ParamStore`]. Scalars are vectors of length one. Gradients for
//! parameters are accumulated into a separate [`Grads`] buffer so several
//! tapes can share one store and run independently.

use super::params::{Grads, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Row {
        param: ParamId,
        row: usize,
    },
    /// `W x (+ b)` with `W` stored row-major.
    Affine {
        w: ParamId,
        b: Option<ParamId>,
        x: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Ln(Var),
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Dot(Var, Var),
    Sum(Var),
    Pick(Var, usize),
    Gather(Var, Vec<usize>),
    LogSoftmax(Var),
    Softmax(Var),
    /// `[k_0 . q, k_1 . q, ...]`
    Scores {
        keys: Vec<Var>,
        q: Var,
    },
    /// `sum_i w_i v_i`
    Mix {
        w: Var,
        vals: Vec<Var>,
    },
    /// `log sum_{i in idx} exp(x_i)`
    LogSumExpIdx(Var, Vec<usize>),
    /// Fused LSTM cell: gates `[i f g o]` (pre-activation) and previous cell
    /// state; output is `[h; c]`.
    Lstm {
        gates: Var,
        c: Var,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(1024),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn len(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.input(vec![0.0; n])
    }

    pub fn constant(&mut self, x: f64) -> Var {
        self.input(vec![x])
    }

    /// Row `row` of a parameter matrix (embedding lookup).
    pub fn row(&mut self, param: ParamId, row: usize) -> Var {
        let t = self.params.get(param);
        let value = t.row(row).to_vec();
        self.push(value, Op::Row { param, row })
    }

    pub fn affine(&mut self, w: ParamId, b: Option<ParamId>, x: Var) -> Var {
        let wt = self.params.get(w);
        let xv = &self.nodes[x.0].value;
        assert_eq!(
            wt.cols,
            xv.len(),
            "affine shape mismatch for `{}`",
            self.params.name(w)
        );
        let mut y: Vec<f64> = (0..wt.rows).map(|r| dot(wt.row(r), xv)).collect();
        if let Some(b) = b {
            for (yi, bi) in y.iter_mut().zip(&self.params.get(b).data) {
                *yi += bi;
            }
        }
        self.push(y, Op::Affine { w, b, x })
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "elementwise shape mismatch");
        let v = av.iter().zip(bv).map(|(x, y)| f(*x, *y)).collect();
        self.push(v, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let v = self.nodes[a.0].value.iter().map(|x| f(*x)).collect();
        self.push(v, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.map(a, |x| x * k, Op::Scale(a, k))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.map(a, f64::ln, Op::Ln(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut v = Vec::with_capacity(parts.iter().map(|p| self.len(*p)).sum());
        for p in parts {
            v.extend_from_slice(&self.nodes[p.0].value);
        }
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = self.nodes[x.0].value[start..start + len].to_vec();
        self.push(v, Op::Slice { x, start })
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let v = dot(&self.nodes[a.0].value, &self.nodes[b.0].value);
        self.push(vec![v], Op::Dot(a, b))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.iter().sum();
        self.push(vec![v], Op::Sum(a))
    }

    /// Sums scalar variables.
    pub fn add_all(&mut self, xs: &[Var]) -> Var {
        match xs {
            [] => self.constant(0.0),
            [x] => *x,
            _ => {
                let c = self.concat(xs);
                self.sum(c)
            }
        }
    }

    pub fn pick(&mut self, a: Var, i: usize) -> Var {
        let v = self.nodes[a.0].value[i];
        self.push(vec![v], Op::Pick(a, i))
    }

    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Var {
        let av = &self.nodes[a.0].value;
        let v = idx.iter().map(|&i| av[i]).collect();
        self.push(v, Op::Gather(a, idx.to_vec()))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let lse = log_sum_exp(av.iter().copied());
        let v = av.iter().map(|x| x - lse).collect();
        self.push(v, Op::LogSoftmax(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let lse = log_sum_exp(av.iter().copied());
        let v = av.iter().map(|x| (x - lse).exp()).collect();
        self.push(v, Op::Softmax(a))
    }

    pub fn scores(&mut self, keys: &[Var], q: Var) -> Var {
        let qv = &self.nodes[q.0].value;
        let v = keys
            .iter()
            .map(|k| dot(&self.nodes[k.0].value, qv))
            .collect();
        self.push(
            v,
            Op::Scores {
                keys: keys.to_vec(),
                q,
            },
        )
    }

    pub fn mix(&mut self, w: Var, vals: &[Var]) -> Var {
        let wv = &self.nodes[w.0].value;
        assert_eq!(wv.len(), vals.len(), "mix weight count");
        let n = self.nodes[vals[0].0].value.len();
        let mut out = vec![0.0; n];
        for (wi, v) in wv.iter().zip(vals) {
            for (o, x) in out.iter_mut().zip(&self.nodes[v.0].value) {
                *o += wi * x;
            }
        }
        self.push(
            out,
            Op::Mix {
                w,
                vals: vals.to_vec(),
            },
        )
    }

    pub fn log_sum_exp_idx(&mut self, a: Var, idx: &[usize]) -> Var {
        let av = &self.nodes[a.0].value;
        let v = log_sum_exp(idx.iter().map(|&i| av[i]));
        self.push(vec![v], Op::LogSumExpIdx(a, idx.to_vec()))
    }

    /// One LSTM step from pre-activation gates; returns `(h, c)`.
    pub fn lstm_cell(&mut self, gates: Var, c: Var) -> (Var, Var) {
        let g = &self.nodes[gates.0].value;
        let cp = &self.nodes[c.0].value;
        let n = cp.len();
        assert_eq!(g.len(), 4 * n, "lstm gate size");
        let mut out = vec![0.0; 2 * n];
        for k in 0..n {
            let i = sigmoid(g[k]);
            let f = sigmoid(g[n + k]);
            let gg = g[2 * n + k].tanh();
            let o = sigmoid(g[3 * n + k]);
            let cn = f * cp[k] + i * gg;
            out[n + k] = cn;
            out[k] = o * cn.tanh();
        }
        let hc = self.push(out, Op::Lstm { gates, c });
        (self.slice(hc, 0, n), self.slice(hc, n, n))
    }

    /// Backpropagates from the scalar `loss`, adding `seed * d loss / d param`
    /// into `grads`.
    pub fn backward(&self, loss: Var, seed: f64, grads: &mut Grads) {
        self.backward_many(&[(loss, seed)], grads);
    }

    /// Backpropagates from several scalars at once.
    pub fn backward_many(&self, roots: &[(Var, f64)], grads: &mut Grads) {
        let Some(last) = roots.iter().map(|(v, _)| v.0).max() else {
            return;
        };
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); last + 1];
        for &(v, s) in roots {
            assert_eq!(
                self.nodes[v.0].value.len(),
                1,
                "backward root must be a scalar"
            );
            if adj[v.0].is_empty() {
                adj[v.0] = vec![0.0];
            }
            adj[v.0][0] += s;
        }
        for i in (0..=last).rev() {
            if adj[i].is_empty() {
                continue;
            }
            let d = std::mem::take(&mut adj[i]);
            self.propagate(i, &d, &mut adj, grads);
        }
    }

    fn propagate(&self, i: usize, d: &[f64], adj: &mut [Vec<f64>], grads: &mut Grads) {
        let node = &self.nodes[i];
        let val = |v: &Var| -> &[f64] { &self.nodes[v.0].value };
        fn acc(adj: &mut [Vec<f64>], v: Var, n: usize) -> &mut [f64] {
            let a = &mut adj[v.0];
            if a.is_empty() {
                *a = vec![0.0; n];
            }
            a
        }
        match &node.op {
            Op::Input => {}
            Op::Row { param, row } => {
                let cols = self.params.get(*param).cols;
                let g = &mut grads.data[*param][row * cols..(row + 1) * cols];
                for (gi, di) in g.iter_mut().zip(d) {
                    *gi += di;
                }
            }
            Op::Affine { w, b, x } => {
                let wt = self.params.get(*w);
                let xv = val(x);
                let gw = &mut grads.data[*w];
                for (r, dr) in d.iter().enumerate() {
                    if *dr == 0.0 {
                        continue;
                    }
                    let row = &mut gw[r * wt.cols..(r + 1) * wt.cols];
                    for (g, xi) in row.iter_mut().zip(xv) {
                        *g += dr * xi;
                    }
                }
                if let Some(b) = b {
                    for (g, dr) in grads.data[*b].iter_mut().zip(d) {
                        *g += dr;
                    }
                }
                let ax = acc(adj, *x, wt.cols);
                for (r, dr) in d.iter().enumerate() {
                    if *dr == 0.0 {
                        continue;
                    }
                    for (a, wv) in ax.iter_mut().zip(wt.row(r)) {
                        *a += dr * wv;
                    }
                }
            }
            Op::Add(a, b) => {
                for (x, di) in acc(adj, *a, d.len()).iter_mut().zip(d) {
                    *x += di;
                }
                for (x, di) in acc(adj, *b, d.len()).iter_mut().zip(d) {
                    *x += di;
                }
            }
            Op::Sub(a, b) => {
                for (x, di) in acc(adj, *a, d.len()).iter_mut().zip(d) {
                    *x += di;
                }
                for (x, di) in acc(adj, *b, d.len()).iter_mut().zip(d) {
                    *x -= di;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(a).to_vec(), val(b).to_vec());
                for ((x, di), bi) in acc(adj, *a, d.len()).iter_mut().zip(d).zip(&bv) {
                    *x += di * bi;
                }
                for ((x, di), ai) in acc(adj, *b, d.len()).iter_mut().zip(d).zip(&av) {
                    *x += di * ai;
                }
            }
            Op::Scale(a, k) => {
                for (x, di) in acc(adj, *a, d.len()).iter_mut().zip(d) {
                    *x += di * k;
                }
            }
            Op::Sigmoid(a) => {
                for ((x, di), y) in acc(adj, *a, d.len()).iter_mut().zip(d).zip(&node.value) {
                    *x += di * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                for ((x, di), y) in acc(adj, *a, d.len()).iter_mut().zip(d).zip(&node.value) {
                    *x += di * (1.0 - y * y);
                }
            }
            Op::Exp(a) => {
                for ((x, di), y) in acc(adj, *a, d.len()).iter_mut().zip(d).zip(&node.value) {
                    *x += di * y;
                }
            }
            Op::Ln(a) => {
                let av = val(a).to_vec();
                for ((x, di), ai) in acc(adj, *a, d.len()).iter_mut().zip(d).zip(&av) {
                    *x += di / ai;
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = self.nodes[p.0].value.len();
                    for (x, di) in acc(adj, *p, n).iter_mut().zip(&d[off..off + n]) {
                        *x += di;
                    }
                    off += n;
                }
            }
            Op::Slice { x, start } => {
                let n = self.nodes[x.0].value.len();
                for (a, di) in acc(adj, *x, n)[*start..start + d.len()].iter_mut().zip(d) {
                    *a += di;
                }
            }
            Op::Dot(a, b) => {
                let (av, bv) = (val(a).to_vec(), val(b).to_vec());
                for (x, bi) in acc(adj, *a, av.len()).iter_mut().zip(&bv) {
                    *x += d[0] * bi;
                }
                for (x, ai) in acc(adj, *b, bv.len()).iter_mut().zip(&av) {
                    *x += d[0] * ai;
                }
            }
            Op::Sum(a) => {
                let n = self.nodes[a.0].value.len();
                for x in acc(adj, *a, n).iter_mut() {
                    *x += d[0];
                }
            }
            Op::Pick(a, k) => {
                let n = self.nodes[a.0].value.len();
                acc(adj, *a, n)[*k] += d[0];
            }
            Op::Gather(a, idx) => {
                let n = self.nodes[a.0].value.len();
                let ax = acc(adj, *a, n);
                for (k, di) in idx.iter().zip(d) {
                    ax[*k] += di;
                }
            }
            Op::LogSoftmax(a) => {
                let total: f64 = d.iter().sum();
                for ((x, di), y) in acc(adj, *a, d.len()).iter_mut().zip(d).zip(&node.value) {
                    *x += di - y.exp() * total;
                }
            }
            Op::Softmax(a) => {
                let s = dot(d, &node.value);
                for ((x, di), y) in acc(adj, *a, d.len()).iter_mut().zip(d).zip(&node.value) {
                    *x += y * (di - s);
                }
            }
            Op::Scores { keys, q } => {
                let qv = val(q).to_vec();
                let mut dq = vec![0.0; qv.len()];
                for (k, di) in keys.iter().zip(d) {
                    if *di == 0.0 {
                        continue;
                    }
                    let kv = &self.nodes[k.0].value;
                    for (g, x) in dq.iter_mut().zip(kv) {
                        *g += di * x;
                    }
                    for (x, qi) in acc(adj, *k, qv.len()).iter_mut().zip(&qv) {
                        *x += di * qi;
                    }
                }
                for (x, g) in acc(adj, *q, qv.len()).iter_mut().zip(&dq) {
                    *x += g;
                }
            }
            Op::Mix { w, vals } => {
                let wv = val(w).to_vec();
                let dw: Vec<f64> = vals
                    .iter()
                    .map(|v| dot(d, &self.nodes[v.0].value))
                    .collect();
                for (x, g) in acc(adj, *w, wv.len()).iter_mut().zip(&dw) {
                    *x += g;
                }
                for (v, wi) in vals.iter().zip(&wv) {
                    for (x, di) in acc(adj, *v, d.len()).iter_mut().zip(d) {
                        *x += wi * di;
                    }
                }
            }
            Op::LogSumExpIdx(a, idx) => {
                let av = val(a);
                let p: Vec<f64> = idx.iter().map(|&k| (av[k] - node.value[0]).exp()).collect();
                let n = av.len();
                let ax = acc(adj, *a, n);
                for (k, pk) in idx.iter().zip(&p) {
                    ax[*k] += d[0] * pk;
                }
            }
            Op::Lstm { gates, c } => {
                let g = val(gates).to_vec();
                let cp = val(c).to_vec();
                let n = cp.len();
                let (dh, dc_out) = d.split_at(n);
                let mut dg = vec![0.0; 4 * n];
                let mut dcp = vec![0.0; n];
                for k in 0..n {
                    let i = sigmoid(g[k]);
                    let f = sigmoid(g[n + k]);
                    let gg = g[2 * n + k].tanh();
                    let o = sigmoid(g[3 * n + k]);
                    let tc = node.value[n + k].tanh();
                    let dc = dc_out[k] + dh[k] * o * (1.0 - tc * tc);
                    dg[k] = dc * gg * i * (1.0 - i);
                    dg[n + k] = dc * cp[k] * f * (1.0 - f);
                    dg[2 * n + k] = dc * i * (1.0 - gg * gg);
                    dg[3 * n + k] = dh[k] * tc * o * (1.0 - o);
                    dcp[k] = dc * f;
                }
                for (x, v) in acc(adj, *gates, 4 * n).iter_mut().zip(&dg) {
                    *x += v;
                }
                for (x, v) in acc(adj, *c, n).iter_mut().zip(&dcp) {
                    *x += v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamStore;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central differences over every parameter coordinate.
    fn check(store: &mut ParamStore, f: impl Fn(&mut Tape) -> Var) {
        let mut grads = store.zero_grads();
        {
            let mut t = Tape::new(store);
            let l = f(&mut t);
            t.backward(l, 1.0, &mut grads);
        }
        let eps = 1e-6;
        for p in 0..store.len() {
            for k in 0..store.get(p).data.len() {
                let orig = store.get(p).data[k];
                store.get_mut(p).data[k] = orig + eps;
                let up = {
                    let mut t = Tape::new(store);
                    let l = f(&mut t);
                    t.scalar(l)
                };
                store.get_mut(p).data[k] = orig - eps;
                let down = {
                    let mut t = Tape::new(store);
                    let l = f(&mut t);
                    t.scalar(l)
                };
                store.get_mut(p).data[k] = orig;
                let num = (up - down) / (2.0 * eps);
                let ana = grads.data[p][k];
                let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-8);
                assert!(
                    rel < 1e-5 || (num - ana).abs() < 1e-9,
                    "param {p}[{k}]: {ana} vs {num}"
                );
            }
        }
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let emb = store.add_uniform("emb", 3, 4, 0.5, &mut rng);
        let w = store.add_uniform("w", 8, 4, 0.5, &mut rng);
        let b = store.add_uniform("b", 1, 8, 0.5, &mut rng);
        let v = store.add_uniform("v", 5, 4, 0.5, &mut rng);
        check(&mut store, |t| {
            let x0 = t.row(emb, 0);
            let x1 = t.row(emb, 2);
            let h = t.affine(w, Some(b), x0);
            let c = t.slice(h, 4, 4);
            let (h1, c1) = {
                let g = t.concat(&[h, h]);
                t.lstm_cell(g, c)
            };
            let s = t.sigmoid(x1);
            let m = t.mul(h1, s);
            let n = t.tanh(c1);
            let e = t.exp(n);
            let sub = t.sub(e, m);
            let sc = t.scale(sub, 0.7);
            let keys = [x0, x1, sc];
            let att = t.scores(&keys, m);
            let p = t.softmax(att);
            let ctx = t.mix(p, &keys);
            let logits = t.affine(v, None, ctx);
            let lp = t.log_softmax(logits);
            let picked = t.pick(lp, 2);
            let gathered = t.gather(logits, &[0, 3, 4]);
            let glp = t.log_softmax(gathered);
            let g1 = t.pick(glp, 1);
            let lse = t.log_sum_exp_idx(logits, &[1, 2]);
            let d = t.dot(ctx, x0);
            let sq = t.mul(ctx, ctx);
            let one = t.constant(1.0);
            let ssum = t.sum(sq);
            let sp = t.add(ssum, one);
            let lg = t.ln(sp);
            t.add_all(&[picked, g1, lse, d, lg])
        });
    }

    #[test]
    fn log_softmax_normalizes() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let x = t.input(vec![1.0, -2.0, 30.0, 0.5]);
        let lp = t.log_softmax(x);
        let total: f64 = t.value(lp).iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
