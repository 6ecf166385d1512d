//! Tensor-level reverse-mode tape.
//!
//! Every node holds a dense `f64` buffer and its shape. Parameter nodes remember
//! where they live in the flat weight vector so that [`Tape::backward`] can scatter
//! their gradients straight into a weight-shaped buffer.

use super::NnError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param { offset: usize },
    Conv2d { x: Var, w: Var, b: Var },
    Conv1d { x: Var, w: Var, b: Var, stride: usize },
    Relu { x: Var },
    MaxPool4 { x: Var, argmax: Vec<usize> },
    Upsample4 { x: Var },
    Linear { x: Var, w: Var, b: Var },
    Reshape { x: Var },
    Slice { x: Var, start: usize },
    Concat { xs: Vec<Var> },
}

#[derive(Clone, Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
}

/// Gradients produced by one backward sweep.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: Vec<f64>,
    nodes: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to any node, e.g. an input.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].as_deref()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn input(&mut self, shape: &[usize], value: &[f64]) -> Result<Var, NnError> {
        if numel(shape) != value.len() {
            return Err(NnError::Shape(format!(
                "input of {} values does not fit shape {shape:?}",
                value.len()
            )));
        }
        Ok(self.push(shape.to_vec(), value.to_vec(), Op::Input))
    }

    /// Slice `weights[offset .. offset + numel(shape)]` as a trainable leaf.
    pub fn param(&mut self, weights: &[f64], offset: usize, shape: &[usize]) -> Var {
        let n = numel(shape);
        self.push(shape.to_vec(), weights[offset..offset + n].to_vec(), Op::Param { offset })
    }

    /// 3×3 cross-correlation with zero padding 1: `[C,H,W] * [Co,C,3,3] + [Co]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 4 || ws[2] != 3 || ws[3] != 3 {
            return Err(NnError::Shape(format!("conv2d input {xs:?} kernel {ws:?}")));
        }
        if ws[1] != xs[0] {
            return Err(NnError::Shape(format!(
                "conv2d channel mismatch: input has {}, kernel expects {}",
                xs[0], ws[1]
            )));
        }
        if self.shape(b) != [ws[0]] {
            return Err(NnError::Shape(format!("conv2d bias {:?}", self.shape(b))));
        }
        let (c, h, wd, co) = (xs[0], xs[1], xs[2], ws[0]);
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        let mut out = vec![0.0; co * h * wd];
        for o in 0..co {
            let plane = &mut out[o * h * wd..(o + 1) * h * wd];
            plane.iter_mut().for_each(|p| *p = bv[o]);
            for ci in 0..c {
                let xin = &xv[ci * h * wd..(ci + 1) * h * wd];
                let k = &wv[(o * c + ci) * 9..(o * c + ci + 1) * 9];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let kval = k[ky * 3 + kx];
                        if kval == 0.0 {
                            continue;
                        }
                        for i in 0..h {
                            let si = i as isize + ky as isize - 1;
                            if si < 0 || si >= h as isize {
                                continue;
                            }
                            let row_in = &xin[si as usize * wd..(si as usize + 1) * wd];
                            let row_out = &mut plane[i * wd..(i + 1) * wd];
                            let (lo, hi) = match kx {
                                0 => (1, wd),
                                1 => (0, wd),
                                _ => (0, wd - 1),
                            };
                            for j in lo..hi {
                                row_out[j] += kval * row_in[j + kx - 1];
                            }
                        }
                    }
                }
            }
        }
        Ok(self.push(vec![co, h, wd], out, Op::Conv2d { x, w, b }))
    }

    /// Single-channel valid 1-D convolution: `[L] * [k] + [1]` with the given stride.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var, NnError> {
        let l = self.value(x).len();
        let k = self.value(w).len();
        if stride == 0 || k == 0 || k > l || self.value(b).len() != 1 {
            return Err(NnError::Shape(format!("conv1d length {l} kernel {k} stride {stride}")));
        }
        let out_len = (l - k) / stride + 1;
        let (xv, wv, bias) = (self.value(x), self.value(w), self.value(b)[0]);
        let out: Vec<f64> = (0..out_len)
            .map(|t| bias + (0..k).map(|j| wv[j] * xv[t * stride + j]).sum::<f64>())
            .collect();
        Ok(self.push(vec![out_len], out, Op::Conv1d { x, w, b, stride }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::Relu { x })
    }

    /// Non-overlapping 4×4 max pooling on `[C,H,W]`.
    pub fn maxpool4(&mut self, x: Var) -> Result<Var, NnError> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || s[1] % 4 != 0 || s[2] % 4 != 0 {
            return Err(NnError::Shape(format!("maxpool4 needs [C,H,W] with H,W divisible by 4, got {s:?}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (oh, ow) = (h / 4, w / 4);
        let xv = self.value(x);
        let mut out = Vec::with_capacity(c * oh * ow);
        let mut argmax = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            for bi in 0..oh {
                for bj in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for di in 0..4 {
                        for dj in 0..4 {
                            let idx = ch * h * w + (4 * bi + di) * w + 4 * bj + dj;
                            // strict `>` keeps the first occurrence on ties
                            if xv[idx] > best {
                                best = xv[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
        Ok(self.push(vec![c, oh, ow], out, Op::MaxPool4 { x, argmax }))
    }

    /// Nearest-neighbour 4× upsampling on `[C,H,W]`.
    pub fn upsample4(&mut self, x: Var) -> Result<Var, NnError> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(NnError::Shape(format!("upsample4 needs [C,H,W], got {s:?}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let xv = self.value(x);
        let mut out = vec![0.0; c * h * w * 16];
        for ch in 0..c {
            for i in 0..4 * h {
                for j in 0..4 * w {
                    out[ch * 16 * h * w + i * 4 * w + j] = xv[ch * h * w + (i / 4) * w + j / 4];
                }
            }
        }
        Ok(self.push(vec![c, 4 * h, 4 * w], out, Op::Upsample4 { x }))
    }

    /// `W x + b` with `W: [out, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let ws = self.shape(w).to_vec();
        let n_in = self.value(x).len();
        if ws.len() != 2 || ws[1] != n_in || self.value(b).len() != ws[0] {
            return Err(NnError::Shape(format!(
                "linear weight {ws:?} bias {:?} on input of length {n_in}",
                self.shape(b)
            )));
        }
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let out: Vec<f64> = (0..ws[0])
            .map(|o| bv[o] + wv[o * n_in..(o + 1) * n_in].iter().zip(xv).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok(self.push(vec![ws[0]], out, Op::Linear { x, w, b }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NnError> {
        if numel(shape) != self.value(x).len() {
            return Err(NnError::Shape(format!("cannot reshape {:?} to {shape:?}", self.shape(x))));
        }
        let v = self.value(x).to_vec();
        Ok(self.push(shape.to_vec(), v, Op::Reshape { x }))
    }

    pub fn flatten(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        self.reshape(x, &[n]).expect("same element count")
    }

    /// Contiguous flat slice `[start, start+len)` reshaped to `shape`.
    pub fn slice(&mut self, x: Var, start: usize, shape: &[usize]) -> Result<Var, NnError> {
        let len = numel(shape);
        if start + len > self.value(x).len() {
            return Err(NnError::Shape(format!("slice {start}+{len} out of {}", self.value(x).len())));
        }
        let v = self.value(x)[start..start + len].to_vec();
        Ok(self.push(shape.to_vec(), v, Op::Slice { x, start }))
    }

    /// Flat concatenation along the leading axis.
    pub fn concat(&mut self, xs: &[Var]) -> Var {
        let mut v = Vec::new();
        for &x in xs {
            v.extend_from_slice(self.value(x));
        }
        let n = v.len();
        self.push(vec![n], v, Op::Concat { xs: xs.to_vec() })
    }

    /// Reverse sweep from `out` seeded with `cotangent`; `n_weights` sizes the
    /// parameter-gradient buffer.
    pub fn backward(&self, out: Var, cotangent: &[f64], n_weights: usize) -> Result<Gradients, NnError> {
        if cotangent.len() != self.value(out).len() {
            return Err(NnError::Shape(format!(
                "cotangent of length {} for output of length {}",
                cotangent.len(),
                self.value(out).len()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(cotangent.to_vec());
        let mut params = vec![0.0; n_weights];

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param { offset } => {
                    for (p, d) in params[*offset..*offset + g.len()].iter_mut().zip(&g) {
                        *p += d;
                    }
                }
                Op::Relu { x } => {
                    let xv = self.value(*x);
                    let gx = acc(&mut grads, *x, xv.len());
                    for ((gi, &xi), &gy) in gx.iter_mut().zip(xv).zip(&g) {
                        if xi > 0.0 {
                            *gi += gy;
                        }
                    }
                }
                Op::MaxPool4 { x, argmax } => {
                    let len = self.value(*x).len();
                    let gx = acc(&mut grads, *x, len);
                    for (&a, &gy) in argmax.iter().zip(&g) {
                        gx[a] += gy;
                    }
                }
                Op::Upsample4 { x } => {
                    let s = self.shape(*x).to_vec();
                    let (c, h, w) = (s[0], s[1], s[2]);
                    let gx = acc(&mut grads, *x, c * h * w);
                    for ch in 0..c {
                        for i in 0..4 * h {
                            for j in 0..4 * w {
                                gx[ch * h * w + (i / 4) * w + j / 4] += g[ch * 16 * h * w + i * 4 * w + j];
                            }
                        }
                    }
                }
                Op::Reshape { x } => {
                    let gx = acc(&mut grads, *x, g.len());
                    for (a, b) in gx.iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Slice { x, start } => {
                    let len = self.value(*x).len();
                    let gx = acc(&mut grads, *x, len);
                    for (a, b) in gx[*start..*start + g.len()].iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Concat { xs } => {
                    let mut off = 0;
                    for &x in xs {
                        let len = self.value(x).len();
                        let gx = acc(&mut grads, x, len);
                        for (a, b) in gx.iter_mut().zip(&g[off..off + len]) {
                            *a += b;
                        }
                        off += len;
                    }
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let n_in = xv.len();
                    {
                        let gb = acc(&mut grads, *b, g.len());
                        for (a, d) in gb.iter_mut().zip(&g) {
                            *a += d;
                        }
                    }
                    {
                        let gw = acc(&mut grads, *w, wv.len());
                        for (o, &go) in g.iter().enumerate() {
                            for (a, &xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(xv) {
                                *a += go * xi;
                            }
                        }
                    }
                    let gx = acc(&mut grads, *x, n_in);
                    for (o, &go) in g.iter().enumerate() {
                        for (a, &wi) in gx.iter_mut().zip(&wv[o * n_in..(o + 1) * n_in]) {
                            *a += go * wi;
                        }
                    }
                }
                Op::Conv1d { x, w, b, stride } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let k = wv.len();
                    {
                        let gb = acc(&mut grads, *b, 1);
                        gb[0] += g.iter().sum::<f64>();
                    }
                    {
                        let gw = acc(&mut grads, *w, k);
                        for (t, &gt) in g.iter().enumerate() {
                            for j in 0..k {
                                gw[j] += gt * xv[t * stride + j];
                            }
                        }
                    }
                    let gx = acc(&mut grads, *x, xv.len());
                    for (t, &gt) in g.iter().enumerate() {
                        for j in 0..k {
                            gx[t * stride + j] += gt * wv[j];
                        }
                    }
                }
                Op::Conv2d { x, w, b } => {
                    let xs = self.shape(*x).to_vec();
                    let co = self.shape(*w)[0];
                    let (c, h, wd) = (xs[0], xs[1], xs[2]);
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    {
                        let gb = acc(&mut grads, *b, co);
                        for o in 0..co {
                            gb[o] += g[o * h * wd..(o + 1) * h * wd].iter().sum::<f64>();
                        }
                    }
                    let mut gw = vec![0.0; wv.len()];
                    let mut gx = vec![0.0; xv.len()];
                    for o in 0..co {
                        let gplane = &g[o * h * wd..(o + 1) * h * wd];
                        for ci in 0..c {
                            let xin = &xv[ci * h * wd..(ci + 1) * h * wd];
                            let gin = &mut gx[ci * h * wd..(ci + 1) * h * wd];
                            let kbase = (o * c + ci) * 9;
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let kval = wv[kbase + ky * 3 + kx];
                                    let mut dk = 0.0;
                                    for i in 0..h {
                                        let si = i as isize + ky as isize - 1;
                                        if si < 0 || si >= h as isize {
                                            continue;
                                        }
                                        let si = si as usize;
                                        let (lo, hi) = match kx {
                                            0 => (1, wd),
                                            1 => (0, wd),
                                            _ => (0, wd - 1),
                                        };
                                        for j in lo..hi {
                                            let gy = gplane[i * wd + j];
                                            let sj = j + kx - 1;
                                            dk += gy * xin[si * wd + sj];
                                            gin[si * wd + sj] += gy * kval;
                                        }
                                    }
                                    gw[kbase + ky * 3 + kx] += dk;
                                }
                            }
                        }
                    }
                    for (a, d) in acc(&mut grads, *w, gw.len()).iter_mut().zip(&gw) {
                        *a += d;
                    }
                    for (a, d) in acc(&mut grads, *x, gx.len()).iter_mut().zip(&gx) {
                        *a += d;
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { params, nodes: grads })
    }
}
