//! Minimal reverse-mode autodiff over dense f64 tensors.
//!
//! The denoiser is small enough that an eager tape works well: every op
//! computes its value on construction and records enough to push gradients
//! back in reverse insertion order. Shapes are `[rows, cols]` for matrices
//! and `[channels, height, width]` for feature grids.

use crate::error::{Error, Result};

/// Dense row-major tensor value.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// Matrix [m,n] plus a length-n row vector broadcast over rows.
    AddRow(Var, Var),
    /// Grid [c,h,w] plus a length-c vector broadcast over pixels.
    AddChannel(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    /// stride 1, zero padding kh/2 x kw/2 (same-size output)
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
    },
    AvgPool2(Var),
    UpsampleNearest2(Var),
    ConcatChannels(Vec<Var>),
    Silu(Var),
    SoftmaxRows(Var),
    /// [c,h,w] -> [h*w, c]
    GridToSeq(Var),
    /// [h*w, c] -> [c,h,w]
    SeqToGrid(Var, usize, usize, usize),
    /// mean of squared entries -> scalar
    MeanSquare(Var),
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    op: Op,
}

/// Eager computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target w.r.t. `v`; zeros if the
    /// node was not reached.
    pub fn grad(&self, v: Var) -> Vec<f64> {
        match &self.nodes[v.0].grad {
            Some(g) => g.clone(),
            None => vec![0.0; self.nodes[v.0].value.numel()],
        }
    }

    fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    // ---- ops ----

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let data = self.nodes[a.0]
            .value
            .data
            .iter()
            .zip(&self.nodes[b.0].value.data)
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor { shape, data }, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let data = self.nodes[a.0]
            .value
            .data
            .iter()
            .zip(&self.nodes[b.0].value.data)
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor { shape, data }, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let data = self.nodes[a.0]
            .value
            .data
            .iter()
            .zip(&self.nodes[b.0].value.data)
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor { shape, data }, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let data = self.nodes[a.0].value.data.iter().map(|x| x * k).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor { shape, data }, Op::Scale(a, k))
    }

    pub fn add_row(&mut self, m: Var, row: Var) -> Var {
        let (rows, cols) = (self.shape(m)[0], self.shape(m)[1]);
        assert_eq!(self.shape(row), &[cols], "row broadcast mismatch");
        let mut data = self.nodes[m.0].value.data.clone();
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] += self.nodes[row.0].value.data[c];
            }
        }
        let shape = self.shape(m).to_vec();
        self.push(Tensor { shape, data }, Op::AddRow(m, row))
    }

    pub fn add_channel(&mut self, grid: Var, vec: Var) -> Var {
        let s = self.shape(grid).to_vec();
        assert_eq!(s.len(), 3, "add_channel expects [c,h,w]");
        assert_eq!(self.shape(vec), &[s[0]], "channel broadcast mismatch");
        let hw = s[1] * s[2];
        let mut data = self.nodes[grid.0].value.data.clone();
        for c in 0..s[0] {
            let v = self.nodes[vec.0].value.data[c];
            for i in 0..hw {
                data[c * hw + i] += v;
            }
        }
        self.push(Tensor { shape: s, data }, Op::AddChannel(grid, vec))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
        let (k2, n) = (self.shape(b)[0], self.shape(b)[1]);
        assert_eq!(k, k2, "matmul inner dims mismatch");
        let mut data = vec![0.0; m * n];
        let av = &self.nodes[a.0].value.data;
        let bv = &self.nodes[b.0].value.data;
        for i in 0..m {
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                let drow = &mut data[i * n..(i + 1) * n];
                for (d, bb) in drow.iter_mut().zip(brow) {
                    *d += x * bb;
                }
            }
        }
        self.push(
            Tensor {
                shape: vec![m, n],
                data,
            },
            Op::MatMul(a, b),
        )
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (m, n) = (self.shape(a)[0], self.shape(a)[1]);
        let av = &self.nodes[a.0].value.data;
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = av[i * n + j];
            }
        }
        self.push(
            Tensor {
                shape: vec![n, m],
                data,
            },
            Op::Transpose(a),
        )
    }

    /// Same-size convolution: input [ci,h,w], weight [co,ci,kh,kw] with odd
    /// kh/kw, bias [co].
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Var {
        let is = self.shape(input).to_vec();
        let ws = self.shape(weight).to_vec();
        assert_eq!(is.len(), 3, "conv2d input must be [c,h,w]");
        assert_eq!(ws.len(), 4, "conv2d weight must be [co,ci,kh,kw]");
        assert_eq!(is[0], ws[1], "conv2d channel mismatch");
        assert_eq!(self.shape(bias), &[ws[0]], "conv2d bias mismatch");
        let (ci, h, w) = (is[0], is[1], is[2]);
        let (co, kh, kw) = (ws[0], ws[2], ws[3]);
        let (ph, pw) = (kh / 2, kw / 2);
        let iv = &self.nodes[input.0].value.data;
        let wv = &self.nodes[weight.0].value.data;
        let bv = &self.nodes[bias.0].value.data;
        let mut data = vec![0.0; co * h * w];
        for o in 0..co {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bv[o];
                    for c in 0..ci {
                        for dy in 0..kh {
                            let sy = y as isize + dy as isize - ph as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for dx in 0..kw {
                                let sx = x as isize + dx as isize - pw as isize;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                acc += wv[((o * ci + c) * kh + dy) * kw + dx]
                                    * iv[(c * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    data[(o * h + y) * w + x] = acc;
                }
            }
        }
        self.push(
            Tensor {
                shape: vec![co, h, w],
                data,
            },
            Op::Conv2d {
                input,
                weight,
                bias,
            },
        )
    }

    pub fn avg_pool2(&mut self, a: Var) -> Var {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 3);
        assert!(s[1] % 2 == 0 && s[2] % 2 == 0, "avg_pool2 needs even dims");
        let (c, h, w) = (s[0], s[1], s[2]);
        let (oh, ow) = (h / 2, w / 2);
        let av = &self.nodes[a.0].value.data;
        let mut data = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = 0.0;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            acc += av[(ch * h + 2 * y + dy) * w + 2 * x + dx];
                        }
                    }
                    data[(ch * oh + y) * ow + x] = acc / 4.0;
                }
            }
        }
        self.push(
            Tensor {
                shape: vec![c, oh, ow],
                data,
            },
            Op::AvgPool2(a),
        )
    }

    pub fn upsample_nearest2(&mut self, a: Var) -> Var {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 3);
        let (c, h, w) = (s[0], s[1], s[2]);
        let (oh, ow) = (h * 2, w * 2);
        let av = &self.nodes[a.0].value.data;
        let mut data = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for y in 0..oh {
                for x in 0..ow {
                    data[(ch * oh + y) * ow + x] = av[(ch * h + y / 2) * w + x / 2];
                }
            }
        }
        self.push(
            Tensor {
                shape: vec![c, oh, ow],
                data,
            },
            Op::UpsampleNearest2(a),
        )
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let (h, w) = (self.shape(parts[0])[1], self.shape(parts[0])[2]);
        let mut total_c = 0;
        for p in parts {
            let s = self.shape(*p);
            assert_eq!(s.len(), 3);
            assert_eq!((s[1], s[2]), (h, w), "concat spatial mismatch");
            total_c += s[0];
        }
        let mut data = Vec::with_capacity(total_c * h * w);
        for p in parts {
            data.extend_from_slice(&self.nodes[p.0].value.data);
        }
        self.push(
            Tensor {
                shape: vec![total_c, h, w],
                data,
            },
            Op::ConcatChannels(parts.to_vec()),
        )
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let data = self.nodes[a.0]
            .value
            .data
            .iter()
            .map(|&x| x * sigmoid(x))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor { shape, data }, Op::Silu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (m, n) = (self.shape(a)[0], self.shape(a)[1]);
        let av = &self.nodes[a.0].value.data;
        let mut data = vec![0.0; m * n];
        for r in 0..m {
            let row = &av[r * n..(r + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (i, &x) in row.iter().enumerate() {
                let e = (x - max).exp();
                data[r * n + i] = e;
                sum += e;
            }
            for i in 0..n {
                data[r * n + i] /= sum;
            }
        }
        self.push(
            Tensor {
                shape: vec![m, n],
                data,
            },
            Op::SoftmaxRows(a),
        )
    }

    /// [c,h,w] -> [h*w, c] (pixel rows, channel columns).
    pub fn grid_to_seq(&mut self, a: Var) -> Var {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 3);
        let (c, h, w) = (s[0], s[1], s[2]);
        let av = &self.nodes[a.0].value.data;
        let mut data = vec![0.0; c * h * w];
        for ch in 0..c {
            for i in 0..h * w {
                data[i * c + ch] = av[ch * h * w + i];
            }
        }
        self.push(
            Tensor {
                shape: vec![h * w, c],
                data,
            },
            Op::GridToSeq(a),
        )
    }

    /// [h*w, c] -> [c,h,w].
    pub fn seq_to_grid(&mut self, a: Var, c: usize, h: usize, w: usize) -> Var {
        assert_eq!(self.shape(a), &[h * w, c]);
        let av = &self.nodes[a.0].value.data;
        let mut data = vec![0.0; c * h * w];
        for ch in 0..c {
            for i in 0..h * w {
                data[ch * h * w + i] = av[i * c + ch];
            }
        }
        self.push(
            Tensor {
                shape: vec![c, h, w],
                data,
            },
            Op::SeqToGrid(a, c, h, w),
        )
    }

    /// Mean of squared entries, a scalar.
    pub fn mean_square(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].value.numel() as f64;
        let v = self.nodes[a.0].value.data.iter().map(|x| x * x).sum::<f64>() / n;
        self.push(Tensor::scalar(v), Op::MeanSquare(a))
    }

    // ---- backward ----

    /// Accumulates gradients of the scalar `target` into every node.
    pub fn backward(&mut self, target: Var) {
        assert_eq!(self.nodes[target.0].value.numel(), 1, "backward needs a scalar");
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[target.0].grad = Some(vec![1.0]);

        for idx in (0..=target.0).rev() {
            let Some(gout) = self.nodes[idx].grad.take() else {
                continue;
            };
            self.propagate(idx, &gout);
            self.nodes[idx].grad = Some(gout);
        }
    }

    fn accumulate(&mut self, v: Var, delta: &[f64]) {
        let numel = self.nodes[v.0].value.numel();
        let slot = self.nodes[v.0]
            .grad
            .get_or_insert_with(|| vec![0.0; numel]);
        for (s, d) in slot.iter_mut().zip(delta) {
            *s += d;
        }
    }

    fn propagate(&mut self, idx: usize, gout: &[f64]) {
        // Ops only reference earlier nodes, so this split is safe.
        match &self.nodes[idx].op {
            Op::Leaf => {}
            &Op::Add(a, b) => {
                self.accumulate(a, gout);
                self.accumulate(b, gout);
            }
            &Op::Sub(a, b) => {
                self.accumulate(a, gout);
                let neg: Vec<f64> = gout.iter().map(|g| -g).collect();
                self.accumulate(b, &neg);
            }
            &Op::Mul(a, b) => {
                let ga: Vec<f64> = gout
                    .iter()
                    .zip(&self.nodes[b.0].value.data)
                    .map(|(g, v)| g * v)
                    .collect();
                let gb: Vec<f64> = gout
                    .iter()
                    .zip(&self.nodes[a.0].value.data)
                    .map(|(g, v)| g * v)
                    .collect();
                self.accumulate(a, &ga);
                self.accumulate(b, &gb);
            }
            &Op::Scale(a, k) => {
                let ga: Vec<f64> = gout.iter().map(|g| g * k).collect();
                self.accumulate(a, &ga);
            }
            &Op::AddRow(m, row) => {
                self.accumulate(m, gout);
                let cols = self.nodes[row.0].value.numel();
                let rows = gout.len() / cols;
                let mut gr = vec![0.0; cols];
                for r in 0..rows {
                    for c in 0..cols {
                        gr[c] += gout[r * cols + c];
                    }
                }
                self.accumulate(row, &gr);
            }
            &Op::AddChannel(grid, vec) => {
                self.accumulate(grid, gout);
                let c = self.nodes[vec.0].value.numel();
                let hw = gout.len() / c;
                let mut gv = vec![0.0; c];
                for ch in 0..c {
                    gv[ch] = gout[ch * hw..(ch + 1) * hw].iter().sum();
                }
                self.accumulate(vec, &gv);
            }
            &Op::MatMul(a, b) => {
                let (m, k) = (self.nodes[a.0].value.shape[0], self.nodes[a.0].value.shape[1]);
                let n = self.nodes[b.0].value.shape[1];
                let av = self.nodes[a.0].value.data.clone();
                let bv = self.nodes[b.0].value.data.clone();
                // dA = G . B^T
                let mut ga = vec![0.0; m * k];
                for i in 0..m {
                    for j in 0..n {
                        let g = gout[i * n + j];
                        if g == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            ga[i * k + p] += g * bv[p * n + j];
                        }
                    }
                }
                // dB = A^T . G
                let mut gb = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let x = av[i * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            gb[p * n + j] += x * gout[i * n + j];
                        }
                    }
                }
                self.accumulate(a, &ga);
                self.accumulate(b, &gb);
            }
            &Op::Transpose(a) => {
                let (m, n) = (self.nodes[a.0].value.shape[0], self.nodes[a.0].value.shape[1]);
                let mut ga = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        ga[i * n + j] = gout[j * m + i];
                    }
                }
                self.accumulate(a, &ga);
            }
            &Op::Conv2d {
                input,
                weight,
                bias,
            } => {
                let is = self.nodes[input.0].value.shape.clone();
                let ws = self.nodes[weight.0].value.shape.clone();
                let (ci, h, w) = (is[0], is[1], is[2]);
                let (co, kh, kw) = (ws[0], ws[2], ws[3]);
                let (ph, pw) = (kh / 2, kw / 2);
                let iv = self.nodes[input.0].value.data.clone();
                let wv = self.nodes[weight.0].value.data.clone();

                let mut gi = vec![0.0; ci * h * w];
                let mut gw = vec![0.0; co * ci * kh * kw];
                let mut gb = vec![0.0; co];
                for o in 0..co {
                    for y in 0..h {
                        for x in 0..w {
                            let g = gout[(o * h + y) * w + x];
                            if g == 0.0 {
                                continue;
                            }
                            gb[o] += g;
                            for c in 0..ci {
                                for dy in 0..kh {
                                    let sy = y as isize + dy as isize - ph as isize;
                                    if sy < 0 || sy >= h as isize {
                                        continue;
                                    }
                                    for dx in 0..kw {
                                        let sx = x as isize + dx as isize - pw as isize;
                                        if sx < 0 || sx >= w as isize {
                                            continue;
                                        }
                                        let ii = (c * h + sy as usize) * w + sx as usize;
                                        let wi = ((o * ci + c) * kh + dy) * kw + dx;
                                        gi[ii] += g * wv[wi];
                                        gw[wi] += g * iv[ii];
                                    }
                                }
                            }
                        }
                    }
                }
                self.accumulate(input, &gi);
                self.accumulate(weight, &gw);
                self.accumulate(bias, &gb);
            }
            &Op::AvgPool2(a) => {
                let s = self.nodes[a.0].value.shape.clone();
                let (c, h, w) = (s[0], s[1], s[2]);
                let (oh, ow) = (h / 2, w / 2);
                let mut ga = vec![0.0; c * h * w];
                for ch in 0..c {
                    for y in 0..oh {
                        for x in 0..ow {
                            let g = gout[(ch * oh + y) * ow + x] / 4.0;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    ga[(ch * h + 2 * y + dy) * w + 2 * x + dx] += g;
                                }
                            }
                        }
                    }
                }
                self.accumulate(a, &ga);
            }
            &Op::UpsampleNearest2(a) => {
                let s = self.nodes[a.0].value.shape.clone();
                let (c, h, w) = (s[0], s[1], s[2]);
                let (oh, ow) = (h * 2, w * 2);
                let mut ga = vec![0.0; c * h * w];
                for ch in 0..c {
                    for y in 0..oh {
                        for x in 0..ow {
                            ga[(ch * h + y / 2) * w + x / 2] += gout[(ch * oh + y) * ow + x];
                        }
                    }
                }
                self.accumulate(a, &ga);
            }
            Op::ConcatChannels(parts) => {
                let parts = parts.clone();
                let mut offset = 0;
                for p in parts {
                    let n = self.nodes[p.0].value.numel();
                    let slice: Vec<f64> = gout[offset..offset + n].to_vec();
                    self.accumulate(p, &slice);
                    offset += n;
                }
            }
            &Op::Silu(a) => {
                let ga: Vec<f64> = gout
                    .iter()
                    .zip(&self.nodes[a.0].value.data)
                    .map(|(g, &x)| {
                        let s = sigmoid(x);
                        g * (s + x * s * (1.0 - s))
                    })
                    .collect();
                self.accumulate(a, &ga);
            }
            &Op::SoftmaxRows(a) => {
                let (m, n) = (
                    self.nodes[idx].value.shape[0],
                    self.nodes[idx].value.shape[1],
                );
                let y = self.nodes[idx].value.data.clone();
                let mut ga = vec![0.0; m * n];
                for r in 0..m {
                    let dot: f64 = (0..n).map(|j| gout[r * n + j] * y[r * n + j]).sum();
                    for j in 0..n {
                        ga[r * n + j] = y[r * n + j] * (gout[r * n + j] - dot);
                    }
                }
                self.accumulate(a, &ga);
            }
            &Op::GridToSeq(a) => {
                let s = self.nodes[a.0].value.shape.clone();
                let (c, h, w) = (s[0], s[1], s[2]);
                let mut ga = vec![0.0; c * h * w];
                for ch in 0..c {
                    for i in 0..h * w {
                        ga[ch * h * w + i] = gout[i * c + ch];
                    }
                }
                self.accumulate(a, &ga);
            }
            &Op::SeqToGrid(a, c, h, w) => {
                let mut ga = vec![0.0; c * h * w];
                for ch in 0..c {
                    for i in 0..h * w {
                        ga[i * c + ch] = gout[ch * h * w + i];
                    }
                }
                self.accumulate(a, &ga);
            }
            &Op::MeanSquare(a) => {
                let n = self.nodes[a.0].value.numel() as f64;
                let g = gout[0];
                let ga: Vec<f64> = self.nodes[a.0]
                    .value
                    .data
                    .iter()
                    .map(|&x| g * 2.0 * x / n)
                    .collect();
                self.accumulate(a, &ga);
            }
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
