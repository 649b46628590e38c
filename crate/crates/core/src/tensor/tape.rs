use super::kernels::{col2im, gemm_nn, gemm_nt, gemm_tn, im2col, ConvGeometry};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geometry: ConvGeometry,
        /// im2col patches per batch item, kept for the kernel gradient.
        cols: Vec<f64>,
    },
    Relu(Var),
    MaxPool2d {
        input: Var,
        /// Flat input index chosen by each output element.
        argmax: Vec<usize>,
    },
    Reshape(Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRowBias(Var, Var),
    Sum(Var),
    Log(Var),
    ClampMin(Var, f64),
    Softmax(Var),
    Scale(Var, f64),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order, which is a topological order of
/// the computation graph since every input exists before its consumer.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every gradient-requiring node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input value. Its `requires_grad` flag decides whether
    /// gradients flow back to it.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let requires_grad = tensor.requires_grad();
        let value = if tensor.grad().is_some() {
            tensor.detached().with_requires_grad(requires_grad)
        } else {
            tensor
        };
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Records a constant that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.push(tensor.detached(), Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Dimension(format!(
                "matmul of {sa:?} and {sb:?}"
            )));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm_nn(m, k, n, self.value(a).data(), self.value(b).data(), &mut out);
        let value = Tensor::new([m, n], out)?;
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// 2-D cross-correlation over an N×C×H×W batch with an F×C×k×k kernel
    /// and optional per-filter bias.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (si, sk) = (self.shape(input).to_vec(), self.shape(kernel).to_vec());
        if si.len() != 4 || sk.len() != 4 || si[1] != sk[1] || sk[2] != sk[3] {
            return Err(Error::Dimension(format!(
                "conv2d of input {si:?} with kernel {sk:?}"
            )));
        }
        if stride == 0 {
            return Err(Error::Contract("conv2d stride must be positive".into()));
        }
        let (n, c, h, w) = (si[0], si[1], si[2], si[3]);
        let (f, k) = (sk[0], sk[2]);
        if h + 2 * padding < k || w + 2 * padding < k {
            return Err(Error::Dimension(format!(
                "kernel {k}x{k} larger than padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            )));
        }
        if let Some(b) = bias {
            if self.shape(b) != [f] {
                return Err(Error::Dimension(format!(
                    "conv2d bias {:?} for {f} filters",
                    self.shape(b)
                )));
            }
        }
        let geometry = ConvGeometry {
            channels: c,
            height: h,
            width: w,
            kernel: k,
            stride,
            padding,
            out_h: (h + 2 * padding - k) / stride + 1,
            out_w: (w + 2 * padding - k) / stride + 1,
        };
        let (rows, hw) = (geometry.col_rows(), geometry.col_cols());
        let mut cols = Vec::with_capacity(n * rows * hw);
        let mut out = vec![0.0; n * f * hw];
        {
            let x = self.value(input).data();
            let kd = self.value(kernel).data();
            for i in 0..n {
                im2col(&x[i * c * h * w..(i + 1) * c * h * w], &geometry, &mut cols);
                let patch = &cols[i * rows * hw..(i + 1) * rows * hw];
                let dst = &mut out[i * f * hw..(i + 1) * f * hw];
                if let Some(b) = bias {
                    let bd = self.value(b).data();
                    for (fi, plane) in dst.chunks_mut(hw).enumerate() {
                        plane.fill(bd[fi]);
                    }
                }
                gemm_nn(f, rows, hw, kd, patch, dst);
            }
        }
        let value = Tensor::new([n, f, geometry.out_h, geometry.out_w], out)?;
        let mut deps = vec![input, kernel];
        deps.extend(bias);
        let rg = self.needs_grad(&deps);
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                kernel,
                bias,
                geometry,
                cols,
            },
            rg,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let rg = self.needs_grad(&[x]);
        Ok(self.push(value, Op::Relu(x), rg))
    }

    /// 2×2 max pooling with stride 2 over the last two axes of N×C×H×W.
    pub fn maxpool2d(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || s[2] < 2 || s[3] < 2 {
            return Err(Error::Dimension(format!("maxpool2d of {s:?}")));
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = (h / 2, w / 2);
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    out.push(src[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new([n, c, oh, ow], out)?;
        let rg = self.needs_grad(&[x]);
        Ok(self.push(value, Op::MaxPool2d { input: x, argmax }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let rg = self.needs_grad(&[x]);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Collapses every axis after the first: N×… → N×rest.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        let n = s[0];
        let rest = s[1..].iter().product::<usize>();
        self.reshape(x, [n, rest])
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension(format!(
                "{what} of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// N×d plus a length-d bias broadcast over rows.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sx.len() != 2 || sb != [sx[1]] {
            return Err(Error::Dimension(format!(
                "bias {sb:?} for input {sx:?}"
            )));
        }
        let d = sx[1];
        let b = self.value(bias).data();
        let data = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b[i % d])
            .collect();
        let value = Tensor::new(sx.to_vec(), data)?;
        let rg = self.needs_grad(&[x, bias]);
        Ok(self.push(value, Op::AddRowBias(x, bias), rg))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.value(x).data().iter().sum();
        let rg = self.needs_grad(&[x]);
        Ok(self.push(Tensor::scalar(total), Op::Sum(x), rg))
    }

    /// Natural log; inputs are expected to be strictly positive.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let src = self.value(x);
        let data = src.data().iter().map(|v| v.ln()).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let rg = self.needs_grad(&[x]);
        Ok(self.push(value, Op::Log(x), rg))
    }

    /// max(x, floor); the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Result<Var> {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| v.max(floor)).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let rg = self.needs_grad(&[x]);
        Ok(self.push(value, Op::ClampMin(x, floor), rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| v * factor).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let rg = self.needs_grad(&[x]);
        Ok(self.push(value, Op::Scale(x, factor), rg))
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let src = self.value(x);
        let c = *src.shape().last().unwrap_or(&0);
        if c < 2 {
            return Err(Error::Dimension(format!(
                "softmax needs a last extent >= 2, got {:?}",
                src.shape()
            )));
        }
        let mut data = src.data().to_vec();
        for slice in data.chunks_mut(c) {
            let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in slice.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in slice.iter_mut() {
                *v /= total;
            }
        }
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let rg = self.needs_grad(&[x]);
        Ok(self.push(value, Op::Softmax(x), rg))
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Every `requires_grad` leaf receives a gradient, all zeros if the loss
    /// does not depend on it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && grads[idx].is_none() {
                grads[idx] = Some(vec![0.0; node.value.numel()]);
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |var: Var, f: &mut dyn FnMut(&mut [f64])| {
            let target = &self.nodes[var.0];
            if !target.requires_grad {
                return;
            }
            let slot = grads[var.0].get_or_insert_with(|| vec![0.0; target.value.numel()]);
            f(slot);
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                acc(*a, &mut |ga| gemm_nt(m, n, k, g, tb.data(), ga));
                acc(*b, &mut |gb| gemm_tn(k, m, n, ta.data(), g, gb));
            }
            Op::Conv2d {
                input,
                kernel,
                bias,
                geometry,
                cols,
            } => {
                let s = node.value.shape();
                let (n, f) = (s[0], s[1]);
                let (rows, hw) = (geometry.col_rows(), geometry.col_cols());
                let plane = geometry.channels * geometry.height * geometry.width;
                let kd = self.value(*kernel).data();
                acc(*kernel, &mut |gk| {
                    for i in 0..n {
                        let go = &g[i * f * hw..(i + 1) * f * hw];
                        let patch = &cols[i * rows * hw..(i + 1) * rows * hw];
                        gemm_nt(f, hw, rows, go, patch, gk);
                    }
                });
                if let Some(b) = bias {
                    acc(*b, &mut |gb| {
                        for i in 0..n {
                            for (fi, chunk) in g[i * f * hw..(i + 1) * f * hw].chunks(hw).enumerate() {
                                gb[fi] += chunk.iter().sum::<f64>();
                            }
                        }
                    });
                }
                acc(*input, &mut |gi| {
                    let mut dcols = vec![0.0; rows * hw];
                    for i in 0..n {
                        dcols.fill(0.0);
                        let go = &g[i * f * hw..(i + 1) * f * hw];
                        gemm_tn(rows, f, hw, kd, go, &mut dcols);
                        col2im(&dcols, geometry, &mut gi[i * plane..(i + 1) * plane]);
                    }
                });
            }
            Op::Relu(x) => {
                let xd = self.value(*x).data();
                acc(*x, &mut |gx| {
                    for ((gv, &xv), &gi) in gx.iter_mut().zip(xd).zip(g) {
                        if xv > 0.0 {
                            *gv += gi;
                        }
                    }
                });
            }
            Op::MaxPool2d { input, argmax } => {
                acc(*input, &mut |gx| {
                    for (&src, &gi) in argmax.iter().zip(g) {
                        gx[src] += gi;
                    }
                });
            }
            Op::Reshape(x) => {
                acc(*x, &mut |gx| add_into(gx, g));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| add_into(gb, g));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for ((gv, &bv), &gi) in ga.iter_mut().zip(bd).zip(g) {
                        *gv += gi * bv;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((gv, &av), &gi) in gb.iter_mut().zip(ad).zip(g) {
                        *gv += gi * av;
                    }
                });
            }
            Op::AddRowBias(x, bias) => {
                acc(*x, &mut |gx| add_into(gx, g));
                acc(*bias, &mut |gb| {
                    let d = gb.len();
                    for (i, &gi) in g.iter().enumerate() {
                        gb[i % d] += gi;
                    }
                });
            }
            Op::Sum(x) => {
                acc(*x, &mut |gx| {
                    for gv in gx.iter_mut() {
                        *gv += g[0];
                    }
                });
            }
            Op::Log(x) => {
                let xd = self.value(*x).data();
                acc(*x, &mut |gx| {
                    for ((gv, &xv), &gi) in gx.iter_mut().zip(xd).zip(g) {
                        *gv += gi / xv;
                    }
                });
            }
            Op::ClampMin(x, floor) => {
                let xd = self.value(*x).data();
                acc(*x, &mut |gx| {
                    for ((gv, &xv), &gi) in gx.iter_mut().zip(xd).zip(g) {
                        if xv > *floor {
                            *gv += gi;
                        }
                    }
                });
            }
            Op::Scale(x, factor) => {
                acc(*x, &mut |gx| {
                    for (gv, &gi) in gx.iter_mut().zip(g) {
                        *gv += gi * factor;
                    }
                });
            }
            Op::Softmax(x) => {
                let sd = node.value.data();
                let c = *node.value.shape().last().unwrap();
                acc(*x, &mut |gx| {
                    for ((gs, ss), gi) in gx.chunks_mut(c).zip(sd.chunks(c)).zip(g.chunks(c)) {
                        let dot: f64 = ss.iter().zip(gi).map(|(s, g)| s * g).sum();
                        for ((gv, &s), &gg) in gs.iter_mut().zip(ss).zip(gi) {
                            *gv += s * (gg - dot);
                        }
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
