//! Reverse-mode differentiation over the small operation set the solvers and
//! the network use.
//!
//! Nodes are appended in evaluation order and may only reference earlier
//! nodes of the same tape, so the graph is acyclic by construction and the
//! backward pass is a single sweep in reverse index order.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::linear::SharedMap;
use crate::objectives::{huber_derivative, huber_scalar, soft_threshold_scalar};
use crate::tensor::{dot_slices, Tensor};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a particular tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

/// Geometry of a 3x3 same-padded convolution over a `[cin, h, w]` input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * 9
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Scale(usize, f64),
    /// tensor times a scalar node
    MulScalar(usize, usize),
    Lin(usize, SharedMap),
    LinAdj(usize, SharedMap),
    HuberGrad(usize, f64),
    SoftThreshold(usize, f64),
    SqNorm(usize),
    Norm(usize),
    SumAbs(usize),
    HuberSum(usize, f64),
    Dot(usize, usize),
    SoftUnit(usize),
    Conv {
        input: usize,
        weight: usize,
        bias: usize,
        shape: ConvShape,
    },
    InstanceNorm(usize, usize),
    LeakyRelu(usize, f64),
    Concat(Vec<usize>),
    Reshape(usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Vec<f64>,
    /// Per-op scratch kept for the backward pass (instance-norm inverse std).
    aux: Vec<f64>,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Adjoints of every node reached from the output.
#[derive(Debug)]
pub struct Grads {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Grads {
    /// Gradient with respect to `v`, or `None` when the output does not
    /// depend on it.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.idx).and_then(|g| g.as_deref())
    }

    pub fn get_or_zero(&self, v: Var, len: usize) -> Vec<f64> {
        self.get(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len])
    }
}

fn im2col(x: &[f64], s: &ConvShape) -> Vec<f64> {
    let (h, w) = (s.h, s.w);
    let hw = h * w;
    let mut col = vec![0.0; s.cin * 9 * hw];
    for ci in 0..s.cin {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    col
}

fn col2im(col: &[f64], s: &ConvShape, out: &mut [f64]) {
    let (h, w) = (s.h, s.w);
    let hw = h * w;
    for ci in 0..s.cin {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    match kx {
                        0 => dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
}

fn view(data: &[f64], r: usize, c: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((r, c), data).expect("matrix view")
}

fn view_mut(data: &mut [f64], r: usize, c: usize) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((r, c), data).expect("matrix view")
}

fn conv_forward(x: &[f64], wt: &[f64], b: &[f64], s: &ConvShape) -> Vec<f64> {
    let hw = s.h * s.w;
    let col = im2col(x, s);
    let mut out = vec![0.0; s.cout * hw];
    for (c, chunk) in out.chunks_exact_mut(hw).enumerate() {
        chunk.fill(b[c]);
    }
    general_mat_mul(
        1.0,
        &view(wt, s.cout, s.cin * 9),
        &view(&col, s.cin * 9, hw),
        1.0,
        &mut view_mut(&mut out, s.cout, hw),
    );
    out
}

fn tensor_of(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::from_parts(shape, data.to_vec())
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::Graph("variable does not belong to this tape".into()));
        }
        Ok(v.idx)
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>) -> Var {
        self.push_aux(op, shape, value, Vec::new())
    }

    fn push_aux(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, aux: Vec<f64>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            op,
            shape,
            value,
            aux,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn same_len(&self, a: usize, b: usize, what: &str) -> Result<()> {
        let (la, lb) = (self.nodes[a].value.len(), self.nodes[b].value.len());
        if la != lb {
            return Err(Error::Graph(format!("{what}: lengths {la} and {lb} differ")));
        }
        Ok(())
    }

    fn scalar_idx(&self, v: Var, what: &str) -> Result<usize> {
        let i = self.idx(v)?;
        if self.nodes[i].value.len() != 1 {
            return Err(Error::Graph(format!("{what} expects a scalar")));
        }
        Ok(i)
    }

    /// Constant or parameter input.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(Op::Leaf, t.shape().to_vec(), t.data().to_vec())
    }

    /// Input of arbitrary shape (e.g. `[channels, h, w]` or flat parameters).
    pub fn leaf_raw(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var> {
        if shape.iter().product::<usize>() != data.len() || shape.is_empty() {
            return Err(Error::Graph(format!(
                "leaf shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(self.push(Op::Leaf, shape.to_vec(), data))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[self.idx(v).expect("foreign variable")].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[self.idx(v).expect("foreign variable")].shape
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "scalar() on a non-scalar node");
        val[0]
    }

    /// Value of a rank-1 or rank-2 node as a tensor.
    pub fn tensor(&self, v: Var) -> Tensor {
        tensor_of(self.shape(v), self.value(v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.same_len(ia, ib, "add")?;
        let val = self.nodes[ia]
            .value
            .iter()
            .zip(&self.nodes[ib].value)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Op::Add(ia, ib), self.nodes[ia].shape.clone(), val))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.same_len(ia, ib, "sub")?;
        let val = self.nodes[ia]
            .value
            .iter()
            .zip(&self.nodes[ib].value)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(Op::Sub(ia, ib), self.nodes[ia].shape.clone(), val))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let val = self.nodes[ia].value.iter().map(|x| c * x).collect();
        Ok(self.push(Op::Scale(ia, c), self.nodes[ia].shape.clone(), val))
    }

    /// `a + c * b`, rounded exactly like [`Tensor::add_scaled`].
    pub fn add_scaled(&mut self, a: Var, c: f64, b: Var) -> Result<Var> {
        let cb = self.scale(b, c)?;
        self.add(a, cb)
    }

    /// Tensor `t` times scalar node `s`.
    pub fn mul_scalar(&mut self, t: Var, s: Var) -> Result<Var> {
        let it = self.idx(t)?;
        let is = self.scalar_idx(s, "mul_scalar")?;
        let c = self.nodes[is].value[0];
        let val = self.nodes[it].value.iter().map(|x| c * x).collect();
        Ok(self.push(Op::MulScalar(it, is), self.nodes[it].shape.clone(), val))
    }

    fn check_map_input(&self, i: usize, shape: &[usize], what: &str) -> Result<()> {
        if self.nodes[i].value.len() != shape.iter().product::<usize>() {
            return Err(Error::Graph(format!("{what}: input does not match map shape {shape:?}")));
        }
        Ok(())
    }

    pub fn lin(&mut self, a: Var, map: &SharedMap) -> Result<Var> {
        let ia = self.idx(a)?;
        self.check_map_input(ia, map.in_shape(), "lin")?;
        let out = map.apply(&tensor_of(map.in_shape(), &self.nodes[ia].value));
        Ok(self.push(Op::Lin(ia, map.clone()), out.shape().to_vec(), out.into_data()))
    }

    pub fn lin_adjoint(&mut self, a: Var, map: &SharedMap) -> Result<Var> {
        let ia = self.idx(a)?;
        self.check_map_input(ia, map.out_shape(), "lin_adjoint")?;
        let out = map.adjoint(&tensor_of(map.out_shape(), &self.nodes[ia].value));
        Ok(self.push(Op::LinAdj(ia, map.clone()), out.shape().to_vec(), out.into_data()))
    }

    /// Elementwise derivative of the Huber function, `clamp(t / delta, -1, 1)`.
    pub fn huber_grad(&mut self, a: Var, delta: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let val = self.nodes[ia].value.iter().map(|&t| huber_derivative(t, delta)).collect();
        Ok(self.push(Op::HuberGrad(ia, delta), self.nodes[ia].shape.clone(), val))
    }

    pub fn soft_threshold(&mut self, a: Var, thr: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let val = self.nodes[ia]
            .value
            .iter()
            .map(|&t| soft_threshold_scalar(t, thr))
            .collect();
        Ok(self.push(Op::SoftThreshold(ia, thr), self.nodes[ia].shape.clone(), val))
    }

    pub fn sq_norm(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = &self.nodes[ia].value;
        let s = dot_slices(v, v);
        Ok(self.push(Op::SqNorm(ia), vec![1], vec![s]))
    }

    pub fn norm(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = &self.nodes[ia].value;
        let s = dot_slices(v, v).sqrt();
        Ok(self.push(Op::Norm(ia), vec![1], vec![s]))
    }

    pub fn sum_abs(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let s = self.nodes[ia].value.iter().map(|v| v.abs()).sum::<f64>();
        Ok(self.push(Op::SumAbs(ia), vec![1], vec![s]))
    }

    pub fn huber_sum(&mut self, a: Var, delta: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let s = self.nodes[ia]
            .value
            .iter()
            .map(|&t| huber_scalar(t, delta))
            .sum::<f64>();
        Ok(self.push(Op::HuberSum(ia, delta), vec![1], vec![s]))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.same_len(ia, ib, "dot")?;
        let s = dot_slices(&self.nodes[ia].value, &self.nodes[ib].value);
        Ok(self.push(Op::Dot(ia, ib), vec![1], vec![s]))
    }

    /// `h / sqrt(|h|^2 + 1)`.
    pub fn soft_unit(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = &self.nodes[ia].value;
        let c = 1.0 / (dot_slices(v, v) + 1.0).sqrt();
        let val = v.iter().map(|x| c * x).collect();
        Ok(self.push(Op::SoftUnit(ia), self.nodes[ia].shape.clone(), val))
    }

    /// 3x3 convolution with zero padding; `weight` is `[cout, cin, 3, 3]`
    /// flattened, `bias` has `cout` entries.
    pub fn conv3x3(&mut self, input: Var, weight: Var, bias: Var, shape: ConvShape) -> Result<Var> {
        let (ii, iw, ib) = (self.idx(input)?, self.idx(weight)?, self.idx(bias)?);
        if self.nodes[ii].value.len() != shape.cin * shape.h * shape.w
            || self.nodes[iw].value.len() != shape.weight_len()
            || self.nodes[ib].value.len() != shape.cout
        {
            return Err(Error::Graph(format!("conv3x3: operands do not match {shape:?}")));
        }
        let out = conv_forward(
            &self.nodes[ii].value,
            &self.nodes[iw].value,
            &self.nodes[ib].value,
            &shape,
        );
        Ok(self.push(
            Op::Conv {
                input: ii,
                weight: iw,
                bias: ib,
                shape,
            },
            vec![shape.cout, shape.h, shape.w],
            out,
        ))
    }

    /// Per-channel normalization to zero mean and unit variance
    /// (`var + 1e-5` under the root); no affine parameters.
    pub fn instance_norm(&mut self, a: Var, channels: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = &self.nodes[ia].value;
        if channels == 0 || v.len() % channels != 0 {
            return Err(Error::Graph(format!("instance_norm: {} values in {channels} channels", v.len())));
        }
        let hw = v.len() / channels;
        let mut out = vec![0.0; v.len()];
        let mut inv_std = Vec::with_capacity(channels);
        for (src, dst) in v.chunks_exact(hw).zip(out.chunks_exact_mut(hw)) {
            let mean = src.iter().sum::<f64>() / hw as f64;
            let var = src.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / hw as f64;
            let is = 1.0 / (var + 1e-5).sqrt();
            for (d, s) in dst.iter_mut().zip(src) {
                *d = (s - mean) * is;
            }
            inv_std.push(is);
        }
        let shape = self.nodes[ia].shape.clone();
        Ok(self.push_aux(Op::InstanceNorm(ia, channels), shape, out, inv_std))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let val = self.nodes[ia]
            .value
            .iter()
            .map(|&x| if x > 0.0 { x } else { slope * x })
            .collect();
        Ok(self.push(Op::LeakyRelu(ia, slope), self.nodes[ia].shape.clone(), val))
    }

    /// Stacks `h x w` planes (or multi-channel blocks) along a leading
    /// channel axis.
    pub fn concat(&mut self, parts: &[Var], h: usize, w: usize) -> Result<Var> {
        let mut idx = Vec::with_capacity(parts.len());
        let mut val = Vec::new();
        for &p in parts {
            let i = self.idx(p)?;
            if self.nodes[i].value.len() % (h * w) != 0 {
                return Err(Error::Graph("concat: part is not a stack of planes".into()));
            }
            val.extend_from_slice(&self.nodes[i].value);
            idx.push(i);
        }
        if idx.is_empty() {
            return Err(Error::Graph("concat of nothing".into()));
        }
        let c = val.len() / (h * w);
        Ok(self.push(Op::Concat(idx), vec![c, h, w], val))
    }

    /// Same values under a new shape.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let ia = self.idx(a)?;
        if shape.iter().product::<usize>() != self.nodes[ia].value.len() {
            return Err(Error::Graph(format!("reshape to {shape:?} changes length")));
        }
        let val = self.nodes[ia].value.clone();
        Ok(self.push(Op::Reshape(ia), shape.to_vec(), val))
    }

    /// Adjoints of all nodes with respect to the scalar `out`.
    pub fn backward(&self, out: Var) -> Result<Grads> {
        let io = self.scalar_idx(out, "backward")?;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; io + 1];
        grads[io] = Some(vec![1.0]);
        for i in (0..=io).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads);
            // keep it for inspection; interior adjoints are cheap to hold
            grads[i] = Some(g);
        }
        Ok(Grads {
            tape: self.id,
            grads,
        })
    }

    fn backward_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |j: usize| -> &[f64] { &self.nodes[j].value };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(grads, *a, g.iter().copied());
                acc(grads, *b, g.iter().copied());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.iter().copied());
                acc(grads, *b, g.iter().map(|x| -x));
            }
            Op::Scale(a, c) => acc(grads, *a, g.iter().map(|x| c * x)),
            Op::MulScalar(t, s) => {
                let c = val(*s)[0];
                acc(grads, *t, g.iter().map(|x| c * x));
                acc(grads, *s, std::iter::once(dot_slices(g, val(*t))));
            }
            Op::Lin(a, m) => {
                let r = m.adjoint(&tensor_of(m.out_shape(), g));
                acc(grads, *a, r.data().iter().copied());
            }
            Op::LinAdj(a, m) => {
                let r = m.apply(&tensor_of(m.in_shape(), g));
                acc(grads, *a, r.data().iter().copied());
            }
            Op::HuberGrad(a, delta) => acc(
                grads,
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(gi, t)| if t.abs() < *delta { gi / delta } else { 0.0 }),
            ),
            Op::SoftThreshold(a, thr) => acc(
                grads,
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(gi, t)| if t.abs() > *thr { *gi } else { 0.0 }),
            ),
            Op::SqNorm(a) => {
                let c = 2.0 * g[0];
                acc(grads, *a, val(*a).iter().map(|x| c * x));
            }
            Op::Norm(a) => {
                let n = node.value[0];
                if n > 0.0 {
                    let c = g[0] / n;
                    acc(grads, *a, val(*a).iter().map(|x| c * x));
                }
            }
            Op::SumAbs(a) => {
                let c = g[0];
                acc(
                    grads,
                    *a,
                    val(*a).iter().map(|&x| {
                        if x > 0.0 {
                            c
                        } else if x < 0.0 {
                            -c
                        } else {
                            0.0
                        }
                    }),
                );
            }
            Op::HuberSum(a, delta) => {
                let c = g[0];
                acc(grads, *a, val(*a).iter().map(|&t| c * huber_derivative(t, *delta)));
            }
            Op::Dot(a, b) => {
                let c = g[0];
                acc(grads, *a, val(*b).iter().map(|x| c * x));
                acc(grads, *b, val(*a).iter().map(|x| c * x));
            }
            Op::SoftUnit(a) => {
                let h = val(*a);
                let s2 = dot_slices(h, h) + 1.0;
                let s = s2.sqrt();
                let hg = dot_slices(h, g);
                let c = hg / (s2 * s);
                acc(grads, *a, g.iter().zip(h).map(|(gi, hi)| gi / s - c * hi));
            }
            Op::Conv {
                input,
                weight,
                bias,
                shape,
            } => {
                let s = shape;
                let hw = s.h * s.w;
                let k = s.cin * 9;
                let col = im2col(val(*input), s);
                let gv = view(g, s.cout, hw);
                let mut dw = vec![0.0; s.cout * k];
                general_mat_mul(1.0, &gv, &view(&col, k, hw).t(), 0.0, &mut view_mut(&mut dw, s.cout, k));
                acc(grads, *weight, dw.into_iter());
                acc(grads, *bias, g.chunks_exact(hw).map(|c| c.iter().sum::<f64>()));
                let mut dcol = col;
                general_mat_mul(
                    1.0,
                    &view(val(*weight), s.cout, k).t(),
                    &gv,
                    0.0,
                    &mut view_mut(&mut dcol, k, hw),
                );
                let mut dx = vec![0.0; s.cin * hw];
                col2im(&dcol, s, &mut dx);
                acc(grads, *input, dx.into_iter());
            }
            Op::InstanceNorm(a, channels) => {
                let hw = node.value.len() / channels;
                let mut dx = vec![0.0; node.value.len()];
                for c in 0..*channels {
                    let y = &node.value[c * hw..][..hw];
                    let gc = &g[c * hw..][..hw];
                    let mg = gc.iter().sum::<f64>() / hw as f64;
                    let mgy = dot_slices(gc, y) / hw as f64;
                    let is = node.aux[c];
                    for ((d, gi), yi) in dx[c * hw..][..hw].iter_mut().zip(gc).zip(y) {
                        *d = is * (gi - mg - yi * mgy);
                    }
                }
                acc(grads, *a, dx.into_iter());
            }
            Op::LeakyRelu(a, slope) => acc(
                grads,
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(gi, &x)| if x > 0.0 { *gi } else { slope * gi }),
            ),
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.nodes[p].value.len();
                    acc(grads, p, g[off..off + n].iter().copied());
                    off += n;
                }
            }
            Op::Reshape(a) => acc(grads, *a, g.iter().copied()),
        }
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], j: usize, contrib: impl Iterator<Item = f64>) {
    match &mut grads[j] {
        Some(g) => g.iter_mut().zip(contrib).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(contrib.collect()),
    }
}
