//! Dense tensors of 64-bit floats with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheaply clonable handle to flat row-major storage.
//! Operations live on a [`Tape`]: every call computes the forward value and,
//! when an operand participates in differentiation, records a backward rule.
//! [`Tape::backward`] replays the rules in reverse and accumulates gradients
//! into every `requires_grad` leaf reachable from the loss.
//!
//! Summation order is fixed (ascending index) in every reduction and matmul
//! inner loop, so identical inputs and op sequences produce bitwise-identical
//! outputs and gradients.

use std::cell::{Ref, RefCell};
use std::collections::HashMap;
use std::rc::Rc;

use crate::error::{Error, Result};

// ── Tensor ───────────────────────────────────────────────────────────

struct TensorData {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
    /// True when this tensor was produced by a taped operation; gradients
    /// propagate through such tensors but are not retained on them.
    born_on_tape: bool,
}

/// Shared handle to dense row-major f64 storage.
pub struct Tensor {
    inner: Rc<RefCell<TensorData>>,
}

impl Clone for Tensor {
    fn clone(&self) -> Self {
        Tensor { inner: Rc::clone(&self.inner) }
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("shape", &d.shape)
            .field("requires_grad", &d.requires_grad)
            .finish()
    }
}

impl Tensor {
    fn from_parts(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::dimension(
                "tensor",
                format!("shape {:?} implies {} elements, got {}", shape, numel, data.len()),
            ));
        }
        Ok(Tensor {
            inner: Rc::new(RefCell::new(TensorData {
                shape,
                data,
                requires_grad,
                grad: None,
                born_on_tape: false,
            })),
        })
    }

    /// A constant tensor (does not participate in differentiation).
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Tensor::from_parts(data, shape.to_vec(), false)
    }

    /// A leaf parameter: gradients accumulate into it on backward passes.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Tensor::from_parts(data, shape.to_vec(), true)
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let numel = shape.iter().product();
        Tensor::from_parts(vec![0.0; numel], shape.to_vec(), false).expect("consistent shape")
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        let numel = shape.iter().product();
        Tensor::from_parts(vec![value; numel], shape.to_vec(), false).expect("consistent shape")
    }

    /// A rank-0 scalar.
    pub fn scalar(value: f64) -> Tensor {
        Tensor::from_parts(vec![value], Vec::new(), false).expect("consistent shape")
    }

    fn output(data: Vec<f64>, shape: Vec<usize>) -> Tensor {
        Tensor::from_parts(data, shape, false).expect("op produced consistent shape")
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().data.len()
    }

    /// Rows/cols of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        let d = self.inner.borrow();
        if d.shape.len() != 2 {
            return Err(Error::dimension(
                "dims2",
                format!("expected a rank-2 tensor, got shape {:?}", d.shape),
            ));
        }
        Ok((d.shape[0], d.shape[1]))
    }

    /// Copy of the underlying storage.
    pub fn data(&self) -> Vec<f64> {
        self.inner.borrow().data.clone()
    }

    /// Borrow the underlying storage without copying.
    pub fn data_ref(&self) -> Ref<'_, [f64]> {
        Ref::map(self.inner.borrow(), |d| d.data.as_slice())
    }

    /// Value of a single-element tensor.
    ///
    /// Panics when the tensor is not a scalar; that is a programming error,
    /// not a data error.
    pub fn item(&self) -> f64 {
        let d = self.inner.borrow();
        assert!(d.data.len() == 1, "item() on tensor of shape {:?}", d.shape);
        d.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.borrow().grad.clone()
    }

    /// Accumulated gradient, or zeros when no gradient has flowed here.
    pub fn grad_or_zeros(&self) -> Vec<f64> {
        let d = self.inner.borrow();
        d.grad.clone().unwrap_or_else(|| vec![0.0; d.data.len()])
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    /// Mutate the stored values in place (parameter updates).
    pub fn update_data(&self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.inner.borrow_mut().data);
    }

    pub fn is_finite(&self) -> bool {
        self.inner.borrow().data.iter().all(|v| v.is_finite())
    }

    fn id(&self) -> usize {
        Rc::as_ptr(&self.inner) as *const () as usize
    }

    pub(crate) fn tracked(&self) -> bool {
        let d = self.inner.borrow();
        d.requires_grad || d.born_on_tape
    }

    fn mark_born_on_tape(&self) {
        self.inner.borrow_mut().born_on_tape = true;
    }

    fn accumulate_grad(&self, contribution: &[f64]) {
        let mut d = self.inner.borrow_mut();
        let n = d.data.len();
        let grad = d.grad.get_or_insert_with(|| vec![0.0; n]);
        for (g, c) in grad.iter_mut().zip(contribution) {
            *g += c;
        }
    }
}

// ── Stable scalar kernels ────────────────────────────────────────────

/// Numerically stable logistic sigmoid, split at zero.
pub(crate) fn stable_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softplus ln(1 + e^t), split at zero.
pub(crate) fn stable_softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    // ikj order: contributions to out[i*n + j] arrive in ascending k.
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    out
}

pub(crate) fn transpose_raw(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}

// ── Gradient store ───────────────────────────────────────────────────

/// Pass-local gradients keyed by tensor identity. Kept separate from the
/// tensors so repeated `backward` calls each propagate exactly one unit seed
/// (leaf gradients then accumulate additively across calls).
pub(crate) struct GradStore {
    map: HashMap<usize, Vec<f64>>,
}

impl GradStore {
    fn new() -> Self {
        GradStore { map: HashMap::new() }
    }

    pub(crate) fn add(&mut self, tensor: &Tensor, contribution: &[f64]) {
        let entry = self
            .map
            .entry(tensor.id())
            .or_insert_with(|| vec![0.0; contribution.len()]);
        for (e, c) in entry.iter_mut().zip(contribution) {
            *e += c;
        }
    }

    fn take(&mut self, id: usize) -> Option<Vec<f64>> {
        self.map.remove(&id)
    }
}

// ── Tape ─────────────────────────────────────────────────────────────

type BackwardFn = Box<dyn Fn(&[f64], &mut GradStore)>;

struct TapeEntry {
    out_id: usize,
    backward: BackwardFn,
}

/// Records operations for one backward sweep. Single-threaded; distinct
/// tapes may be used concurrently from different threads.
pub struct Tape {
    ops: RefCell<Vec<TapeEntry>>,
    leaves: RefCell<HashMap<usize, Tensor>>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape { ops: RefCell::new(Vec::new()), leaves: RefCell::new(HashMap::new()) }
    }

    /// Record a backward rule for `out`, if any input is tracked.
    pub(crate) fn record(
        &self,
        inputs: &[&Tensor],
        out: &Tensor,
        backward: impl Fn(&[f64], &mut GradStore) + 'static,
    ) {
        if !inputs.iter().any(|t| t.tracked()) {
            return;
        }
        out.mark_born_on_tape();
        for t in inputs {
            if t.requires_grad() {
                self.leaves.borrow_mut().entry(t.id()).or_insert_with(|| (*t).clone());
            }
        }
        self.ops
            .borrow_mut()
            .push(TapeEntry { out_id: out.id(), backward: Box::new(backward) });
    }

    /// Tape-entry output ids in recording order (test diagnostics).
    #[doc(hidden)]
    pub fn debug_out_ids(&self) -> Vec<usize> {
        self.ops.borrow().iter().map(|e| e.out_id).collect()
    }

    /// Reverse sweep from a scalar loss. Gradients of `requires_grad` leaves
    /// reachable from `loss` are accumulated additively into their `grad`.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        if loss.numel() != 1 {
            return Err(Error::contract(
                "backward",
                format!("loss must be scalar, got shape {:?}", loss.shape()),
            ));
        }
        let mut store = GradStore::new();
        store.add(loss, &[1.0]);
        let ops = self.ops.borrow();
        for entry in ops.iter().rev() {
            if let Some(d_out) = store.take(entry.out_id) {
                (entry.backward)(&d_out, &mut store);
            }
        }
        for (id, leaf) in self.leaves.borrow().iter() {
            if let Some(g) = store.take(*id) {
                leaf.accumulate_grad(&g);
            }
        }
        Ok(())
    }

    // ── Linear algebra ───────────────────────────────────────────

    /// Matrix product of `[m,k] · [k,n]`.
    pub fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let (m, ka) = a.dims2()?;
        let (kb, n) = b.dims2()?;
        if ka != kb {
            return Err(Error::dimension(
                "matmul",
                format!("inner dimensions differ: {:?} vs {:?}", a.shape(), b.shape()),
            ));
        }
        let out = {
            let ad = a.data_ref();
            let bd = b.data_ref();
            Tensor::output(matmul_raw(&ad, &bd, m, ka, n), vec![m, n])
        };
        let (ac, bc) = (a.clone(), b.clone());
        self.record(&[a, b], &out, move |d_out, store| {
            // dA = dC · Bᵀ, dB = Aᵀ · dC
            if ac.tracked() {
                let bd = bc.data_ref();
                let bt = transpose_raw(&bd, ka, n);
                store.add(&ac, &matmul_raw(d_out, &bt, m, n, ka));
            }
            if bc.tracked() {
                let ad = ac.data_ref();
                let at = transpose_raw(&ad, m, ka);
                store.add(&bc, &matmul_raw(&at, d_out, ka, m, n));
            }
        });
        Ok(out)
    }

    // ── Elementwise binary ops ───────────────────────────────────

    fn binary(
        &self,
        name: &'static str,
        a: &Tensor,
        b: &Tensor,
        fwd: fn(f64, f64) -> f64,
        d_lhs: fn(f64, f64) -> f64,
        d_rhs: fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let layout = BroadcastLayout::resolve(name, &a.shape(), &b.shape())?;
        let out = {
            let ad = a.data_ref();
            let bd = b.data_ref();
            let mut data = vec![0.0; layout.out_len];
            for i in 0..layout.out_len {
                data[i] = fwd(ad[layout.lhs_index(i)], bd[layout.rhs_index(i)]);
            }
            Tensor::output(data, layout.out_shape.clone())
        };
        let (ac, bc) = (a.clone(), b.clone());
        self.record(&[a, b], &out, move |d_out, store| {
            let ad = ac.data_ref();
            let bd = bc.data_ref();
            if ac.tracked() {
                let mut g = vec![0.0; ad.len()];
                for i in 0..layout.out_len {
                    let li = layout.lhs_index(i);
                    g[li] += d_out[i] * d_lhs(ad[li], bd[layout.rhs_index(i)]);
                }
                store.add(&ac, &g);
            }
            if bc.tracked() {
                let mut g = vec![0.0; bd.len()];
                for i in 0..layout.out_len {
                    let ri = layout.rhs_index(i);
                    g[ri] += d_out[i] * d_rhs(ad[layout.lhs_index(i)], bd[ri]);
                }
                store.add(&bc, &g);
            }
        });
        Ok(out)
    }

    /// Elementwise sum; also broadcasts a length-n vector over an m×n matrix
    /// (bias addition), on either side.
    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary("add", a, b, |x, y| x + y, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary("sub", a, b, |x, y| x - y, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary("mul", a, b, |x, y| x * y, |_, y| y, |x, _| x)
    }

    // ── Elementwise unary ops ────────────────────────────────────

    fn unary(
        &self,
        t: &Tensor,
        fwd: fn(f64) -> f64,
        // local derivative from (input, output)
        dfn: fn(f64, f64) -> f64,
    ) -> Tensor {
        let out = {
            let td = t.data_ref();
            Tensor::output(td.iter().map(|&x| fwd(x)).collect(), t.shape())
        };
        let (tc, oc) = (t.clone(), out.clone());
        self.record(&[t], &out, move |d_out, store| {
            let td = tc.data_ref();
            let od = oc.data_ref();
            let g: Vec<f64> = d_out
                .iter()
                .zip(td.iter().zip(od.iter()))
                .map(|(d, (&x, &y))| d * dfn(x, y))
                .collect();
            store.add(&tc, &g);
        });
        out
    }

    pub fn relu(&self, t: &Tensor) -> Tensor {
        self.unary(t, |x| if x > 0.0 { x } else { 0.0 }, |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn tanh(&self, t: &Tensor) -> Tensor {
        self.unary(t, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn sigmoid(&self, t: &Tensor) -> Tensor {
        self.unary(t, stable_sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn softplus(&self, t: &Tensor) -> Tensor {
        self.unary(t, stable_softplus, |x, _| stable_sigmoid(x))
    }

    pub fn exp(&self, t: &Tensor) -> Tensor {
        self.unary(t, f64::exp, |_, y| y)
    }

    pub fn log(&self, t: &Tensor) -> Tensor {
        self.unary(t, f64::ln, |x, _| 1.0 / x)
    }

    /// Clamp to `[lo, hi]`; gradient passes through inside the interval and
    /// is zero outside.
    pub fn clamp(&self, t: &Tensor, lo: f64, hi: f64) -> Result<Tensor> {
        if !(lo <= hi) {
            return Err(Error::contract("clamp", format!("lo {lo} must not exceed hi {hi}")));
        }
        let out = {
            let td = t.data_ref();
            Tensor::output(td.iter().map(|&x| x.clamp(lo, hi)).collect(), t.shape())
        };
        let tc = t.clone();
        self.record(&[t], &out, move |d_out, store| {
            let td = tc.data_ref();
            let g: Vec<f64> = d_out
                .iter()
                .zip(td.iter())
                .map(|(d, &x)| if (lo..=hi).contains(&x) { *d } else { 0.0 })
                .collect();
            store.add(&tc, &g);
        });
        Ok(out)
    }

    /// Multiply every element by a scalar constant.
    pub fn scale(&self, t: &Tensor, c: f64) -> Tensor {
        let out = {
            let td = t.data_ref();
            Tensor::output(td.iter().map(|&x| c * x).collect(), t.shape())
        };
        let tc = t.clone();
        self.record(&[t], &out, move |d_out, store| {
            let g: Vec<f64> = d_out.iter().map(|d| c * d).collect();
            store.add(&tc, &g);
        });
        out
    }

    /// Add a scalar constant to every element.
    pub fn add_scalar(&self, t: &Tensor, c: f64) -> Tensor {
        let out = {
            let td = t.data_ref();
            Tensor::output(td.iter().map(|&x| x + c).collect(), t.shape())
        };
        let tc = t.clone();
        self.record(&[t], &out, move |d_out, store| {
            store.add(&tc, d_out);
        });
        out
    }

    // ── Reductions ───────────────────────────────────────────────

    /// Sum over all elements (`axis = None`, scalar result) or along one
    /// axis. Accumulation is in ascending index order.
    pub fn sum(&self, t: &Tensor, axis: Option<usize>) -> Result<Tensor> {
        self.reduce("sum", t, axis, false)
    }

    pub fn mean(&self, t: &Tensor, axis: Option<usize>) -> Result<Tensor> {
        self.reduce("mean", t, axis, true)
    }

    fn reduce(
        &self,
        name: &'static str,
        t: &Tensor,
        axis: Option<usize>,
        take_mean: bool,
    ) -> Result<Tensor> {
        let shape = t.shape();
        let (outer, red, inner, out_shape) = match axis {
            None => (1usize, t.numel(), 1usize, Vec::new()),
            Some(ax) => {
                if ax >= shape.len() {
                    return Err(Error::dimension(
                        name,
                        format!("axis {ax} out of range for shape {:?}", shape),
                    ));
                }
                let outer: usize = shape[..ax].iter().product();
                let inner: usize = shape[ax + 1..].iter().product();
                let mut out_shape = shape.clone();
                out_shape.remove(ax);
                (outer, shape[ax], inner, out_shape)
            }
        };
        if red == 0 {
            return Err(Error::contract(name, "cannot reduce over an empty axis".to_string()));
        }
        let factor = if take_mean { 1.0 / red as f64 } else { 1.0 };
        let out = {
            let td = t.data_ref();
            let mut data = vec![0.0; outer * inner];
            for o in 0..outer {
                for r in 0..red {
                    let base = (o * red + r) * inner;
                    for i in 0..inner {
                        data[o * inner + i] += td[base + i];
                    }
                }
            }
            if take_mean {
                for v in data.iter_mut() {
                    *v *= factor;
                }
            }
            Tensor::output(data, out_shape)
        };
        let tc = t.clone();
        self.record(&[t], &out, move |d_out, store| {
            let mut g = vec![0.0; tc.numel()];
            for o in 0..outer {
                for r in 0..red {
                    let base = (o * red + r) * inner;
                    for i in 0..inner {
                        g[base + i] = d_out[o * inner + i] * factor;
                    }
                }
            }
            store.add(&tc, &g);
        });
        Ok(out)
    }

    /// Columns `[start, end)` of a rank-2 tensor.
    pub fn slice_cols(&self, t: &Tensor, start: usize, end: usize) -> Result<Tensor> {
        let (rows, cols) = t.dims2()?;
        if start >= end || end > cols {
            return Err(Error::dimension(
                "slice_cols",
                format!("range {start}..{end} invalid for {cols} columns"),
            ));
        }
        let width = end - start;
        let out = {
            let td = t.data_ref();
            let mut data = vec![0.0; rows * width];
            for r in 0..rows {
                data[r * width..(r + 1) * width]
                    .copy_from_slice(&td[r * cols + start..r * cols + end]);
            }
            Tensor::output(data, vec![rows, width])
        };
        let tc = t.clone();
        self.record(&[t], &out, move |d_out, store| {
            let mut g = vec![0.0; rows * cols];
            for r in 0..rows {
                g[r * cols + start..r * cols + end]
                    .copy_from_slice(&d_out[r * width..(r + 1) * width]);
            }
            store.add(&tc, &g);
        });
        Ok(out)
    }
}

// ── Broadcast layout for binary ops ──────────────────────────────────

/// Index mapping for the supported binary-op layouts: equal shapes, or a
/// length-n row vector against an m×n matrix (bias broadcast), either side.
struct BroadcastLayout {
    out_shape: Vec<usize>,
    out_len: usize,
    lhs_mod: usize,
    rhs_mod: usize,
}

impl BroadcastLayout {
    fn resolve(op: &'static str, a: &[usize], b: &[usize]) -> Result<BroadcastLayout> {
        let an: usize = a.iter().product();
        let bn: usize = b.iter().product();
        if a == b {
            return Ok(BroadcastLayout { out_shape: a.to_vec(), out_len: an, lhs_mod: 0, rhs_mod: 0 });
        }
        // matrix (m×n) vs row vector (n)
        if a.len() == 2 && b.len() == 1 && a[1] == b[0] {
            return Ok(BroadcastLayout {
                out_shape: a.to_vec(),
                out_len: an,
                lhs_mod: 0,
                rhs_mod: b[0],
            });
        }
        if b.len() == 2 && a.len() == 1 && b[1] == a[0] {
            return Ok(BroadcastLayout {
                out_shape: b.to_vec(),
                out_len: bn,
                lhs_mod: a[0],
                rhs_mod: 0,
            });
        }
        Err(Error::dimension(
            op,
            format!("shapes {a:?} and {b:?} are neither equal nor bias-broadcastable"),
        ))
    }

    #[inline]
    fn lhs_index(&self, i: usize) -> usize {
        if self.lhs_mod == 0 {
            i
        } else {
            i % self.lhs_mod
        }
    }

    #[inline]
    fn rhs_index(&self, i: usize) -> usize {
        if self.rhs_mod == 0 {
            i
        } else {
            i % self.rhs_mod
        }
    }
}
