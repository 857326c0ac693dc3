//! Element kernels for the three benchmark operators.
//!
//! Every variant performs the same multiply-adds in the same order (SymFused
//! only regroups the interpolation sums), so outputs agree to rounding. The
//! variants differ in where intermediates live, which is what the
//! [`Tally`] sees:
//!
//! * `Baseline` keeps intermediates in global buffers and re-reads operands
//!   from memory for every use. It walks the element in `N_q^{GL}` slices, so
//!   it needs barriers per slice.
//! * `Fused` stages operands once, keeps intermediates in element scratch and
//!   only synchronizes between whole-element passes.
//! * `SymFused` is `Fused` with interpolation rows processed in
//!   centro-symmetric pairs, fetching each matrix entry once per two uses.

use crate::mesh::factor;
use crate::reference_ops::OperatorMatrix;

use super::counters::Tally;
use super::{Benchmark, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Mem {
    Global,
    Scratch,
}

#[inline]
fn read<T: Tally>(t: &mut T, mem: Mem, n: u64) {
    match mem {
        Mem::Global => t.global_read(n),
        Mem::Scratch => t.scratch_read(n),
    }
}

#[inline]
fn write<T: Tally>(t: &mut T, mem: Mem, n: u64) {
    match mem {
        Mem::Global => t.global_write(n),
        Mem::Scratch => t.scratch_write(n),
    }
}

#[inline]
fn strides(d: [usize; 3]) -> [usize; 3] {
    [1, d[0], d[0] * d[1]]
}

/// One sweep of a 1D operator along `axis` of an element tensor.
struct LinePass<'a> {
    op: &'a OperatorMatrix,
    transpose: bool,
    axis: usize,
    src: Mem,
    dst: Mem,
    /// Each input line is fetched once; otherwise every use is a fetch.
    cached: bool,
    symmetric: bool,
    interp: bool,
}

impl LinePass<'_> {
    fn n_in(&self) -> usize {
        if self.transpose {
            self.op.rows()
        } else {
            self.op.cols()
        }
    }

    fn n_out(&self) -> usize {
        if self.transpose {
            self.op.cols()
        } else {
            self.op.rows()
        }
    }

    #[inline]
    fn entry(&self, a: usize, b: usize) -> f64 {
        if self.transpose {
            self.op.get(b, a)
        } else {
            self.op.get(a, b)
        }
    }

    #[inline]
    fn matrix_loads<T: Tally>(&self, t: &mut T, n: u64) {
        t.scratch_read(n);
        if self.interp {
            t.interp_load(n);
        }
    }

    /// Contracts `src` (extents `dims`) into `dst`, returning the output
    /// extents. `slab` restricts the sweep to one `t`-slice; `scale` is a
    /// pointwise global factor applied to each output.
    #[allow(clippy::too_many_arguments)]
    fn run<T: Tally>(
        &self,
        src: &[f64],
        dims: [usize; 3],
        dst: &mut [f64],
        slab: Option<usize>,
        scale: Option<&[f64]>,
        line: &mut Vec<f64>,
        t: &mut T,
    ) -> [usize; 3] {
        debug_assert_eq!(dims[self.axis], self.n_in());
        let mut out_dims = dims;
        out_dims[self.axis] = self.n_out();
        let ss = strides(dims);
        let ds = strides(out_dims);
        let mut ranges = [0..out_dims[0], 0..out_dims[1], 0..out_dims[2]];
        ranges[self.axis] = 0..1;
        if let Some(z) = slab {
            debug_assert!(self.axis != 2);
            ranges[2] = z..z + 1;
        }
        for k in ranges[2].clone() {
            for j in ranges[1].clone() {
                for i in ranges[0].clone() {
                    let s0 = i * ss[0] + j * ss[1] + k * ss[2];
                    let d0 = i * ds[0] + j * ds[1] + k * ds[2];
                    self.line(src, s0, ss[self.axis], dst, d0, ds[self.axis], scale, line, t);
                }
            }
        }
        out_dims
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn line<T: Tally>(
        &self,
        src: &[f64],
        s0: usize,
        sstride: usize,
        dst: &mut [f64],
        d0: usize,
        dstride: usize,
        scale: Option<&[f64]>,
        line: &mut Vec<f64>,
        t: &mut T,
    ) {
        let n_in = self.n_in();
        let n_out = self.n_out();
        line.clear();
        line.extend((0..n_in).map(|b| src[s0 + b * sstride]));
        if self.cached {
            read(t, self.src, n_in as u64);
        }
        let per_use = !self.cached;

        let mut store = |a: usize, mut v: f64, t: &mut T| {
            let d = d0 + a * dstride;
            if let Some(s) = scale {
                t.global_read(1);
                t.flops(1);
                v *= s[d];
            }
            dst[d] = v;
            write(t, self.dst, 1);
        };

        if !self.symmetric {
            for a in 0..n_out {
                let mut acc = 0.0;
                for (b, &x) in line.iter().enumerate() {
                    acc += self.entry(a, b) * x;
                }
                self.matrix_loads(t, n_in as u64);
                if per_use {
                    read(t, self.src, n_in as u64);
                }
                t.flops(2 * n_in as u64);
                store(a, acc, t);
            }
            return;
        }

        // rows a and n_out-1-a share every entry: E[a][b] == E[n_out-1-a][n_in-1-b]
        let half = n_out / 2;
        for a in 0..half {
            let (mut lo, mut hi) = (0.0, 0.0);
            for b in 0..n_in {
                let e = self.entry(a, b);
                lo += e * line[b];
                hi += e * line[n_in - 1 - b];
            }
            self.matrix_loads(t, n_in as u64);
            if per_use {
                read(t, self.src, 2 * n_in as u64);
            }
            t.flops(4 * n_in as u64);
            store(a, lo, t);
            store(n_out - 1 - a, hi, t);
        }
        if n_out % 2 == 1 {
            // the middle row is symmetric in itself
            let mut acc = 0.0;
            for b in 0..n_in / 2 {
                let e = self.entry(half, b);
                acc += e * line[b];
                acc += e * line[n_in - 1 - b];
            }
            if n_in % 2 == 1 {
                acc += self.entry(half, n_in / 2) * line[n_in / 2];
            }
            self.matrix_loads(t, n_in.div_ceil(2) as u64);
            if per_use {
                read(t, self.src, n_in as u64);
            }
            t.flops(2 * n_in as u64);
            store(half, acc, t);
        }
    }
}

/// Everything an element kernel needs besides its data.
pub(crate) struct KernelPlan<'a> {
    pub bp: Benchmark,
    pub variant: Variant,
    pub lambda: f64,
    pub nq: usize,
    pub ng: usize,
    pub interp: &'a OperatorMatrix,
    pub diff: Option<&'a OperatorMatrix>,
}

/// Per-thread buffers, reused across elements.
#[derive(Default)]
pub(crate) struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    rq: Vec<f64>,
    line: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, ng: usize) {
        let n = ng * ng * ng;
        for v in [&mut self.a, &mut self.b, &mut self.c] {
            if v.len() < n {
                v.resize(n, 0.0);
            }
        }
        if self.rq.len() < 3 * n {
            self.rq.resize(3 * n, 0.0);
        }
    }
}

impl KernelPlan<'_> {
    /// Applies the element operator to `q` (GLL values), writing `out`.
    /// `geo` is the element's factor block.
    pub fn apply<T: Tally>(&self, q: &[f64], geo: &[f64], out: &mut [f64], ws: &mut Workspace, t: &mut T) {
        ws.ensure(self.ng.max(self.nq));
        match self.bp {
            Benchmark::Bp1 => self.mass(q, geo, out, ws, t),
            Benchmark::Bp35 => self.collocation(q, geo, out, ws, t),
            Benchmark::Bp3 => self.full_quadrature(q, geo, out, ws, t),
        }
    }

    fn fused(&self) -> bool {
        !matches!(self.variant, Variant::Baseline)
    }

    fn interp_pass(&self, axis: usize, transpose: bool, src: Mem, dst: Mem) -> LinePass<'_> {
        LinePass {
            op: self.interp,
            transpose,
            axis,
            src,
            dst,
            cached: self.fused(),
            symmetric: matches!(self.variant, Variant::SymFused),
            interp: true,
        }
    }

    /// GLL → GL. Fused: three whole-element passes, `q` streamed straight
    /// from global. Baseline: in-plane sweeps slice by slice, then `t`.
    /// Returns with the GL field in `ws.c` (scaled by `scale` if given).
    fn interpolate<T: Tally>(&self, q: &[f64], scale: Option<&[f64]>, ws: &mut Workspace, t: &mut T) {
        let (nq, ng) = (self.nq, self.ng);
        let inter = if self.fused() { Mem::Scratch } else { Mem::Global };
        let s_pass = self.interp_pass(1, false, Mem::Global, inter);
        let r_pass = self.interp_pass(0, false, inter, inter);
        let t_pass = self.interp_pass(2, false, inter, inter);
        if self.fused() {
            s_pass.run(q, [nq, nq, nq], &mut ws.a, None, None, &mut ws.line, t);
            t.sync();
            r_pass.run(&ws.a, [nq, ng, nq], &mut ws.b, None, None, &mut ws.line, t);
            t.sync();
            t_pass.run(&ws.b, [ng, ng, nq], &mut ws.c, None, scale, &mut ws.line, t);
        } else {
            for z in 0..ng {
                if z < nq {
                    s_pass.run(q, [nq, nq, nq], &mut ws.a, Some(z), None, &mut ws.line, t);
                }
                t.sync();
                if z < nq {
                    r_pass.run(&ws.a, [nq, ng, nq], &mut ws.b, Some(z), None, &mut ws.line, t);
                }
                t.sync();
            }
            t.sync();
            t_pass.run(&ws.b, [ng, ng, nq], &mut ws.c, None, scale, &mut ws.line, t);
        }
    }

    /// GL values in `ws.c` → GLL values in `out` (global).
    fn project<T: Tally>(&self, out: &mut [f64], ws: &mut Workspace, t: &mut T) {
        let (nq, ng) = (self.nq, self.ng);
        let inter = if self.fused() { Mem::Scratch } else { Mem::Global };
        let s_pass = self.interp_pass(1, true, inter, inter);
        let r_pass = self.interp_pass(0, true, inter, inter);
        let t_pass = self.interp_pass(2, true, inter, Mem::Global);
        if self.fused() {
            s_pass.run(&ws.c, [ng, ng, ng], &mut ws.a, None, None, &mut ws.line, t);
            t.sync();
            r_pass.run(&ws.a, [ng, nq, ng], &mut ws.b, None, None, &mut ws.line, t);
            t.sync();
        } else {
            for z in 0..ng {
                t.sync();
                s_pass.run(&ws.c, [ng, ng, ng], &mut ws.a, Some(z), None, &mut ws.line, t);
                t.sync();
                r_pass.run(&ws.a, [ng, nq, ng], &mut ws.b, Some(z), None, &mut ws.line, t);
                t.sync();
            }
        }
        t_pass.run(&ws.b, [nq, nq, ng], out, None, None, &mut ws.line, t);
    }

    fn mass<T: Tally>(&self, q: &[f64], geo: &[f64], out: &mut [f64], ws: &mut Workspace, t: &mut T) {
        let np_gl = self.ng.pow(3);
        let gwj = &geo[factor::GWJ * np_gl..(factor::GWJ + 1) * np_gl];
        self.interpolate(q, Some(gwj), ws, t);
        if self.fused() {
            t.sync();
        }
        self.project(out, ws, t);
    }

    fn collocation<T: Tally>(&self, q: &[f64], geo: &[f64], out: &mut [f64], ws: &mut Workspace, t: &mut T) {
        let n = self.nq;
        let np = n * n * n;
        let d = self.diff.expect("collocation kernel needs D");
        let Workspace { a, rq, .. } = ws;
        let (q_mem, rq_mem) = if self.fused() {
            a[..np].copy_from_slice(q);
            t.global_read(np as u64);
            t.scratch_write(np as u64);
            t.sync();
            (Mem::Scratch, Mem::Scratch)
        } else {
            a[..np].copy_from_slice(q);
            (Mem::Global, Mem::Global)
        };
        gradient_chain(d, n, &a[..np], q_mem, geo, rq, rq_mem, t);
        t.sync();
        divergence(d, n, rq, rq_mem, &a[..np], q_mem, geo, self.lambda, out, Mem::Global, t);
    }

    fn full_quadrature<T: Tally>(&self, q: &[f64], geo: &[f64], out: &mut [f64], ws: &mut Workspace, t: &mut T) {
        let ng = self.ng;
        let np = ng * ng * ng;
        let d = self.diff.expect("full-quadrature kernel needs D̃");
        self.interpolate(q, None, ws, t);
        t.sync();
        let mem = if self.fused() { Mem::Scratch } else { Mem::Global };
        let Workspace { a, c, rq, .. } = ws;
        gradient_chain(d, ng, &c[..np], mem, geo, rq, mem, t);
        t.sync();
        divergence(d, ng, rq, mem, &c[..np], mem, geo, self.lambda, &mut a[..np], mem, t);
        c[..np].copy_from_slice(&a[..np]);
        if self.fused() {
            t.sync();
        }
        self.project(out, ws, t);
    }
}

/// `rq = G ∇q` at every point of an `n^3` tensor, with the gradient by
/// collocation differentiation along each axis.
#[allow(clippy::too_many_arguments)]
fn gradient_chain<T: Tally>(
    d: &OperatorMatrix,
    n: usize,
    q: &[f64],
    q_mem: Mem,
    geo: &[f64],
    rq: &mut [f64],
    rq_mem: Mem,
    t: &mut T,
) {
    let np = n * n * n;
    let g = |f: usize, p: usize| geo[f * np + p];
    let nn = n as u64;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let p = i + n * (j + n * k);
                t.global_read(6);
                let (mut qr, mut qs, mut qt) = (0.0, 0.0, 0.0);
                for m in 0..n {
                    qr += d.get(i, m) * q[m + n * (j + n * k)];
                }
                for m in 0..n {
                    qs += d.get(j, m) * q[i + n * (m + n * k)];
                }
                for m in 0..n {
                    qt += d.get(k, m) * q[i + n * (j + n * m)];
                }
                t.scratch_read(3 * nn);
                read(t, q_mem, 3 * nn);
                t.flops(6 * nn);

                let (grr, grs, grt) = (g(factor::GRR, p), g(factor::GRS, p), g(factor::GRT, p));
                let (gss, gst, gtt) = (g(factor::GSS, p), g(factor::GST, p), g(factor::GTT, p));
                rq[p] = grr * qr + grs * qs + grt * qt;
                rq[np + p] = grs * qr + gss * qs + gst * qt;
                rq[2 * np + p] = grt * qr + gst * qs + gtt * qt;
                t.flops(15);
                write(t, rq_mem, 3);
            }
        }
    }
}

/// `out = Dᵀ-weighted sum of rq + λ·GwJ·q` at every point.
#[allow(clippy::too_many_arguments)]
fn divergence<T: Tally>(
    d: &OperatorMatrix,
    n: usize,
    rq: &[f64],
    rq_mem: Mem,
    q: &[f64],
    q_mem: Mem,
    geo: &[f64],
    lambda: f64,
    out: &mut [f64],
    out_mem: Mem,
    t: &mut T,
) {
    let np = n * n * n;
    let (rqr, rest) = rq.split_at(np);
    let (rqs, rqt) = rest.split_at(np);
    let gwj = &geo[factor::GWJ * np..(factor::GWJ + 1) * np];
    let nn = n as u64;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let p = i + n * (j + n * k);
                let mut acc = 0.0;
                for m in 0..n {
                    acc += d.get(m, i) * rqr[m + n * (j + n * k)];
                }
                for m in 0..n {
                    acc += d.get(m, j) * rqs[i + n * (m + n * k)];
                }
                for m in 0..n {
                    acc += d.get(m, k) * rqt[i + n * (j + n * m)];
                }
                t.scratch_read(3 * nn);
                read(t, rq_mem, 3 * nn);
                t.flops(6 * nn);

                t.global_read(1);
                read(t, q_mem, 1);
                out[p] = acc + lambda * gwj[p] * q[p];
                t.flops(3);
                write(t, out_mem, 1);
            }
        }
    }
}
