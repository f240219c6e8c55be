use super::{EvalPoint, Series, Tangent, C64};
use crate::error::{Error, Result};

/// A series flattened for repeated evaluation.
///
/// Variables are numbered `y_0..y_{n-1}`, then `q` per slot, then `q̄` per
/// slot. Each term stores its Fourier index and a list of `(variable, power)`
/// factors.
#[derive(Clone, Debug)]
pub struct CompiledSeries {
    n: usize,
    sites: usize,
    kmax: i32,
    coeffs: Vec<C64>,
    ks: Vec<i32>,
    fstart: Vec<u32>,
    fvar: Vec<u32>,
    fpow: Vec<u16>,
    pow_off: Vec<usize>,
    maxpow: Vec<u16>,
}

/// Value and partial derivatives at a point.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub value: C64,
    /// `∂W/∂x_i`.
    pub dx: Vec<C64>,
    /// `∂W/∂y_i`.
    pub dy: Vec<C64>,
    /// `∂W/∂q_j`.
    pub dq: Vec<C64>,
    /// `∂W/∂q̄_j`.
    pub dqbar: Vec<C64>,
}

impl CompiledSeries {
    pub fn new(w: &Series) -> Self {
        let n = w.n();
        let sites = w.table().len();
        let nvars = n + 2 * sites;
        let mut out = CompiledSeries {
            n,
            sites,
            kmax: 0,
            coeffs: Vec::with_capacity(w.len()),
            ks: Vec::with_capacity(w.len() * n),
            fstart: vec![0],
            fvar: Vec::new(),
            fpow: Vec::new(),
            pow_off: Vec::new(),
            maxpow: vec![0; nvars],
        };
        for (m, c) in w.iter() {
            out.coeffs.push(*c);
            for &k in &m.k {
                out.kmax = out.kmax.max(k.abs());
                out.ks.push(k);
            }
            for (i, &a) in m.alpha.iter().enumerate() {
                if a > 0 {
                    out.push_factor(i as u32, a);
                }
            }
            for &(s, p) in &m.beta {
                out.push_factor((n + s as usize) as u32, p);
            }
            for &(s, p) in &m.gamma {
                out.push_factor((n + sites + s as usize) as u32, p);
            }
            out.fstart.push(out.fvar.len() as u32);
        }
        let mut off = 0;
        for &mp in &out.maxpow {
            out.pow_off.push(off);
            off += mp as usize + 1;
        }
        out.pow_off.push(off);
        out
    }

    fn push_factor(&mut self, var: u32, pow: u16) {
        self.fvar.push(var);
        self.fpow.push(pow);
        let m = &mut self.maxpow[var as usize];
        *m = (*m).max(pow);
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn check(&self, w: &EvalPoint) -> Result<()> {
        if w.x.len() != self.n
            || w.y.len() != self.n
            || w.q.len() != self.sites
            || w.qbar.len() != self.sites
        {
            return Err(Error::Dimension(format!(
                "point has ({}, {}, {}, {}) components, series expects ({n}, {n}, {s}, {s})",
                w.x.len(),
                w.y.len(),
                w.q.len(),
                w.qbar.len(),
                n = self.n,
                s = self.sites
            )));
        }
        Ok(())
    }

    fn tables(&self, w: &EvalPoint) -> (Vec<C64>, Vec<C64>) {
        let width = (2 * self.kmax + 1) as usize;
        let mut e = Vec::with_capacity(self.n * width);
        for x in &w.x {
            for k in -self.kmax..=self.kmax {
                e.push((C64::new(0.0, k as f64) * x).exp());
            }
        }
        let mut p = vec![C64::new(1.0, 0.0); *self.pow_off.last().unwrap_or(&0)];
        for v in 0..self.maxpow.len() {
            let val = if v < self.n {
                w.y[v]
            } else if v < self.n + self.sites {
                w.q[v - self.n]
            } else {
                w.qbar[v - self.n - self.sites]
            };
            let off = self.pow_off[v];
            for j in 1..=self.maxpow[v] as usize {
                p[off + j] = p[off + j - 1] * val;
            }
        }
        (e, p)
    }

    fn fourier_factor(&self, t: usize, e: &[C64]) -> C64 {
        let width = (2 * self.kmax + 1) as usize;
        let mut f = C64::new(1.0, 0.0);
        for i in 0..self.n {
            let k = self.ks[t * self.n + i];
            if k != 0 {
                f *= e[i * width + (k + self.kmax) as usize];
            }
        }
        f
    }

    pub fn value(&self, w: &EvalPoint) -> Result<C64> {
        self.check(w)?;
        let (e, p) = self.tables(w);
        let mut total = C64::new(0.0, 0.0);
        for t in 0..self.coeffs.len() {
            let mut v = self.coeffs[t] * self.fourier_factor(t, &e);
            for f in self.fstart[t] as usize..self.fstart[t + 1] as usize {
                v *= p[self.pow_off[self.fvar[f] as usize] + self.fpow[f] as usize];
            }
            total += v;
        }
        Ok(total)
    }

    pub fn gradient(&self, w: &EvalPoint) -> Result<Gradient> {
        self.check(w)?;
        let (e, p) = self.tables(w);
        let zero = C64::new(0.0, 0.0);
        let mut value = zero;
        let mut dx = vec![zero; self.n];
        let mut dvar = vec![zero; self.maxpow.len()];
        let mut prefix: Vec<C64> = Vec::new();
        for t in 0..self.coeffs.len() {
            let base = self.coeffs[t] * self.fourier_factor(t, &e);
            let (fs, fe) = (self.fstart[t] as usize, self.fstart[t + 1] as usize);
            prefix.clear();
            let mut acc = C64::new(1.0, 0.0);
            for f in fs..fe {
                prefix.push(acc);
                acc *= p[self.pow_off[self.fvar[f] as usize] + self.fpow[f] as usize];
            }
            let v = base * acc;
            value += v;
            for i in 0..self.n {
                let k = self.ks[t * self.n + i];
                if k != 0 {
                    dx[i] += C64::new(0.0, k as f64) * v;
                }
            }
            let mut suffix = C64::new(1.0, 0.0);
            for f in (fs..fe).rev() {
                let var = self.fvar[f] as usize;
                let pow = self.fpow[f] as usize;
                let off = self.pow_off[var];
                let d = p[off + pow - 1] * pow as f64;
                dvar[var] += base * prefix[f - fs] * suffix * d;
                suffix *= p[off + pow];
            }
        }
        let (dy, rest) = dvar.split_at(self.n);
        let (dq, dqbar) = rest.split_at(self.sites);
        Ok(Gradient {
            value,
            dx,
            dy: dy.to_vec(),
            dq: dq.to_vec(),
            dqbar: dqbar.to_vec(),
        })
    }

    /// Hamiltonian vector field `(W_y, −W_x, i W_q̄, −i W_q)`.
    pub fn vector_field(&self, w: &EvalPoint) -> Result<Tangent> {
        let g = self.gradient(w)?;
        Ok(gradient_to_field(g))
    }
}

pub(crate) fn gradient_to_field(g: Gradient) -> Tangent {
    let i = C64::new(0.0, 1.0);
    Tangent {
        dx: g.dy,
        dy: g.dx.into_iter().map(|v| -v).collect(),
        dq: g.dqbar.into_iter().map(|v| i * v).collect(),
        dqbar: g.dq.into_iter().map(|v| -i * v).collect(),
    }
}

/// Evaluates the Hamiltonian vector field of `w` at a point:
/// `ẋ = W_y`, `ẏ = −W_x`, `q̇ = i W_q̄`, `q̄̇ = −i W_q`.
pub fn vector_field(w: &Series, at: &EvalPoint) -> Result<Tangent> {
    CompiledSeries::new(w).vector_field(at)
}

impl Series {
    /// Value at a (possibly complexified) point.
    pub fn evaluate(&self, at: &EvalPoint) -> Result<C64> {
        CompiledSeries::new(self).value(at)
    }
}
