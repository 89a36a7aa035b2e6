//! Numerical quadrature: Gauss–Legendre rules, adaptive Gauss–Kronrod (G7/K15)
//! on finite and semi-infinite intervals, and adaptive tensor-product cubature
//! on axis-aligned rectangles.
//!
//! Everything here is allocation-light and `no_std`; the recursion depth of the
//! adaptive routines is bounded explicitly.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Result of a quadrature with an error estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

impl Estimate {
    pub fn new(value: f64, error: f64, evals: usize) -> Self {
        Self { value, error, evals }
    }
}

impl core::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
            evals: self.evals + rhs.evals,
        }
    }
}

impl core::ops::AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Estimate) {
        *self = *self + rhs;
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fixed-order rule on `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Mapped nodes/weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

// Kronrod 15-point abscissae (non-negative half) and weights, with the
// embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        rk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod integration on a finite interval.
#[derive(Clone, Copy, Debug)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 2000 }
    }
}

impl Adaptive {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    /// Integrate `f` over `[a, b]` by global bisection of the worst interval.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> Result<Estimate> {
        if a == b {
            return Ok(Estimate::default());
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let (v, e) = gk15(&mut f, lo, hi);
        let mut segs: Vec<(f64, f64, f64, f64)> = vec![(lo, hi, v, e)];
        let mut total = v;
        let mut err = e;
        let mut evals = 15;
        while err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if segs.len() >= self.max_intervals {
                return Err(Error::Quadrature { value: sign * total, error: err, evals });
            }
            let (idx, _) = segs
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, s)| if s.3 > acc.1 { (i, s.3) } else { acc });
            let (s_lo, s_hi, s_v, s_e) = segs.swap_remove(idx);
            let mid = 0.5 * (s_lo + s_hi);
            let (v1, e1) = gk15(&mut f, s_lo, mid);
            let (v2, e2) = gk15(&mut f, mid, s_hi);
            evals += 30;
            total += v1 + v2 - s_v;
            err += e1 + e2 - s_e;
            segs.push((s_lo, mid, v1, e1));
            segs.push((mid, s_hi, v2, e2));
            if !total.is_finite() {
                return Err(Error::Quadrature { value: total, error: f64::INFINITY, evals });
            }
        }
        // Re-sum to limit drift from the running updates.
        let (value, error) = segs.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.2, acc.1 + s.3));
        Ok(Estimate::new(sign * value, error, evals))
    }

    /// Integrate over `[a, b]` split at the given interior break points.
    pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> Result<Estimate> {
        let mut pts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
        pts.push(a);
        pts.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
        pts.push(b);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
        pts.dedup();
        let mut acc = Estimate::default();
        for w in pts.windows(2) {
            acc += self.integrate(&mut f, w[0], w[1])?;
        }
        Ok(acc)
    }

    /// Integrate over `[a, ∞)` through the map `x = a + u / (1 - u)`.
    pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64) -> Result<Estimate> {
        self.integrate(
            |u: f64| {
                if u >= 1.0 {
                    return 0.0;
                }
                let one_m = 1.0 - u;
                let x = a + u / one_m;
                let v = f(x) / (one_m * one_m);
                if v.is_finite() { v } else { 0.0 }
            },
            0.0,
            1.0,
        )
    }

    /// Integrate over the whole real line, split at `centre`.
    pub fn integrate_real_line<F: FnMut(f64) -> f64>(&self, mut f: F, centre: f64) -> Result<Estimate> {
        let right = self.integrate_to_infinity(&mut f, centre)?;
        let left = self.integrate_to_infinity(|x| f(2.0 * centre - x), centre)?;
        Ok(right + left)
    }
}

/// Axis-aligned rectangle `[s0, s1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub s0: f64,
    pub s1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(s0: f64, s1: f64, y0: f64, y1: f64) -> Self {
        Self { s0, s1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.s1 - self.s0) * (self.y1 - self.y0)
    }

    fn quarters(&self) -> [Rect; 4] {
        let sm = 0.5 * (self.s0 + self.s1);
        let ym = 0.5 * (self.y0 + self.y1);
        [
            Rect::new(self.s0, sm, self.y0, ym),
            Rect::new(sm, self.s1, self.y0, ym),
            Rect::new(self.s0, sm, ym, self.y1),
            Rect::new(sm, self.s1, ym, self.y1),
        ]
    }
}

/// Adaptive tensor Gauss–Legendre cubature on rectangles: a cell is accepted
/// when its rule agrees with the sum over its four quarters.
#[derive(Clone, Debug)]
pub struct Cubature {
    rule: GaussLegendre,
    pub max_depth: u32,
}

impl Cubature {
    pub fn new(order: usize, max_depth: u32) -> Self {
        Self { rule: GaussLegendre::new(order), max_depth }
    }

    fn tensor<F: FnMut(f64, f64) -> f64>(&self, f: &mut F, r: &Rect) -> f64 {
        let mut acc = 0.0;
        for (s, ws) in self.rule.mapped(r.s0, r.s1) {
            for (y, wy) in self.rule.mapped(r.y0, r.y1) {
                acc += ws * wy * f(s, y);
            }
        }
        acc
    }

    /// Integrate over `rect` to the absolute tolerance `tol`.
    ///
    /// Cells that still disagree at `max_depth` are accepted and their
    /// disagreement is added to the returned error.
    pub fn integrate<F: FnMut(f64, f64) -> f64>(&self, mut f: F, rect: Rect, tol: f64) -> Estimate {
        let whole = self.tensor(&mut f, &rect);
        let per_pt = self.rule.len() * self.rule.len();
        let mut out = Estimate::new(0.0, 0.0, per_pt);
        self.refine(&mut f, rect, whole, tol, 0, &mut out);
        out
    }

    fn refine<F: FnMut(f64, f64) -> f64>(
        &self,
        f: &mut F,
        rect: Rect,
        coarse: f64,
        tol: f64,
        depth: u32,
        out: &mut Estimate,
    ) {
        let qs = rect.quarters();
        let vals = [
            self.tensor(f, &qs[0]),
            self.tensor(f, &qs[1]),
            self.tensor(f, &qs[2]),
            self.tensor(f, &qs[3]),
        ];
        out.evals += 4 * self.rule.len() * self.rule.len();
        let fine: f64 = vals.iter().sum();
        let diff = (fine - coarse).abs();
        if diff <= tol || depth >= self.max_depth {
            out.value += fine;
            out.error += diff;
            return;
        }
        for (q, v) in qs.iter().zip(vals) {
            self.refine(f, *q, v, 0.25 * tol, depth + 1, out);
        }
    }
}

/// Pairwise (cascade) summation: deterministic and with O(log n) error growth.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
