//! Projected Newton iteration over monotone node vectors in a box.

/// Feasible set `lo <= x_0`, `x_K <= hi`, `x_{i+1} - x_i >= gap`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MonotoneBox {
    pub lo: f64,
    pub hi: f64,
    pub gap: f64,
}

impl MonotoneBox {
    /// Euclidean projection: isotonic regression of the gap-shifted vector,
    /// then clamping into the shifted box.
    pub fn project(&self, x: &mut [f64]) {
        let k = x.len() - 1;
        for (i, v) in x.iter_mut().enumerate() {
            *v -= i as f64 * self.gap;
        }
        isotonic(x);
        let top = self.hi - k as f64 * self.gap;
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo, top) + i as f64 * self.gap;
        }
        // rounding in the shift can push the last node past the wall
        x[k] = x[k].min(self.hi);
        x[0] = x[0].max(self.lo);
    }
}

/// Pool-adjacent-violators for a nondecreasing least-squares fit.
pub(crate) fn isotonic(y: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y.iter() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, n2) = blocks[blocks.len() - 1];
            let (s1, n1) = blocks[blocks.len() - 2];
            if s1 / n1 as f64 > s2 / n2 as f64 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (s1 + s2, n1 + n2);
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (s, n) in blocks {
        let mean = s / n as f64;
        y[i..i + n].iter_mut().for_each(|v| *v = mean);
        i += n;
    }
}

/// Symmetric matrix with a dynamically tracked lower bandwidth, stored densely.
#[derive(Clone, Debug)]
pub(crate) struct BandMatrix {
    n: usize,
    band: usize,
    a: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            band: 0,
            a: vec![0.0; n * n],
        }
    }

    pub fn clear(&mut self) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.band);
            self.a[i * self.n + lo..=i * self.n + i]
                .iter_mut()
                .for_each(|v| *v = 0.0);
        }
        self.band = 0;
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)` (once on the diagonal).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.a[r * self.n + c] += v;
        self.band = self.band.max(r - c);
    }

    /// Adds `v` to entry `(i, j)` when it lies in the lower triangle; summing
    /// over all ordered pairs then assembles a symmetric matrix.
    pub fn accumulate(&mut self, i: usize, j: usize, v: f64) {
        if i >= j {
            self.a[i * self.n + j] += v;
            self.band = self.band.max(i - j);
        }
    }

    #[cfg(test)]
    /// Entry `(i, j)` of the symmetric matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.get(i, j)
        } else {
            self.get(j, i)
        }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Solves `(A + shift diag(d)) x = b` restricted to the free variables,
    /// with fixed variables set to zero. Returns `None` when the shifted
    /// matrix is not positive definite.
    fn solve(
        &self,
        shift: f64,
        d: &[f64],
        free: &[bool],
        b: &[f64],
        l: &mut Vec<f64>,
    ) -> Option<Vec<f64>> {
        let (n, w) = (self.n, self.band);
        l.clear();
        l.resize(n * (w + 1), 0.0);
        // l[i * (w + 1) + (i - j)] holds L[i][j]
        let at = |i: usize, j: usize| i * (w + 1) + (i - j);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                let mut s = if !free[i] || !free[j] {
                    if i == j {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.get(i, j) + if i == j { shift * d[i] } else { 0.0 }
                };
                let klo = lo.max(j.saturating_sub(w));
                for k in klo..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        let mut y: Vec<f64> = b
            .iter()
            .zip(free)
            .map(|(v, f)| if *f { *v } else { 0.0 })
            .collect();
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut s = y[i];
            for k in lo..i {
                s -= l[at(i, k)] * y[k];
            }
            y[i] = s / l[at(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= l[at(k, i)] * y[k];
            }
            y[i] = s / l[at(i, i)];
        }
        Some(y)
    }
}

/// Smooth objective with gradient and Hessian.
pub(crate) trait Problem {
    fn value(&mut self, x: &[f64]) -> f64;
    /// Value, gradient and Hessian at `x`.
    fn second_order(&mut self, x: &[f64], g: &mut [f64], h: &mut BandMatrix) -> f64;
    /// Size of objective changes that rounding alone can produce near the
    /// last point passed to `second_order`.
    fn noise_floor(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Options {
    pub max_iter: usize,
    pub rel_tol: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected Newton iteration over `bounds`, starting from the projection of `x`.
///
/// Endpoint nodes resting on a wall with an outward gradient are held fixed.
/// Indefinite Hessians are shifted by multiples of `scaling` (a positive
/// diagonal) until the Cholesky factorization succeeds. Stops when an
/// accepted step decreases the objective by less than `rel_tol` relative to
/// its value, when the Newton decrement falls below rounding level, or when
/// no descent step exists at working precision (reported as converged if the
/// decrement is within the problem's noise floor).
pub(crate) fn minimize(
    problem: &mut impl Problem,
    mut x: Vec<f64>,
    bounds: &MonotoneBox,
    scaling: &[f64],
    opts: &Options,
) -> Outcome {
    let n = x.len();
    bounds.project(&mut x);
    let mut g = vec![0.0; n];
    let mut hess = BandMatrix::new(n);
    let mut chol = Vec::new();
    let mut xt = vec![0.0; n];
    let mut fx = problem.second_order(&x, &mut g, &mut hess);
    let start_value = fx;
    let wall = 1e-12 * (bounds.hi - bounds.lo);
    let mut converged = false;
    let mut iterations = 0;
    let mut shift = 0.0f64;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut free = vec![true; n];
        if x[0] <= bounds.lo + wall && g[0] > 0.0 {
            free[0] = false;
        }
        if x[n - 1] >= bounds.hi - wall && g[n - 1] < 0.0 {
            free[n - 1] = false;
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut trial_shift = shift * 0.1;
        let d = loop {
            match hess.solve(trial_shift, scaling, &free, &rhs, &mut chol) {
                Some(d) => break d,
                None => trial_shift = (trial_shift * 10.0).max(1e-10),
            }
        };
        shift = trial_shift;
        let decrement = -dot(&g, &d);
        if !(decrement > 0.0) || decrement <= 4.0 * f64::EPSILON * fx.abs() {
            converged = true;
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                xt[i] = x[i] + step * d[i];
            }
            bounds.project(&mut xt);
            let ft = problem.value(&xt);
            let predicted: f64 = g
                .iter()
                .zip(xt.iter().zip(&x))
                .map(|(gi, (a, b))| gi * (a - b))
                .sum();
            if ft < fx && ft <= fx + 1e-4 * predicted {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        let Some(ft) = accepted else {
            // no descent left at working precision
            converged = decrement <= (1e-8 * fx.abs()).max(problem.noise_floor());
            break;
        };
        let decrease = fx - ft;
        std::mem::swap(&mut x, &mut xt);
        fx = problem.second_order(&x, &mut g, &mut hess);
        if decrease <= opts.rel_tol * fx.abs() {
            converged = true;
            break;
        }
    }
    Outcome {
        x,
        value: fx,
        start_value,
        iterations,
        converged,
    }
}
