//! Monolithic dense assembly of the discrete space-time systems.
//!
//! The time operators are rebuilt as dense matrices from their discrete
//! definitions (exponential integrator weights by Gauss–Legendre
//! quadrature, the two-point problems with an explicit one-sided Robin
//! row and no elimination), the Crank–Nicolson rows are written out for
//! every interval, and the whole space-time system is solved by LU. No
//! iteration is involved, so agreement with an iterative solver checks
//! that the iteration converged to the discrete solution.

use nalgebra::{DMatrix, DVector};

/// One discretized instance, described by plain numbers.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    /// Nodes per axis (one or two axes).
    pub nodes: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub horizon: f64,
    pub nt: usize,
    pub an: f64,
    pub bn: f64,
    pub mu: f64,
    pub control_cost: f64,
    /// Control indicator per node (all nodes, first axis fastest).
    pub omega: Vec<bool>,
}

/// Time operator matrices acting on `nt + 1` node values.
#[derive(Debug, Clone)]
pub struct TimeMatrices {
    pub m: DMatrix<f64>,
    pub m_star: DMatrix<f64>,
    pub gstar_h: DMatrix<f64>,
    pub h_gstar: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub h_star: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

const GAUSS_X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GAUSS_W: [f64; 5] =
    [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];

/// `(∫ e^{-r(h-s)} (1 - s/h) ds, ∫ e^{-r(h-s)} s/h ds)` over `[0, h]`.
fn step_weights(rate: f64, h: f64) -> (f64, f64) {
    // composite 5-point Gauss on 4 panels: exact to round-off for the
    // smooth integrands at any step used in tests
    let panels = 4;
    let w = h / panels as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * w;
        for (x, g) in GAUSS_X.iter().zip(GAUSS_W) {
            let s = mid + 0.5 * w * x;
            let e = (-rate * (h - s)).exp() * 0.5 * w * g;
            a += e * (1.0 - s / h);
            b += e * s / h;
        }
    }
    (a, b)
}

fn relax_matrix(rate: f64, dt: f64, nk: usize, backward: bool) -> DMatrix<f64> {
    let (w0, w1) = step_weights(rate, dt);
    let decay = (-rate * dt).exp();
    let mut m = DMatrix::zeros(nk, nk);
    for k in 1..nk {
        for j in 0..nk {
            m[(k, j)] = decay * m[(k - 1, j)];
        }
        m[(k, k - 1)] += w0;
        m[(k, k)] += w1;
    }
    if backward {
        // reversal map R M R
        let mut r = DMatrix::zeros(nk, nk);
        for i in 0..nk {
            for j in 0..nk {
                r[(i, j)] = m[(nk - 1 - i, nk - 1 - j)];
            }
        }
        r
    } else {
        m
    }
}

fn derivative_matrix(dt: f64, nk: usize) -> DMatrix<f64> {
    let n = nk - 1;
    let c = 0.5 / dt;
    let mut d = DMatrix::zeros(nk, nk);
    d[(0, 0)] = -3.0 * c;
    d[(0, 1)] = 4.0 * c;
    d[(0, 2)] = -c;
    for k in 1..n {
        d[(k, k + 1)] = c;
        d[(k, k - 1)] = -c;
    }
    d[(n, n)] = 3.0 * c;
    d[(n, n - 1)] = -4.0 * c;
    d[(n, n - 2)] = c;
    d
}

/// Solution matrix of `-A'' + kappa A = phi` with the Robin row written
/// as the one-sided derivative stencil (`robin_at_start` selects the end).
fn bvp_matrix(kappa: f64, mu: f64, dt: f64, nk: usize, robin_at_start: bool) -> DMatrix<f64> {
    let n = nk - 1;
    let d = derivative_matrix(dt, nk);
    let mut a = DMatrix::zeros(nk, nk);
    let mut rhs = DMatrix::zeros(nk, nk);
    for k in 1..n {
        a[(k, k - 1)] = -1.0 / (dt * dt);
        a[(k, k)] = 2.0 / (dt * dt) + kappa;
        a[(k, k + 1)] = -1.0 / (dt * dt);
        rhs[(k, k)] = 1.0;
    }
    if robin_at_start {
        for j in 0..nk {
            a[(0, j)] = -d[(0, j)];
        }
        a[(0, 0)] += mu;
        a[(n, n)] = 1.0;
    } else {
        a[(0, 0)] = 1.0;
        for j in 0..nk {
            a[(n, j)] = d[(n, j)];
        }
        a[(n, n)] += mu;
    }
    a.lu().solve(&rhs).expect("coercive two-point problem")
}

impl TimeMatrices {
    pub fn new(bn: f64, mu: f64, horizon: f64, nt: usize) -> Self {
        let nk = nt + 1;
        let dt = horizon / nt as f64;
        let d = derivative_matrix(dt, nk);
        let gstar_h = bvp_matrix(bn * mu, mu, dt, nk, true);
        let h_gstar = bvp_matrix(bn * mu, mu, dt, nk, false);
        let eye = DMatrix::<f64>::identity(nk, nk);
        let h = (&eye * mu - &d) * &gstar_h;
        let h_star = (&eye * mu + &d) * &h_gstar;
        TimeMatrices {
            m: relax_matrix(bn, dt, nk, false),
            m_star: relax_matrix(bn, dt, nk, true),
            gstar_h,
            h_gstar,
            h,
            h_star,
            d,
        }
    }
}

impl DenseProblem {
    pub fn num_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn nk(&self) -> usize {
        self.nt + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    fn spacing(&self) -> Vec<f64> {
        (0..self.nodes.len()).map(|a| (self.hi[a] - self.lo[a]) / (self.nodes[a] - 1) as f64).collect()
    }

    fn axis_index(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        self.nodes
            .iter()
            .map(|&n| {
                let i = rest % n;
                rest /= n;
                i
            })
            .collect()
    }

    pub fn interior(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&p| self.axis_index(p).iter().zip(&self.nodes).all(|(&i, &n)| i > 0 && i + 1 < n))
            .collect()
    }

    /// `-Δ` on interior nodes with homogeneous Dirichlet data.
    pub fn neg_laplacian(&self) -> DMatrix<f64> {
        let inner = self.interior();
        let h = self.spacing();
        let pos = |p: usize| inner.iter().position(|&q| q == p);
        let mut k = DMatrix::zeros(inner.len(), inner.len());
        for (r, &p) in inner.iter().enumerate() {
            let idx = self.axis_index(p);
            let mut stride = 1;
            for a in 0..self.nodes.len() {
                let c = 1.0 / (h[a] * h[a]);
                k[(r, r)] += 2.0 * c;
                for nb in [p.wrapping_sub(stride), p + stride] {
                    let ia = if nb < p { idx[a] - 1 } else { idx[a] + 1 };
                    if ia > 0 && ia + 1 < self.nodes[a] {
                        k[(r, pos(nb).unwrap())] -= c;
                    }
                }
                stride *= self.nodes[a];
            }
        }
        k
    }

    /// Averaged-source Crank–Nicolson rows of the forward operator on the
    /// full interior history (`ni * nk` columns, rows for `j = 1..=nt`).
    fn rows(&self, mem: &[DMatrix<f64>], backward: bool) -> DMatrix<f64> {
        let ni = self.interior().len();
        let nk = self.nk();
        let nt = self.nt;
        let dt = self.dt();
        let anbn = self.an * self.bn;
        let a = self.neg_laplacian() + DMatrix::identity(ni, ni) * self.an;
        let mut l = DMatrix::zeros(ni * nt, ni * nk);
        for j in 1..=nt {
            // `cur` is the implicit level of the interval, `old` the known one
            let (cur, old) = if backward { (j - 1, j) } else { (j, j - 1) };
            for i in 0..ni {
                let row = i * nt + (j - 1);
                l[(row, i * nk + cur)] += 1.0 / dt;
                l[(row, i * nk + old)] -= 1.0 / dt;
                for q in 0..ni {
                    l[(row, q * nk + cur)] += 0.5 * a[(i, q)];
                    l[(row, q * nk + old)] += 0.5 * a[(i, q)];
                }
                for k in 0..nk {
                    let w = mem[i][(cur, k)] + mem[i][(old, k)];
                    l[(row, i * nk + k)] -= 0.5 * anbn * w;
                }
            }
        }
        l
    }

    /// `(ni * nt) x (ni * nk)` averaging of a source history.
    fn averaging(&self) -> DMatrix<f64> {
        let ni = self.interior().len();
        let (nk, nt) = (self.nk(), self.nt);
        let mut s = DMatrix::zeros(ni * nt, ni * nk);
        for j in 1..=nt {
            for i in 0..ni {
                let row = i * nt + (j - 1);
                s[(row, i * nk + j)] += 0.5;
                s[(row, i * nk + j - 1)] += 0.5;
            }
        }
        s
    }

    fn pack(&self, full: &[f64]) -> DVector<f64> {
        let nk = self.nk();
        let inner = self.interior();
        let mut out = DVector::zeros(inner.len() * nk);
        for (i, &p) in inner.iter().enumerate() {
            for k in 0..nk {
                out[i * nk + k] = full[p * nk + k];
            }
        }
        out
    }

    fn unpack(&self, packed: &[f64]) -> Vec<f64> {
        let nk = self.nk();
        let mut out = vec![0.0; self.num_nodes() * nk];
        for (i, &p) in self.interior().iter().enumerate() {
            out[p * nk..(p + 1) * nk].copy_from_slice(&packed[i * nk..(i + 1) * nk]);
        }
        out
    }

    fn memories(&self, t: &TimeMatrices, adjoint: bool) -> Vec<DMatrix<f64>> {
        self.interior()
            .iter()
            .map(|&p| match (self.omega[p], adjoint) {
                (true, false) => t.h.clone(),
                (true, true) => t.h_star.clone(),
                (false, false) => t.m.clone(),
                (false, true) => t.m_star.clone(),
            })
            .collect()
    }

    /// State for the source `f` and control `v`, both in the full
    /// node-major layout, `u(0) = 0`.
    pub fn solve_state(&self, f: &[f64], v: &[f64]) -> Vec<f64> {
        let t = TimeMatrices::new(self.bn, self.mu, self.horizon, self.nt);
        let ni = self.interior().len();
        let (nk, nt) = (self.nk(), self.nt);
        let n = ni * nk;
        let mut big = DMatrix::zeros(n, n);
        let rows = self.rows(&self.memories(&t, false), false);
        big.view_mut((0, 0), (ni * nt, n)).copy_from(&rows);
        for i in 0..ni {
            big[(ni * nt + i, i * nk)] = 1.0;
        }
        let anbn = self.an * self.bn;
        let b: Vec<f64> = f.iter().zip(v).map(|(f, v)| f + anbn * v).collect();
        let src = self.averaging() * self.pack(&b);
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, ni * nt).copy_from(&src);
        let x = big.lu().solve(&rhs).expect("nonsingular space-time system");
        self.unpack(x.as_slice())
    }

    /// The coupled optimality system with `v = -N⁻¹ H(G*(p)) χ_ω`. Returns
    /// `(u, p, v)` in the full node-major layout.
    pub fn solve_optimality(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let t = TimeMatrices::new(self.bn, self.mu, self.horizon, self.nt);
        let inner = self.interior();
        let ni = inner.len();
        let (nk, nt) = (self.nk(), self.nt);
        let n = ni * nk;
        let anbn = self.an * self.bn;
        let k = self.neg_laplacian();
        let avg = self.averaging();

        // v = C p with C block diagonal
        let mut c = DMatrix::zeros(n, n);
        for (i, &p) in inner.iter().enumerate() {
            if self.omega[p] {
                c.view_mut((i * nk, i * nk), (nk, nk)).copy_from(&(&t.h_gstar * (-1.0 / self.control_cost)));
            }
        }
        // adjoint source S u
        let mut s = DMatrix::zeros(n, n);
        for (i, &p) in inner.iter().enumerate() {
            for (q, _) in inner.iter().enumerate() {
                for kk in 0..nk {
                    s[(i * nk + kk, q * nk + kk)] += k[(i, q)];
                }
            }
            let eye = DMatrix::<f64>::identity(nk, nk);
            let block = if self.omega[p] {
                (&eye - &t.gstar_h * (self.bn * self.mu)) * self.an
            } else {
                (&eye - &t.m_star * &t.m * (self.bn * self.bn)) * self.an
            };
            let mut view = s.view_mut((i * nk, i * nk), (nk, nk));
            view += block;
        }

        let fwd = self.rows(&self.memories(&t, false), false);
        let bwd = self.rows(&self.memories(&t, true), true);
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (ni * nt, n)).copy_from(&fwd);
        big.view_mut((0, n), (ni * nt, n)).copy_from(&(-(&avg * &c) * anbn));
        big.view_mut((ni * nt, n), (ni * nt, n)).copy_from(&bwd);
        big.view_mut((ni * nt, 0), (ni * nt, n)).copy_from(&(-(&avg * &s)));
        let base = 2 * ni * nt;
        for i in 0..ni {
            big[(base + i, i * nk)] = 1.0;
            big[(base + ni + i, n + i * nk + nt)] = 1.0;
            big[(base + ni + i, i * nk + nt)] = -1.0;
        }
        let mut rhs = DVector::zeros(2 * n);
        rhs.rows_mut(0, ni * nt).copy_from(&(&avg * self.pack(f)));
        let x = big.lu().solve(&rhs).expect("nonsingular optimality system");
        let u = x.rows(0, n).into_owned();
        let p = x.rows(n, n).into_owned();
        let v = &c * &p;
        (self.unpack(u.as_slice()), self.unpack(p.as_slice()), self.unpack(v.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(nodes: Vec<usize>) -> DenseProblem {
        let d = nodes.len();
        let n: usize = nodes.iter().product();
        DenseProblem {
            nodes,
            lo: vec![0.0; d],
            hi: vec![1.0; d],
            horizon: 1.0,
            nt: 8,
            an: 4.0 * std::f64::consts::PI,
            bn: 1.0,
            mu: 2.0,
            control_cost: 1.0,
            omega: vec![false; n],
        }
    }

    #[test]
    fn relax_matrix_reproduces_closed_form() {
        let t = TimeMatrices::new(1.0, 2.0, 1.0, 10);
        let ones = DVector::from_element(11, 1.0);
        let y = &t.m * ones;
        assert!((y[10] - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn laplacian_2d_is_symmetric() {
        let p = problem(vec![5, 4]);
        let k = p.neg_laplacian();
        assert_eq!(k.nrows(), 6);
        assert!((&k - k.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn zero_data_zero_state() {
        let p = problem(vec![6]);
        let z = vec![0.0; 6 * 9];
        assert!(p.solve_state(&z, &z).iter().all(|v| *v == 0.0));
    }
}
