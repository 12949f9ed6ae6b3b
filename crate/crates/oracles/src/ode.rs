//! Reference integrators for the scalar time operators.
//!
//! Everything here works from analytic sources `phi(t)` and is
//! deliberately written without reference to the production
//! discretizations: classical RK4 for initial value problems, shooting
//! for the two-point problems, and fine-grid trapezoid Picard iteration
//! with Richardson extrapolation for the non-local `H` equations.

/// Classical RK4 for an `N`-dimensional system. Returns the state at every
/// step, including the initial one.
pub fn rk4<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Vec<[f64; N]> {
    let h = (t1 - t0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    out.push(y);
    let add = |y: &[f64; N], k: &[f64; N], c: f64| {
        let mut r = *y;
        for i in 0..N {
            r[i] += c * k[i];
        }
        r
    };
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &add(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &add(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &add(&y, &k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(y);
    }
    out
}

/// `y' + rate y = phi`, `y(0) = 0` (or the mirrored problem
/// `-y' + rate y = phi`, `y(T) = 0` when `backward`), sampled at the
/// `nt + 1` nodes of `[0, horizon]`.
pub fn relax(rate: f64, horizon: f64, nt: usize, substeps: usize, backward: bool, phi: impl Fn(f64) -> f64) -> Vec<f64> {
    let steps = nt * substeps;
    if backward {
        // s = T - t turns the problem into a forward one
        let ys = rk4(|s, y| [phi(horizon - s) - rate * y[0]], [0.0], 0.0, horizon, steps);
        let mut out: Vec<f64> = (0..=nt).map(|k| ys[k * substeps][0]).collect();
        out.reverse();
        out
    } else {
        let ys = rk4(|t, y| [phi(t) - rate * y[0]], [0.0], 0.0, horizon, steps);
        (0..=nt).map(|k| ys[k * substeps][0]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobinEnd {
    /// `A(T) = 0`, `-A'(0) + mu A(0) = 0`.
    Start,
    /// `A(0) = 0`, `A'(T) + mu A(T) = 0`.
    End,
}

/// Shooting solution of `-A'' + kappa A = phi` with one Robin end.
/// Returns `(A, A')` at the `nt + 1` nodes.
pub fn shoot_bvp(
    end: RobinEnd,
    kappa: f64,
    mu: f64,
    horizon: f64,
    nt: usize,
    substeps: usize,
    phi: impl Fn(f64) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let steps = nt * substeps;
    let part = rk4(|t, y| [y[1], kappa * y[0] - phi(t)], [0.0, 0.0], 0.0, horizon, steps);
    let (y0, target): ([f64; 2], fn(&[f64; 2], f64) -> f64) = match end {
        RobinEnd::Start => ([1.0, mu], |y, _| y[0]),
        RobinEnd::End => ([0.0, 1.0], |y, mu| y[1] + mu * y[0]),
    };
    let hom = rk4(|_, y| [y[1], kappa * y[0]], y0, 0.0, horizon, steps);
    let s = -target(&part[steps], mu) / target(&hom[steps], mu);
    let mut a = Vec::with_capacity(nt + 1);
    let mut da = Vec::with_capacity(nt + 1);
    for k in 0..=nt {
        let (p, h) = (part[k * substeps], hom[k * substeps]);
        a.push(p[0] + s * h[0]);
        da.push(p[1] + s * h[1]);
    }
    (a, da)
}

/// Trapezoid solve of `y' + rate y = s` (`y(0) = 0`) on a uniform grid,
/// or of the mirrored problem when `backward`.
fn trapezoid_relax(rate: f64, h: f64, s: &[f64], backward: bool) -> Vec<f64> {
    let n = s.len();
    let mut y = vec![0.0; n];
    let a = (1.0 - 0.5 * rate * h) / (1.0 + 0.5 * rate * h);
    let b = 0.5 * h / (1.0 + 0.5 * rate * h);
    if backward {
        for k in (0..n - 1).rev() {
            y[k] = a * y[k + 1] + b * (s[k] + s[k + 1]);
        }
    } else {
        for k in 1..n {
            y[k] = a * y[k - 1] + b * (s[k] + s[k - 1]);
        }
    }
    y
}

fn picard_h_fine(bn: f64, mu: f64, horizon: f64, nf: usize, adjoint: bool, phi: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let h = horizon / nf as f64;
    let f: Vec<f64> = (0..=nf).map(|k| phi(k as f64 * h)).collect();
    let c = mu * (mu - bn);
    let mut x = vec![0.0; nf + 1];
    for _ in 0..500 {
        // H:  H' + mu H - c G*(H) = phi,  H(0) = 0
        // H*: -H*' + mu H* - c G(H*) = phi, H*(T) = 0
        let g = trapezoid_relax(mu, h, &x, !adjoint);
        let s: Vec<f64> = f.iter().zip(&g).map(|(f, g)| f + c * g).collect();
        let next = trapezoid_relax(mu, h, &s, adjoint);
        let change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if change < 1e-15 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    x
}

/// `H(phi)` (or `H*(phi)` when `adjoint`) from its defining non-local ODE
/// by Picard iteration on the `G*` (resp. `G`) term, trapezoid in time on
/// `nt * refine` steps, Richardson-extrapolated with the doubled grid.
pub fn picard_h(
    bn: f64,
    mu: f64,
    horizon: f64,
    nt: usize,
    refine: usize,
    adjoint: bool,
    phi: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let coarse = picard_h_fine(bn, mu, horizon, nt * refine, adjoint, &phi);
    let fine = picard_h_fine(bn, mu, horizon, 2 * nt * refine, adjoint, &phi);
    (0..=nt).map(|k| (4.0 * fine[2 * k * refine] - coarse[k * refine]) / 3.0).collect()
}
