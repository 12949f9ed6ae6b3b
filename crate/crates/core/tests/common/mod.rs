#![allow(dead_code)]

use homopt_core::{make_params, BoxRegion, Model, ModelParams, TimeGrid, TimeSeries};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A random trigonometric polynomial, smooth on any interval.
#[derive(Debug, Clone)]
pub struct Smooth {
    terms: Vec<(f64, f64, f64)>,
}

impl Smooth {
    pub fn random(rng: &mut ChaCha8Rng, terms: usize) -> Self {
        let terms = (0..terms)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.2..4.0), rng.gen_range(0.0..6.3)))
            .collect();
        Smooth { terms }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum()
    }

    pub fn sample(&self, grid: TimeGrid) -> TimeSeries {
        TimeSeries::from_fn(grid, |t| self.eval(t))
    }
}

/// n = 3, C0 = 1, N = 1, T = 1 on the unit interval, omega = [0.25, 0.75].
pub fn params_1d() -> ModelParams {
    make_params(3, 1.0, 1.0, 1.0, 1, BoxRegion::unit(), BoxRegion::new(&[0.25], &[0.75]).unwrap()).unwrap()
}

pub fn model_1d(nx: usize, nt: usize) -> Model {
    Model::new(params_1d(), &[nx], nt).unwrap()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn l2_time(a: &TimeSeries) -> f64 {
    homopt_core::time::inner_product(a, a).unwrap().sqrt()
}

/// Random smooth admissible control: zero at `t = 0` and off the control nodes.
pub fn random_control(m: &Model, rng: &mut ChaCha8Rng) -> homopt_core::SpaceTimeField {
    let s = Smooth::random(rng, 3);
    let (a, b) = (rng.gen_range(0.5..3.0), rng.gen_range(0.0..3.0));
    m.field_from_fn(|x, t| t * s.eval(t) * (a * x[0] + b).cos()).restricted(m.mask(), homopt_core::Region::Omega)
}

pub fn euclid_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
