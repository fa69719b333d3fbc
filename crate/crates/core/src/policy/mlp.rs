use rand::Rng;
use serde::{Deserialize, Serialize};

/// One-hidden-layer ReLU network over sparse one-hot inputs, trained with Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    /// Row per input unit, `n_hidden` wide.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row per hidden unit, `n_out` wide.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    #[serde(skip)]
    adam: Option<Adam>,
}

#[derive(Clone, Debug, PartialEq)]
struct Adam {
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// One regression example: active inputs, output unit, target value.
pub struct Sample<'a> {
    pub active: &'a [usize],
    pub output: usize,
    pub target: f64,
}

impl Mlp {
    pub fn new<R: Rng>(n_in: usize, n_hidden: usize, n_out: usize, rng: &mut R) -> Self {
        let mut init = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect::<Vec<_>>()
        };
        let w1 = init(n_in, n_hidden);
        let w2 = init(n_hidden, n_out);
        Mlp { n_in, n_hidden, n_out, w1, b1: vec![0.0; n_hidden], w2, b2: vec![0.0; n_out], adam: None }
    }

    fn hidden(&self, active: &[usize]) -> Vec<f64> {
        let mut h = self.b1.clone();
        for &i in active {
            let row = &self.w1[i * self.n_hidden..(i + 1) * self.n_hidden];
            h.iter_mut().zip(row).for_each(|(h, w)| *h += w);
        }
        h
    }

    pub fn forward(&self, active: &[usize]) -> Vec<f64> {
        let h = self.hidden(active);
        let mut out = self.b2.clone();
        for (j, &hj) in h.iter().enumerate() {
            if hj > 0.0 {
                let row = &self.w2[j * self.n_out..(j + 1) * self.n_out];
                out.iter_mut().zip(row).for_each(|(o, w)| *o += hj * w);
            }
        }
        out
    }

    fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// One Adam step on the mean squared error of the batch; returns the loss.
    pub fn train(&mut self, batch: &[Sample<'_>], lr: f64) -> f64 {
        let (nh, no) = (self.n_hidden, self.n_out);
        let mut g_w1 = vec![0.0; self.w1.len()];
        let mut g_b1 = vec![0.0; nh];
        let mut g_w2 = vec![0.0; self.w2.len()];
        let mut g_b2 = vec![0.0; no];
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for s in batch {
            let h = self.hidden(s.active);
            let mut y = self.b2[s.output];
            for (j, &hj) in h.iter().enumerate() {
                if hj > 0.0 {
                    y += hj * self.w2[j * no + s.output];
                }
            }
            let err = y - s.target;
            loss += 0.5 * err * err * scale;
            let d = err * scale;
            g_b2[s.output] += d;
            for (j, &hj) in h.iter().enumerate() {
                if hj > 0.0 {
                    g_w2[j * no + s.output] += d * hj;
                    let dh = d * self.w2[j * no + s.output];
                    g_b1[j] += dh;
                    for &i in s.active {
                        g_w1[i * nh + j] += dh;
                    }
                }
            }
        }
        let n = self.n_params();
        let adam = self.adam.get_or_insert_with(|| Adam { t: 0, m: vec![0.0; n], v: vec![0.0; n] });
        adam.t += 1;
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let c1 = 1.0 - b1.powi(adam.t as i32);
        let c2 = 1.0 - b2.powi(adam.t as i32);
        let params = self.w1.iter_mut().chain(&mut self.b1).chain(&mut self.w2).chain(&mut self.b2);
        let grads = g_w1.iter().chain(&g_b1).chain(&g_w2).chain(&g_b2);
        for (k, (p, g)) in params.zip(grads).enumerate() {
            if *g == 0.0 && adam.m[k] == 0.0 {
                continue;
            }
            adam.m[k] = b1 * adam.m[k] + (1.0 - b1) * g;
            adam.v[k] = b2 * adam.v[k] + (1.0 - b2) * g * g;
            *p -= lr * (adam.m[k] / c1) / ((adam.v[k] / c2).sqrt() + eps);
        }
        loss
    }

    /// Copy of the parameters without optimizer state.
    pub fn snapshot(&self) -> Mlp {
        Mlp { adam: None, ..self.clone() }
    }
}
