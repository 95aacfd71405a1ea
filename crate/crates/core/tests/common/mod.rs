#![allow(dead_code)]

pub mod checkpoints;
pub mod reference;
pub mod scenario;

use preictal::autodiff::{gradient_check, Array, Graph, Tensor};
use preictal::nn::{
    bilstm_forward, conv1d_forward, dense_forward, lstm_forward, maxpool1d_forward, Activation, Direction,
    LayerSpec,
};
use preictal::training::weighted_bce_node;
use preictal::Result;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values at least 0.01 apart, so max pooling has no near-ties under perturbation.
pub fn distinct(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * 0.05).collect();
    v.shuffle(rng);
    v.iter().map(|x| x + rng.random_range(-0.01..0.01)).collect()
}

/// Values bounded away from zero, for inputs that pass through relu.
pub fn off_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

pub fn arr(shape: &[usize], data: Vec<f64>) -> Array {
    Array::new(shape.to_vec(), data).unwrap()
}

// ---- naive references -------------------------------------------------------

pub fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = s;
        }
    }
    out
}

/// `x [time, cin]`, `w [cout, cin, k]`, zero padding at both ends.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv1d(
    x: &[f64],
    time: usize,
    cin: usize,
    w: &[f64],
    b: &[f64],
    cout: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> Vec<f64> {
    let out_time = (time + 2 * padding - k) / stride + 1;
    let mut out = vec![0.0; out_time * cout];
    for t in 0..out_time {
        for o in 0..cout {
            let mut s = b[o];
            for i in 0..cin {
                for j in 0..k {
                    let pos = (t * stride + j) as isize - padding as isize;
                    if pos >= 0 && (pos as usize) < time {
                        s += x[pos as usize * cin + i] * w[(o * cin + i) * k + j];
                    }
                }
            }
            out[t * cout + o] = s;
        }
    }
    out
}

pub fn naive_maxpool(x: &[f64], time: usize, ch: usize, pool: usize, stride: usize) -> Vec<f64> {
    let out_time = (time - pool) / stride + 1;
    let mut out = vec![f64::NEG_INFINITY; out_time * ch];
    for t in 0..out_time {
        for c in 0..ch {
            for p in 0..pool {
                out[t * ch + c] = out[t * ch + c].max(x[(t * stride + p) * ch + c]);
            }
        }
    }
    out
}

fn sigm(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Gate order input, forget, candidate, output; `w [4h, in]`, `u [4h, h]`.
#[allow(clippy::too_many_arguments)]
pub fn naive_lstm(
    x: &[f64],
    time: usize,
    input: usize,
    hidden: usize,
    w: &[f64],
    u: &[f64],
    b: &[f64],
    reverse: bool,
) -> Vec<f64> {
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut out = vec![0.0; time * hidden];
    let steps: Vec<usize> = if reverse { (0..time).rev().collect() } else { (0..time).collect() };
    for t in steps {
        let mut z = vec![0.0; 4 * hidden];
        for r in 0..4 * hidden {
            let mut s = b[r];
            for i in 0..input {
                s += w[r * input + i] * x[t * input + i];
            }
            for j in 0..hidden {
                s += u[r * hidden + j] * h[j];
            }
            z[r] = s;
        }
        for j in 0..hidden {
            let ig = sigm(z[j]);
            let fg = sigm(z[hidden + j]);
            let g = z[2 * hidden + j].tanh();
            let og = sigm(z[3 * hidden + j]);
            c[j] = fg * c[j] + ig * g;
            h[j] = og * c[j].tanh();
        }
        out[t * hidden..(t + 1) * hidden].copy_from_slice(&h);
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---- oracle suites ----------------------------------------------------------

pub const ORACLE_OPS: [&str; 4] = ["conv1d", "maxpool1d", "lstm_forward", "matmul"];

/// Largest absolute deviation from the naive reference over `n` random instances.
pub fn oracle_max_error(op: &str, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let err = match op {
            "conv1d" => {
                let (cin, cout, k) = (r.random_range(1..4), r.random_range(1..5), r.random_range(1..5));
                let (stride, padding) = (r.random_range(1..3), r.random_range(0..3));
                let time = r.random_range(k..k + 12);
                let x = uniform(&mut r, time * cin, -2.0, 2.0);
                let w = uniform(&mut r, cout * cin * k, -1.0, 1.0);
                let b = uniform(&mut r, cout, -1.0, 1.0);
                let spec = LayerSpec::Conv1d { in_channels: cin, out_channels: cout, kernel_size: k, stride, padding };
                let mut g = Graph::new();
                let xt = g.constant(arr(&[time, cin], x.clone()));
                let wt = g.constant(arr(&[cout, cin, k], w.clone()));
                let bt = g.constant(arr(&[cout], b.clone()));
                let y = conv1d_forward(&mut g, xt, &spec, &[wt, bt]).unwrap();
                max_abs_diff(g.value(y), &naive_conv1d(&x, time, cin, &w, &b, cout, k, stride, padding))
            }
            "maxpool1d" => {
                let (ch, pool, stride) = (r.random_range(1..4), r.random_range(1..4), r.random_range(1..3));
                let time = r.random_range(pool..pool + 12);
                let x = uniform(&mut r, time * ch, -3.0, 3.0);
                let mut g = Graph::new();
                let xt = g.constant(arr(&[time, ch], x.clone()));
                let y = maxpool1d_forward(&mut g, xt, pool, stride).unwrap();
                max_abs_diff(g.value(y), &naive_maxpool(&x, time, ch, pool, stride))
            }
            "lstm_forward" => {
                let (time, input, hidden) = (r.random_range(1..8), r.random_range(1..4), r.random_range(1..5));
                let x = uniform(&mut r, time * input, -2.0, 2.0);
                let w = uniform(&mut r, 4 * hidden * input, -1.0, 1.0);
                let u = uniform(&mut r, 4 * hidden * hidden, -1.0, 1.0);
                let b = uniform(&mut r, 4 * hidden, -1.0, 1.0);
                let reverse = r.random_bool(0.5);
                let dir = if reverse { Direction::Reverse } else { Direction::Forward };
                let mut g = Graph::new();
                let xt = g.constant(arr(&[time, input], x.clone()));
                let ps = [
                    g.constant(arr(&[4 * hidden, input], w.clone())),
                    g.constant(arr(&[4 * hidden, hidden], u.clone())),
                    g.constant(arr(&[4 * hidden], b.clone())),
                ];
                let y = lstm_forward(&mut g, xt, input, hidden, &ps, dir).unwrap();
                max_abs_diff(g.value(y), &naive_lstm(&x, time, input, hidden, &w, &u, &b, reverse))
            }
            "matmul" => {
                let (m, k, n) = (r.random_range(1..9), r.random_range(1..9), r.random_range(1..9));
                let a = uniform(&mut r, m * k, -3.0, 3.0);
                let b = uniform(&mut r, k * n, -3.0, 3.0);
                let mut g = Graph::new();
                let at = g.constant(arr(&[m, k], a.clone()));
                let bt = g.constant(arr(&[k, n], b.clone()));
                let y = g.matmul(at, bt).unwrap();
                max_abs_diff(g.value(y), &naive_matmul(&a, &b, m, k, n))
            }
            other => panic!("unknown op {other}"),
        };
        worst = worst.max(err);
    }
    worst
}

// ---- gradient-check suites --------------------------------------------------

pub const GRAD_KINDS: [&str; 9] = [
    "conv1d",
    "maxpool1d",
    "lstm",
    "bilstm",
    "dense",
    "relu",
    "sigmoid",
    "tanh",
    "weighted_bce",
];

type Builder = Box<dyn Fn(&mut Graph, &[Tensor]) -> Result<Tensor>>;

fn instance(kind: &str, r: &mut ChaCha8Rng) -> (Builder, Vec<Array>) {
    match kind {
        "conv1d" => {
            let (cin, cout, k) = (r.random_range(1..4), r.random_range(1..4), r.random_range(1..4));
            let (stride, padding) = (r.random_range(1..3), r.random_range(0..2));
            let time = r.random_range(k..k + 6);
            let spec = LayerSpec::Conv1d { in_channels: cin, out_channels: cout, kernel_size: k, stride, padding };
            let inputs = vec![
                arr(&[time, cin], uniform(r, time * cin, -1.0, 1.0)),
                arr(&[cout, cin, k], uniform(r, cout * cin * k, -1.0, 1.0)),
                arr(&[cout], uniform(r, cout, -0.5, 0.5)),
            ];
            (Box::new(move |g, l| conv1d_forward(g, l[0], &spec, &l[1..])), inputs)
        }
        "maxpool1d" => {
            let (ch, pool, stride) = (r.random_range(1..4), r.random_range(1..4), r.random_range(1..3));
            let time = r.random_range(pool..pool + 6);
            let inputs = vec![arr(&[time, ch], distinct(r, time * ch))];
            (Box::new(move |g, l| maxpool1d_forward(g, l[0], pool, stride)), inputs)
        }
        "lstm" | "bilstm" => {
            let (time, input, hidden) = (r.random_range(1..5), r.random_range(1..3), r.random_range(1..4));
            let dirs = if kind == "bilstm" { 2 } else { 1 };
            let reverse = r.random_bool(0.5);
            let mut inputs = vec![arr(&[time, input], uniform(r, time * input, -1.0, 1.0))];
            for _ in 0..dirs {
                inputs.push(arr(&[4 * hidden, input], uniform(r, 4 * hidden * input, -0.8, 0.8)));
                inputs.push(arr(&[4 * hidden, hidden], uniform(r, 4 * hidden * hidden, -0.8, 0.8)));
                inputs.push(arr(&[4 * hidden], uniform(r, 4 * hidden, -0.5, 0.5)));
            }
            if dirs == 2 {
                (Box::new(move |g, l| bilstm_forward(g, l[0], input, hidden, &l[1..])), inputs)
            } else {
                let dir = if reverse { Direction::Reverse } else { Direction::Forward };
                (Box::new(move |g, l| lstm_forward(g, l[0], input, hidden, &l[1..], dir)), inputs)
            }
        }
        "dense" => {
            let (fin, fout) = (r.random_range(1..6), r.random_range(1..5));
            let act = [Activation::Sigmoid, Activation::Tanh][r.random_range(0..2)];
            let inputs = vec![
                arr(&[fin], uniform(r, fin, -1.0, 1.0)),
                arr(&[fout, fin], uniform(r, fout * fin, -1.0, 1.0)),
                arr(&[fout], uniform(r, fout, -0.5, 0.5)),
            ];
            (Box::new(move |g, l| dense_forward(g, l[0], fin, fout, act, &l[1..])), inputs)
        }
        "relu" | "sigmoid" | "tanh" => {
            let n = r.random_range(1..10);
            let act = match kind {
                "relu" => Activation::Relu,
                "sigmoid" => Activation::Sigmoid,
                _ => Activation::Tanh,
            };
            let inputs = vec![arr(&[n], off_zero(r, n))];
            (Box::new(move |g, l| Ok(act.apply(g, l[0]))), inputs)
        }
        "weighted_bce" => {
            let label: u8 = r.random_range(0..2);
            let weight = r.random_range(0.2..5.0);
            let p = r.random_range(0.05..0.95);
            let inputs = vec![arr(&[1], vec![p])];
            (Box::new(move |g, l| weighted_bce_node(g, l[0], label, weight)), inputs)
        }
        other => panic!("unknown layer kind {other}"),
    }
}

/// Worst relative error of reverse-mode against central differences
/// (ε = 1e-5) over `n` random instances of one kind.
pub fn grad_max_error(kind: &str, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let (f, inputs) = instance(kind, &mut r);
            gradient_check(f, &inputs, 1e-5).unwrap()
        })
        .fold(0.0, f64::max)
}

// ---- metric oracles ---------------------------------------------------------

/// All-pairs Mann-Whitney estimate: P(score_pos > score_neg) + ½ P(tie).
pub fn mann_whitney_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Scores with deliberate ties and both classes present.
pub fn random_scored(r: &mut ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<u8>) {
    let n = r.random_range(2..=max_n);
    let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let levels = r.random_range(2..60);
    let scores = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
    (scores, labels)
}
