//! Reference implementations used only by tests. Nothing here calls the
//! library code it is meant to check.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub enum RefKernel {
    Linear,
    Rbf(f64),
    Poly { degree: i32, gamma: f64, coef0: f64 },
}

impl RefKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        match *self {
            RefKernel::Linear => dot,
            RefKernel::Rbf(g) => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                (-g * d2).exp()
            }
            RefKernel::Poly { degree, gamma, coef0 } => (gamma * dot + coef0).powi(degree),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
}

/// Exact C-SVC dual optimum by enumerating every assignment of each
/// multiplier to {0, C, free}. For each assignment the free multipliers
/// solve the equality-constrained stationarity system; the best feasible
/// stationary point over all faces is the global maximum because the
/// objective is concave. Only practical for n ≤ 7 or so.
pub fn svm_dual_oracle(x: &[Vec<f64>], y: &[f64], kernel: RefKernel, c: f64) -> QpSolution {
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&x[i], &x[j]));
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let objective = |a: &[f64]| {
        let av = DVector::from_column_slice(a);
        av.sum() - 0.5 * (av.transpose() * &q * &av)[(0, 0)]
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let fixed_y: f64 = (0..n).filter(|&i| state[i] != 2).map(|i| y[i] * alpha[i]).sum();

        if free.is_empty() {
            if fixed_y.abs() > 1e-12 {
                continue;
            }
        } else {
            let m = free.len();
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, m)] = y[i];
                a[(m, r)] = y[i];
                let fixed: f64 = (0..n).filter(|&j| state[j] != 2).map(|j| q[(i, j)] * alpha[j]).sum();
                rhs[r] = 1.0 - fixed;
            }
            rhs[m] = -fixed_y;
            let svd = a.clone().svd(true, true);
            let Ok(sol) = svd.solve(&rhs, 1e-12) else { continue };
            if (&a * &sol - &rhs).norm() > 1e-8 * (1.0 + rhs.norm()) {
                continue;
            }
            let mut feasible = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                if v < -1e-10 || v > c + 1e-10 {
                    feasible = false;
                    break;
                }
                alpha[i] = v.clamp(0.0, c);
            }
            if !feasible {
                continue;
            }
        }
        let w = objective(&alpha);
        if best.as_ref().is_none_or(|(bw, _)| w > *bw) {
            best = Some((w, alpha));
        }
    }
    let (objective, alpha) = best.expect("alpha = 0 is always feasible");
    let bias = reference_bias(&k, y, &alpha, c);
    QpSolution { alpha, objective, bias }
}

/// Bias from the margin conditions: the mean over free multipliers of
/// `yᵢ − sᵢ`, otherwise the midpoint of the interval allowed by the
/// bounded ones (`sᵢ = Σⱼ αⱼ yⱼ K(xⱼ, xᵢ)`).
fn reference_bias(k: &DMatrix<f64>, y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = y.len();
    let eps = 1e-9 * c.max(1.0);
    let s = |i: usize| (0..n).map(|j| alpha[j] * y[j] * k[(j, i)]).sum::<f64>();
    let mut free = Vec::new();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let si = s(i);
        if alpha[i] > eps && alpha[i] < c - eps {
            free.push(y[i] - si);
        } else {
            // α = 0 needs yᵢ f(xᵢ) ≥ 1; α = C needs yᵢ f(xᵢ) ≤ 1
            let at_zero = alpha[i] <= eps;
            let bound = y[i] - si;
            if (y[i] > 0.0) == at_zero {
                lo = lo.max(bound);
            } else {
                hi = hi.min(bound);
            }
        }
    }
    if !free.is_empty() {
        free.iter().sum::<f64>() / free.len() as f64
    } else if lo.is_finite() && hi.is_finite() {
        (lo + hi) / 2.0
    } else if lo.is_finite() {
        lo
    } else {
        hi
    }
}

pub fn reference_decision(x: &[Vec<f64>], y: &[f64], sol: &QpSolution, kernel: RefKernel, point: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(&sol.alpha)
        .map(|((xi, yi), a)| a * yi * kernel.eval(xi, point))
        .sum::<f64>()
        + sol.bias
}

/// One request seen by [`StubServer`].
#[derive(Debug, Clone)]
pub struct Seen {
    pub at: Instant,
    pub method: String,
    pub content_type: Option<String>,
    pub body: String,
}

/// Minimal HTTP/1.1 endpoint: answers each request with the next status
/// from `statuses` (the last one repeats) and records what it saw.
pub struct StubServer {
    pub url: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
}

impl StubServer {
    pub fn start(statuses: Vec<u16>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/alert", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        thread::spawn(move || {
            let mut served = 0usize;
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
                    continue;
                }
                let mut length = 0usize;
                let mut content_type = None;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    if let Some((name, value)) = h.split_once(':') {
                        match name.to_ascii_lowercase().as_str() {
                            "content-length" => length = value.trim().parse().unwrap(),
                            "content-type" => content_type = Some(value.trim().to_string()),
                            _ => {}
                        }
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                log.lock().unwrap().push(Seen {
                    at: Instant::now(),
                    method: request_line.split(' ').next().unwrap_or("").to_string(),
                    content_type,
                    body: String::from_utf8(body).unwrap(),
                });
                let status = *statuses.get(served).or(statuses.last()).unwrap_or(&200);
                served += 1;
                let reply = format!("HTTP/1.1 {status} X\r\ncontent-length: 0\r\nconnection: close\r\n\r\n");
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        Self { url, seen }
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}
