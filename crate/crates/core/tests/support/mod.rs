//! Independent reference implementations used as test oracles. Nothing here
//! calls into the code paths it checks.
#![allow(dead_code, clippy::needless_range_loop)]

use wecfarm::dataset::{Position, WecLayout, WEC_COUNT};
use wecfarm::mlp::{Activation, MlpModel};
use wecfarm::rng::PinnedRng;

pub fn random_layout(rng: &mut PinnedRng) -> WecLayout {
    let mut p = [Position::default(); WEC_COUNT];
    for slot in p.iter_mut() {
        *slot = Position::new(rng.uniform(0.0, 566.0), rng.uniform(0.0, 566.0));
    }
    WecLayout::new(p)
}

/// Double loop over coordinates with an explicit square root.
pub fn distance_oracle(layout: &WecLayout) -> Vec<Vec<f64>> {
    let p = &layout.positions;
    let mut d = vec![vec![0.0; WEC_COUNT]; WEC_COUNT];
    for i in 0..WEC_COUNT {
        for j in 0..WEC_COUNT {
            let dx = p[i].x - p[j].x;
            let dy = p[i].y - p[j].y;
            d[i][j] = (dx * dx + dy * dy).sqrt();
        }
    }
    d
}

/// Spreadsheet-style: per-row sum excluding the diagonal over 15, then the
/// column of averages summed over 16.
pub fn summary_oracle(d: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let mut avgs = Vec::new();
    for (i, row) in d.iter().enumerate() {
        let mut s = 0.0;
        for (j, v) in row.iter().enumerate() {
            if i != j {
                s += v;
            }
        }
        avgs.push(s / 15.0);
    }
    let mean = avgs.iter().sum::<f64>() / 16.0;
    (avgs, mean)
}

/// Step-by-step LOF following the textbook definition, with the k nearest
/// neighbors chosen by (distance, index).
pub fn lof_oracle(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let dist = |a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for (x, y) in points[a].iter().zip(&points[b]) {
            s += (x - y).powi(2);
        }
        s.sqrt()
    };

    // Step 1: neighborhoods and k-distances.
    let mut hood: Vec<Vec<usize>> = Vec::new();
    let mut k_dist: Vec<f64> = Vec::new();
    for p in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&o| o != p)
            .map(|o| (dist(p, o), o))
            .collect();
        others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        k_dist.push(others[k - 1].0);
        hood.push(others[..k].iter().map(|&(_, o)| o).collect());
    }

    // Step 2: local reachability density.
    let mut lrd = Vec::new();
    for p in 0..n {
        let mut total = 0.0;
        for &o in &hood[p] {
            let reach = if k_dist[o] > dist(p, o) {
                k_dist[o]
            } else {
                dist(p, o)
            };
            total += reach;
        }
        lrd.push(if total == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (total / k as f64)
        });
    }

    // Step 3: ratio of neighbor density to own density.
    let mut out = Vec::new();
    for p in 0..n {
        if lrd[p].is_infinite() {
            out.push(1.0);
            continue;
        }
        let mut s = 0.0;
        for &o in &hood[p] {
            s += lrd[o] / lrd[p];
        }
        out.push(s / k as f64);
    }
    out
}

/// Unvectorized forward pass: one neuron at a time, explicit index loops.
pub fn naive_forward(model: &MlpModel, input: &[f64]) -> f64 {
    let mut act: Vec<f64> = input.to_vec();
    let layers = model.layer_dims.len() - 1;
    for l in 0..layers {
        let n_in = model.layer_dims[l];
        let n_out = model.layer_dims[l + 1];
        let mut next = vec![0.0; n_out];
        for o in 0..n_out {
            let mut z = model.biases[l][o];
            for i in 0..n_in {
                z += model.weights[l][o * n_in + i] * act[i];
            }
            next[o] = if l + 1 == layers {
                z
            } else {
                match model.activation {
                    Activation::Relu => {
                        if z > 0.0 {
                            z
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => z.tanh(),
                    Activation::Identity => z,
                }
            };
        }
        act = next;
    }
    act[0]
}

pub fn naive_mse(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = naive_forward(model, x) - y;
        s += r * r;
    }
    s / xs.len() as f64
}

/// Central finite differences of the batch MSE, flattened layer by layer as
/// weights then biases.
pub fn fd_gradient(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut m = model.clone();
    for l in 0..model.weights.len() {
        for i in 0..model.weights[l].len() {
            let orig = m.weights[l][i];
            m.weights[l][i] = orig + h;
            let plus = naive_mse(&m, xs, ys);
            m.weights[l][i] = orig - h;
            let minus = naive_mse(&m, xs, ys);
            m.weights[l][i] = orig;
            out.push((plus - minus) / (2.0 * h));
        }
        for i in 0..model.biases[l].len() {
            let orig = m.biases[l][i];
            m.biases[l][i] = orig + h;
            let plus = naive_mse(&m, xs, ys);
            m.biases[l][i] = orig - h;
            let minus = naive_mse(&m, xs, ys);
            m.biases[l][i] = orig;
            out.push((plus - minus) / (2.0 * h));
        }
    }
    out
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps components that are
/// zero up to finite-difference noise from dividing by ~0.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Cyclic Jacobi eigenvalue iteration for a small symmetric matrix.
/// Returns eigenvalues and column eigenvectors (`vecs[row][col]`).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

/// Sample covariance of row-major data.
pub fn covariance_oracle(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let p = rows[0].len();
    let mut mean = vec![0.0; p];
    for r in rows {
        for j in 0..p {
            mean[j] += r[j] / n as f64;
        }
    }
    let mut c = vec![vec![0.0; p]; p];
    for r in rows {
        for a in 0..p {
            for b in 0..p {
                c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]) / (n - 1) as f64;
            }
        }
    }
    c
}

/// Type-7 quantile written with 1-based order statistics.
pub fn quantile_oracle(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = 1.0 + (s.len() as f64 - 1.0) * q;
    let lo = pos.floor();
    let frac = pos - lo;
    let lo = lo as usize;
    if lo >= s.len() {
        return s[s.len() - 1];
    }
    s[lo - 1] * (1.0 - frac) + s[lo.min(s.len() - 1)] * frac
}
