//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use sce_core::game::GameSpec;
use sce_core::global::{check_homeo2, global_learn_step, GlobalGameSpec};
use sce_core::net::{spectral_radius_of, WeightedNetwork};

/// Receiver/source pairs (0-based) of the four-agent base network:
/// 1<-4, 2<-{1,3,4}, 4<-{1,3}.
pub const FIG1_EDGES: [(usize, usize); 6] = [(0, 3), (1, 0), (1, 2), (1, 3), (3, 0), (3, 2)];

pub fn fig1(gamma: f64) -> WeightedNetwork {
    WeightedNetwork::from_edges(4, &FIG1_EDGES, gamma).unwrap()
}

/// The base network at +0.2 plus negative links 3<-2 and 3<-4.
pub fn fig2() -> WeightedNetwork {
    let mut z = fig1(0.2).matrix().clone();
    z[(2, 1)] = -0.2;
    z[(2, 3)] = -0.2;
    WeightedNetwork::new(z).unwrap()
}

pub fn line(gamma: f64) -> WeightedNetwork {
    WeightedNetwork::from_edges(3, &[(0, 1), (1, 0), (1, 2), (2, 1)], gamma).unwrap()
}

pub fn complete(gamma: f64) -> WeightedNetwork {
    WeightedNetwork::from_edges(3, &[(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)], gamma).unwrap()
}

/// Directed 3-cycle 1<-3, 2<-1, 3<-2 with the given weight.
pub fn cycle3(w: f64) -> WeightedNetwork {
    WeightedNetwork::from_edges(3, &[(0, 2), (1, 0), (2, 1)], w).unwrap()
}

pub fn set(one_based: &[usize]) -> sce_core::AgentSet {
    sce_core::AgentSet::from_indices(one_based.iter().map(|i| i - 1))
}

/// Gaussian elimination with partial pivoting on plain vectors.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Full profile solving `a_i = alpha_i + sum_{j in K} z_ij a_j` on `k`, zero elsewhere.
pub fn clamped_solve(z: &DMatrix<f64>, alpha: &[f64], k: &[usize]) -> Option<Vec<f64>> {
    let m: Vec<Vec<f64>> = k
        .iter()
        .map(|&i| k.iter().map(|&j| if i == j { 1.0 } else { -z[(i, j)] }).collect())
        .collect();
    let b: Vec<f64> = k.iter().map(|&i| alpha[i]).collect();
    let sol = gauss_solve(m, b)?;
    let mut a = vec![0.0; z.nrows()];
    for (p, &i) in k.iter().enumerate() {
        a[i] = sol[p];
    }
    Some(a)
}

pub fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random matrix with zero diagonal, each link present with probability
/// `density` and weight uniform in `[-wmax, wmax]` (or `[0, wmax]`).
pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, wmax: f64, density: f64, nonnegative: bool) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j || !rng.gen_bool(density) {
            0.0
        } else if nonnegative {
            rng.gen_range(0.0..wmax)
        } else {
            rng.gen_range(-wmax..wmax)
        }
    })
}

/// Random game with uniform alpha in `alpha_range`, default caps and intervals.
pub fn random_game<R: Rng>(rng: &mut R, n: usize, wmax: f64, alpha_range: (f64, f64)) -> GameSpec {
    let density = rng.gen_range(0.3..1.0);
    let z = random_matrix(rng, n, wmax, density, false);
    let alpha = (0..n).map(|_| rng.gen_range(alpha_range.0..alpha_range.1)).collect();
    GameSpec::builder(WeightedNetwork::new(z).unwrap(), alpha).build().unwrap()
}

/// `|z_ij| < 1/n`.
pub fn random_bounded<R: Rng>(rng: &mut R, n: usize) -> WeightedNetwork {
    let lim = 1.0 / n as f64;
    let z = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.gen_range(-lim..lim) * 0.999_999 });
    WeightedNetwork::new(z).unwrap()
}

/// Nonpositive weights rescaled so that `rho` is uniform in `(0, 1)`.
pub fn random_negative_limited<R: Rng>(rng: &mut R, n: usize) -> WeightedNetwork {
    loop {
        let density = rng.gen_range(0.2..1.0);
        let z = -random_matrix(rng, n, 1.0, density, true);
        let rho = spectral_radius_of(&z).unwrap();
        if rho > 0.0 {
            let target = rng.gen_range(0.0..1.0);
            return WeightedNetwork::new(z * (target / rho)).unwrap();
        }
    }
}

/// `Gamma Z0` with log-normal `Gamma`, rescaled so `rho(Z~)` is uniform in `(0, 1)`.
pub fn random_symmetrizable_limited<R: Rng>(rng: &mut R, n: usize) -> WeightedNetwork {
    loop {
        let (z, gamma) = random_symmetrizable_parts(rng, n);
        let zt = DMatrix::from_fn(n, n, |i, j| z[(i, j)] * (gamma[i] * gamma[j]).sqrt());
        let rho = spectral_radius_of(&zt).unwrap();
        if rho > 0.0 {
            let target = rng.gen_range(0.0..1.0);
            let z0 = z * (target / rho);
            let full = DMatrix::from_fn(n, n, |i, j| gamma[i] * z0[(i, j)]);
            return WeightedNetwork::new(full).unwrap();
        }
    }
}

/// Symmetric `Z0` with mixed signs and a positive `gamma`.
pub fn random_symmetrizable_parts<R: Rng>(rng: &mut R, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let density = rng.gen_range(0.2..1.0);
    let mut z0 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                let w = rng.gen_range(-1.0..1.0);
                z0[(i, j)] = w;
                z0[(j, i)] = w;
            }
        }
    }
    let gamma = (0..n).map(|_| rng.gen_range(-1.0f64..1.0).exp()).collect();
    (z0, gamma)
}

/// Best-reply fixed points found by scanning a grid of step `h` on `[0, top]`.
///
/// For `n <= 2` the grid covers every agent; for `n = 3` it covers agents 1
/// and 2 and agent 3 plays its exact best reply. Points whose best-reply
/// residual is at most `2h` are grouped into grid-connected clusters and each
/// cluster is represented by its smallest-residual point.
pub fn grid_fixed_points(spec: &GameSpec, h: f64, top: f64) -> Vec<Vec<f64>> {
    let n = spec.n();
    assert!((1..=3).contains(&n));
    let z = spec.net().matrix();
    let alpha = spec.alpha();
    let br = |i: usize, x: f64| (alpha[i] + x).max(0.0);
    let steps = (top / h).round() as i64;
    let dims = n.min(2);
    let mut hits: HashMap<(i64, i64), (f64, Vec<f64>)> = HashMap::new();
    let thr = 2.0 * h;
    let mut idx = vec![0i64; dims];
    loop {
        let mut a = vec![0.0; n];
        for d in 0..dims {
            a[d] = idx[d] as f64 * h;
        }
        if n == 3 {
            a[2] = br(2, z[(2, 0)] * a[0] + z[(2, 1)] * a[1]);
        }
        let res = (0..dims)
            .map(|i| {
                let x: f64 = (0..n).map(|j| z[(i, j)] * a[j]).sum();
                (a[i] - br(i, x)).abs()
            })
            .fold(0.0, f64::max);
        if res <= thr {
            let key = (idx[0], if dims > 1 { idx[1] } else { 0 });
            hits.insert(key, (res, a));
        }
        let mut d = 0;
        loop {
            if d == dims {
                return cluster(hits);
            }
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn cluster(hits: HashMap<(i64, i64), (f64, Vec<f64>)>) -> Vec<Vec<f64>> {
    let mut seen: HashMap<(i64, i64), bool> = hits.keys().map(|k| (*k, false)).collect();
    let mut reps = Vec::new();
    let mut keys: Vec<(i64, i64)> = hits.keys().copied().collect();
    keys.sort();
    for k in keys {
        if seen[&k] {
            continue;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut queue = VecDeque::from([k]);
        seen.insert(k, true);
        while let Some(c) = queue.pop_front() {
            let (r, a) = &hits[&c];
            if best.as_ref().map_or(true, |b| *r < b.0) {
                best = Some((*r, a.clone()));
            }
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let nb = (c.0 + dx, c.1 + dy);
                    if let Some(false) = seen.get(&nb) {
                        seen.insert(nb, true);
                        queue.push_back(nb);
                    }
                }
            }
        }
        reps.push(best.unwrap().1);
    }
    reps
}

/// Nash equilibria by brute force over active sets: solve the linear system on
/// each set and keep the profiles where every agent best replies.
pub fn oracle_nash(z: &DMatrix<f64>, alpha: &[f64]) -> Vec<Vec<f64>> {
    let n = alpha.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let k: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let Some(a) = clamped_solve(z, alpha, &k) else { continue };
        let ok = (0..n).all(|i| {
            let x: f64 = (0..n).map(|j| z[(i, j)] * a[j]).sum();
            if k.contains(&i) { a[i] > 0.0 } else { alpha[i] + x <= 0.0 }
        });
        if ok {
            out.push(a);
        }
    }
    out
}

/// Random game with `n <= 3` whose Nash equilibria are well separated on a
/// grid of step `h`: every active set system is far from singular, active
/// actions and inactive margins exceed `10 h`, equilibria are `20 h` apart
/// and lie in `[0, 0.9]`.
pub fn random_grid_game<R: Rng>(rng: &mut R, n: usize, h: f64) -> GameSpec {
    loop {
        let z = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.gen_range(-1.2..0.6) });
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.3)).collect();
        let well_posed = (0u32..(1 << n)).all(|mask| {
            let k: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let m = DMatrix::<f64>::from_fn(k.len(), k.len(), |a, b| if a == b { 1.0 } else { 0.0 } - z[(k[a], k[b])]);
            k.is_empty() || m.determinant().abs() > 0.05
        });
        if !well_posed {
            continue;
        }
        let ne = oracle_nash(&z, &alpha);
        let margins = ne.iter().all(|a| {
            (0..n).all(|i| {
                let x: f64 = (0..n).map(|j| z[(i, j)] * a[j]).sum();
                a[i] <= 0.9 && if a[i] > 0.0 { a[i] > 10.0 * h } else { alpha[i] + x < -10.0 * h }
            })
        });
        let separated = ne.iter().enumerate().all(|(p, a)| ne[p + 1..].iter().all(|b| max_dist(a, b) > 20.0 * h));
        if ne.is_empty() || !margins || !separated {
            continue;
        }
        return GameSpec::builder(WeightedNetwork::new(z).unwrap(), alpha).build().unwrap();
    }
}

/// Nonnegative network with row sums in `(0, max_row)` and `c` satisfying
/// `0 < c_i beta (n - 1) < sum_j z_ij`.
pub fn random_homeo2<R: Rng>(r: &mut R, n: usize, max_row: f64) -> (WeightedNetwork, f64, Vec<f64>) {
    let mut z = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { r.gen_range(0.01..1.0) });
    for i in 0..n {
        let target = r.gen_range(0.1..max_row);
        let s: f64 = z.row(i).sum();
        for j in 0..n {
            z[(i, j)] *= target / s;
        }
    }
    let beta = r.gen_range(0.2..2.0);
    let c = (0..n)
        .map(|i| z.row(i).sum() / (beta * (n as f64 - 1.0)) * r.gen_range(0.02..0.98))
        .collect();
    (WeightedNetwork::new(z).unwrap(), beta, c)
}

pub fn global_game<R: Rng>(r: &mut R, n: usize, max_row: f64) -> GlobalGameSpec {
    let (net, beta, c) = random_homeo2(r, n, max_row);
    let alpha = r.gen_range(0.05..0.5);
    let g = GlobalGameSpec::new(GameSpec::uniform(net, alpha).unwrap(), beta, c).unwrap();
    assert!(check_homeo2(&g).all);
    g
}

/// Plain iterates `x_hat(t)` from zero, stopping early once they exceed `cap`.
pub fn plain_path(g: &GlobalGameSpec, steps: usize, cap: f64) -> Vec<Vec<f64>> {
    let mut path = vec![vec![0.0; g.n()]];
    for _ in 0..steps {
        let next = global_learn_step(g, path.last().unwrap()).unwrap().next_x_hat;
        let stop = next.iter().any(|v| !(v.abs() < cap));
        path.push(next);
        if stop {
            break;
        }
    }
    path
}
