//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use chebdea::dea::FrontierInstance;
use chebdea::linprog::{LpProblem, LpStatus, RowSense};
use rand::Rng;

/// Small integer LP: 1-4 variables, 1-6 rows, optional shifted and upper bounds.
pub fn random_lp<R: Rng>(rng: &mut R) -> LpProblem {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=6);
    let obj = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
    let mut lp = LpProblem::maximize(obj);
    for _ in 0..m {
        let row = (0..n).map(|_| rng.random_range(-4..=4) as f64).collect();
        let sense = match rng.random_range(0..20) {
            0..=11 => RowSense::Le,
            12..=16 => RowSense::Ge,
            _ => RowSense::Eq,
        };
        lp.add_constraint(row, sense, rng.random_range(-2..=10) as f64);
    }
    for j in 0..n {
        let lower = if rng.random_bool(0.25) { rng.random_range(-2..=2) as f64 } else { 0.0 };
        let upper = rng.random_bool(0.5).then(|| lower + rng.random_range(1..=6) as f64);
        lp.set_bounds(j, lower, upper);
    }
    lp
}

struct Halfspace {
    a: Vec<f64>,
    sense: RowSense,
    b: f64,
}

fn holds(h: &Halfspace, x: &[f64], tol: f64) -> bool {
    let lhs: f64 = h.a.iter().zip(x).map(|(a, v)| a * v).sum();
    let t = tol * (1.0 + h.b.abs());
    match h.sense {
        RowSense::Le => lhs <= h.b + t,
        RowSense::Ge => lhs >= h.b - t,
        RowSense::Eq => (lhs - h.b).abs() <= t,
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        let (top, rest) = a.split_at_mut(k + 1);
        let pivot = &top[k];
        for (i, row) in rest.iter_mut().enumerate() {
            let f = row[k] / pivot[k];
            for (v, p) in row[k..].iter_mut().zip(&pivot[k..]) {
                *v -= f * p;
            }
            b[k + 1 + i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Best objective over all basic feasible points of `{h}`, if any exist.
fn best_vertex(hs: &[Halfspace], c: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    combinations(hs.len(), n, &mut |idx| {
        let a = idx.iter().map(|&i| hs[i].a.clone()).collect();
        let b = idx.iter().map(|&i| hs[i].b).collect();
        if let Some(x) = solve_square(a, b) {
            if hs.iter().all(|h| holds(h, &x, 1e-9)) {
                let v: f64 = c.iter().zip(&x).map(|(c, x)| c * x).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    });
    best
}

/// Status and optimum by vertex enumeration. Every variable has a finite
/// lower bound, so a nonempty feasible set has a vertex; unboundedness is
/// decided by maximizing the objective over the normalized recession cone.
pub fn enumerate_lp(lp: &LpProblem) -> (LpStatus, Option<f64>) {
    let n = lp.num_vars();
    let unit = |j: usize| (0..n).map(|k| if k == j { 1.0 } else { 0.0 }).collect::<Vec<_>>();
    let mut hs: Vec<Halfspace> = lp
        .rows()
        .iter()
        .zip(lp.senses())
        .zip(lp.rhs())
        .map(|((a, &sense), &b)| Halfspace { a: a.clone(), sense, b })
        .collect();
    for j in 0..n {
        hs.push(Halfspace { a: unit(j), sense: RowSense::Ge, b: lp.lower_bounds()[j] });
        if let Some(u) = lp.upper_bounds()[j] {
            hs.push(Halfspace { a: unit(j), sense: RowSense::Le, b: u });
        }
    }
    let Some(opt) = best_vertex(&hs, lp.objective()) else {
        return (LpStatus::Infeasible, None);
    };

    let mut cone: Vec<Halfspace> = lp
        .rows()
        .iter()
        .zip(lp.senses())
        .map(|(a, &sense)| Halfspace { a: a.clone(), sense, b: 0.0 })
        .collect();
    for j in 0..n {
        cone.push(Halfspace { a: unit(j), sense: RowSense::Ge, b: 0.0 });
        if lp.upper_bounds()[j].is_some() {
            cone.push(Halfspace { a: unit(j), sense: RowSense::Le, b: 0.0 });
        }
    }
    cone.push(Halfspace { a: vec![1.0; n], sense: RowSense::Eq, b: 1.0 });
    match best_vertex(&cone, lp.objective()) {
        Some(gain) if gain > 1e-9 => (LpStatus::Unbounded, None),
        _ => (LpStatus::Optimal, Some(opt)),
    }
}

/// Random positive frontier data spanning about two orders of magnitude.
pub fn random_instance<R: Rng>(rng: &mut R, max_units: usize, max_dims: usize) -> FrontierInstance {
    let c = rng.random_range(2..=max_units);
    let i = rng.random_range(1..=max_dims);
    let j = rng.random_range(1..=max_dims);
    let mut draw = |k: usize| -> Vec<Vec<f64>> {
        (0..c)
            .map(|_| (0..k).map(|_| rng.random_range(-2.3f64..2.3).exp()).collect())
            .collect()
    };
    let inputs = draw(i);
    let outputs = draw(j);
    FrontierInstance::unlabeled(inputs, outputs).expect("positive data")
}
