//! Grouped dominance sums in log space.
//!
//! Given weighted points `(r_k, v_k)` with `v_k = exp(ln_v[k]) ≥ 0`, each
//! carrying a jackknife group label, and query points `R_l`, computes for every
//! query and group `ln Σ_{k ∈ group, r_k < R_l} v_k` where `<` is strict in
//! every coordinate. One dimension is a sorted sweep, two dimensions a sweep
//! plus a Fenwick tree; higher dimensions fall back to the quadratic scan.

use rayon::prelude::*;

#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln(e^a - e^b)` for `a ≥ b`, `-∞` when they are equal.
#[inline]
pub(crate) fn log_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

pub(crate) struct Points<'a> {
    /// `coords[j][k]`: coordinate `j` of point `k`.
    pub coords: Vec<&'a [f64]>,
    pub ln_v: &'a [f64],
    pub group: &'a [usize],
}

/// Output row `l` occupies `out[l * groups .. (l + 1) * groups]`.
pub(crate) fn grouped_log_dominance(points: &Points<'_>, queries: &[&[f64]], groups: usize) -> Vec<f64> {
    let dims = points.coords.len();
    assert_eq!(dims, queries.len());
    let nq = if dims == 0 { 1 } else { queries[0].len() };
    let mut out = vec![f64::NEG_INFINITY; nq * groups];
    match dims {
        0 => {
            for (k, lv) in points.ln_v.iter().enumerate() {
                let g = points.group[k];
                out[g] = log_add(out[g], *lv);
            }
        }
        1 => sweep_1d(points, queries[0], groups, &mut out),
        2 => sweep_2d(points, queries, groups, &mut out),
        _ => scan(points, queries, groups, &mut out),
    }
    out
}

fn order_by(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]).then(a.cmp(b)));
    idx
}

fn sweep_1d(points: &Points<'_>, q: &[f64], groups: usize, out: &mut [f64]) {
    let r = points.coords[0];
    let pts = order_by(r);
    let qs = order_by(q);
    let mut acc = vec![f64::NEG_INFINITY; groups];
    let mut k = 0;
    for &l in &qs {
        while k < pts.len() && r[pts[k]] < q[l] {
            let p = pts[k];
            let g = points.group[p];
            acc[g] = log_add(acc[g], points.ln_v[p]);
            k += 1;
        }
        out[l * groups..(l + 1) * groups].copy_from_slice(&acc);
    }
}

fn sweep_2d(points: &Points<'_>, queries: &[&[f64]], groups: usize, out: &mut [f64]) {
    let (r0, r1) = (points.coords[0], points.coords[1]);
    let (q0, q1) = (queries[0], queries[1]);
    let n = r0.len();
    // rank of each point in coordinate 1; prefix [0, idx) holds the points
    // whose coordinate 1 is below a threshold
    let by1 = order_by(r1);
    let sorted1: Vec<f64> = by1.iter().map(|k| r1[*k]).collect();
    let mut rank = vec![0usize; n];
    for (pos, k) in by1.iter().enumerate() {
        rank[*k] = pos;
    }
    let mut tree = vec![f64::NEG_INFINITY; (n + 1) * groups];
    let pts = order_by(r0);
    let qs = order_by(q0);
    let mut k = 0;
    let mut acc = vec![f64::NEG_INFINITY; groups];
    for &l in &qs {
        while k < n && r0[pts[k]] < q0[l] {
            let p = pts[k];
            let g = points.group[p];
            let mut i = rank[p] + 1;
            while i <= n {
                let slot = i * groups + g;
                tree[slot] = log_add(tree[slot], points.ln_v[p]);
                i += i & i.wrapping_neg();
            }
            k += 1;
        }
        acc.fill(f64::NEG_INFINITY);
        let mut i = sorted1.partition_point(|v| *v < q1[l]);
        while i > 0 {
            let node = &tree[i * groups..(i + 1) * groups];
            for (a, v) in acc.iter_mut().zip(node) {
                *a = log_add(*a, *v);
            }
            i &= i - 1;
        }
        out[l * groups..(l + 1) * groups].copy_from_slice(&acc);
    }
}

fn scan(points: &Points<'_>, queries: &[&[f64]], groups: usize, out: &mut [f64]) {
    let dims = points.coords.len();
    out.par_chunks_mut(groups).enumerate().for_each(|(l, row)| {
        for k in 0..points.ln_v.len() {
            if (0..dims).all(|j| points.coords[j][k] < queries[j][l]) {
                let g = points.group[k];
                row[g] = log_add(row[g], points.ln_v[k]);
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::rng::substream;
    use rand::Rng;

    fn brute(points: &Points<'_>, queries: &[&[f64]], groups: usize) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; queries[0].len() * groups];
        scan(points, queries, groups, &mut out);
        out
    }

    #[test]
    fn sweeps_match_scan() {
        let mut rng = substream(9, 0);
        for dims in 1..=2 {
            let n = 300;
            let coords: Vec<Vec<f64>> = (0..dims)
                .map(|_| (0..n).map(|_| (rng.gen::<f64>() * 20.0).floor()).collect())
                .collect();
            let ln_v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let group: Vec<usize> = (0..n).map(|k| k * 7 / n).collect();
            let qc: Vec<Vec<f64>> = (0..dims)
                .map(|_| (0..150).map(|_| (rng.gen::<f64>() * 22.0).floor()).collect())
                .collect();
            let points = Points {
                coords: coords.iter().map(Vec::as_slice).collect(),
                ln_v: &ln_v,
                group: &group,
            };
            let queries: Vec<&[f64]> = qc.iter().map(Vec::as_slice).collect();
            let fast = grouped_log_dominance(&points, &queries, 7);
            let slow = brute(&points, &queries, 7);
            for (a, b) in fast.iter().zip(&slow) {
                assert!(a == b || (a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn log_helpers() {
        assert!((log_add(1f64.ln(), 2f64.ln()) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, 0.5), 0.5);
        assert!((log_sub(3f64.ln(), 1f64.ln()) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sub(0.0, 0.0), f64::NEG_INFINITY);
        let zero_dim = grouped_log_dominance(
            &Points {
                coords: vec![],
                ln_v: &[0.0, 0.0, 1f64.ln()],
                group: &[0, 1, 1],
            },
            &[],
            2,
        );
        assert_eq!(zero_dim[0], 0.0);
        assert!((zero_dim[1] - 2f64.ln()).abs() < 1e-15);
    }
}
