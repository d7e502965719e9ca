//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use incident_featlab::datamodel::{Dataset, IncidentUnit, IntervalRecord};
use nalgebra::{DMatrix, DVector};

/// Alarm at `t` iff the `pt + 1` classifications ending at `t` are all positive.
pub fn naive_persistence(c: &[bool], pt: usize) -> Vec<bool> {
    (0..c.len())
        .map(|t| t >= pt && c[t - pt..=t].iter().all(|&b| b))
        .collect()
}

/// Alarms from maximal runs of positives: a run `[s, e)` alarms on `s+pt..e`.
pub fn run_length_persistence(c: &[bool], pt: usize) -> Vec<bool> {
    let mut out = vec![false; c.len()];
    let mut s = 0;
    while s < c.len() {
        if !c[s] {
            s += 1;
            continue;
        }
        let mut e = s;
        while e < c.len() && c[e] {
            e += 1;
        }
        for o in out.iter_mut().take(e).skip(s + pt) {
            *o = true;
        }
        s = e;
    }
    out
}

pub struct NaiveMetrics {
    pub dr: f64,
    pub far: f64,
    pub mttd: Option<f64>,
    pub cr: f64,
}

/// Interval-by-interval reference for DR/FAR/MTTD/CR over post-filter alarms.
pub fn naive_metrics(labels: &[Vec<bool>], alarms: &[Vec<bool>]) -> NaiveMetrics {
    let (mut total, mut fa, mut agree) = (0u64, 0u64, 0u64);
    let (mut incidents, mut detected, mut delays) = (0u64, 0u64, 0u64);
    for (l, a) in labels.iter().zip(alarms) {
        let mut onset = None;
        let mut first_alarm = None;
        for t in 0..l.len() {
            total += 1;
            if l[t] == a[t] {
                agree += 1;
            }
            if a[t] && !l[t] {
                fa += 1;
            }
            if l[t] {
                onset.get_or_insert(t);
                if a[t] && first_alarm.is_none() {
                    first_alarm = Some(t);
                }
            }
        }
        if let Some(on) = onset {
            incidents += 1;
            if let Some(f) = first_alarm {
                detected += 1;
                delays += (f - on + 1) as u64;
            }
        }
    }
    NaiveMetrics {
        dr: detected as f64 / incidents as f64,
        far: fa as f64 / total as f64,
        mttd: (detected > 0).then(|| delays as f64 / detected as f64),
        cr: agree as f64 / total as f64,
    }
}

/// Minimum within-cluster sum of squares over every 2-partition of `points`.
pub fn brute_force_two_means(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let sse = |members: &[&Vec<f64>]| -> f64 {
        let mut mean = vec![0.0; d];
        for p in members {
            for (m, v) in mean.iter_mut().zip(p.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= members.len() as f64;
        }
        members
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum()
    };
    let mut best = f64::INFINITY;
    // Point 0 stays in the first cluster; the second must be non-empty.
    for mask in 1u32..(1 << (n - 1)) {
        let (mut a, mut b) = (vec![&points[0]], Vec::new());
        for (i, p) in points.iter().enumerate().skip(1) {
            if mask & (1 << (i - 1)) != 0 {
                b.push(p);
            } else {
                a.push(p);
            }
        }
        best = best.min(sse(&a) + sse(&b));
    }
    best
}

/// Population z-scoring; zero-variance dimensions are only centered.
pub fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| {
            let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    rows.iter()
        .map(|r| (0..d).map(|j| (r[j] - mean[j]) / sd[j]).collect())
        .collect()
}

/// Maximum of the C-SVM dual `Σα − ½αᵀQα` by enumerating, for every example,
/// whether α sits at 0, at C or strictly between, and solving the equality-
/// constrained stationarity system on each face.
pub fn dense_qp_dual(rows: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> f64 {
    let n = rows.len();
    let x = standardize(rows);
    let q = DMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        y[i] * y[j] * (-gamma * d2).exp()
    });
    let objective = |a: &DVector<f64>| a.sum() - 0.5 * (a.transpose() * &q * a)[(0, 0)];
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        // 0: at zero, 1: at C, 2: free
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 1 { c } else { 0.0 });
        if free.is_empty() {
            let balance: f64 = (0..n).map(|i| alpha[i] * y[i]).sum();
            if balance.abs() < 1e-12 {
                best = best.max(objective(&alpha));
            }
            continue;
        }
        // [Q_FF y_F; y_Fᵀ 0] [α_F; ν] = [1 − Q_FB α_B; −y_Bᵀα_B]
        let m = free.len();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = q[(i, j)];
            }
            a[(r, m)] = y[i];
            a[(m, r)] = y[i];
            rhs[r] = 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q[(i, j)] * c).sum::<f64>();
        }
        rhs[m] = -(0..n).filter(|&j| state[j] == 1).map(|j| y[j] * c).sum::<f64>();
        let Some(sol) = a.lu().solve(&rhs) else {
            continue;
        };
        if free.iter().enumerate().all(|(r, _)| sol[r] > -1e-12 && sol[r] < c + 1e-12) {
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r].clamp(0.0, c);
            }
            best = best.max(objective(&alpha));
        }
    }
    best
}

/// Units with the given lengths and incident-run lengths; each onset sits at
/// `onset`.
pub fn mock_dataset(tag: &str, lengths: &[usize], incidents: &[usize], onset: usize) -> Dataset {
    let units = lengths
        .iter()
        .zip(incidents)
        .enumerate()
        .map(|(u, (&len, &inc))| {
            let records = (0..len)
                .map(|t| IntervalRecord {
                    t_index: t,
                    vol_up: 10.0 + (t % 7) as f64,
                    occ_up: 0.1,
                    vol_down: 9.0,
                    occ_down: 0.08 + (t % 3) as f64 * 0.01,
                    incident: (onset..onset + inc).contains(&t),
                })
                .collect();
            IncidentUnit::new(format!("{tag}-{u}"), records).unwrap()
        })
        .collect();
    Dataset::new(tag, units).unwrap()
}

/// `total` split over `n` parts as evenly as possible, larger parts first.
pub fn spread(total: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| total / n + usize::from(i < total % n)).collect()
}
