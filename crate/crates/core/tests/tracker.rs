use modesub::assignment::{assignment_value, max_affinity_assignment, min_cost_assignment};
use modesub::sphwave::{eigenvalue, linspace, poles};
use modesub::tracker::{
    detect_avoidances, track, PoleDirection, Snapshot, TraceEvent, TrackOptions, TrackedTrace,
};
use modesub::O3IrrepId;
use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::f64::consts::PI;

fn brute_force_min(cost: &DMatrix<f64>) -> f64 {
    // rows <= cols
    fn go(cost: &DMatrix<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.nrows() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..cost.ncols() {
            if !used[c] {
                used[c] = true;
                best = best.min(cost[(row, c)] + go(cost, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(cost, 0, &mut vec![false; cost.ncols()])
}

proptest! {
    #[test]
    fn hungarian_matches_brute_force(
        rows in 1usize..6, cols in 1usize..6,
        data in prop::collection::vec(-10.0f64..10.0, 36),
    ) {
        let cost = DMatrix::from_fn(rows, cols, |r, c| data[r * 6 + c]);
        let a = min_cost_assignment(&cost);
        prop_assert_eq!(a.len(), rows);
        let assigned: Vec<usize> = a.iter().flatten().copied().collect();
        prop_assert_eq!(assigned.len(), rows.min(cols));
        prop_assert_eq!(assigned.iter().collect::<BTreeSet<_>>().len(), assigned.len());
        let oracle = if rows <= cols {
            brute_force_min(&cost)
        } else {
            brute_force_min(&cost.transpose())
        };
        prop_assert!((assignment_value(&cost, &a) - oracle).abs() < 1e-9);
    }
}

const CURVES: usize = 3;

fn curve(k: usize, f: f64) -> f64 {
    match k {
        0 => (2.0 * f).sin(),
        1 => 0.6 - 0.3 * f,
        _ => -0.5 + 0.5 * f * f,
    }
}

/// Three crossing curves with a slowly rotating orthonormal frame, every
/// snapshot shuffled. Returns snapshots and, per snapshot, the curve
/// behind each mode.
fn shuffled_dataset(seed: u64, labels: Option<[&str; CURVES]>) -> (Vec<Snapshot>, Vec<Vec<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs = linspace(0.0, 2.0, 50);
    let mut snaps = Vec::new();
    let mut truth = Vec::new();
    for (i, &f) in freqs.iter().enumerate() {
        let frame = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, 2.0, 3.0)), 0.03 * i as f64);
        let mut perm: Vec<usize> = (0..CURVES).collect();
        perm.shuffle(&mut rng);
        let lambdas = perm.iter().map(|&k| curve(k, f)).collect();
        let vectors = DMatrix::from_fn(3, CURVES, |r, c| frame.matrix()[(r, perm[c])]);
        let mut s = Snapshot::new(f, lambdas).with_vectors(vectors);
        if let Some(l) = labels {
            s = s.with_labels(perm.iter().map(|&k| l[k].to_string()).collect());
        }
        snaps.push(s);
        truth.push(perm);
    }
    (snaps, truth)
}

#[test]
fn shuffled_three_curves_are_recovered() {
    for seed in 0..10 {
        let (snaps, truth) = shuffled_dataset(seed, None);
        let traces = track(&snaps, &TrackOptions::default()).unwrap();
        assert_eq!(traces.len(), CURVES);
        for t in &traces {
            assert_eq!(t.points.len(), snaps.len());
            let origin: BTreeSet<usize> = t
                .points
                .iter()
                .enumerate()
                .map(|(s, p)| truth[s][p.mode])
                .collect();
            assert_eq!(origin.len(), 1, "seed {seed}: trace mixes curves");
            let k = *origin.iter().next().unwrap();
            for p in &t.points {
                assert_eq!(p.lambda, curve(k, p.frequency));
            }
        }
    }
}

fn sign_changes(a: &TrackedTrace, b: &TrackedTrace) -> bool {
    let signs: BTreeSet<i8> = a
        .points
        .iter()
        .filter_map(|p| b.lambda_at(p.frequency).map(|l| (p.lambda - l).signum() as i8))
        .collect();
    signs.len() > 1
}

#[test]
fn raw_same_label_traces_cross_and_enforcement_removes_it() {
    let (snaps, _) = shuffled_dataset(42, Some(["A", "A", "A"]));
    let raw = track(&snaps, &TrackOptions::default()).unwrap();
    let crossing = raw
        .iter()
        .enumerate()
        .any(|(i, a)| raw[i + 1..].iter().any(|b| sign_changes(a, b)));
    assert!(crossing, "dataset should contain crossings");
    let enforced = track(
        &snaps,
        &TrackOptions {
            enforce_vnw: true,
            ..TrackOptions::default()
        },
    )
    .unwrap();
    for (i, a) in enforced.iter().enumerate() {
        for b in &enforced[i + 1..] {
            assert!(!sign_changes(a, b), "traces {} and {} cross", a.id, b.id);
        }
    }
}

#[test]
fn distinct_labels_keep_crossing_under_enforcement() {
    let (snaps, truth) = shuffled_dataset(7, Some(["A", "B", "C"]));
    let opts = TrackOptions {
        enforce_vnw: true,
        ..TrackOptions::default()
    };
    for t in track(&snaps, &opts).unwrap() {
        let origin: BTreeSet<usize> = t.points.iter().enumerate().map(|(s, p)| truth[s][p.mode]).collect();
        assert_eq!(origin.len(), 1);
    }
}

fn assert_partition(snaps: &[Snapshot], traces: &[TrackedTrace]) {
    let mut seen = BTreeSet::new();
    for t in traces {
        assert!(t.points.windows(2).all(|w| w[0].frequency < w[1].frequency));
        for p in &t.points {
            let s = snaps.iter().position(|s| s.frequency == p.frequency).unwrap();
            assert!(seen.insert((s, p.mode)), "point used twice");
        }
    }
    let total: usize = snaps.iter().map(|s| s.lambdas.len()).sum();
    assert_eq!(seen.len(), total);
}

#[test]
fn traces_partition_the_input() {
    for enforce_vnw in [false, true] {
        let (snaps, _) = shuffled_dataset(3, Some(["A", "A", "B"]));
        let traces = track(&snaps, &TrackOptions { enforce_vnw, ..TrackOptions::default() }).unwrap();
        assert_partition(&snaps, &traces);
    }
    // changing mode counts
    let snaps = vec![
        Snapshot::new(0.0, vec![0.0, 1.0, 2.0]),
        Snapshot::new(1.0, vec![0.1, 2.1]),
        Snapshot::new(2.0, vec![0.2, 1.0, 2.2, 3.0]),
    ];
    assert_partition(&snaps, &track(&snaps, &TrackOptions::default()).unwrap());
}

fn curves_of(traces: &[TrackedTrace]) -> Vec<Vec<(u64, u64)>> {
    let mut v: Vec<Vec<(u64, u64)>> = traces
        .iter()
        .map(|t| t.points.iter().map(|p| (p.frequency.to_bits(), p.lambda.to_bits())).collect())
        .collect();
    v.sort();
    v
}

#[test]
fn invariant_under_input_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for labels in [None, Some(["A", "A", "B"])] {
        let (snaps, _) = shuffled_dataset(5, labels);
        let opts = TrackOptions {
            enforce_vnw: true,
            ..TrackOptions::default()
        };
        let base = curves_of(&track(&snaps, &opts).unwrap());
        let reshuffled: Vec<Snapshot> = snaps
            .iter()
            .map(|s| {
                let mut perm: Vec<usize> = (0..s.lambdas.len()).collect();
                perm.shuffle(&mut rng);
                let v = s.vectors.as_ref().unwrap();
                let mut out = Snapshot::new(s.frequency, perm.iter().map(|&k| s.lambdas[k]).collect())
                    .with_vectors(DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, perm[c])]));
                if let Some(l) = &s.labels {
                    out = out.with_labels(perm.iter().map(|&k| l[k].clone()).collect());
                }
                out
            })
            .collect();
        assert_eq!(curves_of(&track(&reshuffled, &opts).unwrap()), base);
    }
}

#[test]
fn constant_vectors_give_index_constant_traces() {
    // two modes swap eigenvalue order halfway, vectors never change
    let freqs = linspace(0.0, 1.0, 10);
    let snaps: Vec<Snapshot> = freqs
        .iter()
        .map(|&f| {
            Snapshot::new(f, vec![f, 1.0 - f])
                .with_vectors(DMatrix::identity(2, 2))
                .with_labels(vec!["A".into(), "A".into()])
        })
        .collect();
    let raw = track(&snaps, &TrackOptions::default()).unwrap();
    for t in &raw {
        let m = t.points[0].mode;
        assert!(t.points.iter().all(|p| p.mode == m));
    }
    assert!(sign_changes(&raw[0], &raw[1]));
    let enforced = track(
        &snaps,
        &TrackOptions {
            enforce_vnw: true,
            ..TrackOptions::default()
        },
    )
    .unwrap();
    assert!(!sign_changes(&enforced[0], &enforced[1]));
}

#[test]
fn te1_trace_splits_at_its_first_pole() {
    let te1 = O3IrrepId::te(1);
    // a coarse grid plus two samples hugging the pole, where |lambda| is huge
    let pole = poles(te1, 4.0, 5.0).unwrap()[0] / PI;
    let mut grid = linspace(1.2, 1.6, 41);
    grid.extend([pole - 1e-6, pole + 1e-6]);
    grid.sort_by(f64::total_cmp);
    let snaps: Vec<Snapshot> = grid
        .into_iter()
        .map(|x| Snapshot::new(x, vec![eigenvalue(te1, x * PI).unwrap()]))
        .collect();
    let traces = track(&snaps, &TrackOptions::default()).unwrap();
    assert_eq!(traces.len(), 2);
    let split = traces[0]
        .events
        .iter()
        .chain(&traces[1].events)
        .find_map(|e| match e {
            TraceEvent::PoleSplit { below, above, direction } => Some((*below, *above, *direction)),
            _ => None,
        })
        .unwrap();
    assert!(split.0 < 4.493_409_46 / PI && 4.493_409_46 / PI < split.1);
    assert_eq!(split.2, PoleDirection::NegativeToPositive);
}

#[test]
fn avoidance_between_repelling_traces() {
    // hyperbola pair: lambda = +-sqrt(f^2 + g^2), minimum gap 2 g at f = 0
    for (g, maca) in [(0.005, false), (2.5, true)] {
        let snaps: Vec<Snapshot> = linspace(-1.0, 1.0, 21)
            .into_iter()
            .map(|f| {
                let r = (f * f + g * g).sqrt();
                Snapshot::new(f, vec![-r, r]).with_labels(vec!["A".into(), "A".into()])
            })
            .collect();
        let traces = track(&snaps, &TrackOptions { enforce_vnw: true, ..TrackOptions::default() }).unwrap();
        let sig = detect_avoidances(&traces, 1.0);
        assert_eq!(sig.len(), 1);
        assert!(sig[0].frequency.abs() < 1e-12);
        assert!((sig[0].gap - 2.0 * g).abs() < 1e-12);
        assert_eq!(sig[0].kind == modesub::tracker::AvoidanceKind::Maca, maca);
        let lower = &traces[sig[0].lower];
        assert!(lower.lambda_at(sig[0].frequency).unwrap() < 0.0);
    }
}

#[test]
fn affinity_prefers_vectors_over_eigenvalues() {
    // eigenvalues suggest keeping order, vectors say swap
    let a = Snapshot::new(0.0, vec![0.0, 1.0]).with_vectors(DMatrix::identity(2, 2));
    let b = Snapshot::new(1.0, vec![0.1, 0.9])
        .with_vectors(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    let t = track(&[a, b], &TrackOptions::default()).unwrap();
    assert_eq!(t[0].points.iter().map(|p| p.mode).collect::<Vec<_>>(), vec![0, 1]);
    assert!(max_affinity_assignment(&DMatrix::identity(3, 3)) == vec![Some(0), Some(1), Some(2)]);
}
