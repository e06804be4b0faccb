use std::collections::BTreeSet;

use modesub::pointgroup::builtin_group;
use modesub::subduction::ParityFilter;
use modesub::tracediagram::{build_diagram, find_crossings, predict_avoidances, Verdict};
use modesub::O3IrrepId;

// O_h labels of the t <= 3 rows, written out independently of the code.
fn table_one_labels(id: O3IrrepId) -> BTreeSet<&'static str> {
    let cell: &[&str] = match (id.t, id.s.index()) {
        (1, 1) => &["T_1g"],
        (1, 2) => &["T_1u"],
        (2, 1) => &["E_u", "T_2u"],
        (2, 2) => &["E_g", "T_2g"],
        (3, 1) => &["A_2g", "T_1g", "T_2g"],
        (3, 2) => &["A_2u", "T_1u", "T_2u"],
        _ => unreachable!(),
    };
    cell.iter().copied().collect()
}

#[test]
fn forbidden_events_follow_table_one_intersections() {
    let oh = builtin_group("O_h").unwrap();
    let d = build_diagram(3, 0.05, 2.0, 800, &oh, &ParityFilter::none()).unwrap();
    let crossings = find_crossings(&d);
    assert!(!crossings.is_empty());
    for c in &crossings {
        let shared: BTreeSet<&str> = table_one_labels(c.source_a)
            .intersection(&table_one_labels(c.source_b))
            .copied()
            .collect();
        let got: BTreeSet<&str> = c.shared_irreps.iter().map(String::as_str).collect();
        assert_eq!(got, shared, "{} x {}", c.source_a, c.source_b);
        assert_eq!(c.verdict.is_forbidden(), !shared.is_empty());
    }
    let forbidden: Vec<_> = crossings
        .iter()
        .filter(|c| c.verdict.is_forbidden())
        .map(|c| (c.source_a, c.source_b))
        .collect();
    assert_eq!(forbidden, vec![(O3IrrepId::tm(1), O3IrrepId::tm(3))]);
}

#[test]
fn crossing_abscissae_are_within_grid_error() {
    let oh = builtin_group("O_h").unwrap();
    let d = build_diagram(5, 0.05, 2.0, 800, &oh, &ParityFilter::none()).unwrap();
    let h = d.grid[1] - d.grid[0];
    for c in find_crossings(&d) {
        let i = d.grid.iter().position(|&x| x > c.kr_over_pi).unwrap() - 1;
        let ta = &d.traces[c.trace_a];
        let tb = &d.traces[c.trace_b];
        let gap = |k: usize| (ta.samples[k].lambda.unwrap() - tb.samples[k].lambda.unwrap()).abs();
        let bound = gap(i).max(gap(i + 1));
        let x = c.kr_over_pi * std::f64::consts::PI;
        let la = modesub::sphwave::eigenvalue(c.source_a, x).unwrap();
        let lb = modesub::sphwave::eigenvalue(c.source_b, x).unwrap();
        assert!((la - lb).abs() <= bound, "{} x {} at {}", c.source_a, c.source_b, c.kr_over_pi);
        assert!(c.kr_over_pi >= d.grid[i] && c.kr_over_pi <= d.grid[i] + h);
    }
}

#[test]
fn verdicts_are_symmetric() {
    let c4v = builtin_group("C_4v").unwrap();
    let d = build_diagram(4, 0.05, 2.0, 400, &c4v, &ParityFilter::odd()).unwrap();
    for a in &d.traces {
        for b in &d.traces {
            assert_eq!(a.label.shared_irreps(&b.label).len(), b.label.shared_irreps(&a.label).len());
        }
    }
}

#[test]
fn te1_te5_crossings_are_forbidden_for_t1g() {
    let oh = builtin_group("O_h").unwrap();
    let d = build_diagram(5, 0.05, 2.0, 800, &oh, &ParityFilter::none()).unwrap();
    let events: Vec<_> = find_crossings(&d)
        .into_iter()
        .filter(|c| c.source_a == O3IrrepId::te(1) && c.source_b == O3IrrepId::te(5))
        .collect();
    assert!(!events.is_empty());
    for e in &events {
        assert_eq!(e.verdict, Verdict::ForbiddenFor(vec!["T_1g".into()]));
    }
    let predicted = predict_avoidances(&events);
    assert_eq!(predicted.len(), events.len());
    assert!(predicted.iter().all(|p| p.affected_irreps == ["T_1g"]));
}

#[test]
fn no_crossing_is_reported_next_to_a_pole() {
    let oh = builtin_group("O_h").unwrap();
    let d = build_diagram(6, 0.05, 2.0, 800, &oh, &ParityFilter::none()).unwrap();
    let h = d.grid[1] - d.grid[0];
    for c in find_crossings(&d) {
        for t in [&d.traces[c.trace_a], &d.traces[c.trace_b]] {
            for &p in &t.poles {
                assert!((p - c.kr_over_pi).abs() > h, "{} x {}", c.source_a, c.source_b);
            }
        }
    }
}

#[test]
fn avoidance_prediction_for_dipole_and_octupole() {
    let oh = builtin_group("O_h").unwrap();
    let d = build_diagram(3, 0.05, 2.0, 800, &oh, &ParityFilter::none()).unwrap();
    let av = predict_avoidances(&find_crossings(&d));
    assert_eq!(av.len(), 1);
    assert_eq!(av[0].affected_irreps, ["T_1u"]);
    let pair = [av[0].indentation, av[0].peak];
    assert!(pair.contains(&O3IrrepId::tm(1)) && pair.contains(&O3IrrepId::tm(3)));
}
