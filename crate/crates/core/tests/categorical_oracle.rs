mod support;

use mnar_core::identify::{check_categorical, VerdictStatus};
use support::{grid_alternative_exists, random_tables};

#[test]
fn rank_test_agrees_with_grid_search() {
    let mut seen = [0usize; 2];
    for (k, t) in random_tables(20240611, 20).iter().enumerate() {
        let verdict = check_categorical(&t.table);
        let base = vec![0.5; t.table.m_y()];
        let exists = grid_alternative_exists(&t.columns, &base);
        let claims_alternative = verdict.status != VerdictStatus::Identifiable;
        assert_eq!(
            claims_alternative, exists,
            "table {k} ({}x{}): verdict {} but grid search found alternative = {exists}",
            t.table.m_y(),
            t.table.m_z(),
            verdict.status
        );
        seen[exists as usize] += 1;
    }
    // the suite exercises both outcomes
    assert!(seen[0] >= 3 && seen[1] >= 3, "{seen:?}");
}

#[test]
fn random_two_by_two_tables_are_identifiable() {
    let twos: Vec<_> = random_tables(99, 60)
        .into_iter()
        .filter(|t| t.table.m_y() == 2 && t.table.m_z() == 2)
        .collect();
    assert!(!twos.is_empty());
    for t in twos {
        assert_eq!(check_categorical(&t.table).status, VerdictStatus::Identifiable);
        assert!(!grid_alternative_exists(&t.columns, &[0.5, 0.5]));
    }
}

#[test]
fn witnesses_reproduce_the_observed_likelihood() {
    for t in random_tables(7, 40) {
        let v = check_categorical(&t.table);
        if let Some(w) = v.witness {
            assert!(w.alternative.iter().all(|&p| (0.05..=0.95).contains(&p)));
            assert!(t.table.phi_distance(&w.base, &w.alternative).unwrap() < 1e-8);
        }
    }
}
