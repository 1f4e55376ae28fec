//! Single-level mixed-integer formulations.
//!
//! The inner scheduling problem is replaced by its KKT system written in
//! reciprocal multipliers `w_s = 1/lambda_s` and `mu = 1/nu`; the remaining
//! complementarity products are linearised with one binary per UE, slot and
//! pool plus a Big-M constant. Three formulations are available: hybrid,
//! dedicated-only and shared-only.

mod build;
mod check;
mod equivalence;
mod lp;
mod model;

pub use build::{build, default_big_m, expected_counts, BuildOptions, ModelCounts, DEFAULT_EPSILON};
pub use check::{check_solution, lift_assignment, pinned_allocation, Assignment, ViolationReport, BIG_M_HEADROOM};
pub use equivalence::{
    check_instance, in_kkt_set, in_transformed_set, kkt_point_from_fill, random_instance, to_kkt, to_transformed, transformed_point_from_height,
    verify_transform_equivalence, EquivalenceInstance, EquivalenceReport, KktPoint, TransformedPoint,
};
pub use lp::{export_lp, parse_lp, write_lp, LpConstraint, LpProblem};
pub use model::{BigMInfo, Constraint, Family, FormulationKind, MipModel, Sense, VarKind, Variable};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SeTrace;
    use crate::queue::{SlaMode, SlaSpec};
    use crate::samples::{SampleSet, Topology};
    use crate::scheduler::Allocation;
    use crate::traffic::ArrivalTrace;

    fn tiny(counts: &[usize], k: usize, t: usize) -> SampleSet {
        let topo = Topology::from_counts(counts).unwrap();
        let n = topo.ue_count();
        let arrivals = ArrivalTrace::from_fn(n, k, t, |i, kk, tt| ((i * 7 + kk * 3 + tt * 5) % 4) as u64 * 300);
        let channel = SeTrace::from_fn(n, k, t, 7.4, |i, kk, tt| 0.6 + ((i * 5 + kk * 11 + tt * 3) % 9) as f64 * 0.7).unwrap();
        SampleSet::new(topo, arrivals, channel).unwrap()
    }

    fn sla(samples: &SampleSet, mode: SlaMode, d: f64) -> SlaSpec {
        SlaSpec::from_slice_budgets(mode, &samples.topology, vec![d; samples.slice_count()]).unwrap()
    }

    fn opts() -> BuildOptions {
        BuildOptions { big_m: default_big_m(7.4, 300.0, 1e-6), epsilon: 1e-6 }
    }

    #[test]
    fn binary_counts_match_examples() {
        let s = tiny(&[2, 2], 1, 2);
        let sl = sla(&s, SlaMode::PerUe, 1.0);
        assert_eq!(build(FormulationKind::Hyra, &s, &sl, &opts()).unwrap().binary_count(), 16);
        assert_eq!(build(FormulationKind::DedicatedOnly, &s, &sl, &opts()).unwrap().binary_count(), 8);
    }

    #[test]
    fn counts_match_closed_form() {
        for counts in [&[1usize][..], &[2, 1], &[1, 3, 2]] {
            for (k, t) in [(1, 1), (2, 3), (3, 2)] {
                let s = tiny(counts, k, t);
                for mode in [SlaMode::PerUe, SlaMode::SliceAggregated] {
                    let sl = sla(&s, mode, 2.0);
                    for kind in FormulationKind::ALL {
                        let m = build(kind, &s, &sl, &opts()).unwrap();
                        let e = expected_counts(kind, s.ue_count(), s.slice_count(), k, t, sl.row_count());
                        assert_eq!((m.var_count(), m.binary_count(), m.constraint_count()), (e.variables, e.binaries, e.constraints), "{kind} {counts:?} {k} {t} {mode:?}");
                        assert!(m.is_well_formed());
                    }
                }
            }
        }
    }

    #[test]
    fn shared_only_has_no_dedicated_symbols() {
        let s = tiny(&[2, 2], 1, 2);
        let m = build(FormulationKind::SharedOnly, &s, &sla(&s, SlaMode::PerUe, 1.0), &opts()).unwrap();
        assert!(m.variables.iter().all(|v| !v.name.starts_with("xded") && !v.name.starts_with("zded") && !v.name.starts_with("yded") && !v.name.starts_with("w_")));
        let m = build(FormulationKind::DedicatedOnly, &s, &sla(&s, SlaMode::PerUe, 1.0), &opts()).unwrap();
        assert!(m.variables.iter().all(|v| !v.name.contains("sh") && !v.name.starts_with("mu")));
    }

    #[test]
    fn rejects_bad_constants() {
        let s = tiny(&[1], 1, 1);
        let sl = sla(&s, SlaMode::PerUe, 1.0);
        assert!(build(FormulationKind::Hyra, &s, &sl, &BuildOptions { big_m: 0.0, epsilon: 1e-6 }).is_err());
        assert!(build(FormulationKind::Hyra, &s, &sl, &BuildOptions { big_m: 10.0, epsilon: -1.0 }).is_err());
    }

    #[test]
    fn export_is_byte_stable_and_reparses() {
        let s = tiny(&[2, 1], 2, 3);
        for kind in FormulationKind::ALL {
            let m = build(kind, &s, &sla(&s, SlaMode::SliceAggregated, 1.5), &opts()).unwrap();
            let a = write_lp(&m);
            let b = write_lp(&build(kind, &s, &sla(&s, SlaMode::SliceAggregated, 1.5), &opts()).unwrap());
            assert_eq!(a, b);
            let lp = parse_lp(&a).unwrap();
            assert_eq!(lp.var_count(), m.var_count());
            assert_eq!(lp.constraints.len(), m.constraint_count());
            assert_eq!(lp.binaries.len(), m.binary_count());
        }
    }

    #[test]
    fn lifted_points_are_feasible_with_headroom() {
        let s = tiny(&[2, 2], 2, 3);
        let sl = sla(&s, SlaMode::PerUe, 50.0);
        let cases = [
            (FormulationKind::Hyra, Allocation { dedicated: vec![2.0, 1.5], shared: 3.0 }),
            (FormulationKind::Hyra, Allocation { dedicated: vec![0.0, 4.0], shared: 0.0 }),
            (FormulationKind::DedicatedOnly, Allocation { dedicated: vec![3.0, 0.0], shared: 0.0 }),
            (FormulationKind::SharedOnly, Allocation::shared_only(2, 5.0)),
        ];
        for (kind, alloc) in cases {
            let m = build(kind, &s, &sl, &opts()).unwrap();
            let a = lift_assignment(&m, &s, &alloc).unwrap();
            let r = check_solution(&m, &a, 1e-6).unwrap();
            assert_eq!(r.family(Family::Sla), 0.0);
            let mut without_sla = r.clone();
            without_sla.by_family.remove(&Family::Sla);
            assert!(without_sla.feasible(), "{kind}: {r:?}");
            assert!(r.big_m_sufficient(), "{kind}: {}", r.big_m_usage);
            assert_eq!(pinned_allocation(&m, 2, &a).unwrap(), alloc);
        }
    }

    #[test]
    fn infeasible_points_are_reported() {
        let s = tiny(&[2, 2], 1, 3);
        let sl = sla(&s, SlaMode::PerUe, 0.05);
        let m = build(FormulationKind::Hyra, &s, &sl, &opts()).unwrap();
        let zeros: Assignment = m.variables.iter().map(|v| (v.name.clone(), 0.0)).collect();
        let r = check_solution(&m, &zeros, 1e-6).unwrap();
        assert!(!r.feasible());
        assert!(r.family(Family::Queue) > 0.0 && r.bounds > 0.0);

        let lifted = lift_assignment(&m, &s, &Allocation::zeros(2)).unwrap();
        let r = check_solution(&m, &lifted, 1e-6).unwrap();
        assert!(r.family(Family::Sla) > 0.0);
        assert!(r.family(Family::StationarityDedicated) <= 1e-9);
    }

    #[test]
    fn perturbed_level_breaks_activation() {
        let s = tiny(&[2, 2], 1, 2);
        let sl = sla(&s, SlaMode::PerUe, 50.0);
        let m = build(FormulationKind::Hyra, &s, &sl, &opts()).unwrap();
        let mut a = lift_assignment(&m, &s, &Allocation { dedicated: vec![2.0, 2.0], shared: 0.0 }).unwrap();
        assert_eq!(a["zded_0_0_0"], 1.0);
        *a.get_mut("w_0_0_0").unwrap() *= 1.01;
        let r = check_solution(&m, &a, 1e-6).unwrap();
        assert!(r.family(Family::UpperDedicated).max(r.family(Family::LowerDedicated)) > 1e-3, "{r:?}");
    }

    #[test]
    fn missing_variable_is_an_error() {
        let s = tiny(&[1], 1, 1);
        let m = build(FormulationKind::SharedOnly, &s, &sla(&s, SlaMode::PerUe, 1.0), &opts()).unwrap();
        assert!(matches!(check_solution(&m, &Assignment::new(), 1e-6), Err(crate::Error::MissingVariable(_))));
    }
}
