use ahm_core::constructors::{design_by_key, kn, pattern_unitary, Branch};
use ahm_core::criticality::critical_report;
use ahm_core::hessian::phi;
use ahm_core::io::{from_json, parse_matrix, to_json, to_text};
use ahm_core::probes::{exclusion_pipeline, ExclusionCriterion, PipelineOptions};
use ahm_core::{Tolerances, UnitaryCandidate};

#[test]
fn saved_matrices_give_the_same_verdict() {
    let tol = Tolerances::default();
    let pg = pattern_unitary(&design_by_key("pg2_3").unwrap(), Branch::RealMinus, tol.unitary).unwrap();
    for u in [kn(6), pg.matrix] {
        let direct = exclusion_pipeline(&u, &PipelineOptions::default()).unwrap();
        for saved in [to_json(u.matrix()), to_text(u.matrix())] {
            let back = UnitaryCandidate::new(parse_matrix(&saved).unwrap(), tol.unitary).unwrap();
            assert!(critical_report(&back, &tol).unwrap().is_critical);
            let v = exclusion_pipeline(&back, &PipelineOptions::default()).unwrap();
            assert_eq!(v.criterion, direct.criterion);
            assert!((v.value - direct.value).abs() < 1e-9);
            let w = v.witness.expect("witness");
            assert!(phi(&back, &w, &tol).unwrap().value < 0.0);
        }
    }
}

#[test]
fn witness_survives_serialization() {
    let tol = Tolerances::default();
    let u = kn(7);
    let v = exclusion_pipeline(&u, &PipelineOptions::default()).unwrap();
    assert_eq!(v.criterion, ExclusionCriterion::ExpectationNegative);
    let w = from_json(&to_json(v.witness.as_ref().unwrap())).unwrap();
    assert_eq!(&w, v.witness.as_ref().unwrap());
    assert!(phi(&u, &w, &tol).unwrap().value < 0.0);
}

#[test]
fn tightened_negativity_threshold_still_excludes() {
    let mut tol = Tolerances::default();
    tol.apply_override("neg=1e-3").unwrap();
    let opts = PipelineOptions { tol, ..Default::default() };
    let v = exclusion_pipeline(&kn(5), &opts).unwrap();
    assert!(v.excluded);
    assert!(v.value < -1e-3);
}
