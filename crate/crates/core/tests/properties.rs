use prevtrial::bnab::neutralization::bliss_fraction;
use prevtrial::bnab::{
    auc_score, combine_bliss_hill, concentration_at, ic50_from_ic80, DosingSchedule, PkParams,
    TiterCurve,
};
use prevtrial::bnab::AucScale;
use prevtrial::counterfactual::{
    averted_infections_ratio, pe_vs_counterfactual, uncertainty_interval, ArmSummary,
    EfficacyParameter, ThetaCInterval,
};
use prevtrial::design::{
    event_probability, required_events, total_sample_size, Allocation, DesignKind, DesignSpec,
    EventAccrualModel, HypothesisPair, IncidenceScenario,
};
use proptest::prelude::*;

fn layer(pe_null: f64, pe_alt: f64) -> DesignSpec {
    DesignSpec::new(DesignKind::Layer, HypothesisPair::new(pe_null, pe_alt))
}

proptest! {
    #[test]
    fn events_grow_as_hypotheses_close(pe_null in 0.0f64..0.4, gap in 0.1f64..0.5, shrink in 0.1f64..0.9) {
        let alloc = Allocation::default();
        let wide = required_events(&HypothesisPair::new(pe_null, pe_null + gap), &alloc).unwrap();
        let narrow = required_events(&HypothesisPair::new(pe_null, pe_null + gap * shrink), &alloc).unwrap();
        prop_assert!(narrow >= wide);
    }

    #[test]
    fn events_depend_only_on_hazard_ratio_ratio(pe_alt in 0.3f64..0.8, scale in 0.5f64..1.0) {
        // (hr_null, hr_alt) and (hr_null*s, hr_alt*s) give the same log ratio.
        let alloc = Allocation::default();
        let a = HypothesisPair::new(0.0, pe_alt);
        let b = HypothesisPair::new(1.0 - scale, 1.0 - scale * (1.0 - pe_alt));
        prop_assert_eq!(required_events(&a, &alloc).unwrap(), required_events(&b, &alloc).unwrap());
    }

    #[test]
    fn event_probability_bounded_and_monotone(lambda in 1e-4f64..0.2, bump in 1.01f64..3.0) {
        for model in EventAccrualModel::ALL {
            let spec = layer(0.0, 0.5).with_model(model);
            let p = event_probability(lambda, &spec);
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert!(event_probability(lambda * bump, &spec) > p);
        }
    }

    #[test]
    fn linear_model_size_scales_inversely(lambda in 0.002f64..0.05, k in 0.05f64..1.0) {
        let spec = layer(0.0, 0.5).with_model(EventAccrualModel::LinearPersonTime);
        let base = IncidenceScenario::new(lambda / 2.0, lambda);
        let scaled = IncidenceScenario::new(k * lambda / 2.0, k * lambda);
        let p = |s: &IncidenceScenario| {
            event_probability(s.annual_incidence_arm1, &spec) + event_probability(s.annual_incidence_arm2, &spec)
        };
        prop_assert!((p(&base) * k / p(&scaled) - 1.0).abs() < 1e-12);
        let n = total_sample_size(&spec, &base).unwrap();
        prop_assert_eq!(n.n_total % 2, 0);
        prop_assert_eq!(n.n_arm1 + n.n_arm2, n.n_total);
    }

    #[test]
    fn pe_is_affine_in_rate_ratio(theta in 0.01f64..0.99, rr1 in 0.0f64..3.0, rr2 in 0.0f64..3.0) {
        let mid = pe_vs_counterfactual(0.5 * (rr1 + rr2), theta).unwrap();
        let avg = 0.5 * (pe_vs_counterfactual(rr1, theta).unwrap() + pe_vs_counterfactual(rr2, theta).unwrap());
        prop_assert!((mid - avg).abs() < 1e-12);
        prop_assert!((averted_infections_ratio(1.0, theta).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncertainty_interval_contains_point_and_ci(
        e in 1u64..60, c in 1u64..120, lo in 0.05f64..0.5, width in 0.0f64..0.45,
    ) {
        let theta = ThetaCInterval::new(lo, lo + width).unwrap();
        for param in [EfficacyParameter::PreventionEfficacy, EfficacyParameter::AvertedInfectionsRatio] {
            let est = uncertainty_interval(&ArmSummary::new(e, 1000.0), &ArmSummary::new(c, 1000.0), &theta, param).unwrap();
            prop_assert!(est.ci_low <= est.point && est.point <= est.ci_high);
            prop_assert!(est.ui_low <= est.ci_low && est.ci_high <= est.ui_high);
        }
    }

    #[test]
    fn concentrations_superpose(dose1 in 1.0f64..50.0, dose2 in 1.0f64..50.0, gap in 1.0f64..20.0, t in 0.0f64..400.0) {
        let pk = PkParams::two_compartment(0.3, 3.0, 0.6, 2.5);
        let both = DosingSchedule {
            doses: vec![
                prevtrial::bnab::Dose { time_weeks: 0.0, mg_per_kg: dose1 },
                prevtrial::bnab::Dose { time_weeks: gap, mg_per_kg: dose2 },
            ],
            body_weight_kg: 70.0,
        };
        let first = DosingSchedule { doses: both.doses[..1].to_vec(), body_weight_kg: 70.0 };
        let second = DosingSchedule { doses: both.doses[1..].to_vec(), body_weight_kg: 70.0 };
        let sum = concentration_at(&pk, &first, t) + concentration_at(&pk, &second, t);
        let joint = concentration_at(&pk, &both, t);
        prop_assert!((joint - sum).abs() <= 1e-12 * joint.max(1e-300));
        let doubled = DosingSchedule { doses: first.doses.clone(), body_weight_kg: 140.0 };
        let c1 = concentration_at(&pk, &first, t);
        prop_assert!((concentration_at(&pk, &doubled, t) - 2.0 * c1).abs() <= 1e-12 * c1.max(1e-300));
    }

    #[test]
    fn bliss_titer_grows_with_concentration(
        c in prop::collection::vec(0.01f64..100.0, 1..4), ic80 in 0.01f64..10.0, h in 0.5f64..3.0, bump in 1.01f64..5.0,
    ) {
        let ic50s = vec![ic50_from_ic80(ic80, h); c.len()];
        let hills = vec![h; c.len()];
        let base = combine_bliss_hill(&c, &ic50s, &hills).unwrap();
        let more: Vec<f64> = c.iter().map(|x| x * bump).collect();
        prop_assert!(combine_bliss_hill(&more, &ic50s, &hills).unwrap() > base);
        prop_assert!((bliss_fraction(&c, &ic50s, &hills, base) - 0.8).abs() < 1e-9);
    }

    #[test]
    fn auc_is_additive_over_curves(a in prop::collection::vec(0.0f64..1e4, 2..50), s in 0.0f64..5.0) {
        let b: Vec<f64> = a.iter().map(|x| x * s + 1.0).collect();
        let curve = |v: Vec<f64>| TiterCurve { virus_id: "v".into(), id80: v };
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = auc_score(&curve(sum), AucScale::Linear);
        let rhs = auc_score(&curve(a.clone()), AucScale::Linear) + auc_score(&curve(b), AucScale::Linear);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
    }
}
