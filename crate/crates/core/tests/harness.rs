use heisenfrac_core::commutators::{generate_instance, generate_t_instance, InnerOrder};
use heisenfrac_core::harness::{
    generate_corpus, lp_exponent, lp_inequality_study, lp_norm, pointwise_ratio, ratio_study_thm11,
    ratio_study_thm12, refinement_stability, run_multiplier_identities, run_thm11, run_thm12,
    CommonSettings, ContextPool, CorpusDescriptor, CorpusKind, OperatorRoute, StudyOutcome,
    Thm11Settings, Thm12Settings,
};
use heisenfrac_core::LatticeContext;

fn energy(ctx: &LatticeContext, u: &[f64]) -> f64 {
    ctx.lattice().inner(u, &ctx.operator().apply(u))
}

#[test]
fn corpus_generation() {
    let ctx = LatticeContext::new(1, 4).unwrap();
    let empty = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 0,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(empty.functions.is_empty() && empty.pairs().is_empty());
    for kind in [
        CorpusKind::HeatSmoothedNoise,
        CorpusKind::GaugeBump,
        CorpusKind::EigenMix,
    ] {
        let desc = CorpusDescriptor {
            kind,
            count: 6,
            seed: 9,
            t0: 0.3,
        };
        let (a, b) = (
            generate_corpus(&ctx, &desc).unwrap(),
            generate_corpus(&ctx, &desc).unwrap(),
        );
        let bits = |c: &heisenfrac_core::harness::Corpus| {
            c.functions
                .iter()
                .flatten()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.pairs().len(), 3);
        for u in &a.functions {
            assert!(u.iter().sum::<f64>().abs() <= 1e-12 * u.len() as f64);
        }
    }
    let rough = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 10,
            t0: 0.05,
            ..Default::default()
        },
    )
    .unwrap();
    let smooth = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 10,
            t0: 0.5,
            ..Default::default()
        },
    )
    .unwrap();
    let mean_ratio = |c: &heisenfrac_core::harness::Corpus| {
        c.functions
            .iter()
            .map(|u| energy(&ctx, u) / ctx.lattice().inner(u, u))
            .sum::<f64>()
    };
    assert!(mean_ratio(&smooth) < mean_ratio(&rough));
    assert!("white-noise".parse::<CorpusKind>().is_err());
    assert_eq!(
        "eigen-mix".parse::<CorpusKind>().unwrap(),
        CorpusKind::EigenMix
    );
    assert!(generate_corpus(
        &ctx,
        &CorpusDescriptor {
            t0: 0.0,
            ..Default::default()
        }
    )
    .is_err());
}

#[test]
fn lp_norms() {
    let ctx = LatticeContext::new(1, 4).unwrap();
    let lat = ctx.lattice();
    let delta = lat.delta(3);
    assert!((lp_norm(lat, &delta, 1.0).unwrap() - 1.0).abs() <= 1e-12);
    let u = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 1,
            ..Default::default()
        },
    )
    .unwrap()
    .functions
    .remove(0);
    let scaled: Vec<f64> = u.iter().map(|v| -3.0 * v).collect();
    for p in [1.0, 2.0, 3.5, f64::INFINITY] {
        let (a, b) = (
            lp_norm(lat, &u, p).unwrap(),
            lp_norm(lat, &scaled, p).unwrap(),
        );
        assert!((b - 3.0 * a).abs() <= 1e-12 * b);
    }
    assert!(
        (lp_norm(lat, &u, 2.0).unwrap().powi(2) - lat.inner(&u, &u)).abs()
            <= 1e-12 * lat.inner(&u, &u)
    );
    assert!(lp_norm(lat, &u, 0.5).is_err());
}

#[test]
fn pointwise_ratio_examples() {
    let r = pointwise_ratio(&[1.0, -2.0, 0.5], &[2.0, 1.0, 5.0]);
    assert_eq!(
        (r.lhs_max, r.ratio_sup, r.rhs_min_positive, r.excluded_nodes),
        (2.0, 2.0, 1.0, 0)
    );
    let r = pointwise_ratio(&[0.0, 0.0], &[0.0, 0.0]);
    assert_eq!((r.ratio_sup, r.excluded_nodes), (0.0, 0));
    assert!(pointwise_ratio(&[1.0], &[0.0]).ratio_sup.is_infinite());
}

#[test]
fn first_bound_study_is_deterministic_and_vanishes_on_zero() {
    let ctx = LatticeContext::new(1, 4).unwrap();
    let inst = generate_instance(0.8, 0.8, 0.8, 0.1, 5, 42).unwrap();
    let corpus = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 8,
            ..Default::default()
        },
    )
    .unwrap();
    let zero: Vec<_> = corpus
        .pairs()
        .into_iter()
        .map(|(u, v)| (vec![0.0; u.len()], v))
        .collect();
    let report = ratio_study_thm11(&ctx, &zero, &inst, OperatorRoute::Spectral, 0.0).unwrap();
    assert!(report.pairs.iter().all(|p| p.ratio_sup == 0.0) && !report.inconclusive);
    let a = ratio_study_thm11(&ctx, &corpus.pairs(), &inst, OperatorRoute::Spectral, 0.0).unwrap();
    let b = ratio_study_thm11(&ctx, &corpus.pairs(), &inst, OperatorRoute::Spectral, 0.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv().lines().count(), 5);
    assert!(a.max_ratio > 0.0 && a.max_ratio.is_finite());
}

#[test]
fn second_bound_study_controls() {
    let ctx = LatticeContext::new(1, 4).unwrap();
    let corpus = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 6,
            ..Default::default()
        },
    )
    .unwrap();
    let no_beta = generate_t_instance(0.9, 0.0, 0.2, 0.1, 5, 42).unwrap();
    let report = ratio_study_thm12(&ctx, &corpus.pairs(), &no_beta, InnerOrder::Paired).unwrap();
    assert!(report.pairs.iter().all(|p| p.lhs_max <= 1e-10));
    let inst = generate_t_instance(0.9, 0.3, 0.2, 0.1, 5, 42).unwrap();
    let zero_v: Vec<_> = corpus
        .pairs()
        .into_iter()
        .map(|(u, v)| (u, vec![0.0; v.len()]))
        .collect();
    let report = ratio_study_thm12(&ctx, &zero_v, &inst, InnerOrder::Repeated).unwrap();
    assert!(report
        .pairs
        .iter()
        .all(|p| p.lhs_max == 0.0 && p.ratio_sup == 0.0));
}

#[test]
fn stability_rules() {
    let flat = refinement_stability(&[4, 6], |_| Ok(0.0)).unwrap();
    assert!(flat.pass && flat.degenerate);
    let ok = refinement_stability(&[4, 6, 8], |m| Ok(m as f64)).unwrap();
    assert!(ok.pass && (ok.spread - 2.0).abs() < 1e-15);
    let bad = refinement_stability(&[4, 10], |m| Ok(m as f64)).unwrap();
    assert!(!bad.pass);
    assert!(refinement_stability(&[4], |_| Ok(1.0)).is_err());
}

#[test]
fn lp_exponent_examples() {
    assert!((lp_exponent(1.0, 4.0, 4.0, 4).unwrap() - 4.0).abs() <= 1e-14);
    assert!((lp_exponent(0.0, 2.0, 2.0, 4).unwrap() - 1.0).abs() <= 1e-14);
    assert!(lp_exponent(1.0, 8.0, 8.0, 4).is_err());
    assert!(lp_exponent(1.0, 0.5, 4.0, 4).is_err());
    let ctx = LatticeContext::new(1, 4).unwrap();
    let corpus = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let r = lp_inequality_study(&ctx, &corpus.pairs(), 1.0, 4.0, 4.0).unwrap();
    assert_eq!(r.p, 4.0);
    assert!(r.residual.abs() <= 1e-14 && r.ratios.len() == 2 && r.max_ratio.is_finite());
}

#[test]
fn settings_roundtrip_and_reject_unknown_keys() {
    let common = CommonSettings::default();
    let json = serde_json::to_string(&common).unwrap();
    assert_eq!(
        serde_json::from_str::<CommonSettings>(&json).unwrap(),
        common
    );
    assert!(serde_json::from_str::<CommonSettings>(r#"{"pairz": 3}"#).is_err());
    let partial: Thm11Settings = serde_json::from_str(r#"{"alpha": 1.2}"#).unwrap();
    assert_eq!((partial.alpha, partial.tau1), (1.2, 0.8));
    assert!(serde_json::from_str::<Thm12Settings>(r#"{"inner": "sideways"}"#).is_err());
}

#[test]
fn study_runners_on_small_corpora() {
    let pool = ContextPool::new();
    let common = CommonSettings {
        m_list: vec![4, 6],
        pairs: 4,
        ..Default::default()
    };
    let a = run_thm11(&pool, &common, &Thm11Settings::default()).unwrap();
    let b = run_thm11(&pool, &common, &Thm11Settings::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.reports.len(), 2);
    assert!(a.stability.is_some() && a.max_ratio.is_finite());
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<StudyOutcome>(&json).unwrap(), a);
    assert_eq!(a.to_csv().lines().count(), 1 + 2 * 4);
    let bad = Thm12Settings {
        beta: 0.6,
        delta: 0.4,
        ..Default::default()
    };
    assert!(run_thm12(&pool, &common, &bad)
        .unwrap_err()
        .to_string()
        .contains("beta+delta < min(tau,1)"));
    let m = run_multiplier_identities().unwrap();
    assert!(m.pass, "{:?}", m.checks);
}

#[test]
fn context_pool_shares_contexts() {
    let pool = ContextPool::new();
    let a = pool.get(1, 4).unwrap();
    let b = pool.get(1, 4).unwrap();
    assert!(std::sync::Arc::ptr_eq(&a, &b));
    assert!(pool.get(1, 5).is_err());
}
