use splitstep::harness::{self, Reference, StrongConfig};
use splitstep::integrator::{simulate_path, uniform_grid, BaselineMethod, OdeMethod, Scheme};
use splitstep::models::{self, by_name, ParamValue, Params, TestEquationSplit};
use splitstep::spde::{self, LatticeField, SpdeKind, SpdeSpec};
use splitstep::{Error, RngStream};

fn params(pairs: &[(&str, ParamValue)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn one_step_mean_matches_composed_drift_map() {
    // The first sub-step is a martingale, so one split step has mean φ(x0) for the step-2 map φ.
    let x0 = 1.0f64;
    for (method, growth) in [
        (OdeMethod::ExplicitEuler, (|dt: f64| 1.0 + dt) as fn(f64) -> f64),
        (OdeMethod::Heun, |dt: f64| 1.0 + dt + dt * dt / 2.0),
    ] {
        let model = models::test_equation(TestEquationSplit::Transition)
            .with_step2_method(method)
            .unwrap();
        for (level, dt) in [0.25f64, 0.125].into_iter().enumerate() {
            let exact = (x0 + 1.0) * dt.exp() - 1.0;
            let composed = (x0 + 1.0) * growth(dt) - 1.0;
            let (err, se) =
                harness::weak_error(&model, &model.split_scheme(), x0, dt, dt, 1_000_000, 5, level as u64).unwrap();
            let bias = (composed - exact).abs();
            assert!(
                (err - bias).abs() < 3.0 * se,
                "{method}: dt={dt} error {err} vs {bias} (se {se})"
            );
        }
    }
}

#[test]
fn catalog_means_at_small_step() {
    let (x0, t, dt, paths) = (1.0f64, 1.0f64, 1e-3, 100_000);
    let cases: [(&str, Params, f64); 5] = [
        ("test-equation", params(&[]), (x0 + 1.0) * t.exp() - 1.0),
        ("test-equation-bessel", params(&[]), (x0 + 1.0) * t.exp() - 1.0),
        (
            "cir",
            params(&[("a", ParamValue::Number(0.5)), ("b", ParamValue::Number(-1.0))]),
            x0 * (-t).exp() + 0.5 * (1.0 - (-t).exp()),
        ),
        ("cev", params(&[("mu", ParamValue::Number(0.3))]), x0 * (0.3 * t).exp()),
        (
            "gbm",
            params(&[("lambda", ParamValue::Number(0.5))]),
            x0 * (0.5 * t).exp(),
        ),
    ];
    for (i, (name, p, oracle)) in cases.into_iter().enumerate() {
        let model = by_name(name, &p).unwrap();
        let known = model.exact_mean(x0, t).unwrap();
        assert!(
            (known - oracle).abs() < 1e-12 * oracle.abs(),
            "{name}: {known} vs {oracle}"
        );
        let (err, se) = harness::weak_error(&model, &model.split_scheme(), x0, t, dt, paths, 21, i as u64).unwrap();
        assert!(err < 3.0 * se, "{name}: error {err}, se {se}");
    }
}

#[test]
fn cir_split_positive_where_abs_sqrt_euler_is_not() {
    let model = models::cir(1.0, 1.0, 3.0, models::LinearStep::Euler).unwrap();
    let grid = uniform_grid(1.0, 0.01).unwrap();
    let split = model.split_scheme();
    let abs_euler = model.baseline(BaselineMethod::AbsSqrtEuler);
    let mut negatives = 0;
    for p in 0..200 {
        let s = simulate_path(&split, 1.0, &grid, &mut RngStream::new(3, p)).unwrap();
        assert!(s.iter().all(|x| *x >= 0.0));
        let e = simulate_path(&abs_euler, 1.0, &grid, &mut RngStream::new(3, p)).unwrap();
        negatives += e.iter().filter(|x| **x < 0.0).count();
    }
    assert!(negatives > 0);
}

#[test]
fn backward_euler_tracks_exact_gbm() {
    // Drift-implicit scheme on a linear drift: strong order 1/2, error well below the state scale.
    let model = models::gbm(-1.0, 0.5).unwrap();
    let ssbe = model.baseline(BaselineMethod::SplitStepBackwardEuler);
    let cfg = StrongConfig {
        x0: 1.0,
        t: 1.0,
        dts: harness::halving_dts(0.0625, 3),
        fine_dt: 0.5f64.powi(10),
        k: 2,
        paths: 2000,
        seed: 8,
    };
    let schemes: [(&str, &dyn Scheme); 1] = [("ssbe", &ssbe)];
    let s = harness::strong_series(&model, &schemes, Reference::Exact, &cfg).unwrap();
    assert!(s[0].errors.iter().all(|e| *e < 0.05), "{:?}", s[0].errors);
    assert!(s[0].errors.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn invalid_start_aborts_path_with_domain_root() {
    let model = models::cir(1.0, 1.0, 1.0, models::LinearStep::Euler).unwrap();
    let grid = uniform_grid(0.1, 0.01).unwrap();
    let err = simulate_path(&model.split_scheme(), -1.0, &grid, &mut RngStream::new(1, 0)).unwrap_err();
    assert!(matches!(err, Error::PathAborted { step: 0, .. }), "{err}");
    assert!(matches!(err.root(), Error::Domain(_)));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let model = models::ginzburg_landau();
    let split = model.split_scheme();
    let cfg = StrongConfig {
        x0: 1.0,
        t: 1.0,
        dts: harness::halving_dts(0.5f64.powi(5), 3),
        fine_dt: 0.5f64.powi(9),
        k: 2,
        paths: 3000,
        seed: 4,
    };
    let contact = SpdeSpec {
        kind: SpdeKind::Contact { theta: 1.2 },
        dt: 0.1,
        t_max: 30.0,
    };
    let init = LatticeField::uniform(1, 2048, 1.0, 1.0).unwrap();
    let test_eq = models::test_equation(TestEquationSplit::Transition);
    let run = |threads: usize| {
        pool(threads).install(|| {
            let schemes: [(&str, &dyn Scheme); 1] = [("split", &split)];
            let strong = harness::strong_series(&model, &schemes, Reference::Exact, &cfg).unwrap();
            let weak = harness::weak_error(&test_eq, &test_eq.split_scheme(), 1.0, 1.0, 0.01, 5000, 4, 0).unwrap();
            let field = spde::run_spde(&contact, init.clone(), 4, 0, |_| {}).unwrap().field;
            let survival = spde::survival_probability(&contact, &init, 4, 4).unwrap();
            (strong[0].errors.clone(), weak, field, survival)
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
}

#[test]
fn homogeneous_contact_field_follows_logistic_ode() {
    // A flat field has no diffusion; with small noise it follows ρ' = θρ - ρ².
    let (theta, rho0, t) = (0.5f64, 1.0, 1.0);
    let dx = 1e4;
    let spec = SpdeSpec {
        kind: SpdeKind::Contact { theta },
        dt: 1e-3,
        t_max: t,
    };
    let init = LatticeField::uniform(1, 16, dx, rho0).unwrap();
    let out = spde::run_spde(&spec, init, 9, 0, |_| {}).unwrap();
    let mean = out.field.values().iter().sum::<f64>() / 16.0;
    let g = (theta * t).exp();
    let oracle = theta * rho0 * g / (theta + rho0 * (g - 1.0));
    assert!((mean - oracle).abs() < 2e-3, "{mean} vs {oracle}");
}
