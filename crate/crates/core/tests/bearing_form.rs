use relsens::distributions::MarginalDistribution;
use relsens::form::{form_search, FormOptions};
use relsens::limit_state::LimitState;
use relsens::transform::NatafTransform;

fn bearing_model() -> (LimitState, NatafTransform) {
    let marginals = vec![
        MarginalDistribution::normal(200.0, 60.0).unwrap(),
        MarginalDistribution::lognormal(20.0, 4.0).unwrap(),
        MarginalDistribution::lognormal(40.0, 12.0).unwrap(),
        MarginalDistribution::lognormal(18.0, 1.8).unwrap(),
    ];
    (
        LimitState::terzaghi_bearing(1.5, 1.0).unwrap(),
        NatafTransform::independent(marginals).unwrap(),
    )
}

#[test]
fn bearing_design_point() {
    let (ls, t) = bearing_model();
    let r = form_search(&ls, &t, &FormOptions::default()).unwrap();
    let s = r.indices().unwrap();
    println!("beta={} iters={} indices={s:?} u*={:?}", r.beta, r.iterations, r.u_star);
    assert!((r.beta - 4.31).abs() < 0.02);
    for (s, e) in s.iter().zip([0.291, 0.292, 0.409, 0.008]) {
        assert!((s - e).abs() < 0.01, "{s} vs {e}");
    }
    let g = ls.eval(&t.u_to_x(&r.u_star).unwrap());
    assert!(g.abs() < 1e-3, "g(u*) = {g}");
}
