//! Analytic network gradients against central finite differences in float64.

mod common;

use common::{all_networks, check_network_gradients, tiny_net, Probe};
use poseswap_core::nets::Models;

#[test]
fn every_network_matches_finite_differences() {
    let cfg = tiny_net();
    let probe = Probe::new(&cfg, 3);
    for (method, name) in all_networks() {
        let m = Models::<f64>::new(method, &cfg, 11).unwrap();
        let r = check_network_gradients(&m, name, &probe, 100, 5);
        assert_eq!(r.checked, 100, "{method}/{name} has fewer than 100 parameters");
        assert!(r.max_rel_err < 1e-4, "{method}/{name}: max relative error {:.3e}", r.max_rel_err);
    }
}

#[test]
fn leaky_decoder_variant_matches_finite_differences() {
    let cfg = poseswap_core::nets::NetConfig {
        nonlinearity_kind: poseswap_core::nets::Nonlinearity::LeakyRelu,
        norm_kind: poseswap_core::nets::NormKind::None,
        ..tiny_net()
    };
    let probe = Probe::new(&cfg, 4);
    let m = Models::<f64>::new(poseswap_core::Method::DisentangledPretrainedPose, &cfg, 2).unwrap();
    let r = check_network_gradients(&m, poseswap_core::nets::GENERATOR, &probe, 100, 9);
    assert!(r.max_rel_err < 1e-4, "max relative error {:.3e}", r.max_rel_err);
}
