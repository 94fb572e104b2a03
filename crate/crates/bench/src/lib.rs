//! Fixtures shared by the benchmarks.

use page_core::data::{generate_synthetic, FederatedData};
use page_core::ddpg::{ActionSpace, DdpgAgent, DdpgConfig, DdpgHyper, Transition};
use page_core::rng::rng_from;
use page_core::{MlpSpec, ParamVector, SyntheticConfig};

/// Desk-scale synthetic data: `clients` clients, 10 features, 5 classes.
pub fn synthetic(clients: usize) -> FederatedData {
    let cfg = SyntheticConfig {
        num_clients: clients,
        dims: 10,
        classes: 5,
        model_variance: 1.0,
        feature_variance: 1.0,
        mean_train_per_client: 70,
        mean_test_per_client: 30,
        server_test_size: 1000,
        seed: 3,
    };
    generate_synthetic(&cfg).expect("valid synthetic config")
}

pub fn logistic_model() -> (MlpSpec, ParamVector) {
    let spec = MlpSpec::logistic(10, 5).expect("valid sizes");
    let params = spec.init_params(&mut rng_from(1, &[]));
    (spec, params)
}

/// Agent with a full replay buffer, ready for `learn_step`.
pub fn primed_agent(state_dim: usize, action_dim: usize, space: ActionSpace) -> DdpgAgent {
    let cfg = DdpgConfig::new(state_dim, action_dim, space, DdpgHyper::default()).expect("valid agent config");
    let batch = cfg.hyper.batch_size;
    let mut agent = DdpgAgent::new(cfg, 5);
    let state = vec![0.5; state_dim];
    for k in 0..batch * 2 {
        let action = agent.act(&state, true).expect("state dims match");
        agent
            .store(Transition {
                state: state.clone(),
                action,
                reward: (k % 7) as f64 * 0.1,
                next_state: state.clone(),
            })
            .expect("transition dims match");
    }
    agent
}
