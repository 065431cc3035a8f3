import pytest

from privmeter.events import GroundTruthConfig, RelaySpec, generate_ground_truth


@pytest.fixture(scope="session")
def small_world():
    """One compact mixed-role network shared by integration tests."""
    config = GroundTruthConfig(
        n_clients=400,
        guards_per_selective_client=3,
        n_promiscuous_clients=10,
        relays=(
            RelaySpec("guard-a", guard=True, guard_weight=0.05),
            RelaySpec("guard-b", guard=True, guard_weight=0.10),
            RelaySpec("exit-a", exit=True, exit_weight=0.08),
            RelaySpec("exit-b", exit=True, exit_weight=0.12),
            RelaySpec("hsdir-a", hsdir=True, hsdir_weight=0.05),
            RelaySpec("rp-a", rendezvous=True, rend_weight=0.10),
        ),
        visits_per_client=4.0,
        ipv6_target_fraction=0.25,
        domain_universe=200,
        onion_universe=120,
        n_rend_circuits=400,
        rng_seed=11)
    trace, truth = generate_ground_truth(config)
    return config, trace, truth
