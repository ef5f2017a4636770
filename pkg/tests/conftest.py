import numpy as np
import pytest

from spilqr import benchmarks, lti, model_free, riccati

# Reference optimum of the benchmark plant, rounded to four decimals.
POWER_P_REF = np.array([
    [6.4599, 3.2440, 6.3364],
    [3.2440, 7.6499, 10.1346],
    [6.3364, 10.1346, 33.5195],
])
POWER_K_REF = np.array([[0.4022, 0.8351, 1.2066]])
POWER_RHO_OPEN = 1.0176
POWER_A_REF = np.array([
    [0.8825, 0.0014, 0.0470],
    [0.0894, 0.9049, 0.0023],
    [0.0028, 0.0571, 0.9995],
])
POWER_B_REF = np.array([[0.0001], [0.1190], [0.0036]])

DATA_SEED = 7


@pytest.fixture(scope="session")
def power_system():
    return benchmarks.power_plant()


@pytest.fixture(scope="session")
def power_weights():
    return benchmarks.power_plant_weights()


@pytest.fixture(scope="session")
def power_data(power_system):
    policy = lti.exploration_input(1, seed=DATA_SEED)
    traj = lti.simulate(power_system, benchmarks.POWER_PLANT_X0, policy, 30)
    return model_free.build_regression_data(traj)


@pytest.fixture(scope="session")
def power_oracle(power_system, power_weights):
    """Independent route to the optimum: value iteration from zero."""
    return riccati.value_iteration(power_system, power_weights, tol=1e-12)


def make_corpus_case(rng):
    """One random test case: controllable plant, unit weights, a gain
    placing the closed-loop radius in [0.5, 3], and probing data that
    satisfies the excitation rank condition."""
    while True:
        sys_d = benchmarks.random_controllable_system(rng)
        weights = lti.CostWeights(np.eye(sys_d.n), np.eye(sys_d.m))
        try:
            K0 = benchmarks.random_destabilizing_gain(rng, sys_d)
        except RuntimeError:
            continue
        l = model_free.unknown_count(sys_d.n, sys_d.m) + 20
        x0 = rng.uniform(-0.5, 0.5, sys_d.n)
        seed = int(rng.integers(0, 2**32))
        policy = lti.exploration_input(sys_d.m, seed=seed)
        traj = lti.simulate(sys_d, x0, policy, l)
        data = model_free.build_regression_data(traj)
        if model_free.check_rank_condition(data):
            return {"sys": sys_d, "weights": weights, "K0": K0,
                    "data": data}


@pytest.fixture(scope="session")
def corpus():
    """The 50-case random corpus shared by the acceptance criteria."""
    rng = np.random.default_rng(20240814)
    return [make_corpus_case(rng) for _ in range(50)]
