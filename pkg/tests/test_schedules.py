import numpy as np
import pytest

from consensus_sgd.errors import InvalidArgumentError, UnsupportedScheduleError
from consensus_sgd.schedules import (
    IDENTITY,
    Constant,
    IidBernoulli,
    MiniBatchPeriodic,
    PowerLaw,
    schedule_from_config,
)
from consensus_sgd.topology import cycle_graph, lambda2, max_degree_weights


@pytest.fixture
def P():
    return max_degree_weights(cycle_graph(6))


def test_constant_always_communicates(P):
    s = Constant(P)
    rng = np.random.default_rng(0)
    assert all(s.matrix_at(t, rng) is P for t in range(1, 20))
    np.testing.assert_allclose(s.expected_square(), P.weights @ P.weights)


def test_iid_expected_square_matches_monte_carlo(P):
    s = IidBernoulli(P, 0.3)
    rng = np.random.default_rng(1)
    P2 = P.weights @ P.weights
    acc = np.zeros_like(P2)
    n = 20000
    for f in s.comm_flags(1, n, rng):
        acc += P2 if f else np.eye(6)
    np.testing.assert_allclose(acc / n, s.expected_square(), atol=0.01)
    assert lambda2(s.expected_square()) > lambda2(P2)


def test_block_and_single_draws_agree(P):
    s = IidBernoulli(P, 0.4)
    block = s.comm_flags(1, 50, np.random.default_rng(7))
    rng = np.random.default_rng(7)
    single = [0 if s.matrix_at(t, rng) is IDENTITY else 1 for t in range(1, 51)]
    assert block.tolist() == single


def test_powerlaw_probability_and_nonstationary(P):
    s = PowerLaw(P, 1.0, 0.5)
    np.testing.assert_allclose(s.probability([1, 4, 100]), [1.0, 0.5, 0.1])
    with pytest.raises(UnsupportedScheduleError):
        s.expected_square()
    assert not s.stationary


def test_minibatch_batch_and_config(P):
    s = MiniBatchPeriodic.from_frequency(P, 1 / 128)
    assert s.batch == 128
    assert schedule_from_config(s.to_config(), P).batch == 128
    with pytest.raises(InvalidArgumentError):
        MiniBatchPeriodic(P, 0)


@pytest.mark.parametrize("cfg", [{"type": "constant"}, {"type": "iid", "nu": 0.1},
                                 {"type": "powerlaw", "C": 2.0, "p": 0.5}, {"type": "minibatch", "nu": 0.25}])
def test_config_round_trip(P, cfg):
    s = schedule_from_config(cfg, P)
    assert schedule_from_config(s.to_config(), P).to_config() == s.to_config()


def test_invalid_parameters(P):
    for nu in (0.0, -0.1, 1.5):
        with pytest.raises(InvalidArgumentError):
            IidBernoulli(P, nu)
    with pytest.raises(InvalidArgumentError):
        PowerLaw(P, 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        schedule_from_config({"type": "gossip"}, P)
    with pytest.raises(InvalidArgumentError):
        Constant(P).matrix_at(0, np.random.default_rng(0))
