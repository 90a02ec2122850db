import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from consensus_sgd.data import (
    Dataset,
    GaussianStream,
    load_libsvm,
    normalize,
    parse_label_map,
    parse_libsvm,
    serialize_libsvm,
    split_uniform,
    synth_controlled_rho,
    synth_gaussian_classification,
)
from consensus_sgd.errors import GenerationError, InvalidArgumentError, ParseError
from oracles import top_eig_dense


def test_parse_basic_one_based_indices():
    d = parse_libsvm("+1 1:0.5 3:2\n-1 2:1\n")
    assert d.N == 2 and d.d == 3
    np.testing.assert_array_equal(d.X.toarray(), [[0.5, 0, 2], [0, 1, 0]])
    np.testing.assert_array_equal(d.y, [1, -1])


def test_parse_skips_comments_and_blank_lines():
    d = parse_libsvm("# header\n\n+1 1:1 # trailing\n")
    assert d.N == 1 and d.X[0, 0] == 1


def test_labels_one_two_map_to_plus_minus():
    d = parse_libsvm("1 1:1\n2 1:1\n")
    np.testing.assert_array_equal(d.y, [1, -1])


def test_nonbinary_labels_need_map():
    with pytest.raises(ParseError) as err:
        parse_libsvm("1 1:1\n3 1:1\n")
    assert err.value.lineno == 2
    d = parse_libsvm("3 1:1\n5 1:1\n", label_map=parse_label_map("3:+1,5:-1"))
    np.testing.assert_array_equal(d.y, [1, -1])


@pytest.mark.parametrize("text,line", [
    ("+1 0:1\n", 1),
    ("+1 1:1\n-1 2:1 2:3\n", 2),
    ("+1 1:1\n-1 3:1 2:1\n", 2),
    ("+1 1:x\n", 1),
    ("+1 1\n", 1),
    ("abc 1:1\n", 1),
])
def test_parse_errors_report_line(text, line):
    with pytest.raises(ParseError) as err:
        parse_libsvm(text)
    assert err.value.lineno == line


def test_forced_dimension():
    assert parse_libsvm("+1 2:1\n", dimension=10).d == 10
    with pytest.raises(ParseError):
        parse_libsvm("+1 5:1\n", dimension=3)


def test_bad_label_map():
    with pytest.raises(InvalidArgumentError):
        parse_label_map("3:2")
    with pytest.raises(InvalidArgumentError):
        parse_label_map("nonsense")


@given(st.integers(1, 30), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_libsvm_round_trip(N, d, seed):
    r = np.random.default_rng(seed)
    dense = r.standard_normal((N, d)) * (r.random((N, d)) < 0.4)
    y = r.choice([-1.0, 1.0], size=N)
    data = Dataset(sp.csr_matrix(dense), y)
    back = parse_libsvm(serialize_libsvm(data), dimension=d)
    assert back.equals(data)


def test_load_from_path(tmp_path):
    p = tmp_path / "a.svm"
    p.write_text("+1 1:1 2:2\n-1 2:1\n")
    d = load_libsvm(p)
    assert d.N == 2 and d.meta["path"] == str(p)


def test_normalize_bounds_row_norms_and_flags_noop():
    d = parse_libsvm("+1 1:3 2:4\n-1 1:0.5\n")
    n = normalize(d)
    np.testing.assert_allclose(n.row_norms(), [1.0, 0.5])
    assert n.meta["normalize_noop"] is False
    assert normalize(n).meta["normalize_noop"] is True


def test_gaussian_generator_unit_ball_and_deterministic():
    a = synth_gaussian_classification(300, 10, seed=4)
    b = synth_gaussian_classification(300, 10, seed=4)
    assert a.equals(b)
    assert np.all(a.row_norms() <= 1 + 1e-12)
    assert set(np.unique(a.y)) <= {-1.0, 1.0}


def test_stream_population_moments_match_monte_carlo():
    s = GaussianStream(6, seed=1)
    X, y = s.draw(np.random.default_rng(0), 400_000)
    s2, c = s.population_moments()
    np.testing.assert_allclose(X.T @ X / X.shape[0], s2 * np.eye(6), atol=3e-3)
    np.testing.assert_allclose((y[:, None] * X).mean(axis=0), c * s.hyperplane, atol=3e-3)


@pytest.mark.parametrize("target", [0.05, 0.2, 0.66])
def test_controlled_rho_hits_target(target):
    data = synth_controlled_rho(5000, 50, target, seed=2)
    assert abs(top_eig_dense(data.X) - target) <= 0.1 * target
    np.testing.assert_allclose(data.row_norms(), 1.0, atol=1e-12)


def test_controlled_rho_rejects_unreachable_target():
    with pytest.raises(InvalidArgumentError):
        synth_controlled_rho(100, 10, 0.05, seed=0)
    with pytest.raises(GenerationError):
        synth_controlled_rho(50, 40, 0.026, seed=0, retries=1, tol=1e-4)


@given(st.integers(1, 200), st.integers(1, 9), st.integers(0, 1000))
def test_split_uniform_disjoint_and_even(N, m, seed):
    data = synth_gaussian_classification(N, 3, seed=0)
    if N < m:
        with pytest.raises(InvalidArgumentError):
            split_uniform(data, m, seed)
        return
    sh = split_uniform(data, m, seed)
    used = np.concatenate([sh.indices.ravel(), sh.dropped])
    assert sh.n == N // m and sh.dropped.size == N % m
    assert np.array_equal(np.sort(used), np.arange(N))
