import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonqnet.channels import (
    QuantumChannel,
    apply_to,
    channel_distance,
    dephasing,
    depolarizing,
    identity_channel,
    parse_channel_map,
    parse_channel_spec,
)
from anonqnet.qcore import DensityMatrix, Ket, make_bell_pair, partial_trace


def test_kraus_completeness_enforced():
    bad = [np.array([[1, 0], [0, 0.5]], dtype=complex)]
    with pytest.raises(ValueError):
        QuantumChannel(bad, name="broken")


def test_identity_channel_is_noop():
    rho = np.array([[0.7, 0.2 + 0.1j], [0.2 - 0.1j, 0.3]], dtype=complex)
    assert np.allclose(identity_channel()(rho), rho)


def test_dephasing_kills_coherence_linearly():
    rho = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    q = 0.8
    out = dephasing(q)(rho)
    # off-diagonals shrink by 2q-1; populations untouched
    assert out[0, 0] == pytest.approx(0.5)
    assert out[0, 1] == pytest.approx(0.5 * (2 * q - 1))


def test_depolarizing_mixes_toward_identity():
    rho = np.array([[1, 0], [0, 0]], dtype=complex)
    q = 0.6
    out = depolarizing(q)(rho)
    expected = q * rho + (1 - q) * np.eye(2) / 2
    assert np.allclose(out, expected, atol=1e-12)


def test_depolarizing_extremes():
    rho = np.array([[0.2, 0.1], [0.1, 0.8]], dtype=complex)
    assert np.allclose(depolarizing(1.0)(rho), rho, atol=1e-12)
    assert np.allclose(depolarizing(0.0)(rho), np.eye(2) / 2, atol=1e-12)


def test_apply_to_targets_one_qubit():
    pair = make_bell_pair(("a", "b")).to_density()
    out = apply_to(depolarizing(0.0), pair, "a")
    # fully depolarizing one half leaves the product of maximally mixed states
    assert np.allclose(out.mat, np.eye(4) / 4, atol=1e-12)
    marg = partial_trace(out, ["a"])
    assert np.allclose(marg.mat, np.eye(2) / 2, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0, 1),
    st.sampled_from(["dephasing", "depolarizing"]),
    st.integers(0, 10**6),
)
def test_channels_preserve_trace_and_positivity(q, family, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    rho = np.outer(v, v.conj())
    chan = dephasing(q) if family == "dephasing" else depolarizing(q)
    out = chan(rho)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(out).min() > -1e-12


@pytest.mark.parametrize("qa,qb", [(0.9, 0.8), (1.0, 0.7), (0.55, 0.5)])
def test_channel_distance_dephasing_closed_form(qa, qb):
    # induced trace norm between dephasing channels is 2|q - q'|
    got = channel_distance(dephasing(qa), dephasing(qb))
    assert got == pytest.approx(2 * abs(qa - qb), abs=1e-6)


@pytest.mark.parametrize("qa,qb", [(0.9, 0.8), (1.0, 0.6), (0.75, 0.7)])
def test_channel_distance_depolarizing_closed_form(qa, qb):
    # worst input is pure; the difference scales the Bloch vector by q - q'
    got = channel_distance(depolarizing(qa), depolarizing(qb))
    assert got == pytest.approx(abs(qa - qb), abs=1e-6)


def test_channel_distance_identical_channels_is_zero():
    assert channel_distance(dephasing(0.77), dephasing(0.77)) == 0.0


def test_channel_distance_symmetry():
    a, b = depolarizing(0.9), dephasing(0.9)
    assert channel_distance(a, b) == pytest.approx(channel_distance(b, a),
                                                   abs=1e-6)


def test_parse_channel_spec():
    ch = parse_channel_spec("dephasing:q=0.9")
    assert ch.name == "dephasing"
    assert ch.params["q"] == pytest.approx(0.9)
    assert parse_channel_spec("identity").name == "identity"
    with pytest.raises(ValueError):
        parse_channel_spec("dephasing")
    with pytest.raises(ValueError):
        parse_channel_spec("amplitude:q=0.5")
    with pytest.raises(ValueError):
        parse_channel_spec("depolarizing:q=1.5")


def test_parse_channel_map_overrides():
    chans = parse_channel_map("dephasing:q=0.9", ["2=depolarizing:q=0.8"],
                              nodes=(1, 2, 3))
    assert chans[1].name == "dephasing"
    assert chans[2].name == "depolarizing"
    assert chans[3].name == "dephasing"
    with pytest.raises(ValueError):
        parse_channel_map("identity", ["9=identity"], nodes=(1, 2, 3))


def test_spec_string_roundtrip():
    ch = depolarizing(0.8)
    again = parse_channel_spec(ch.spec_string())
    assert again.name == ch.name
    assert again.params == ch.params
