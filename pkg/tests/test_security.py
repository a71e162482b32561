import numpy as np
import pytest

from anonqnet.channels import dephasing, depolarizing, identity_channel
from anonqnet.protocols import NetworkConfig
from anonqnet.qcore import DensityMatrix, make_w_state
from anonqnet.security import (
    AdversaryScenario,
    LabeledEnsemble,
    adversary_view,
    effective_roles,
    epsilon_security_bound,
    guessing_probability,
    independence_check,
    permutation_invariance_check,
    security_report,
)

KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
MIXED = np.eye(2, dtype=complex) / 2


def uniform(channel, n):
    return {i: channel for i in range(1, n + 1)}


def single_label(mat):
    v = LabeledEnsemble()
    v.add("x", 1.0, mat, ("carrier",))
    return v


# ---------------------------------------------------------------------------
# ensembles and measures


def test_labeled_ensemble_merges_same_label():
    v = LabeledEnsemble()
    v.add("a", 0.25, KET0, ("carrier",))
    v.add("a", 0.25, MIXED, ("carrier",))
    assert v.weight("a") == pytest.approx(0.5)
    merged = v.state("a").mat
    assert np.allclose(merged, (KET0 + MIXED) / 2)
    assert v.total_weight == pytest.approx(0.5)
    with pytest.raises(ValueError):
        v.add("a", 0.1, np.array([[1.0]]), ())


def test_independence_zero_for_identical_views():
    assert independence_check([single_label(KET0), single_label(KET0)]) == 0.0


def test_independence_sees_weight_and_state_gaps():
    a = LabeledEnsemble()
    a.add("x", 0.5, KET0, ("carrier",))
    a.add("y", 0.5, KET0, ("carrier",))
    b = LabeledEnsemble()
    b.add("x", 0.7, KET0, ("carrier",))
    b.add("y", 0.3, MIXED, ("carrier",))
    # tv = 0.2, worst per-label trace distance = 0.5
    assert independence_check([a, b]) == pytest.approx(0.7, abs=1e-12)


def test_guessing_probability_helstrom_anchor():
    # distinguishing |0><0| from I/2 at equal priors: 1/2 + 1/4 * 1
    p, cert = guessing_probability(
        [single_label(KET0), single_label(MIXED)], [0.5, 0.5])
    assert cert == "helstrom"
    assert p == pytest.approx(0.75, abs=1e-12)


def test_guessing_probability_orthogonal_states_certain():
    ket1 = np.array([[0, 0], [0, 1]], dtype=complex)
    p, cert = guessing_probability(
        [single_label(KET0), single_label(ket1)], [0.5, 0.5])
    assert cert == "helstrom"
    assert p == pytest.approx(1.0, abs=1e-12)


def test_guessing_probability_state_independence():
    p, cert = guessing_probability(
        [single_label(MIXED), single_label(MIXED)], [0.3, 0.7])
    assert cert == "state-independence"
    assert p == pytest.approx(0.7)


def test_guessing_probability_bound_only_three_views():
    plus = np.full((2, 2), 0.5, dtype=complex)
    ket1 = np.array([[0, 0], [0, 1]], dtype=complex)
    views = [single_label(KET0), single_label(ket1), single_label(plus)]
    p, cert = guessing_probability(views, [1 / 3] * 3)
    assert cert == "bound-only"
    # a bound, not an optimum: must dominate the best pairwise value
    two, _ = guessing_probability(views[:2], [0.5, 0.5])
    assert p >= 2 / 3 * two - 1e-12
    assert p >= 1 / 3


def test_guessing_probability_prior_validation():
    with pytest.raises(ValueError):
        guessing_probability([single_label(KET0)], [0.5, 0.5])
    with pytest.raises(ValueError):
        guessing_probability([single_label(KET0), single_label(KET0)],
                             [0.8, 0.8])


# ---------------------------------------------------------------------------
# role bookkeeping


def test_effective_roles_swap_rule():
    cfg = NetworkConfig(n_nodes=5, sender=1, receiver=2)
    assert effective_roles(cfg, 3, "sender") == (3, 2)
    assert effective_roles(cfg, 2, "sender") == (2, 1)
    assert effective_roles(cfg, 4, "receiver") == (1, 4)
    assert effective_roles(cfg, 1, "receiver") == (2, 1)
    with pytest.raises(ValueError):
        effective_roles(cfg, 3, "warden")


# ---------------------------------------------------------------------------
# adversary views


def test_adversary_view_weights_sum_to_one():
    cfg = NetworkConfig(n_nodes=5, sender=1, receiver=2,
                        per_qubit_channels=uniform(depolarizing(0.8), 5))
    view = adversary_view(cfg, AdversaryScenario(frozenset({3, 4})), 5)
    assert view.total_weight == pytest.approx(1.0, abs=1e-10)


def test_adversary_view_validation():
    cfg = NetworkConfig(n_nodes=5, sender=1, receiver=2)
    with pytest.raises(ValueError):
        adversary_view(cfg, AdversaryScenario(frozenset({3})), 3)
    with pytest.raises(ValueError):
        adversary_view(NetworkConfig(n_nodes=5, sender=1, receiver=2,
                                     lost_nodes={5}),
                       AdversaryScenario(frozenset({5})), 3)
    # receiver hypotheses need an honest sender
    with pytest.raises(ValueError):
        adversary_view(cfg, AdversaryScenario(frozenset({1})), 3,
                       role="receiver")
    big = NetworkConfig(n_nodes=8, sender=1, receiver=2)
    with pytest.raises(ValueError):
        adversary_view(big, AdversaryScenario(frozenset({3})), 4)


@pytest.mark.parametrize("role", ["sender", "receiver"])
@pytest.mark.parametrize("channel", [identity_channel(), dephasing(0.9),
                                     depolarizing(0.8)])
def test_uniform_network_views_are_hypothesis_independent(role, channel):
    n = 5
    cfg = NetworkConfig(n_nodes=n, sender=1, receiver=2,
                        per_qubit_channels=uniform(channel, n))
    scenario = AdversaryScenario(frozenset({4}))
    candidates = [c for c in cfg.live_nodes if c != 4
                  if effective_roles(cfg, c, role)[0] != 4]
    views = [adversary_view(cfg, scenario, c, role) for c in candidates]
    assert independence_check(views) <= 1e-10


def test_corrupt_receiver_still_independent_under_uniform_noise():
    n = 5
    cfg = NetworkConfig(n_nodes=n, sender=1, receiver=2,
                        per_qubit_channels=uniform(dephasing(0.9), n))
    rep = security_report(cfg, [2], role="sender")
    assert rep["certificate"] == "state-independence"
    assert rep["guessing_probability"] == pytest.approx(1 / 4, abs=1e-12)
    # carrier branches are actually present for a corrupt receiver
    view = adversary_view(cfg, AdversaryScenario(frozenset({2})), 3)
    assert any(lbl[-1] and lbl[-1][0] == "m" for lbl in view.labels())


# ---------------------------------------------------------------------------
# reports and bounds


@pytest.mark.parametrize("adv,n", [((3,), 5), ((3, 4), 5), ((2, 5), 6)])
def test_security_report_uniform_noise(adv, n):
    cfg = NetworkConfig(n_nodes=n, sender=1, receiver=n - 1 if n - 1 not in adv
                        else n, per_qubit_channels=uniform(depolarizing(0.8), n))
    rep = security_report(cfg, list(adv))
    t = len(adv)
    assert rep["independence_deviation"] <= 1e-10
    assert rep["guessing_probability"] == pytest.approx(1 / (n - t), abs=1e-12)
    assert rep["certificate"] == "state-independence"
    assert rep["uniform_prior"] == pytest.approx(1 / (n - t))
    assert len(rep["candidates"]) == n - t
    for w in rep["view_total_weights"]:
        assert w == pytest.approx(1.0, abs=1e-10)


def test_security_report_receiver_role():
    cfg = NetworkConfig(n_nodes=6, sender=2, receiver=5,
                        per_qubit_channels=uniform(dephasing(0.85), 6))
    rep = security_report(cfg, [3], role="receiver")
    assert rep["guessing_probability"] == pytest.approx(1 / 5, abs=1e-12)
    assert rep["certificate"] == "state-independence"


def test_perturbed_network_respects_epsilon_bound():
    n = 5
    base = dephasing(0.9)
    chans = uniform(base, n)
    chans[2] = dephasing(0.88)
    cfg = NetworkConfig(n_nodes=n, sender=1, receiver=2,
                        per_qubit_channels=chans)
    rep = security_report(cfg, [4], base_channel=base)
    eps = rep["epsilon_bound"]
    assert eps == pytest.approx(n * 2 * 0.02, abs=1e-5)
    assert rep["guessing_probability"] <= rep["uniform_prior"] + eps + 1e-9
    assert rep["bounded_guessing_probability"] == pytest.approx(
        rep["uniform_prior"] + eps)


def test_epsilon_bound_closed_forms():
    assert epsilon_security_bound(dephasing(0.9), {}) == 0.0
    got = epsilon_security_bound(
        dephasing(0.9), {1: dephasing(0.9), 2: dephasing(0.85)})
    assert got == pytest.approx(2 * 2 * 0.05, abs=1e-5)
    got = epsilon_security_bound(
        depolarizing(0.8), {i: depolarizing(0.75) for i in range(1, 4)})
    assert got == pytest.approx(3 * 0.05, abs=1e-5)


# ---------------------------------------------------------------------------
# permutation invariance


def test_w_state_is_permutation_invariant():
    rho = make_w_state(4, ("a", "b", "c", "d")).to_density()
    assert permutation_invariance_check(rho, ["a", "b", "c", "d"]) <= 1e-12


def test_asymmetric_state_flagged():
    mat = np.zeros((4, 4), dtype=complex)
    mat[1, 1] = 1.0  # |01> on (a, b)
    rho = DensityMatrix(mat, ("a", "b"))
    assert permutation_invariance_check(rho, ["a", "b"]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        permutation_invariance_check(rho, ["a", "z"])
