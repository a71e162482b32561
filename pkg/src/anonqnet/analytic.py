"""Closed-form fidelity and success-probability results for the anonymous
entanglement protocols, plus a structured evaluator that assembles the
post-selected sender-receiver pair state for arbitrary network size and
arbitrary single-qubit noise, and threshold root finding.

Formula conventions: q is the noise parameter (q=1 noiseless), n the node
count.  Fidelity is always against the protocol's maximally entangled
target; "useful" means fidelity strictly above 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import QuantumChannel
from .qcore import DensityMatrix, Ket, fidelity_with_pure, make_bell_pair

PAIR_LABELS = ("sender", "receiver")

W_DEPOL = "W_depol"
GHZ_DEPOL = "GHZ_depol"
W_DEPH = "W_deph"
GHZ_DEPH = "GHZ_deph"


@dataclass(frozen=True)
class FidelityReport:
    """Analytic summary for one (protocol, channel, n) point."""

    protocol: str  # "W" | "GHZ" | "W_loss"
    channel: str
    n_nodes: int
    fidelity: float
    success_probability: float

    def __post_init__(self):
        if not -1e-12 <= self.fidelity <= 1 + 1e-12:
            raise ValueError(f"fidelity {self.fidelity} outside [0,1]")
        if not -1e-12 <= self.success_probability <= 1 + 1e-12:
            raise ValueError(
                f"success probability {self.success_probability} outside [0,1]"
            )

    @property
    def useful(self) -> bool:
        return self.fidelity > 0.5


def f_ae_w_dephasing(q: float) -> float:
    """Pair fidelity for the W protocol under uniform dephasing; independent
    of the network size."""
    return 1 - 2 * q * (1 - q)


def f_ae_ghz_dephasing(q: float, n: int) -> float:
    return (1 + (2 * q - 1) ** n) / 2


def f_ae_w_depolarizing(q: float, n: int) -> float:
    return (1 + q) * (n * (q - 1) ** 2 + 4 * q * (1 + q)) / (4 * (n * (1 - q) + 4 * q))


def f_ae_ghz_depolarizing(q: float, n: int) -> float:
    return (2 * q**n + q**2 + 1) / 4


def p_success_w(channel: str, q: float, n: int) -> float:
    """Probability that all n-2 measuring nodes read 0 in the W protocol.

    Dephasing preserves computational-basis populations, so the value is
    exactly 2/n for every q.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    if channel == "dephasing":
        return 2.0 / n
    if channel == "depolarizing":
        return (q + 1) ** (n - 3) * (n * (1 - q) + 4 * q) / (n * 2 ** (n - 2))
    raise ValueError(f"unsupported channel {channel!r}")


def f_ae_w_loss(channel: str, q: float, n: int) -> float:
    """Closed-form pair fidelity for the W protocol with one lost measuring
    node.

    Note on semantics: this is the loss-branch-averaged fidelity
    ((n-1)/n) * F_noloss(q, n) + (1/n) * <pair| L(|0><0|) x L(|0><0|) |pair>,
    i.e. the no-loss fidelity mixed with the lost-excitation term at the
    a-priori loss weights.  It is NOT the fidelity of the conditional
    post-selected state (run the protocol simulator for that); at q=1 the
    conditional value is 2/3 while this average is (n-1)/n.
    """
    if n < 4:
        raise ValueError("need n >= 4 with one lost measuring node")
    if channel == "dephasing":
        return (n - 1) / n * (1 - 2 * q * (1 - q))
    if channel == "depolarizing":
        return (
            (1 + q)
            * (n**2 * (q - 1) ** 2 - 8 * q**2 + 4 * n * q * (1 + q))
            / (4 * n * (n * (1 - q) + 4 * q))
        )
    raise ValueError(f"unsupported channel {channel!r}")


def p_success_w_loss(channel: str, q: float, n: int) -> float:
    """Exact Born weight of the all-zeros branch with one lost measuring
    node: the survivors hold ((n-1)/n) W_{n-1} + (1/n) vacuum, so the weight
    is ((n-1)/n) P_noloss(n-1) + (1/n) tr00^(n-3).  Equals 3/n at q=1."""
    if n < 4:
        raise ValueError("need n >= 4 with one lost measuring node")
    if channel == "dephasing":
        tr00_pow = 1.0
    elif channel == "depolarizing":
        tr00_pow = ((1 + q) / 2) ** (n - 3)
    else:
        raise ValueError(f"unsupported channel {channel!r}")
    return (n - 1) / n * p_success_w(channel, q, n - 1) + tr00_pow / n


@dataclass(frozen=True)
class ChannelMoments:
    """Action of a single-qubit channel on the four basis matrix units.

    out_xy is the channel output on |x><y|; tr_xy its <0|.|0> entry.  These
    eight numbers/matrices are all the structured evaluators need, so any
    user-defined channel works, not only the named ones.
    """

    out00: np.ndarray
    out01: np.ndarray
    out10: np.ndarray
    out11: np.ndarray
    tr00: complex
    tr01: complex
    tr10: complex
    tr11: complex

    def __post_init__(self):
        for mat, tr in ((self.out00, self.tr00), (self.out01, self.tr01),
                        (self.out10, self.tr10), (self.out11, self.tr11)):
            if abs(mat[0, 0] - tr) > 1e-12:
                raise ValueError("tr_xy must equal <0|out_xy|0>")
        for mat in (self.out00, self.out11):
            if abs(np.trace(mat) - 1) > 1e-12:
                raise ValueError("out00/out11 must be unit trace")
            if np.min(np.linalg.eigvalsh((mat + mat.conj().T) / 2)) < -1e-10:
                raise ValueError("out00/out11 must be positive semidefinite")


def channel_moments(channel: QuantumChannel) -> ChannelMoments:
    units = {}
    for x in range(2):
        for y in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[x, y] = 1.0
            units[(x, y)] = channel(e)
    return ChannelMoments(
        out00=units[(0, 0)], out01=units[(0, 1)],
        out10=units[(1, 0)], out11=units[(1, 1)],
        tr00=complex(units[(0, 0)][0, 0]), tr01=complex(units[(0, 1)][0, 0]),
        tr10=complex(units[(1, 0)][0, 0]), tr11=complex(units[(1, 1)][0, 0]),
    )


def w_postselected_pair(moments: ChannelMoments, n: int) -> tuple[DensityMatrix, float]:
    """Sender-receiver pair state after the W protocol's post-selection,
    assembled combinatorially from channel moments.

    The W state has one excitation spread over n qubits; conditioning the
    n-2 measured qubits on |0> leaves six families of terms, indexed by
    where the |1> bra/ket indices sit (both measured, one measured, none).
    Collecting them with multiplicities:

        (n-2)(n-3) tr01 tr10 tr00^(n-4) out00 x out00
      + (n-2) tr10 tr00^(n-3) (out01 x out00 + out00 x out01)
      + (n-2) tr01 tr00^(n-3) (out10 x out00 + out00 x out10)
      + (n-2) tr11 tr00^(n-3) out00 x out00
      + tr00^(n-2) (out01 x out10 + out10 x out01
                    + out00 x out11 + out11 x out00)

    divided by n (the W normalization).  The trace of that matrix is the
    success probability; the normalized matrix is the pair state.  Requires
    n >= 4 because of the (n-3) multiplicity; use the dense pipeline for
    n=3.
    """
    if n < 4:
        raise ValueError("structured evaluation needs n >= 4; use the dense oracle")
    m = moments
    t00 = m.tr00
    acc = (n - 2) * (n - 3) * m.tr01 * m.tr10 * t00 ** (n - 4) * np.kron(m.out00, m.out00)
    acc = acc + (n - 2) * m.tr10 * t00 ** (n - 3) * (
        np.kron(m.out01, m.out00) + np.kron(m.out00, m.out01)
    )
    acc = acc + (n - 2) * m.tr01 * t00 ** (n - 3) * (
        np.kron(m.out10, m.out00) + np.kron(m.out00, m.out10)
    )
    acc = acc + (n - 2) * m.tr11 * t00 ** (n - 3) * np.kron(m.out00, m.out00)
    acc = acc + t00 ** (n - 2) * (
        np.kron(m.out01, m.out10) + np.kron(m.out10, m.out01)
        + np.kron(m.out00, m.out11) + np.kron(m.out11, m.out00)
    )
    acc = acc / n
    weight = float(np.real(np.trace(acc)))
    state = DensityMatrix(acc / weight, PAIR_LABELS)
    return state, weight


def ghz_postselected_pair(channel: QuantumChannel, n: int) -> tuple[DensityMatrix, float]:
    """Sender-receiver pair state for the GHZ protocol's all-|+> branch.

    The GHZ state has two global components; projecting each measured qubit
    onto |+> factorizes into <+|.|+> moments:

        (1/2) [ p00^(n-2) out00 x out00 + p01^(n-2) out01 x out01
              + p10^(n-2) out10 x out10 + p11^(n-2) out11 x out11 ]

    with p_xy = <+|channel(|x><y|)|+>.  The returned weight is that of the
    single all-|+> branch; the protocol corrects every other branch onto the
    same state, so the protocol-level success probability is 1.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    units = {}
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    for x in range(2):
        for y in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[x, y] = 1.0
            units[(x, y)] = channel(e)
    p = {k: complex(plus.conj() @ v @ plus) for k, v in units.items()}
    acc = 0.5 * (
        p[(0, 0)] ** (n - 2) * np.kron(units[(0, 0)], units[(0, 0)])
        + p[(0, 1)] ** (n - 2) * np.kron(units[(0, 1)], units[(0, 1)])
        + p[(1, 0)] ** (n - 2) * np.kron(units[(1, 0)], units[(1, 0)])
        + p[(1, 1)] ** (n - 2) * np.kron(units[(1, 1)], units[(1, 1)])
    )
    weight = float(np.real(np.trace(acc)))
    state = DensityMatrix(acc / weight, PAIR_LABELS)
    return state, weight


def fidelity_report(protocol: str, channel: str, q: float, n: int) -> FidelityReport:
    """Closed-form FidelityReport for the named protocol/channel families."""
    if protocol == "W":
        if channel == "dephasing":
            f = f_ae_w_dephasing(q)
        elif channel == "depolarizing":
            f = f_ae_w_depolarizing(q, n)
        else:
            raise ValueError(f"unsupported channel {channel!r}")
        p = p_success_w(channel, q, n)
    elif protocol == "GHZ":
        if channel == "dephasing":
            f = f_ae_ghz_dephasing(q, n)
        elif channel == "depolarizing":
            f = f_ae_ghz_depolarizing(q, n)
        else:
            raise ValueError(f"unsupported channel {channel!r}")
        p = 1.0  # deterministic: every measurement branch is corrected
    elif protocol == "W_loss":
        f = f_ae_w_loss(channel, q, n)
        p = p_success_w_loss(channel, q, n)
    else:
        raise ValueError(f"unsupported protocol {protocol!r}")
    return FidelityReport(protocol, f"{channel}:q={q:g}", n, f, p)


_FORMULAS = {
    W_DEPOL: lambda q, n: f_ae_w_depolarizing(q, n),
    GHZ_DEPOL: lambda q, n: f_ae_ghz_depolarizing(q, n),
    W_DEPH: lambda q, n: f_ae_w_dephasing(q),
    GHZ_DEPH: lambda q, n: f_ae_ghz_dephasing(q, n),
}


def threshold_q(formula: str, n: int, tol: float = 1e-12) -> float:
    """Smallest q in [0.5, 1] with pair fidelity 1/2 (usefulness threshold).

    All supported formulas are nondecreasing in q on [0.5, 1], so when the
    left edge already sits at or above 1/2 (the dephasing forms touch 1/2
    exactly at q=0.5) the threshold is the edge itself; otherwise plain
    bisection finds the unique crossing.  The search is restricted to
    [0.5, 1] because the dephasing-W formula is symmetric about q=0.5 and
    the interesting regime is high q.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    if formula not in _FORMULAS:
        raise ValueError(f"unknown formula {formula!r}")
    f = _FORMULAS[formula]
    g = lambda q: f(q, n) - 0.5
    if g(1.0) < 0:
        raise ValueError("fidelity below 1/2 at q=1; no usefulness threshold")
    lo, hi = 0.5, 1.0
    if g(lo) >= -1e-12:
        return 0.5
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if g(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def crossover_n(n_max: int = 400) -> int:
    """Smallest network size at which the W protocol's depolarizing
    usefulness threshold exceeds the GHZ protocol's."""
    for n in range(4, n_max + 1):
        if threshold_q(W_DEPOL, n) > threshold_q(GHZ_DEPOL, n):
            return n
    raise RuntimeError(f"no crossover found up to n={n_max}")


def pair_target(protocol: str) -> Ket:
    """Maximally entangled target the fidelity is measured against:
    (|01>+|10>)/sqrt(2) for the W protocol, (|00>+|11>)/sqrt(2) otherwise."""
    kind = "psi+" if protocol == "W" or protocol == "W_loss" else "phi+"
    return make_bell_pair(PAIR_LABELS, kind=kind)


def f_ae_relay_depolarizing(q: float, n: int, sender: int, receiver: int) -> float:
    """Pair fidelity of the Bell-pair relay under uniform depolarizing noise.

    Every transmitted half crosses one channel, so the link left of the
    first special node carries q**(s-1), the middle stretch q**(r-s), and
    the right stretch q**(n-r) (positions 1-based along the chain).  A
    depolarizing survivor contributes perfect correlation; the orthogonal
    Pauli part averages to 1/2 across the middle stretch and to 1/4 when
    the middle itself depolarized.
    """
    if not 1 <= sender <= n or not 1 <= receiver <= n or sender == receiver:
        raise ValueError("relay endpoints must be distinct chain positions")
    s, r = sorted((sender, receiver))
    p_left = q ** (s - 1)
    p_mid = q ** (r - s)
    p_right = q ** (n - r)
    return (p_left * p_mid * p_right
            + p_mid / 2 * (1 - p_left * p_right)
            + (1 - p_mid) / 4)


def structured_fidelity(protocol: str, channel: QuantumChannel, n: int) -> float:
    """Fidelity of the structured pair state against the protocol target."""
    if protocol == "W":
        state, _ = w_postselected_pair(channel_moments(channel), n)
    elif protocol == "GHZ":
        state, _ = ghz_postselected_pair(channel, n)
    else:
        raise ValueError(f"unsupported protocol {protocol!r}")
    return fidelity_with_pure(state, pair_target(protocol))
