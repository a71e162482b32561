"""Single-qubit CPTP maps as Kraus operator sets.

Provides the two named noise families (dephasing, depolarizing), identity,
arbitrary user Kraus sets, per-qubit application to labeled registers, and
the induced-trace-norm distance between channels.
"""

from __future__ import annotations

from typing import List, Mapping

import numpy as np
from scipy.optimize import minimize

from .qcore import DensityMatrix, ID2, PAULI_X, PAULI_Y, PAULI_Z, apply_op_dense


class QuantumChannel:
    """Single-qubit channel defined by its Kraus operators.

    Args:
        kraus_ops: list of 2x2 complex arrays K_i with sum K_i† K_i = I
            (checked to 1e-12).
        name: short descriptor, e.g. "dephasing".
        params: named real parameters, e.g. {"q": 0.9}.
    """

    def __init__(self, kraus_ops: List[np.ndarray], name: str = "custom",
                 params: Mapping[str, float] | None = None):
        if not kraus_ops:
            raise ValueError("need at least one Kraus operator")
        self.kraus_ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
        for k in self.kraus_ops:
            if k.shape != (2, 2):
                raise ValueError("Kraus operators must be 2x2")
        total = sum(k.conj().T @ k for k in self.kraus_ops)
        if not np.allclose(total, ID2, atol=1e-12):
            raise ValueError("Kraus set is not trace preserving")
        self.name = name
        self.params = dict(params or {})

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        """Apply the channel to a bare 2x2 matrix (not necessarily a state)."""
        rho = np.asarray(rho, dtype=complex)
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def spec_string(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.name}:{inner}"

    def __repr__(self):
        return f"QuantumChannel({self.spec_string()})"


def identity_channel() -> QuantumChannel:
    return QuantumChannel([ID2], name="identity")


def dephasing(q: float) -> QuantumChannel:
    """Phase noise: keeps the state with probability q, applies Z otherwise.

    Kraus set {sqrt(q) I, sqrt(1-q) Z}.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q={q} outside [0, 1]")
    return QuantumChannel(
        [np.sqrt(q) * ID2, np.sqrt(1 - q) * PAULI_Z],
        name="dephasing", params={"q": q},
    )


def depolarizing(q: float) -> QuantumChannel:
    """White noise: q rho + (1-q) I/2 in the standard Pauli Kraus form."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q={q} outside [0, 1]")
    return QuantumChannel(
        [
            np.sqrt((1 + 3 * q) / 4) * ID2,
            np.sqrt((1 - q) / 4) * PAULI_X,
            np.sqrt((1 - q) / 4) * PAULI_Y,
            np.sqrt((1 - q) / 4) * PAULI_Z,
        ],
        name="depolarizing", params={"q": q},
    )


def apply_to(channel: QuantumChannel, rho: DensityMatrix, qubit) -> DensityMatrix:
    """Apply a single-qubit channel to one labeled qubit of a register."""
    acc = None
    for k in channel.kraus_ops:
        term = apply_op_dense(rho, k, [qubit])
        acc = term.mat if acc is None else acc + term.mat
    # CPTP: trace preserved, so the input's normalization status carries over
    return DensityMatrix(acc, rho.labels, unnormalized=rho.unnormalized)


def _bloch_ket(theta: float, phi: float) -> np.ndarray:
    return np.array(
        [np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex
    )


def _diff_norm(a: QuantumChannel, b: QuantumChannel, theta: float, phi: float) -> float:
    """1-norm of (a-b) applied to the pure state at Bloch angles (theta, phi).

    The difference of two CPTP maps is traceless Hermitian on Hermitian
    input, so the 2x2 norm is 2*sqrt(d^2 + |c|^2) for [[d, c], [c*, -d]].
    """
    v = _bloch_ket(theta, phi)
    rho = np.outer(v, v.conj())
    m = a(rho) - b(rho)
    d = m[0, 0].real
    c = m[0, 1]
    return float(2.0 * np.sqrt(d * d + (c * c.conjugate()).real))


def channel_distance(a: QuantumChannel, b: QuantumChannel,
                     grid_points: int = 1024, rel_tol: float = 1e-6) -> float:
    """Induced trace norm of the channel difference, max over pure inputs.

    Maximizing over pure states suffices: the difference map is linear and
    the trace norm is convex, so the maximum over the (convex) state space
    is attained at an extreme point.  A Fibonacci-sphere grid of at least
    1000 points seeds a local Nelder-Mead refinement to relative tolerance
    rel_tol.  The norm is the un-halved output trace norm.
    """
    golden = (1 + np.sqrt(5)) / 2
    i = np.arange(grid_points)
    theta = np.arccos(1 - 2 * (i + 0.5) / grid_points)
    phi = 2 * np.pi * i / golden

    best_val = 0.0
    best_angles = (0.0, 0.0)
    for t, p in zip(theta, phi):
        val = _diff_norm(a, b, t, p)
        if val > best_val:
            best_val = val
            best_angles = (t, p)
    if best_val < 1e-14:
        return 0.0

    res = minimize(
        lambda x: -_diff_norm(a, b, x[0], x[1]),
        np.array(best_angles),
        method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": best_val * rel_tol, "maxiter": 400},
    )
    return float(max(best_val, -res.fun))


def parse_channel_spec(spec: str) -> QuantumChannel:
    """Parse a channel spec string: `identity`, `dephasing:q=0.9`,
    `depolarizing:q=0.8`."""
    spec = spec.strip()
    if spec == "identity":
        return identity_channel()
    if ":" not in spec:
        raise ValueError(f"malformed channel spec {spec!r}")
    name, _, args = spec.partition(":")
    params = {}
    for part in args.split(","):
        key, _, val = part.partition("=")
        if not val:
            raise ValueError(f"malformed channel parameter {part!r} in {spec!r}")
        params[key.strip()] = float(val)
    name = name.strip()
    if name == "dephasing":
        return dephasing(params.pop("q"))
    if name == "depolarizing":
        return depolarizing(params.pop("q"))
    raise ValueError(f"unknown channel {name!r}")


def parse_channel_map(base_spec: str, overrides, nodes) -> dict:
    """Build a node -> QuantumChannel map from a base spec plus per-node
    overrides given as "3=depolarizing:q=0.75" strings."""
    base = parse_channel_spec(base_spec)
    chans = {node: base for node in nodes}
    for item in overrides:
        key, sep, spec = item.partition("=")
        if not sep or not key.strip() or not spec.strip():
            raise ValueError(f"override {item!r} must look like <node>=<spec>")
        try:
            node = int(key.strip())
        except ValueError as exc:
            raise ValueError(f"bad node id in override {item!r}") from exc
        if node not in chans:
            raise ValueError(f"override for unknown node {node}")
        chans[node] = parse_channel_spec(spec.strip())
    return chans
