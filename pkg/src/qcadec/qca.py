"""Quantum cellular automata on a ring given as dense unitaries.

Input site n sits at position n. Output physical site m sits at position
m − out_offset, so with out_offset = 1/2 the outputs live on the half-shifted
ring. A radius-r map may only send information from input n to outputs
within distance r of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import get_settings
from .errors import DimensionMismatch
from .linalg import (
    clock_and_shift,
    dagger,
    embed_site,
    haar_unitary,
    permute_tensor_factors,
    phase_fidelity,
)
from .partition import cyclic_distance, to_quarters


@dataclass
class QcaMap:
    unitary: np.ndarray
    in_dims: list
    out_dims: list
    out_offset: Fraction = Fraction(0)
    radius: Fraction = Fraction(0)
    in_offset: Fraction = Fraction(0)
    # generators of each site algebra in the map's own coordinates; only
    # needed when the sites are not plain tensor factors
    in_generators: list | None = field(default=None, repr=False)
    out_generators: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.unitary = np.asarray(self.unitary, dtype=complex)
        self.in_dims = [int(x) for x in self.in_dims]
        self.out_dims = [int(x) for x in self.out_dims]
        self.out_offset = Fraction(self.out_offset).limit_denominator(8)
        self.radius = Fraction(self.radius).limit_denominator(8)
        self.in_offset = Fraction(self.in_offset).limit_denominator(8)

    @property
    def N(self) -> int:
        return len(self.in_dims)

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]

    def in_position(self, n: int) -> int:
        return to_quarters(n + self.in_offset)

    def out_position(self, m: int) -> int:
        return to_quarters(m - self.out_offset)

    def allowed(self, n: int, m: int, r) -> bool:
        return cyclic_distance(self.in_position(n), self.out_position(m), self.N) <= Fraction(r)


@dataclass
class InfluencePair:
    input_site: int
    output_site: int
    violated: bool
    witness: np.ndarray | None = field(default=None, repr=False)


def check_dimensions(q: QcaMap) -> None:
    d = q.unitary.shape
    if d[0] != d[1]:
        raise DimensionMismatch("unitary is not square")
    if q.in_generators is None and int(np.prod(q.in_dims)) != d[1]:
        raise DimensionMismatch(f"input dims {q.in_dims} do not multiply to {d[1]}")
    if q.out_generators is None and int(np.prod(q.out_dims)) != d[0]:
        raise DimensionMismatch(f"output dims {q.out_dims} do not multiply to {d[0]}")
    if len(q.in_dims) != len(q.out_dims):
        raise DimensionMismatch("input and output rings differ in size")


def site_generators(dims, site: int) -> list[np.ndarray]:
    clock, shift = clock_and_shift(dims[site])
    return [embed_site(clock, site, dims), embed_site(shift, site, dims)]


def radius_check_algebraic(q: QcaMap, r=None) -> tuple[bool, list[InfluencePair]]:
    """Heisenberg-picture check: U g U† commutes with every output site outside the cone.

    Every generator of every input site algebra is conjugated and tested
    against the generators of every output site farther than ``r``.
    """
    check_dimensions(q)
    r = q.radius if r is None else Fraction(r)
    u = q.unitary
    tol = get_settings().tol
    in_gens = q.in_generators or [site_generators(q.in_dims, n) for n in range(q.N)]
    out_gens = q.out_generators or [site_generators(q.out_dims, m) for m in range(q.N)]
    pairs, ok = [], True
    for n in range(q.N):
        images = [(g, u @ g @ dagger(u)) for g in in_gens[n]]
        for m in range(q.N):
            if q.allowed(n, m, r):
                continue
            witness = None
            for g, img in images:
                for h in out_gens[m]:
                    scale = np.linalg.norm(img) * np.linalg.norm(h)
                    if np.linalg.norm(img @ h - h @ img) > 1e3 * tol * max(scale, 1.0):
                        witness = g
                        break
                if witness is not None:
                    break
            pairs.append(InfluencePair(n, m, witness is not None, witness))
            ok = ok and witness is None
    return ok, pairs


def radius_check_channel(q: QcaMap, r=None) -> bool:
    """Schrödinger-picture check: the reduced output state at a far site ignores the input site.

    The rest of the input is maximally entangled with a reference so that every
    possible state of it is covered at once; the input site runs over all
    matrix units |a⟩⟨b|.
    """
    check_dimensions(q)
    if q.in_generators is not None or q.out_generators is not None:
        raise DimensionMismatch("the channel check needs tensor-factor sites")
    r = q.radius if r is None else Fraction(r)
    N, u = q.N, q.unitary
    tol = get_settings().tol
    t = u.reshape(q.out_dims + q.in_dims)
    for n in range(N):
        dn = q.in_dims[n]
        rest = int(np.prod(q.in_dims)) // dn
        tn = np.moveaxis(t, N + n, N)
        for m in range(N):
            if q.allowed(n, m, r):
                continue
            tm = np.moveaxis(tn, m, 0)
            dm = q.out_dims[m]
            v = tm.reshape(dm, -1, dn, rest)
            ref = None
            for a in range(dn):
                for b in range(dn):
                    rho = np.einsum("xoi,yoj->xiyj", v[:, :, a, :], np.conj(v[:, :, b, :]))
                    rho = rho.reshape(dm * rest, dm * rest) / rest
                    if a != b:
                        if np.linalg.norm(rho) > 1e3 * tol * max(1.0, np.sqrt(dm)):
                            return False
                    elif ref is None:
                        ref = rho
                    elif np.linalg.norm(rho - ref) > 1e3 * tol * max(1.0, np.sqrt(dm)):
                        return False
    return True


# ----------------------------------------------------------------------
# constructions


@dataclass
class BrickLayer:
    """One radius-1/2 step of a brick circuit.

    Input site j is reshaped as C^{a_j} ⊗ C^{b_j}; gate j then acts on
    C^{b_j} ⊗ C^{a_{j+1}} and becomes one output site.
    """

    splits: list
    gates: list

    def in_dims(self) -> list[int]:
        return [a * b for a, b in self.splits]

    def out_dims(self) -> list[int]:
        n = len(self.splits)
        return [self.splits[j][1] * self.splits[(j + 1) % n][0] for j in range(n)]


def brick_layer_unitary(layer: BrickLayer, out_shift: int) -> np.ndarray:
    """Dense unitary of one layer; gate j lands on physical output j + out_shift."""
    n = len(layer.splits)
    halves = []
    for a, b in layer.splits:
        halves += [a, b]
    d = int(np.prod(halves))
    order = [(2 * j + 1 + k) % (2 * n) for j in range(n) for k in range(2)]
    eye = np.eye(d, dtype=complex).reshape(halves + [d])
    regroup = np.transpose(eye, order + [2 * n]).reshape(d, d)
    gates = np.eye(1, dtype=complex)
    for g in layer.gates:
        gates = np.kron(gates, g)
    out = layer.out_dims()
    perm = [(m - out_shift) % n for m in range(n)]
    return permute_tensor_factors(gates @ regroup, out, perm, side="out")


def from_brick_circuit(layers) -> QcaMap:
    """Compose brick layers; the radius is half the number of layers."""
    layers = list(layers)
    if not layers:
        raise ValueError("need at least one layer")
    dims = layers[0].in_dims()
    d = int(np.prod(dims))
    u = np.eye(d, dtype=complex)
    offset = Fraction(0)
    for layer in layers:
        if layer.in_dims() != dims:
            raise DimensionMismatch("layer input does not match previous output")
        n = len(dims)
        for j, g in enumerate(layer.gates):
            if g.shape[0] != layer.out_dims()[j]:
                raise DimensionMismatch(f"gate {j} has the wrong size")
        shift = 1 if offset == 0 else 0
        u = brick_layer_unitary(layer, shift) @ u
        out = layer.out_dims()
        dims = [out[(m - shift) % n] for m in range(n)]
        offset = (offset + Fraction(1, 2)) % 1
    return QcaMap(u, layers[0].in_dims(), dims, offset, Fraction(len(layers), 2))


def shift_qca(N: int, site_dim: int) -> QcaMap:
    """Shift of every site one step along the ring (radius 1/2, outputs half-shifted)."""
    from .partition import cyclic_shift_unitary

    dims = [site_dim] * N
    return QcaMap(cyclic_shift_unitary(dims), dims, dims, Fraction(1, 2), Fraction(1, 2))


def invert(q: QcaMap) -> QcaMap:
    """Inverse map, re-indexed so that its inputs sit on the integer ring."""
    check_dimensions(q)
    rot = int(2 * q.out_offset) % q.N if q.out_offset else 0
    u = dagger(q.unitary)
    n = q.N
    perm = [(m - rot) % n for m in range(n)]
    u = permute_tensor_factors(u, q.in_dims, perm, side="out")
    out_dims = [q.in_dims[(m - rot) % n] for m in range(n)]
    return QcaMap(u, list(q.out_dims), out_dims, q.out_offset, q.radius)


def is_translation_invariant(q: QcaMap, tol: float = 1e-8) -> bool:
    """U commutes with the cyclic shift up to a global phase."""
    from .partition import cyclic_shift_unitary

    if len(set(q.in_dims)) != 1 or len(set(q.out_dims)) != 1:
        return False
    s_in = cyclic_shift_unitary(q.in_dims)
    s_out = cyclic_shift_unitary(q.out_dims)
    return phase_fidelity(q.unitary @ s_in, s_out @ q.unitary) >= 1 - tol


def random_brick(N: int, dims, layers: int, rng: np.random.Generator, qubit_output: bool = False) -> tuple[QcaMap, list]:
    """Random brick circuit with random splits and Haar gates.

    With ``qubit_output`` every layer after the first picks splits that bring
    the output back to qubits whenever that is possible.
    """
    dims = list(dims) if not np.isscalar(dims) else [int(dims)] * N
    out = []
    current = list(dims)
    offset = Fraction(0)
    for k in range(layers):
        splits = None
        if qubit_output and k == layers - 1:
            splits = _splits_towards(current, 2, rng)
        if splits is None:
            splits = [_random_split(x, rng) for x in current]
        layer = BrickLayer(splits, [])
        layer.gates = [haar_unitary(x, rng) for x in layer.out_dims()]
        out.append(layer)
        shift = 1 if offset == 0 else 0
        o = layer.out_dims()
        current = [o[(m - shift) % N] for m in range(N)]
        offset = (offset + Fraction(1, 2)) % 1
    return from_brick_circuit(out), out


def random_ti_brick(N: int, site_dim: int, layers: int, rng: np.random.Generator, split=None) -> tuple[QcaMap, list]:
    """Translation-invariant brick circuit: one split and one gate per layer."""
    out = []
    current = site_dim
    for _ in range(layers):
        a, b = split if split is not None else _random_split(current, rng, proper=True)
        gate = haar_unitary(b * a, rng)
        out.append(BrickLayer([(a, b)] * N, [gate] * N))
        current = b * a
        split = None
    return from_brick_circuit(out), out


def _divisors(x: int) -> list[int]:
    return [k for k in range(1, x + 1) if x % k == 0]


def _random_split(x: int, rng, proper: bool = False) -> tuple[int, int]:
    divs = _divisors(x)
    if proper and len(divs) > 2:
        divs = divs[1:-1]
    a = int(rng.choice(divs))
    return a, x // a


def _splits_towards(current, target: int, rng):
    """Splits (a_j, b_j) of ``current`` with b_j a_{j+1} = target for all j, if any."""
    n = len(current)
    for a0 in rng.permutation(_divisors(current[0])):
        splits = [(int(a0), current[0] // int(a0))]
        ok = True
        for j in range(1, n + 1):
            b_prev = splits[-1][1]
            if target % b_prev:
                ok = False
                break
            a = target // b_prev
            if j == n:
                ok = a == splits[0][0]
                break
            if current[j] % a:
                ok = False
                break
            splits.append((a, current[j] // a))
        if ok:
            return splits
    return None


def product_qca(unitaries) -> QcaMap:
    """Radius-zero map ⊗ u_n."""
    u = np.eye(1, dtype=complex)
    for x in unitaries:
        u = np.kron(u, x)
    dims = [x.shape[0] for x in unitaries]
    return QcaMap(u, dims, dims, 0, 0)


def controlled_phase_ring(N: int) -> QcaMap:
    """Product of controlled-Z gates on all nearest-neighbour qubit pairs (radius 1)."""
    d = 2**N
    idx = np.arange(d)
    bits = (idx[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1
    parity = sum(bits[:, j] * bits[:, (j + 1) % N] for j in range(N))
    return QcaMap(np.diag((-1.0) ** parity).astype(complex), [2] * N, [2] * N, 0, 1)
