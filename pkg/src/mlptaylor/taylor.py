"""Exact network derivatives from layer propagators and rooted trees.

A layer propagator of order p is the next layer's weight matrix times
the p-th derivative of the current activation at its cached
pre-activation.  First derivatives of pre-activations are plain matrix
chains of first-order propagators; higher derivatives decompose into a
gated sum over arborescences, each evaluated by contracting a neuron
chain in which marked links are replaced by higher-order propagators
and multiplied elementwise by the child subtree values anchored there.

Orders 1..3 are the supported, cross-checked path; higher orders are
accepted but unoptimized.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from string import ascii_lowercase

import numpy as np

from .combin import (
    AdjacencyMatrix,
    alpha,
    block_assignments,
    children_by_bundle,
    enumerate_adjacency,
    out_degree,
    partitions,
    theta,
)
from .mlp import ForwardTrace, Mlp, ShapeError, forward
from .numkit import SymTensor, packed_index, packed_size


@dataclass
class PropagatorSet:
    """Cache of layer propagator matrices for one forward trace.

    ``d(l, p)`` is the order-p propagator of layer l (0-based input layer
    allowed), shape (dims[l+1], dims[l]); ``chain(l)`` is the first
    derivative of layer l's pre-activations with respect to the input,
    shape (dims[l], dims[0]).
    """

    net: Mlp
    trace: ForwardTrace
    p_max: int

    def __post_init__(self):
        dims = self.net.layer_dims
        L = self.net.n_layers
        self._d: dict[tuple[int, int], np.ndarray] = {}
        for l in range(L):
            w = self.net.weights[l]
            for p in range(self.p_max + 1):
                if l == 0:
                    if p == 0:
                        m = w * self.trace.x[None, :]
                    elif p == 1:
                        m = w.copy()
                    else:
                        m = np.zeros_like(w)
                else:
                    act = self.net.activations[l - 1]
                    m = w * act.deriv(p, self.trace.z(l))[None, :]
                self._d[(l, p)] = m
        self._chains: dict[int, np.ndarray] = {1: self.net.weights[0]}
        for l in range(2, L + 1):
            self._chains[l] = self._d[(l - 1, 1)] @ self._chains[l - 1]
        self.dims = dims

    def d(self, l: int, p: int) -> np.ndarray:
        """Order-p propagator of layer l."""
        if (l, p) not in self._d:
            raise KeyError(f"propagator ({l},{p}) not cached; p_max={self.p_max}")
        return self._d[(l, p)]

    def chain(self, l: int) -> np.ndarray:
        """First input derivative of layer-l pre-activations (1 <= l <= L)."""
        return self._chains[l]


def propagators(net: Mlp, trace: ForwardTrace, p_max: int) -> PropagatorSet:
    """Build all propagator matrices of orders 0..p_max for the trace."""
    return PropagatorSet(net=net, trace=trace, p_max=p_max)


def delta_chain(props: PropagatorSet, net: Mlp, l: int) -> np.ndarray:
    """First derivative of layer-l pre-activations w.r.t. the input.

    Shape (dims[l], dims[0]); for l = 1 this is just the first weight
    matrix.
    """
    if not 1 <= l <= net.n_layers:
        raise ValueError(f"layer {l} out of range 1..{net.n_layers}")
    return props.chain(l)


def _subtree_vertices(a: AdjacencyMatrix) -> dict[int, tuple[int, ...]]:
    """Ascending vertex ids per subtree.  Parents precede children in the
    numbering (edges only run to larger indices), so the root's subtree
    is 1..n and every subtree's smallest vertex is its root."""
    verts: dict[int, tuple[int, ...]] = {}

    def collect(c: int) -> tuple[int, ...]:
        if c not in verts:
            acc = [c]
            for children in children_by_bundle(a, c).values():
                for ch in children:
                    acc.extend(collect(ch))
            verts[c] = tuple(sorted(acc))
        return verts[c]

    collect(1)
    return verts


def arborescence_value(a: AdjacencyMatrix, props: PropagatorSet, l: int) -> np.ndarray:
    """Evaluate one arborescence at root layer l, ungated.

    Returns a dense tensor of shape (dims[l], H0, ..., H0) with one input
    axis per vertex, ordered by vertex number.  Each vertex contracts a
    neuron chain from the first layer up to its anchor layer; every
    outgoing edge bundle occupies a distinct chain slot below the anchor,
    where the link is promoted to a higher-order propagator and the child
    subtree values at that layer enter as elementwise factors.  Slots are
    summed over all admissible assignments; an empty assignment set means
    the vertex is saturated at that anchor and contributes zero.
    """
    h0 = props.dims[0]
    subtree = _subtree_vertices(a)
    memo: dict[tuple[int, int], np.ndarray] = {}

    def eval_vertex(c: int, anchor: int) -> np.ndarray:
        """Tensor (dims[anchor], H0^len(subtree[c])), input axes in
        ascending-vertex order."""
        key = (c, anchor)
        if key in memo:
            return memo[key]
        groups = children_by_bundle(a, c)
        n_bundles = out_degree(a, c)
        if n_bundles == 0:
            memo[key] = props.chain(anchor)
            return memo[key]

        verts = subtree[c]
        total = np.zeros((props.dims[anchor],) + (h0,) * len(verts))
        for slots in itertools.permutations(range(1, anchor), n_bundles):
            lowest = min(slots)
            u = props.chain(lowest)
            u_axes = [c]
            for i in range(lowest, anchor):
                if i in slots:
                    bundle = slots.index(i) + 1
                    children = groups[bundle]
                    for child in children:
                        t_child = eval_vertex(child, i)
                        u = (
                            u.reshape(u.shape + (1,) * (t_child.ndim - 1))
                            * t_child.reshape(
                                (t_child.shape[0],) + (1,) * (u.ndim - 1) + t_child.shape[1:]
                            )
                        )
                        u_axes.extend(subtree[child])
                    link = props.d(i, 1 + len(children))
                else:
                    link = props.d(i, 1)
                u = np.tensordot(link, u, axes=(1, 0))
            perm = [0] + [u_axes.index(v) + 1 for v in verts]
            total += np.transpose(u, perm)
        memo[key] = total
        return total

    return eval_vertex(1, l)


def delta_dense(props: PropagatorSet, l: int, n: int) -> np.ndarray:
    """Order-n input derivative of layer-l pre-activations, raw accumulation.

    Sum over all n-vertex arborescences whose saturation threshold the
    layer exceeds; shape (dims[l], H0, ..., H0).  Symmetric in the input
    axes up to floating-point round-off.
    """
    h0 = props.dims[0]
    out = np.zeros((props.dims[l],) + (h0,) * n)
    for a in enumerate_adjacency(n):
        if theta(l - alpha(a)):
            out += arborescence_value(a, props, l)
    return out


@dataclass
class DeltaTensor:
    """Packed symmetric order-p input-derivative tensor of one layer's
    pre-activations: values[m, packed(k_1..k_p)]."""

    layer: int
    order: int
    dim: int
    values: np.ndarray

    def dense(self) -> np.ndarray:
        out = np.empty((self.values.shape[0],) + (self.dim,) * self.order)
        for t, i in packed_index(self.dim, self.order).items():
            col = self.values[:, i]
            for perm in set(itertools.permutations(t)):
                out[(slice(None),) + perm] = col
        return out


def delta(props: PropagatorSet, net: Mlp, l: int, n: int) -> DeltaTensor:
    """Gated arborescence sum for the order-n derivative of layer l,
    symmetrized over input indices and packed."""
    if not 1 <= l <= net.n_layers:
        raise ValueError(f"layer {l} out of range 1..{net.n_layers}")
    raw = delta_dense(props, l, n)
    h0 = props.dims[0]
    packed = np.empty((raw.shape[0], packed_size(h0, n)))
    for t, i in packed_index(h0, n).items():
        perms = list(set(itertools.permutations(t)))
        packed[:, i] = sum(raw[(slice(None),) + p] for p in perms) / len(perms)
    return DeltaTensor(layer=l, order=n, dim=h0, values=packed)


def propagator_derivative(
    props: PropagatorSet, net: Mlp, l: int, p: int, n: int
) -> np.ndarray:
    """Order-n input derivative of the order-p propagator of layer l.

    Shape (dims[l+1], dims[l], H0, ..., H0): entry (i, m, k_1..k_n).
    Each derivative order splits across partitions of n; a partition of
    length c promotes the propagator by c orders and multiplies one
    pre-activation derivative factor per block, summed over the distinct
    index-block assignments.
    """
    h0 = props.dims[0]
    letters = ascii_lowercase[:n]
    deltas = {order: delta(props, net, l, order).dense() for order in range(1, n + 1)}
    out = np.zeros((props.dims[l + 1], props.dims[l]) + (h0,) * n)
    for c in range(1, n + 1):
        t_c = np.zeros((props.dims[l],) + (h0,) * n)
        for pi in partitions(n, c):
            for blocks in block_assignments(n, pi):
                subs = ",".join("z" + "".join(letters[pos - 1] for pos in blk) for blk in blocks)
                t_c += np.einsum(
                    subs + "->z" + letters, *[deltas[len(blk)] for blk in blocks]
                )
        d = props.d(l, p + c)
        out += d.reshape(d.shape + (1,) * n) * t_c[None, ...]
    return out


def n_contributing_terms(l: int, n: int) -> int:
    """Count of gated expansion terms open at layer depth l for order n:
    one term per (partition length, partition, block assignment, choice of
    contributing arborescence per block)."""
    diagrams = {
        k: sum(1 for a in enumerate_adjacency(k) if theta(l - alpha(a)))
        for k in range(1, n + 1)
    }
    total = 0
    for c in range(1, n + 1):
        for pi in partitions(n, c):
            n_assign = len(block_assignments(n, pi))
            prod = 1
            for part in pi.parts:
                prod *= diagrams[part]
            total += n_assign * prod
    return total


@dataclass
class TaylorCoeffs:
    """Derivatives of a scalar-output network at an expansion point.

    Tensors are raw derivatives (no factorial division); the order-k
    series term is 1/k! times the full contraction.
    """

    x0: np.ndarray
    value: float
    gradient: np.ndarray
    hessian: SymTensor | None = None
    third: SymTensor | None = None

    @property
    def order(self) -> int:
        if self.third is not None:
            return 3
        return 2 if self.hessian is not None else 1

    def hessian_dense(self) -> np.ndarray:
        if self.hessian is None:
            raise ValueError("no second-order coefficients present")
        return self.hessian.to_dense()

    def third_dense(self) -> np.ndarray:
        if self.third is None:
            raise ValueError("no third-order coefficients present")
        return self.third.to_dense()


def network_taylor(net: Mlp, x0, order: int = 2) -> TaylorCoeffs:
    """Value and derivatives of the network output at x0, exactly.

    The order-n derivative is the input derivative of the top-layer
    order-zero propagator row sum; saturation gates inside the layer
    derivative tensors drop exactly the tree terms a shallow network
    cannot produce.
    """
    if net.output_dim != 1:
        raise ShapeError(f"scalar output required, got output dim {net.output_dim}")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    x0 = np.asarray(x0, dtype=float)
    trace = forward(net, x0)
    props = propagators(net, trace, p_max=order)
    L = net.n_layers

    tensors = {}
    for n in range(1, order + 1):
        pd = propagator_derivative(props, net, L - 1, 0, n)
        tensors[n] = pd.sum(axis=1)[0]

    hess = SymTensor.from_dense(tensors[2], symmetrize=True) if order >= 2 else None
    third = SymTensor.from_dense(tensors[3], symmetrize=True) if order >= 3 else None
    return TaylorCoeffs(
        x0=x0,
        value=float(trace.output[0]),
        gradient=tensors[1],
        hessian=hess,
        third=third,
    )


@dataclass
class EnsembleTaylor:
    """Per-member derivative coefficients with cross-member mean and spread.

    The spread is the sample standard deviation among members (zero for a
    single member), kept entrywise for error bars.
    """

    x0: np.ndarray
    order: int
    members: list[TaylorCoeffs]

    def _stack(self, attr: str) -> np.ndarray:
        if attr == "value":
            return np.array([m.value for m in self.members])
        if attr == "gradient":
            return np.stack([m.gradient for m in self.members])
        if attr == "hessian":
            return np.stack([m.hessian_dense() for m in self.members])
        if attr == "third":
            return np.stack([m.third_dense() for m in self.members])
        raise ValueError(attr)

    def mean(self, attr: str) -> np.ndarray | float:
        out = self._stack(attr).mean(axis=0)
        return float(out) if attr == "value" else out

    def std(self, attr: str) -> np.ndarray | float:
        stacked = self._stack(attr)
        if stacked.shape[0] < 2:
            out = np.zeros(stacked.shape[1:])
        else:
            out = stacked.std(axis=0, ddof=1)
        return float(out) if attr == "value" else out


def ensemble_taylor(ens, x0, order: int = 2) -> EnsembleTaylor:
    """Coefficients of every ensemble member at x0 plus mean and spread.

    The ensemble prediction is the member mean, so its derivatives are
    the member-mean derivatives.
    """
    x0 = np.asarray(x0, dtype=float)
    members = [network_taylor(m, x0, order) for m in ens.members]
    return EnsembleTaylor(x0=x0, order=order, members=members)
