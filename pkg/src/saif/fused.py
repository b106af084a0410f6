"""Tree-structured fused LASSO through a column reparameterization.

The fused problem penalizes differences across the edges of a feature tree,
``sum_j f(x_j beta, y_j) + lam * sum_{(a, b) in E} |beta_a - beta_b|``. With
``D`` the edge-node incidence matrix (row ``e`` is ``beta_a - beta_b``) there
is a ``p x p`` matrix ``T`` with entries in {-1, 0, 1} such that
``D T = [I | 0]``. Substituting ``beta = T [beta_tilde; b]`` turns the
problem into an ordinary LASSO on ``X T`` whose last coordinate ``b`` is
unpenalized.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import engine
from .cm import minimize_offset
from .dual import scaled_tau
from .engine import SaifConfig
from .exceptions import DimensionError, ValidationError
from .losses import DesignMatrix, Loss, Problem, loss_grad, loss_value
from .results import Counters, SolveResult, Trace


class FeatureTree:
    """Undirected tree over ``p`` features.

    Parameters
    ----------
    p : int
        Number of nodes.
    edges : sequence of (int, int)
        Zero-based node pairs. Edge ``(a, b)`` contributes ``|beta_a - beta_b|``.
    root : int, optional
        Root used for the reparameterization. Defaults to the node of
        largest degree (smallest index on ties), which keeps the subtree
        sums shallow.

    Raises
    ------
    ValidationError
        With a message naming the defect when the edges do not form a tree.
    """

    def __init__(self, p: int, edges, root: int | None = None):
        p = int(p)
        if p < 1:
            raise ValidationError(f"a tree needs at least one node, got p={p}")
        edges = [(int(a), int(b)) for a, b in edges]
        if len(edges) != p - 1:
            raise ValidationError(f"wrong edge count: a tree on {p} nodes has {p - 1} edges, got {len(edges)}")
        seen = set()
        parent = list(range(p))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for k, (a, b) in enumerate(edges):
            for v in (a, b):
                if not 0 <= v < p:
                    raise ValidationError(f"edge {k} references node {v}, out of range for p={p}")
            if a == b:
                raise ValidationError(f"edge {k} is a self-loop on node {a}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValidationError(f"duplicate edge {a}-{b}")
            seen.add(key)
            ra, rb = find(a), find(b)
            if ra == rb:
                raise ValidationError(f"edge {k} ({a}-{b}) closes a cycle")
            parent[ra] = rb
        roots = {find(i) for i in range(p)}
        if len(roots) > 1:
            # unreachable with p - 1 acyclic edges, kept for clarity
            raise ValidationError(f"graph is disconnected ({len(roots)} components)")
        self.p = p
        self.edges = edges
        self.adjacency = [[] for _ in range(p)]
        for k, (a, b) in enumerate(edges):
            self.adjacency[a].append((b, k))
            self.adjacency[b].append((a, k))
        if root is None:
            deg = np.array([len(nb) for nb in self.adjacency])
            root = int(np.argmax(deg))
        if not 0 <= int(root) < p:
            raise ValidationError(f"root {root} out of range for p={p}")
        self.root = int(root)

    def __repr__(self):
        return f"FeatureTree(p={self.p}, n_edges={len(self.edges)}, root={self.root})"

    def __eq__(self, other):
        return (isinstance(other, FeatureTree) and self.p == other.p
                and self.edges == other.edges and self.root == other.root)

    def incidence_matrix(self) -> sp.csr_matrix:
        """Sparse ``(p - 1) x p`` matrix ``D`` with ``(D beta)_e = beta_a - beta_b``."""
        m = len(self.edges)
        rows = np.repeat(np.arange(m), 2)
        cols = np.array([v for e in self.edges for v in e], dtype=np.intp).reshape(-1)
        vals = np.tile([1, -1], m)
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, self.p), dtype=np.int64)

    def penalty(self, beta) -> float:
        """``sum_{(a, b)} |beta_a - beta_b|``."""
        beta = np.asarray(beta, dtype=float)
        if not self.edges:
            return 0.0
        e = np.asarray(self.edges)
        return float(np.abs(beta[e[:, 0]] - beta[e[:, 1]]).sum())

    def bfs(self, root=None):
        """Node order, parent node and parent edge from a breadth-first search."""
        root = self.root if root is None else int(root)
        order = []
        parent = np.full(self.p, -1)
        parent_edge = np.full(self.p, -1)
        visited = np.zeros(self.p, dtype=bool)
        visited[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w, k in self.adjacency[v]:
                if not visited[w]:
                    visited[w] = True
                    parent[w] = v
                    parent_edge[w] = k
                    queue.append(w)
        return np.array(order), parent, parent_edge


@dataclass
class TransformMatrix:
    """Column transform ``T`` with ``D T = [I | 0]``.

    Column ``e < p - 1`` is ``signs[e]`` times the indicator of the subtree
    hanging below edge ``e`` (rooted at ``child[e]``); the last column is
    all ones.
    """

    T: sp.csc_matrix
    signs: np.ndarray
    child: np.ndarray
    root: int
    order: np.ndarray = field(repr=False)
    parent: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return self.T.shape[0]

    def to_original(self, beta_tilde, b) -> np.ndarray:
        """``T [beta_tilde; b]``, computed as root-to-leaf path sums."""
        beta_tilde = np.asarray(beta_tilde, dtype=float)
        if beta_tilde.shape != (self.p - 1,):
            raise DimensionError(f"beta_tilde has shape {beta_tilde.shape}, expected ({self.p - 1},)")
        out = np.empty(self.p)
        node_val = np.zeros(self.p)
        node_val[self.child] = self.signs * beta_tilde
        for v in self.order:
            out[v] = float(b) + node_val[v] if v == self.root else out[self.parent[v]] + node_val[v]
        return out


def build_transform(tree: FeatureTree, root: int | None = None) -> TransformMatrix:
    """Build ``T`` for ``tree`` rooted at ``root`` (default ``tree.root``)."""
    root = tree.root if root is None else int(root)
    if not 0 <= root < tree.p:
        raise ValidationError(f"root {root} out of range for p={tree.p}")
    order, parent, parent_edge = tree.bfs(root)
    p = tree.p
    m = p - 1
    child = np.empty(m, dtype=np.intp)
    signs = np.empty(m, dtype=np.int64)
    for v in order[1:]:
        e = parent_edge[v]
        child[e] = v
        signs[e] = 1 if tree.edges[e][0] == v else -1
    # subtree membership: walk every node up to the root
    rows, cols, vals = [], [], []
    for v in range(p):
        u = v
        while u != root:
            e = parent_edge[u]
            rows.append(v)
            cols.append(e)
            vals.append(signs[e])
            u = parent[u]
    rows.extend(range(p))
    cols.extend([m] * p)
    vals.extend([1] * p)
    T = sp.csc_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=(p, p))
    return TransformMatrix(T=T, signs=signs, child=child, root=root, order=order, parent=parent)


def transform_design(X, transform: TransformMatrix) -> DesignMatrix:
    """``X T`` by accumulating subtree column sums (no dense product)."""
    data = X.data if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    if data.ndim != 2 or data.shape[1] != transform.p:
        raise DimensionError(f"X has shape {data.shape}, expected (n, {transform.p})")
    sums = np.array(data, dtype=float, order="F", copy=True)
    for v in transform.order[::-1]:
        u = transform.parent[v]
        if u >= 0:
            sums[:, u] += sums[:, v]
    out = np.empty_like(sums, order="F")
    out[:, :-1] = sums[:, transform.child] * transform.signs
    out[:, -1] = sums[:, transform.root]
    return DesignMatrix(out)


def _split(Xtilde):
    data = Xtilde.data if isinstance(Xtilde, DesignMatrix) else np.asarray(Xtilde, dtype=float)
    return data[:, :-1], data[:, -1]


def fused_lambda_max(Xtilde, y, loss) -> float:
    """Smallest penalty at which all penalized coordinates vanish.

    ``b`` is first minimized with ``beta_tilde = 0``; the result is
    ``max_i |xbar_i^T f'(b xtilde_p)|`` over the penalized columns.
    """
    loss = Loss.coerce(loss)
    Xbar, last = _split(Xtilde)
    y = np.asarray(y, dtype=float)
    if Xbar.shape[1] == 0:
        return 0.0
    b = minimize_offset(np.zeros(y.shape[0]), y, last, loss)
    g = loss_grad(b * last, y, loss)
    return float(np.max(np.abs(Xbar.T @ g)))


def fused_dual_scale(theta_hat, Xbar, y, lam) -> float:
    """Squared-loss scaling ``tau`` making ``tau * theta_hat`` dual feasible.

    ``tau = clip(y^T theta / (lam ||theta||^2), -1/m, 1/m)`` with
    ``m = ||Xbar^T theta||_inf``; zero for ``theta_hat = 0``.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    data = Xbar.data if isinstance(Xbar, DesignMatrix) else np.asarray(Xbar, dtype=float)
    m = float(np.max(np.abs(data.T @ theta_hat))) if data.shape[1] else 0.0
    return scaled_tau(theta_hat, m, np.asarray(y, dtype=float), float(lam))


def fused_objective(X, y, beta, tree: FeatureTree, lam, loss) -> float:
    """Fused-LASSO objective in original coordinates."""
    data = X.data if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    z = data @ np.asarray(beta, dtype=float)
    return float(np.sum(loss_value(z, np.asarray(y, dtype=float), loss))) + float(lam) * tree.penalty(beta)


@dataclass
class FusedResult(SolveResult):
    """A :class:`SolveResult` whose ``beta`` is in original coordinates.

    ``beta_tilde`` and ``b`` are the reparameterized solution, so that
    ``beta = T [beta_tilde; b]``.
    """

    beta_tilde: np.ndarray | None = None
    b: float = 0.0
    fused_penalty: float = 0.0

    def summary(self) -> dict:
        out = super().summary()
        out["b"] = self.b
        out["fused_penalty"] = self.fused_penalty
        return out


def fused_problem(X, y, tree: FeatureTree, lam, loss="squared", root=None):
    """The equivalent LASSO: penalized columns ``X T[:, :-1]``, offset ``X T[:, -1]``."""
    transform = build_transform(tree, root)
    Xt = transform_design(X, transform)
    Xbar, last = _split(Xt)
    return Problem(DesignMatrix(Xbar), y, loss, lam, offset=last), transform, Xt


def solve_fused(X, y, tree: FeatureTree, lam, loss="squared", config: SaifConfig | None = None,
                root: int | None = None, solver=None) -> FusedResult:
    """Solve the tree fused LASSO with SAIF on the reparameterized problem.

    ``solver`` defaults to :func:`saif.engine.solve`; any function with the
    same signature (such as a baseline) can be passed instead.
    """
    data = X.data if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if data.ndim != 2 or data.shape[1] != tree.p:
        raise DimensionError(f"X has shape {data.shape} but the tree has {tree.p} nodes")
    loss = Loss.coerce(loss)
    if tree.p == 1:
        return _solve_constant(data, y, tree, float(lam), loss)
    problem, transform, _ = fused_problem(data, y, tree, lam, loss, root)
    res = engine.solve_offset(problem, config, solver=solver)
    beta = transform.to_original(res.beta, res.offset_coef)
    fields = {k: getattr(res, k) for k in SolveResult.__dataclass_fields__}
    fields["beta"] = beta
    out = FusedResult(**fields, beta_tilde=res.beta.copy(), b=res.offset_coef,
                      fused_penalty=tree.penalty(beta))
    out.info = dict(res.info, root=transform.root)
    return out


def _solve_constant(data, y, tree, lam, loss) -> FusedResult:
    """Single-node tree: nothing is penalized, only the constant is fitted."""
    col = data[:, 0]
    b = minimize_offset(np.zeros(y.shape[0]), y, col, loss)
    primal = float(np.sum(loss_value(b * col, y, loss)))
    trace = Trace()
    trace.log("CERT", 0, 0, 0.0, primal)
    return FusedResult(beta=np.array([b]), gap=0.0, certificate=True, primal=primal, dual=primal,
                       theta=-loss_grad(b * col, y, loss) / lam, radius=0.0, lam=lam, method="saif",
                       counters=Counters(), trace=trace, beta_tilde=np.zeros(0), b=b,
                       info={"root": tree.root})
