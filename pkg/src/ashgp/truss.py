"""Linear-elastic space-truss solver and the bundled 25-bar benchmark.

The input vector packs [P_1..P_7, E_1..E_25, A_1..A_25] (loads, element
moduli, element areas).  The response is the larger of the monitored
node's horizontal and vertical displacement magnitudes; gradients use
central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ashgp.models import ModelEval, gradient_fd
from ashgp.rv import (
    InvalidParameterError,
    MarginalSpec,
    Dist,
    RandomVectorSpec,
    lognormal_from_mean_cov,
)

_DOF = {"x": 0, "y": 1, "z": 2}


class SolverError(RuntimeError):
    """The assembled stiffness matrix is singular (mechanism)."""


@dataclass(frozen=True)
class TrussGeometry:
    """Node coordinates, bar connectivity, supports, and load pattern."""

    nodes: np.ndarray           # (n_nodes, 3)
    elements: np.ndarray        # (n_elements, 2), 0-based node indices
    fixed: np.ndarray           # (n_nodes, 3) bool, restrained dofs
    load_map: tuple             # (load_index, node, dof, sign), 0-based
    monitor_node: int           # 0-based

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed.reshape(-1))


def load_geometry(path=None) -> TrussGeometry:
    """Parse a plain-text geometry file; defaults to the bundled 25-bar truss."""
    if path is None:
        text = resources.files("ashgp.data").joinpath("truss25.txt").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    sections: dict[str, list[list[str]]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.isalpha() and line.isupper():
            current = line
            sections[current] = []
            continue
        if current is None:
            raise InvalidParameterError(f"data before any section header: {line!r}")
        sections[current].append(line.split())
    for name in ("NODES", "ELEMENTS", "SUPPORTS", "LOADS", "MONITOR"):
        if name not in sections:
            raise InvalidParameterError(f"geometry file missing section {name}")

    node_rows = sorted(sections["NODES"], key=lambda r: int(r[0]))
    ids = [int(r[0]) for r in node_rows]
    if ids != list(range(1, len(ids) + 1)):
        raise InvalidParameterError("node ids must be 1..n_nodes")
    nodes = np.array([[float(v) for v in r[1:4]] for r in node_rows])

    elem_rows = sorted(sections["ELEMENTS"], key=lambda r: int(r[0]))
    elements = np.array([[int(r[1]) - 1, int(r[2]) - 1] for r in elem_rows])

    fixed = np.zeros((len(ids), 3), dtype=bool)
    for r in sections["SUPPORTS"]:
        fixed[int(r[0]) - 1] = [bool(int(v)) for v in r[1:4]]

    load_map = tuple(
        (int(r[0]) - 1, int(r[1]) - 1, _DOF[r[2]], float(r[3])) for r in sections["LOADS"]
    )
    monitor = int(sections["MONITOR"][0][0]) - 1
    return TrussGeometry(nodes, elements, fixed, load_map, monitor)


def _unit_stiffness(geom: TrussGeometry) -> np.ndarray:
    """Per-element global stiffness for E*A = 1, restricted to free dofs."""
    free = geom.free_dofs
    ndof = 3 * geom.n_nodes
    out = np.zeros((geom.n_elements, free.size, free.size))
    pos = -np.ones(ndof, dtype=int)
    pos[free] = np.arange(free.size)
    for e, (i, j) in enumerate(geom.elements):
        d = geom.nodes[j] - geom.nodes[i]
        length = float(np.linalg.norm(d))
        c = d / length
        cc = np.outer(c, c) / length
        dofs = np.concatenate([3 * i + np.arange(3), 3 * j + np.arange(3)])
        k_local = np.block([[cc, -cc], [-cc, cc]])
        for a in range(6):
            pa = pos[dofs[a]]
            if pa < 0:
                continue
            for b in range(6):
                pb = pos[dofs[b]]
                if pb >= 0:
                    out[e, pa, pb] += k_local[a, b]
    return out


class TrussModel:
    """Maximum-displacement response of a linear-elastic truss.

    The monitored "horizontal" component is whichever of the monitor
    node's x/y translations has the larger magnitude at a reference
    (mean-value) input; the vertical component is z.
    """

    def __init__(self, geometry: TrussGeometry = None, reference_input: np.ndarray = None,
                 fd_step: float = 1e-5):
        self.geometry = geometry if geometry is not None else load_geometry()
        self.fd_step = fd_step
        self.threshold = 0.45
        ne = self.geometry.n_elements
        self.dimension = len(self.geometry.load_map) + 2 * ne
        self._n_loads = len(self.geometry.load_map)
        self._unit_k = _unit_stiffness(self.geometry)
        free = self.geometry.free_dofs
        self._load_pattern = np.zeros((self._n_loads, free.size))
        pos = -np.ones(3 * self.geometry.n_nodes, dtype=int)
        pos[free] = np.arange(free.size)
        for k, node, dof, sign in self.geometry.load_map:
            p = pos[3 * node + dof]
            if p < 0:
                raise InvalidParameterError("load applied to a restrained dof")
            self._load_pattern[k, p] = sign
        self._monitor_pos = pos[3 * self.geometry.monitor_node + np.arange(3)]
        if np.any(self._monitor_pos < 0):
            raise InvalidParameterError("monitored node is restrained")
        if reference_input is None:
            reference_input = table2_random_vector().means()
        u_ref = self._solve(np.asarray(reference_input, dtype=float))
        self._horizontal = int(np.argmax(np.abs(u_ref[:2])))

    def _split(self, x: np.ndarray):
        ne = self.geometry.n_elements
        p = x[: self._n_loads]
        e = x[self._n_loads : self._n_loads + ne]
        a = x[self._n_loads + ne :]
        if np.any(e <= 0) or np.any(a <= 0):
            raise InvalidParameterError("elastic moduli and areas must be positive")
        return p, e, a

    def _solve(self, x: np.ndarray) -> np.ndarray:
        """Monitored-node translations (x, y, z) for one input vector."""
        p, e, a = self._split(x)
        k = np.einsum("e,eij->ij", e * a, self._unit_k)
        f = p @ self._load_pattern
        try:
            c = np.linalg.cholesky(k)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular stiffness matrix") from exc
        u = np.linalg.solve(c.T, np.linalg.solve(c, f))
        return u[self._monitor_pos]

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise InvalidParameterError(f"expected input of length {self.dimension}, got {x.shape}")
        u = self._solve(x)
        return float(max(abs(u[self._horizontal]), abs(u[2])))

    def value_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.array([self.value(x)])
        ne = self.geometry.n_elements
        p = x[:, : self._n_loads]
        e = x[:, self._n_loads : self._n_loads + ne]
        a = x[:, self._n_loads + ne :]
        if np.any(e <= 0) or np.any(a <= 0):
            raise InvalidParameterError("elastic moduli and areas must be positive")
        k = np.einsum("me,eij->mij", e * a, self._unit_k)
        f = p @ self._load_pattern
        u = np.linalg.solve(k, f[..., None])[..., 0]
        um = u[:, self._monitor_pos]
        return np.maximum(np.abs(um[:, self._horizontal]), np.abs(um[:, 2]))

    def evaluate(self, x: np.ndarray) -> ModelEval:
        y = self.value(x)
        grad = gradient_fd(self.value, np.asarray(x, dtype=float), self.fd_step)
        return ModelEval(y, grad)


def table2_random_vector() -> RandomVectorSpec:
    """The 57 random variables of the bundled truss benchmark.

    Loads and moduli are lognormal given by mean and c.o.v.; areas are
    Gaussian.  Ordering: P_1..P_7, E_1..E_25, A_1..A_25.
    """
    marginals: list[MarginalSpec] = []
    marginals.append(lognormal_from_mean_cov(1000.0, 0.1))
    marginals.extend([lognormal_from_mean_cov(10000.0, 0.05)] * 4)
    marginals.append(lognormal_from_mean_cov(600.0, 0.1))
    marginals.append(lognormal_from_mean_cov(500.0, 0.1))
    marginals.extend([lognormal_from_mean_cov(1e7, 0.05)] * 25)
    area_means = (
        [0.4] + [0.1] * 4 + [3.4] * 4 + [0.4] * 2 + [1.3] * 2 + [0.9] * 4 + [1.0] * 4 + [3.4] * 4
    )
    marginals.extend(MarginalSpec(Dist.GAUSSIAN, m, 0.1 * m) for m in area_means)
    return RandomVectorSpec(marginals)
