"""Decomposition of non-mixing repellers into transitive classes.

A point cloud is split into delta-connected components (single linkage at
threshold delta); mapping components forward induces a transition relation
whose strongly connected classes carry constant local pressure.  The global
pressure zero is realized on a class that attains the maximal class-wise root
and is minimal for the inherited partial order.

Local class pressure is computed from exact backward-orbit sums: the masked
operator power applied to the constant function equals the sum over length-n
preimage chains that stay inside the class, which needs no grid at all and is
therefore an independent cross-check of the grid-based pressure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import maps as maps_mod
from .errors import DomainError, NoSignChange, ScaleError

MAX_BISECT = 80


@dataclass
class ComponentDecomposition:
    cloud: object
    delta: float
    labels: np.ndarray                      # component id per cloud point
    n_components: int
    transition: np.ndarray                  # transition[j, i] iff f(comp i) covers comp j
    classes: list                           # lists of component ids (SCCs)
    class_of_component: np.ndarray
    order: np.ndarray                       # order[a, b] iff class a precedes class b
    coverage_warnings: list = field(default_factory=list)
    _tree: object = None
    _K: object = None
    _map: object = None

    def components_points(self, comp: int) -> np.ndarray:
        return self.cloud.points[self.labels == comp]

    def class_points(self, cls: int) -> np.ndarray:
        comps = self.classes[cls]
        mask = np.isin(self.labels, comps)
        return self.cloud.points[mask]

    def classify(self, pts: np.ndarray) -> np.ndarray:
        """Class id of the nearest cloud point for each query point."""
        P = _chart(self.cloud, pts)
        _, idx = self._tree.query(P)
        return self.class_of_component[self.labels[idx]]


def _chart(cloud, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=complex)
    if cloud.chart == "linear":
        return np.stack([np.real(pts), np.imag(pts)], axis=1)
    return np.stack([np.log(np.abs(pts)), np.angle(pts) % (2.0 * np.pi)], axis=1)


def decompose(cloud, m, delta: float, K=None) -> ComponentDecomposition:
    """Partition the cloud at scale delta and build the class structure."""
    spacing = cloud.spacing()
    if delta <= spacing:
        raise ScaleError(f"delta = {delta:.3g} is at or below cloud resolution {spacing:.3g}")
    P = _chart(cloud, cloud.points)
    tree = cKDTree(P)
    pairs = tree.query_pairs(delta, output_type="ndarray")
    n = len(P)
    adj = csr_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    n_comp, labels = connected_components(adj, directed=False)

    # deterministic component numbering: sort by lexicographic smallest member
    keys = []
    for c in range(n_comp):
        pc = P[labels == c]
        keys.append(tuple(pc[np.lexsort((pc[:, 1], pc[:, 0]))][0]))
    perm = np.argsort([keys[c] for c in range(n_comp)], axis=0)
    relabel = np.empty(n_comp, dtype=int)
    relabel[np.asarray(sorted(range(n_comp), key=lambda c: keys[c]))] = np.arange(n_comp)
    labels = relabel[labels]

    # transition: forward-map every point; component i covers component j when
    # some image lands within delta/2 of j, and the hit is then checked to
    # actually cover j at cloud resolution
    images = np.full(n, np.nan + 0j, dtype=complex)
    for i, z in enumerate(cloud.points):
        try:
            images[i] = maps_mod.evaluate(m, z)
        except DomainError:
            pass
    good = ~np.isnan(images.real)
    trans = np.zeros((n_comp, n_comp), dtype=bool)
    cov_warn = []
    img_chart = _chart(cloud, images[good])
    img_comp_src = labels[good]
    d_img, idx_img = tree.query(img_chart)
    hit = d_img <= delta / 2.0
    for i in range(n_comp):
        sel = hit & (img_comp_src == i)
        for j in np.unique(labels[idx_img[sel]]):
            trans[j, i] = True
    # coverage assertion at resolution delta
    for i in range(n_comp):
        src_imgs = img_chart[img_comp_src == i]
        if len(src_imgs) == 0:
            continue
        itree = cKDTree(src_imgs)
        for j in range(n_comp):
            if not trans[j, i]:
                continue
            dj, _ = itree.query(P[labels == j])
            if dj.max() > delta:
                cov_warn.append((i, j, float(dj.max())))
                warnings.warn(
                    f"image of component {i} only partially covers component {j} "
                    f"at cloud resolution (gap {dj.max():.3g})")

    # classes: strongly connected components of the digraph i -> j when trans[j, i]
    dig = csr_matrix(trans.T.astype(float))
    n_cls, comp_cls = connected_components(dig, directed=True, connection="strong")
    # deterministic class numbering by smallest member component id
    cls_members = [sorted(np.nonzero(comp_cls == c)[0].tolist()) for c in range(n_cls)]
    cls_order = sorted(range(n_cls), key=lambda c: cls_members[c][0])
    classes = [cls_members[c] for c in cls_order]
    class_of_component = np.empty(n_comp, dtype=int)
    for new_id, members in enumerate(classes):
        for comp in members:
            class_of_component[comp] = new_id

    # condensation reachability: a precedes b iff some component of a reaches one of b
    reach = trans.T.copy()
    np.fill_diagonal(reach, True)
    for _ in range(n_comp):
        nxt = reach | (reach @ reach)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    order = np.zeros((n_cls, n_cls), dtype=bool)
    for a in range(n_cls):
        for b in range(n_cls):
            if a == b:
                continue
            order[a, b] = any(reach[i, j] for i in classes[a] for j in classes[b])

    return ComponentDecomposition(cloud=cloud, delta=delta, labels=labels,
                                  n_components=n_comp, transition=trans,
                                  classes=classes,
                                  class_of_component=class_of_component,
                                  order=order, coverage_warnings=cov_warn,
                                  _tree=tree, _K=K, _map=m)


def default_delta(cloud) -> float:
    """5x the median nearest-neighbor gap; separates components from sampling gaps."""
    return 5.0 * cloud.spacing()


def _eval_points(decomp: ComponentDecomposition, cls: int, per_component: int = 2):
    pts = []
    for comp in decomp.classes[cls]:
        pc = decomp.components_points(comp)
        P = _chart(decomp.cloud, pc)
        ordering = np.lexsort((P[:, 1], P[:, 0]))
        take = ordering[:: max(1, len(ordering) // per_component)][:per_component]
        pts.extend(pc[take])
    return np.asarray(pts, dtype=complex)


def class_pressure(decomp: ComponentDecomposition, s: float, n: int) -> list:
    """Local pressure per class from masked length-n backward-orbit sums."""
    if n < 1:
        raise DomainError("n must be >= 1")
    out = []
    for cls in range(len(decomp.classes)):
        ys = _eval_points(decomp, cls)
        best = -np.inf
        for y in ys:
            total = _masked_chain_sum(decomp, complex(y), cls, s, n)
            if total > 0:
                best = max(best, np.log(total) / n)
        out.append(best)
    return out


def _masked_chain_sum(decomp, y: complex, cls: int, s: float, n: int) -> float:
    pts = np.asarray([y], dtype=complex)
    wts = np.asarray([1.0])
    m = decomp._map
    for _ in range(n):
        new_pts, new_wts = [], []
        for mask, branch_pts, dfs in maps_mod.preimage_arrays(m, pts, decomp._K):
            if not np.any(mask):
                continue
            new_pts.append(branch_pts[mask])
            new_wts.append(wts[mask] * dfs[mask] ** (-s))
        if not new_pts:
            return 0.0
        pts = np.concatenate(new_pts)
        wts = np.concatenate(new_wts)
        keep = decomp.classify(pts) == cls
        pts, wts = pts[keep], wts[keep]
        if len(pts) == 0:
            return 0.0
    return float(wts.sum())


def critical_class(decomp: ComponentDecomposition, tol: float = 1e-7,
                   n: int = 12, s_range=(0.0, 2.2)) -> tuple:
    """(selected class id, global s_crit, per-class roots, invariant sub-cloud).

    The global critical value is the maximum of the class-wise pressure roots;
    among the attaining classes an order-minimal one is selected (ties broken
    by class numbering).
    """
    roots = []
    for cls in range(len(decomp.classes)):
        roots.append(_class_root(decomp, cls, tol, n, s_range))
    s_crit = max(roots)
    attaining = [c for c, r in enumerate(roots) if r >= s_crit - 10 * tol]
    minimal = [c for c in attaining
               if not any(decomp.order[c2, c] for c2 in attaining if c2 != c)]
    selected = minimal[0] if minimal else attaining[0]
    sub = _invariant_subcloud(decomp, selected)
    return selected, s_crit, roots, sub


def _class_root(decomp, cls: int, tol: float, n: int, s_range) -> float:
    lo, hi = s_range

    def press(s):
        return class_pressure(decomp, s, n)[cls]

    plo, phi = press(lo), press(hi)
    if plo < 0.0 or phi > 0.0:
        raise NoSignChange(f"class {cls} pressure does not change sign on {s_range}")
    a, b = lo, hi
    for _ in range(MAX_BISECT):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        if press(mid) > 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _invariant_subcloud(decomp, cls: int, steps: int | None = None) -> np.ndarray:
    """Points of the class whose forward orbit stays in the class.

    Forward orbits of depth-n cloud points are reliable for about n/2 steps
    (expansion amplifies the cloud's approximation error), so the check is
    truncated accordingly.
    """
    if steps is None:
        steps = max(1, min(decomp.cloud.generation_depth // 2, 8))
    mask = np.isin(decomp.labels, decomp.classes[cls])
    pts = decomp.cloud.points[mask]
    keep = np.ones(len(pts), dtype=bool)
    cur = pts.copy()
    for _ in range(steps):
        for i, z in enumerate(cur):
            if not keep[i]:
                continue
            try:
                cur[i] = maps_mod.evaluate(decomp._map, z)
            except DomainError:
                keep[i] = False
        alive = keep.copy()
        alive[keep] = decomp.classify(cur[keep]) == cls
        keep = alive
    return pts[keep]
