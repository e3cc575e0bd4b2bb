"""Boundary of the joint numerical range of two Hermitian operators.

The boundary is swept by ground states of ``cos(t) A1 + sin(t) A2``.  At
angles where the ground space is degenerate (a flat face), the ground
space is rotated to diagonalize the tangential operator
``-sin(t) A1 + cos(t) A2``, so the face endpoints appear among the
reported points.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from maxent_compat.operators import as_matrix

DEFAULT_SAMPLES = 720
MEMBERSHIP_TOL = 1e-3


@dataclass(frozen=True)
class BoundarySample:
    theta: float
    energies: tuple[float, float]
    points: np.ndarray  # (k, 2)
    degenerate: bool


def default_gap_tol(h: np.ndarray, eigenvalues=None) -> float:
    w = np.linalg.eigvalsh(h) if eigenvalues is None else eigenvalues
    return 1e-8 * max(1.0, float(np.abs(w).max()))


def boundary_at(a1, a2, theta: float, gap_tol: float | None = None) -> BoundarySample:
    m1, m2 = as_matrix(a1), as_matrix(a2)
    c, s = np.cos(theta), np.sin(theta)
    w, v = np.linalg.eigh(c * m1 + s * m2)
    tol = default_gap_tol(None, w) if gap_tol is None else gap_tol
    k = int(np.sum(w <= w[0] + tol))
    g = v[:, :k]
    if k > 1:
        tang = g.conj().T @ (-s * m1 + c * m2) @ g
        _, u = np.linalg.eigh(0.5 * (tang + tang.conj().T))
        g = g @ u
    x = np.einsum("ik,ij,jk->k", g.conj(), m1, g).real
    y = np.einsum("ik,ij,jk->k", g.conj(), m2, g).real
    e1 = float(w[1]) if len(w) > 1 else float(w[0])
    return BoundarySample(float(theta), (float(w[0]), e1), np.column_stack([x, y]), k > 1)


def trace_boundary(a1, a2, samples: int = DEFAULT_SAMPLES, gap_tol: float | None = None) -> list[BoundarySample]:
    """``samples`` uniform angles on ``[0, 2 pi)``."""
    if samples < 8:
        raise ValueError("need at least 8 boundary samples")
    m1, m2 = as_matrix(a1), as_matrix(a2)
    if m1.shape != m2.shape:
        raise ValueError(f"operators have different shapes {m1.shape} and {m2.shape}")
    thetas = 2 * np.pi * np.arange(samples) / samples
    return [boundary_at(m1, m2, t, gap_tol) for t in thetas]


def boundary_points(samples: list[BoundarySample]) -> np.ndarray:
    return np.concatenate([s.points for s in samples])


def boundary_csv(samples: list[BoundarySample]) -> str:
    """CSV with one row per boundary point."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["theta", "ax1", "ax2", "degenerate", "energy0", "energy1"])
    for s in samples:
        for x, y in s.points:
            wr.writerow([f"{s.theta:.17g}", f"{x:.17g}", f"{y:.17g}", int(s.degenerate),
                         f"{s.energies[0]:.17g}", f"{s.energies[1]:.17g}"])
    return buf.getvalue()


def convex_hull(points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Counter-clockwise hull vertices (Andrew's monotone chain)."""
    pts = np.unique(np.round(np.asarray(points, dtype=float), 14), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= tol:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= tol:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _segment_distance(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def signed_distance(hull: np.ndarray, point) -> float:
    """Euclidean distance to the hull, negative inside."""
    p = np.asarray(point, dtype=float)
    if len(hull) == 1:
        return float(np.linalg.norm(p - hull[0]))
    if len(hull) == 2:
        return _segment_distance(p, hull[0], hull[1])
    edges = np.roll(hull, -1, axis=0) - hull
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    side = np.einsum("ij,ij->i", normals, p - hull)
    if np.all(side <= 0):
        return float(side.max())
    return min(_segment_distance(p, a, b) for a, b in zip(hull, np.roll(hull, -1, axis=0)))


@dataclass(frozen=True)
class Membership:
    verdict: str  # "inside" | "outside" | "boundary"
    distance: float


def membership(a1, a2, point, samples: int = DEFAULT_SAMPLES, tol: float = MEMBERSHIP_TOL,
               boundary: list[BoundarySample] | None = None) -> Membership:
    """Locate ``point`` relative to the traced numerical range polygon."""
    if boundary is None:
        if samples < 256:
            raise ValueError("membership needs at least 256 boundary samples")
        boundary = trace_boundary(a1, a2, samples)
    hull = convex_hull(boundary_points(boundary))
    d = signed_distance(hull, point)
    if len(hull) <= 2:
        verdict = "boundary" if d <= tol else "outside"
    elif d < -tol:
        verdict = "inside"
    elif d > tol:
        verdict = "outside"
    else:
        verdict = "boundary"
    return Membership(verdict, d)
