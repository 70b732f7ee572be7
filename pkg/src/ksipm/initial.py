"""Initial densities. Every generator returns a smooth, nonnegative field."""

from __future__ import annotations

import numpy as np

from .spectral import Grid, RealField, basis, inv_c


class InitError(ValueError):
    pass


def _rescale(values: np.ndarray, grid: Grid, mass: float) -> RealField:
    total = float(np.sum(values)) * grid.cell
    if total <= 0:
        raise InitError("initial density has no mass")
    return RealField(grid, values * (mass / total))


def _bump(grid: Grid, center, sigma: float) -> np.ndarray:
    """Gaussian with periodic images in x1 and mirror images in x2 (zero wall flux)."""
    c1, c2 = center
    x1, x2 = grid.mesh
    out = np.zeros(grid.shape)
    for m in (-1, 0, 1):
        d1 = x1 - c1 + 2 * np.pi * m
        g1 = np.exp(-(d1**2) / (2 * sigma**2))
        for img in (c2, -c2, 2 * np.pi - c2):
            out += g1 * np.exp(-((x2 - img) ** 2) / (2 * sigma**2))
    return out


def _check_sigma(grid: Grid, sigma: float):
    spacing = max(grid.h1, grid.h2)
    if sigma < 2 * spacing:
        raise InitError(f"sigma={sigma} is unresolved (needs >= {2 * spacing:.4g} on {grid.n1}x{grid.n2})")


def gaussian_bump(grid: Grid, mass: float = 4 * np.pi, center=(0.0, np.pi / 2), sigma: float = 0.3,
                  floor: float = 0.0) -> RealField:
    """Concentrated bump of total mass ``mass`` on a uniform background ``floor``.

    The floor contributes ``floor * 2 pi^2`` to the mass; the bump carries the rest.
    """
    if mass <= 0:
        raise InitError(f"mass must be positive, got {mass}")
    _check_sigma(grid, sigma)
    bump_mass = mass - floor * grid.area
    if bump_mass < 0 or floor < 0:
        raise InitError("floor exceeds the requested mass")
    bump = _bump(grid, center, sigma)
    bump *= bump_mass / (float(np.sum(bump)) * grid.cell)
    return _rescale(np.maximum(bump + floor, 0.0), grid, mass)


def multi_bump(grid: Grid, mass: float = 4 * np.pi, centers=((0.0, np.pi / 2),), sigma: float = 0.3, weights=None,
               floor: float = 0.0) -> RealField:
    if mass <= 0:
        raise InitError(f"mass must be positive, got {mass}")
    _check_sigma(grid, sigma)
    centers = [tuple(c) for c in centers]
    if not centers:
        raise InitError("multi_bump needs at least one center")
    weights = np.ones(len(centers)) if weights is None else np.asarray(weights, dtype=float)
    if len(weights) != len(centers) or (weights < 0).any() or weights.sum() <= 0:
        raise InitError("weights must be nonnegative, one per center")
    total = np.zeros(grid.shape)
    for w, c in zip(weights, centers):
        b = _bump(grid, c, sigma)
        total += w * b / (float(np.sum(b)) * grid.cell)
    total *= (mass - floor * grid.area) / weights.sum()
    return _rescale(np.maximum(total + floor, 0.0), grid, mass)


def eigenmode(grid: Grid, k1: int = 0, k2: int = 1, amplitude: float = 0.1, floor: float = 1.0) -> RealField:
    """``floor + amplitude cos(k1 x1) cos(k2 x2)``; requires ``|amplitude| <= floor``."""
    if abs(amplitude) > floor:
        raise InitError("eigenmode would be negative: need |amplitude| <= floor")
    if k1 == 0 and k2 == 0:
        raise InitError("(0, 0) is the mean, not a mode")
    x1, x2 = grid.mesh
    return RealField(grid, floor + amplitude * np.cos(k1 * x1) * np.cos(k2 * x2))


def random_field(grid: Grid, seed: int = 0, decay: float = 4.0, floor: float = 1.0,
                 amplitude: float = 0.5, kmax: int = 8) -> RealField:
    """Band-limited random cosine series with ``|k|^-decay`` envelope.

    The fluctuation is scaled to ``amplitude * floor`` in sup norm, so the
    density stays in ``[floor (1 - amplitude), floor (1 + amplitude)]``.
    """
    if not 0 <= amplitude < 1 or floor <= 0:
        raise InitError("need 0 <= amplitude < 1 and floor > 0")
    rng = np.random.default_rng(seed)
    b = basis(grid)
    k1 = b.k1[:, None]
    k2 = b.k2c[None, :]
    kk = np.sqrt(k1**2 + k2**2)
    keep = (kk > 0) & (kk <= kmax) & (k1 < grid.n1 // 2)
    amp = np.where(keep, np.maximum(kk, 1.0) ** (-decay), 0.0)
    X = amp * (rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape))
    X[0] = X[0].real
    fl = inv_c(X, grid.n1)
    peak = float(np.abs(fl).max())
    if peak > 0:
        fl *= amplitude * floor / peak
    fl -= fl.mean()
    return RealField(grid, floor + fl)


def make_initial_data(spec: dict, grid: Grid) -> RealField:
    """Dispatch on ``spec["kind"]``; remaining keys are generator parameters."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "gaussian_bump":
        if "center" in spec:
            spec["center"] = tuple(spec["center"])
        return gaussian_bump(grid, **spec)
    if kind == "multi_bump":
        return multi_bump(grid, **spec)
    if kind == "eigenmode":
        return eigenmode(grid, **spec)
    if kind == "random":
        return random_field(grid, **spec)
    if kind == "from_snapshot":
        from .snapshot import read_snapshot

        snap = read_snapshot(spec["path"])
        if snap.rho.grid != grid:
            raise InitError(f"snapshot grid {snap.rho.grid.shape} differs from configured {grid.shape}")
        return snap.rho
    raise InitError(f"unknown initial data kind {kind!r}")
