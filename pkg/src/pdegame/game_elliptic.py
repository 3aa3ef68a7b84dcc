"""Discounted repeated game for stationary problems with Neumann walls.

Three layers:

* a smooth wall barrier (:func:`build_psi`, :func:`build_caps`) whose
  outward normal slope strictly dominates the prescribed flux — it
  calibrates the score caps and the a-priori bound ``chi`` that the
  capped game is designed to respect;
* the one-step discounted operator :func:`q_eps` acting on functions of
  the state alone — the object whose consistency and shift behaviour
  the audits measure;
* the score-tracking operator :func:`r_eps_apply` (and its absorbing
  wall variant :func:`r_eps_mixed`) on fields over (state, score),
  iterated to a fixed point by :func:`solve_fixed_point`, from which
  the candidate solution profiles are read off as sign changes of
  ``V(x, z) - z`` in the score variable.

The score update per round is ``z' = e^(lambda dt) (z + delta)`` with
``delta = p . step + 0.5 <Gamma step, step> + dt f(x, z, p, Gamma)
- penalty * flux(landing)``; once ``|z'|`` reaches the cap the game
stops at the capped values ``-chi(x)`` / ``+chi(x)``.  Problems with a
partly absorbing wall stop with payoff ``z + e^(-lambda dt)
(g_exit(landing) - z')`` when the state lands on the absorbing part
with the score still inside the caps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import GridField, grid_spacing
from .game_parabolic import NumericAbort, _sign_change
from .geometry import DomainGeometry
from .params import GameParams, ValidationError
from .strategies import candidate_moves, candidate_strategies

__all__ = [
    "CapSpec",
    "FixedPointValue",
    "build_psi",
    "build_caps",
    "q_eps",
    "z_grid",
    "r_eps_apply",
    "r_eps_mixed",
    "solve_fixed_point",
    "extract_u_elliptic",
    "extract_v_elliptic",
]


# -- wall barrier and score caps -------------------------------------------


def _boundary_sup(domain: DomainGeometry, fn) -> float:
    """sup |fn| over the boundary, by exact endpoints or a dense sample."""
    if domain.kind == "interval":
        pts = [np.array([domain.a]), np.array([domain.c])]
    else:
        cx, cy = domain.center
        angles = np.linspace(0.0, 2.0 * math.pi, 256, endpoint=False)
        radii = [domain.radius] if domain.kind == "ball" else [domain.r_in, domain.r_out]
        pts = [
            np.array([cx + r * math.cos(a), cy + r * math.sin(a)])
            for r in radii
            for a in angles
        ]
    return max(abs(float(fn(p))) for p in pts)


def _psi_profile(d: float, depth: float, amplitude: float) -> float:
    if d >= depth:
        return 0.0
    return amplitude * math.exp(-d / (1.0 - d / depth))


def _psi_profile_slope(d: float, depth: float, amplitude: float) -> float:
    if d >= depth:
        return 0.0
    q = 1.0 - d / depth
    return -amplitude * math.exp(-d / q) / q**2


def _psi_profile_curv(d: float, depth: float, amplitude: float) -> float:
    if d >= depth:
        return 0.0
    q = 1.0 - d / depth
    return amplitude * (1.0 / q**4 - 2.0 / (depth * q**3)) * math.exp(-d / q)


def build_psi(domain: DomainGeometry, h_sup: float, spacing: float | None = None) -> GridField:
    """Wall barrier sampled on the lattice.

    The profile ``(h_sup + 1) exp[-d / (1 - d/(r/2))]`` of the wall
    distance ``d`` (``r`` the inscribed-ball radius) equals ``h_sup + 1``
    on the boundary, has outward normal slope exactly ``h_sup + 1``
    there, and vanishes identically at depth ``r/2``.
    """
    if not domain.r_int > 0.0:
        raise ValidationError("the barrier needs a positive inscribed-ball radius")
    depth = domain.r_int / 2.0
    amp = h_sup + 1.0
    if spacing is None:
        spacing = domain.r_int / 64.0
    return GridField.from_callable(
        domain,
        spacing,
        lambda x: _psi_profile(domain.dist_to_boundary(np.atleast_1d(x)), depth, amp),
    )


@dataclass(frozen=True)
class CapSpec:
    """Wall barrier and the score caps it calibrates.

    ``psi`` rises to ``psi_sup = h_sup + 1`` at the wall with outward
    normal slope exactly ``psi_sup`` and vanishes at depth ``depth``
    (half the inscribed-ball radius); ``psi`` and ``chi`` are lattice
    samples, ``psi_value``/``psi_grad``/``chi_at`` the exact profile.
    ``chi(x) = cap_m + psi_sup + psi(x)`` is the bound the capped game
    is designed to respect; it is positive because construction
    requires ``cap_M > 2 + h_sup``.  ``eps0`` is the step-size
    threshold below which the barrier's discrete flux mismatch has
    definite sign by a margin of one half (``hess_norm`` bounds the
    barrier's second derivatives, including wall curvature).
    """

    domain: DomainGeometry
    cap_M: float
    cap_m: float
    h_sup: float
    psi_sup: float
    depth: float
    kappa_max: float
    hess_norm: float
    eps0: float
    psi: GridField
    chi: GridField

    # -- exact profile -----------------------------------------------------

    def psi_value(self, x) -> float:
        d = self.domain.dist_to_boundary(np.atleast_1d(x))
        return _psi_profile(d, self.depth, self.psi_sup)

    def psi_grad(self, x) -> np.ndarray:
        xp = np.atleast_1d(np.asarray(x, dtype=float))
        d = self.domain.dist_to_boundary(xp)
        slope = _psi_profile_slope(d, self.depth, self.psi_sup)
        if self.domain.kind == "interval":
            # distance grows toward the midpoint; its gradient points inward
            inward = 1.0 if (xp[0] - self.domain.a) <= (self.domain.c - xp[0]) else -1.0
            return np.array([slope * inward])
        rel = xp - np.asarray(self.domain.center, dtype=float)
        r = float(np.linalg.norm(rel))
        if r == 0.0:
            return np.zeros(2)
        rhat = rel / r
        if self.domain.kind == "ball" or (self.domain.r_out - r) <= (r - self.domain.r_in):
            return -slope * rhat  # nearest wall is the outer circle
        return slope * rhat

    def chi_at(self, x) -> float:
        return self.cap_m + self.psi_sup + self.psi_value(x)


def build_caps(problem, params: GameParams, cap_M: float | None = None) -> CapSpec:
    """Calibrate the barrier and score caps for a stationary problem."""
    dom = problem.domain
    cap = cap_M if cap_M is not None else params.cap_M
    if cap is None:
        raise ValidationError("cap_M is required: pass it or set it on the parameters")
    h_sup = _boundary_sup(dom, problem.h)
    if not cap > 2.0 + h_sup:
        raise ValidationError(
            f"cap_M={cap:g} too small: positivity of the wall bound needs "
            f"cap_M > 2 + sup|h| = {2.0 + h_sup:g}"
        )
    psi_sup = h_sup + 1.0
    cap_m = params.cap_m if params.cap_m is not None else cap - 1.0 - 2.0 * psi_sup
    depth = dom.r_int / 2.0
    kappa_max = 2.0 / dom.r_int
    # curvature-aware bound on the barrier's second derivatives over a
    # fine depth grid (the profile is C^2 with a flat junction at depth)
    ds = np.linspace(0.0, depth * (1.0 - 1e-9), 20001)
    q = 1.0 - ds / depth
    w = ds / q
    wp = 1.0 / q**2
    wpp = (2.0 / depth) / q**3
    ew = np.exp(-w)
    p1 = psi_sup * wp * ew
    p2 = psi_sup * np.abs(wp**2 - wpp) * ew
    hess_norm = float(np.max(p2) + np.max(p1) * kappa_max)
    eps0 = (4.0 * hess_norm + 2.0) ** (-1.0 / (1.0 - params.alpha))
    spacing = grid_spacing(dom, params)
    psi = GridField.from_callable(
        dom, spacing, lambda x: _psi_profile(dom.dist_to_boundary(np.atleast_1d(x)), depth, psi_sup)
    )
    chi = psi.with_values(psi.values + (cap_m + psi_sup))
    return CapSpec(
        domain=dom,
        cap_M=float(cap),
        cap_m=float(cap_m),
        h_sup=h_sup,
        psi_sup=psi_sup,
        depth=depth,
        kappa_max=kappa_max,
        hess_norm=hess_norm,
        eps0=eps0,
        psi=psi,
        chi=chi,
    )


# -- one-step discounted operator on state functions -----------------------


def _discount(problem, params: GameParams) -> float:
    lam = problem.lambda_rate
    if params.lambda_rate not in (0.0, lam):
        raise ValidationError(
            f"parameter discount rate {params.lambda_rate:g} disagrees with "
            f"the problem rate {lam:g}"
        )
    return math.exp(-lam * params.time_step)


def q_eps(x, z, phi, problem, params: GameParams) -> float:
    """One round of the discounted game read on a state function.

    max over announcements of min over steps of
    ``disc * phi(landing) - p . step - 0.5 <Gamma step, step>
    - dt f(x, z, p, Gamma) + penalty * h(landing)``.
    Adding a constant c to phi adds ``disc * c`` to the value.
    """
    dom = problem.domain
    xp = np.atleast_1d(np.asarray(x, dtype=float))
    disc = _discount(problem, params)
    dt = params.time_step
    strategies = candidate_strategies(dom, xp, phi, params, problem.h)
    moves = candidate_moves(dom, xp, params)
    best = -math.inf
    for strat in strategies:
        fv = float(problem.f(xp, z, strat.p, strat.Gamma))
        worst = math.inf
        for mv_req in moves:
            mv = dom.make_move(xp, mv_req)
            val = (
                disc * float(phi.eval(mv.landing))
                - float(strat.p @ mv_req)
                - 0.5 * float(mv_req @ strat.Gamma @ mv_req)
                - dt * fv
            )
            if mv.crossed:
                val += mv.penal_weight * float(problem.h(mv.landing))
            worst = min(worst, val)
        best = max(best, worst)
    return best


# -- score grid and the capped fixed-point operator ------------------------

_Z_NODE_CAP = 2001


def z_grid(params: GameParams, cap_M: float) -> np.ndarray:
    """Symmetric score grid through 0, strictly inside the caps.

    Spacing is the round length dt, coarsened to keep at most 2001
    nodes; the extreme nodes sit within one spacing of the caps.
    """
    dz = params.time_step
    K = max(1, int(math.ceil(cap_M / dz - 1e-12)) - 1)
    if 2 * K + 1 > _Z_NODE_CAP:
        K = (_Z_NODE_CAP - 1) // 2
        dz = cap_M / (K + 1)
    return dz * np.arange(-K, K + 1)


def _f_over_z(problem, xp, zvals, strat):
    if problem.f_batched is not None:
        n = len(zvals)
        X = np.repeat(xp.reshape(1, -1), n, axis=0)
        P = np.repeat(strat.p.reshape(1, -1), n, axis=0)
        G = np.repeat(strat.Gamma[None, :, :], n, axis=0)
        return np.asarray(problem.f_batched(X, zvals, P, G), dtype=float)
    probe = float(problem.f(xp, 0.0, strat.p, strat.Gamma))
    if all(
        float(problem.f(xp, zv, strat.p, strat.Gamma)) == probe
        for zv in (zvals[0], zvals[-1])
    ):
        return np.full(len(zvals), probe)
    return np.array([float(problem.f(xp, zv, strat.p, strat.Gamma)) for zv in zvals])


def _anchor_field(base: GridField, V: np.ndarray, zs: np.ndarray, chi_nodes: np.ndarray) -> GridField:
    """Candidate-driving state profile: the sign-change graph of V - z,
    clamped to the guaranteed bound where the graph leaves the grid."""
    U = V - zs[None, :]
    u = _sign_change(zs, U, upper=True)
    u = np.where(np.isfinite(u), u, 0.0)
    u = np.clip(u, -chi_nodes, chi_nodes)
    return base.with_values(u)


@dataclass
class _SweepFrame:
    """Grid-level constants shared by every row of a sweep."""

    xs: np.ndarray
    zs: np.ndarray
    chi_nodes: np.ndarray
    disc: float
    grow: float
    dt: float
    cap_M: float


@dataclass
class _RowPlan:
    """Everything about one state node that does not depend on V.

    Branches are ordered strategy-major: branch ``s * n_moves + m``
    pairs strategy ``s`` with move ``m``.  Landing interpolation in the
    state uses ``col_i0``/``col_w`` per move; landing interpolation in
    the score uses ``jdx``/``wz`` per branch (the post-round scores are
    V-independent, so they are precomputed).  Absorbing-exit branches
    have V-independent values, precomputed in ``exit_vals``.
    """

    chi_x: float
    n_strategies: int
    n_moves: int
    col_i0: np.ndarray
    col_w: np.ndarray
    move_of_branch: np.ndarray
    delta: np.ndarray
    jdx: np.ndarray
    wz: np.ndarray
    hi_mask: np.ndarray
    lo_mask: np.ndarray
    exit_vals: dict
    exit_moves: tuple


def _plan_row(xp, chi_x, frame: _SweepFrame, problem, params, anchor, dirichlet_patch, g_exit):
    dom = problem.domain
    xs, zs = frame.xs, frame.zs
    nz = len(zs)
    dz = zs[1] - zs[0]
    strategies = candidate_strategies(dom, xp, anchor, params, problem.h)
    moves = []
    for mv_req in candidate_moves(dom, xp, params):
        mv = dom.make_move(xp, mv_req)
        is_exit = bool(dirichlet_patch is not None and mv.crossed and dirichlet_patch(mv.landing))
        pen_h = (
            mv.penal_weight * float(problem.h(mv.landing))
            if (mv.crossed and not is_exit)
            else 0.0
        )
        g_val = float(g_exit(mv.landing)) if is_exit else 0.0
        t_loc = (mv.landing[0] - xs[0]) / (xs[1] - xs[0])
        i0 = int(np.clip(math.floor(t_loc), 0, len(xs) - 2))
        w = min(max(t_loc - i0, 0.0), 1.0)
        moves.append((mv_req, is_exit, pen_h, g_val, i0, w))
    ns, nm = len(strategies), len(moves)
    delta = np.empty((ns * nm, nz))
    exit_vals = {}
    for s, strat in enumerate(strategies):
        fz = _f_over_z(problem, xp, zs, strat)
        for m, (mv_req, is_exit, pen_h, g_val, _, _) in enumerate(moves):
            drift = float(strat.p @ mv_req) + 0.5 * float(mv_req @ strat.Gamma @ mv_req)
            delta[s * nm + m] = drift + frame.dt * fz - pen_h
    z1 = frame.grow * (zs[None, :] + delta)
    hi_mask = z1 >= frame.cap_M
    lo_mask = z1 <= -frame.cap_M
    jdx = np.clip(np.searchsorted(zs, z1, side="right") - 1, 0, nz - 2)
    wz = np.clip((z1 - zs[jdx]) / dz, 0.0, 1.0)
    for m, (_, is_exit, _, g_val, _, _) in enumerate(moves):
        if not is_exit:
            continue
        for s in range(ns):
            b = s * nm + m
            exit_vals[b] = zs + frame.disc * (g_val - z1[b])
    return _RowPlan(
        chi_x=chi_x,
        n_strategies=ns,
        n_moves=nm,
        col_i0=np.array([mv[4] for mv in moves], dtype=int),
        col_w=np.array([mv[5] for mv in moves]),
        move_of_branch=np.tile(np.arange(nm), ns),
        delta=delta,
        jdx=jdx,
        wz=wz,
        hi_mask=hi_mask,
        lo_mask=lo_mask,
        exit_vals=exit_vals,
        exit_moves=tuple(m for m, mv in enumerate(moves) if mv[1]),
    )


def _apply_row(V, rp: _RowPlan, frame: _SweepFrame, count_exits: bool):
    """Best worst-case branch values over the score grid at one node."""
    nz = len(frame.zs)
    C = (1.0 - rp.col_w)[:, None] * V[rp.col_i0] + rp.col_w[:, None] * V[rp.col_i0 + 1]
    rows = C[rp.move_of_branch]
    left = np.take_along_axis(rows, rp.jdx, axis=1)
    right = np.take_along_axis(rows, rp.jdx + 1, axis=1)
    vals = frame.disc * ((1.0 - rp.wz) * left + rp.wz * right) - rp.delta
    for b, ev in rp.exit_vals.items():
        vals[b] = ev
    np.copyto(vals, -rp.chi_x, where=rp.hi_mask)
    np.copyto(vals, rp.chi_x, where=rp.lo_mask)
    vals3 = vals.reshape(rp.n_strategies, rp.n_moves, nz)
    worst = vals3.min(axis=1)
    s_star = worst.argmax(axis=0)
    cols = np.arange(nz)
    best = worst[s_star, cols]
    hits = 0
    if count_exits and rp.exit_moves:
        winners = vals3[s_star, :, cols].argmin(axis=1)
        hits = int(np.isin(winners, rp.exit_moves).sum())
    return best, hits


def _build_plan(problem, caps, params, anchor, dirichlet_patch, g_exit):
    dom = problem.domain
    if dom.dim != 1:
        raise ValidationError("the fixed-point solver is one-dimensional")
    disc = _discount(problem, params)
    base = GridField.build(dom, grid_spacing(dom, params))
    xs = base.x_nodes
    zs = z_grid(params, caps.cap_M)
    if not np.all(np.abs(zs) < caps.cap_M):
        raise ValidationError("score nodes must lie strictly inside the caps")
    chi_nodes = np.array([caps.chi_at(np.array([x])) for x in xs])
    frame = _SweepFrame(
        xs=xs,
        zs=zs,
        chi_nodes=chi_nodes,
        disc=disc,
        grow=1.0 / disc,
        dt=params.time_step,
        cap_M=caps.cap_M,
    )
    plans = [
        _plan_row(
            np.array([x]), chi_nodes[i], frame, problem, params, anchor, dirichlet_patch, g_exit
        )
        for i, x in enumerate(xs)
    ]
    return frame, plans


def _sweep(V, frame: _SweepFrame, plans, count_exits: bool):
    new = np.empty_like(V)
    hits = 0
    for i, rp in enumerate(plans):
        new[i], h = _apply_row(V, rp, frame, count_exits)
        hits += h
    if not np.all(np.isfinite(new)):
        raise NumericAbort("non-finite values in the fixed-point sweep")
    return new, hits


def _check_value_shape(V, frame: _SweepFrame):
    want = (len(frame.xs), len(frame.zs))
    if V.shape != want:
        raise ValidationError(f"value array has shape {V.shape}, expected {want}")


def r_eps_apply(V, problem, caps: CapSpec, params: GameParams, anchor=None):
    """One sweep of the score-capped operator over the (state, score) grid.

    Returns ``(V_new, exit_hits)``; ``exit_hits`` is always 0 here (no
    absorbing wall part).  With a fixed ``anchor`` driving the
    candidate announcements the map is affine in V with nonnegative
    interpolation weights, hence a sup-norm contraction with factor
    ``exp(-lambda dt)``; by default the anchor is re-extracted from V.
    """
    V = np.asarray(V, dtype=float)
    frame, plans = _prepare(problem, caps, params, V, anchor, None, None)
    return _sweep(V, frame, plans, count_exits=False)


def r_eps_mixed(
    V,
    problem,
    caps: CapSpec,
    params: GameParams,
    dirichlet_patch=None,
    g_exit=None,
    anchor=None,
):
    """One sweep of the capped operator with an absorbing wall part.

    ``dirichlet_patch`` is a predicate selecting the absorbing part of
    the boundary (default: the problem's own), ``g_exit`` the payoff
    paid there (default: the problem's own).  A step landing on the
    absorbing part with the score inside the caps stops the game with
    value ``z + disc * (g_exit(landing) - z')`` — the score the
    minimizer conceded, plus the discounted gap between the exit payoff
    and the post-round score.  Caps take precedence.  Returns
    ``(V_new, exit_hits)`` with ``exit_hits`` counting grid cells whose
    optimal continuation stops on the absorbing part.
    """
    V = np.asarray(V, dtype=float)
    patch = dirichlet_patch if dirichlet_patch is not None else problem.is_dirichlet
    g = g_exit if g_exit is not None else problem.g_exit
    frame, plans = _prepare(problem, caps, params, V, anchor, patch, g)
    return _sweep(V, frame, plans, count_exits=True)


def _prepare(problem, caps, params, V, anchor, patch, g):
    frame_probe = None
    if anchor is None:
        dom = problem.domain
        base = GridField.build(dom, grid_spacing(dom, params))
        zs = z_grid(params, caps.cap_M)
        chi_nodes = np.array([caps.chi_at(np.array([x])) for x in base.x_nodes])
        if V.shape != (len(base.x_nodes), len(zs)):
            raise ValidationError(
                f"value array has shape {V.shape}, expected {(len(base.x_nodes), len(zs))}"
            )
        anchor = _anchor_field(base, V, zs, chi_nodes)
    frame, plans = _build_plan(problem, caps, params, anchor, patch, g)
    _check_value_shape(V, frame)
    return frame, plans


@dataclass
class FixedPointValue:
    """Converged score-capped game value and its solution profiles."""

    problem: object
    params: GameParams
    caps: CapSpec
    x_nodes: np.ndarray
    z_nodes: np.ndarray
    V: np.ndarray
    residuals: list = field(default_factory=list)
    iterations: int = 0
    dirichlet_exits: int = 0

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else math.inf

    @property
    def chi_nodes(self) -> np.ndarray:
        return np.array([self.caps.chi_at(np.array([x])) for x in self.x_nodes])

    def cap_excess(self) -> float:
        """sup over the grid of |V| - chi, positive where the designed
        bound is breached (the breach lives in the near-cap score bands
        when the step size is far above the barrier regime eps0)."""
        return float(np.max(np.abs(self.V) - self.chi_nodes[:, None]))

    def u_profile(self) -> np.ndarray:
        """Largest score still winning for the maximizer per node:
        sup{z : V - z > 0}, exact zeros excluded; on the grid the
        linear crossing lands on the node either way, so the strictness
        only fixes the convention at exactly-zero plateaus."""
        return _sign_change(self.z_nodes, self.V - self.z_nodes[None, :], upper=True)

    def v_profile(self) -> np.ndarray:
        """Smallest losing score per node: inf{z : V - z < 0}."""
        return _sign_change(self.z_nodes, self.V - self.z_nodes[None, :], upper=False)


def extract_u_elliptic(value: FixedPointValue, x) -> float:
    """Upper solution profile linearly interpolated at a state point."""
    xq = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
    return float(np.interp(xq, value.x_nodes, value.u_profile()))


def extract_v_elliptic(value: FixedPointValue, x) -> float:
    """Lower solution profile linearly interpolated at a state point."""
    xq = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
    return float(np.interp(xq, value.x_nodes, value.v_profile()))


def solve_fixed_point(
    problem,
    caps: CapSpec | None,
    params: GameParams,
    tol: float = 1e-8,
    *,
    anchor=None,
    max_iter: int | None = None,
    anchor_tol: float | None = None,
    max_rounds: int = 60,
) -> FixedPointValue:
    """Iterate the capped operator from zero to its unique fixed point.

    Runs in outer rounds: within a round the candidate-driving anchor
    is frozen, so the sweep map is literally fixed and contracts
    geometrically at rate ``exp(-lambda dt)``; between rounds the
    anchor is re-extracted from the current value with damping
    (refreshing it every sweep lets the anchor—value feedback oscillate
    instead of settling).  Early rounds run at a loose tolerance
    proportional to the last anchor movement; once the anchor settles
    within ``anchor_tol`` (default: a quarter of the score spacing, the
    resolution at which the anchor is meaningful) a final round
    polishes the value down to ``tol``.  Passing an explicit ``anchor``
    freezes it for a single round solved directly at ``tol``.  Aborts
    with the residual history if a round exhausts its contraction
    budget, or with the movement history if the rounds do not settle.
    """
    if caps is None:
        caps = build_caps(problem, params)
    dom = problem.domain
    lam = problem.lambda_rate
    dt = params.time_step
    if max_iter is None:
        max_iter = 10 * int(math.ceil(math.log(max(1.0 / tol, 10.0)) / (lam * dt)))
    base = GridField.build(dom, grid_spacing(dom, params))
    xs = base.x_nodes
    zs = z_grid(params, caps.cap_M)
    if anchor_tol is None:
        anchor_tol = 0.25 * (zs[1] - zs[0])
    chi_nodes = np.array([caps.chi_at(np.array([x])) for x in xs])
    _warn_if_cap_small(problem, caps, xs, lam)
    patch = getattr(problem, "is_dirichlet", None)
    g = getattr(problem, "g_exit", None)
    mixed = patch is not None
    V = np.zeros((len(xs), len(zs)))
    residuals: list = []
    anchor_vals = anchor.values.copy() if anchor is not None else np.zeros(len(xs))
    frozen = anchor is not None
    last_move = math.inf
    anchor_moves: list = []
    total_sweeps = 0
    hits = 0
    for _ in range(max_rounds):
        polishing = frozen or last_move <= anchor_tol
        round_tol = tol if polishing else max(tol, 0.02 * last_move)
        frame, plans = _build_plan(
            problem, caps, params, base.with_values(anchor_vals), patch, g
        )
        for _ in range(max_iter):
            V_new, hits = _sweep(V, frame, plans, count_exits=mixed)
            res = float(np.max(np.abs(V_new - V)))
            residuals.append(res)
            total_sweeps += 1
            V = V_new
            if res <= round_tol:
                break
        else:
            tail = ", ".join(f"{r:.3g}" for r in residuals[-8:])
            raise NumericAbort(
                f"fixed point not reached in {max_iter} sweeps at tol={round_tol:g}; "
                f"last residuals: {tail}"
            )
        if polishing:
            return FixedPointValue(
                problem=problem,
                params=params,
                caps=caps,
                x_nodes=xs,
                z_nodes=zs,
                V=V,
                residuals=residuals,
                iterations=total_sweeps,
                dirichlet_exits=hits,
            )
        fresh = _anchor_field(base, V, zs, chi_nodes).values
        move = float(np.max(np.abs(fresh - anchor_vals)))
        anchor_moves.append(move)
        last_move = move
        if move <= anchor_tol:
            anchor_vals = fresh  # final polish round with the settled anchor
        else:
            anchor_vals = 0.5 * (anchor_vals + fresh)
    tail = ", ".join(f"{m:.3g}" for m in anchor_moves[-8:])
    raise NumericAbort(
        f"candidate anchor did not settle in {max_rounds} rounds at "
        f"anchor_tol={anchor_tol:g}; last moves: {tail}"
    )


def _warn_if_cap_small(problem, caps: CapSpec, xs, lam: float):
    """Heuristic lower bound on the cap for the fixed point to dominate
    the forcing: cap_M > (1 + lambda (1 + 2 sup psi) + sup|f|) / eta."""
    eta = getattr(problem, "eta_margin", 0.0)
    if not eta or eta <= 0.0:
        return
    p0 = np.zeros(problem.domain.dim)
    G0 = np.zeros((problem.domain.dim, problem.domain.dim))
    c_star = max(abs(float(problem.f(np.array([x]), 0.0, p0, G0))) for x in xs)
    m0 = (1.0 + lam * (1.0 + 2.0 * caps.psi_sup) + c_star) / eta
    if not caps.cap_M > m0:
        warnings.warn(
            f"cap_M={caps.cap_M:g} is below the heuristic threshold {m0:g}; "
            "the caps may clip the solution",
            RuntimeWarning,
            stacklevel=3,
        )
