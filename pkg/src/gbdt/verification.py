"""Invariant checks on evolved trajectories and the aggregate report.

Checks that rely on central differences in t are evaluated at two spacings,
``2 * step`` and ``step`` of the trajectory, and report the ratio of the two
residuals. Smooth second-order behaviour gives a ratio near 4; a ratio
outside ``[ratio_low, ratio_high]`` fails the check even if the residual
itself is small. When both residuals sit at rounding level the quantity is
exact and no ratio is reported.
"""
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import __version__
from .darboux import (
    SINGULAR_COND,
    psi_tilde,
    psi_tilde_space_derivative,
    quadratic_form,
    quadratic_form_direct,
    s_inverse_pi,
    transfer_at_points,
    transform_hamiltonians,
)
from .engine import diagnose_triple, evolve, ode_rhs
from .errors import ShapeError, SingularSError
from .matrix_core import expm, hermitian_spectrum

logger = logging.getLogger(__name__)

__all__ = [
    "BoxDomain",
    "CheckResult",
    "Tolerances",
    "VerificationReport",
    "check_conservation",
    "check_energy_box",
    "check_identity",
    "check_monotonicity",
    "check_pde",
    "check_pde_c8",
    "check_positivity",
    "check_quadratic_form",
    "check_spectrum",
    "check_unitarity",
    "probe_indices",
    "probe_zetas",
    "run_suite",
]

PASS, FAIL, NA = "pass", "fail", "n/a"
MAX_GRID_POINTS = 10**6


@dataclass(frozen=True)
class Tolerances:
    identity: float = 1e-8          # relative to 1 + ||Pi(0)||_F^2
    unitarity: float = 1e-10
    spectrum: float = 1e-9
    quadratic_form: float = 1e-10   # relative to 1 + ||psi~^* H~ psi~||_F
    pde: float = 1e-3               # relative to 1 + ||d psi~/dt||_F
    conservation: float = 1e-3      # relative to 1 + ||sum(H~ - H)||_F
    energy: float = 1e-3            # relative to 1 + |flux|
    monotonicity: float = 1e-12
    positivity: float = 1e-10
    exact_floor: float = 1e-9       # relative; below this both levels count as exact
    ratio_low: float = 3.5
    ratio_high: float = 4.5

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def override(self, **values):
        unknown = set(values) - set(self.names())
        if unknown:
            raise KeyError(f"unknown tolerance name(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in values.items()})


@dataclass(frozen=True)
class BoxDomain:
    """Spatial box ``a_k <= zeta_k <= b_k`` with ``grid[k]`` samples per axis."""

    bounds: tuple
    grid: tuple

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        grid = tuple(int(g) for g in self.grid)
        if len(bounds) != len(grid) or not bounds:
            raise ShapeError("bounds and grid must have the same positive length")
        for a, b in bounds:
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ShapeError(f"invalid interval [{a}, {b}]")
        if any(g < 2 for g in grid):
            raise ShapeError("every grid count must be at least 2")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "grid", grid)

    @property
    def r(self):
        return len(self.bounds)

    def refined(self):
        """Same box with every spacing halved."""
        return BoxDomain(self.bounds, tuple(2 * g - 1 for g in self.grid))

    def axes(self):
        return [np.linspace(a, b, g) for (a, b), g in zip(self.bounds, self.grid)]


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    verdict: str
    convergence_ratio: Optional[float] = None
    detail: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    checks: list
    scenario_digest: str
    tool_version: str = __version__

    @property
    def passed(self):
        return all(c.verdict != FAIL for c in self.checks)

    def get(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "tool": "gbdt",
            "tool_version": self.tool_version,
            "scenario_digest": self.scenario_digest,
            "verdict": PASS if self.passed else FAIL,
            "checks": [asdict(c) for c in self.checks],
        }

    def summary_lines(self):
        lines = []
        for c in self.checks:
            ratio = "" if c.convergence_ratio is None else f"  ratio={c.convergence_ratio:.3f}"
            lines.append(f"{c.verdict.upper():4s}  {c.name:16s} residual={c.residual:.3e}"
                         f"  tol={c.tolerance:.1e}{ratio}")
        return lines


def _verdict(residual, tolerance, ratio=None, tol=None):
    if not residual <= tolerance:
        return FAIL
    if ratio is not None and not tol.ratio_low <= ratio <= tol.ratio_high:
        return FAIL
    return PASS


def _ratio(coarse, fine, scale, tol):
    """Convergence ratio, or ``None`` when both levels are at rounding level."""
    floor = tol.exact_floor * (1.0 + scale)
    if coarse <= floor and fine <= floor:
        return None
    if fine == 0.0:
        return float("inf")
    return coarse / fine


def probe_indices(trajectory, count=5, margin=2):
    """``count`` uniformly spaced interior state indices, ``margin`` away from the ends."""
    n = len(trajectory) - 1
    if n < 2 * margin + count - 1:
        raise ValueError(f"trajectory too short for {count} interior probes")
    idx = [int(round(j * n / (count + 1))) for j in range(1, count + 1)]
    return [min(max(i, margin), n - margin) for i in idx]


def probe_zetas(r, seed, count=3):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(count, r))


def check_identity(trajectory, triple, tol=Tolerances()):
    scale = triple.identity_scale()
    residual = max(s.identity_residual for s in trajectory.states)
    tolerance = tol.identity * scale
    return CheckResult("identity", residual, tolerance, _verdict(residual, tolerance),
                       detail={"states": len(trajectory)})


def _usable(trajectory, indices, max_cond=1e8):
    good, skipped = [], []
    for i in indices:
        (good if trajectory[i].s_condition < max_cond else skipped).append(i)
    for i in skipped:
        logger.info("skipping probe t=%g: cond(S)=%.3e", trajectory[i].t, trajectory[i].s_condition)
    return good, [trajectory[i].t for i in skipped]


def check_unitarity(trajectory, triple, tol=Tolerances(), indices=None):
    """``max ||w_A(t,c_k) w_A(t,c_k)^* - I||_F`` over states with cond(S) < 1e8.

    Every state of the trajectory is checked unless ``indices`` is given.
    """
    indices = range(len(trajectory)) if indices is None else indices
    good, skipped = _usable(trajectory, indices)
    residual = floor = 0.0
    for i in good:
        st = trajectory[i]
        x = _x(st)
        for w, rk in zip(transfer_at_points(st, triple), triple.resolvents):
            residual = max(residual, w.unitarity_defect())
            # w w^* - I = i X R E R^* X^* for identity residual E
            gain = float(np.linalg.norm(x @ rk, 2)) ** 2
            floor = max(floor, gain * st.identity_residual)
    verdict = _verdict(residual, tol.unitarity) if good else NA
    return CheckResult("unitarity", residual, tol.unitarity, verdict,
                       detail={"probes": len(good), "skipped_t": skipped,
                               "identity_amplified": floor})


def check_spectrum(trajectory, triple, family, tol=Tolerances(), indices=None):
    indices = probe_indices(trajectory) if indices is None else indices
    good, skipped = _usable(trajectory, indices)
    residual = 0.0
    for i in good:
        st = trajectory[i]
        ws = transfer_at_points(st, triple)
        for w, h in zip(ws, family.evaluate(st.t)):
            ht = w.value @ h @ w.value.conj().T
            residual = max(
                residual,
                float(np.max(np.abs(hermitian_spectrum(ht) - hermitian_spectrum(h)))),
                float(np.linalg.norm(ht - ht.conj().T)),
            )
    verdict = _verdict(residual, tol.spectrum) if good else NA
    return CheckResult("spectrum", residual, tol.spectrum, verdict,
                       detail={"probes": len(good), "skipped_t": skipped})


def _x(state):
    return s_inverse_pi(state, SINGULAR_COND).conj().T


def _central(trajectory, i, offset, fn):
    h = trajectory.step * offset
    return (fn(trajectory[i + offset]) - fn(trajectory[i - offset])) / (2.0 * h)


def _two_level(trajectory, indices, residual_fn):
    """Evaluate ``residual_fn(i, offset) -> (residual, scale)`` at offsets 2 and 1."""
    coarse = fine = scale = 0.0
    good, skipped = [], []
    for i in indices:
        try:
            rc, sc = residual_fn(i, 2)
            rf, sf = residual_fn(i, 1)
        except SingularSError as exc:
            logger.info("skipping probe t=%g: %s", trajectory[i].t, exc)
            skipped.append(trajectory[i].t)
            continue
        good.append(i)
        coarse, fine, scale = max(coarse, rc), max(fine, rf), max(scale, sc, sf)
    return coarse, fine, scale, good, skipped


def _convergence_result(name, coarse, fine, scale, tolerance, tol, good, skipped, extra=None):
    detail = {"coarse_residual": coarse, "probes": len(good), "skipped_t": skipped}
    detail.update(extra or {})
    if not good:
        return CheckResult(name, 0.0, tolerance, NA, detail=detail)
    ratio = _ratio(coarse, fine, scale, tol)
    bound = tolerance * (1.0 + scale)
    detail["scale"] = scale
    return CheckResult(name, fine, bound, _verdict(fine, bound, ratio, tol), ratio, detail)


def check_pde(trajectory, triple, family, probe_points, tol=Tolerances(), indices=None):
    """Residual ``||D_t psi~ - sum_k H~_k d psi~/d zeta_k||_F`` at probe points.

    ``D_t`` is the central difference of ``psi~`` along the trajectory; the
    space derivatives are analytic.
    """
    indices = probe_indices(trajectory) if indices is None else indices
    zetas = np.atleast_2d(probe_points)

    def residual(i, offset):
        st = trajectory[i]
        hts = transform_hamiltonians(st, triple, family).H_tilde
        worst = scale = 0.0
        for z in zetas:
            dt = _central(trajectory, i, offset,
                          lambda s: psi_tilde(s, triple, z).value)
            rhs = sum(ht @ psi_tilde_space_derivative(st, triple, z, k)
                      for k, ht in enumerate(hts))
            worst = max(worst, float(np.linalg.norm(dt - rhs)))
            scale = max(scale, float(np.linalg.norm(rhs)))
        return worst, scale

    c, f, s, good, skipped = _two_level(trajectory, indices, residual)
    return _convergence_result("pde", c, f, s, tol.pde, tol, good, skipped)


def check_pde_c8(trajectory, triple, family, tol=Tolerances(), indices=None):
    """``(Pi^* S^{-1})' = i sum_k H~_k Pi^* S^{-1} R_k`` with a central difference on the left."""
    indices = probe_indices(trajectory) if indices is None else indices

    def residual(i, offset):
        st = trajectory[i]
        hts = transform_hamiltonians(st, triple, family).H_tilde
        x = _x(st)
        rhs = 1j * sum(ht @ x @ rk for ht, rk in zip(hts, triple.resolvents))
        lhs = _central(trajectory, i, offset, _x)
        return float(np.linalg.norm(lhs - rhs)), float(np.linalg.norm(rhs))

    c, f, s, good, skipped = _two_level(trajectory, indices, residual)
    return _convergence_result("pde_c8", c, f, s, tol.pde, tol, good, skipped)


def check_conservation(trajectory, triple, family, tol=Tolerances(), indices=None):
    """``(Pi^* S^{-1} Pi)' = sum_k (H~_k - H_k)`` with a central difference on the left."""
    indices = probe_indices(trajectory) if indices is None else indices

    def residual(i, offset):
        st = trajectory[i]
        hts = transform_hamiltonians(st, triple, family).H_tilde
        rhs = sum(ht - h for ht, h in zip(hts, family.evaluate(st.t)))
        lhs = _central(trajectory, i, offset, lambda s: _x(s) @ s.Pi)
        return float(np.linalg.norm(lhs - rhs)), float(np.linalg.norm(rhs))

    c, f, s, good, skipped = _two_level(trajectory, indices, residual)
    return _convergence_result("conservation", c, f, s, tol.conservation, tol, good, skipped)


def check_quadratic_form(trajectory, triple, family, probe_points, tol=Tolerances(),
                         indices=None):
    """Simplified ``psi~^* H~_k psi~`` against the direct product, all k."""
    indices = probe_indices(trajectory) if indices is None else indices
    good, skipped = _usable(trajectory, indices, SINGULAR_COND)
    residual = 0.0
    for i in good:
        for z in np.atleast_2d(probe_points):
            for k in range(triple.r):
                simple = quadratic_form(trajectory[i], triple, family, z, k)
                direct = quadratic_form_direct(trajectory[i], triple, family, z, k)
                err = float(np.linalg.norm(simple - direct)) / (1.0 + float(np.linalg.norm(direct)))
                residual = max(residual, err)
    verdict = _verdict(residual, tol.quadratic_form) if good else NA
    return CheckResult("quadratic_form", residual, tol.quadratic_form, verdict,
                       detail={"probes": len(good), "skipped_t": skipped, "relative": True})


def _axis_exponentials(triple, box):
    """Per axis k, the stack ``exp(i zeta R_k)`` over the grid values of axis k."""
    return [np.stack([expm(1j * z * rk) for z in axis])
            for axis, rk in zip(box.axes(), triple.resolvents)]


def _vector_field(x, exps, hvec):
    """``psi~ h`` on the tensor grid, shape ``(N_1, ..., N_r, m)``."""
    u = hvec
    for ek in reversed(exps):
        u = np.einsum("gab,...b->g...a", ek, u)
    return np.einsum("ma,...a->...m", x, u)


def _trapezoid_all(values, axes):
    for axis in reversed(axes):
        values = np.trapezoid(values, axis, axis=-1)
    return values


def energy_terms(states, triple, family, box, hvec, exps=None):
    """``(int_V |psi~ h|^2 at each state, boundary flux at the middle state)``.

    ``states`` is ``(before, centre, after)``; the flux is evaluated at the
    centre state.
    """
    exps = _axis_exponentials(triple, box) if exps is None else exps
    axes = box.axes()
    norms = []
    for st in (states[0], states[2]):
        v = _vector_field(_x(st), exps, hvec)
        norms.append(_trapezoid_all(np.sum(np.abs(v) ** 2, axis=-1), axes))
    mid = states[1]
    v = _vector_field(_x(mid), exps, hvec)
    hts = transform_hamiltonians(mid, triple, family).H_tilde
    flux = 0.0
    for k, ht in enumerate(hts):
        dens = np.einsum("...a,ab,...b->...", v.conj(), ht, v).real
        other = [ax for j, ax in enumerate(axes) if j != k]
        upper = _trapezoid_all(np.take(dens, -1, axis=k), other)
        lower = _trapezoid_all(np.take(dens, 0, axis=k), other)
        flux += upper - lower
    return norms, float(flux)


def check_energy_box(trajectory, triple, family, box, hvec=None, tol=Tolerances(),
                     indices=None):
    """Time derivative of ``int_V |psi~ h|^2`` against the boundary flux.

    The coarse level uses time spacing ``2 * step`` and ``box.grid``; the
    fine level halves both. The volume and face integrals use the tensor
    trapezoid rule.
    """
    if box.r != triple.r:
        raise ShapeError(f"box has {box.r} axes but r = {triple.r}")
    hvec = np.eye(triple.n, dtype=complex)[:, 0] if hvec is None else np.asarray(hvec, complex)
    if hvec.shape != (triple.n,):
        raise ShapeError(f"h must have {triple.n} entries")
    fine_box = box.refined()
    if int(np.prod(fine_box.grid)) * triple.n > MAX_GRID_POINTS:
        raise ShapeError("energy grid too large")
    indices = probe_indices(trajectory) if indices is None else indices
    levels = [(2, box, _axis_exponentials(triple, box)),
              (1, fine_box, _axis_exponentials(triple, fine_box))]
    residuals = [0.0, 0.0]
    scale = 0.0
    samples = []
    good, skipped = [], []
    for i in indices:
        try:
            row = {"t": trajectory[i].t}
            for lvl, (offset, bx, exps) in enumerate(levels):
                sts = (trajectory[i - offset], trajectory[i], trajectory[i + offset])
                (q0, q1), flux = energy_terms(sts, triple, family, bx, hvec, exps)
                lhs = (q1 - q0) / (2.0 * offset * trajectory.step)
                residuals[lvl] = max(residuals[lvl], abs(lhs - flux))
                scale = max(scale, abs(flux))
                row[f"lhs_{lvl}"], row[f"flux_{lvl}"] = float(lhs), flux
            samples.append(row)
            good.append(i)
        except SingularSError as exc:
            logger.info("skipping energy probe t=%g: %s", trajectory[i].t, exc)
            skipped.append(trajectory[i].t)
    return _convergence_result(
        "energy_box", residuals[0], residuals[1], scale, tol.energy, tol, good, skipped,
        extra={"samples": samples, "grid": list(box.grid), "time_spacing": 2 * trajectory.step},
    )


def check_monotonicity(trajectory, triple, family, tol=Tolerances(), indices=None):
    """``S'(t) <= 0`` for positive semidefinite families; ``S(t) < 0`` when ``S(0) < 0``."""
    indices = probe_indices(trajectory) if indices is None else indices
    probes = [0] + list(indices) + [len(trajectory) - 1]
    if not all(family.is_psd(trajectory[i].t) for i in probes):
        return CheckResult("monotonicity", 0.0, tol.monotonicity, NA,
                           detail={"reason": "family is not positive semidefinite"})
    worst = -np.inf
    for i in probes:
        st = trajectory[i]
        _, ds = ode_rhs(st.t, st.Pi, st.S, triple, family)
        worst = max(worst, float(hermitian_spectrum(ds)[-1]))
    detail = {"max_eig_dS": worst}
    verdict = _verdict(worst, tol.monotonicity)
    top0 = float(hermitian_spectrum(trajectory[0].S)[-1])
    if top0 < 0 and trajectory.step > 0:
        tops = [float(hermitian_spectrum(s.S)[-1]) for s in trajectory.states]
        detail["max_eig_S"] = max(tops)
        detail["max_eig_S0"] = top0
        if max(tops) > top0 + 1e-10 or max(tops) >= 0:
            verdict = FAIL
    return CheckResult("monotonicity", worst, tol.monotonicity, verdict, detail=detail)


def check_positivity(trajectory, triple, family, tol=Tolerances(), indices=None):
    """``H_k >= 0`` implies ``H~_k >= 0``."""
    indices = probe_indices(trajectory) if indices is None else indices
    if not all(family.is_psd(trajectory[i].t) for i in indices):
        return CheckResult("positivity", 0.0, tol.positivity, NA,
                           detail={"reason": "family is not positive semidefinite"})
    good, skipped = _usable(trajectory, indices)
    lowest = np.inf
    for i in good:
        for ht in transform_hamiltonians(trajectory[i], triple, family).H_tilde:
            lowest = min(lowest, float(hermitian_spectrum(ht)[0]))
    if not good:
        return CheckResult("positivity", 0.0, tol.positivity, NA, detail={"skipped_t": skipped})
    residual = max(0.0, -lowest)
    return CheckResult("positivity", residual, tol.positivity,
                       _verdict(residual, tol.positivity),
                       detail={"min_eig": lowest, "skipped_t": skipped})


def _validation_report(problems, digest):
    checks = [CheckResult(f"validation:{cond}", float("nan"), 0.0, FAIL, detail={"message": msg})
              for cond, msg in problems]
    return VerificationReport(sorted(checks, key=lambda c: c.name), digest)


def run_suite(scenario):
    """Evolve ``scenario`` and run every applicable check.

    An invalid triple yields a report that only lists the violated
    conditions; nothing is evolved.
    """
    digest = scenario.digest()
    tol = scenario.tolerances
    triple, family = scenario.triple, scenario.family
    diag = diagnose_triple(triple)
    if diag.problems:
        return _validation_report(diag.problems, digest)
    try:
        family.check_compatible(triple)
    except Exception as exc:
        return _validation_report([(getattr(exc, "condition", "dimension"), str(exc))], digest)

    traj = evolve(triple, family, scenario.t_end, scenario.steps,
                  identity_tol=float("inf"))
    idx = probe_indices(traj)
    zetas = probe_zetas(triple.r, scenario.seed)
    box = scenario.box or default_box(triple.r)
    checks = [
        check_identity(traj, triple, tol),
        check_unitarity(traj, triple, tol),
        check_spectrum(traj, triple, family, tol, idx),
        check_pde(traj, triple, family, zetas, tol, idx),
        check_pde_c8(traj, triple, family, tol, idx),
        check_conservation(traj, triple, family, tol, idx),
        check_quadratic_form(traj, triple, family, zetas, tol, idx),
        check_energy_box(traj, triple, family, box, scenario.h_vector, tol, idx),
        check_monotonicity(traj, triple, family, tol, idx),
        check_positivity(traj, triple, family, tol, idx),
    ]
    return VerificationReport(sorted(checks, key=lambda c: c.name), digest)


def default_box(r):
    return BoxDomain([(0.0, 1.0)] * r, [64 if r == 1 else 24] * r)
