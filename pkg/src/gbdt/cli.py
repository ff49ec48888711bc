"""Command line entry point: ``gbdt {validate,evolve,transform,sample,verify}``."""
import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .darboux import psi_tilde, transfer_at_points, transform_hamiltonians
from .engine import diagnose_triple, evolve, make_state
from .errors import GbdtError, SingularSError
from .scenario import load_scenario
from .verification import run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _finite(obj):
    # non-finite floats are written as strings so the output stays strict JSON
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _json(obj):
    return json.dumps(_finite(obj), indent=2, sort_keys=True, default=_default,
                      allow_nan=False) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _cplx(m):
    m = np.asarray(m, dtype=complex)
    return np.stack([m.real, m.imag], axis=-1).tolist()


def parse_tol(items):
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"--tol expects NAME=VALUE, got {item!r}")
        out[name.strip()] = float(value)
    return out


def parse_times(text):
    return [float(v) for v in text.split(",") if v.strip()]


def parse_grid(text, r):
    """``"a:b:N,a:b:N"`` (one range per axis); a single range is reused on every axis."""
    items = [s for s in text.split(",") if s.strip()]
    if len(items) == 1:
        items = items * r
    if len(items) != r:
        raise ValueError(f"--grid needs {r} axis ranges, got {len(items)}")
    axes = []
    for item in items:
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad grid range {item!r}; expected a:b:N")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError(f"grid count must be positive in {item!r}")
        axes.append(np.linspace(a, b, n))
    return axes


def state_at(scenario, t):
    """State at time ``t`` by RK4 with a step no larger than the scenario's."""
    if t == 0:
        tr = scenario.triple
        return make_state(0.0, tr.Pi0, tr.S0, tr.A)
    steps = max(1, math.ceil(abs(t) / abs(scenario.step) - 1e-9))
    return evolve(scenario.triple, scenario.family, t, steps)[-1]


def cmd_validate(scenario, args):
    diag = diagnose_triple(scenario.triple)
    payload = {
        "valid": diag.ok,
        "identity_residual": diag.identity_residual,
        "identity_tolerance": diag.identity_tolerance,
        "spectral_distance": diag.spectral_distance,
        "problems": [{"condition": c, "message": m} for c, m in diag.problems],
        "n": scenario.triple.n, "m": scenario.triple.m, "r": scenario.triple.r,
    }
    if args.out:
        write_atomic(os.path.join(args.out, "validation.json"), _json(payload))
    for cond, msg in diag.problems:
        print(f"invalid [{cond}]: {msg}", file=sys.stderr)
    if diag.ok:
        print("valid")
    return EXIT_OK if diag.ok else EXIT_FAIL


def cmd_evolve(scenario, args):
    traj = evolve(scenario.triple, scenario.family, scenario.t_end, scenario.steps)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "identity_residual", "s_condition", "pi_norm", "s_max_eig", "s_min_eig"])
    for st in traj.states:
        eig = np.linalg.eigvalsh(st.S)
        w.writerow([repr(st.t), repr(st.identity_residual), repr(st.s_condition),
                    repr(float(np.linalg.norm(st.Pi))), repr(float(eig[-1])), repr(float(eig[0]))])
    out = args.out or "."
    write_atomic(os.path.join(out, "trajectory.csv"), buf.getvalue())
    states = [{"t": st.t, "Pi": _cplx(st.Pi), "S": _cplx(st.S),
               "s_condition": st.s_condition, "identity_residual": st.identity_residual}
              for st in traj.states]
    write_atomic(os.path.join(out, "trajectory.json"),
                 _json({"step": traj.step, "states": states}))
    print(f"evolved {len(traj) - 1} steps to t={scenario.t_end:g}; "
          f"max identity residual {traj.max_identity_residual():.3e}")
    return EXIT_OK


def cmd_transform(scenario, args):
    times = parse_times(args.t) if args.t else [0.0, scenario.t_end]
    records = []
    status = EXIT_OK
    for t in times:
        st = state_at(scenario, t)
        try:
            ws = transfer_at_points(st, scenario.triple)
            hts = transform_hamiltonians(st, scenario.triple, scenario.family).H_tilde
        except SingularSError as exc:
            print(f"skipped t={t:g}: {exc}", file=sys.stderr)
            status = EXIT_FAIL
            continue
        for k, (w, h, ht) in enumerate(zip(ws, scenario.family.evaluate(st.t), hts)):
            records.append({
                "t": st.t, "k": k, "c_k": float(scenario.triple.c[k]),
                "w": _cplx(w.value), "unitarity_defect": w.unitarity_defect(),
                "H": _cplx(h), "H_tilde": _cplx(ht),
                "H_tilde_eigenvalues": np.linalg.eigvalsh(ht).tolist(),
            })
    write_atomic(os.path.join(args.out or ".", "transform.json"), _json({"records": records}))
    print(f"wrote {len(records)} transformed Hamiltonians")
    return status


def sample_rows(scenario, times, axes):
    """Rows ``(t, zeta_1..zeta_r, i, j, re, im)`` and the count of singular times."""
    rows, omitted = [], 0
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T
    for t in times:
        st = state_at(scenario, t)
        try:
            samples = [psi_tilde(st, scenario.triple, z).value for z in grid]
        except SingularSError:
            omitted += 1
            continue
        m, n = samples[0].shape
        for z, val in zip(grid, samples):
            for i in range(m):
                for j in range(n):
                    rows.append((st.t, *z.tolist(), i, j, val[i, j].real, val[i, j].imag))
    return rows, omitted


def cmd_sample(scenario, args):
    r = scenario.triple.r
    times = parse_times(args.t) if args.t else [0.0]
    axes = parse_grid(args.grid or "-1:1:5", r)
    rows, omitted = sample_rows(scenario, times, axes)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *[f"zeta_{k + 1}" for k in range(r)], "i", "j", "re", "im"])
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    buf.write(f"# omitted_singular_times={omitted}\n")
    write_atomic(os.path.join(args.out or ".", "samples.csv"), buf.getvalue())
    print(f"wrote {len(rows)} samples ({omitted} singular time(s) omitted)")
    return EXIT_OK


def cmd_verify(scenario, args):
    report = run_suite(scenario)
    write_atomic(os.path.join(args.out or ".", "report.json"), _json(report.to_dict()))
    for line in report.summary_lines():
        print(line)
    print("PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {
    "validate": cmd_validate,
    "evolve": cmd_evolve,
    "transform": cmd_transform,
    "sample": cmd_sample,
    "verify": cmd_verify,
}


def build_parser():
    p = argparse.ArgumentParser(prog="gbdt", description=__doc__)
    p.add_argument("--version", action="version", version=f"gbdt {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--scenario", required=True, metavar="PATH")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", default=[])
    p.add_argument("--seed", type=int)
    p.add_argument("--t", metavar="VALUES", help="comma-separated times")
    p.add_argument("--grid", metavar="RANGES", help="a:b:N per axis, comma-separated")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        overrides = parse_tol(args.tol)
        if overrides:
            scenario.tolerances.override(**overrides)
            scenario.tolerance_overrides = {**scenario.tolerance_overrides, **overrides}
        if args.seed is not None:
            scenario.seed = args.seed
    except (GbdtError, KeyError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command not in ("validate", "verify"):
        diag = diagnose_triple(scenario.triple)
        if diag.problems:
            for cond, msg in diag.problems:
                print(f"invalid [{cond}]: {msg}", file=sys.stderr)
            return EXIT_FAIL
    try:
        return COMMANDS[args.command](scenario, args)
    except (GbdtError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
