"""Command-line interface: ``adiael reduce | validate | oracle``.

Exit codes: 0 success, 2 input error (unreadable or invalid config, bad
flags or parameters), 3 numerical failure.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .elimination import reduce
from .errors import AdiaelError, InvalidArgumentError, NumericalError
from .lindblad import BipartiteModel, boson_ops, oscillator_spec, qubit_ops
from .oracles import (
    JCParams,
    LabFrameParams,
    bloch_form,
    jc_reduced,
    labframe_reduced,
)
from .quadrature import QuadratureConfig
from .validation import run_validation

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

CSV_COLUMNS = ("g", "t", "discrepancy_manifold", "discrepancy_product")

log = logging.getLogger("adiael")


class ConfigError(InvalidArgumentError):
    """Configuration file problem, with a ``path:line: message`` rendering."""


# ---------------------------------------------------------------- serialization


def complex_to_json(z):
    return [float(np.real(z)), float(np.imag(z))]


def matrix_to_json(M):
    return [[complex_to_json(z) for z in row] for row in np.asarray(M)]


def matrix_from_json(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def dump_json(obj):
    """Canonical text form: 2-space indent, shortest round-trip floats, trailing newline."""
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def load_schema(name):
    text = resources.files("adiael").joinpath("schema", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


# ---------------------------------------------------------------- config ingestion


def _value_lines(text):
    """Map JSON paths (tuples of keys / indices) to the 1-based line of each value."""
    dec = json.JSONDecoder()
    lines = {}
    ws = " \t\r\n"

    def line_of(pos):
        return text.count("\n", 0, pos) + 1

    def skip(pos):
        while pos < len(text) and text[pos] in ws:
            pos += 1
        return pos

    def walk(pos, path):
        pos = skip(pos)
        lines[path] = line_of(pos)
        ch = text[pos]
        if ch == "{":
            pos = skip(pos + 1)
            if text[pos] == "}":
                return pos + 1
            while True:
                key, pos = dec.raw_decode(text, skip(pos))
                pos = skip(pos) + 1  # ':'
                pos = skip(walk(pos, path + (key,)))
                if text[pos] == "}":
                    return pos + 1
                pos += 1  # ','
        if ch == "[":
            pos = skip(pos + 1)
            if text[pos] == "]":
                return pos + 1
            i = 0
            while True:
                pos = skip(walk(pos, path + (i,)))
                i += 1
                if text[pos] == "]":
                    return pos + 1
                pos += 1
        _, end = dec.raw_decode(text, pos)
        return end

    walk(0, ())
    return lines


def read_config(path):
    """Parse and schema-check a model configuration file.

    Raises
    ------
    ConfigError
        With a ``path:line:`` prefixed message on unreadable files, syntax
        errors and schema violations.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(load_schema("model_config"))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = _value_lines(text)
        msgs = []
        for err in errors:
            where = tuple(err.absolute_path)
            loc = "/".join(map(str, where)) or "<root>"
            msgs.append(f"{path}:{lines.get(where, 1)}: {loc}: {err.message}")
        raise ConfigError("\n".join(msgs))
    return doc


def _square_literal(rows, dim, what):
    M = matrix_from_json(rows)
    if M.shape != (dim, dim):
        raise ConfigError(f"{what} must be {dim}x{dim}, got {M.shape[0]}x{M.shape[1]}")
    return M


def build_model(doc):
    """:class:`BipartiteModel` from a validated configuration document."""
    dA, dB = doc["dims"]["A"], doc["dims"]["B"]
    lb = doc["lindblad_B"]
    N = lb["fock_cutoff"]
    if N != dB:
        raise ConfigError(f"dims.B = {dB} must equal lindblad_B.fock_cutoff = {N}")
    spec_B = oscillator_spec(
        lb.get("omega_B", 0.0), lb["kappa"], lb.get("kappa_phi", 0.0), lb.get("n_th", 0.0), N
    )
    H = doc["hamiltonian_A"]
    sm, sp, sx, sz = qubit_ops()
    if "preset" in H:
        if dA != 2:
            raise ConfigError("preset qubit_sigma_z needs dims.A = 2")
        H_A = -0.5 * H["omega_eg"] * sz
    else:
        H_A = _square_literal(H["matrix"], dA, "hamiltonian_A.matrix")
    b, bd, _ = boson_ops(N)
    couplings = []
    names = []
    for i, c in enumerate(doc["couplings"]):
        if "preset" in c:
            if dA != 2:
                raise ConfigError(f"coupling preset {c['preset']} needs dims.A = 2")
            names.append(c["preset"])
            if c["preset"] == "jaynes_cummings":
                couplings += [(sp, b), (sm, bd)]
            else:
                couplings.append((sx, b + bd))
        else:
            couplings.append(
                (
                    _square_literal(c["A"], dA, f"couplings/{i}/A"),
                    _square_literal(c["B"], dB, f"couplings/{i}/B"),
                )
            )
            names.append("literal")
    return BipartiteModel(H_A, spec_B, tuple(couplings), doc["g"], fock_cutoff=N,
                          name="+".join(names))


def _solver(doc):
    s = doc.get("solver", {})
    q = QuadratureConfig(tol=s.get("tol", 1e-9), decay_folds=s.get("decay_folds", 40.0))
    return s.get("method", "direct"), q


def _with_defaults(doc):
    out = json.loads(json.dumps(doc))
    lb = out["lindblad_B"]
    for key in ("omega_B", "kappa_phi", "n_th"):
        lb.setdefault(key, 0.0)
    method, q = _solver(doc)
    out["solver"] = {"method": method, "tol": q.tol, "decay_folds": q.decay_folds}
    out.setdefault("order", 2)
    return out


# ---------------------------------------------------------------- commands


def cmd_reduce(args):
    doc = read_config(args.config)
    model = build_model(doc)
    method, q = _solver(doc)
    order = doc.get("order", 2)
    reduced = reduce(model, order, method=method, q=q)
    gauge = [0.0] + reduced.gauge_residuals()
    out = {
        "format": "adiael.reduced_model/1",
        "model": _with_defaults(doc),
        "epsilon": float(model.epsilon),
        "orders": [
            {
                "order": j,
                "method": term.method,
                "generator": matrix_to_json(term.generator),
                "correction": matrix_to_json(term.correction),
                "invariance_residual": float(term.residual),
                "gauge_residual": float(gauge[j]),
            }
            for j, term in enumerate(reduced.orders)
        ],
        "rho_B": matrix_to_json(reduced.rho_B),
        "warnings": list(reduced.warnings),
    }
    _write(args.out, dump_json(out))
    return EXIT_OK


def _parse_range(text, what, log_spaced):
    try:
        start, stop, count = text.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError:
        raise InvalidArgumentError(f"{what} must look like start:stop:count, got {text!r}") from None
    if count < 1:
        raise InvalidArgumentError(f"{what} count must be >= 1")
    if log_spaced:
        if start <= 0 or stop <= 0:
            raise InvalidArgumentError(f"{what} bounds must be positive for log spacing")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def cmd_validate(args):
    doc = read_config(args.config)
    model = build_model(doc)
    method, _ = _solver(doc)
    order = doc.get("order", 2) if args.order is None else args.order
    g_values = (
        _parse_range(args.g_sweep, "--g-sweep", True) if args.g_sweep else [model.g]
    )
    times = _parse_range(args.times, "--times", False)
    report = run_validation(model, g_values, times, seed=args.seed, order=order,
                            method=method, threads=args.threads)

    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([repr(float(row[c])) for c in CSV_COLUMNS])
    _write(args.out, buf.getvalue())

    summary = {"format": "adiael.validation_summary/1", **report.summary(),
               "csv_columns": list(CSV_COLUMNS)}
    summary_path = args.summary or _summary_path(args.out)
    _write(summary_path, dump_json(summary))
    return EXIT_OK


def _summary_path(out):
    if out in (None, "-"):
        return None
    root, _ = os.path.splitext(out)
    return root + ".summary.json"


def cmd_oracle(args):
    if args.example == "jc":
        p = JCParams(args.kappa, args.kappa_phi, args.delta, args.n_th, args.g)
        kk = p.kappa + p.kappa_phi
        rate = 4 * p.g**2 / abs(p.gamma) ** 2
        out = {
            "example": "jc",
            "params": vars_of(p),
            "gamma": complex_to_json(p.gamma),
            "decay_rate": (1 + p.n_th) * kk * rate,
            "excitation_rate": p.n_th * kk * rate,
            "shift": (1 + 2 * p.n_th) * p.delta * rate,
            "generator": matrix_to_json(jc_reduced(p)),
        }
    else:
        p = LabFrameParams(args.kappa, args.kappa_phi, args.omega_B, args.omega_eg, args.n_th, args.g)
        G, X, Y = labframe_reduced(p)
        drift, affine, z_bar, r_z = bloch_form(p)
        out = {
            "example": "labframe",
            "params": vars_of(p),
            "X": matrix_to_json(X),
            "Y": float(Y),
            "det_X": float(np.real(np.linalg.det(X))),
            "trace_X": float(np.real(np.trace(X))),
            "rank_X": int(np.linalg.matrix_rank(X, tol=1e-12 * max(np.abs(X).max(), 1e-300))),
            "bloch_drift": np.real(drift).tolist(),
            "bloch_affine": np.real(affine).tolist(),
            "z_bar": float(z_bar),
            "r_z": float(r_z),
            "generator": matrix_to_json(G),
        }
    _write(args.out, dump_json(out))
    return EXIT_OK


def vars_of(p):
    return {k: float(v) for k, v in vars(p).items()}


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="adiael",
        description="Adiabatic elimination of a fast dissipative subsystem.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="compute reduced generators and corrections")
    p.add_argument("config", help="model configuration (JSON)")
    p.add_argument("-o", "--out", default="-", help="output JSON path (default stdout)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("validate", help="compare reduced and full dynamics")
    p.add_argument("config", help="model configuration (JSON)")
    p.add_argument("-o", "--out", default="-", help="sweep CSV path (default stdout)")
    p.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")
    p.add_argument("--g-sweep", metavar="START:STOP:COUNT",
                   help="log-spaced coupling sweep replacing the config's g")
    p.add_argument("--times", default="0:50:11", metavar="START:STOP:COUNT",
                   help="linear time grid (default 0:50:11)")
    p.add_argument("--seed", type=int, default=0, help="seed for the random initial state")
    p.add_argument("--order", type=int, help="truncation order (default: config order)")
    p.add_argument("--threads", type=int,
                   help="worker threads over sweep points (default: $ADIAEL_THREADS or 1)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="closed-form reduced models")
    p.add_argument("example", choices=("jc", "labframe"))
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--kappa-phi", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.0, help="jc detuning")
    p.add_argument("--omega-B", dest="omega_B", type=float, default=5.0)
    p.add_argument("--omega-eg", dest="omega_eg", type=float, default=5.0)
    p.add_argument("--n-th", type=float, default=0.0)
    p.add_argument("--g", type=float, default=0.05)
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"adiael: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (AdiaelError, OSError) as exc:
        print(f"adiael: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
