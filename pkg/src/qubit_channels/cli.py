"""Command-line interface: ``qubit-channels <command> [channel JSON]``.

Channel JSON is ``{"M": [[...], [...], [...]], "t": [x, y, z]}`` or the
diagonal shorthand ``{"lambda": [l1, l2, l3], "t": [x, y, z]}`` (``t``
defaults to zero). It is read from the positional argument, ``--file``, or
standard input, in that order.

Exit codes: 0 success, 1 malformed input, 2 map not completely positive,
3 channel neither unital nor extremal (decompose).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .canonical import to_canonical
from .channel import channel_from_dict, channel_to_dict
from .cp import DEFAULT_TOL, choi, cp_report, kraus_decomposition
from .decompose import DEFAULT_EPS, DecompositionPlan, decompose, recompose
from .errors import ChannelError, ConsistencyError, NotCompletelyPositiveError, UnsupportedDecompositionError
from .geometry import classification_report, pancake_margin
from .sampling import KINDS, sample_channel

EXIT_OK, EXIT_MALFORMED, EXIT_NOT_CP, EXIT_UNSUPPORTED = 0, 1, 2, 3

SCHEMAS = """\
JSON formats:
  channel   {"M": [[m11,m12,m13],[m21,m22,m23],[m31,m32,m33]], "t": [t1,t2,t3]}
            or {"lambda": [l1,l2,l3], "t": [t1,t2,t3]}
  verify    CP report: lambda, t (diagonal frame), q, r, q_prod, bound, a, b,
            detC, choi_eigs, choi ([re, im] entries), verdict, unital, margin,
            upper_root_contact
  classify  {"kraus_rank", "indivisible", "pure_output": {"class", "points"},
             "extremal": null | {"class", "u", "v", ...}}
  canonical channel fields plus "lambda", "t_canonical", "R1", "R2"
  kraus     list of 2x2 matrices with [re, im] entries
  decompose {"kind", "target", "epsilon", "factors": [{"kind", ...}], "recomposition_error"}
  recompose reads a decompose plan, prints {"channel", "recomposition_error"}
"""


def _complex_pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _read_json(args) -> object:
    if args.input is not None and args.file is not None:
        raise ValueError("give the input either inline or with --file, not both")
    if args.input is not None:
        text = args.input
    elif args.file is not None:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()
    return json.loads(text)


def _read_channel(args):
    return channel_from_dict(_read_json(args))


def cmd_verify(args) -> tuple[object, int]:
    channel = _read_channel(args)
    report = cp_report(channel, args.tol)
    out = report.to_dict()
    scale = 0.5 if args.normalize_choi else 1.0
    out["choi"] = _complex_pairs(choi(channel) * scale)
    out["choi_eigs"] = (np.asarray(out["choi_eigs"]) * scale).tolist()
    out["choi_trace"] = 2.0 * scale
    return out, EXIT_NOT_CP if report.verdict.value == "NotCP" else EXIT_OK


def cmd_classify(args):
    return classification_report(_read_channel(args)), EXIT_OK


def cmd_canonical(args):
    ordering = args.ordering
    if ordering not in ("descending", "extremal"):
        ordering = tuple(int(x) for x in ordering.split(","))
    return to_canonical(_read_channel(args), ordering).to_dict(), EXIT_OK


def cmd_kraus(args):
    ops = kraus_decomposition(_read_channel(args), tol=args.tol)
    return [_complex_pairs(A) for A in ops], EXIT_OK


def cmd_decompose(args):
    return decompose(_read_channel(args), args.eps).to_dict(), EXIT_OK


def cmd_recompose(args):
    plan = DecompositionPlan.from_dict(_read_json(args))
    channel, error = recompose(plan)
    return {"channel": channel_to_dict(channel), "recomposition_error": error}, EXIT_OK


def cmd_sample(args):
    return channel_to_dict(sample_channel(args.seed, args.kind)), EXIT_OK


def cmd_pancake(args):
    rows = []
    a_values = np.arange(1, round(1 / args.step) + 1) * args.step
    for a in a_values:
        for c in np.arange(1, round(1 / args.step) + 1) * args.step * a * a:
            if c >= a * a:
                continue
            t3, (m_plus, m_minus) = pancake_margin(a, c)
            rows.append({"a": float(a), "c": float(c), "t3": t3, "margin_plus": m_plus, "margin_minus": m_minus})
    worst = max((max(r["margin_plus"], r["margin_minus"]) for r in rows), default=None)
    return {"rows": rows, "max_margin": worst}, EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the malformed-input code instead of argparse's 2, which means NotCP here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_MALFORMED, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qubit-channels",
        description="Qubit channel verification, classification and decomposition.",
        epilog=SCHEMAS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, channel_input=True):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=SCHEMAS, formatter_class=argparse.RawDescriptionHelpFormatter)
        if channel_input:
            p.add_argument("input", nargs="?", help="JSON text (default: read --file or standard input)")
            p.add_argument("--file", help="read JSON from this file")
        p.add_argument("--pretty", action="store_true", help="indent JSON output")
        p.set_defaults(func=func)
        return p

    add("verify", cmd_verify, "complete-positivity report").add_argument("--normalize-choi", action="store_true", help="report the trace-1 Choi matrix")
    sub.choices["verify"].add_argument("--tol", type=float, default=DEFAULT_TOL)
    add("classify", cmd_classify, "Kraus rank, pure outputs and extremal class")
    add("canonical", cmd_canonical, "signed singular value form").add_argument(
        "--ordering", default="descending", help='"descending", "extremal" or an axis order such as "2,0,1"'
    )
    add("kraus", cmd_kraus, "Kraus operators from the Choi eigenvectors").add_argument("--tol", type=float, default=DEFAULT_TOL)
    add("decompose", cmd_decompose, "factor a unital or extremal channel").add_argument("--eps", type=float, default=DEFAULT_EPS)
    add("recompose", cmd_recompose, "compose the factors of a plan and report the error")
    sample = add("sample", cmd_sample, "draw a random CP channel", channel_input=False)
    sample.add_argument("--seed", type=int, default=None)
    sample.add_argument("--kind", choices=KINDS, default="unital")
    add("pancake", cmd_pancake, "circle-contact margins on an (a, c) grid", channel_input=False).add_argument(
        "--step", type=float, default=0.1, help="grid step for a and for c / a^2"
    )
    return parser


def _validate(args) -> None:
    if getattr(args, "tol", 1.0) <= 0:
        raise ValueError("--tol must be positive")
    if not 0 < getattr(args, "eps", 0.25) < 0.5:
        raise ValueError("--eps must lie in (0, 1/2)")
    if not 0 < getattr(args, "step", 0.5) <= 1:
        raise ValueError("--step must lie in (0, 1]")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code or 0
    try:
        _validate(args)
        result, code = args.func(args)
    except NotCompletelyPositiveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CP
    except UnsupportedDecompositionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ChannelError, ConsistencyError, ValueError, OSError) as exc:
        # json.JSONDecodeError is a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    json.dump(result, sys.stdout, indent=2 if args.pretty else None)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
