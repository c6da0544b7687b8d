"""Command-line interface: construct, verify, probe, transform, scan and cf tools.

Exit codes: 0 valid, 1 certified refutation, 2 precision or budget exhausted,
64 usage or input error. Results are JSON on standard output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from gmpy2 import mpq, mpz

from . import __version__
from . import certificates as C
from .errors import (BudgetExceeded, CertificateInvalid, DomainError, InvalidDeletion, LiouvilleError,
                     PrecisionExhausted)
from .exact import int_to_str, rat_from_json, rat_to_json, str_to_int

EXIT_OK, EXIT_REFUTED, EXIT_EXHAUSTED, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# input helpers

def _load_json_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON: {exc}") from None
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None


def real_descriptor(text: str) -> dict:
    """A real given as a JSON file, a name (L, golden, ...), a rational "p/q" or inline JSON."""
    from .reals import NAMED

    if os.path.exists(text):
        d = _load_json_file(text)
        if isinstance(d, dict) and "kind" not in d and "zeta" in d:
            d = d["zeta"]
        if not isinstance(d, dict) or "kind" not in d:
            raise UsageError(f"{text}: not a real descriptor")
        return d
    if text in NAMED:
        return {"kind": "named", "name": text}
    try:
        x = mpq(text)
        return {"kind": "rational", "value": rat_to_json(x)}
    except (ValueError, ZeroDivisionError):
        pass
    try:
        d = json.loads(text)
    except json.JSONDecodeError:
        raise UsageError(f"cannot read a real from {text!r}") from None
    if not isinstance(d, dict) or "kind" not in d:
        raise UsageError(f"not a real descriptor: {text!r}")
    return d


def _real(text):
    from .reals import real_from_descriptor

    try:
        return real_from_descriptor(real_descriptor(text))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad real descriptor: {exc}") from None


def int_list(text: str):
    """``"2,3,5"`` or ``"2..10"`` (inclusive) or a mix."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty integer list")
    return out


def big_int(text: str):
    try:
        return str_to_int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def rational(text: str):
    try:
        return mpq(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


def _emit(obj, args):
    print(json.dumps(obj, indent=2 if args.pretty else None, sort_keys=True))


def _lambda_table(text):
    """``identity`` (Lam(i) = i, first 64 entries) or an explicit list ``"1,2,3"``."""
    if text == "identity":
        return list(range(1, 65))
    return int_list(text)


def _rf_coeffs(text):
    try:
        return [mpq(c) for c in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad coefficient list {text!r}") from None


# ---------------------------------------------------------------------------
# handlers; each returns an exit code

def cmd_construct_liouville(args):
    from .reals import make_series_liouville

    params = dict(kv.split("=", 1) for kv in args.series)
    if "M" not in params:
        raise UsageError("--series needs M=<base>")
    exps = args.exponents if args.exponents == "factorial" else [str_to_int(e) for e in args.exponents.split(",")]
    digits = args.digits if args.digits == "ones" else [str_to_int(d) for d in args.digits.split(",")]
    try:
        real = make_series_liouville(str_to_int(params["M"]), exps, digits)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(real.to_json(), args)
    return EXIT_OK


def cmd_construct_haupt(args):
    from .haupt import build

    kw = {}
    if args.mode == "analytic":
        if not args.zeta or not args.phi:
            raise UsageError("analytic mode needs --zeta and --phi")
        kw = {"zeta": _real(args.zeta), "phi": args.phi}
    f, _ = build(args.mode, args.stages, args.s_max, b1=args.b1, budget_bits=args.max_bits, **kw)
    manifest = f.to_manifest()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh)
    _emit(manifest, args)
    return EXIT_OK


def cmd_construct_rati(args):
    from .power import build_rati_zeta

    t0 = time.perf_counter()
    z = build_rati_zeta(args.stages)
    env = C.envelope("rati-stage", C.rati_payload(z), args.max_bits, t0)
    _emit(env, args)
    return EXIT_OK


def cmd_construct_phi(args):
    from .classes import phi_from_lambda

    ch = phi_from_lambda(_lambda_table(args.lam), args.N, args.variant, args.max_bits)
    _emit({"N": ch.N, "iota": ch.iota, "variant": ch.variant,
           "chain": [int_to_str(x) for x in ch.chain], "D": int_to_str(ch.D)}, args)
    return EXIT_OK


def cmd_verify_witness(args):
    t0 = time.perf_counter()
    payload = C.witness_payload(real_descriptor(args.zeta), args.q, args.N)
    _emit(C.envelope("witness", payload, args.max_bits, t0), args)
    return EXIT_OK if payload["holds"] else EXIT_REFUTED


def cmd_verify_stage(args):
    from .haupt import HauptFunction, verify_derivative_image
    from .reals import real_from_descriptor

    t0 = time.perf_counter()
    manifest = _load_json_file(args.manifest)
    try:
        f = HauptFunction.from_manifest(manifest)
        zeta = real_from_descriptor(manifest["zeta"])
    except (KeyError, TypeError, ValueError, AssertionError) as exc:
        raise UsageError(f"{args.manifest}: bad manifest: {exc}") from None
    cert = verify_derivative_image(f, args.s, zeta, args.m, max_precision=args.max_bits)
    _emit(C.envelope("stage", C.stage_payload(cert), args.max_bits, t0), args)
    return EXIT_OK


def cmd_verify_certificate(args):
    env = _load_json_file(args.file)
    status, reason = C.verify_envelope(env)
    _emit({"status": status, "reason": reason, "kind": env.get("kind") if isinstance(env, dict) else None},
          args)
    return EXIT_OK if status == "valid" else EXIT_REFUTED


def cmd_probe_class(args):
    t0 = time.perf_counter()
    payload = C.probe_payload(real_descriptor(args.zeta), args.phi, args.N, args.variant)
    _emit(C.envelope("probe", payload, args.max_bits, t0), args)
    return EXIT_OK if payload["verdict"] else EXIT_REFUTED


def cmd_probe_strong(args):
    from .classes import strong_profile

    p = strong_profile(_real(args.zeta), args.terms, _lambda_table(args.lam),
                       args.ratio_cap, max_precision=args.max_bits)
    _emit({"indices": list(p.indices), "selected": list(p.selected),
           "omegas": [{"lo": rat_to_json(w.lo), "hi": rat_to_json(w.hi)} for w in p.omegas],
           "strong": p.strong, "semistrong": p.semistrong, "scope": p.scope}, args)
    return EXIT_OK if (p.strong or p.semistrong) else EXIT_REFUTED


def cmd_probe_ultra(args):
    from .classes import ultra_probe

    r = ultra_probe(_real(args.zeta), args.k, args.q_max)
    _emit({"k": args.k, "q_max": int_to_str(args.q_max),
           "p": None if r.p is None else int_to_str(r.p),
           "q": None if r.q is None else int_to_str(r.q),
           "pruned": [int_to_str(q) for q in r.pruned], "scanned": r.scanned}, args)
    return EXIT_OK if r.q is not None else EXIT_REFUTED


def cmd_transform_maillet(args):
    from .maillet import maillet_image_witnesses

    ws = maillet_image_witnesses((args.P, args.Q), _real(args.zeta), args.N, args.q_max,
                                 max_precision=args.max_bits)
    out = [{"N": N, "witness": None} if w is None else w.to_json() for N, w in zip(args.N, ws)]
    _emit({"P": [rat_to_json(c) for c in args.P], "Q": [rat_to_json(c) for c in args.Q],
           "zeta": real_descriptor(args.zeta), "images": out}, args)
    return EXIT_OK if all(w is not None for w in ws) else EXIT_REFUTED


def cmd_scan(args):
    t0 = time.perf_counter()
    x = real_descriptor(args.x)
    if args.scan == "exponent":
        payload = C.scan_payload("exponent", x, H=int_to_str(args.H))
    elif args.scan == "lemma-inf":
        payload = C.scan_payload("lemma-inf", x, a=args.a, b=args.b, eta=rat_to_json(args.eta),
                                 H=int_to_str(args.H))
    else:
        params = {"Q": int_to_str(args.Q)}
        if args.H is not None:
            params["H"] = int_to_str(args.H)
        payload = C.scan_payload("minkkoro", x, **params)
    _emit(C.envelope("scan", payload, args.max_bits, t0), args)
    return EXIT_REFUTED if payload.get("unique") is False else EXIT_OK


def _cf_input(args):
    from .contfrac import parse_expansion
    from .reals import cf_prefix

    if args.file:
        try:
            with open(args.file, encoding="utf-8") as fh:
                return parse_expansion(fh.read(), complete=not args.prefix), None
        except OSError as exc:
            raise UsageError(f"{args.file}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(f"{args.file}: {exc}") from None
    if not args.x:
        raise UsageError("give --file or --x")
    desc = real_descriptor(args.x)
    from .reals import real_from_descriptor

    return cf_prefix(real_from_descriptor(desc), args.terms, max_precision=args.max_bits), desc


def cmd_cf(args):
    from .contfrac import delete_partial_quotients, format_expansion

    cf, desc = _cf_input(args)
    if args.cf_cmd == "expand":
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(format_expansion(cf))
        _emit({"quotients": [int_to_str(r) for r in cf.partial_quotients], "complete": cf.complete}, args)
        return EXIT_OK
    if args.cf_cmd == "delete":
        out = delete_partial_quotients(cf, args.T)
        _emit({"quotients": [int_to_str(r) for r in out.partial_quotients], "complete": out.complete}, args)
        return EXIT_OK
    # convergents
    if args.lagrange is not None or args.legendre is not None:
        if desc is None:
            raise UsageError("certificates need the value itself: use --x")
        t0 = time.perf_counter()
        if args.lagrange is not None:
            payload = C.lagrange_payload(desc, [int_to_str(r) for r in cf.partial_quotients], args.lagrange)
            env = C.envelope("lagrange", payload, args.max_bits, t0)
            ok = payload["holds"]
        else:
            p, q = args.legendre.numerator, args.legendre.denominator
            payload = C.legendre_payload(desc, p, q)
            env = C.envelope("legendre", payload, args.max_bits, t0)
            ok = payload["hypothesis_holds"]
        _emit(env, args)
        return EXIT_OK if ok else EXIT_REFUTED
    _emit({"convergents": [{"n": n, "s": int_to_str(s), "t": int_to_str(t)}
                           for n, (s, t) in enumerate(zip(cf.numerators, cf.denominators))]}, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS lets the flag appear at any level without a subcommand resetting it
    common.add_argument("--max-bits", type=int, default=argparse.SUPPRESS,
                        help="working-precision and size budget in bits (default 2^25)")
    common.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS,
                        help="indent the JSON output")

    p = _Parser(prog="liouville", description="Certified tools for Liouville numbers.",
                parents=[common])
    p.add_argument("--version", action="version", version=f"liouville {__version__}")
    top = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def group(name, help_):
        g = top.add_parser(name, help=help_, parents=[common])
        return g.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def sub(sp, name, fn, help_):
        s = sp.add_parser(name, help=help_, parents=[common])
        s.set_defaults(fn=fn)
        return s

    g = group("construct", "build reals and functions")
    s = sub(g, "liouville", cmd_construct_liouville, "series Liouville number descriptor")
    s.add_argument("--series", nargs="+", required=True, metavar="KEY=VALUE", help="e.g. M=10")
    s.add_argument("--exponents", default="factorial", help="'factorial' or a list e1,e2,...")
    s.add_argument("--digits", default="ones", help="'ones' or a list d1,d2,...")
    s = sub(g, "haupt", cmd_construct_haupt, "staged entire-function construction")
    s.add_argument("--mode", choices=("co-construct", "analytic"), default="co-construct")
    s.add_argument("--stages", type=int, default=4)
    s.add_argument("--s-max", type=int, default=0)
    s.add_argument("--b1", type=big_int, default=2)
    s.add_argument("--zeta", help="target real (analytic mode)")
    s.add_argument("--phi", help="phi table name (analytic mode)")
    s.add_argument("--out", help="also write the manifest here")
    s = sub(g, "rati", cmd_construct_rati, "continued fraction with prime convergent denominators")
    s.add_argument("--stages", type=int, default=6)
    s = sub(g, "phi-from-lambda", cmd_construct_phi, "phi(N) from a Lambda table")
    s.add_argument("--lam", default="identity", help="'identity' or a list")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--variant", choices=("strong", "semistrong"), default="strong")

    g = group("verify", "check witnesses, stages and certificates")
    s = sub(g, "witness", cmd_verify_witness, "certify ||q zeta|| < q^-N")
    s.add_argument("--zeta", required=True)
    s.add_argument("--q", type=big_int, required=True)
    s.add_argument("--N", type=int, required=True)
    s = sub(g, "stage", cmd_verify_stage, "certify a derivative image at one stage")
    s.add_argument("--manifest", required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--s", type=int, default=0)
    s = sub(g, "certificate", cmd_verify_certificate, "re-verify a certificate envelope offline")
    s.add_argument("--file", required=True)

    g = group("probe", "class membership probes over a finite range")
    s = sub(g, "class", cmd_probe_class, "phi-class membership over N")
    s.add_argument("--zeta", required=True)
    s.add_argument("--phi", required=True)
    s.add_argument("--N", type=int_list, required=True, help="e.g. 2..6")
    s.add_argument("--variant", choices=("Lphi", "Lphi*"), default="Lphi")
    s = sub(g, "strong", cmd_probe_strong, "strong / semistrong profile of a CF prefix")
    s.add_argument("--zeta", required=True)
    s.add_argument("--terms", type=int, default=8)
    s.add_argument("--lam", default="identity")
    s.add_argument("--ratio-cap", type=rational)
    s = sub(g, "ultra", cmd_probe_ultra, "k-fold ultra-Liouville search")
    s.add_argument("--zeta", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--q-max", type=big_int, required=True)

    g = group("transform", "images under rational functions")
    s = sub(g, "maillet", cmd_transform_maillet, "carry witnesses through P/Q")
    s.add_argument("--P", type=_rf_coeffs, required=True, help="coefficients, constant first")
    s.add_argument("--Q", type=_rf_coeffs, default=[mpq(1)])
    s.add_argument("--zeta", required=True)
    s.add_argument("--N", type=int_list, required=True)
    s.add_argument("--q-max", type=big_int)

    g = group("scan", "finite approximation-exponent scans")
    for name in ("exponent", "lemma-inf", "minkkoro"):
        s = sub(g, name, cmd_scan, f"{name} scan")
        s.set_defaults(scan=name)
        s.add_argument("--x", required=True)
    g.choices["exponent"].add_argument("--H", type=big_int, required=True)
    s = g.choices["lemma-inf"]
    s.add_argument("--a", type=int, required=True)
    s.add_argument("--b", type=int, required=True)
    s.add_argument("--eta", type=rational, required=True)
    s.add_argument("--H", type=big_int, required=True)
    s = g.choices["minkkoro"]
    s.add_argument("--Q", type=big_int, required=True)
    s.add_argument("--H", type=big_int)

    g = group("cf", "continued fraction tools")
    for name in ("expand", "delete", "convergents"):
        s = sub(g, name, cmd_cf, f"{name}")
        s.set_defaults(cf_cmd=name)
        s.add_argument("--file", help="expansion file")
        s.add_argument("--prefix", action="store_true", help="file holds a prefix, not the whole number")
        s.add_argument("--x", help="real to expand")
        s.add_argument("--terms", type=int, default=12)
    g.choices["expand"].add_argument("--out")
    g.choices["delete"].add_argument("--T", type=int_list, required=True,
                                     help="indices j; r_(j+1) is dropped")
    s = g.choices["convergents"]
    s.add_argument("--lagrange", type=int, metavar="n")
    s.add_argument("--legendre", type=rational, metavar="p/q")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    # set_defaults on the parser would rewrite the shared action defaults
    for name, value in (("max_bits", C.DEFAULT_MAX_BITS), ("pretty", False)):
        if not hasattr(args, name):
            setattr(args, name, value)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"liouville: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PrecisionExhausted, BudgetExceeded) as exc:
        print(f"liouville: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except InvalidDeletion as exc:
        print(f"liouville: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificateInvalid as exc:
        print(f"liouville: invalid certificate: {exc}", file=sys.stderr)
        return EXIT_REFUTED
    except (DomainError, LiouvilleError, ValueError) as exc:
        print(f"liouville: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
