"""Self-contained JSON certificate envelopes and their offline re-verification.

Every payload stores its inputs next to its results. Verification recomputes
the results from the stored inputs (at stored precisions where the algorithm
takes one) and demands an exact match of the whole payload. A SHA-256 seal
over the canonical envelope also flags edits to fields that no check constrains,
such as the wall time.
"""

from __future__ import annotations

import hashlib
import json
import time

from gmpy2 import mpz

from . import __version__
from .classes import membership_probe, named_phi, verify_witness
from .contfrac import CFExpansion, lagrange_check, legendre_locate
from .errors import CertificateInvalid, LiouvilleError
from .exact import int_to_str, rat_to_json, str_to_int
from .haupt import StageCertificate, recheck_certificate
from .power import PrimeCFLiouville, exponent_scan, lemma_inf_scan, minkkoro_check
from .reals import real_from_descriptor

KINDS = ("witness", "stage", "lagrange", "legendre", "rati-stage", "scan", "probe")
TOOL = "liouville"
DEFAULT_MAX_BITS = 1 << 25


def _canon(obj):
    return json.loads(json.dumps(obj, sort_keys=True))


def _iv(iv):
    return {"lo": rat_to_json(iv.lo), "hi": rat_to_json(iv.hi)}


# ---------------------------------------------------------------------------
# payload emitters: inputs -> full payload

def witness_payload(zeta_desc, q, N):
    res = verify_witness(real_from_descriptor(zeta_desc), mpz(q), int(N))
    out = {"inputs": {"zeta": zeta_desc, "q": int_to_str(q), "N": int(N)}, "holds": res.holds}
    if res.holds:
        w = res.to_json(zeta_desc)
        out.update({k: w[k] for k in ("q", "p", "norm_num", "norm_den", "slack_num", "slack_den",
                                      "precision_bits")})
    else:
        out.update({"q": int_to_str(res.q), "lower": rat_to_json(res.lower), "reason": res.reason})
    return out


def stage_payload(cert: StageCertificate):
    return cert.to_json()


def lagrange_payload(value_desc, quotients, n):
    cf = CFExpansion([str_to_int(r) for r in quotients])
    c = lagrange_check(cf, real_from_descriptor(value_desc), int(n))
    return {"inputs": {"value": value_desc, "quotients": list(quotients), "n": int(n)},
            "holds": c.holds, "s_n": int_to_str(c.s_n), "t_n": int_to_str(c.t_n),
            "distance": _iv(c.distance), "lower": rat_to_json(c.lower),
            "upper": rat_to_json(c.upper), "weak_upper": rat_to_json(c.weak_upper),
            "precision_bits": c.precision_bits}


def legendre_payload(x_desc, p, q):
    n = legendre_locate(real_from_descriptor(x_desc), mpz(p), mpz(q))
    return {"inputs": {"x": x_desc, "p": int_to_str(p), "q": int_to_str(q)},
            "hypothesis_holds": n is not None, "index": n}


def rati_payload(z: PrimeCFLiouville):
    return z.to_json()


def scan_payload(scan, x_desc, **params):
    x = real_from_descriptor(x_desc)
    inputs = {"scan": scan, "x": x_desc, **params}
    if scan == "exponent":
        r = exponent_scan(x, str_to_int(params["H"]))
        return {"inputs": inputs, "depth": r.depth, "max_lo": rat_to_json(r.max_lo),
                "max_hi": rat_to_json(r.max_hi),
                "entries": [{"n": n, "s": int_to_str(s), "t": int_to_str(t), "exponent": _iv(e)}
                            for n, s, t, e in r.entries]}
    if scan == "lemma-inf":
        from .exact import rat_from_json

        r = lemma_inf_scan(x, int(params["a"]), int(params["b"]), rat_from_json(params["eta"]),
                           str_to_int(params["H"]))
        return {"inputs": inputs, "direct_cutoff": r.direct_cutoff,
                "convergents_scanned": r.convergents_scanned,
                "hits": [{"p": int_to_str(h.p), "q": int_to_str(h.q), "left": _iv(h.left)}
                         for h in r.hits]}
    if scan == "minkkoro":
        H = params.get("H")
        r = minkkoro_check(x, str_to_int(params["Q"]), None if H is None else str_to_int(H))
        return {"inputs": inputs, "unique": r.unique, "convergent_index": r.convergent_index,
                "solutions": [[int_to_str(a), int_to_str(b)] for a, b in r.solutions]}
    raise ValueError(f"unknown scan {scan!r}")


def probe_payload(zeta_desc, phi_name, N_list, variant):
    rep = membership_probe(real_from_descriptor(zeta_desc), named_phi(phi_name),
                           [int(N) for N in N_list], variant)
    return {"inputs": {"zeta": zeta_desc, "phi": phi_name, "N": [int(N) for N in N_list],
                       "variant": variant}, **rep.to_json()}


# ---------------------------------------------------------------------------
# envelopes

def seal_of(env) -> str:
    """SHA-256 over the canonical JSON of the envelope without its seal."""
    meta = {k: v for k, v in env["meta"].items() if k != "seal"}
    body = json.dumps({"kind": env["kind"], "payload": env["payload"], "meta": meta},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(body.encode()).hexdigest()


def reseal(env):
    env["meta"]["seal"] = seal_of(env)
    return env


def envelope(kind, payload, max_bits=DEFAULT_MAX_BITS, started=None):
    if kind not in KINDS:
        raise ValueError(f"unknown certificate kind {kind!r}")
    wall = 0.0 if started is None else time.perf_counter() - started
    env = {"kind": kind, "payload": _canon(payload),
           "meta": {"tool": TOOL, "version": __version__, "max_bits": int(max_bits),
                    "wall_time_s": round(wall, 6)}}
    return reseal(env)


def _recompute(kind, payload):
    inp = payload.get("inputs")
    if kind == "witness":
        return witness_payload(inp["zeta"], str_to_int(inp["q"]), inp["N"])
    if kind == "lagrange":
        return lagrange_payload(inp["value"], inp["quotients"], inp["n"])
    if kind == "legendre":
        return legendre_payload(inp["x"], str_to_int(inp["p"]), str_to_int(inp["q"]))
    if kind == "scan":
        params = {k: v for k, v in inp.items() if k not in ("scan", "x")}
        return scan_payload(inp["scan"], inp["x"], **params)
    if kind == "probe":
        return probe_payload(inp["zeta"], inp["phi"], inp["N"], inp["variant"])
    raise AssertionError(kind)  # pragma: no cover


def verify_envelope(env) -> tuple:
    """``(status, reason)``: status is "valid", "refuted" (certified negative) or "invalid"."""
    try:
        if not isinstance(env, dict) or set(env) != {"kind", "payload", "meta"}:
            return "invalid", "envelope must have exactly kind, payload and meta"
        kind, payload, meta = env["kind"], env["payload"], env["meta"]
        if kind not in KINDS:
            return "invalid", f"unknown kind {kind!r}"
        if meta.get("tool") != TOOL or meta.get("version") != __version__:
            return "invalid", "tool or version mismatch"
        if not isinstance(meta.get("max_bits"), int) or meta["max_bits"] < 1:
            return "invalid", "max_bits must be a positive integer"
        if meta.get("seal") != seal_of(env):
            return "invalid", "seal does not match the envelope contents"
        if kind == "stage":
            ok, reason = recheck_certificate(payload)
            return ("valid" if ok else "invalid"), reason
        if kind == "rati-stage":
            z = PrimeCFLiouville.from_json(payload)
            if _canon(z.to_json()) != payload:
                return "invalid", "payload is not in canonical form"
            ok, reason = z.validate()
            return ("valid" if ok else "invalid"), reason
        fresh = _canon(_recompute(kind, payload))
        if fresh != payload:
            diff = sorted(k for k in set(fresh) | set(payload) if fresh.get(k) != payload.get(k))
            return "invalid", f"recomputed payload differs in: {', '.join(diff)}"
        negative = payload.get("holds") is False or payload.get("verdict") is False \
            or payload.get("hypothesis_holds") is False or payload.get("unique") is False
        return ("refuted" if negative else "valid"), "ok"
    except (LiouvilleError, AssertionError, LookupError, TypeError, ValueError, AttributeError,
            ArithmeticError) as exc:
        return "invalid", f"{type(exc).__name__}: {exc}"


def require_valid(env):
    status, reason = verify_envelope(env)
    if status == "invalid":
        raise CertificateInvalid(reason)
    return status
