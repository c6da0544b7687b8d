"""Single-field corruptions of certificate envelopes."""

import copy
import re

from liouville import certificates as C

_DIGITS = re.compile(r"^-?[0-9]+$")


def leaves(obj, path=()):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from leaves(obj[k], path + (k,))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from leaves(v, path + (i,))
    else:
        yield path, obj


def corrupt_value(v):
    """One changed character for strings and numbers; a flip for booleans."""
    if isinstance(v, bool):
        return not v
    if isinstance(v, int):
        return v + 1
    if isinstance(v, float):
        return v + 1.0
    if v is None:
        return 0
    if isinstance(v, str):
        if _DIGITS.match(v):
            last = v[-1]
            return v[:-1] + ("1" if last == "0" else str(int(last) - 1))
        return v[:-1] + ("x" if v[-1:] != "x" else "y") if v else "x"
    raise TypeError(type(v))


def _set(obj, path, value):
    for k in path[:-1]:
        obj = obj[k]
    obj[path[-1]] = value


def corruptions(env, reseal):
    """Every single-leaf corruption of kind/payload/meta; payload edits are re-sealed when asked."""
    for path, v in leaves(env):
        if path == ("meta", "seal") and reseal:
            continue
        bad = copy.deepcopy(env)
        _set(bad, path, corrupt_value(v))
        if reseal and path[0] != "meta":
            C.reseal(bad)
        yield path, bad
