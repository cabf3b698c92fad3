"""Hot loops with a compiled implementation and a pure-Python fallback.

The compiled module is used when it imports; setting ``BPICDSC_PURE_PYTHON=1``
forces the fallback. Both produce identical results.
"""

import importlib
import os

from . import _pycore


def _load_compiled():
    if os.environ.get("BPICDSC_PURE_PYTHON") == "1":
        return None
    try:
        return importlib.import_module(__name__ + "._ccore")
    except ImportError:
        return None


_ccore = _load_compiled()

_impl = _ccore if _ccore is not None else _pycore
BACKEND = "compiled" if _ccore is not None else "python"

sphere_search = _impl.sphere_search
sc_decode = _impl.sc_decode
stack_decode = _impl.stack_decode
crc_remainder = _impl.crc_remainder

MODE_SCS = _pycore.MODE_SCS
MODE_SEQ = _pycore.MODE_SEQ
OUTCOME_DECODED = _pycore.OUTCOME_DECODED
OUTCOME_CRC_PASS = _pycore.OUTCOME_CRC_PASS
OUTCOME_CRC_FAIL = _pycore.OUTCOME_CRC_FAIL
OUTCOME_EXHAUSTED = _pycore.OUTCOME_EXHAUSTED


def backends():
    """Available implementations keyed by name (used by tests and benchmarks)."""
    out = {"python": _pycore}
    if _ccore is not None:
        out["compiled"] = _ccore
    return out
