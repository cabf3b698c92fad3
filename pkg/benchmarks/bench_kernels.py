"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from bpicdsc import _kernels
from bpicdsc._kernels import MODE_SCS, MODE_SEQ
from bpicdsc.polar import bias_table, construct_code


def _cases():
    rng = np.random.default_rng(0)
    n = 8
    R = np.triu(rng.standard_normal((n, n)))
    R[np.diag_indices(n)] = np.abs(R.diagonal()) + 0.5
    z = R @ rng.choice([-3.0, -1.0, 1.0, 3.0], n) + 0.3 * rng.standard_normal(n)
    levels = np.array([-3.0, -1.0, 1.0, 3.0])

    spec = construct_code(256, 139, crc_len=11, crc_poly=0xE21)
    frozen = spec.frozen.astype(np.uint8)
    llr = rng.normal(2.0, 2.0, 256)
    bias = bias_table(spec, 1.0).log_omega
    flat = np.zeros(257)
    bits = rng.integers(0, 2, 150).astype(np.uint8)
    return {
        "sphere_search 8x8 16-QAM": lambda k: k.sphere_search(R, z, levels),
        "sc_decode eta=256": lambda k: k.sc_decode(llr, frozen),
        "stack_decode scs L=16": lambda k: k.stack_decode(llr, frozen, flat, 16, MODE_SCS, 0, 0, None),
        "stack_decode seq L=16": lambda k: k.stack_decode(llr, frozen, bias, 16, MODE_SEQ, 0, 0, None),
        "crc_remainder 150 bits": lambda k: k.crc_remainder(bits, 0x621, 11),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    impls = _kernels.backends()
    if "compiled" not in impls:
        print("compiled core not built; timing the python backend only")
    print(f"{'kernel':28s}" + "".join(f"{name:>14s}" for name in impls) + "   speed-up")
    for label, fn in _cases().items():
        times = {}
        for name, impl in impls.items():
            t = timeit.Timer(lambda: fn(impl))
            loops, _ = t.autorange()
            times[name] = min(t.repeat(args.repeat, loops)) / loops
        row = f"{label:28s}" + "".join(f"{times[n] * 1e6:12.1f}us" for n in impls)
        if "compiled" in times:
            row += f"   {times['python'] / times['compiled']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
