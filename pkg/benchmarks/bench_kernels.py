"""Compare the compiled kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Both
backends are imported directly, so the environment switch is irrelevant.
"""

import argparse
import timeit

import numpy as np

from accessbound import eo
from accessbound._core import NORM_KINDS, fallback
from accessbound.toymodel import ToyTransformer

try:
    from accessbound._core import _kernels
except ImportError:
    _kernels = None


def toy_case(T, dim=8, layers=1):
    m = ToyTransformer.init_random(16, dim, layers=layers, heads=2, head_dim=4, mlp_dim=32, seed=0)
    args = m._layer_args()
    H0 = np.random.default_rng(0).normal(size=(T, dim))
    G = np.random.default_rng(1).normal(size=(T, dim))
    return args, H0, G, NORM_KINDS["linf"], m.norm_bound


def eo_case(p=2, D=3, max_l1=20):
    b = eo.basis_radius(p, D, "improved")
    C = eo.basis_classes(b, D)
    X = np.array([x for lead in range(max_l1 + 1) for x in eo._compositions(max_l1, D, lead) if any(x)],
                 dtype=np.int64)
    return X, C, max_l1


def bench(fn, repeat):
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return min(t.repeat(repeat, n)) / n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": fallback}
    if _kernels is not None:
        backends["compiled"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")

    rows = []
    for T, layers in ((4, 1), (16, 1), (32, 2)):
        la, H0, G, nk, nb = toy_case(T, layers=layers)
        times = {}
        for name, mod in backends.items():
            def fwd(mod=mod):
                return mod.transformer_forward(H0, *la, nk, nb, False)

            cache = fwd()

            def fb(mod=mod, cache=cache):
                return mod.transformer_backward(cache, *la, nk, nb, False, G, True)

            times[name] = (bench(fwd, args.repeat), bench(fb, args.repeat))
        rows.append((f"forward T={T} L={layers}", {k: v[0] for k, v in times.items()}))
        rows.append((f"backward T={T} L={layers}", {k: v[1] for k, v in times.items()}))

    X, C, ml = eo_case()
    rows.append((f"nearest_class {len(X)}x{len(C)}",
                 {k: bench(lambda mod=mod: mod.nearest_class_search(X, C, ml), args.repeat)
                  for k, mod in backends.items()}))

    names = list(backends)
    print(f"{'kernel':<28}" + "".join(f"{n + ' (us)':>16}" for n in names)
          + (f"{'speedup':>10}" if len(names) == 2 else ""))
    for label, t in rows:
        line = f"{label:<28}" + "".join(f"{t[n] * 1e6:>16.1f}" for n in names)
        if len(names) == 2:
            line += f"{t['python'] / t['compiled']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
