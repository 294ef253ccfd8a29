"""Time the compiled scanning kernel against its pure-Python twin.

Two workloads drive ``scan_longest`` with realistic inputs taken from a
synthetic world: gazetteer linking over word ids and subword segmentation
over code points. Run with ``python benchmarks/bench_kernels.py``.
"""
import argparse
import time

import numpy as np

from deepcorpus import _scan_py
from deepcorpus.linker import build_gazetteer
from deepcorpus.subword import RESERVED, SubwordVocab, _codepoints
from deepcorpus.synth import WorldSpec, gen_world

try:
    from deepcorpus import _scan
except ImportError:
    _scan = None


def workloads(seed):
    world = gen_world(WorldSpec(seed=seed, n_mono_docs=400))
    sentences = [s for _, sents in world.docs for s in sents]
    gaz = build_gazetteer(world.kb, "xx")
    link_inputs = [gaz.encode(s) for s in sentences]
    letters = sorted({c for s in sentences for w in s for c in w})
    # every letter plus every bigram seen in the corpus gives a realistic greedy-match trie
    bigrams = sorted({w[i : i + 2] for s in sentences for w in s for i in range(len(w) - 1)})
    vocab = SubwordVocab([*RESERVED, *letters, *bigrams])
    encode_inputs = [_codepoints(" ".join(s)) for s in sentences]
    return {
        "link": (gaz.trie, link_inputs),
        "encode": (vocab.trie, encode_inputs),
    }


def best_of(fn, trie, inputs, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for seq in inputs:
            fn(trie, seq)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = {"python": _scan_py.scan_longest}
    if _scan is not None:
        backends["cython"] = _scan.scan_longest
    else:
        print("compiled extension not built; timing the Python backend only")

    print(f"{'workload':<8} {'items':>7} {'symbols':>9} " + " ".join(f"{b + ' ms':>11}" for b in backends) + f" {'speedup':>8}")
    for name, (trie, inputs) in workloads(args.seed).items():
        ref = [_scan_py.scan_longest(trie, s) for s in inputs]
        for fn in backends.values():
            assert all(all(np.array_equal(a, b) for a, b in zip(r, fn(trie, s))) for r, s in zip(ref, inputs))
        ms = {b: 1000 * best_of(fn, trie, inputs, args.repeat) for b, fn in backends.items()}
        speed = f"{ms['python'] / ms['cython']:7.1f}x" if "cython" in ms else "       -"
        symbols = sum(len(s) for s in inputs)
        print(f"{name:<8} {len(inputs):>7} {symbols:>9} " + " ".join(f"{v:>11.1f}" for v in ms.values()) + f" {speed}")


if __name__ == "__main__":
    main()
