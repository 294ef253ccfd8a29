"""Pure-Python leftmost-longest trie scan (fallback for the compiled kernel)."""
import numpy as np


def scan_longest(trie, seq):
    """Scan ``seq`` left to right, taking the longest trie match at each position.

    Positions that start no match are stepped over one at a time. Returns three
    int64 arrays ``(starts, ends, payloads)`` of non-overlapping half-open matches.
    """
    children = trie.children
    payload = trie.payload
    seq = [int(s) for s in seq]
    n = len(seq)
    starts, ends, outs = [], [], []
    i = 0
    while i < n:
        node = 0
        best_end = -1
        best_out = -1
        j = i
        while j < n:
            node = children[node].get(seq[j], -1)
            if node < 0:
                break
            j += 1
            if payload[node] >= 0:
                best_end = j
                best_out = payload[node]
        if best_end > 0:
            starts.append(i)
            ends.append(best_end)
            outs.append(best_out)
            i = best_end
        else:
            i += 1
    return (
        np.asarray(starts, dtype=np.int64),
        np.asarray(ends, dtype=np.int64),
        np.asarray(outs, dtype=np.int64),
    )
