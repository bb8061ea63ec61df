import numpy as np

from sievebfs.graphgen import EdgeList, build_csr


def random_csr(rng, n, density):
    a = rng.random((n, n)) < density
    a = np.triu(a, 1)
    u, v = np.nonzero(a)
    return build_csr(EdgeList(n, np.stack([u, v], axis=1).astype(np.uint64)))


def padded_block(rows, ncols):
    """A square CSR whose leading ``len(rows) x ncols`` corner is the given block."""
    from sievebfs.graphgen import CsrMatrix

    n = max(len(rows), ncols, 1)
    offsets = np.zeros(n + 1, dtype=np.int64)
    offsets[1 : len(rows) + 1] = np.cumsum([len(r) for r in rows])
    offsets[len(rows) + 1 :] = offsets[len(rows)]
    cols = np.array([c for r in rows for c in sorted(r)], dtype=np.int64)
    return CsrMatrix(n, offsets, cols)


def subsets(mask_bits):
    """Every subset of the set bits of ``mask_bits``, as sorted index lists."""
    idx = [k for k in range(mask_bits.bit_length()) if mask_bits >> k & 1]
    out = []
    for s in range(1 << len(idx)):
        out.append([idx[k] for k in range(len(idx)) if s >> k & 1])
    return out
