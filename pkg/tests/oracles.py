"""Independent reference implementations used only by the tests.

Nothing here imports the code paths it checks: plain Python loops over
adjacency lists and bit strings.
"""

from __future__ import annotations

from collections import deque


def adjacency(csr):
    offs = csr.row_offsets.tolist()
    cols = csr.column_indices.tolist()
    return [cols[offs[v] : offs[v + 1]] for v in range(csr.n)]


def serial_bfs(adj, source):
    """Queue BFS; parent(v) is the highest-labeled neighbor one level up."""
    n = len(adj)
    level = [-1] * n
    level[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for w in adj[u]:
            if level[w] < 0:
                level[w] = level[u] + 1
                q.append(w)
    parent = [-1] * n
    parent[source] = source
    for v in range(n):
        if level[v] > 0:
            parent[v] = max(u for u in adj[v] if level[u] == level[v] - 1)
    return level, parent


def brute_expand(dense_rows, f_bits, visited_bits, row_offset=0):
    """Double loop over every (v, u) pair of a dense 0/1 row block."""
    t, parents = [], {}
    for r, row in enumerate(dense_rows):
        best = -1
        for u, a in enumerate(row):
            if a and f_bits[u]:
                best = max(best, u)
        if best >= 0 and not visited_bits[r]:
            t.append(r + row_offset)
            parents[r + row_offset] = best
    return t, parents


def naive_wah_decode(words, word_width, active, active_len):
    """Expand each code word on its own into a '0'/'1' string."""
    G = word_width - 1
    out = []
    for w in words:
        w = int(w)
        if w >> (word_width - 1):
            value = (w >> (word_width - 2)) & 1
            count = w & ((1 << (word_width - 2)) - 1)
            out.append(str(value) * (G * count))
        else:
            out.append(format(w, f"0{G}b"))
    if active_len:
        out.append(format(active, f"0{active_len}b"))
    return "".join(out)
