"""
Packed codes and exact Hamming search
=====================================

The low-level machinery: sign codes packed 64 bits to a word, XOR+popcount
distances, stable ranking, and radius search. Everything is exact; the
brute-force comparison at the end is the same oracle the test suite uses.

    python3 demos/hamming_index_basics.py
"""

import numpy as np

from jointhash import (
    CodeTable,
    hamming_distance,
    pack_codes,
    radius_search,
    rank_all,
    top_k,
    unpack_codes,
)

# ---------------------------------------------------------------------------
# Packing: +-1 sign vectors become little-endian uint64 words. 100 bits fit
# in two words; the 28 pad bits of the second word stay zero.
rng = np.random.default_rng(0)
signs = np.where(rng.random(100) > 0.5, 1, -1).astype(np.int8)
packed = pack_codes(signs)
print(f"100-bit code packed into {packed.size} words: "
      f"{[hex(int(w)) for w in packed]}")
assert np.array_equal(unpack_codes(packed, 100), signs)

# ---------------------------------------------------------------------------
# Distance: number of disagreeing positions, equal to (K - <a, b>)/2 for
# +-1 codes.
other = signs.copy()
other[:7] *= -1
d = hamming_distance(packed, pack_codes(other))
print(f"flipping 7 positions gives distance {d}")

# ---------------------------------------------------------------------------
# A small database: ties in distance keep their table order, so results are
# reproducible down to the last rank.
n, k = 2000, 32
db_signs = np.where(rng.random((n, k)) > 0.5, 1, -1).astype(np.int8)
labels = rng.integers(0, 10, n)
table = CodeTable(
    codes=np.atleast_2d(pack_codes(db_signs)),
    ids=np.arange(n),
    labels=labels,
    predicted=labels,
    code_bits=k,
)

query = pack_codes(np.where(rng.random(k) > 0.5, 1, -1))
nearest = top_k(query, table, 5)
print("\ntop 5 neighbors:")
for i in range(5):
    print(f"  id={nearest.ids[i]:4d} distance={nearest.distances[i]}")

within = radius_search(query, table, 8)
print(f"\n{len(within)} items within radius 8")

# ---------------------------------------------------------------------------
# Exactness check against a naive unpacked scan.
ranking = rank_all(query, table)
qsigns = unpack_codes(query, k)
naive = sorted(range(n), key=lambda i: (int(np.sum(qsigns != db_signs[i])), i))
assert ranking.order.tolist() == naive
print("ranking matches the brute-force oracle, including tie order")
