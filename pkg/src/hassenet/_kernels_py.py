"""Pure-Python/numpy twin of the compiled ``_kernels`` extension.

Same signatures and same results; used when the extension is not built or
when ``HASSENET_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import numpy as np

H, S, SDG, X, Y, Z, CNOT, CZ, SWAP = range(9)


def apply_gate(x: np.ndarray, z: np.ndarray, r: np.ndarray, code: int, a: int, b: int = -1) -> None:
    if code == H:
        xa = x[:, a].copy()
        za = z[:, a]
        r ^= xa & za
        x[:, a] = za
        z[:, a] = xa
    elif code == S:
        r ^= x[:, a] & z[:, a]
        z[:, a] ^= x[:, a]
    elif code == SDG:
        r ^= x[:, a] & (z[:, a] ^ 1)
        z[:, a] ^= x[:, a]
    elif code == X:
        r ^= z[:, a]
    elif code == Y:
        r ^= x[:, a] ^ z[:, a]
    elif code == Z:
        r ^= x[:, a]
    elif code == CNOT:
        xa, za, xb, zb = x[:, a], z[:, a], x[:, b], z[:, b]
        r ^= xa & zb & (xb ^ za ^ 1)
        x[:, b] = xb ^ xa
        z[:, a] = za ^ zb
    elif code == CZ:
        xa, za, xb, zb = x[:, a], z[:, a].copy(), x[:, b], z[:, b]
        r ^= xa & xb & (za ^ zb)
        z[:, a] = za ^ xb
        z[:, b] = zb ^ xa
    elif code == SWAP:
        x[:, [a, b]] = x[:, [b, a]]
        z[:, [a, b]] = z[:, [b, a]]
    else:
        raise ValueError(f"unknown gate code {code}")


def apply_program(x: np.ndarray, z: np.ndarray, r: np.ndarray, ops: np.ndarray) -> None:
    for code, a, b in ops:
        apply_gate(x, z, r, int(code), int(a), int(b))


def _g(x1, z1, x2, z2):
    x1 = x1.astype(np.int64)
    z1 = z1.astype(np.int64)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    return np.where(
        (x1 == 0) & (z1 == 0),
        0,
        np.where(
            (x1 == 1) & (z1 == 1),
            z2 - x2,
            np.where(x1 == 1, z2 * (2 * x2 - 1), x2 * (1 - 2 * z2)),
        ),
    )


def _rowsum(hx, hz, hr, ix, iz, ir):
    acc = 2 * int(hr) + 2 * int(ir) + int(_g(ix, iz, hx, hz).sum())
    hx ^= ix
    hz ^= iz
    return 1 if acc % 4 == 2 else 0


def measure_z(x: np.ndarray, z: np.ndarray, r: np.ndarray, q: int, rbit: int) -> tuple[int, bool]:
    n = x.shape[1]
    hits = np.flatnonzero(x[n:, q])
    if hits.size:
        p = n + int(hits[0])
        for i in np.flatnonzero(x[:, q]):
            if i != p:
                r[i] = _rowsum(x[i], z[i], r[i], x[p], z[p], r[p])
        x[p - n] = x[p]
        z[p - n] = z[p]
        r[p - n] = r[p]
        x[p] = 0
        z[p] = 0
        z[p, q] = 1
        r[p] = rbit & 1
        return int(rbit & 1), True
    sx = np.zeros(n, dtype=np.uint8)
    sz = np.zeros(n, dtype=np.uint8)
    sr = 0
    for i in np.flatnonzero(x[:n, q]):
        sr = _rowsum(sx, sz, sr, x[i + n], z[i + n], r[i + n])
    return int(sr), False


def gf2_rank(mat) -> int:
    """Rank over GF(2); rows are packed into Python ints."""
    m = np.asarray(mat, dtype=np.uint8)
    if m.size == 0:
        return 0
    packed = np.packbits(m & 1, axis=1, bitorder="little")
    rows = [int.from_bytes(row.tobytes(), "little") for row in packed]
    basis: dict[int, int] = {}
    for v in rows:
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                basis[top] = v
                break
            v ^= basis[top]
    return len(basis)
