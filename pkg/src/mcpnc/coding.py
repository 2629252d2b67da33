"""Binary LDPC codes, the sum-product decoder and the symbol/bit interfaces.

LLRs follow ``L = ln P(c=0) / P(c=1)``, so a negative LLR decides a one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatch, LengthMismatch
from .model import Constellation, PilotGrid
from .pmf import SymbolPmf

LLR_CLAMP = 50.0


# ---------------------------------------------------------------------------
# code definition


def _gf2_rref(h: np.ndarray) -> tuple[np.ndarray, list[int]]:
    a = (np.asarray(h) & 1).astype(np.uint8)
    m, n = a.shape
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        nz = np.nonzero(a[row:, col])[0]
        if nz.size == 0:
            continue
        p = row + nz[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        hits = np.nonzero(a[:, col])[0]
        hits = hits[hits != row]
        a[hits] ^= a[row]
        pivots.append(col)
        row += 1
    return a[:row], pivots


@dataclass(eq=False)
class CodeDefinition:
    """Parity-check matrix plus the derived encoder and decoder edge lists."""

    h: np.ndarray
    name: str = "code"
    _rref: np.ndarray = field(init=False, repr=False)
    parity_cols: np.ndarray = field(init=False, repr=False)
    info_cols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.uint8)
        if h.ndim != 2 or np.any(h > 1):
            raise ValueError("parity-check matrix must be a binary 2-D array")
        self.h = h
        rref, pivots = _gf2_rref(h)
        self._rref = rref
        self.parity_cols = np.array(pivots, dtype=int)
        self.info_cols = np.setdiff1d(np.arange(self.n), self.parity_cols)
        checks, vars_ = np.nonzero(h)
        # edges sorted by check (np.nonzero is row-major)
        self.edge_check = checks
        self.edge_var = vars_
        self.check_starts = np.searchsorted(checks, np.arange(self.m))
        self.by_var = np.argsort(vars_, kind="stable")
        self.var_starts = np.searchsorted(vars_[self.by_var], np.arange(self.n))

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def rank(self) -> int:
        return self.parity_cols.size

    @property
    def k(self) -> int:
        return self.n - self.rank

    @property
    def rate(self) -> float:
        return self.k / self.n

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Systematic encoding; ``info`` is ``(..., k)`` and lands on ``info_cols``."""
        info = np.asarray(info, dtype=np.uint8)
        if info.shape[-1] != self.k:
            raise LengthMismatch(f"expected {self.k} information bits, got {info.shape[-1]}")
        lead = info.shape[:-1]
        flat = info.reshape(-1, self.k)
        cw = np.zeros((flat.shape[0], self.n), dtype=np.uint8)
        cw[:, self.info_cols] = flat
        sub = self._rref[:, self.info_cols].astype(np.int64)
        cw[:, self.parity_cols] = (flat.astype(np.int64) @ sub.T) & 1
        return cw.reshape(*lead, self.n)

    def extract_info(self, codeword: np.ndarray) -> np.ndarray:
        return np.asarray(codeword)[..., self.info_cols]

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        return (bits @ self.h.T.astype(np.int64)) & 1


# ---------------------------------------------------------------------------
# alist I/O


def read_alist(path_or_text: str | Path, name: str | None = None) -> CodeDefinition:
    """Parse the MacKay adjacency-list format (1-indexed, zero padding allowed)."""
    text = str(path_or_text)
    p = Path(text)
    if "\n" not in text and p.exists():
        label = name or p.stem
        text = p.read_text()
    else:
        label = name or "code"
    tok = [int(t) for t in text.split()]
    n, m = tok[0], tok[1]
    pos = 4
    col_w = tok[pos : pos + n]
    pos += n
    row_w = tok[pos : pos + m]
    pos += m
    h = np.zeros((m, n), dtype=np.uint8)
    max_col = tok[2]
    max_row = tok[3]
    for j in range(n):
        entries = tok[pos : pos + max_col]
        pos += max_col
        for e in entries[: col_w[j]]:
            h[e - 1, j] = 1
    row_check = np.zeros((m, n), dtype=np.uint8)
    for i in range(m):
        entries = tok[pos : pos + max_row]
        pos += max_row
        for e in entries[: row_w[i]]:
            row_check[i, e - 1] = 1
    if pos <= len(tok) and np.any(row_check != h):
        raise ValueError("alist row and column lists disagree")
    return CodeDefinition(h, name=label)


def write_alist(code: CodeDefinition | np.ndarray) -> str:
    h = code.h if isinstance(code, CodeDefinition) else np.asarray(code, dtype=np.uint8)
    m, n = h.shape
    cols = [np.nonzero(h[:, j])[0] + 1 for j in range(n)]
    rows = [np.nonzero(h[i])[0] + 1 for i in range(m)]
    max_col = max(len(c) for c in cols)
    max_row = max(len(r) for r in rows)

    def padded(seq, width):
        vals = list(seq) + [0] * (width - len(seq))
        return " ".join(str(int(v)) for v in vals)

    lines = [
        f"{n} {m}",
        f"{max_col} {max_row}",
        " ".join(str(len(c)) for c in cols),
        " ".join(str(len(r)) for r in rows),
    ]
    lines += [padded(c, max_col) for c in cols]
    lines += [padded(r, max_row) for r in rows]
    return "\n".join(lines) + "\n"


def load_code(code_id: str) -> CodeDefinition:
    """Load a shipped code (``hamming74``, ``peg1008``) or an alist file path."""
    shipped = {"hamming74": "hamming74.alist", "peg1008": "peg_1008_504_3_6.alist"}
    if code_id in shipped:
        data = resources.files("mcpnc").joinpath("data").joinpath(shipped[code_id]).read_text()
        return read_alist(data, name=code_id)
    return read_alist(Path(code_id))


def peg_construct(n: int, m: int, dv: int, dc: int, seed: int = 0) -> np.ndarray:
    """Progressive edge growth for a (dv, dc)-regular parity-check matrix.

    Each new edge of a variable goes to a check outside its current
    neighbourhood tree if one exists, otherwise to a check at the deepest
    level of that tree. Ties go to the lowest-degree check, then to a seeded
    random choice. Checks never exceed degree ``dc``.
    """
    if n * dv != m * dc:
        raise ValueError("n*dv must equal m*dc for a regular code")
    rng = np.random.default_rng(seed)
    var_adj: list[list[int]] = [[] for _ in range(n)]
    chk_adj: list[list[int]] = [[] for _ in range(m)]
    deg = np.zeros(m, dtype=int)

    def pick(cands: np.ndarray) -> int:
        cands = cands[deg[cands] < dc]
        low = cands[deg[cands] == deg[cands].min()]
        return int(rng.choice(low))

    for j in range(n):
        for e in range(dv):
            if e == 0:
                chosen = pick(np.arange(m))
            else:
                seen = np.zeros(m, dtype=bool)
                frontier = list(var_adj[j])
                seen[frontier] = True
                visited_vars = {j}
                last_new = np.array(frontier)
                while True:
                    nxt = set()
                    for c in frontier:
                        for v in chk_adj[c]:
                            if v not in visited_vars:
                                visited_vars.add(v)
                                for c2 in var_adj[v]:
                                    if not seen[c2]:
                                        nxt.add(c2)
                    if not nxt:
                        break
                    new = np.fromiter(nxt, dtype=int)
                    seen[new] = True
                    if np.all(seen | (deg >= dc)):
                        last_new = new
                        break
                    frontier = list(nxt)
                    last_new = new
                free = np.nonzero(~seen & (deg < dc))[0]
                if free.size:
                    chosen = pick(free)
                else:
                    cands = last_new[deg[last_new] < dc]
                    cands = np.setdiff1d(cands, var_adj[j])
                    if cands.size == 0:
                        cands = np.setdiff1d(np.nonzero(deg < dc)[0], var_adj[j])
                    chosen = pick(cands)
            var_adj[j].append(chosen)
            chk_adj[chosen].append(j)
            deg[chosen] += 1
    h = np.zeros((m, n), dtype=np.uint8)
    for j, cs in enumerate(var_adj):
        h[cs, j] = 1
    return h


# ---------------------------------------------------------------------------
# decoder


def _phi(x: np.ndarray) -> np.ndarray:
    # -ln tanh(x/2), its own inverse on (0, inf)
    x = np.clip(x, 1e-12, LLR_CLAMP)
    return -np.log(np.tanh(0.5 * x))


@dataclass
class DecodeResult:
    llr_in: np.ndarray
    llr_out: np.ndarray
    bits: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray

    @property
    def extrinsic(self) -> np.ndarray:
        return self.llr_out - self.llr_in


def ldpc_decode(llr: np.ndarray, code: CodeDefinition, max_iters: int = 50) -> DecodeResult:
    """Flooding sum-product decoding of one or more codewords.

    ``llr`` is ``(n,)`` or ``(B, n)``. Each codeword stops as soon as its
    hard decision satisfies every check. Nothing is carried over between
    calls, so every invocation starts from a fresh decoder state.
    """
    llr = np.asarray(llr, dtype=float)
    single = llr.ndim == 1
    lin = np.clip(np.atleast_2d(llr), -LLR_CLAMP, LLR_CLAMP)
    if lin.shape[1] != code.n:
        raise DimensionMismatch(f"expected {code.n} LLRs per codeword, got {lin.shape[1]}")
    batch = lin.shape[0]
    ev, ec = code.edge_var, code.edge_check
    cstart, by_var, vstart = code.check_starts, code.by_var, code.var_starts

    total = lin.copy()
    bits = (total < 0).astype(np.uint8)
    active = np.ones(batch, dtype=bool)
    iters = np.zeros(batch, dtype=int)
    v2c = lin[:, ev]
    c2v = np.zeros_like(v2c)

    for it in range(1, max_iters + 1):
        if not active.any():
            break
        rows = np.nonzero(active)[0]
        msg = v2c[rows]
        mag = _phi(np.abs(msg))
        neg = (msg < 0).astype(np.int64)
        mag_sum = np.add.reduceat(mag, cstart, axis=1)[:, ec]
        neg_sum = np.add.reduceat(neg, cstart, axis=1)[:, ec]
        sign = 1.0 - 2.0 * ((neg_sum - neg) & 1)
        new_c2v = sign * _phi(np.maximum(mag_sum - mag, 0.0))
        c2v[rows] = new_c2v
        acc = np.add.reduceat(new_c2v[:, by_var], vstart, axis=1)
        tot = np.clip(lin[rows] + acc, -LLR_CLAMP, LLR_CLAMP)
        total[rows] = tot
        v2c[rows] = np.clip(tot[:, ev] - new_c2v, -LLR_CLAMP, LLR_CLAMP)
        b = (tot < 0).astype(np.uint8)
        bits[rows] = b
        iters[rows] = it
        syn = np.add.reduceat(b[:, ev], cstart, axis=1) & 1
        active[rows[~syn.any(axis=1)]] = False

    converged = ~active
    res = DecodeResult(lin, total, bits, converged, iters)
    if single:
        res = DecodeResult(lin[0], total[0], bits[0], converged[0], iters[0])
    return res


# ---------------------------------------------------------------------------
# symbol <-> bit interfaces


def pmf_to_llr(pmf: SymbolPmf, constellation: Constellation) -> np.ndarray:
    """Bit LLRs ``ln sum_{B0} p(s) / sum_{B1} p(s)``, shape ``(..., Rm)``, clamped."""
    logp = pmf.logp
    out = np.empty(logp.shape[:-1] + (constellation.bits_per_symbol,))
    for j in range(constellation.bits_per_symbol):
        zero = constellation.labels[:, j] == 0
        with np.errstate(invalid="ignore"):
            out[..., j] = logsumexp(logp[..., zero], axis=-1) - logsumexp(logp[..., ~zero], axis=-1)
    return np.clip(np.nan_to_num(out, nan=0.0), -LLR_CLAMP, LLR_CLAMP)


def llr_to_symbol_pmf(llr: np.ndarray, constellation: Constellation) -> SymbolPmf:
    """Product-of-bit-marginals symbol PMF from ``(..., Rm)`` LLRs."""
    llr = np.clip(np.asarray(llr, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    log_p0 = -np.logaddexp(0.0, -llr)
    log_p1 = -np.logaddexp(0.0, llr)
    labels = constellation.labels.astype(bool)
    logp = np.where(labels[None, :, :], log_p1[..., None, :], log_p0[..., None, :]).sum(axis=-1)
    return SymbolPmf(logp)


def decoder_feedback(result: DecodeResult, mode: str) -> np.ndarray:
    """Coded-bit LLRs handed back to the phase estimator.

    ``"extrinsic"`` (FG-PNC) subtracts the decoder input; ``"aposteriori"``
    (VB-PNC) passes the full output.
    """
    if mode == "extrinsic":
        return result.extrinsic
    if mode == "aposteriori":
        return result.llr_out
    raise ValueError(f"unknown feedback mode {mode!r}")


def map_to_grid(
    codewords: np.ndarray, constellation: Constellation, pilots: PilotGrid
) -> np.ndarray:
    """Place each channel's coded bits on its data slots in time order.

    ``codewords`` is ``(D, L)``; every channel must have exactly
    ``L / Rm`` data slots. Pilot slots take the pilot symbols.
    """
    codewords = np.asarray(codewords)
    dim, n = pilots.shape
    rm = constellation.bits_per_symbol
    if codewords.shape[0] != dim or codewords.shape[1] % rm:
        raise LengthMismatch(f"codeword block {codewords.shape} does not fit D={dim}, Rm={rm}")
    data = ~pilots.mask
    need = codewords.shape[1] // rm
    if np.any(data.sum(axis=1) != need):
        raise LengthMismatch(
            f"data slots per channel {data.sum(axis=1).tolist()} differ from {need} symbols"
        )
    grid = pilots.values.astype(complex).copy()
    idx = constellation.bits_to_indices(codewords.reshape(-1)).reshape(dim, need)
    grid[data] = constellation.points[idx].reshape(-1)
    return grid


def grid_to_codeword_llrs(slot_llrs: np.ndarray, pilots: PilotGrid) -> np.ndarray:
    """Gather ``(D, N, Rm)`` slot LLRs on data slots into ``(D, L)`` per-channel blocks."""
    dim = slot_llrs.shape[0]
    data = ~pilots.mask
    return slot_llrs[data].reshape(dim, -1)


def codeword_llrs_to_grid(llrs: np.ndarray, pilots: PilotGrid, rm: int) -> np.ndarray:
    """Inverse of :func:`grid_to_codeword_llrs`; pilot slots get zero LLRs."""
    dim, n = pilots.shape
    out = np.zeros((dim, n, rm))
    out[~pilots.mask] = np.asarray(llrs).reshape(-1, rm)
    return out
