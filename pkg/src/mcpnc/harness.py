"""Monte Carlo experiments: coded BER sweeps and the linearization MSE study.

Every trial draws its randomness from ``SeedSequence(master_seed,
spawn_key=(ebn0_key, trial))``, so a trial's outcome depends only on the
configuration, the Eb/N0 point and the trial index. Sweeps consume trials in
index order and stop at the first index that meets the stopping rule, which
keeps CSV output independent of the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml

from .channel import apply_channel, generate_phase_walk
from .coding import (
    CodeDefinition,
    codeword_llrs_to_grid,
    decoder_feedback,
    grid_to_codeword_llrs,
    ldpc_decode,
    llr_to_symbol_pmf,
    load_code,
    map_to_grid,
    pmf_to_llr,
)
from .eks import single_step_phase_estimate
from .errors import InvalidRate
from .model import (
    Constellation,
    CovarianceSpec,
    PilotGrid,
    build_covariance,
    laser_phase_variance,
    make_qam,
    wrapped_diagonal_mask,
)
from .receiver_bps import BpsConfig, bps_estimate, edd_detect
from .receiver_fg import fg_pnc_iteration
from .receiver_vb import vb_pnc_iteration

SWEEP_HEADER = [
    "ebn0_db", "receiver", "outer_iters", "frames", "bit_errors",
    "frame_errors", "ber", "ber_ci", "seconds",
]
MSE_HEADER = ["linewidth_hz", "ebn0_db", "samples", "mse"]
RECEIVERS = ("fg", "vb", "bps", "ideal")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SimConfig:
    dim: int = 4
    order: int = 16
    pilot_rate: float = 0.01
    code: str = "peg1008"
    linewidth_ts: float = 5e-5
    drift_ratio: float = 1e-3
    ebn0_db: tuple[float, ...] = (3.0,)
    receiver: str = "fg"
    outer_iterations: int = 2
    decoder_iterations: int = 50
    min_frame_errors: int = 30
    max_frames: int = 1000
    master_seed: int = 0
    joint: bool = True
    # codewords per channel per frame; longer frames give every channel
    # pilots at low pilot rates
    codewords_per_channel: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ebn0_db", tuple(float(x) for x in np.atleast_1d(self.ebn0_db)))
        counts = (
            self.dim, self.outer_iterations, self.decoder_iterations,
            self.min_frame_errors, self.max_frames, self.codewords_per_channel,
        )
        if any(int(c) < 1 for c in counts):
            raise ValueError("all counts must be positive")
        if not self.ebn0_db:
            raise ValueError("Eb/N0 list must be nonempty")
        if self.receiver not in RECEIVERS:
            raise ValueError(f"receiver must be one of {RECEIVERS}, got {self.receiver!r}")
        if not 0 <= self.pilot_rate < 1:
            raise InvalidRate(f"pilot rate must lie in [0, 1), got {self.pilot_rate}")
        if self.linewidth_ts < 0 or self.drift_ratio < 0:
            raise ValueError("phase-noise parameters must be nonnegative")

    @property
    def effective_pilot_rate(self) -> float:
        # the genie and BPS receivers run without pilots
        return self.pilot_rate if self.receiver in ("fg", "vb") else 0.0

    def covariance(self) -> np.ndarray:
        var_lpn = laser_phase_variance(self.linewidth_ts)
        return build_covariance(var_lpn, var_lpn * self.drift_ratio, self.dim)


def load_config(path: str | Path, **overrides) -> SimConfig:
    """Read a YAML (or JSON) mapping of :class:`SimConfig` fields."""
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    known = {f.name for f in fields(SimConfig)}
    unknown = set(raw) - known - {"mse"}
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    raw = {k: v for k, v in raw.items() if k in known}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if "ebn0_db" in raw:
        raw["ebn0_db"] = tuple(np.atleast_1d(raw["ebn0_db"]).tolist())
    return SimConfig(**raw)


def ebn0_to_noise_variance(
    ebn0_db: float, constellation: Constellation, rc: float, rp: float
) -> float:
    """Per-real-dimension noise variance for a given SNR per information bit."""
    _check_rates(rc, rp)
    lin = 10.0 ** (ebn0_db / 10.0)
    return constellation.es / (2.0 * lin * rc * constellation.bits_per_symbol * (1.0 - rp))


def noise_variance_to_ebn0(
    sigma2: float, constellation: Constellation, rc: float, rp: float
) -> float:
    _check_rates(rc, rp)
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    lin = constellation.es / (2.0 * sigma2 * rc * constellation.bits_per_symbol * (1.0 - rp))
    return 10.0 * math.log10(lin)


def _check_rates(rc: float, rp: float) -> None:
    if not 0 <= rp < 1:
        raise InvalidRate(f"pilot rate must lie in [0, 1), got {rp}")
    if not 0 < rc <= 1:
        raise InvalidRate(f"code rate must lie in (0, 1], got {rc}")


# ---------------------------------------------------------------------------
# frame layout


@dataclass(frozen=True, eq=False)
class FrameLayout:
    """Pilot mask shared by all trials of a configuration.

    ``data_per_channel`` slots per channel carry coded bits; every other slot
    is a pilot. ``pilot_fraction`` is the realized overhead used for Eb/N0.
    """

    mask: np.ndarray
    data_per_channel: int

    @property
    def n(self) -> int:
        return self.mask.shape[1]

    @property
    def pilot_fraction(self) -> float:
        return float(self.mask.mean())


def build_layout(dim: int, data_symbols: int, rate: float) -> FrameLayout:
    """Wrapped-diagonal pilots around ``data_symbols`` data slots per channel.

    The frame holds ``ceil(S / (1 - Rp))`` slots, lengthened until each
    channel has at least ``S`` data slots. Surplus data slots at the end of
    a channel are turned into pilots so all channels carry the same number
    of coded symbols.
    """
    if rate == 0:
        return FrameLayout(np.zeros((dim, data_symbols), dtype=bool), data_symbols)
    n = math.ceil(data_symbols / (1.0 - rate))
    while True:
        mask = wrapped_diagonal_mask(dim, n, rate)
        if np.all((~mask).sum(axis=1) >= data_symbols):
            break
        n += 1
    data_pos = np.cumsum(~mask, axis=1)
    mask = mask | (data_pos > data_symbols)
    return FrameLayout(mask, data_symbols)


@lru_cache(maxsize=8)
def _code(code_id: str) -> CodeDefinition:
    return load_code(code_id)


@dataclass(frozen=True, eq=False)
class TrialSetup:
    config: SimConfig
    code: CodeDefinition
    constellation: Constellation
    layout: FrameLayout
    q: np.ndarray

    @classmethod
    def from_config(cls, config: SimConfig) -> "TrialSetup":
        code = _code(config.code)
        const = make_qam(config.order)
        rm = const.bits_per_symbol
        bits = config.codewords_per_channel * code.n
        if bits % rm:
            raise ValueError(f"{bits} coded bits per channel do not fill {rm}-bit symbols")
        layout = build_layout(config.dim, bits // rm, config.effective_pilot_rate)
        return cls(config, code, const, layout, config.covariance())

    def noise_variance(self, ebn0_db: float) -> float:
        return ebn0_to_noise_variance(
            ebn0_db, self.constellation, self.code.rate, self.layout.pilot_fraction
        )


# ---------------------------------------------------------------------------
# single trial


@dataclass
class TrialResult:
    bit_errors: int
    codeword_errors: int
    frame_error: bool
    info_bits: int


def trial_seed(master_seed: int, ebn0_db: float, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(int(round(ebn0_db * 1000)) % 2**32, trial))


def _decode_grid(slot_llr, setup: TrialSetup, pilots: PilotGrid):
    cfg, code = setup.config, setup.code
    blocks = grid_to_codeword_llrs(slot_llr, pilots).reshape(-1, code.n)
    return ldpc_decode(blocks, code, cfg.decoder_iterations)


def run_coded_trial(
    config: SimConfig,
    ebn0_db: float,
    trial: int,
    setup: TrialSetup | None = None,
    sigma2: float | None = None,
) -> TrialResult:
    """Simulate and detect one frame of ``D`` channels.

    ``sigma2`` overrides the noise variance implied by ``ebn0_db`` (the seed
    still comes from ``ebn0_db``).
    """
    setup = setup or TrialSetup.from_config(config)
    code, const, layout = setup.code, setup.constellation, setup.layout
    rng = np.random.default_rng(trial_seed(config.master_seed, ebn0_db, trial))
    dim, cpc = config.dim, config.codewords_per_channel
    rm = const.bits_per_symbol

    info = rng.integers(0, 2, size=(dim * cpc, code.k), dtype=np.uint8)
    codewords = code.encode(info).reshape(dim, cpc * code.n)
    values = np.zeros(layout.mask.shape, dtype=complex)
    values[layout.mask] = const.points[rng.integers(const.order, size=int(layout.mask.sum()))]
    pilots = PilotGrid(layout.mask, values)
    s = map_to_grid(codewords, const, pilots)
    theta = generate_phase_walk(setup.q, layout.n, rng)
    sig2 = setup.noise_variance(ebn0_db) if sigma2 is None else float(sigma2)
    cov = CovarianceSpec(setup.q, sig2)
    r = apply_channel(s, theta, cov, rng)

    if config.receiver in ("ideal", "bps"):
        slot_llr = np.empty((dim, layout.n, rm))
        bps_cfg = BpsConfig.for_order(const.order)
        for i in range(dim):
            if config.receiver == "ideal":
                phase = theta[i]
            else:
                phase = bps_estimate(r[i], const, bps_cfg, initial_phase=theta[i, 0])
            _, slot_llr[i] = edd_detect(r[i], phase, const, sig2)
        result = _decode_grid(slot_llr, setup, pilots)
    else:
        rx_cov = cov if config.joint else cov.per_channel()
        iterate = fg_pnc_iteration if config.receiver == "fg" else vb_pnc_iteration
        mode = "extrinsic" if config.receiver == "fg" else "aposteriori"
        prior = None
        for _ in range(config.outer_iterations):
            msg = iterate(r, prior, rx_cov, pilots, const)
            result = _decode_grid(pmf_to_llr(msg, const), setup, pilots)
            feedback = decoder_feedback(result, mode).reshape(dim, -1)
            prior = llr_to_symbol_pmf(codeword_llrs_to_grid(feedback, pilots, rm), const)

    decoded = code.extract_info(result.bits)
    wrong = np.count_nonzero(decoded != info, axis=1)
    return TrialResult(
        bit_errors=int(wrong.sum()),
        codeword_errors=int(np.count_nonzero(wrong)),
        frame_error=bool(wrong.any()),
        info_bits=int(info.size),
    )


def _trial_job(args) -> TrialResult:
    config, ebn0_db, trial = args
    return run_coded_trial(config, ebn0_db, trial, _setup_for(config))


@lru_cache(maxsize=4)
def _setup_for(config: SimConfig) -> TrialSetup:
    return TrialSetup.from_config(config)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepPoint:
    ebn0_db: float
    receiver: str
    outer_iters: int
    frames: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    info_bits: int = 0
    seconds: float = 0.0
    capped: bool = False

    @property
    def ber(self) -> float:
        return self.bit_errors / self.info_bits if self.info_bits else 0.0

    @property
    def ber_ci(self) -> float:
        return 1.96 * math.sqrt(self.ber / self.info_bits) if self.info_bits else 0.0

    def add(self, t: TrialResult) -> None:
        self.frames += 1
        self.bit_errors += t.bit_errors
        self.frame_errors += int(t.frame_error)
        self.info_bits += t.info_bits

    def row(self, timing: bool = True) -> list[str]:
        return [
            f"{self.ebn0_db:g}", self.receiver, str(self.outer_iters), str(self.frames),
            str(self.bit_errors), str(self.frame_errors), f"{self.ber:.6e}",
            f"{self.ber_ci:.6e}", f"{self.seconds if timing else 0.0:.3f}",
        ]


def _outer_iters(config: SimConfig) -> int:
    return config.outer_iterations if config.receiver in ("fg", "vb") else 1


def _trial_stream(config: SimConfig, ebn0_db: float, pool, chunk: int):
    """Yield trial results in index order, computing ``chunk`` at a time."""
    start = 0
    setup = _setup_for(config)
    while start < config.max_frames:
        idx = range(start, min(start + chunk, config.max_frames))
        if pool is None:
            yield from (run_coded_trial(config, ebn0_db, t, setup) for t in idx)
        else:
            yield from pool.map(_trial_job, [(config, ebn0_db, t) for t in idx])
        start = idx.stop


def run_point(
    config: SimConfig,
    ebn0_db: float,
    pool=None,
    chunk: int = 8,
    point: SweepPoint | None = None,
) -> SweepPoint:
    """Accumulate trials into ``point`` until the stopping rule fires."""
    point = point or SweepPoint(ebn0_db, config.receiver, _outer_iters(config))
    t0 = time.perf_counter()
    try:
        for res in _trial_stream(config, ebn0_db, pool, chunk):
            point.add(res)
            if point.frame_errors >= config.min_frame_errors:
                break
        else:
            point.capped = point.frame_errors < config.min_frame_errors
    finally:
        point.seconds = time.perf_counter() - t0
    return point


def run_sweep(
    config: SimConfig,
    out: str | Path | io.TextIOBase | None = None,
    threads: int = 1,
    timing: bool = True,
) -> list[SweepPoint]:
    """Run every Eb/N0 point and write one CSV row per point.

    Rows are flushed as soon as each point finishes. On interrupt the
    partially counted point is written before the exception propagates.
    ``timing=False`` writes 0 in the ``seconds`` column so output is
    byte-reproducible.
    """
    handle, owned = _open_out(out)
    writer = csv.writer(handle, lineterminator="\n") if handle else None
    if writer:
        writer.writerow(SWEEP_HEADER)
        handle.flush()
    results: list[SweepPoint] = []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    chunk = max(1, threads) * 4
    try:
        for ebn0 in config.ebn0_db:
            point = SweepPoint(ebn0, config.receiver, _outer_iters(config))
            try:
                run_point(config, ebn0, pool, chunk, point)
            except KeyboardInterrupt:
                if writer and point.frames:
                    writer.writerow(point.row(timing))
                    handle.flush()
                raise
            results.append(point)
            if writer:
                writer.writerow(point.row(timing))
                handle.flush()
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
        if owned:
            handle.close()
    return results


def _open_out(out):
    if out is None:
        return None, False
    if isinstance(out, (str, Path)):
        return open(out, "w", newline=""), True
    return out, False


@dataclass
class PairedComparison:
    ebn0_db: float
    joint: SweepPoint
    per_channel: SweepPoint


def run_joint_comparison(
    config: SimConfig, num_frames: int, threads: int = 1
) -> list[PairedComparison]:
    """Joint vs per-channel smoothing on identical trial seeds.

    Each point runs exactly ``num_frames`` trials for both settings, so the
    two BER estimates see the same bits, phase noise and AWGN.
    """
    out = []
    base = replace(config, max_frames=num_frames, min_frame_errors=num_frames + 1)
    for ebn0 in config.ebn0_db:
        pts = {}
        for joint in (True, False):
            cfg = replace(base, joint=joint, ebn0_db=(ebn0,))
            pts[joint] = run_sweep(cfg, threads=threads)[0]
        out.append(PairedComparison(ebn0, pts[True], pts[False]))
    return out


def write_comparison_csv(rows: list[PairedComparison], out, timing: bool = True) -> None:
    handle, owned = _open_out(out)
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        for label, p in (("joint", row.joint), ("per_channel", row.per_channel)):
            cells = p.row(timing)
            cells[1] = f"{p.receiver}_{label}"
            writer.writerow(cells)
    handle.flush()
    if owned:
        handle.close()


# ---------------------------------------------------------------------------
# linearization study


@dataclass
class MseRow:
    linewidth_hz: float
    ebn0_db: float | None
    samples: int
    mse: float


def run_linearization_mse(
    linewidths: list[float],
    baud: float,
    ebn0_list: list[float | None],
    samples: int = 100_000,
    order: int = 16,
    seed: int = 0,
) -> list[MseRow]:
    """MSE of the one-sample linearized estimator with a genie previous phase.

    ``None`` in ``ebn0_list`` stands for the noiseless case. Noise is set
    from Eb/N0 for uncoded transmission without pilots.
    """
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    const = make_qam(order)
    rows = []
    for j, dnu in enumerate(linewidths):
        q = laser_phase_variance(dnu / baud)
        for m, ebn0 in enumerate(ebn0_list):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j, m)))
            prev = rng.uniform(-np.pi, np.pi, samples)
            cur = prev + rng.normal(0.0, math.sqrt(q), samples)
            s = const.points[rng.integers(const.order, size=samples)]
            r = s * np.exp(1j * cur)
            if ebn0 is not None:
                sig2 = ebn0_to_noise_variance(ebn0, const, 1.0, 0.0)
                r = r + math.sqrt(sig2) * (rng.standard_normal(samples) + 1j * rng.standard_normal(samples))
            est = single_step_phase_estimate(r, s, prev)
            rows.append(MseRow(dnu, ebn0, samples, float(np.mean((est - cur) ** 2))))
    return rows


def write_mse_csv(rows: list[MseRow], out) -> None:
    handle, owned = _open_out(out)
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(MSE_HEADER)
    for row in rows:
        ebn0 = "inf" if row.ebn0_db is None else f"{row.ebn0_db:g}"
        writer.writerow([f"{row.linewidth_hz:g}", ebn0, row.samples, f"{row.mse:.6e}"])
    handle.flush()
    if owned:
        handle.close()


def config_dict(config: SimConfig) -> dict:
    d = asdict(config)
    d["ebn0_db"] = list(d["ebn0_db"])
    return d
