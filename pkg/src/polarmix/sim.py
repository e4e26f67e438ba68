"""Seeded Monte Carlo frame/bit error estimation."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import channel as ch
from . import construct
from .codec import LLR_CLAMP, encode, sc_decode
from .construct import ConstructionPlan
from .rng import derive_seed, philox


def llr_table(W: ch.BmsChannel, clamp: float = LLR_CLAMP) -> np.ndarray:
    """Clamped ``ln(w0/w1)`` per output symbol."""
    with np.errstate(divide="ignore"):
        llr = np.log(W.w0) - np.log(W.w1)
    return np.clip(np.nan_to_num(llr, posinf=clamp, neginf=-clamp), -clamp, clamp)


def _cdfs(W: ch.BmsChannel) -> np.ndarray:
    c = np.cumsum(np.stack([W.w0, W.w1]), axis=1)
    c[:, -1] = np.inf  # absorb rounding so every uniform maps to a symbol
    return c


def sample_outputs(W: ch.BmsChannel, x, rng: np.random.Generator,
                   clamp: float = LLR_CLAMP) -> tuple[np.ndarray, np.ndarray]:
    """Draw channel outputs for input bits ``x``; returns symbol indices and LLRs."""
    x = np.asarray(x, dtype=np.int64)
    u = rng.random(x.shape)
    cdf = _cdfs(W)
    idx = np.where(x == 0, np.searchsorted(cdf[0], u, side="right"),
                   np.searchsorted(cdf[1], u, side="right"))
    return idx, llr_table(W, clamp)[idx]


def sample_output(W: ch.BmsChannel, x: int, rng: np.random.Generator,
                  clamp: float = LLR_CLAMP) -> tuple[int, float]:
    idx, llr = sample_outputs(W, np.array([x]), rng, clamp)
    return int(idx[0]), float(llr[0])


def channel_digest(W: ch.BmsChannel) -> str:
    return hashlib.sha256(ch.dumps(W).encode()).hexdigest()[:16]


def plan_digest(plan: ConstructionPlan) -> str:
    return hashlib.sha256(construct.dumps(plan).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SimConfig:
    plan: ConstructionPlan
    channel: ch.BmsChannel
    trials: int
    seed: int = 0
    message_mode: str = "random"
    batch_size: int = 256
    max_frame_errors: int | None = None
    clamp: float = LLR_CLAMP
    tie_break: str = "zero"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.message_mode not in ("all_zero", "random"):
            raise ValueError(f"unknown message mode {self.message_mode!r}")
        if self.tie_break not in ("zero", "random"):
            raise ValueError(f"unknown tie break {self.tie_break!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_frame_errors is not None and self.max_frame_errors < 1:
            raise ValueError("max_frame_errors must be >= 1")

    def digest(self) -> str:
        # batch size does not change results, so it stays out of the digest
        doc = {
            "plan": plan_digest(self.plan),
            "channel": channel_digest(self.channel),
            "trials": self.trials,
            "seed": self.seed,
            "message_mode": self.message_mode,
            "max_frame_errors": self.max_frame_errors,
            "clamp": self.clamp,
            "tie_break": self.tie_break,
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass
class SimReport:
    trials: int
    frame_errors: int
    bit_errors: int
    fer: float
    ber: float
    rate: float
    N: int
    K: int
    seed: int
    config_digest: str
    channel_digest: str
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, wall_time: bool = True) -> dict:
        d = asdict(self)
        if not wall_time:
            d.pop("wall_time")
        return d

    def to_json(self, wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(wall_time), sort_keys=True)

    def stderr(self) -> float:
        return float(np.sqrt(self.fer * (1 - self.fer) / self.trials))


def _trial_draws(cfg: SimConfig, trial: int):
    rng = philox(derive_seed(cfg.seed, trial))
    if cfg.message_mode == "random":
        msg = rng.integers(0, 2, cfg.plan.K, dtype=np.uint8)
    else:
        msg = np.zeros(cfg.plan.K, dtype=np.uint8)
    return msg, rng


def simulate(cfg: SimConfig) -> SimReport:
    """Run ``cfg.trials`` encode/transmit/decode rounds.

    Each trial draws from its own generator seeded by ``(seed, trial)``, so
    results do not depend on batching.  With ``max_frame_errors`` the run
    stops at the trial that reaches that many frame errors.
    """
    start = time.perf_counter()
    plan, W = cfg.plan, cfg.channel
    N, K = plan.N, plan.K
    frame_errors = bit_errors = done = 0
    stop = False
    for lo in range(0, cfg.trials, cfg.batch_size):
        hi = min(cfg.trials, lo + cfg.batch_size)
        draws = [_trial_draws(cfg, trial) for trial in range(lo, hi)]
        msgs = np.array([d[0] for d in draws], dtype=np.uint8).reshape(hi - lo, K)
        X = encode(plan, msgs)
        llrs = np.stack([sample_outputs(W, X[b], rng, cfg.clamp)[1]
                         for b, (_, rng) in enumerate(draws)])
        ties = None
        if cfg.tie_break == "random":
            ties = np.stack([rng.integers(0, 2, N, dtype=np.uint8) for _, rng in draws])
        decoded, _ = sc_decode(plan, llrs, cfg.clamp, tie_bits=ties)
        wrong = decoded != msgs
        frames = np.any(wrong, axis=1)
        if cfg.max_frame_errors is not None:
            cum = frame_errors + np.cumsum(frames)
            hit = np.flatnonzero(cum >= cfg.max_frame_errors)
            if hit.size:
                keep = hit[0] + 1
                frames, wrong = frames[:keep], wrong[:keep]
                stop = True
        frame_errors += int(frames.sum())
        bit_errors += int(wrong.sum())
        done += frames.size
        if stop:
            break
    return SimReport(
        trials=done,
        frame_errors=frame_errors,
        bit_errors=bit_errors,
        fer=frame_errors / done,
        ber=bit_errors / (done * K) if K else 0.0,
        rate=plan.rate,
        N=N,
        K=K,
        seed=cfg.seed,
        config_digest=cfg.digest(),
        channel_digest=channel_digest(W),
        wall_time=time.perf_counter() - start,
    )


CSV_FIELDS = ["N", "rate", "channel_digest", "fer", "ber", "trials", "seed"]


def append_csv(report: SimReport, path: str | os.PathLike) -> None:
    """Append one summary row, writing the header for a new file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore")
        if new:
            w.writeheader()
        w.writerow(report.to_dict())
