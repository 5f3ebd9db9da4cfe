"""Monte Carlo generation of quadrature frames realizing the covariance model.

Each sample propagates an independent coherent state through the lossy,
noisy channel and the imbalanced heterodyne receiver.  The receiver model
splits the signal on the (possibly unbalanced) beamsplitter, rotates each
arm's measured quadrature by its own imbalance angle, and adds detector
vacuum.  The beamsplitter vacuum enters the two arms with anticorrelated
sign, which cancels the vacuum contribution in the cross-correlation of
Bob's quadratures; only the signal-plus-noise part survives there.

Randomness is counter-based (Philox): every frame is a pure function of
(seed, frame index, sample index), generated in fixed-size chunks whose
counters are disjoint, so chunk-parallel generation reproduces sequential
output bit for bit.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict
from typing import Any

import numpy as np

from .gaussian import CovMat4
from .params import PhysicalParams

#: Samples generated per RNG counter block.  Fixed: changing it changes the
#: sample-to-counter mapping and therefore the frames themselves.
CHUNK_SAMPLES = 65536

#: Independent standard-normal rows drawn per sample, in this order.
_ROWS = ("x_a", "p_a", "x_s", "p_s", "x_n", "p_n", "x_c", "p_c",
         "x_v", "p_v", "x_d", "p_d")

FRAME_HEADER = "x_a,p_a,x_b,p_b"


@dataclass(frozen=True)
class FrameMeta:
    """Provenance of a frame: seed, index, parameters, normalization state."""

    seed: int | None = None
    frame_index: int | None = None
    params: PhysicalParams | None = None
    in_snu: bool = True


@dataclass(frozen=True)
class QuadratureFrame:
    """m samples of (x_a, p_a, x_B, p_B) in shot-noise units."""

    x_a: np.ndarray
    p_a: np.ndarray
    x_b: np.ndarray
    p_b: np.ndarray
    meta: FrameMeta = field(default_factory=FrameMeta)
    transformed: bool = False

    def __post_init__(self):
        cols = (self.x_a, self.p_a, self.x_b, self.p_b)
        m = len(self.x_a)
        if any(len(c) != m for c in cols):
            raise ValueError("frame columns must share one length")
        if m == 0:
            raise ValueError("frame must contain at least one sample")
        for c in cols:
            if not np.all(np.isfinite(c)):
                raise ValueError("frame contains non-finite values")

    @property
    def m(self) -> int:
        return len(self.x_a)

    def columns(self) -> np.ndarray:
        """Samples as an (m, 4) array in the canonical column order."""
        return np.column_stack([self.x_a, self.p_a, self.x_b, self.p_b])


@dataclass(frozen=True)
class SimConfig:
    """Frame-generation configuration with a 64-bit stream seed."""

    params: PhysicalParams
    m: int
    frames: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


def _chunk_generator(seed: int, frame_idx: int, chunk_idx: int) -> np.random.Generator:
    # Counter words are little-endian; chunk and frame indices live in the
    # upper words so per-chunk draws can never collide across chunks.
    counter = np.array([0, 0, chunk_idx, frame_idx], dtype=np.uint64)
    key = np.array([seed, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def generate_frame(cfg: SimConfig, frame_idx: int = 0) -> QuadratureFrame:
    """Draw one frame of the sample-level receiver model.

    Channel: X_in = sqrt(eta) (x_s + alpha x_a + x_n) + sqrt(1-eta) x_c with
    vacuum signal/loss modes and channel noise of variance eps.  Receiver:

        x_B = sqrt(eta_d) [sqrt(eta_bs) (cos(t) X_in + sin(t) P_in)
              + sqrt(1-eta_bs) (cos(t) x_v + sin(t) p_v)] + sqrt(1-eta_d) x_d
        p_B = -sqrt(eta_d) [sqrt(1-eta_bs) (cos(f) P_in + sin(f) X_in)
              - sqrt(eta_bs) (cos(f) p_v + sin(f) x_v)] + sqrt(1-eta_d) p_d

    The minus sign on the beamsplitter vacuum in p_B is what removes the
    vacuum unit from <x_B p_B>; the empirical covariance then matches
    ``build_pm_covariance`` in every entry.
    """
    if frame_idx < 0:
        raise ValueError("frame index must be non-negative")
    p = cfg.params
    st, ct = math.sin(p.theta), math.cos(p.theta)
    sf, cf = math.sin(p.phi), math.cos(p.phi)
    r_eta, r_loss = math.sqrt(p.eta), math.sqrt(1.0 - p.eta)
    r_eps = math.sqrt(p.eps)
    r_d, r_dvac = math.sqrt(p.eta_d), math.sqrt(1.0 - p.eta_d)
    r_bs, r_bsvac = math.sqrt(p.eta_bs), math.sqrt(1.0 - p.eta_bs)
    r_va = math.sqrt(p.v_a)

    out = {name: np.empty(cfg.m) for name in ("x_a", "p_a", "x_b", "p_b")}
    n_chunks = (cfg.m + CHUNK_SAMPLES - 1) // CHUNK_SAMPLES
    for chunk in range(n_chunks):
        lo = chunk * CHUNK_SAMPLES
        hi = min(lo + CHUNK_SAMPLES, cfg.m)
        z = _chunk_generator(cfg.seed, frame_idx, chunk).standard_normal(
            (len(_ROWS), hi - lo)
        )
        x_a, p_a = r_va * z[0], r_va * z[1]
        x_in = r_eta * (z[2] + p.alpha * x_a + r_eps * z[4]) + r_loss * z[6]
        p_in = r_eta * (z[3] + p.alpha * p_a + r_eps * z[5]) + r_loss * z[7]
        x_v, p_v, x_d, p_d = z[8], z[9], z[10], z[11]

        x_b = r_d * (
            r_bs * (ct * x_in + st * p_in) + r_bsvac * (ct * x_v + st * p_v)
        ) + r_dvac * x_d
        p_b = -r_d * (
            r_bsvac * (cf * p_in + sf * x_in) - r_bs * (cf * p_v + sf * x_v)
        ) + r_dvac * p_d

        out["x_a"][lo:hi] = x_a
        out["p_a"][lo:hi] = p_a
        out["x_b"][lo:hi] = x_b
        out["p_b"][lo:hi] = p_b

    meta = FrameMeta(seed=cfg.seed, frame_index=frame_idx, params=p, in_snu=True)
    return QuadratureFrame(meta=meta, **out)


def empirical_covariance(frame: QuadratureFrame) -> CovMat4:
    """Mean-subtracted sample covariance with divisor m - 1."""
    if frame.m < 2:
        raise ValueError("at least two samples required for a covariance")
    data = frame.columns()
    if np.any(np.var(data, axis=0) < 1e-12):
        raise ValueError("degenerate frame: a column has (near-)zero variance")
    cov = np.cov(data, rowvar=False, ddof=1)
    return CovMat4(cov, transformed=frame.transformed)


def save_frame_csv(frame: QuadratureFrame, path: str | os.PathLike) -> None:
    """Write a frame as CSV (shortest round-trip floats) plus a meta sidecar."""
    path = os.fspath(path)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(FRAME_HEADER + "\n")
        for xa, pa, xb, pb in zip(
            frame.x_a.tolist(), frame.p_a.tolist(),
            frame.x_b.tolist(), frame.p_b.tolist(),
        ):
            fh.write(f"{xa!r},{pa!r},{xb!r},{pb!r}\n")
    meta: dict[str, Any] = {
        "seed": frame.meta.seed,
        "frame_index": frame.meta.frame_index,
        "in_snu": frame.meta.in_snu,
        "transformed": frame.transformed,
        "params": asdict(frame.meta.params) if frame.meta.params else None,
    }
    with open(path + ".meta.json", "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_frame_csv(path: str | os.PathLike) -> QuadratureFrame:
    """Read a frame CSV, validating the header, column count and finiteness."""
    path = os.fspath(path)
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != FRAME_HEADER:
            raise ValueError(f"unexpected frame header {header!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected 4 columns, got {len(parts)}")
            rows.append([float(v) for v in parts])
    if not rows:
        raise ValueError("frame file contains no samples")
    data = np.asarray(rows)
    if not np.all(np.isfinite(data)):
        raise ValueError("frame file contains non-finite values")

    meta = FrameMeta()
    transformed = False
    meta_path = path + ".meta.json"
    if os.path.exists(meta_path):
        with open(meta_path, "r", encoding="ascii") as fh:
            raw = json.load(fh)
        params = PhysicalParams(**raw["params"]) if raw.get("params") else None
        meta = FrameMeta(
            seed=raw.get("seed"),
            frame_index=raw.get("frame_index"),
            params=params,
            in_snu=bool(raw.get("in_snu", True)),
        )
        transformed = bool(raw.get("transformed", False))
    return QuadratureFrame(
        x_a=data[:, 0], p_a=data[:, 1], x_b=data[:, 2], p_b=data[:, 3],
        meta=meta, transformed=transformed,
    )
