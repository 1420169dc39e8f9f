"""Dynamic mode decomposition of equispaced snapshot series.

Fits a low-rank linear evolution operator to columns x_1 ... x_l of a
snapshot matrix: with S = [x_1 ... x_{l-1}] and S' = [x_2 ... x_l], the
best-fit operator is A = S' S^+.  The algorithm never forms A; it works
with the truncated SVD S ~ U_r Sigma_r V_r* and the projected operator
A_tilde = U_r* S' V_r Sigma_r^{-1}, whose eigenpairs give the modes,
discrete-time eigenvalues and amplitudes used for reconstruction and
forecasting:

    x_{k+1} ~ Theta Lambda^k b,      b = Theta^+ x_1.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "SnapshotSet", "DMDModel", "build_shift_pair", "fit",
    "reconstruct", "reconstruct_series", "predict_next", "predict_at_time",
    "training_error", "imaginary_residual",
    "load_snapshots_csv", "save_snapshots_csv",
    "load_snapshots_bin", "save_snapshots_bin",
    "save_model_json", "load_model_json",
]


@dataclass
class SnapshotSet:
    """Time-equispaced system states: column k of data is the state at t0 + k*dt."""

    data: np.ndarray
    t0: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise DomainError("snapshot data must be a 2-D (n x l) array")
        if self.data.shape[1] < 2:
            raise DomainError(f"need at least 2 snapshots, got {self.data.shape[1]}")
        if not self.dt > 0:
            raise DomainError(f"sampling interval must be positive, got {self.dt}")
        self.dt = float(self.dt)
        self.t0 = float(self.t0)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def l(self) -> int:
        return self.data.shape[1]

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.l)


@dataclass
class DMDModel:
    """Fitted decomposition: modes (n x r), discrete eigenvalues and amplitudes (r,)."""

    modes: np.ndarray
    eigenvalues: np.ndarray
    amplitudes: np.ndarray
    rank: int
    t0: float
    dt: float
    mode_kind: str


def build_shift_pair(snapshots: SnapshotSet):
    """Split the data into (S, S_next) where each S_next column is one step ahead."""
    return snapshots.data[:, :-1], snapshots.data[:, 1:]


def _select_rank(sigma: np.ndarray, n_positive: int, rank) -> int:
    if isinstance(rank, (int, np.integer)) and not isinstance(rank, bool):
        if rank < 1:
            raise DomainError(f"explicit rank must be >= 1, got {rank}")
        r = int(rank)
        if r > n_positive:
            warnings.warn(
                f"requested rank {r} exceeds the {n_positive} nonzero singular "
                f"values; reduced to {n_positive}", stacklevel=3)
            r = n_positive
        return r
    if rank == "full":
        return n_positive
    tau = 1.0 - 1e-10 if rank is None else float(rank)
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"energy threshold must lie in (0, 1], got {tau}")
    energy = np.cumsum(sigma[:n_positive] ** 2)
    energy /= energy[-1]
    return int(np.searchsorted(energy, tau - 1e-15) + 1)


def fit(snapshots: SnapshotSet, rank=None, mode_kind: str = "exact",
        amplitudes_from: str = "x1") -> DMDModel:
    """Fit a DMD model.

    rank selects the SVD truncation: an int is used directly, a float in
    (0, 1] is an energy threshold (smallest r capturing that fraction of
    sum(sigma^2)), "full" keeps every nonzero singular value, and None uses
    the default threshold 1 - 1e-10.

    mode_kind "exact" computes eigenvectors of the full operator as
    S' V_r Sigma_r^{-1} W; "projected" lifts the low-rank eigenvectors as
    U_r W.  amplitudes_from "x1" solves Theta b = x_1 (the first snapshot);
    "series" solves the least-squares problem over all training snapshots.
    """
    if mode_kind not in ("exact", "projected"):
        raise ConfigError(f"mode_kind must be 'exact' or 'projected', got {mode_kind!r}")
    if not np.any(snapshots.data):
        raise DomainError("cannot fit DMD to an all-zero snapshot matrix")
    s_mat, s_next = build_shift_pair(snapshots)
    u, sigma, vh = np.linalg.svd(s_mat, full_matrices=False)
    tol = max(s_mat.shape) * np.finfo(float).eps * (sigma[0] if len(sigma) else 0.0)
    n_positive = int((sigma > tol).sum())
    if n_positive == 0:
        raise DomainError("shift matrix S is zero; no dynamics to fit")
    r = _select_rank(sigma, n_positive, rank)

    u_r = u[:, :r]
    v_r = vh[:r].conj().T
    inv_sigma = 1.0 / sigma[:r]
    low_rank = u_r.conj().T @ s_next @ (v_r * inv_sigma)
    lam, w = np.linalg.eig(low_rank)
    if mode_kind == "exact":
        modes = s_next @ (v_r * inv_sigma) @ w
    else:
        modes = u_r @ w

    # descending |lambda|, ties broken by descending imaginary part
    order = np.lexsort((-lam.imag, -np.abs(lam)))
    lam = lam[order]
    modes = modes[:, order]

    x1 = snapshots.data[:, 0]
    if amplitudes_from == "x1":
        b = np.linalg.lstsq(modes, x1.astype(complex), rcond=None)[0]
    elif amplitudes_from == "series":
        # vandermonde system over the whole training window
        powers = lam[None, :] ** np.arange(snapshots.l)[:, None]
        lhs = np.vstack([modes * powers[k][None, :] for k in range(snapshots.l)])
        rhs = snapshots.data.T.reshape(-1).astype(complex)
        b = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    else:
        raise ConfigError(f"amplitudes_from must be 'x1' or 'series', got {amplitudes_from!r}")

    return DMDModel(modes=modes, eigenvalues=lam, amplitudes=b, rank=r,
                    t0=snapshots.t0, dt=snapshots.dt, mode_kind=mode_kind)


def _complex_series(model: DMDModel, steps: np.ndarray) -> np.ndarray:
    powers = model.eigenvalues[:, None] ** np.asarray(steps, dtype=float)[None, :]
    return model.modes @ (powers * model.amplitudes[:, None])


def reconstruct(model: DMDModel, k: int) -> np.ndarray:
    """State k steps after the first snapshot (real part of Theta Lambda^k b)."""
    if k < 0:
        raise DomainError(f"step index must be >= 0, got {k}")
    return _complex_series(model, np.array([k])).real[:, 0]


def reconstruct_series(model: DMDModel, k_max: int) -> np.ndarray:
    """Columns 0..k_max of the reconstruction, shape (n, k_max + 1)."""
    if k_max < 0:
        raise DomainError(f"k_max must be >= 0, got {k_max}")
    return _complex_series(model, np.arange(k_max + 1)).real


def predict_next(model: DMDModel, x) -> np.ndarray:
    """One application of the implicit operator Theta Lambda Theta^+ to x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    coeff = np.linalg.lstsq(model.modes, x.astype(complex), rcond=None)[0]
    return (model.modes @ (model.eigenvalues * coeff)).real


def predict_at_time(model: DMDModel, t: float) -> np.ndarray:
    """Forecast at absolute time t (continuous eigenvalue power (t - t0)/dt)."""
    k = (t - model.t0) / model.dt
    if k < 0:
        raise DomainError(f"time {t} precedes the training start {model.t0}")
    return _complex_series(model, np.array([k])).real[:, 0]


def training_error(model: DMDModel, snapshots: SnapshotSet) -> float:
    """Frobenius-norm relative error of the reconstruction over the data window."""
    if snapshots.n != model.modes.shape[0]:
        raise DomainError("snapshot dimension does not match the model")
    recon = reconstruct_series(model, snapshots.l - 1)
    denom = np.linalg.norm(snapshots.data)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(recon - snapshots.data) / denom)


def imaginary_residual(model: DMDModel, k_max: int) -> float:
    """Largest imaginary-part norm over the reconstruction columns (diagnostic)."""
    series = _complex_series(model, np.arange(k_max + 1))
    return float(np.abs(series.imag).max())


# --- snapshot and model persistence -------------------------------------

def save_snapshots_csv(snapshots: SnapshotSet, path) -> None:
    """First line holds t0,dt; each following row is one state component over time."""
    with open(path, "w") as fh:
        fh.write("%.17g,%.17g\n" % (snapshots.t0, snapshots.dt))
        np.savetxt(fh, snapshots.data, delimiter=",", fmt="%.17g")


def load_snapshots_csv(path) -> SnapshotSet:
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            t0_s, dt_s = header.split(",")
            t0, dt = float(t0_s), float(dt_s)
        except ValueError:
            raise ConfigError(f"{path}: expected 't0,dt' header line, got {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return SnapshotSet(data, t0=t0, dt=dt)


def save_snapshots_bin(snapshots: SnapshotSet, path) -> None:
    """Little-endian: int64 n, int64 l, float64 dt header, then row-major data."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qqd", snapshots.n, snapshots.l, snapshots.dt))
        fh.write(snapshots.data.astype("<f8").tobytes())


def load_snapshots_bin(path) -> SnapshotSet:
    raw = Path(path).read_bytes()
    if len(raw) < 24:
        raise ConfigError(f"{path}: truncated binary snapshot file")
    n, l, dt = struct.unpack("<qqd", raw[:24])
    expected = 24 + n * l * 8
    if len(raw) != expected:
        raise ConfigError(
            f"{path}: expected {expected} bytes for a {n} x {l} series, got {len(raw)}"
        )
    data = np.frombuffer(raw[24:], dtype="<f8").reshape(n, l)
    return SnapshotSet(data, t0=0.0, dt=dt)


def save_model_json(model: DMDModel, path) -> None:
    doc = {
        "rank": model.rank,
        "t0": model.t0,
        "dt": model.dt,
        "mode_kind": model.mode_kind,
        "modes_real": model.modes.real.tolist(),
        "modes_imag": model.modes.imag.tolist(),
        "eigenvalues_real": model.eigenvalues.real.tolist(),
        "eigenvalues_imag": model.eigenvalues.imag.tolist(),
        "amplitudes_real": model.amplitudes.real.tolist(),
        "amplitudes_imag": model.amplitudes.imag.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_model_json(path) -> DMDModel:
    try:
        doc = json.loads(Path(path).read_text())
        modes = np.array(doc["modes_real"]) + 1j * np.array(doc["modes_imag"])
        lam = np.array(doc["eigenvalues_real"]) + 1j * np.array(doc["eigenvalues_imag"])
        b = np.array(doc["amplitudes_real"]) + 1j * np.array(doc["amplitudes_imag"])
        return DMDModel(modes=modes, eigenvalues=lam, amplitudes=b,
                        rank=int(doc["rank"]), t0=float(doc["t0"]),
                        dt=float(doc["dt"]), mode_kind=doc["mode_kind"])
    except (json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"{path}: invalid model document ({exc})")
