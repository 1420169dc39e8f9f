"""Active-subspace discovery and polynomial response surfaces.

The active subspace of a scalar function f over a box-supported uniform
density is spanned by the leading eigenvectors of the uncentered gradient
covariance E[grad f grad f^T], estimated here by the Monte Carlo average
(1/N) sum_i g_i g_i^T.  Inputs are affinely normalized from their bounds to
[-1, 1]^m before any gradient or covariance work, and all reported
quantities (eigenvectors, projections, surfaces) live in that normalized
space.  Tables without bounds are taken to be already normalized.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "SampleTable", "ASDecomposition", "ResponseSurface",
    "estimate_gradients", "estimate_covariance", "decompose",
    "choose_active_dimension", "project", "reassemble",
    "fit_response_surface", "evaluate_surface", "replicated_errors",
    "analyze_table", "surface_to_doc", "surface_from_doc",
    "load_sample_table", "save_sample_table",
]


@dataclass
class SampleTable:
    """Input/output (and optionally gradient) samples of a scalar function.

    inputs is (N, m), outputs (N,), gradients (N, m) rows of df/dmu in the
    raw parameter coordinates.  bounds, when present, is the (m, 2) support
    of the uniform sampling density and drives the [-1, 1] normalization.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    gradients: np.ndarray | None = None
    bounds: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.inputs.ndim != 2:
            raise DomainError("inputs must be an (N, m) array")
        self.outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
        if len(self.outputs) != len(self.inputs):
            raise DomainError("outputs length does not match inputs")
        if self.gradients is not None:
            self.gradients = np.asarray(self.gradients, dtype=float)
            if self.gradients.shape != self.inputs.shape:
                raise DomainError("gradients must have the same shape as inputs")
        if self.bounds is not None:
            self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
            if len(self.bounds) != self.m:
                raise DomainError("bounds must provide one interval per parameter")
            if (self.bounds[:, 1] < self.bounds[:, 0]).any():
                raise DomainError("bounds must satisfy lo <= hi")
            tol = 1e-9 * (self.bounds[:, 1] - self.bounds[:, 0]) + 1e-12
            if ((self.inputs < self.bounds[:, 0] - tol)
                    | (self.inputs > self.bounds[:, 1] + tol)).any():
                raise DomainError("inputs fall outside the stated bounds")

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    def _center_half(self):
        if self.bounds is None:
            m = self.m
            return np.zeros(m), np.ones(m)
        center = 0.5 * (self.bounds[:, 0] + self.bounds[:, 1])
        half = 0.5 * (self.bounds[:, 1] - self.bounds[:, 0])
        return center, np.where(half > 0.0, half, 1.0)

    def normalized_inputs(self) -> np.ndarray:
        center, half = self._center_half()
        return (self.inputs - center) / half

    def normalized_gradients(self) -> np.ndarray:
        if self.gradients is None:
            raise DomainError("table has no gradients; run estimate_gradients first")
        _, half = self._center_half()
        return self.gradients * half  # chain rule for mu = center + half * x

    def with_gradients(self, gradients) -> "SampleTable":
        return SampleTable(self.inputs, self.outputs, gradients, self.bounds)


@dataclass
class ASDecomposition:
    """Eigenpairs of the gradient covariance plus the active/inactive split."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    bootstrap_lo: np.ndarray | None = None
    bootstrap_hi: np.ndarray | None = None
    active_dim: int | None = None

    @property
    def m(self) -> int:
        return len(self.eigenvalues)

    def active_basis(self) -> np.ndarray:
        self._require_active()
        return self.eigenvectors[:, :self.active_dim]

    def inactive_basis(self) -> np.ndarray:
        self._require_active()
        return self.eigenvectors[:, self.active_dim:]

    def _require_active(self):
        if self.active_dim is None:
            raise DomainError("active dimension not set; call choose_active_dimension")
        if not 1 <= self.active_dim < self.m:
            raise DomainError(f"active dimension must be in [1, {self.m}), "
                              f"got {self.active_dim}")


def estimate_gradients(table: SampleTable, method: str = "local-linear",
                       evaluator=None, n_neighbors: int | None = None,
                       step: float = 1e-5) -> SampleTable:
    """Fill the gradient rows of a sample table.

    local-linear fits a least-squares hyperplane through the k nearest
    neighbors of each point (k defaults to max(m + 2, ceil(N / 10))) and
    needs no extra evaluations.  finite-difference runs central differences
    with the given evaluator callback f(mu) -> scalar.
    """
    if method == "finite-difference":
        if evaluator is None:
            raise ConfigError("finite-difference gradients need an evaluator callback")
        grads = np.empty_like(table.inputs)
        for i, mu in enumerate(table.inputs):
            for j in range(table.m):
                e = np.zeros(table.m)
                e[j] = step
                grads[i, j] = (evaluator(mu + e) - evaluator(mu - e)) / (2.0 * step)
        return table.with_gradients(grads)
    if method != "local-linear":
        raise ConfigError(f"unknown gradient method {method!r}")

    x = table.normalized_inputs()
    n, m = x.shape
    if n < m + 1:
        raise DomainError(f"local-linear gradients need at least m + 1 = {m + 1} samples")
    k = n_neighbors if n_neighbors is not None else max(m + 2, int(np.ceil(n / 10)))
    k = min(max(k, m + 1), n)
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    _, half = table._center_half()
    grads = np.empty((n, m))
    for i in range(n):
        nbr = np.argsort(d2[i], kind="stable")[:k]
        a = np.column_stack([np.ones(k), x[nbr] - x[i]])
        coef, _, rank, _ = np.linalg.lstsq(a, table.outputs[nbr], rcond=None)
        if rank < m + 1:
            raise DomainError(
                f"rank-deficient neighborhood around sample {i}; "
                f"increase the sample count or neighbor count"
            )
        grads[i] = coef[1:] / half  # back to raw coordinates
    return table.with_gradients(grads)


def estimate_covariance(table: SampleTable) -> np.ndarray:
    """Monte Carlo estimate (1/N) sum g_i g_i^T of the uncentered covariance."""
    g = table.normalized_gradients()
    return g.T @ g / len(g)


def _sorted_eig(cov: np.ndarray):
    lam, vec = np.linalg.eigh(cov)
    order = np.argsort(lam, kind="stable")[::-1]
    lam, vec = lam[order], vec[:, order]
    trace = max(lam.sum(), 0.0)
    if lam.min() < -1e-10 * max(trace, 1.0):
        raise DomainError("covariance has a significantly negative eigenvalue")
    lam = np.maximum(lam, 0.0)
    # sign convention: largest-magnitude component of each eigenvector positive
    for j in range(vec.shape[1]):
        k = int(np.argmax(np.abs(vec[:, j])))
        if vec[k, j] < 0.0:
            vec[:, j] = -vec[:, j]
    return lam, vec


def decompose(source, n_boot: int = 100, seed: int = 0) -> ASDecomposition:
    """Eigendecompose the gradient covariance with bootstrap intervals.

    source may be a SampleTable carrying gradients (covariance is estimated
    and 5%/95% percentile intervals are computed by resampling gradient rows
    with replacement n_boot times) or a plain symmetric (m, m) covariance
    matrix (no rows to resample, so no intervals).  Each resample's
    randomness derives from (seed, resample index), so results do not depend
    on execution order.
    """
    if isinstance(source, SampleTable):
        g = source.normalized_gradients()
        cov = g.T @ g / len(g)
    else:
        cov = np.asarray(source, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise DomainError("covariance must be a square matrix")
        scale = max(np.abs(cov).max(), 1.0)
        if np.abs(cov - cov.T).max() > 1e-10 * scale:
            raise DomainError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        g = None

    lam, vec = _sorted_eig(cov)
    lo = hi = None
    if g is not None and n_boot > 0:
        n = len(g)
        boot = np.empty((n_boot, len(lam)))
        for b in range(n_boot):
            rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
            rows = g[rng.integers(0, n, n)]
            boot[b] = _sorted_eig(rows.T @ rows / n)[0]
        lo = np.percentile(boot, 5.0, axis=0)
        hi = np.percentile(boot, 95.0, axis=0)
    return ASDecomposition(eigenvalues=lam, eigenvectors=vec,
                           bootstrap_lo=lo, bootstrap_hi=hi)


def choose_active_dimension(decomp: ASDecomposition, rule: str = "largest-gap",
                            explicit: int | None = None,
                            ratio: float = 1e-2) -> int:
    """Pick the active dimension M.

    largest-gap maximizes log(lam_i) - log(lam_{i+1}) (eigenvalues floored at
    1e-16); explicit returns the given M; threshold keeps every eigenvalue
    at least ratio * lam_1.  Always returns 1 <= M < m.
    """
    m = decomp.m
    if rule == "explicit":
        if explicit is None or not 1 <= explicit < m:
            raise DomainError(f"explicit active dimension must be in [1, {m})")
        return int(explicit)
    lam = np.maximum(decomp.eigenvalues, 1e-16)
    if rule == "largest-gap":
        gaps = np.log(lam[:-1]) - np.log(lam[1:])
        return int(np.argmax(gaps) + 1)
    if rule == "threshold":
        keep = int((lam >= ratio * lam[0]).sum())
        return min(max(keep, 1), m - 1)
    raise ConfigError(f"unknown active-dimension rule {rule!r}")


def project(decomp: ASDecomposition, mu):
    """Split a (normalized) parameter vector into active and inactive parts."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if len(mu) != decomp.m:
        raise DomainError(f"expected a {decomp.m}-vector, got length {len(mu)}")
    return decomp.active_basis().T @ mu, decomp.inactive_basis().T @ mu


def reassemble(decomp: ASDecomposition, active, inactive) -> np.ndarray:
    """Inverse of project: W1 @ active + W2 @ inactive."""
    return decomp.active_basis() @ np.asarray(active, dtype=float) \
        + decomp.inactive_basis() @ np.asarray(inactive, dtype=float)


# --- polynomial response surface ----------------------------------------

def _monomial_exponents(n_vars: int, degree: int):
    expos = [(0,) * n_vars]
    for total in range(1, degree + 1):
        for combo in combinations_with_replacement(range(n_vars), total):
            e = [0] * n_vars
            for i in combo:
                e[i] += 1
            expos.append(tuple(e))
    return expos


def _monomial_matrix(y: np.ndarray, exponents) -> np.ndarray:
    cols = [np.prod(y ** np.asarray(e, dtype=float), axis=1) for e in exponents]
    return np.column_stack(cols)


@dataclass
class ResponseSurface:
    """Total-degree polynomial in the active variables, fitted least squares."""

    degree: int
    active_dim: int
    coefficients: np.ndarray
    center: np.ndarray
    halfwidth: np.ndarray
    exponents: list = field(default_factory=list)

    def __post_init__(self):
        if not self.exponents:
            self.exponents = _monomial_exponents(self.active_dim, self.degree)
        expected = comb(self.active_dim + self.degree, self.degree)
        if len(self.coefficients) != expected:
            raise ConfigError(
                f"coefficient count {len(self.coefficients)} does not match the "
                f"{expected} total-degree-{self.degree} monomials in "
                f"{self.active_dim} variables"
            )


def evaluate_surface(surface: ResponseSurface, active) -> np.ndarray | float:
    """Evaluate the surface at one active vector or a stack of them."""
    y = np.asarray(active, dtype=float)
    single = y.ndim <= 1
    if y.ndim == 0:
        y = y.reshape(1, 1)
    elif y.ndim == 1:
        y = y.reshape(1, -1)
    if y.shape[1] != surface.active_dim:
        raise DomainError(f"expected {surface.active_dim} active variables, "
                          f"got {y.shape[1]}")
    z = (y - surface.center) / surface.halfwidth
    vals = _monomial_matrix(z, surface.exponents) @ surface.coefficients
    return float(vals[0]) if single else vals


def _split_indices(n: int, train_fraction: float, seed: int):
    n_train = int(round(train_fraction * n))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return perm[:n_train], perm[n_train:]


def fit_response_surface(decomp: ASDecomposition, table: SampleTable,
                         degree: int = 4, split_seed: int = 0,
                         train_fraction: float = 0.75):
    """Least-squares polynomial fit in the active variables on a random split.

    The table is split train/test (default 75%/25%), and the surface is
    fitted on the training rows only.  The report's normalized test error is
    the test RMSE divided by the max-min range of the outputs over the whole
    dataset.  Returns (surface, report dict).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train fraction must be in (0, 1), got {train_fraction}")
    if not 1 <= degree <= 6:
        raise ConfigError(f"surface degree must be in [1, 6], got {degree}")
    w1 = decomp.active_basis()
    m_active = w1.shape[1]
    n_coef = comb(m_active + degree, degree)
    if table.n < 2 * n_coef:
        raise DomainError(
            f"need at least {2 * n_coef} samples for a degree-{degree} surface in "
            f"{m_active} active variables, got {table.n}"
        )
    actives = table.normalized_inputs() @ w1
    train, test = _split_indices(table.n, train_fraction, split_seed)

    y_train = actives[train]
    center = 0.5 * (y_train.min(axis=0) + y_train.max(axis=0))
    halfwidth = 0.5 * (y_train.max(axis=0) - y_train.min(axis=0))
    halfwidth = np.where(halfwidth > 0.0, halfwidth, 1.0)

    exponents = _monomial_exponents(m_active, degree)
    a = _monomial_matrix((y_train - center) / halfwidth, exponents)
    coef, _, _, sv = np.linalg.lstsq(a, table.outputs[train], rcond=None)
    condition = float(sv[0] / sv[-1]) if sv[-1] > 0.0 else np.inf
    if condition > 1e10:
        warnings.warn(f"ill-conditioned surface fit (condition ~ {condition:.2e})",
                      stacklevel=2)

    surface = ResponseSurface(degree=degree, active_dim=m_active,
                              coefficients=coef, center=center,
                              halfwidth=halfwidth, exponents=exponents)
    pred_train = evaluate_surface(surface, actives[train])
    pred_test = evaluate_surface(surface, actives[test])
    rmse_train = float(np.sqrt(np.mean((pred_train - table.outputs[train]) ** 2)))
    rmse_test = float(np.sqrt(np.mean((pred_test - table.outputs[test]) ** 2)))
    out_range = float(table.outputs.max() - table.outputs.min())
    if out_range > 0.0:
        normalized = rmse_test / out_range
    else:
        normalized = 0.0 if rmse_test <= 1e-12 * max(1.0, np.abs(table.outputs).max()) \
            else np.inf
    report = {
        "n_train": int(len(train)),
        "n_test": int(len(test)),
        "rmse_train": rmse_train,
        "rmse_test": rmse_test,
        "output_range": out_range,
        "normalized_test_error": float(normalized),
        "condition": condition,
        "degree": degree,
        "active_dim": m_active,
    }
    return surface, report


def replicated_errors(table: SampleTable, degree: int = 4, active_rule: str = "largest-gap",
                      explicit_dim: int | None = None, n_replicates: int = 10,
                      seed: int = 0, train_fraction: float = 0.75) -> list:
    """Normalized test errors over independent train/test splits.

    Each replicate re-splits the data, re-estimates the decomposition from
    the training rows only, refits the surface and scores the test rows, so
    the average reflects both eigenvector and surface variability.
    """
    if table.gradients is None:
        raise DomainError("replicated_errors needs a table with gradients")
    errors = []
    for rep in range(n_replicates):
        split_seed_entropy = np.random.SeedSequence([seed, rep]).generate_state(1)[0]
        train, test = _split_indices(table.n, train_fraction, int(split_seed_entropy))
        sub = SampleTable(table.inputs[train], table.outputs[train],
                          table.gradients[train], table.bounds)
        decomp = decompose(sub, n_boot=0)
        decomp.active_dim = choose_active_dimension(decomp, active_rule,
                                                    explicit=explicit_dim)
        w1 = decomp.active_basis()
        exponents = _monomial_exponents(w1.shape[1], degree)
        y_train = table.normalized_inputs()[train] @ w1
        y_test = table.normalized_inputs()[test] @ w1
        center = 0.5 * (y_train.min(axis=0) + y_train.max(axis=0))
        half = 0.5 * (y_train.max(axis=0) - y_train.min(axis=0))
        half = np.where(half > 0.0, half, 1.0)
        a = _monomial_matrix((y_train - center) / half, exponents)
        coef = np.linalg.lstsq(a, table.outputs[train], rcond=None)[0]
        pred = _monomial_matrix((y_test - center) / half, exponents) @ coef
        rmse = np.sqrt(np.mean((pred - table.outputs[test]) ** 2))
        out_range = table.outputs.max() - table.outputs.min()
        errors.append(float(rmse / out_range) if out_range > 0.0 else 0.0)
    return errors


def surface_to_doc(surface: ResponseSurface) -> dict:
    return {
        "degree": surface.degree,
        "active_dim": surface.active_dim,
        "coefficients": surface.coefficients.tolist(),
        "center": surface.center.tolist(),
        "halfwidth": surface.halfwidth.tolist(),
        "exponents": [list(e) for e in surface.exponents],
    }


def surface_from_doc(doc: dict) -> ResponseSurface:
    return ResponseSurface(
        degree=int(doc["degree"]), active_dim=int(doc["active_dim"]),
        coefficients=np.asarray(doc["coefficients"], dtype=float),
        center=np.asarray(doc["center"], dtype=float),
        halfwidth=np.asarray(doc["halfwidth"], dtype=float),
        exponents=[tuple(e) for e in doc["exponents"]],
    )


def analyze_table(table: SampleTable, degree: int = 4, n_boot: int = 100,
                  seed: int = 0, split_seed: int = 0, train_fraction: float = 0.75,
                  rule: str = "largest-gap", explicit_dim: int | None = None,
                  n_replicates: int = 10):
    """Full single-output analysis: gradients, eigenpairs, surface, errors.

    Gradients are estimated by local-linear regression when the table has
    none.  Returns (report dict, decomposition, surface or None); the report
    flags the spectrum structure: "none" for a flat zero spectrum, "weak"
    for a gap ratio below 10, "strong" otherwise.
    """
    if table.gradients is None:
        table = estimate_gradients(table)
    decomp = decompose(table, n_boot=n_boot, seed=seed)
    decomp.active_dim = choose_active_dimension(decomp, rule, explicit=explicit_dim)
    lam = decomp.eigenvalues
    out_range = float(table.outputs.max() - table.outputs.min())
    if out_range == 0.0 or lam[0] <= (1e-10 * max(out_range, 1e-300)) ** 2:
        structure, gap_ratio = "none", 1.0
    else:
        gap_ratio = float(max(lam[decomp.active_dim - 1], 1e-16)
                          / max(lam[decomp.active_dim], 1e-16))
        structure = "weak" if gap_ratio < 10.0 else "strong"
    has_boot = decomp.bootstrap_lo is not None
    report = {
        "eigenvalues": lam.tolist(),
        "bootstrap_lo": decomp.bootstrap_lo.tolist() if has_boot else None,
        "bootstrap_hi": decomp.bootstrap_hi.tolist() if has_boot else None,
        "eigenvectors": decomp.eigenvectors.tolist(),
        "active_dim": int(decomp.active_dim),
        "gap_ratio": gap_ratio,
        "structure": structure,
    }
    surface = None
    if structure != "none":
        surface, fit_report = fit_response_surface(
            decomp, table, degree=degree, split_seed=split_seed,
            train_fraction=train_fraction)
        errors = replicated_errors(
            table, degree=degree, active_rule=rule, explicit_dim=explicit_dim,
            n_replicates=n_replicates, seed=seed, train_fraction=train_fraction)
        report["surface"] = fit_report
        report["replicate_errors"] = errors
        report["mean_normalized_error"] = float(np.mean(errors))
    return report, decomp, surface


# --- CSV persistence -----------------------------------------------------

def save_sample_table(table: SampleTable, path) -> None:
    """Columns mu_1..mu_m, f and, when present, g_1..g_m."""
    header = [f"mu_{j + 1}" for j in range(table.m)] + ["f"]
    if table.gradients is not None:
        header += [f"g_{j + 1}" for j in range(table.m)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(table.n):
            row = ["%.17g" % v for v in table.inputs[i]] + ["%.17g" % table.outputs[i]]
            if table.gradients is not None:
                row += ["%.17g" % v for v in table.gradients[i]]
            writer.writerow(row)


def load_sample_table(path, bounds=None) -> SampleTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigError(f"{path}: empty sample table")
        header = [h.strip() for h in header]
        mu_cols = [i for i, h in enumerate(header) if h.startswith("mu_")]
        g_cols = [i for i, h in enumerate(header) if h.startswith("g_")]
        if "f" not in header or not mu_cols:
            raise ConfigError(f"{path}: expected columns mu_1..mu_m and f")
        f_col = header.index("f")
        rows = [r for r in reader if r]
    inputs = np.array([[float(r[i]) for i in mu_cols] for r in rows])
    outputs = np.array([float(r[f_col]) for r in rows])
    gradients = None
    if g_cols:
        gradients = np.array([[float(r[i]) for i in g_cols] for r in rows])
    return SampleTable(inputs, outputs, gradients, bounds)
