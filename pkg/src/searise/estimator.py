"""Fixed-effects estimation core.

Pipeline: absorb fixed effects by alternating within-group demeaning, solve
the demeaned system by QR, then form cluster-robust covariances (one-way CR1
or two-way inclusion-exclusion). Dummy variables are never materialised here;
the dense-dummy path lives in :mod:`searise.validation` as an independent
oracle.

Conventions
-----------
* Group and cluster labels are encoded in order of first appearance, which
  makes every downstream float identical under relabelling.
* The small-sample factor uses ``K = n_regressors + fe_degrees`` where
  ``fe_degrees`` counts the absorbed dummy-space dimension (levels of the
  first group, plus levels of the second minus the number of connected
  components of their bipartite graph).
* ``r_squared`` includes the absorbed effects' explanatory power (residual
  sum of squares against the raw response's total sum of squares);
  ``r_squared_within`` is the same residual against the demeaned response.

All public functions treat their inputs as immutable, so fits over a shared
panel can run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .backend import demean
from .errors import ClusterError, ConvergenceError, DataError, RankDeficiencyError

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_SWEEPS = 10_000
# column whose demeaned norm falls below this * n is treated as absorbed
ABSORBED_NORM_FACTOR = 1e-8
Z_95 = 1.959963984540054


def encode_labels(labels: Sequence) -> tuple[np.ndarray, int]:
    """Integer-encode labels in order of first appearance.

    Returns ``(codes, n_levels)`` with codes int64. Appearance order (rather
    than sorted order) keeps all downstream arithmetic bitwise invariant
    under renaming of the labels.
    """
    mapping: dict = {}
    codes = np.empty(len(labels), dtype=np.int64)
    for i, v in enumerate(labels):
        codes[i] = mapping.setdefault(v, len(mapping))
    return codes, len(mapping)


@dataclass(frozen=True)
class DesignMatrix:
    """Named regressors, response, FE groups and cluster labels.

    ``x`` is (n, k) float64, ``y`` is (n,). ``fe_codes`` / ``cluster_codes``
    hold appearance-order integer codes aligned with rows.
    """

    names: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray
    fe_names: tuple[str, ...] = ()
    fe_codes: tuple[np.ndarray, ...] = ()
    fe_levels: tuple[int, ...] = ()
    cluster_names: tuple[str, ...] = ()
    cluster_codes: tuple[np.ndarray, ...] = ()
    cluster_levels: tuple[int, ...] = ()

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape[1] != len(self.names):
            raise DataError("design matrix shape does not match column names")
        if self.y.shape != (self.x.shape[0],):
            raise DataError("response length does not match design matrix")
        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):
            raise DataError("design matrix contains non-finite entries")
        for codes in self.fe_codes + self.cluster_codes:
            if codes.shape != (self.x.shape[0],):
                raise DataError("label vector length does not match design matrix")

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_columns(
        cls,
        columns: dict[str, np.ndarray],
        response: np.ndarray,
        fe_labels: dict[str, Sequence] | None = None,
        cluster_labels: dict[str, Sequence] | None = None,
    ) -> "DesignMatrix":
        names = tuple(columns)
        x = np.column_stack([np.asarray(columns[c], dtype=np.float64) for c in names]) \
            if names else np.empty((len(response), 0))
        fe_names, fe_codes, fe_levels = (), (), ()
        if fe_labels:
            fe_names = tuple(fe_labels)
            encoded = [encode_labels(fe_labels[g]) for g in fe_names]
            fe_codes = tuple(e[0] for e in encoded)
            fe_levels = tuple(e[1] for e in encoded)
        cl_names, cl_codes, cl_levels = (), (), ()
        if cluster_labels:
            cl_names = tuple(cluster_labels)
            encoded = [encode_labels(cluster_labels[g]) for g in cl_names]
            cl_codes = tuple(e[0] for e in encoded)
            cl_levels = tuple(e[1] for e in encoded)
        return cls(
            names=names,
            x=x,
            y=np.asarray(response, dtype=np.float64),
            fe_names=fe_names,
            fe_codes=fe_codes,
            fe_levels=fe_levels,
            cluster_names=cl_names,
            cluster_codes=cl_codes,
            cluster_levels=cl_levels,
        )


@dataclass(frozen=True)
class AbsorptionReport:
    iterations: int
    final_change: float
    converged: bool


@dataclass(frozen=True)
class FitResult:
    """Coefficients, covariance and diagnostics of one fitted specification."""

    spec_name: str
    coef_names: tuple[str, ...]
    coefficients: dict[str, float]
    vcov: np.ndarray
    n_obs: int
    r_squared: float
    r_squared_within: float
    fe_absorbed: tuple[str, ...]
    cluster_mode: str
    cluster_names: tuple[str, ...]
    convergence: AbsorptionReport
    k_model: int
    dropped_columns: tuple[str, ...] = ()
    constant: float | None = None
    vcov_repaired: bool = False
    derived: dict[str, float] = field(default_factory=dict)

    def std_errors(self) -> dict[str, float]:
        d = np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))
        return {n: float(d[i]) for i, n in enumerate(self.coef_names)}

    def t_stats(self) -> dict[str, float]:
        se = self.std_errors()
        return {
            n: (self.coefficients[n] / se[n]) if se[n] > 0 else float("nan")
            for n in self.coef_names
        }

    def conf_int(self, name: str, z: float = Z_95) -> tuple[float, float]:
        b = self.coefficients[name]
        s = self.std_errors()[name]
        return b - z * s, b + z * s

    def to_json_dict(self) -> dict:
        return {
            "spec_name": self.spec_name,
            "coefficients": dict(self.coefficients),
            "std_errors": self.std_errors(),
            "t_stats": self.t_stats(),
            "vcov": {"names": list(self.coef_names), "matrix": self.vcov.tolist()},
            "n_obs": self.n_obs,
            "r_squared": self.r_squared,
            "r_squared_within": self.r_squared_within,
            "fe_absorbed": list(self.fe_absorbed),
            "cluster_mode": self.cluster_mode,
            "cluster_names": list(self.cluster_names),
            "k_model": self.k_model,
            "dropped_columns": list(self.dropped_columns),
            "constant": self.constant,
            "vcov_repaired": self.vcov_repaired,
            "convergence": {
                "iterations": self.convergence.iterations,
                "final_change": self.convergence.final_change,
                "converged": self.convergence.converged,
            },
            "derived": dict(self.derived),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FitResult":
        conv = d.get("convergence", {})
        names = tuple(d["vcov"]["names"])
        return cls(
            spec_name=d["spec_name"],
            coef_names=names,
            coefficients={k: float(v) for k, v in d["coefficients"].items()},
            vcov=np.asarray(d["vcov"]["matrix"], dtype=np.float64).reshape(len(names), len(names)),
            n_obs=int(d.get("n_obs", 0)),
            r_squared=float(d.get("r_squared", float("nan"))),
            r_squared_within=float(d.get("r_squared_within", float("nan"))),
            fe_absorbed=tuple(d.get("fe_absorbed", ())),
            cluster_mode=d.get("cluster_mode", "none"),
            cluster_names=tuple(d.get("cluster_names", ())),
            convergence=AbsorptionReport(
                iterations=int(conv.get("iterations", 0)),
                final_change=float(conv.get("final_change", 0.0)),
                converged=bool(conv.get("converged", True)),
            ),
            k_model=int(d.get("k_model", len(names))),
            dropped_columns=tuple(d.get("dropped_columns", ())),
            constant=d.get("constant"),
            vcov_repaired=bool(d.get("vcov_repaired", False)),
            derived={k: float(v) for k, v in d.get("derived", {}).items()},
        )


def injected_fit(spec_name: str, coefficients: dict[str, float],
                 vcov: np.ndarray | None = None) -> FitResult:
    """Build a FitResult from externally supplied coefficients.

    Lets every downstream analytic (effect curves, projections, tables) run
    from a published coefficient table without estimation. Bands collapse to
    the point estimate unless a covariance matrix is supplied.
    """
    names = tuple(coefficients)
    if vcov is None:
        vcov = np.zeros((len(names), len(names)))
    vcov = np.asarray(vcov, dtype=np.float64)
    if vcov.shape != (len(names), len(names)):
        raise DataError("injected vcov shape does not match coefficient count")
    return FitResult(
        spec_name=spec_name,
        coef_names=names,
        coefficients={k: float(v) for k, v in coefficients.items()},
        vcov=vcov,
        n_obs=0,
        r_squared=float("nan"),
        r_squared_within=float("nan"),
        fe_absorbed=(),
        cluster_mode="none",
        cluster_names=(),
        convergence=AbsorptionReport(0, 0.0, True),
        k_model=len(names),
    )


# ---------------------------------------------------------------------------
# absorption
# ---------------------------------------------------------------------------

def absorb_fixed_effects(
    dm: DesignMatrix,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_SWEEPS,
) -> tuple[DesignMatrix, AbsorptionReport]:
    """Project regressors and response off the fixed-effect group space.

    Single-group absorption is closed form (one demeaning pass); multiple
    groups iterate alternating sweeps until the largest per-entry adjustment
    in a sweep drops below ``tolerance``. Raises :class:`ConvergenceError`
    carrying the last residual when the sweep budget is exhausted.
    """
    if not dm.fe_codes:
        raise DataError("absorption requires at least one fixed-effect group")
    data = np.ascontiguousarray(np.column_stack([dm.x, dm.y[:, None]]))
    if len(dm.fe_codes) == 1:
        codes = dm.fe_codes[0]
        lv = dm.fe_levels[0]
        counts = np.bincount(codes, minlength=lv).astype(np.float64)
        means = np.empty((lv, data.shape[1]))
        for c in range(data.shape[1]):
            means[:, c] = np.bincount(codes, weights=data[:, c], minlength=lv)
        means /= counts[:, None]
        data -= means[codes]
        resid = np.empty_like(means)
        for c in range(data.shape[1]):
            resid[:, c] = np.bincount(codes, weights=data[:, c], minlength=lv)
        resid /= counts[:, None]
        report = AbsorptionReport(1, float(np.abs(resid).max()), True)
    else:
        codes2d = np.ascontiguousarray(np.column_stack(dm.fe_codes).astype(np.int64))
        levels = np.asarray(dm.fe_levels, dtype=np.int64)
        its, change, ok = demean(data, codes2d, levels, tolerance, max_iter)
        if not ok:
            raise ConvergenceError(
                f"fixed-effect absorption did not converge after {max_iter} sweeps "
                f"(last change {change:.3e} > tolerance {tolerance:.1e})",
                last_change=change,
            )
        report = AbsorptionReport(its, change, True)
    k = dm.x.shape[1]
    out = replace(dm, x=data[:, :k].copy(), y=data[:, k].copy())
    return out, report


def fe_degrees(fe_codes: Sequence[np.ndarray], fe_levels: Sequence[int]) -> int:
    """Dimension of the absorbed dummy space.

    One group: its level count. Two groups: levels of both minus the number
    of connected components of their bipartite level graph (exact for two
    groups, the only case used by the model registry).
    """
    if not fe_codes:
        return 0
    if len(fe_codes) == 1:
        return fe_levels[0]
    if len(fe_codes) > 2:
        raise DataError("more than two fixed-effect groups are not supported")
    a, b = fe_codes
    la, lb = fe_levels
    parent = list(range(la + lb))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(a)):
        ra, rb = find(int(a[i])), find(la + int(b[i]))
        if ra != rb:
            parent[rb] = ra
    components = len({find(i) for i in range(la + lb)})
    return la + lb - components


# ---------------------------------------------------------------------------
# least squares
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OlsResult:
    names: tuple[str, ...]
    beta: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray


def ols_fit(x: np.ndarray, y: np.ndarray, names: Sequence[str]) -> OlsResult:
    """Least squares via QR on the (demeaned) design.

    Raises :class:`RankDeficiencyError` naming the first column that is
    linearly dependent on its predecessors.
    """
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    threshold = max(diag.max(), 1.0) * 1e-10 if diag.size else 0.0
    for j, d in enumerate(diag):
        if d < threshold:
            raise RankDeficiencyError(
                f"column '{names[j]}' is collinear with preceding columns", column=names[j]
            )
    beta = np.linalg.solve(r, q.T @ y)
    fitted = x @ beta
    return OlsResult(tuple(names), beta, y - fitted, fitted)


# ---------------------------------------------------------------------------
# cluster-robust covariance
# ---------------------------------------------------------------------------

def _cr1_meat(x: np.ndarray, resid: np.ndarray, codes: np.ndarray, levels: int) -> np.ndarray:
    k = x.shape[1]
    scores = np.zeros((levels, k))
    xu = x * resid[:, None]
    for c in range(k):
        scores[:, c] = np.bincount(codes, weights=xu[:, c], minlength=levels)
    return scores.T @ scores


def _cr1_factor(n: int, k_model: int, g: int) -> float:
    if g < 2:
        raise ClusterError("cluster-robust variance needs at least 2 clusters")
    if n <= k_model:
        raise ClusterError("no residual degrees of freedom for the CR1 factor")
    return (g / (g - 1.0)) * ((n - 1.0) / (n - k_model))


def _intersection_codes(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, int]:
    return encode_labels(list(zip(a.tolist(), b.tolist())))


def cluster_robust_vcov(
    x: np.ndarray,
    resid: np.ndarray,
    cluster_codes: Sequence[np.ndarray],
    cluster_levels: Sequence[int],
    mode: str,
    k_model: int,
) -> tuple[np.ndarray, bool]:
    """Sandwich covariance for the demeaned design.

    ``one_way`` is CR1 on the first clustering with factor
    G/(G-1) * (N-1)/(N-K). ``two_way`` combines both clusterings and their
    intersection by inclusion-exclusion, each term carrying its own CR1
    factor; if the difference has a negative eigenvalue the spectrum is
    floored at zero and the repair flagged in the second return value.
    """
    n = x.shape[0]
    xtx = x.T @ x

    def sandwich(codes: np.ndarray, levels: int) -> np.ndarray:
        meat = _cr1_meat(x, resid, codes, levels) * _cr1_factor(n, k_model, levels)
        t1 = np.linalg.solve(xtx, meat)
        return np.linalg.solve(xtx, t1.T).T

    if mode == "one_way":
        if not cluster_codes:
            raise ClusterError("one-way clustering requires a cluster label vector")
        v = sandwich(cluster_codes[0], cluster_levels[0])
        repaired = False
    elif mode == "two_way":
        if len(cluster_codes) < 2:
            raise ClusterError("two-way clustering requires two cluster label vectors")
        ci, li = _intersection_codes(cluster_codes[0], cluster_codes[1])
        v = (
            sandwich(cluster_codes[0], cluster_levels[0])
            + sandwich(cluster_codes[1], cluster_levels[1])
            - sandwich(ci, li)
        )
        repaired = False
        w, q = np.linalg.eigh((v + v.T) / 2.0)
        if w.min() < 0.0:
            v = (q * np.clip(w, 0.0, None)) @ q.T
            repaired = True
    else:
        raise ClusterError(f"unknown cluster mode '{mode}'")
    v = (v + v.T) / 2.0
    return v, repaired


# ---------------------------------------------------------------------------
# full fit
# ---------------------------------------------------------------------------

def fit(
    dm: DesignMatrix,
    spec_name: str = "",
    cluster_mode: str = "one_way",
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_SWEEPS,
) -> FitResult:
    """Absorb, solve and form clustered covariance for one design.

    Columns whose demeaned norm falls below ``1e-8 * n`` are reported as
    absorbed by the fixed effects and excluded from the solve rather than
    raised as rank errors. The constant is reported only for single-group
    specifications (as raw-mean balance ``ybar - xbar @ beta``); with two
    absorbed groups no global intercept is identified.
    """
    absorbed_dm, report = absorb_fixed_effects(dm, tolerance, max_iter)
    n = dm.n_obs
    keep, dropped = [], []
    for j, name in enumerate(dm.names):
        if np.linalg.norm(absorbed_dm.x[:, j]) < ABSORBED_NORM_FACTOR * n:
            dropped.append(name)
        else:
            keep.append(j)
    if not keep:
        raise DataError("all regressors were absorbed by the fixed effects")
    names = tuple(dm.names[j] for j in keep)
    xt = absorbed_dm.x[:, keep]
    yt = absorbed_dm.y

    res = ols_fit(xt, yt, names)
    k_model = len(names) + fe_degrees(dm.fe_codes, dm.fe_levels)
    vcov, repaired = cluster_robust_vcov(
        xt, res.residuals, dm.cluster_codes, dm.cluster_levels, cluster_mode, k_model
    )

    ssr = float(res.residuals @ res.residuals)
    tss_raw = float(np.sum((dm.y - dm.y.mean()) ** 2))
    yt_centered = yt - yt.mean()
    tss_within = float(yt_centered @ yt_centered)
    r2 = 1.0 - ssr / tss_raw if tss_raw > 0 else float("nan")
    r2_within = 1.0 - ssr / tss_within if tss_within > 0 else float("nan")

    constant = None
    if len(dm.fe_codes) <= 1:
        constant = float(dm.y.mean() - dm.x[:, keep].mean(axis=0) @ res.beta)

    return FitResult(
        spec_name=spec_name,
        coef_names=names,
        coefficients={name: float(b) for name, b in zip(names, res.beta)},
        vcov=vcov,
        n_obs=n,
        r_squared=r2,
        r_squared_within=r2_within,
        fe_absorbed=dm.fe_names,
        cluster_mode=cluster_mode,
        cluster_names=dm.cluster_names,
        convergence=report,
        k_model=k_model,
        dropped_columns=tuple(dropped),
        constant=constant,
        vcov_repaired=repaired,
    )
