"""Pairwise preference model and the statistics around it.

A ridge-penalized logistic regression over standardized feature deltas:
p(A preferred) = sigmoid(intercept + beta . z(featA - featB)). Fitting is
Newton / IRLS on the penalized log-likelihood with Wald standard errors;
an L1 variant (FISTA) produces sparse coefficients for feature screening.

The bundled pretrained coefficients come from published odds ratios; their
standardization scales derive from the package's example scenes (reference
data, not the original study's). With a zero intercept and zero-mean
standardization the model is exactly antisymmetric: p(d) + p(-d) = 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats as sstats

from .features import FEATURE_NAMES, N_FEATURES, DeltaFeatureVector

_DATA_DIR = Path(__file__).parent / "data"


class ModelError(ValueError):
    pass


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic; sigmoid(x) + sigmoid(-x) == 1 in floats."""
    x = np.asarray(x, float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass
class LogisticModel:
    """Coefficients over standardized deltas plus the stats to standardize."""

    feature_names: tuple
    beta: np.ndarray
    intercept: float
    mean: np.ndarray
    std: np.ndarray
    l2: float = 1.0
    provenance: str = "fitted"

    def __post_init__(self):
        if tuple(self.feature_names) != FEATURE_NAMES:
            raise ModelError("feature order mismatch; models are bound to the "
                             "canonical feature key")
        self.beta = np.asarray(self.beta, float).reshape(N_FEATURES)
        self.mean = np.asarray(self.mean, float).reshape(N_FEATURES)
        self.std = np.asarray(self.std, float).reshape(N_FEATURES)
        if not np.all(np.isfinite(self.beta)):
            raise ModelError("non-finite coefficients")
        if np.any(self.std <= 0):
            raise ModelError("standardization std must be positive")

    def odds_ratios(self) -> np.ndarray:
        return np.exp(self.beta)

    def standardize(self, deltas: np.ndarray) -> np.ndarray:
        return (np.asarray(deltas, float) - self.mean) / self.std

    def predict_proba(self, deltas: np.ndarray) -> np.ndarray | float:
        """p(A preferred) for delta rows (N, 16) or a single (16,) delta."""
        d = np.asarray(deltas, float)
        single = d.ndim == 1
        z = self.standardize(np.atleast_2d(d))
        p = sigmoid(self.intercept + z @ self.beta)
        return float(p[0]) if single else p

    # -- persistence --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "feature_order": list(self.feature_names),
            "beta": self.beta.tolist(),
            "intercept": self.intercept,
            "standardization": {"mean": self.mean.tolist(), "std": self.std.tolist()},
            "regularization": {"kind": "l2", "lam": self.l2},
            "provenance": self.provenance,
        }

    @staticmethod
    def from_json(doc: dict) -> "LogisticModel":
        try:
            return LogisticModel(
                tuple(doc["feature_order"]),
                np.array(doc["beta"], float),
                float(doc["intercept"]),
                np.array(doc["standardization"]["mean"], float),
                np.array(doc["standardization"]["std"], float),
                float(doc.get("regularization", {}).get("lam", 1.0)),
                doc.get("provenance", "fitted"))
        except KeyError as exc:
            raise ModelError(f"model file missing field {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "LogisticModel":
        with open(path) as fh:
            return LogisticModel.from_json(json.load(fh))


def pretrained() -> LogisticModel:
    """The bundled model: beta = ln(odds ratio) per feature, zero intercept.

    Standardization means are zero (delta features are antisymmetric) and
    the scales come from the example-scene feature distributions.
    """
    doc = json.loads((_DATA_DIR / "pretrained_model.json").read_text())
    ors = doc["odds_ratio"]
    missing = [n for n in FEATURE_NAMES if n not in ors]
    if missing:
        raise ModelError(f"pretrained file lacks odds ratios for {missing}")
    beta = np.array([np.log(float(ors[n])) for n in FEATURE_NAMES])
    std = np.array([float(doc["standardization"]["std"][n]) for n in FEATURE_NAMES])
    return LogisticModel(FEATURE_NAMES, beta, 0.0, np.zeros(N_FEATURES), std,
                         float(doc["regularization"]["lam"]), "table1")


def predict_pair(model: LogisticModel, delta: DeltaFeatureVector | np.ndarray) -> float:
    d = delta.values if isinstance(delta, DeltaFeatureVector) else delta
    return float(model.predict_proba(np.asarray(d, float).reshape(N_FEATURES)))


def preference_field(model: LogisticModel, reference_features: np.ndarray,
                     candidate_features: np.ndarray) -> np.ndarray:
    """Score each candidate task against a reference: p(candidate preferred)."""
    cand = np.atleast_2d(np.asarray(candidate_features, float))
    if cand.shape[0] == 0:
        raise ModelError("no candidate tasks to score")
    deltas = cand - np.asarray(reference_features, float)[None, :]
    return model.predict_proba(deltas)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

@dataclass
class FitConfig:
    l2: float = 1.0
    test_fraction: float = 0.30
    cv_folds: int = 5
    seed: int = 0
    max_iter: int = 200
    # per published procedure both splits are standardized independently;
    # "train" reuses the training stats on the test side instead
    standardize: str = "independent"


@dataclass
class FitReport:
    test_accuracy: float
    cv_accuracy: float
    roc_auc: float
    beta: np.ndarray
    odds_ratio: np.ndarray
    p_values: np.ndarray
    converged: bool
    iterations: int
    separation_flag: bool = False
    dropped_features: list = field(default_factory=list)


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, list]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    dropped = [i for i in range(X.shape[1]) if std[i] == 0]
    safe = np.where(std > 0, std, 1.0)
    return (X - mean) / safe, mean, safe, dropped


def _newton_logistic(X: np.ndarray, y: np.ndarray, l2: float,
                     max_iter: int = 200, grad_tol: float = 1e-8,
                     step_tol: float = 1e-10):
    """Penalized MLE via Newton steps; intercept is the last, unpenalized column."""
    n, p = X.shape
    Xb = np.column_stack([X, np.ones(n)])
    w = np.zeros(p + 1)
    pen = np.append(np.full(p, l2), 0.0)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = Xb @ w
        mu = sigmoid(eta)
        grad = Xb.T @ (y - mu) - pen * w
        if np.max(np.abs(grad)) < grad_tol:
            converged = True
            break
        W = np.maximum(mu * (1.0 - mu), 1e-12)
        H = (Xb * W[:, None]).T @ Xb + np.diag(pen)
        step = np.linalg.solve(H, grad)
        w = w + step
        if np.max(np.abs(step)) < step_tol:
            converged = True
            break
    eta = Xb @ w
    mu = sigmoid(eta)
    W = np.maximum(mu * (1.0 - mu), 1e-12)
    H = (Xb * W[:, None]).T @ Xb + np.diag(pen)
    cov = np.linalg.inv(H)
    return w[:p], w[p], cov, converged, it


def penalized_loglik_grad(beta: np.ndarray, intercept: float, X: np.ndarray,
                          y: np.ndarray, l2: float) -> np.ndarray:
    """Gradient of the penalized log-likelihood w.r.t. (beta, intercept)."""
    mu = sigmoid(X @ beta + intercept)
    return np.append(X.T @ (y - mu) - l2 * beta, np.sum(y - mu))


def penalized_loglik(beta: np.ndarray, intercept: float, X: np.ndarray,
                     y: np.ndarray, l2: float) -> float:
    eta = X @ beta + intercept
    # log(sigmoid) via logaddexp for stability
    ll = np.sum(y * eta - np.logaddexp(0.0, eta))
    return float(ll - 0.5 * l2 * np.sum(beta ** 2))


def fit(X: np.ndarray, y: np.ndarray,
        config: FitConfig | None = None) -> tuple[LogisticModel, FitReport]:
    """Train/test split, standardize, penalized MLE, CV accuracy, Wald stats."""
    config = config or FitConfig()
    X = np.asarray(X, float)
    y = np.asarray(y, float).reshape(-1)
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise ModelError(f"expected (n, {N_FEATURES}) delta matrix")
    if len(np.unique(y)) < 2:
        raise ModelError("need both outcome classes to fit")

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(X))
    n_test = int(round(len(X) * config.test_fraction))
    test_idx, train_idx = order[:n_test], order[n_test:]
    Xtr_raw, ytr = X[train_idx], y[train_idx]
    Xte_raw, yte = X[test_idx], y[test_idx]

    Ztr, mean, std, dropped = _standardize(Xtr_raw)
    if dropped:
        import warnings
        warnings.warn(f"zero-variance features dropped from the fit: "
                      f"{[FEATURE_NAMES[i] for i in dropped]}", stacklevel=2)
        Ztr = Ztr.copy()
        Ztr[:, dropped] = 0.0

    beta, intercept, cov, converged, iters = _newton_logistic(
        Ztr, ytr, config.l2, config.max_iter)
    beta[dropped] = 0.0

    se = np.sqrt(np.diag(cov)[:N_FEATURES])
    with np.errstate(divide="ignore", invalid="ignore"):
        zscores = np.where(se > 0, beta / se, 0.0)
    p_values = 2.0 * sstats.norm.sf(np.abs(zscores))
    p_values[dropped] = 1.0
    separation = bool(np.any(np.abs(beta) > 15.0))

    model = LogisticModel(FEATURE_NAMES, beta, float(intercept), mean, std,
                          config.l2, "fitted")

    if len(yte):
        if config.standardize == "independent":
            Zte, _, _, _ = _standardize(Xte_raw)
            Zte[:, dropped] = 0.0
        else:
            Zte = (Xte_raw - mean) / std
        p_test = sigmoid(Zte @ beta + intercept)
        test_acc = float(np.mean((p_test >= 0.5) == (yte == 1)))
        auc = roc_auc(yte, p_test)
    else:
        test_acc = float("nan")
        auc = float("nan")

    cv_acc = cross_validated_accuracy(X, y, config)

    report = FitReport(test_acc, cv_acc, auc, beta.copy(), np.exp(beta),
                       p_values, converged, iters, separation,
                       [FEATURE_NAMES[i] for i in dropped])
    return model, report


def cross_validated_accuracy(X: np.ndarray, y: np.ndarray,
                             config: FitConfig) -> float:
    """Stratified k-fold accuracy; each side standardized per config."""
    folds = stratified_folds(y, config.cv_folds, config.seed)
    accs = []
    for k in range(config.cv_folds):
        test_mask = folds == k
        Xtr_raw, ytr = X[~test_mask], y[~test_mask]
        Xte_raw, yte = X[test_mask], y[test_mask]
        if len(np.unique(ytr)) < 2 or len(yte) == 0:
            raise ModelError("fold without both classes; reduce cv_folds")
        Ztr, mean, std, dropped = _standardize(Xtr_raw)
        Ztr[:, dropped] = 0.0
        beta, intercept, _, _, _ = _newton_logistic(Ztr, ytr, config.l2,
                                                    config.max_iter)
        beta[dropped] = 0.0
        if config.standardize == "independent":
            Zte, _, _, _ = _standardize(Xte_raw)
            Zte[:, dropped] = 0.0
        else:
            Zte = (Xte_raw - mean) / std
        p = sigmoid(Zte @ beta + intercept)
        accs.append(np.mean((p >= 0.5) == (yte == 1)))
    return float(np.mean(accs))


def stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold id per row; each class spread evenly across folds, seeded."""
    if k < 2:
        raise ModelError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=int)
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = np.arange(len(idx)) % k
    return folds


# ---------------------------------------------------------------------------
# Lasso (L1) logistic for feature screening
# ---------------------------------------------------------------------------

def fit_lasso(X: np.ndarray, y: np.ndarray, l1: float = 1.0,
              max_iter: int = 100_000, tol: float = 1e-10) -> np.ndarray:
    """L1-penalized logistic coefficients via FISTA; exact zeros possible.

    Inputs are standardized internally; the intercept is unpenalized.
    Returns the coefficient vector on the standardized scale.
    """
    X = np.asarray(X, float)
    y = np.asarray(y, float).reshape(-1)
    Z, _, _, dropped = _standardize(X)
    Z[:, dropped] = 0.0
    n, p = Z.shape
    Zb = np.column_stack([Z, np.ones(n)])
    # Lipschitz bound of the logistic gradient: ||Z||^2 / 4
    L = np.linalg.norm(Zb, 2) ** 2 / 4.0
    w = np.zeros(p + 1)
    v = w.copy()
    t = 1.0
    for _ in range(max_iter):
        mu = sigmoid(Zb @ v)
        grad = -(Zb.T @ (y - mu))
        w_new = v - grad / L
        w_new[:p] = np.sign(w_new[:p]) * np.maximum(np.abs(w_new[:p]) - l1 / L, 0.0)
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        v = w_new + ((t - 1.0) / t_new) * (w_new - w)
        if np.max(np.abs(w_new - w)) < tol:
            w = w_new
            break
        w, t = w_new, t_new
    return w[:p]


# ---------------------------------------------------------------------------
# Selection statistics
# ---------------------------------------------------------------------------

def point_biserial(x: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Pearson r of a feature against 0/1 labels, with a t-test p-value."""
    x = np.asarray(x, float)
    labels = np.asarray(labels, float)
    if len(np.unique(labels)) < 2:
        raise ModelError("labels contain a single class")
    if np.ptp(x) == 0:
        raise ModelError("feature is constant; correlation undefined")
    r = _pearson(x, labels)
    n = len(x)
    r_clip = min(abs(r), 1.0 - 1e-15)
    t = r_clip * np.sqrt((n - 2) / (1.0 - r_clip ** 2))
    p = 2.0 * sstats.t.sf(t, df=n - 2)
    return float(r), float(p)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / denom)


def _ranks(x: np.ndarray) -> np.ndarray:
    """Average ranks (ties share the mean rank)."""
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_matrix(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise Spearman rho and p-values (t approximation)."""
    X = np.asarray(X, float)
    n, p = X.shape
    ranked = np.column_stack([_ranks(X[:, j]) for j in range(p)])
    rho = np.eye(p)
    pval = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            if np.ptp(X[:, i]) == 0 or np.ptp(X[:, j]) == 0:
                rho[i, j] = rho[j, i] = np.nan
                pval[i, j] = pval[j, i] = np.nan
                continue
            r = _pearson(ranked[:, i], ranked[:, j])
            rho[i, j] = rho[j, i] = r
            r_clip = min(abs(r), 1.0 - 1e-15)
            t = r_clip * np.sqrt((n - 2) / (1.0 - r_clip ** 2))
            pv = 2.0 * sstats.t.sf(t, df=n - 2)
            pval[i, j] = pval[j, i] = pv
    return rho, pval


def vif(X: np.ndarray) -> np.ndarray:
    """Variance inflation factors; exact collinearity reports as +inf."""
    X = np.asarray(X, float)
    n, p = X.shape
    if n <= p:
        raise ModelError("need more rows than features for VIF")
    Z = X - X.mean(axis=0)
    std = Z.std(axis=0)
    if np.any(std == 0):
        raise ModelError("constant feature; VIF undefined")
    Z = Z / std
    out = np.empty(p)
    for j in range(p):
        others = np.delete(Z, j, axis=1)
        coef, *_ = np.linalg.lstsq(others, Z[:, j], rcond=None)
        resid = Z[:, j] - others @ coef
        ss_res = float(resid @ resid)
        ss_tot = float(Z[:, j] @ Z[:, j])
        r2 = 1.0 - ss_res / ss_tot
        out[j] = np.inf if r2 >= 1.0 - 1e-12 else 1.0 / (1.0 - r2)
    return out


@dataclass
class SelectionReport:
    """The screening trail: correlations, collinearity, sparse fit."""

    point_biserial_r: np.ndarray
    point_biserial_p: np.ndarray
    spearman_rho: np.ndarray
    spearman_p: np.ndarray
    vif: np.ndarray
    lasso_beta: np.ndarray
    kept: list
    dropped: list


def feature_selection_report(X: np.ndarray, y: np.ndarray,
                             p_threshold: float = 0.05,
                             rho_threshold: float = 0.9,
                             vif_threshold: float = 5.0,
                             l1: float = 1.0) -> SelectionReport:
    """Run the screening pipeline and record every decision."""
    X = np.asarray(X, float)
    p = X.shape[1]
    r = np.zeros(p)
    pb_p = np.ones(p)
    for j in range(p):
        if np.ptp(X[:, j]) == 0:
            r[j], pb_p[j] = 0.0, 1.0
        else:
            r[j], pb_p[j] = point_biserial(X[:, j], y)
    rho, rho_p = spearman_matrix(X)
    vifs = np.full(p, np.nan)
    ok = [j for j in range(p) if np.ptp(X[:, j]) > 0]
    if len(ok) >= 2 and X.shape[0] > len(ok):
        vifs[ok] = vif(X[:, ok])
    lasso = fit_lasso(X, y, l1=l1, max_iter=20_000, tol=1e-8)

    dropped = []
    kept = list(range(p))
    for j in range(p):
        if pb_p[j] >= p_threshold:
            dropped.append((j, f"point-biserial p={pb_p[j]:.3f} >= {p_threshold}"))
    for i in range(p):
        for j in range(i + 1, p):
            if np.isfinite(rho[i, j]) and abs(rho[i, j]) > rho_threshold:
                weaker = i if abs(r[i]) < abs(r[j]) else j
                dropped.append((weaker, f"|spearman|={abs(rho[i, j]):.2f} with "
                                        f"feature {i if weaker == j else j}"))
    for j in range(p):
        if np.isfinite(vifs[j]) and vifs[j] > vif_threshold:
            dropped.append((j, f"VIF={vifs[j]:.1f} > {vif_threshold}"))
    dropped_idx = {j for j, _ in dropped}
    kept = [j for j in kept if j not in dropped_idx]
    return SelectionReport(r, pb_p, rho, rho_p, vifs, lasso, kept, dropped)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def roc_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    """Rank-statistic AUC; tied scores count half."""
    labels = np.asarray(labels, float)
    scores = np.asarray(scores, float)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ModelError("AUC needs both classes")
    ranks = _ranks(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(labels: np.ndarray, scores: np.ndarray, threshold: float = 0.5) -> float:
    labels = np.asarray(labels, float)
    return float(np.mean((np.asarray(scores) >= threshold) == (labels == 1)))


# ---------------------------------------------------------------------------
# Choice summaries
# ---------------------------------------------------------------------------

def preference_ratio_report(choices, targets) -> dict[tuple[str, str], dict]:
    """wins / appearances per (finger, stratum) cell over a choice dataset.

    `choices` iterates records with target_a, target_b and chosen in
    {"A", "B"}; `targets` maps target id -> TargetPoint.
    """
    cells: dict[tuple[str, str], dict] = {}

    def bump(target_id: str, won: bool):
        t = targets[target_id]
        cell = cells.setdefault((t.finger, t.stratum),
                                {"wins": 0, "appearances": 0, "ratio": None})
        cell["appearances"] += 1
        cell["wins"] += int(won)

    for c in choices:
        chosen = c.chosen if hasattr(c, "chosen") else c["chosen"]
        a = c.target_a if hasattr(c, "target_a") else c["target_a"]
        b = c.target_b if hasattr(c, "target_b") else c["target_b"]
        bump(a, chosen == "A")
        bump(b, chosen == "B")
    for cell in cells.values():
        cell["ratio"] = cell["wins"] / cell["appearances"]
    return cells
