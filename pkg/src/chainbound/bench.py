"""Random benchmark instances: birth-process chains with trained models.

Instances use m=5 features on [-1,1]^5 and discount 0.97.  Training data is
Gaussian (X ~ N(0,1), beta ~ N(0,1)); regression targets are X beta + noise
and classification targets are Bernoulli(sigmoid(X beta)).  A regression
model drives the rewards (r_0 = output, r_i = output/(i+1)); classifiers
drive the initial distribution (pi_0 = output, pi_1 = remainder) and the
modeled transition rows (stay probability = output, remainder moves to the
next state).  Unmodeled transient rows are uniform and the last state is
absorbing.

Everything is seeded through numpy's PCG64 generator, so instance files
reproduce byte-for-byte for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .markov import (
    FeatureSet,
    MarkovProcessSpec,
    ParameterLink,
    PropertyQuery,
    QueryKind,
    QuerySense,
)
from .models import LEAF, ModelArtifact, TreeNode, sigmoid
from .verifier import VerifyConfig, ablation_run

M_FEATURES = 5
DISCOUNT = 0.97


# --------------------------------------------------------------------------
# Tiny trainers (no ML framework dependency)
# --------------------------------------------------------------------------


def fit_linear(X: np.ndarray, y: np.ndarray) -> ModelArtifact:
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(Xb, y, rcond=None)
    return ModelArtifact("LinearRegression", 1, W=[coef[:-1]], b=[coef[-1]])


def fit_logistic(X: np.ndarray, y: np.ndarray, iters: int = 25) -> ModelArtifact:
    """Newton/IRLS with a small ridge term for stability."""
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    beta = np.zeros(Xb.shape[1])
    for _ in range(iters):
        p = sigmoid(Xb @ beta)
        w = np.maximum(p * (1.0 - p), 1e-6)
        H = Xb.T @ (Xb * w[:, None]) + 1e-6 * np.eye(Xb.shape[1])
        step = np.linalg.solve(H, Xb.T @ (y - p))
        beta += step
        if np.max(np.abs(step)) < 1e-10:
            break
    return ModelArtifact("LogisticRegression", 1, W=[beta[:-1]], b=[beta[-1]])


def fit_tree(X: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int = 5) -> ModelArtifact:
    """Depth-limited CART regressor (variance-reduction splits).  Trained
    on 0/1 targets the leaf means act as class probabilities."""
    nodes: list[TreeNode] = []

    def best_split(idx):
        ysub = y[idx]
        n = idx.size
        base = float(((ysub - ysub.mean()) ** 2).sum())
        best = (base - 1e-12, None, None)
        for f in range(X.shape[1]):
            order = idx[np.argsort(X[idx, f], kind="stable")]
            xv = X[order, f]
            ys = y[order]
            csum = np.cumsum(ys)
            csq = np.cumsum(ys**2)
            total, total_sq = csum[-1], csq[-1]
            for cut in range(min_leaf, n - min_leaf + 1):
                if cut < n and xv[cut - 1] == xv[cut]:
                    continue
                left_sse = csq[cut - 1] - csum[cut - 1] ** 2 / cut
                rn = n - cut
                rsum = total - csum[cut - 1]
                right_sse = (total_sq - csq[cut - 1]) - rsum**2 / rn
                sse = float(left_sse + right_sse)
                if sse < best[0]:
                    thr = 0.5 * (xv[cut - 1] + xv[cut])
                    best = (sse, f, thr)
        return best[1], best[2]

    def build(idx, depth) -> int:
        me = len(nodes)
        nodes.append(None)  # patched below
        if depth >= max_depth or idx.size < 2 * min_leaf:
            nodes[me] = TreeNode(LEAF, 0.0, LEAF, LEAF, (float(y[idx].mean()),))
            return me
        f, thr = best_split(idx)
        if f is None:
            nodes[me] = TreeNode(LEAF, 0.0, LEAF, LEAF, (float(y[idx].mean()),))
            return me
        mask = X[idx, f] <= thr
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        nodes[me] = TreeNode(f, float(thr), left, right)
        return me

    build(np.arange(X.shape[0]), 0)
    return ModelArtifact("DecisionTree", 1, nodes=nodes)


def _train(kind: str, rng: np.random.Generator, n_train: int, classification: bool,
           tree_depth: int, m: int) -> ModelArtifact:
    X = rng.normal(size=(n_train, m))
    beta = rng.normal(size=m)
    if classification:
        y = (rng.uniform(size=n_train) < sigmoid(X @ beta)).astype(float)
    else:
        y = X @ beta + rng.normal(size=n_train)
    if kind == "linear":
        return fit_linear(X, y)
    if kind == "logistic":
        return fit_logistic(X, y)
    if kind == "tree":
        return fit_tree(X, y, tree_depth)
    raise ValueError(f"unknown model kind {kind!r}")


# --------------------------------------------------------------------------
# Instance generation
# --------------------------------------------------------------------------


@dataclass
class BenchConfig:
    n_states: int = 5
    prob_model: str = "logistic"   # classifier kind for pi and P rows
    reward_model: str = "linear"   # regression kind for r
    tree_depth: int = 4
    n_p_rows: int = 1              # modeled transition rows
    n_train: int = 10_000
    sense: QuerySense = QuerySense.MAX
    m_features: int = M_FEATURES
    discount: float = DISCOUNT


def generate_instance(cfg: BenchConfig, seed: int) -> MarkovProcessSpec:
    rng = np.random.default_rng(seed)
    n = cfg.n_states
    m = cfg.m_features
    k = min(cfg.n_p_rows, n - 1)

    reward = _train(cfg.reward_model, rng, cfg.n_train, False, cfg.tree_depth, m)
    pi_clf = _train(cfg.prob_model, rng, cfg.n_train, True, cfg.tree_depth, m)
    row_clfs = [
        _train(cfg.prob_model, rng, cfg.n_train, True, cfg.tree_depth, m)
        for _ in range(k)
    ]
    models = [reward, pi_clf] + row_clfs
    ell = len(models)  # all models have arity 1

    A_r = np.zeros((n, ell))
    for i in range(n):
        A_r[i, 0] = 1.0 / (i + 1)
    b_r = np.zeros(n)

    A_pi = np.zeros((n, ell))
    b_pi = np.zeros(n)
    A_pi[0, 1] = 1.0
    A_pi[1, 1] = -1.0
    b_pi[1] = 1.0

    A_P = np.zeros((n * n, ell))
    b_P = np.zeros(n * n)
    for i in range(n - 1):
        if i < k:
            A_P[i * n + i, 2 + i] = 1.0        # stay probability
            A_P[i * n + i + 1, 2 + i] = -1.0   # remainder moves on
            b_P[i * n + i + 1] = 1.0
        else:
            b_P[i * n : (i + 1) * n] = 1.0 / n  # uniform row
    b_P[(n - 1) * n + (n - 1)] = 1.0            # absorbing last state

    return MarkovProcessSpec(
        n_states=n,
        m_features=m,
        query=PropertyQuery(QueryKind.TOTAL_REWARD, cfg.sense),
        feature_set=FeatureSet.single_box([-1.0] * m, [1.0] * m),
        links={
            "pi": ParameterLink("pi", A_pi, b_pi),
            "P": ParameterLink("P", A_P, b_P),
            "r": ParameterLink("r", A_r, b_r),
        },
        models=models,
        discount=cfg.discount,
        absorbing_states=(n - 1,),
    )


# --------------------------------------------------------------------------
# Ablation comparison
# --------------------------------------------------------------------------


@dataclass
class BenchRow:
    seed: int
    variant: str
    status: str
    value: float | None
    runtime: float
    n_nodes: int


def run_comparison(
    specs: dict[int, MarkovProcessSpec],
    variants: dict[str, frozenset],
    config: VerifyConfig | None = None,
) -> list[BenchRow]:
    """Verify each instance under each ablation variant; timed-out runs
    keep their per-instance time limit as the recorded runtime."""
    config = config or VerifyConfig()
    rows = []
    for seed, spec in sorted(specs.items()):
        for name, disabled in variants.items():
            res = ablation_run(spec, disabled, config)
            rows.append(
                BenchRow(seed, name, res.status, res.value, res.runtime, res.n_nodes)
            )
    return rows


def geometric_mean(values) -> float:
    values = np.asarray(list(values), dtype=float)
    return float(np.exp(np.log(np.maximum(values, 1e-12)).mean()))


def format_table(rows: list[BenchRow]) -> str:
    lines = [f"{'seed':>6} {'variant':>12} {'status':>10} {'value':>16} {'sec':>9} {'nodes':>7}"]
    for r in rows:
        val = "-" if r.value is None else f"{r.value:.6f}"
        lines.append(
            f"{r.seed:>6} {r.variant:>12} {r.status:>10} {val:>16} {r.runtime:>9.3f} {r.n_nodes:>7}"
        )
    variants = sorted({r.variant for r in rows})
    lines.append("")
    for v in variants:
        runtimes = [r.runtime for r in rows if r.variant == v]
        solved = sum(1 for r in rows if r.variant == v and r.status in ("optimal", "feasible"))
        lines.append(
            f"{v}: geometric-mean runtime {geometric_mean(runtimes):.3f}s, "
            f"solved {solved}/{len(runtimes)}"
        )
    return "\n".join(lines)
