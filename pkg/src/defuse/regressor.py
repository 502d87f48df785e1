"""Two-stage deconfounded sparse regression.

Stage one fits a sparsity-constrained linear regression of the response on
the residual features alone, tuning the active-coefficient budget on a
validation split. Stage two trains the ReLU network jointly with the
surviving linear coefficients under a group penalty on first-layer input
columns, escalates the penalty weight over a small grid, keeps the best
validation checkpoint, and finally tunes the number of unmasked inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch
from .network import Adam, NetworkParams, _forward, init_params, loss_and_grads, predict

_TAG_SPLIT = 10
_TAG_INIT = 11
_TAG_BATCH = 12

# Exhaustive best-subset search is exact up to this many candidate columns;
# beyond it, iterative hard thresholding takes over.
_ENUMERATION_LIMIT = 12


def default_epoch_grid() -> tuple:
    return tuple(range(250, 4001, 250))


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one regression fit.

    ``epoch_grid`` holds the checkpoints at which the validation error is
    measured (the best checkpoint wins); ``patience`` stops a penalty stage
    after that many consecutive checkpoints without improvement (0 disables
    early stopping). ``batch_size`` of None means full batch up to 1024
    training rows and 256 afterwards. ``norm_cap`` optionally projects the
    whole parameter vector onto a Euclidean ball after each step.
    """

    hidden_width: int = 50
    hidden_layers: int = 1
    learning_rate: float = 0.1
    epoch_grid: tuple = field(default_factory=default_epoch_grid)
    lambda_grid: tuple = (0.0001, 0.001, 0.05)
    tau: float = 0.05
    val_fraction: float = 0.1
    norm_cap: float | None = None
    batch_size: int | None = None
    patience: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.hidden_width < 1 or self.hidden_layers < 1:
            raise ValueError("network needs at least one hidden layer and neuron")
        if self.learning_rate <= 0 or self.tau <= 0:
            raise ValueError("learning_rate and tau must be positive")
        if not (0.0 < self.val_fraction <= 0.5):
            raise ValueError("val_fraction must lie in (0, 0.5]")
        if not self.epoch_grid or any(e <= 0 for e in self.epoch_grid):
            raise ValueError("epoch_grid must contain positive epoch counts")
        if not self.lambda_grid or any(l < 0 for l in self.lambda_grid):
            raise ValueError("lambda_grid must contain nonnegative weights")
        if self.patience < 0:
            raise ValueError("patience must be nonnegative")
        object.__setattr__(self, "epoch_grid", tuple(sorted(self.epoch_grid)))
        object.__setattr__(self, "lambda_grid", tuple(self.lambda_grid))

    def resolve_batch(self, n_train: int) -> int:
        if self.batch_size is not None:
            return max(1, min(self.batch_size, n_train))
        return n_train if n_train <= 1024 else 256


@dataclass(frozen=True)
class FitResult:
    """A trained regressor plus the support sets and tuning choices."""

    params: NetworkParams
    selected_parents: frozenset
    selected_beta_support: frozenset
    train_mse: float
    val_mse: float
    kappa_used: int
    sigma_used: int
    lambda_trace: tuple

    def to_json_dict(self, include_weights: bool = False) -> dict:
        return {
            "selected_parents": sorted(self.selected_parents),
            "beta_support": sorted(self.selected_beta_support),
            "kappa": self.kappa_used,
            "sigma": self.sigma_used,
            "train_mse": self.train_mse,
            "val_mse": self.val_mse,
            "lambda_trace": list(self.lambda_trace),
            "model": self.params.to_json_dict(include_weights=include_weights),
        }


def split_indices(n: int, config: TrainConfig) -> tuple:
    """Deterministic train/validation split: seeded shuffle, last slice validates."""
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.rng_seed, _TAG_SPLIT])))
    perm = gen.permutation(n)
    n_val = max(1, int(round(n * config.val_fraction)))
    n_val = min(n_val, n - 1)
    return perm[: n - n_val], perm[n - n_val :]


def _solve_subset(gram, xty, support):
    """Least-squares coefficients on a support, via the Gram system."""
    if not support:
        return np.zeros(0)
    idx = np.asarray(support)
    g = gram[np.ix_(idx, idx)]
    c = xty[idx]
    try:
        return np.linalg.solve(g, c)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(g, c, rcond=None)[0]


def _subset_sse(yty, xty, support, coefs):
    if len(coefs) == 0:
        return yty
    return yty - float(xty[np.asarray(support)] @ coefs)


def _best_subset_exact(gram, xty, yty, k, m):
    best_sse, best_support = yty, ()
    for support in combinations(range(m), k):
        coefs = _solve_subset(gram, xty, support)
        sse = _subset_sse(yty, xty, support, coefs)
        if sse < best_sse - 1e-12:
            best_sse, best_support = sse, support
    return list(best_support)

def _best_subset_iht(gram, xty, yty, k, m, lip, max_iter=100):
    """Projected gradient on the Gram system with per-iteration refit."""
    beta = np.zeros(m)
    support = ()
    for _ in range(max_iter):
        grad = gram @ beta - xty
        candidate = beta - grad / lip
        keep = np.argsort(-np.abs(candidate), kind="stable")[:k]
        new_support = tuple(sorted(int(i) for i in keep))
        beta = np.zeros(m)
        beta[list(new_support)] = _solve_subset(gram, xty, new_support)
        if new_support == support:
            break
        support = new_support
    return list(support)


def fit_beta_stage(y, xi_hat, config: TrainConfig):
    """Sparse linear fit of the response on the residual features.

    For every active-coefficient budget from zero to the column count, the
    best support of that size is found on standardized training columns
    (exact enumeration for small designs, hard thresholding otherwise),
    refit on the raw columns with an intercept, and scored on the
    validation split. Returns the winning coefficient vector, the support
    of coefficients at or above the signal threshold, and the chosen budget.
    An empty design returns an empty coefficient vector without error.
    """
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi_hat, dtype=float)
    if xi.ndim != 2 or y.ndim != 1 or xi.shape[0] != y.size:
        raise ShapeMismatch("response and residual matrix rows must align")
    n, m = xi.shape
    if m == 0:
        return np.zeros(0), frozenset(), 0

    train_idx, val_idx = split_indices(n, config)
    x_tr, y_tr = xi[train_idx], y[train_idx]
    x_va, y_va = xi[val_idx], y[val_idx]

    mu = x_tr.mean(axis=0)
    sd = x_tr.std(axis=0)
    usable = np.nonzero(sd > 0.0)[0]
    xs = (x_tr[:, usable] - mu[usable]) / sd[usable]
    yc = y_tr - y_tr.mean()

    m_use = usable.size
    gram = xs.T @ xs
    xty = xs.T @ yc
    yty = float(yc @ yc)
    lip = float(np.linalg.eigvalsh(gram)[-1]) if m_use else 1.0
    lip = max(lip, 1e-12)

    best = None  # (val_mse, sigma, beta, intercept)
    for sigma in range(m + 1):
        k = min(sigma, m_use)
        if m_use <= _ENUMERATION_LIMIT:
            support_std = _best_subset_exact(gram, xty, yty, k, m_use)
        else:
            support_std = _best_subset_iht(gram, xty, yty, k, m_use, lip)
        support = [int(usable[i]) for i in support_std]
        # Refit on raw training columns with an intercept (the unpenalized
        # analogue of the network's output bias).
        design = np.column_stack([np.ones(len(train_idx)), x_tr[:, support]])
        coefs, *_ = np.linalg.lstsq(design, y_tr, rcond=None)
        beta = np.zeros(m)
        beta[support] = coefs[1:]
        pred_va = coefs[0] + x_va[:, support] @ coefs[1:]
        val_mse = float(np.mean((y_va - pred_va) ** 2))
        if best is None or val_mse < best[0]:
            best = (val_mse, sigma, beta, float(coefs[0]))
        if k == m_use and sigma >= m_use:
            break  # larger budgets cannot change the fit

    _, sigma_used, beta, _ = best
    support_b = frozenset(int(k) for k in np.nonzero(np.abs(beta) >= config.tau)[0])
    return beta, support_b, sigma_used


def _intercept_only_fit(y, config: TrainConfig, n_resid: int = 0) -> FitResult:
    y = np.asarray(y, dtype=float)
    n = y.size
    train_idx, val_idx = split_indices(n, config)
    mean = float(y.mean())
    params = NetworkParams(
        weights=[np.zeros((config.hidden_width, 0))]
        + [np.zeros((config.hidden_width, config.hidden_width)) for _ in range(config.hidden_layers - 1)]
        + [np.zeros((1, config.hidden_width))],
        biases=[np.zeros(config.hidden_width) for _ in range(config.hidden_layers)] + [np.array([mean])],
        beta=np.zeros(n_resid),
    )
    return FitResult(
        params=params,
        selected_parents=frozenset(),
        selected_beta_support=frozenset(),
        train_mse=float(np.mean((y[train_idx] - mean) ** 2)),
        val_mse=float(np.mean((y[val_idx] - mean) ** 2)),
        kappa_used=0,
        sigma_used=0,
        lambda_trace=(),
    )


class _Diverged(Exception):
    pass


def _train_network(y, x, xi, support_b, config: TrainConfig):
    n, m = x.shape
    train_idx, val_idx = split_indices(n, config)
    x_tr, xi_tr, y_tr = x[train_idx], xi[train_idx], y[train_idx]
    x_va, xi_va, y_va = x[val_idx], xi[val_idx], y[val_idx]
    n_tr = len(train_idx)

    usable = x_tr.std(axis=0) > 0.0  # constant columns are never selectable
    beta_mask = np.zeros(m, dtype=bool)
    beta_mask[sorted(support_b)] = True

    # Warm-start the linear block and output bias from a least-squares fit
    # of the response on the supported residual features.
    design = np.column_stack([np.ones(n_tr), xi_tr[:, beta_mask]])
    coefs, *_ = np.linalg.lstsq(design, y_tr, rcond=None)
    beta0 = np.zeros(m)
    beta0[beta_mask] = coefs[1:]

    init_gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.rng_seed, _TAG_INIT])))
    params = init_params(
        m, m, config.hidden_width, config.hidden_layers, init_gen, out_bias=float(coefs[0]), beta=beta0
    )
    params.weights[0][:, ~usable] = 0.0

    batch = config.resolve_batch(n_tr)
    batch_gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.rng_seed, _TAG_BATCH])))
    grid = config.epoch_grid
    max_epochs = grid[-1]
    grid_set = set(grid)

    best_val = np.inf
    best_params = params.copy()
    trace = []
    for lam in config.lambda_grid:
        trace.append(lam)
        params = best_params.copy()
        adam = Adam(params.tensors(), lr=config.learning_rate)
        stale = 0
        for epoch in range(1, max_epochs + 1):
            if batch >= n_tr:
                loss, grads = loss_and_grads(
                    params, x_tr, xi_tr, y_tr, lam=lam, tau=config.tau,
                    beta_mask=beta_mask, input_mask=usable,
                )
                adam.step(params.tensors(), grads)
            else:
                order = batch_gen.permutation(n_tr)
                for start in range(0, n_tr, batch):
                    rows = order[start : start + batch]
                    loss, grads = loss_and_grads(
                        params, x_tr[rows], xi_tr[rows], y_tr[rows], lam=lam, tau=config.tau,
                        beta_mask=beta_mask, input_mask=usable,
                    )
                    adam.step(params.tensors(), grads)
            if config.norm_cap is not None:
                nrm = params.theta_norm()
                if nrm > config.norm_cap:
                    params.scale_in_place(config.norm_cap / nrm)
            if epoch in grid_set:
                val_pred = _forward(params, x_va, xi_va)[0]
                val_mse = float(np.mean((y_va - val_pred) ** 2))
                if not np.isfinite(val_mse):
                    raise _Diverged
                if val_mse < best_val:
                    best_val = val_mse
                    best_params = params.copy()
                    stale = 0
                else:
                    stale += 1
                    if config.patience and stale >= config.patience:
                        break
    return best_params, (x_tr, xi_tr, y_tr, x_va, xi_va, y_va), usable, trace


def fit_network_stage(y, x, xi_hat, support_b, config: TrainConfig, sigma_used: int | None = None) -> FitResult:
    """Train the penalized network jointly with the supported linear block.

    After the penalty-escalation schedule selects the best validation
    checkpoint, every input-budget kappa from zero to the column count is
    scored by masking all but the top-kappa first-layer columns (ranked by
    column norm) and re-measuring the validation error; the smallest budget
    among ties wins. Selected parents are the surviving unmasked columns
    whose norm clears the signal threshold. Divergent training is retried
    once at a tenth of the learning rate before raising NonFiniteLoss.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi_hat, dtype=float)
    if x.ndim != 2 or xi.ndim != 2:
        raise ShapeMismatch("designs must be 2-d")
    if x.shape != xi.shape:
        raise ShapeMismatch(f"raw and residual blocks must align, got {x.shape} vs {xi.shape}")
    if y.ndim != 1 or y.size != x.shape[0]:
        raise ShapeMismatch("response length must match design rows")
    n, m = x.shape
    if m == 0:
        return _intercept_only_fit(y, config)
    if sigma_used is None:
        sigma_used = len(support_b)

    try:
        best_params, splits, usable, trace = _train_network(y, x, xi, support_b, config)
    except _Diverged:
        retry = replace(config, learning_rate=config.learning_rate / 10.0)
        try:
            best_params, splits, usable, trace = _train_network(y, x, xi, support_b, retry)
        except _Diverged as exc:
            raise NonFiniteLoss("training diverged even after reducing the learning rate") from exc
    x_tr, xi_tr, y_tr, x_va, xi_va, y_va = splits

    norms = best_params.column_norms()
    rank = np.lexsort((np.arange(m), -norms))  # by norm desc, index asc on ties
    rank = [int(i) for i in rank if usable[i]]

    best_kappa, best_val, final = 0, np.inf, None
    for kappa in range(len(rank) + 1):
        masked = best_params.masked(rank[:kappa])
        pred = predict(masked, x_va, xi_va)
        val_mse = float(np.mean((y_va - pred) ** 2))
        if val_mse < best_val:
            best_kappa, best_val, final = kappa, val_mse, masked

    selected = frozenset(k for k in rank[:best_kappa] if norms[k] >= config.tau)
    train_mse = float(np.mean((y_tr - predict(final, x_tr, xi_tr)) ** 2))
    return FitResult(
        params=final,
        selected_parents=selected,
        selected_beta_support=frozenset(int(k) for k in support_b),
        train_mse=train_mse,
        val_mse=best_val,
        kappa_used=best_kappa,
        sigma_used=int(sigma_used),
        lambda_trace=tuple(trace),
    )


def fit_node(y, x, xi_hat, config: TrainConfig) -> FitResult:
    """Run both stages for one response: tune the linear support, then the network."""
    beta, support_b, sigma_used = fit_beta_stage(y, xi_hat, config)
    return fit_network_stage(y, x, xi_hat, support_b, config, sigma_used=sigma_used)
