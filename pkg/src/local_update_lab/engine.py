"""Round-based simulation of local update methods on quadratic populations.

One round: the server broadcasts x_t, each participating client runs K local
(proximal) gradient steps and returns the theta-weighted sum of the gradients
it computed, and the server feeds the averaged pseudo-gradient q_t to its own
first-order optimizer (plain gradient descent, heavy-ball, or Nesterov). In
expectation a round is one ServerOpt step on the surrogate loss, which the
deterministic full-participation mode realises exactly.

The server learning rate eta is fully decoupled from the client rate gamma;
the engine never multiplies the two. Client sampling and mini-batch draws use
per-(seed, round, client) child streams so trajectories are reproducible and
independent of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import quadratics as qw
from .errors import DivergenceError, InvalidInputError
from .matrices import eigh, keyed_rng
from .quadratics import ClientModel, Population, WeightScheme

DIVERGENCE_THRESHOLD = 1e12

SERVER_OPT_KINDS = ("plain", "nesterov", "heavy_ball")

# Stream-domain tags for child RNGs.
_DOMAIN_SAMPLING = 0x01
_DOMAIN_CLIENT = 0x02


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulation needs besides the population and x0.

    mode is "deterministic" (every client participates each round and local
    steps use full gradients; clients_per_round, if given, must equal the
    population size) or "stochastic" (clients_per_round clients are sampled
    without replacement each round, with replacement across rounds, and local
    steps use mini-batches of batch_size drawn without replacement from the
    client's example set).
    """

    alpha: float
    gamma: float
    theta: WeightScheme
    rounds: int
    seed: int = 0
    mode: str = "deterministic"
    clients_per_round: int | None = None
    batch_size: int | None = None

    def __post_init__(self):
        if self.alpha < 0.0 or self.gamma < 0.0:
            raise InvalidInputError("alpha and gamma must be nonnegative")
        if self.rounds < 1:
            raise InvalidInputError(f"rounds must be >= 1, got {self.rounds}")
        if self.mode not in ("deterministic", "stochastic"):
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        if self.mode == "stochastic":
            if self.clients_per_round is None or self.clients_per_round < 1:
                raise InvalidInputError("stochastic mode needs clients_per_round >= 1")
            if self.batch_size is None or self.batch_size < 1:
                raise InvalidInputError("stochastic mode needs batch_size >= 1")


@dataclass(frozen=True)
class ServerOptSpec:
    """Server optimizer: kind, step size eta, momentum beta.

    plain ignores momentum (normalised to 0). auto_tuned records that the
    hyperparameters came from auto_tune.
    """

    kind: str
    step: float
    momentum: float = 0.0
    auto_tuned: bool = False

    def __post_init__(self):
        if self.kind not in SERVER_OPT_KINDS:
            raise InvalidInputError(
                f"unknown server optimizer {self.kind!r}, expected one of {SERVER_OPT_KINDS}"
            )
        if self.step <= 0.0:
            raise InvalidInputError(f"step must be positive, got {self.step}")
        if self.kind == "plain" and self.momentum != 0.0:
            object.__setattr__(self, "momentum", 0.0)
        if not (0.0 <= self.momentum < 1.0):
            raise InvalidInputError(f"momentum must lie in [0, 1), got {self.momentum}")


@dataclass(frozen=True)
class OptState:
    """Per-run server state: the round counter and the momentum anchor."""

    round_index: int = 0
    anchor: np.ndarray | None = None  # previous iterate (heavy-ball) / previous main iterate (Nesterov)


@dataclass(frozen=True)
class Trajectory:
    """Iterates x_0..x_T and the pseudo-gradients q_0..q_{T-1} that drove them."""

    iterates: np.ndarray  # (T+1, d)
    pseudo_gradients: np.ndarray  # (T, d)

    def __post_init__(self):
        x = np.asarray(self.iterates, dtype=float)
        q = np.asarray(self.pseudo_gradients, dtype=float)
        if x.ndim != 2 or q.ndim != 2 or x.shape[0] != q.shape[0] + 1 or x.shape[1] != q.shape[1]:
            raise InvalidInputError(
                f"inconsistent trajectory shapes {x.shape} and {q.shape}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(q))):
            raise InvalidInputError("trajectory contains non-finite values")
        object.__setattr__(self, "iterates", x)
        object.__setattr__(self, "pseudo_gradients", q)

    @property
    def rounds(self) -> int:
        return self.pseudo_gradients.shape[0]


def _deterministic_client_update(
    client: ClientModel, x: np.ndarray, alpha: float, gamma: float, theta: WeightScheme
) -> np.ndarray:
    """K full-gradient local steps; returns sum_k theta_k g_k."""
    coeffs = theta.coefficients[: theta.size]
    a = client.a_matrix
    c = client.center
    xk = x.copy()
    total = np.zeros_like(x)
    for coeff in coeffs:
        g = a @ (xk - c) + alpha * (xk - x)
        if coeff != 0.0:
            total += coeff * g
        xk = xk - gamma * g
    return total


def _stochastic_client_updates(
    client: ClientModel,
    x: np.ndarray,
    alpha: float,
    gamma: float,
    theta: WeightScheme,
    batch_indices: np.ndarray,
) -> np.ndarray:
    """Mini-batch local updates for a whole batch of independent simulations.

    batch_indices has shape (n_sims, K, B): example indices per simulation and
    local step. Returns the (n_sims, d) stacked client messages. The single
    draw path and the Monte-Carlo path share this code, so they are the same
    algorithm by construction.
    """
    b_stack, c_stack = client.example_arrays()
    coeffs = theta.coefficients[: theta.size]
    n_sims, k_steps, batch = batch_indices.shape
    if k_steps != len(coeffs):
        raise InvalidInputError("batch_indices second axis must equal K(theta)")
    xk = np.broadcast_to(x, (n_sims, x.shape[0])).copy()
    total = np.zeros_like(xk)
    for k, coeff in enumerate(coeffs):
        idx = batch_indices[:, k, :]
        b_sel = b_stack[idx]  # (n_sims, B, d, d)
        c_sel = c_stack[idx]  # (n_sims, B, d)
        diff = xk[:, None, :] - c_sel
        g = np.einsum("sbij,sbj->si", b_sel, diff) / batch + alpha * (xk - x)
        if coeff != 0.0:
            total += coeff * g
        xk = xk - gamma * g
    return total


def _draw_batch_indices(
    rng: np.random.Generator, n_examples: int, n_sims: int, k_steps: int, batch: int
) -> np.ndarray:
    """Uniform batches without replacement within each batch."""
    keys = rng.random((n_sims, k_steps, n_examples))
    return np.argsort(keys, axis=-1)[..., :batch]


def client_update(
    client: ClientModel,
    x: np.ndarray,
    cfg: RunConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One client's message: sum_k theta_k g_k after K local steps from x.

    Deterministic mode returns exactly Q_i A_i (x - c_i) up to rounding;
    stochastic mode (requires an example set, B <= example count, and an rng)
    is an unbiased estimate of it.
    """
    x = np.asarray(x, dtype=float)
    if cfg.mode == "deterministic":
        return _deterministic_client_update(client, x, cfg.alpha, cfg.gamma, cfg.theta)
    if client.examples is None:
        raise InvalidInputError("stochastic client update needs a client with examples")
    n_examples = len(client.examples)
    if cfg.batch_size > n_examples:
        raise InvalidInputError(
            f"batch_size {cfg.batch_size} exceeds example count {n_examples}"
        )
    if rng is None:
        raise InvalidInputError("stochastic client update needs an rng")
    idx = _draw_batch_indices(rng, n_examples, 1, cfg.theta.size, cfg.batch_size)
    return _stochastic_client_updates(client, x, cfg.alpha, cfg.gamma, cfg.theta, idx)[0]


def client_update_mc_mean(
    client: ClientModel,
    x: np.ndarray,
    cfg: RunConfig,
    rng: np.random.Generator,
    n_draws: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo mean and componentwise standard error over n_draws updates.

    Vectorised over draws but algorithmically identical to client_update
    (shared local-step code path).
    """
    x = np.asarray(x, dtype=float)
    if client.examples is None:
        raise InvalidInputError("Monte-Carlo estimate needs a client with examples")
    idx = _draw_batch_indices(
        rng, len(client.examples), n_draws, cfg.theta.size, cfg.batch_size
    )
    updates = _stochastic_client_updates(client, x, cfg.alpha, cfg.gamma, cfg.theta, idx)
    mean = updates.mean(axis=0)
    if n_draws < 2:
        return mean, np.zeros_like(mean)
    stderr = updates.std(axis=0, ddof=1) / np.sqrt(n_draws)
    return mean, stderr


def client_update_maml(
    client: ClientModel,
    x: np.ndarray,
    k: int,
    gamma: float,
    alpha: float = 0.0,
) -> np.ndarray:
    """Meta-gradient of the K-step-adapted local loss (deterministic clients).

    Runs K (proximal) gradient steps from x, takes the local gradient at the
    adapted point, and back-propagates through the K steps, treating the
    proximal anchor as frozen. On quadratics this equals the client update
    under the theta_{2K+1} scheme: (I - gamma (A + alpha I))^{2K} A (x - c).
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if gamma < 0.0 or alpha < 0.0:
        raise InvalidInputError("alpha and gamma must be nonnegative")
    x = np.asarray(x, dtype=float)
    a = client.a_matrix
    c = client.center
    xk = x.copy()
    for _ in range(k):
        g = a @ (xk - c) + alpha * (xk - x)
        xk = xk - gamma * g
    v = a @ (xk - c) + alpha * (xk - x)
    step_jacobian = (1.0 - gamma * alpha) * np.eye(x.shape[0]) - gamma * a
    for _ in range(k):
        v = step_jacobian @ v
    return v


def auto_tune(opt_kind: str, l_tilde: float, mu_tilde: float) -> ServerOptSpec:
    """Classical optimal tuning for an (l_tilde, mu_tilde) quadratic.

    plain:      eta = 2 / (L + mu)
    heavy-ball: eta = 4 / (sqrt(L) + sqrt(mu))^2, beta = ((sqrt(k)-1)/(sqrt(k)+1))^2
    Nesterov:   eta = 4 / (3L + mu),             beta = (sqrt(3k+1)-2)/(sqrt(3k+1)+2)

    with k = L / mu.
    """
    if not (0.0 < mu_tilde <= l_tilde):
        raise InvalidInputError(
            f"need 0 < mu_tilde <= l_tilde, got mu_tilde={mu_tilde}, l_tilde={l_tilde}"
        )
    kappa = l_tilde / mu_tilde
    if opt_kind == "plain":
        return ServerOptSpec(kind="plain", step=2.0 / (l_tilde + mu_tilde), auto_tuned=True)
    if opt_kind == "heavy_ball":
        eta = 4.0 / (np.sqrt(l_tilde) + np.sqrt(mu_tilde)) ** 2
        beta = ((np.sqrt(kappa) - 1.0) / (np.sqrt(kappa) + 1.0)) ** 2
        return ServerOptSpec(kind="heavy_ball", step=float(eta), momentum=float(beta), auto_tuned=True)
    if opt_kind == "nesterov":
        eta = 4.0 / (3.0 * l_tilde + mu_tilde)
        root = np.sqrt(3.0 * kappa + 1.0)
        beta = (root - 2.0) / (root + 2.0)
        return ServerOptSpec(kind="nesterov", step=float(eta), momentum=float(beta), auto_tuned=True)
    raise InvalidInputError(f"unknown server optimizer {opt_kind!r}")


def auto_tune_for(
    pop: Population, alpha: float, gamma: float, theta: WeightScheme, opt_kind: str
) -> ServerOptSpec:
    """Auto-tune against the measured spectrum of the surrogate Hessian."""
    dec = eigh(qw.surrogate_hessian(pop, alpha, gamma, theta))
    return auto_tune(opt_kind, dec.lambda_max, dec.lambda_min)


def _apply_server_opt(
    opt: ServerOptSpec, x: np.ndarray, q: np.ndarray, state: OptState
) -> tuple[np.ndarray, OptState]:
    if opt.kind == "plain":
        return x - opt.step * q, replace(state, round_index=state.round_index + 1)
    anchor = state.anchor if state.anchor is not None else x
    if opt.kind == "heavy_ball":
        x_next = x - opt.step * q + opt.momentum * (x - anchor)
        return x_next, OptState(round_index=state.round_index + 1, anchor=x)
    # Nesterov: x is the lookahead point at which q was evaluated.
    xi = x - opt.step * q
    x_next = xi + opt.momentum * (xi - anchor)
    return x_next, OptState(round_index=state.round_index + 1, anchor=xi)


def server_round(
    pop: Population,
    x: np.ndarray,
    cfg: RunConfig,
    opt: ServerOptSpec,
    state: OptState | None = None,
) -> tuple[np.ndarray, OptState, np.ndarray]:
    """One communication round; returns (x_next, state, pseudo_gradient).

    In deterministic mode q_t is the population-weighted sum of client
    updates, i.e. the exact surrogate gradient at x. In stochastic mode a set
    of clients_per_round clients is sampled without replacement (with
    replacement across rounds) and q_t is their unweighted average; for
    non-uniform weights, without-replacement averages carry the usual
    finite-population deviation from the weighted mean. Aggregation sums in
    client-index order, so the result does not depend on scheduling.
    """
    if state is None:
        state = OptState()
    x = np.asarray(x, dtype=float)
    t = state.round_index
    if cfg.mode == "deterministic":
        if cfg.clients_per_round is not None and cfg.clients_per_round != pop.n_clients:
            raise InvalidInputError(
                "deterministic mode requires full participation "
                f"(clients_per_round={cfg.clients_per_round}, population={pop.n_clients})"
            )
        q = np.zeros_like(x)
        for weight, client in zip(pop.weights, pop.clients):
            q += weight * _deterministic_client_update(client, x, cfg.alpha, cfg.gamma, cfg.theta)
    else:
        if cfg.clients_per_round > pop.n_clients:
            raise InvalidInputError(
                f"clients_per_round {cfg.clients_per_round} exceeds population size {pop.n_clients}"
            )
        sample_rng = keyed_rng(cfg.seed, _DOMAIN_SAMPLING, t)
        chosen = sample_rng.choice(
            pop.n_clients, size=cfg.clients_per_round, replace=False, p=pop.weights
        )
        q = np.zeros_like(x)
        for index in sorted(int(i) for i in chosen):
            client_rng = keyed_rng(cfg.seed, _DOMAIN_CLIENT, t, index)
            q += client_update(pop.clients[index], x, cfg, client_rng)
        q /= cfg.clients_per_round
    x_next, state = _apply_server_opt(opt, x, q, state)
    return x_next, state, q


def run(
    pop: Population, x0: np.ndarray, cfg: RunConfig, opt: ServerOptSpec
) -> Trajectory:
    """Run cfg.rounds communication rounds from x0; deterministic given seed."""
    x = np.asarray(x0, dtype=float)
    if x.shape != (pop.dim,):
        raise InvalidInputError(f"x0 has shape {x.shape}, expected ({pop.dim},)")
    iterates = [x]
    gradients = []
    state = OptState()
    for t in range(cfg.rounds):
        x, state, q = server_round(pop, x, cfg, opt, state)
        norm = float(np.linalg.norm(x))
        if not np.isfinite(norm) or norm > DIVERGENCE_THRESHOLD:
            raise DivergenceError(round_index=t, norm=norm)
        iterates.append(x)
        gradients.append(q)
    return Trajectory(iterates=np.array(iterates), pseudo_gradients=np.array(gradients))


def max_step_contraction(
    traj: Trajectory, x_star: np.ndarray, start_round: int = 5, floor: float | None = None
) -> float:
    """max over t >= start_round of ||x_{t+1} - x*|| / ||x_t - x*||.

    Ratios are only counted while the error is meaningfully above the
    floating-point floor; once iterates sit at rounding-level distance from
    x*, per-step ratios carry no information. Returns 0.0 if no ratio is
    measurable (e.g. started at x*).
    """
    x_star = np.asarray(x_star, dtype=float)
    errors = np.linalg.norm(traj.iterates - x_star, axis=1)
    if floor is None:
        floor = 1e-12 * (1.0 + float(np.linalg.norm(x_star)))
    best = 0.0
    for t in range(start_round, len(errors) - 1):
        if errors[t] <= floor or errors[t + 1] <= floor:
            continue
        best = max(best, errors[t + 1] / errors[t])
    return best


def geometric_rate(
    traj: Trajectory, x_star: np.ndarray, start_round: int = 5, floor: float | None = None
) -> float:
    """Geometric-mean contraction (||x_T - x*|| / ||x_s - x*||)^(1/(T-s)).

    T is pulled in to the last round where the error still clears the
    rounding floor. Returns 0.0 when the start error is already at the floor.
    """
    x_star = np.asarray(x_star, dtype=float)
    errors = np.linalg.norm(traj.iterates - x_star, axis=1)
    if floor is None:
        floor = 1e-12 * (1.0 + float(np.linalg.norm(x_star)))
    if start_round >= len(errors) - 1 or errors[start_round] <= floor:
        return 0.0
    last = len(errors) - 1
    while last > start_round and errors[last] <= floor:
        last -= 1
    if last <= start_round:
        return 0.0
    return float((errors[last] / errors[start_round]) ** (1.0 / (last - start_round)))


def export_trajectory_csv(
    traj: Trajectory,
    pop: Population,
    alpha: float,
    gamma: float,
    theta: WeightScheme,
) -> str:
    """Trajectory CSV: round, iterate components, distances to both optima."""
    x_surrogate = qw.surrogate_minimizer(pop, alpha, gamma, theta)
    x_empirical = qw.empirical_minimizer(pop)
    d = pop.dim
    header = (
        "round,"
        + ",".join(f"comp_{j}" for j in range(d))
        + ",dist_to_surrogate_opt,dist_to_empirical_opt"
    )
    lines = [header]
    for t, x in enumerate(traj.iterates):
        comps = ",".join(format(v, ".17g") for v in x)
        d_surr = format(float(np.linalg.norm(x - x_surrogate)), ".17g")
        d_emp = format(float(np.linalg.norm(x - x_empirical)), ".17g")
        lines.append(f"{t},{comps},{d_surr},{d_emp}")
    return "\n".join(lines) + "\n"
