"""Gradient-based discrete samplers with replica exchange.

Single chains: DULA (no Metropolis correction) and DMALA (with correction).
Replica pairs: DREXEL/DREAM exchange states between a low- and a
high-temperature chain; the b-prefixed variants use the bias-corrected swap.

Each chain proposes every coordinate independently from a categorical whose
logit at candidate value v is

    grad_d / (2 tau) * (v - x_d)  -  (v - x_d)^2 / (2 alpha),

normalized by an overflow-safe softmax.  The quadratic penalty is not divided
by the temperature; a tempered-penalty parameterization is recovered by
substituting alpha' = alpha * tau.
"""

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .domains import BINARY01, SPIN_PM1, DomainSpec, embed
from .energies import EnergyModel, energy_value
from .errors import DomainError, NumericError
from .rng import SALT_HIGH, SALT_LOW, SALT_SWAP, substream

DULA = "dula"
DMALA = "dmala"
DREXEL = "drexel"
DREAM = "dream"
BDREXEL = "bdrexel"
BDREAM = "bdream"

SINGLE_CHAIN_SAMPLERS = (DULA, DMALA)
REPLICA_SAMPLERS = (DREXEL, DREAM, BDREXEL, BDREAM)

NAIVE = "naive"
BIAS_CORRECTED = "bias_corrected"
HISTORY = "history"


@dataclass(frozen=True)
class ChainParams:
    """Step size and temperature of one chain, plus its Metropolis switch."""

    alpha: float
    tau: float = 1.0
    mh_enabled: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"step size alpha must be positive, got {self.alpha}")
        if not self.tau > 0:
            raise DomainError(f"temperature tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class SwapConfig:
    """Swap variant and intensity rho; sigma2 only enters the bias-corrected swap."""

    variant: str = HISTORY
    rho: float = 1.0
    sigma2: float = 0.0

    def __post_init__(self):
        if self.variant not in (NAIVE, BIAS_CORRECTED, HISTORY):
            raise DomainError(f"unknown swap variant {self.variant!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError(f"swap intensity rho must be in [0, 1], got {self.rho}")
        if self.sigma2 < 0:
            raise DomainError(f"sigma2 must be nonnegative, got {self.sigma2}")


@dataclass(frozen=True)
class StepOutcome:
    """Result of one chain step: retained state plus proposal bookkeeping."""

    state: np.ndarray
    proposal: np.ndarray
    forward_logq: float
    reverse_logq: float
    accepted: bool
    energy: float  # U at the retained state
    proposal_energy: float


def proposal_logits(model: EnergyModel, state: np.ndarray, params: ChainParams, coord: int) -> np.ndarray:
    """Unnormalized log proposal weights for one coordinate's value set."""
    domain = model.domain
    if not 0 <= coord < domain.dim:
        raise DomainError(f"coordinate {coord} out of range for dim {domain.dim}")
    x = embed(state, domain)
    g = model.gradient(x)
    diff = domain.value_table - x[coord]
    return g[coord] / (2.0 * params.tau) * diff - diff**2 / (2.0 * params.alpha)


def _all_logits(model, state, params):
    """(dim, levels) logit matrix; row d is proposal_logits for coordinate d."""
    x = model.domain.value_table[state]
    g = model.gradient(x)
    diff = model.domain.value_table[None, :] - x[:, None]
    return g[:, None] / (2.0 * params.tau) * diff - diff**2 / (2.0 * params.alpha)


def _log_softmax(logits):
    m = logits.max(axis=1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def dls_step(model: EnergyModel, state: np.ndarray, params: ChainParams, rng: np.random.Generator) -> StepOutcome:
    """Draw all coordinates from their categoricals (no accept/reject here).

    The reverse log-proposal needs the gradient at the proposal, so it is only
    computed when the chain has its Metropolis correction enabled; a chain
    without it spends exactly one gradient evaluation per iteration.
    """
    state = model.domain.validate_state(state)
    logp = _log_softmax(_all_logits(model, state, params))
    cum = np.exp(logp).cumsum(axis=1)
    cum /= cum[:, -1:]  # exact 1.0 in the last column; draws in [0,1) stay in range
    u = rng.random(state.shape[0])
    prop = (cum < u[:, None]).sum(axis=1).astype(np.int64)
    rows = np.arange(state.shape[0])
    forward_logq = float(logp[rows, prop].sum())
    if params.mh_enabled:
        rev_logp = _log_softmax(_all_logits(model, prop, params))
        reverse_logq = float(rev_logp[rows, state].sum())
    else:
        reverse_logq = float("nan")
    prop_energy = energy_value(model, prop)
    return StepOutcome(
        state=prop,
        proposal=prop,
        forward_logq=forward_logq,
        reverse_logq=reverse_logq,
        accepted=True,
        energy=prop_energy,
        proposal_energy=prop_energy,
    )


def binary_flip_probs(model: EnergyModel, state: np.ndarray, params: ChainParams) -> np.ndarray:
    """Closed-form per-coordinate flip probabilities for two-level domains."""
    domain = model.domain
    if domain.kind not in (BINARY01, SPIN_PM1):
        raise DomainError(f"binary_flip_probs needs a two-level domain, got {domain.kind}")
    state = domain.validate_state(state)
    x = domain.value_table[state]
    other = domain.value_table[1 - state]
    g = model.gradient(x)
    diff = other - x
    logit = g / (2.0 * params.tau) * diff - diff**2 / (2.0 * params.alpha)
    # two-category softmax against the zero stay-logit is a sigmoid
    out = np.empty_like(logit)
    pos = logit >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-logit[pos]))
    e = np.exp(logit[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def mh_accept(
    model: EnergyModel,
    params: ChainParams,
    outcome: StepOutcome,
    current: np.ndarray,
    rng: np.random.Generator,
    current_energy: Optional[float] = None,
) -> bool:
    """Metropolis decision for a dls_step proposal against pi^(1/tau)."""
    if np.isnan(outcome.reverse_logq):
        raise DomainError("outcome has no reverse log-proposal; run dls_step with mh_enabled params")
    if current_energy is None:
        current_energy = energy_value(model, current)
    if not np.isfinite(outcome.proposal_energy):
        raise NumericError(f"proposal energy not finite: {outcome.proposal_energy}")
    log_a = (outcome.proposal_energy - current_energy) / params.tau + outcome.reverse_logq - outcome.forward_logq
    return rng.random() < np.exp(min(0.0, log_a))


def chain_step(
    model: EnergyModel,
    state: np.ndarray,
    params: ChainParams,
    rng: np.random.Generator,
    current_energy: Optional[float] = None,
) -> StepOutcome:
    """One full chain update: propose, then apply the Metropolis decision if enabled."""
    out = dls_step(model, state, params, rng)
    if not params.mh_enabled:
        return out
    if current_energy is None:
        current_energy = energy_value(model, state)
    if mh_accept(model, params, out, state, rng, current_energy=current_energy):
        return out
    return replace(out, state=state, accepted=False, energy=current_energy)


def swap_probability(
    config: SwapConfig,
    tau1: float,
    tau2: float,
    u_next1: float,
    u_next2: float,
    u_prev1: float,
    u_prev2: float,
) -> float:
    """Probability of exchanging the two chains' states: rho * min(1, S).

    naive           S = exp[(1/tau2 - 1/tau1) (U1 - U2)]
    bias_corrected  adds (1/tau1 - 1/tau2) sigma2 inside the bracket
    history         uses U1 + U1_prev - U2 - U2_prev
    """
    for u in (u_next1, u_next2, u_prev1, u_prev2):
        if not np.isfinite(u):
            raise NumericError(f"swap probability needs finite energies, got {u}")
    beta = 1.0 / tau2 - 1.0 / tau1
    if config.variant == NAIVE:
        exponent = beta * (u_next1 - u_next2)
    elif config.variant == BIAS_CORRECTED:
        exponent = beta * (u_next1 - u_next2 - beta * config.sigma2)
    else:
        # grouped per chain so exchanging next and previous energies is an
        # exact float identity, not merely a mathematical one
        exponent = beta * ((u_next1 + u_prev1) - (u_next2 + u_prev2))
    return config.rho * min(1.0, float(np.exp(exponent)))


@dataclass(frozen=True)
class ReplicaPair:
    """Two chain states with the cached previous-iteration energies."""

    low: np.ndarray
    high: np.ndarray
    prev_energy_low: float
    prev_energy_high: float
    params_low: ChainParams
    params_high: ChainParams
    swap: SwapConfig

    def __post_init__(self):
        if self.params_low.tau >= self.params_high.tau or self.params_low.alpha >= self.params_high.alpha:
            warnings.warn(
                "replica pair expects tau_low < tau_high and alpha_low < alpha_high; "
                "running anyway",
                stacklevel=3,
            )


@dataclass(frozen=True)
class IterationStats:
    accepted_low: bool
    accepted_high: bool
    swapped: bool
    energy_low: float
    energy_high: float


def make_replica_pair(low, high, params_low, params_high, swap, model) -> ReplicaPair:
    return ReplicaPair(
        low=model.domain.validate_state(low),
        high=model.domain.validate_state(high),
        prev_energy_low=energy_value(model, low),
        prev_energy_high=energy_value(model, high),
        params_low=params_low,
        params_high=params_high,
        swap=swap,
    )


def replica_step(
    pair: ReplicaPair,
    model: EnergyModel,
    rng_low: np.random.Generator,
    rng_high: np.random.Generator,
    rng_swap: np.random.Generator,
):
    """One replica-exchange iteration: step both chains, then try a swap.

    The swap probability sees the energies of the states actually retained
    after the Metropolis decisions (U_next) together with the cached energies
    from the start of the iteration (U_prev); the caches roll forward to the
    post-swap current energies.
    """
    out_low = chain_step(model, pair.low, pair.params_low, rng_low, current_energy=pair.prev_energy_low)
    out_high = chain_step(model, pair.high, pair.params_high, rng_high, current_energy=pair.prev_energy_high)
    p_swap = swap_probability(
        pair.swap,
        pair.params_low.tau,
        pair.params_high.tau,
        out_low.energy,
        out_high.energy,
        pair.prev_energy_low,
        pair.prev_energy_high,
    )
    swapped = bool(rng_swap.random() < p_swap)
    if swapped:
        new_low, new_high = out_high.state, out_low.state
        e_low, e_high = out_high.energy, out_low.energy
    else:
        new_low, new_high = out_low.state, out_high.state
        e_low, e_high = out_low.energy, out_high.energy
    new_pair = replace(
        pair, low=new_low, high=new_high, prev_energy_low=e_low, prev_energy_high=e_high
    )
    stats = IterationStats(
        accepted_low=out_low.accepted,
        accepted_high=out_high.accepted,
        swapped=swapped,
        energy_low=e_low,
        energy_high=e_high,
    )
    return new_pair, stats


@dataclass(frozen=True)
class RunConfig:
    """Everything a sampler run needs besides the energy model."""

    sampler: str
    iterations: int
    seed: int
    alpha: float
    tau: float = 1.0
    alpha_high: Optional[float] = None
    tau_high: Optional[float] = None
    rho: float = 1.0
    sigma2: float = 0.0
    thin: int = 1
    init: str = "uniform"  # or "bernoulli" with init_prob for two-level domains
    init_prob: float = 0.5

    def __post_init__(self):
        if self.sampler not in SINGLE_CHAIN_SAMPLERS + REPLICA_SAMPLERS:
            raise DomainError(f"unknown sampler {self.sampler!r}")
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        if self.thin < 1:
            raise DomainError("thinning stride must be >= 1")
        if self.sampler in REPLICA_SAMPLERS and (self.alpha_high is None or self.tau_high is None):
            raise DomainError(f"{self.sampler} needs alpha_high and tau_high")

    @property
    def is_replica(self) -> bool:
        return self.sampler in REPLICA_SAMPLERS

    @property
    def mh_enabled(self) -> bool:
        return self.sampler in (DMALA, DREAM, BDREAM)

    def chain_params(self):
        low = ChainParams(alpha=self.alpha, tau=self.tau, mh_enabled=self.mh_enabled)
        if not self.is_replica:
            return low, None
        high = ChainParams(alpha=self.alpha_high, tau=self.tau_high, mh_enabled=self.mh_enabled)
        return low, high

    def swap_config(self):
        variant = BIAS_CORRECTED if self.sampler in (BDREXEL, BDREAM) else HISTORY
        return SwapConfig(variant=variant, rho=self.rho, sigma2=self.sigma2)


@dataclass
class RunTrace:
    """Low-chain states plus per-iteration statistics from one run."""

    states: np.ndarray  # (kept, dim) int16
    energy_low: np.ndarray
    energy_high: Optional[np.ndarray]
    accepted_low: np.ndarray
    accepted_high: Optional[np.ndarray]
    swapped: Optional[np.ndarray]
    iterations: int
    swap_attempts: int
    swap_successes: int
    seed: int
    thin: int
    wall_clock: float
    domain: Optional[DomainSpec] = field(repr=False, default=None)

    @property
    def is_replica(self) -> bool:
        return self.energy_high is not None


def _draw_init(domain: DomainSpec, config: RunConfig, rng: np.random.Generator) -> np.ndarray:
    if config.init == "uniform":
        return rng.integers(0, domain.levels, size=domain.dim, dtype=np.int64)
    if config.init == "bernoulli":
        if domain.levels != 2:
            raise DomainError("bernoulli init needs a two-level domain")
        return (rng.random(domain.dim) < config.init_prob).astype(np.int64)
    raise DomainError(f"unknown init {config.init!r}")


def run_sampler(model: EnergyModel, config: RunConfig) -> RunTrace:
    """Run a configured sampler; fully determined by (seed, config).

    Single-chain samplers are the rho=0, one-chain degenerate case: they use
    the same low-chain substream, so a DREXEL run with rho=0 is
    trajectory-identical on its low chain to the standalone run.
    """
    t0 = time.perf_counter()
    domain = model.domain
    rng_low = substream(config.seed, SALT_LOW)
    iters = config.iterations
    kept = range(0, iters, config.thin)
    states = np.empty((len(kept), domain.dim), dtype=np.int16)
    energy_low = np.empty(iters)
    accepted_low = np.empty(iters, dtype=bool)
    params_low, params_high = config.chain_params()

    if not config.is_replica:
        state = _draw_init(domain, config, rng_low)
        energy = energy_value(model, state)
        k = 0
        for i in range(iters):
            out = chain_step(model, state, params_low, rng_low, current_energy=energy)
            state, energy = out.state, out.energy
            energy_low[i] = energy
            accepted_low[i] = out.accepted
            if i % config.thin == 0:
                states[k] = state
                k += 1
        return RunTrace(
            states=states,
            energy_low=energy_low,
            energy_high=None,
            accepted_low=accepted_low,
            accepted_high=None,
            swapped=None,
            iterations=iters,
            swap_attempts=0,
            swap_successes=0,
            seed=config.seed,
            thin=config.thin,
            wall_clock=time.perf_counter() - t0,
            domain=domain,
        )

    rng_high = substream(config.seed, SALT_HIGH)
    rng_swap = substream(config.seed, SALT_SWAP)
    low = _draw_init(domain, config, rng_low)
    high = _draw_init(domain, config, rng_high)
    pair = make_replica_pair(low, high, params_low, params_high, config.swap_config(), model)
    energy_high = np.empty(iters)
    accepted_high = np.empty(iters, dtype=bool)
    swapped = np.empty(iters, dtype=bool)
    k = 0
    for i in range(iters):
        pair, stats = replica_step(pair, model, rng_low, rng_high, rng_swap)
        energy_low[i] = stats.energy_low
        energy_high[i] = stats.energy_high
        accepted_low[i] = stats.accepted_low
        accepted_high[i] = stats.accepted_high
        swapped[i] = stats.swapped
        if i % config.thin == 0:
            states[k] = pair.low
            k += 1
    return RunTrace(
        states=states,
        energy_low=energy_low,
        energy_high=energy_high,
        accepted_low=accepted_low,
        accepted_high=accepted_high,
        swapped=swapped,
        iterations=iters,
        swap_attempts=iters,
        swap_successes=int(swapped.sum()),
        seed=config.seed,
        thin=config.thin,
        wall_clock=time.perf_counter() - t0,
        domain=domain,
    )
