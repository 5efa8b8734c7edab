"""Experiment runner: builds models from configs, runs repeats, writes artifacts.

All outputs land inside the configured output directory: per-repeat run CSVs,
per-repeat metric CSVs, a summary CSV with mean and std across repeats,
grayscale heatmaps for 2-d tasks, and a metadata echo.  Re-running a config
with the same seed reproduces every numeric field bit-exactly.
"""

import csv
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .domains import DomainSpec, embed_all
from .energies import make_ising_chain, make_ising_lattice, make_synthetic
from .errors import DomainError
from .metrics import (
    EmpiricalHist,
    RffEstimator,
    acceptance_rate,
    jump_rate,
    kl_divergence,
    log_rmse,
    median_bandwidth,
    mmd_rff,
    nll,
    swap_rate,
)
from .oracle import (
    balanced_joint_kernel,
    block_gibbs_rbm_step,
    detailed_balance_check,
    enumerate_target,
    exact_joint_kernel,
    exact_single_kernel,
    intermediate_pair_pmf,
    spectral_tv_bound_check,
    tempered_pair_pmf,
)
from .rbm import (
    BinaryDataset,
    RbmTrainConfig,
    load_dataset,
    load_rbm,
    save_rbm,
    synth_bernoulli_mixture,
    train_rbm,
)
from .rng import SALT_REFERENCE, SALT_TRUTH, substream
from .sampler import ChainParams, RunConfig, SwapConfig, run_sampler


def repeat_seed(base_seed: int, repeat_index: int) -> int:
    """Per-repeat seeds are base + index; recorded in the metadata echo."""
    return base_seed + repeat_index


def _write_pgm(weights: np.ndarray, domain: DomainSpec, path) -> None:
    if domain.dim != 2:
        raise DomainError("heatmaps need a 2-d grid")
    n = domain.levels
    grid = np.asarray(weights, dtype=float).reshape(n, n)  # [ix, iy]
    peak = grid.max()
    if peak <= 0:
        import warnings

        warnings.warn(f"empty histogram; writing all-black heatmap to {path}")
        img = np.zeros((n, n), dtype=np.uint8)
    else:
        img = np.round(grid / peak * 255.0).astype(np.uint8)
    img = img.T[::-1, :]  # row 0 = largest y, column = x index
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
        fh.write(img.tobytes(order="C"))


def emit_heatmap(hist: EmpiricalHist, domain: DomainSpec, path) -> None:
    """Write a P5 graymap of a 2-d grid histogram, row 0 at the top of the y-axis.

    Intensity is counts scaled so the fullest bin is 255.  An empty histogram
    produces an all-black image (with a warning).
    """
    _write_pgm(hist.counts, domain, path)


def density_heatmap(p: np.ndarray, domain: DomainSpec, path) -> None:
    """Same rendering for an exact pmf."""
    _write_pgm(p, domain, path)


def _build_model(config: ExperimentConfig):
    if config.kind == "synthetic":
        return make_synthetic(config.energy, levels=config.grid_levels, c=config.c)
    if config.kind == "ising":
        n = config.side * config.side
        return make_ising_lattice(config.side, config.coupling, np.full(n, config.field), config.periodic)
    raise DomainError(f"no model builder for kind {config.kind!r}")


def _run_config(config: ExperimentConfig, seed: int) -> RunConfig:
    return RunConfig(
        sampler=config.sampler,
        iterations=config.iterations,
        seed=seed,
        alpha=config.alpha,
        tau=config.tau,
        alpha_high=config.alpha_high or None,
        tau_high=config.tau_high or None,
        rho=config.rho,
        sigma2=config.sigma2,
        thin=config.thin,
        init=config.init,
        init_prob=config.init_prob,
    )


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_run_csv(path, trace) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "energy_low", "energy_high", "accepted_low", "accepted_high", "swapped"])
        high = trace.is_replica
        for i in range(trace.iterations):
            writer.writerow(
                [
                    i,
                    _fmt(trace.energy_low[i]),
                    _fmt(trace.energy_high[i]) if high else "",
                    _fmt(trace.accepted_low[i]),
                    _fmt(trace.accepted_high[i]) if high else "",
                    _fmt(trace.swapped[i]) if high else "0",
                ]
            )


def write_metrics_csv(path, metrics: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for key, value in metrics.items():
            writer.writerow([key, _fmt(value)])


def write_summary_csv(path, per_repeat: list) -> None:
    keys = list(per_repeat[0].keys())
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "mean", "std"])
        for key in keys:
            vals = np.array([m[key] for m in per_repeat], dtype=float)
            writer.writerow([key, _fmt(vals.mean()), _fmt(vals.std())])


def _sampling_metrics(trace, model, truth, truth_samples, rff):
    hist = EmpiricalHist.from_states(trace.states, model.domain)
    chain_embedded = model.domain.value_table[trace.states.astype(np.int64)]
    weights = model.domain.levels ** np.arange(model.domain.dim - 1, -1, -1, dtype=np.int64)
    flat = trace.states.astype(np.int64) @ weights
    metrics = {
        "kl": kl_divergence(truth, hist),
        "mmd": mmd_rff(truth_samples, chain_embedded, rff),
        "nll": nll(truth, flat),
        "jump_rate": jump_rate(trace, model.domain),
        "swap_rate": swap_rate(trace),
        "accept_rate_low": acceptance_rate(trace.accepted_low),
    }
    if trace.is_replica:
        metrics["accept_rate_high"] = acceptance_rate(trace.accepted_high)
    return metrics, hist


def _synthetic_repeat(args):
    config, seed, truth_samples, rff = args
    model = _build_model(config)
    truth = enumerate_target(model)
    trace = run_sampler(model, _run_config(config, seed))
    metrics, hist = _sampling_metrics(trace, model, truth, truth_samples, rff)
    return seed, trace, metrics, hist


def _magnetization_truth(model, config):
    """Per-site mean spin, exact when enumeration fits, else a long Gibbs reference."""
    n = model.domain.dim
    if n <= 20:
        pi = enumerate_target(model)
        return pi.p @ embed_all(model.domain)
    rng = substream(config.seed, SALT_REFERENCE)
    emb = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    total = np.zeros(n)
    J = model.J
    for _ in range(config.reference_steps):
        for d in range(n):
            grad_d = 2.0 * model.w * (J[d] @ emb) + model.b[d]
            p_up = 1.0 / (1.0 + np.exp(-2.0 * grad_d))  # heat-bath conditional
            emb[d] = 1.0 if rng.random() < p_up else -1.0
        total += emb
    return total / config.reference_steps


def _ising_repeat(args):
    config, seed, mag_truth = args
    model = _build_model(config)
    trace = run_sampler(model, _run_config(config, seed))
    emb = model.domain.value_table[trace.states.astype(np.int64)]
    mag_estimate = emb.mean(axis=0)
    metrics = {
        "log_rmse": log_rmse(mag_estimate, mag_truth),
        "swap_rate": swap_rate(trace),
        "accept_rate_low": acceptance_rate(trace.accepted_low),
    }
    if trace.is_replica:
        metrics["accept_rate_high"] = acceptance_rate(trace.accepted_high)
    return seed, trace, metrics, None


def _rbm_sample_repeat(args):
    config, seed, rbm_path = args
    model = load_rbm(rbm_path)
    trace = run_sampler(model, _run_config(config, seed))
    rng_ref = substream(seed, SALT_REFERENCE)
    n_keep = trace.states.shape[0]
    ref = np.empty((n_keep, model.domain.dim), dtype=np.int64)
    state = (rng_ref.random(model.domain.dim) < 0.5).astype(np.int64)
    for _ in range(config.gibbs_burn_in):
        state = block_gibbs_rbm_step(model, state, rng_ref)
    for i in range(n_keep):
        state = block_gibbs_rbm_step(model, state, rng_ref)
        ref[i] = state
    chain_embedded = model.domain.value_table[trace.states.astype(np.int64)]
    ref_embedded = model.domain.value_table[ref]
    bw = median_bandwidth(np.vstack([chain_embedded[:500], ref_embedded[:500]]))
    rff = RffEstimator.create(model.domain.dim, bw, config.mmd_features, substream(seed, SALT_TRUTH))
    metrics = {
        "mmd": mmd_rff(ref_embedded, chain_embedded, rff),
        "swap_rate": swap_rate(trace),
        "accept_rate_low": acceptance_rate(trace.accepted_low),
    }
    if trace.is_replica:
        metrics["accept_rate_high"] = acceptance_rate(trace.accepted_high)
    return seed, trace, metrics, None


def _write_meta(out, config, seeds, extra=None):
    with open(os.path.join(out, "meta.txt"), "w") as fh:
        fh.write(f"drexel_version = {__version__}\n")
        for key in sorted(config.values):
            fh.write(f"{key} = {config.values[key]}\n")
        fh.write(f"repeat_seeds = {','.join(str(s) for s in seeds)}\n")
        for line in extra or ():
            fh.write(line + "\n")


def _run_repeats(worker, jobs, threads):
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, jobs))
    return [worker(job) for job in jobs]


def _check_referenced_files(config: ExperimentConfig):
    from .errors import ConfigError

    if config.kind == "rbm-sample" and not os.path.isfile(config.weights):
        raise ConfigError(f"weights file not found: {config.weights}")
    if config.kind == "rbm-train" and config.dataset != "synthetic" and not os.path.isfile(config.dataset):
        raise ConfigError(f"dataset file not found: {config.dataset}")


def run_experiment(config: ExperimentConfig, out=None, threads=None) -> dict:
    """Execute one experiment config; returns the summary metrics by name."""
    _check_referenced_files(config)
    out = out or config.out
    threads = threads or config.threads
    os.makedirs(out, exist_ok=True)
    seeds = [repeat_seed(config.seed, r) for r in range(config.repeats)]

    if config.kind == "rbm-train":
        return _run_rbm_train(config, out, seeds)
    if config.kind == "oracle-check":
        return _run_oracle_check(config, out)

    if config.kind == "synthetic":
        model = _build_model(config)
        truth = enumerate_target(model)
        rng_truth = substream(config.seed, SALT_TRUTH)
        idx = rng_truth.choice(truth.p.shape[0], size=config.reference_samples, p=truth.p)
        truth_samples = embed_all(model.domain)[idx]
        bw = median_bandwidth(truth_samples)
        rff = RffEstimator.create(model.domain.dim, bw, config.mmd_features, rng_truth)
        jobs = [(config, s, truth_samples, rff) for s in seeds]
        results = _run_repeats(_synthetic_repeat, jobs, threads)
        extra = [f"mmd_bandwidth = {bw!r}"]
    elif config.kind == "ising":
        model = _build_model(config)
        mag_truth = _magnetization_truth(model, config)
        truth_src = "enumeration" if model.domain.dim <= 20 else f"gibbs_reference({config.reference_steps} sweeps)"
        jobs = [(config, s, mag_truth) for s in seeds]
        results = _run_repeats(_ising_repeat, jobs, threads)
        extra = [f"magnetization_truth = {truth_src}"]
    elif config.kind == "rbm-sample":
        jobs = [(config, s, config.weights) for s in seeds]
        results = _run_repeats(_rbm_sample_repeat, jobs, threads)
        extra = [f"gibbs_reference = {config.gibbs_steps} steps, {config.gibbs_burn_in} burn-in"]
    else:
        raise DomainError(f"unknown kind {config.kind!r}")

    per_repeat = []
    pooled_hist = None
    for seed, trace, metrics, hist in results:
        write_run_csv(os.path.join(out, f"run_{seed}.csv"), trace)
        write_metrics_csv(os.path.join(out, f"metrics_{seed}.csv"), metrics)
        per_repeat.append(metrics)
        if hist is not None:
            pooled_hist = hist.counts if pooled_hist is None else pooled_hist + hist.counts
    write_summary_csv(os.path.join(out, "summary.csv"), per_repeat)
    _write_meta(out, config, seeds, extra)

    if config.kind == "synthetic" and config.heatmap:
        model = _build_model(config)
        truth = enumerate_target(model)
        emit_heatmap(
            EmpiricalHist(counts=pooled_hist, total=int(pooled_hist.sum())),
            model.domain,
            os.path.join(out, "empirical.pgm"),
        )
        density_heatmap(truth.p, model.domain, os.path.join(out, "target.pgm"))

    summary = {}
    for key in per_repeat[0]:
        vals = np.array([m[key] for m in per_repeat], dtype=float)
        summary[key] = (float(vals.mean()), float(vals.std()))
    return summary


def _run_rbm_train(config: ExperimentConfig, out, seeds):
    if config.dataset == "synthetic":
        data = synth_bernoulli_mixture(config.visible, config.modes, config.per_mode, config.flip_prob, config.seed)
    else:
        data = load_dataset(config.dataset)
    train_cfg = RbmTrainConfig(
        hidden=config.hidden,
        cd_k=config.cd_k,
        learning_rate=config.learning_rate,
        iterations=config.train_iterations,
        batch_size=config.batch_size,
        seed=config.seed,
    )
    model, losses = train_rbm(data, train_cfg)
    weights_path = os.path.join(out, config.weights_out)
    save_rbm(model, weights_path)
    with open(os.path.join(out, "train_loss.csv"), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "energy_gap"])
        for i, loss in enumerate(losses):
            writer.writerow([i, _fmt(loss)])
    _write_meta(out, config, seeds, [f"weights = {weights_path}"])
    return {"final_energy_gap": (float(losses[-1]) if len(losses) else 0.0, 0.0)}


def _run_oracle_check(config: ExperimentConfig, out):
    """Reversibility and spectral checks on a tiny spin chain; plain-text report."""
    model = make_ising_chain(config.spins, config.coupling, np.full(config.spins, config.field))
    low = ChainParams(alpha=config.alpha, tau=config.tau, mh_enabled=config.with_mh)
    high = ChainParams(alpha=config.alpha_high, tau=config.tau_high, mh_enabled=config.with_mh)
    pi_low = enumerate_target(model, tau=config.tau)
    lines = []
    ok = True

    single = exact_single_kernel(model, low, with_mh=config.with_mh)
    res_single = detailed_balance_check(single, pi_low)
    lines.append(f"single_chain_db_residual = {res_single:.6e}")
    if config.with_mh:
        ok &= res_single <= 1e-12
        lines.append(f"single_chain_db_pass = {res_single <= 1e-12}")

    pair_target = intermediate_pair_pmf(model, low, high)
    for variant in ("history", "naive"):
        kernel = exact_joint_kernel(model, low, high, SwapConfig(variant=variant, rho=config.rho))
        res = detailed_balance_check(kernel, pair_target)
        lines.append(f"joint_{variant}_db_residual = {res:.6e}")
    balanced = balanced_joint_kernel(model, low, high, rho=config.rho)
    res_bal = detailed_balance_check(balanced, pair_target)
    lines.append(f"joint_balanced_db_residual = {res_bal:.6e}")
    ok &= res_bal <= 1e-10
    lines.append(f"joint_balanced_db_pass = {res_bal <= 1e-10}")

    product = tempered_pair_pmf(model, low, high)
    if config.with_mh:
        # Metropolis-adjusted replica kernel: residuals reported against both
        # candidate targets, no pass threshold asserted for either
        adjusted = exact_joint_kernel(
            model, low, high, SwapConfig(variant="history", rho=config.rho), with_mh=True
        )
        lines.append(
            f"joint_adjusted_db_residual_vs_intermediate = {detailed_balance_check(adjusted, pair_target):.6e}"
        )
        lines.append(
            f"joint_adjusted_db_residual_vs_product = {detailed_balance_check(adjusted, product):.6e}"
        )

    tv = 0.5 * np.abs(pair_target.p - product.p).sum()
    lines.append(f"tv_pair_target_vs_product = {tv:.6e}")

    if model.domain.num_states**2 <= 256:
        report = spectral_tv_bound_check(balanced, pair_target, n_max=config.n_max)
        lines.append(f"spectral_lambda_star = {report.lambda_star:.12f}")
        lines.append(f"spectral_lambda0_error = {report.lambda0_error:.3e}")
        lines.append(f"spectral_max_bound_violation = {report.max_bound_violation:.3e}")
        lines.append(f"spectral_eigenvalues = {','.join(f'{w:.9f}' for w in report.eigenvalues)}")
        ok &= report.bound_holds and report.lambda0_ok
        lines.append(f"spectral_pass = {report.bound_holds and report.lambda0_ok}")

    lines.append(f"overall_pass = {ok}")
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return {"overall_pass": (1.0 if ok else 0.0, 0.0)}
