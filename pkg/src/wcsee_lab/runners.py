"""Experiment runners: training, benchmark sweeps, evaluation, CSV output.

Every run is fully determined by (spec, seed): channel draws, network
initialization, exploration, and batch sampling all derive from named
substreams of the seed, and floats are written with shortest round-trip
formatting, so identical invocations produce byte-identical files.

File layout under the output directory:

* ``<label>_curve.csv``      per-episode learning curve (training modes)
* ``<label>_trajectory.csv`` per-step environment log (training modes)
* ``<label>.ckpt``           final agent parameters (training modes)
* ``<label>_summary.csv``    per-realization outcomes (benchmark mode)
* ``<label>_trace.csv``      per-iteration block traces (benchmark mode)
* ``<label>_eval.csv``       greedy-rollout results (eval mode)
* ``aggregate.csv``          (runner, sweep point) -> seed mean/std
* ``schema.txt``             column documentation for all of the above
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .agents import AgentConfig, DdpgAgent, SacAgent, TrainSchedule, evaluate_policy, train
from .channels import RngStream, sample_disk_positions, sample_small_scale
from .config import ExperimentSpec, apply_sweep_value
from .env import SecureDownlinkEnv, StepRecord, action_dim, state_dim
from .sca import bcd_outer
from .sca.power import InfeasibleBlockError


def fmt(value) -> str:
    """Shortest round-trip text for floats; plain str otherwise."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")


def _build_agent(spec: ExperimentSpec, algo: str, seed: int):
    cfg = spec.scenario
    agent_cfg = AgentConfig(
        state_dim=state_dim(cfg),
        action_dim=action_dim(cfg),
        hidden=spec.hidden,
        gamma=spec.gamma,
        tau=spec.tau,
        lr_actor=spec.lr_actor,
        lr_critic=spec.lr_critic,
        lr_temperature=spec.lr_temperature,
        init_temperature=spec.init_temperature,
    )
    if algo == "sac":
        return SacAgent(agent_cfg, seed=seed)
    return DdpgAgent(agent_cfg, seed=seed)


def run_training(spec: ExperimentSpec, algo: str, seed: int, out_dir, label: str) -> dict:
    env = SecureDownlinkEnv(
        spec.scenario,
        seed=seed,
        horizon=spec.steps_per_episode,
        discrete_phases=spec.discrete_phases,
        redraw_per_episode=spec.redraw_per_episode,
        log_trajectory=True,
    )
    agent = _build_agent(spec, algo, seed)
    schedule = TrainSchedule(
        episodes=spec.episodes,
        warmup_steps=spec.warmup_steps,
        batch_size=spec.batch_size,
        buffer_capacity=spec.buffer_capacity,
        grad_steps_per_env_step=spec.grad_steps_per_env_step,
        seed=seed,
    )
    result = train(env, agent, schedule, evaluate_each_episode=True)

    write_csv(
        os.path.join(out_dir, f"{label}_curve.csv"),
        ("episode", "mean_reward", "beta", "critic_loss", "actor_loss"),
        [row.as_tuple() for row in result.curve],
    )
    write_csv(
        os.path.join(out_dir, f"{label}_trajectory.csv"),
        StepRecord.FIELDS,
        [rec.as_tuple() for rec in env.trajectory],
    )
    agent.save(os.path.join(out_dir, f"{label}.ckpt"))
    return {
        "metric": result.final_mean_reward,
        "best_eval": result.best_eval_value,
    }


def run_sca_benchmark(spec: ExperimentSpec, seed: int, out_dir, label: str) -> dict:
    cfg = spec.scenario
    stream = RngStream(seed)
    summary_rows = []
    trace_rows = []
    etas = []
    failures = 0
    for r in range(spec.sca_realizations):
        sub = stream.child(f"realization-{r}")
        placed = cfg.with_positions(
            sample_disk_positions(
                cfg.ihr_disk_center, cfg.ihr_disk_radius, cfg.num_ihr, sub.child("place-ihr")
            ),
            sample_disk_positions(
                cfg.uehr_disk_center, cfg.uehr_disk_radius, cfg.num_uehr, sub.child("place-uehr")
            ),
        )
        draw = sample_small_scale(replace(placed, nu=0.0), sub.child("fading"))
        try:
            res = bcd_outer(
                placed,
                draw=draw,
                outer_tol=spec.sca_outer_tol,
                max_outer=spec.sca_outer_iters,
                inner_tol=spec.sca_tol,
                inner_iters=spec.sca_inner_iters,
            )
        except InfeasibleBlockError:
            failures += 1
            continue
        etas.append(res.eta)
        summary_rows.append(
            (r, res.eta, res.secrecy, float(res.power.sum()), res.outer_iterations,
             int(res.eh_rescued), int(res.eh_violated))
        )
        for outer, row in res.block_rows:
            trace_rows.append((r, outer) + row.as_tuple())
    write_csv(
        os.path.join(out_dir, f"{label}_summary.csv"),
        ("realization", "eta", "secrecy", "sum_power", "outer_iters", "eh_rescued", "eh_violated"),
        summary_rows,
    )
    write_csv(
        os.path.join(out_dir, f"{label}_trace.csv"),
        ("realization", "outer_iter", "block", "inner_iter", "objective", "lam", "residual"),
        trace_rows,
    )
    if failures and not etas:
        raise InfeasibleBlockError(
            f"all {spec.sca_realizations} realizations were infeasible under the harvest floor"
        )
    return {"metric": float(np.mean(etas)) if etas else 0.0, "failures": failures}


def run_eval(spec: ExperimentSpec, seed: int, out_dir, label: str) -> dict:
    if not spec.checkpoint:
        raise ValueError("eval mode needs a 'checkpoint=' entry in the config")
    env = SecureDownlinkEnv(
        spec.scenario,
        seed=seed,
        horizon=spec.steps_per_episode,
        discrete_phases=spec.discrete_phases,
        redraw_per_episode=spec.redraw_per_episode,
    )
    agent = _build_agent(spec, spec.algo, seed)
    agent.load(spec.checkpoint)
    rows = []
    values = []
    for episode in range(spec.eval_episodes):
        value, decision = evaluate_policy(env, agent, episodes=1)
        rows.append(
            (
                episode,
                value,
                decision.sum_power if decision is not None else 0.0,
                decision.q.x if decision is not None else math.nan,
                decision.q.y if decision is not None else math.nan,
            )
        )
        values.append(value)
    write_csv(
        os.path.join(out_dir, f"{label}_eval.csv"),
        ("episode", "best_value", "sum_power", "q_x", "q_y"),
        rows,
    )
    return {"metric": float(np.mean(values)) if values else 0.0}


_RUNNERS = {
    "train-sac": lambda spec, seed, out, label: run_training(spec, "sac", seed, out, label),
    "train-ddpg": lambda spec, seed, out, label: run_training(spec, "ddpg", seed, out, label),
    "sca-benchmark": run_sca_benchmark,
    "eval": run_eval,
}

SCHEMA = """\
Column documentation (all files are comma-separated with one header line;
floats use shortest round-trip formatting).

<label>_curve.csv        episode, mean_reward, beta, critic_loss, actor_loss
                         per-episode training curve; losses are 0 until the
                         first gradient phase; beta is 0 for the
                         deterministic baseline.
<label>_trajectory.csv   episode, step, reward, r_sec, sum_power, eh_slack, q_x, q_y
                         one row per environment step.
<label>_summary.csv      realization, eta, secrecy, sum_power, outer_iters,
                         eh_rescued, eh_violated
                         one row per benchmark channel realization.
<label>_trace.csv        realization, outer_iter, block, inner_iter,
                         objective, lam, residual
                         per-iteration traces of each optimization block;
                         lam is the ratio parameter (power block) or the
                         penalty weight (phase block).
<label>_eval.csv         episode, best_value, sum_power, q_x, q_y
                         greedy-policy probes of a checkpoint.
aggregate.csv            runner, sweep_axis, sweep_value, seed, metric
                         one row per (sweep point, seed), followed by rows
                         with seed='mean'/'std' per sweep point.  Metrics:
                         training = mean reward over the last 10 episodes;
                         benchmark = mean final efficiency over
                         realizations; eval = mean best value.
"""


def _task_label(runner: str, axis: str, value, seed: int) -> str:
    parts = [runner.replace("-", "_")]
    if axis:
        parts.append(f"{axis}{fmt(value)}")
    parts.append(f"seed{seed}")
    return "__".join(parts)


def _run_one(args):
    runner, spec, axis, value, seed, out_dir = args
    label = _task_label(runner, axis, value, seed)
    summary = _RUNNERS[runner](spec, seed, out_dir, label)
    return (runner, axis, value, seed, summary["metric"])


def execute(mode: str, spec: ExperimentSpec, seeds, out_dir, sweep=None) -> list:
    """Run a mode over seeds (and sweep points); returns the aggregate rows.

    ``sweep`` is (axis, values).  The worker pool size is capped by the
    WCSEE_THREADS environment variable; results are merged in sorted task
    order so the output bytes do not depend on the pool size.
    """
    os.makedirs(out_dir, exist_ok=True)
    if mode == "sweep":
        runner = spec.sweep_runner
        axis, values = sweep if sweep else (spec.sweep_axis, list(spec.sweep_values))
        if not axis or not list(values):
            raise ValueError("sweep mode needs --sweep axis=v1,v2,... or config sweep values")
    else:
        runner = mode
        axis, values = "", [None]
        if sweep:
            axis, values = sweep

    tasks = []
    for value in values:
        sub_spec = apply_sweep_value(spec, axis, value) if axis else spec
        for seed in seeds:
            tasks.append((runner, sub_spec, axis, value, seed, out_dir))

    threads = max(1, int(os.environ.get("WCSEE_THREADS", "1")))
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]

    rows = []
    for value in values:
        point = [r for r in results if r[2] == value]
        for runner_name, ax, val, seed, metric in point:
            rows.append((runner_name, ax, "" if val is None else val, seed, metric))
        metrics = [r[4] for r in point]
        rows.append(
            (runner, axis, "" if value is None else value, "mean", float(np.mean(metrics)))
        )
        rows.append(
            (runner, axis, "" if value is None else value, "std", float(np.std(metrics)))
        )
    write_csv(
        os.path.join(out_dir, "aggregate.csv"),
        ("runner", "sweep_axis", "sweep_value", "seed", "metric"),
        rows,
    )
    with open(os.path.join(out_dir, "schema.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write(SCHEMA)
    return rows
