"""Seeded Monte Carlo cross-check of the exact drivers.

Trials sample an input label, whether post-selection succeeds, and a
measurement outcome, using per-branch probabilities from the exact circuit
analysis.  The estimate therefore tests how the drivers aggregate weights
across branches, not the optics themselves.

Trials are split into fixed-size chunks, each with its own generator
spawned from the master seed; chunk results are reduced in chunk order, so
the estimate depends only on ``(trials, seed)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from mixdistill.fock import embed, inner
from mixdistill.optics import apply_all, hadamard_wp
from mixdistill.protocols import (
    PROTOCOLS,
    BranchAnalysis,
    ProtocolParams,
    analyze_branch,
    branch_analyses,
    distill_phaseflip_stage1,
    ghz_target,
    joint_branches,
    round_registry,
    stage1_to_sources,
)

CHUNK = 25_000


@dataclass(frozen=True)
class MCEstimate:
    protocol: str
    trials: int
    seed: int
    successes: int
    success_probability: float
    success_stderr: float
    fidelity: float
    fidelity_stderr: float


@dataclass(frozen=True)
class _Table:
    """Sampling table: input label distribution and per-label outcome data."""

    label_probs: np.ndarray  # P(label)
    success: np.ndarray  # P(success | label)
    outcome_probs: tuple[np.ndarray, ...]  # P(outcome | label, success)
    outcome_fid: tuple[np.ndarray, ...]  # target overlap of corrected residual


def _table(analyses: list[BranchAnalysis], target) -> _Table:
    mass = np.array([a.weight * a.norm2 for a in analyses])
    success = np.array([a.kept / a.norm2 for a in analyses])
    probs, fids = [], []
    for a in analyses:
        if a.records:
            p = np.array([r.probability for r in a.records])
            probs.append(p / p.sum())
            fids.append(np.array([abs(inner(target, r.residual)) ** 2 for r in a.records]))
        else:
            probs.append(np.ones(1))
            fids.append(np.zeros(1))
    return _Table(mass / mass.sum(), success, tuple(probs), tuple(fids))


def _sample_round(table: _Table, n: int, rng: np.random.Generator):
    """Return (success mask, fidelity per trial, residual-outcome index per trial)."""
    labels = rng.choice(len(table.label_probs), size=n, p=table.label_probs)
    ok = rng.random(n) < table.success[labels]
    fid = np.zeros(n)
    outcome = np.full(n, -1)
    for lab in range(len(table.label_probs)):
        sel = np.flatnonzero(ok & (labels == lab))
        if sel.size == 0:
            continue
        idx = rng.choice(len(table.outcome_probs[lab]), size=sel.size, p=table.outcome_probs[lab])
        fid[sel] = table.outcome_fid[lab][idx]
        outcome[sel] = idx
    return ok, fid, labels, outcome


def _single_round_sampler(protocol: str, params: ProtocolParams):
    parties = params.parties if protocol == "multipartite" else 2
    names = "abcdefghijkl"[:parties]
    target = ghz_target(round_registry(parties), [f"{p}3" for p in names])
    table = _table(branch_analyses(protocol, params), target)

    def sample(n, rng):
        ok, fid, _, _ = _sample_round(table, n, rng)
        return ok, fid

    return sample


def _phaseflip_full_sampler(params: ProtocolParams):
    """Two independent stage-1 attempts, then one stage-2 attempt on their outputs."""
    target = ghz_target(round_registry(2), ["a3", "b3"])
    stage1_an = branch_analyses("phaseflip", params)
    t1 = _table(stage1_an, target)
    # stage-1 residual for each (label, outcome) pair, Hadamard-converted
    stage1 = distill_phaseflip_stage1(params)
    reps = stage1_to_sources(stage1)  # distinct residual classes
    reg2 = reps[0][2].registry

    def class_of(residual):
        s = apply_all(embed(residual, reg2, {"a3": "a", "b3": "b"}), (hadamard_wp("a"), hadamard_wp("b")))
        for i, (_, _, rep) in enumerate(reps):
            if abs(abs(inner(rep, s)) - 1.0) < 1e-10:
                return i
        raise RuntimeError("stage-1 residual not among output classes")

    cls = [np.array([class_of(r.residual) for r in a.records] or [0]) for a in stage1_an]
    pair_tables = {}
    for i, (li, _, si) in enumerate(reps):
        for j, (lj, _, sj) in enumerate(reps):
            joint = joint_branches([(li, 1.0, si)], [(lj, 1.0, sj)], 2)
            pair_tables[i, j] = _table([analyze_branch(*joint[0], 2)], target)

    def sample(n, rng):
        ok1, _, lab1, out1 = _sample_round(t1, n, rng)
        ok2, _, lab2, out2 = _sample_round(t1, n, rng)
        both = ok1 & ok2
        c1 = np.array([cls[l][o] if k else -1 for l, o, k in zip(lab1, out1, both)])
        c2 = np.array([cls[l][o] if k else -1 for l, o, k in zip(lab2, out2, both)])
        ok = np.zeros(n, dtype=bool)
        fid = np.zeros(n)
        for (i, j), table in pair_tables.items():
            sel = np.flatnonzero(both & (c1 == i) & (c2 == j))
            if sel.size == 0:
                continue
            ok_s, fid_s, _, _ = _sample_round(table, sel.size, rng)
            ok[sel] = ok_s
            fid[sel] = fid_s
        return ok, fid

    return sample


def mc_validate(
    protocol: str,
    params: ProtocolParams,
    trials: int,
    seed: int,
    workers: int = 4,
) -> MCEstimate:
    """Estimate success probability and output fidelity by sampling.

    Standard errors are binomial for the success probability and the
    sample standard error of the per-success fidelity.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if protocol == "phaseflip-full":
        sampler = _phaseflip_full_sampler(params)
    else:
        sampler = _single_round_sampler(protocol, params)

    sizes = [CHUNK] * (trials // CHUNK)
    if trials % CHUNK:
        sizes.append(trials % CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def work(k):
        ok, fid = sampler(sizes[k], np.random.default_rng(seeds[k]))
        f = fid[ok]
        return int(ok.sum()), float(f.sum()), float((f * f).sum())

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(work, range(len(sizes))))

    succ = sum(p[0] for p in parts)
    fsum = math.fsum(p[1] for p in parts)
    f2sum = math.fsum(p[2] for p in parts)
    p_hat = succ / trials
    p_err = math.sqrt(p_hat * (1 - p_hat) / trials)
    if succ:
        f_hat = fsum / succ
        var = max(0.0, f2sum / succ - f_hat * f_hat)
        f_err = math.sqrt(var / succ)
    else:
        f_hat, f_err = float("nan"), float("nan")
    return MCEstimate(protocol, trials, seed, succ, p_hat, p_err, f_hat, f_err)
