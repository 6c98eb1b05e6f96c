"""User pairing as a one-to-one swap-matching game over the two user sides."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelRealization
from .inner_ao import Solution, inner_solve
from .scenario import SystemConfig, UserSet, distance


@dataclass(frozen=True)
class Matching:
    """Bijection between transmitted and reflected users.

    ru_of_tu[t] is the reflected-side local index paired with transmitted
    user t. Hashable, so it keys the utility cache directly.
    """

    ru_of_tu: tuple

    @property
    def users_per_side(self) -> int:
        return len(self.ru_of_tu)

    def validate(self) -> None:
        k = self.users_per_side
        if sorted(self.ru_of_tu) != list(range(k)):
            raise ValueError(f"pairing must be a bijection over {k} users per side, got {self.ru_of_tu}")

    def pair_list(self) -> tuple:
        """(tu, ru) pairs in global user indexing (reflected side offset by K)."""
        k = self.users_per_side
        return tuple((t, k + r) for t, r in enumerate(self.ru_of_tu))


def initial_matching(config: SystemConfig, users: UserSet | None, policy: str = "index",
                     rng: np.random.Generator | None = None) -> Matching:
    """Starting pairing: by index, seeded random, or far-with-near by surface distance."""
    k = config.users_per_side
    if users is not None:
        if len(users.tu_indices) != len(users.ru_indices):
            raise ValueError("pairing requires equally sized user sides")
        if users.users_per_side != k:
            raise ValueError("user set does not match the configured side size")

    if policy == "index":
        return Matching(ru_of_tu=tuple(range(k)))
    if policy == "random":
        if rng is None:
            raise ValueError("random pairing policy needs a generator")
        return Matching(ru_of_tu=tuple(int(v) for v in rng.permutation(k)))
    if policy == "distance":
        if users is None:
            raise ValueError("distance pairing policy needs user positions")
        ris = config.ris_pos
        d_tu = [distance(users.positions[t], ris) for t in range(k)]
        d_ru = [distance(users.positions[k + r], ris) for r in range(k)]
        far_tu = np.argsort(d_tu)[::-1]  # farthest transmitted user first
        near_ru = np.argsort(d_ru)       # nearest reflected user first
        ru_of_tu = [0] * k
        for t, r in zip(far_tu, near_ru):
            ru_of_tu[int(t)] = int(r)
        return Matching(ru_of_tu=tuple(ru_of_tu))
    raise ValueError(f"unknown pairing policy {policy!r}")


def swap(matching: Matching, tu_a: int, tu_b: int) -> Matching:
    """Exchange the partners of two transmitted users; all other pairs unchanged."""
    if tu_a == tu_b:
        raise ValueError("a swap needs two distinct transmitted users")
    ru = list(matching.ru_of_tu)
    ru[tu_a], ru[tu_b] = ru[tu_b], ru[tu_a]
    return Matching(ru_of_tu=tuple(ru))


def _solve_matching(config: SystemConfig, channels: ChannelRealization, matching: Matching,
                    cache: dict | None, solve_kwargs: dict) -> Solution:
    if cache is not None and matching.ru_of_tu in cache:
        return cache[matching.ru_of_tu]
    sol = inner_solve(config, channels, matching.pair_list(), **solve_kwargs)
    if cache is not None:
        cache[matching.ru_of_tu] = sol
    return sol


def utility(config: SystemConfig, channels: ChannelRealization, matching: Matching,
            cache: dict | None = None, **solve_kwargs) -> float:
    """Best achievable min rate under this pairing, memoized when a cache is given."""
    matching.validate()
    return _solve_matching(config, channels, matching, cache, solve_kwargs).min_rate


def outer_solve(config: SystemConfig, channels: ChannelRealization, users: UserSet | None = None,
                init_policy: str = "index", max_scans: int | None = None,
                rng: np.random.Generator | None = None, **solve_kwargs) -> Solution:
    """Swap search over pairings: accept any partner exchange that strictly
    raises the utility, rescanning until a full pass finds none.

    Scans ordered transmitted-user pairs lexicographically with immediate
    acceptance; the scan count is capped at K(K-1)/2 by default. Returns the
    best solution seen, annotated with the pairing, the utility trace of the
    accepted swaps, and termination metadata.
    """
    k = config.users_per_side
    if max_scans is None:
        max_scans = max(1, k * (k - 1) // 2)

    matching = initial_matching(config, users, policy=init_policy, rng=rng)
    cache: dict = {}
    best = _solve_matching(config, channels, matching, cache, solve_kwargs)
    w_cur = best.min_rate
    outer_trace = [w_cur]
    accepted = []

    scans = 0
    clean_scan = k < 2
    total_iterations = best.iterations
    evaluated = {matching.ru_of_tu}

    while scans < max_scans and k >= 2:
        improved = False
        for tu_a in range(k):
            for tu_b in range(tu_a + 1, k):
                candidate = swap(matching, tu_a, tu_b)
                fresh = candidate.ru_of_tu not in cache
                sol = _solve_matching(config, channels, candidate, cache, solve_kwargs)
                if fresh:
                    total_iterations += sol.iterations
                evaluated.add(candidate.ru_of_tu)
                if sol.min_rate > w_cur:
                    matching = candidate
                    matching.validate()
                    best = sol
                    w_cur = sol.min_rate
                    outer_trace.append(w_cur)
                    accepted.append((scans, (tu_a, tu_b), w_cur))
                    improved = True
        scans += 1
        if not improved:
            clean_scan = True
            break

    meta = dict(best.meta)
    meta.update({
        "outer_scans": scans,
        "accepted_swaps": accepted,
        "cap_fired": not clean_scan,
        "no_blocking_pair": clean_scan,
        "matchings_evaluated": len(evaluated),
        "total_inner_iterations": total_iterations,
    })
    return replace(best, matching=matching.ru_of_tu, outer_trace=outer_trace, meta=meta)


def enumerate_matchings(k: int):
    """All K! pairings; exhaustive oracle for small sides."""
    from itertools import permutations

    for perm in permutations(range(k)):
        yield Matching(ru_of_tu=perm)
