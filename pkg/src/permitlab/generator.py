"""Seeded random instance generation. Values and probabilities come from small
rational grids so exact LP solves stay fast; every draw is reproducible from
the seed alone.
"""

from __future__ import annotations

import random

from .model import (
    BasisMatroid,
    CostModel,
    DiscreteDist,
    ExplicitFamily,
    Instance,
    PartitionMatroid,
    UniformMatroid,
    iter_subsets,
    popcount,
    verify_matroid,
)
from .rational import Q, ZERO

VALUE_GRID = [Q(k, 2) for k in range(1, 13)]  # 1/2 .. 6
COST_GRID = [ZERO, ZERO, Q(1, 2), Q(1), Q(2), Q(3)]  # weighted toward cheap


def _probs(rng: random.Random, k: int):
    weights = [rng.randint(1, 4) for _ in range(k)]
    tot = sum(weights)
    return tuple(Q(w, tot) for w in weights)


def _dist(rng: random.Random, max_support: int) -> DiscreteDist:
    k = rng.randint(1, max_support)
    support = tuple(sorted(rng.sample(VALUE_GRID, k)))
    return DiscreteDist(support, _probs(rng, k))


def _cost_model(rng: random.Random, m: int, max_atoms: int) -> CostModel:
    k = rng.randint(1, max_atoms)
    seen = set()
    atoms = []
    for _ in range(40):
        vec = tuple(rng.choice(COST_GRID) for _ in range(m))
        if vec not in seen:
            seen.add(vec)
            atoms.append(vec)
        if len(atoms) == k:
            break
    return CostModel(tuple(zip(atoms, _probs(rng, len(atoms)))))


def _random_downward_closed(rng: random.Random, m: int) -> ExplicitFamily:
    members = {0}
    for _ in range(rng.randint(1, 2 ** m)):
        top = rng.randrange(1, 1 << m)
        for sub in iter_subsets(top):
            members.add(sub)
    return ExplicitFamily(m, members)


def _random_basis_matroid(rng: random.Random, m: int):
    for _ in range(50):
        r = rng.randint(1, m)
        cands = [s for s in range(1 << m) if popcount(s) == r]
        bases = rng.sample(cands, rng.randint(1, len(cands)))
        try:
            return BasisMatroid(m, bases)
        except ValueError:
            continue
    return UniformMatroid(m, rng.randint(1, m))


def random_family(rng: random.Random, m: int, kinds: str):
    """kinds: 'additive', 'matroid', 'downward', or 'mixed'."""
    if kinds == "additive":
        return UniformMatroid(m, m)
    if kinds == "matroid":
        pick = rng.choice(["uniform", "uniform", "partition", "basis"])
    elif kinds == "downward":
        pick = rng.choice(["explicit", "explicit", "uniform"])
    else:
        pick = rng.choice(["uniform", "partition", "basis", "explicit", "uniform"])
    if pick == "uniform":
        return UniformMatroid(m, rng.randint(1, m))
    if pick == "partition":
        items = list(range(m))
        rng.shuffle(items)
        cut = rng.randint(1, m)
        parts = []
        for block in (items[:cut], items[cut:]):
            if block:
                parts.append(sum(1 << j for j in block))
        caps = [rng.randint(1, max(1, popcount(p))) for p in parts]
        fam = PartitionMatroid(m, parts, caps)
    elif pick == "basis":
        fam = _random_basis_matroid(rng, m)
    else:
        fam = _random_downward_closed(rng, m)
    if pick in ("partition", "basis") and not verify_matroid(fam):
        raise AssertionError("generated matroid fails the exchange axiom")
    return fam


def random_instance(
    seed: int,
    n_max: int = 2,
    m_max: int = 2,
    max_support: int = 3,
    max_atoms: int = 2,
    families: str = "mixed",
    n_min: int = 1,
    m_min: int = 1,
    name: str = "",
) -> Instance:
    rng = random.Random(seed)
    n = rng.randint(n_min, n_max)
    m = rng.randint(m_min, m_max)
    dists = tuple(
        tuple(_dist(rng, max_support) for _ in range(m)) for _ in range(n)
    )
    return Instance(
        n,
        m,
        dists,
        _cost_model(rng, m, max_atoms),
        tuple(random_family(rng, m, families) for _ in range(n)),
        name=name or f"rand-{seed}",
    )


