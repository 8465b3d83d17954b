"""JSON-compatible on-disk formats for instances, mechanism specs, and reports.
Rationals travel as "p/q" strings throughout.
"""

from __future__ import annotations

import json

from .mechanisms import MechanismSpec
from .model import (
    BasisMatroid,
    CostModel,
    DiscreteDist,
    ExplicitFamily,
    ExplicitPairFamily,
    Instance,
    PartitionMatroid,
    UniformMatroid,
)
from .rational import rat, rat_str


def family_to_dict(f):
    return f.describe()


def family_from_dict(m: int, d: dict):
    kind = d["kind"]
    if kind == "uniform":
        return UniformMatroid(m, d["rank"])
    if kind == "partition":
        return PartitionMatroid(m, d["parts"], d["caps"])
    if kind == "basis":
        return BasisMatroid(m, d["bases"])
    if kind == "explicit":
        return ExplicitFamily(m, d["members"])
    raise ValueError(f"unknown family kind {kind}")


def instance_to_dict(instance: Instance) -> dict:
    return {
        "name": instance.name,
        "n": instance.n,
        "m": instance.m,
        "dists": [
            [
                {
                    "support": [rat_str(v) for v in d.support],
                    "probs": [rat_str(p) for p in d.probs],
                }
                for d in row
            ]
            for row in instance.dists
        ],
        "costs": [
            {"vector": [rat_str(c) for c in vec], "prob": rat_str(p)}
            for vec, p in instance.costs.atoms
        ],
        "families": [family_to_dict(f) for f in instance.families],
    }


def instance_from_dict(d: dict) -> Instance:
    dists = tuple(
        tuple(
            DiscreteDist(
                tuple(rat(v) for v in dd["support"]),
                tuple(rat(p) for p in dd["probs"]),
            )
            for dd in row
        )
        for row in d["dists"]
    )
    costs = CostModel(
        tuple(
            (tuple(rat(c) for c in atom["vector"]), rat(atom["prob"]))
            for atom in d["costs"]
        )
    )
    families = tuple(family_from_dict(d["m"], fd) for fd in d["families"])
    return Instance(d["n"], d["m"], dists, costs, families, name=d.get("name", ""))


def save_instance(instance: Instance, path: str):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=1, sort_keys=True)


def load_instance(path: str) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def spec_to_dict(spec: MechanismSpec) -> dict:
    out = {
        "kind": spec.kind,
        "note": spec.note,
        "order": list(spec.order) if spec.order is not None else None,
        "hide_to_half": spec.hide_to_half,
        "item_prices": [
            [i, j, c, rat_str(v)] for (i, j, c), v in sorted(spec.item_prices.items())
        ],
        "tie_allow": [
            [i, j, c, rat_str(v)] for (i, j, c), v in sorted(spec.tie_allow.items())
        ],
        "permit_prices": [
            [i, j, None if v is None else rat_str(v)]
            for (i, j), v in sorted(spec.permit_prices.items())
        ],
        "bundle_prices": [
            [i, rat_str(v)] for i, v in sorted(spec.bundle_prices.items())
        ],
        "hiding_probs": [
            [i, j, c, rat_str(v)] for (i, j, c), v in sorted(spec.hiding_probs.items())
        ],
    }
    if spec.sub_constraint is not None:
        ground = None
        sub = {}
        for c_idx, fam in spec.sub_constraint.items():
            if hasattr(fam, "members"):
                members = list(fam.members())
            else:  # enumerate over the pair ground set
                n = max(i for i, _, _ in (k for k in spec.item_prices)) + 1
                m = max(j for _, j, _ in (k for k in spec.item_prices)) + 1
                ground = n * m
                members = [a for a in range(1 << ground) if fam.contains(a)]
            sub[str(c_idx)] = members
        out["sub_constraint"] = sub
    return out


def spec_from_dict(instance: Instance, d: dict) -> MechanismSpec:
    sub = None
    if d.get("sub_constraint") is not None:
        sub = {
            int(c): ExplicitPairFamily(instance.n, instance.m, members)
            for c, members in d["sub_constraint"].items()
        }
    return MechanismSpec(
        kind=d["kind"],
        item_prices={(i, j, c): rat(v) for i, j, c, v in d["item_prices"]},
        tie_allow={(i, j, c): rat(v) for i, j, c, v in d.get("tie_allow", [])},
        permit_prices={
            (i, j): (None if v is None else rat(v))
            for i, j, v in d.get("permit_prices", [])
        },
        bundle_prices={i: rat(v) for i, v in d.get("bundle_prices", [])},
        sub_constraint=sub,
        order=tuple(d["order"]) if d.get("order") is not None else None,
        hide_to_half=d.get("hide_to_half", False),
        hiding_probs={
            (i, j, c): rat(v) for i, j, c, v in d.get("hiding_probs", [])
        },
        note=d.get("note", ""),
    )


def save_spec(spec: MechanismSpec, path: str):
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=1, sort_keys=True)


def load_spec(instance: Instance, path: str) -> MechanismSpec:
    with open(path) as fh:
        return spec_from_dict(instance, json.load(fh))
