"""Seeded property suite over random discrete joints.

Checks, for every instance and class pair, that the minimax predictor is
unchanged when the joint is replaced by its reflection, that the reflection
stays in the feasible family, and that regret computed as an MSE difference
equals the squared distance to the conditional mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import FunctionClass
from .discrete import (
    DiscreteJoint,
    exact_minimax,
    exact_mse,
    exact_regret,
    exact_regret_distance,
    random_joint,
    reflect,
)
from .family import check_membership, family_of

PROPERTIES = ("minimax-invariance", "reflection-membership", "regret-identity")
EXACT_TOL = 1e-10


def class_pairs() -> list[tuple[str, FunctionClass, FunctionClass]]:
    basis = FunctionClass.basis(["identity", "square"])
    return [
        ("linear/linear", FunctionClass.linear(), FunctionClass.linear()),
        ("basis/basis", basis, FunctionClass.basis(["identity", "pow:3"])),
        ("all/linear", FunctionClass.all_functions(), FunctionClass.linear()),
        ("all/basis", FunctionClass.all_functions(), basis),
    ]


def corrupt(dj: DiscreteJoint) -> DiscreteJoint:
    """Negative control: move probability mass between atoms of different ``(x1, x2)``."""
    p = dj.probs.copy()
    keys = [tuple(dj.x1[k]) + tuple(dj.x2[k]) for k in range(dj.size)]
    other = next((k for k in range(1, dj.size) if keys[k] != keys[0]), None)
    if other is None:
        p[0] *= 1.5
    else:
        shift = 0.5 * p[0]
        p[0] -= shift
        p[other] += shift
    return DiscreteJoint(dj.x1, dj.x2, dj.y, p / p.sum())


@dataclass
class PropertyReport:
    passed: dict = field(default_factory=lambda: {p: 0 for p in PROPERTIES})
    total: dict = field(default_factory=lambda: {p: 0 for p in PROPERTIES})
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def record(self, prop: str, ok: bool, detail: str):
        self.total[prop] += 1
        if ok:
            self.passed[prop] += 1
        else:
            self.failures.append(f"{prop}: {detail}")

    def lines(self) -> list[str]:
        return [f"{p}: {self.passed[p]}/{self.total[p]} passed" for p in PROPERTIES]


def check_instance(dj: DiscreteJoint, report: PropertyReport, label: str, inject_corruption: bool = False):
    for name, ca, cb in class_pairs():
        tag = f"{label} {name}"
        rho = exact_minimax(dj, ca, cb)
        values = rho.at_atoms(dj)
        refl = reflect(dj, values)
        if inject_corruption:
            refl = corrupt(refl)
        rho_r = exact_minimax(refl, ca, cb)
        gap = float(np.max(np.abs(rho_r._predict(dj.x1, dj.x2) - values)))
        mse_gap = abs(exact_mse(dj, values) - exact_mse(refl, rho_r.at_atoms(refl)))
        report.record(
            "minimax-invariance",
            gap <= EXACT_TOL and mse_gap <= EXACT_TOL,
            f"{tag}: pointwise gap {gap:.3g}, MSE gap {mse_gap:.3g}",
        )
        verdict = check_membership(refl, family_of(dj, ca, cb))
        report.record(
            "reflection-membership",
            verdict.member,
            f"{tag}: failing {verdict.failing} residuals {verdict.residuals}",
        )
        single = dj.conditional_mean(values, 1)
        worst = max(
            abs(exact_regret(dj, values, (1, 2)) - exact_regret_distance(dj, values, (1, 2))),
            abs(exact_regret(dj, single, 1) - exact_regret_distance(dj, single, 1)),
        )
        report.record("regret-identity", worst <= EXACT_TOL, f"{tag}: gap {worst:.3g}")


def run_suite(count: int, seed: int = 0, inject_corruption: bool = False) -> PropertyReport:
    """Run every property on ``count`` random joints with seeds ``seed, seed+1, ...``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    report = PropertyReport()
    for i in range(count):
        s = seed + i
        check_instance(random_joint(s), report, f"seed {s}", inject_corruption)
    return report
