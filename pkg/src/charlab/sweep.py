"""Default counterexample specs and seeded detection sweeps."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .distributions import ScalarFamily
from .theorems import CONSISTENT, ExperimentSpec, run

FAMILIES = {
    "uniform": {},
    "laplace": {},
    "exponential": {},
    # well-separated modes; the family's own defaults are close to a single Gaussian
    "mixture": {"w": 0.8, "m1": -5.0, "m2": 5.0, "sigma": 0.5},
}
DRIVERS = ("sd", "heyde", "sample_mean")
PRIMARY = {"sd": "lemma1", "heyde": "lemma4", "sample_mean": "lemma6"}


def default_spec(theorem: str, family: str, seed: int, source: str = "empirical", N: int = 100_000,
                 params: dict | None = None, **kw) -> ExperimentSpec:
    law = ScalarFamily(family, FAMILIES.get(family, {}) if params is None else params, 1)
    if theorem == "sd":
        return ExperimentSpec("sd", (law, law), A=(1, 1), B=(1, -1), source=source, N=N, seed=seed, **kw)
    if theorem == "heyde":
        return ExperimentSpec("heyde", (law, law), A=(1, 1), B=(1, 2), source=source, N=N, seed=seed, **kw)
    if theorem == "sample_mean":
        return ExperimentSpec("sample_mean", (law,) * 3, source=source, N=N, seed=seed, **kw)
    raise ValueError(f"no default spec for {theorem!r}")


@dataclass
class SweepResult:
    family: str
    theorem: str
    seeds: int
    detected: int = 0
    conclusions: dict = field(default_factory=dict)
    ratios: list = field(default_factory=list)  # max |Delta^3| / noise threshold per seed
    seconds: float = 0.0

    @property
    def rate(self) -> float:
        return self.detected / self.seeds if self.seeds else 0.0


def detection_sweep(family: str, theorem: str, seeds: int = 20, **kw) -> SweepResult:
    """Count seeds whose primary residual certifies not_polynomial at every degree up to D_max."""
    out = SweepResult(family, theorem, seeds)
    t0 = time.perf_counter()
    for s in range(seeds):
        v = run(default_spec(theorem, family, s, **kw))
        cert = v.certificate(PRIMARY[theorem])
        out.conclusions[v.conclusion] = out.conclusions.get(v.conclusion, 0) + 1
        if cert.verdict == "not_polynomial" and v.conclusion == CONSISTENT:
            out.detected += 1
        # Delta^3 is the first difference that sees a departure from the Gaussian quadratic
        c2 = cert.per_degree[min(2, len(cert.per_degree) - 1)]
        out.ratios.append(c2.max_residual / c2.noise_threshold if c2.noise_threshold > 0 else float("inf"))
    out.seconds = time.perf_counter() - t0
    return out
