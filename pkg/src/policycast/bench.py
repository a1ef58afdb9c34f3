"""Timing harness for the four scheme operations.

Each measurement point runs one discarded warm-up plus `trials` timed
runs (monotonic clock) of a single operation against an n-attribute AND
policy, for n over the requested range.  Results can be dumped as CSV
with one row per (profile, operation, attribute count).
"""

import csv
import random
import statistics
import time
from dataclasses import dataclass, fields

from . import absc
from .groups import GroupContext

OPERATIONS = ("setup", "keygen", "signcrypt", "designcrypt")


@dataclass(frozen=True)
class BenchResult:
    profile: str
    operation: str
    attribute_count: int
    trials: int
    mean_ms: float
    median_ms: float
    min_ms: float
    max_ms: float


def _attrs(n):
    return [f"attr{i:02d}" for i in range(n)]


def _and_policy(n):
    return " and ".join(_attrs(n))


def _time(fn, trials):
    fn()  # warm-up, discarded
    samples = []
    for _ in range(trials):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    return samples


def run_bench(profiles, operations=OPERATIONS, counts=range(2, 20),
              trials=5, msg_size=1024, seed=1234):
    """Run the requested measurements; returns a list of BenchResult."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    results = []
    for profile in profiles:
        ctx = GroupContext(profile)
        rng = random.Random(seed)
        pp, mk = absc.setup(ctx, rng)
        msg = rng.getrandbits(8 * msg_size).to_bytes(msg_size, "big") if msg_size else b"\x00"
        for n in counts:
            attrs = _attrs(n)
            policy = _and_policy(n)
            key = absc.keygen(pp, mk, attrs, rng)
            sk, vk = absc.signing_keygen(pp, mk, rng)
            st, ct_msg = absc.signcrypt(pp, sk, msg, policy, rng)
            per_op = {
                "setup": lambda: absc.setup(ctx, rng),
                "keygen": lambda: absc.keygen(pp, mk, attrs, rng),
                "signcrypt": lambda: absc.signcrypt(pp, sk, msg, policy, rng),
                "designcrypt": lambda: absc.designcrypt(pp, st, ct_msg, key, vk),
            }
            for op in operations:
                if op not in per_op:
                    raise ValueError(f"unknown operation {op!r}")
                samples = _time(per_op[op], trials)
                results.append(BenchResult(
                    profile=ctx.profile.value,
                    operation=op,
                    attribute_count=n,
                    trials=trials,
                    mean_ms=statistics.fmean(samples),
                    median_ms=statistics.median(samples),
                    min_ms=min(samples),
                    max_ms=max(samples),
                ))
    return results


def write_csv(results, path):
    cols = [f.name for f in fields(BenchResult)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for r in results:
            writer.writerow([getattr(r, c) for c in cols])


def medians_by_count(results, profile, operation):
    """attribute_count -> median_ms for one (profile, operation) series."""
    series = {r.attribute_count: r.median_ms for r in results
              if r.profile == profile and r.operation == operation}
    return dict(sorted(series.items()))
