"""Bandwidth performance model, throughput measurement and scaling sizes."""
import time
from dataclasses import dataclass
from pathlib import Path

from .descriptor import Q

FLAG_BYTES = 8 + 4          # two per-cell flags: a 64-bit and a 32-bit one


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    bandwidth: float        # bytes / second
    capacity: float         # bytes

    def __post_init__(self):
        if self.bandwidth <= 0 or self.capacity <= 0:
            raise ValueError("device bandwidth and capacity must be positive")


A100 = DeviceSpec("A100-SXM4-40GB", 1555e9, 40e9)


def load_catalog(path=None, host_bandwidth=None, host_capacity=None):
    """Device catalog: built-in A100 plus entries from a text file.

    Each non-comment line of the file reads ``name bandwidth_GBps capacity_GB``.
    A ``host`` entry is added when a measured bandwidth is supplied.
    """
    devices = {A100.name: A100, "a100": A100}
    if path is not None:
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            name, bw, cap = line.split()
            devices[name] = DeviceSpec(name, float(bw) * 1e9, float(cap) * 1e9)
    if host_bandwidth:
        devices["host"] = DeviceSpec("host", float(host_bandwidth),
                                     float(host_capacity or 1e12))
    return devices


def _store_bytes(precision):
    if precision in (32, "f32", "float32"):
        return 4
    if precision in (64, "f64", "float64"):
        return 8
    if isinstance(precision, int) and precision > 0:
        return precision
    raise ValueError(f"unknown precision {precision!r}")


def bytes_per_cell(precision):
    """Bytes moved per cell update: read and write 19 populations plus flags.

    ``precision`` is 32 or 64 (bits), ``"f32"``/``"f64"``, or any other
    positive integer taken as the bytes per stored value.
    """
    return 2 * Q * _store_bytes(precision) + FLAG_BYTES


def peak_glups(device, precision):
    return device.bandwidth / bytes_per_cell(precision) / 1e9


def memory_fraction(device, precision, L):
    """Used fraction of device memory for an L^3 domain (>1: does not fit)."""
    return bytes_per_cell(precision) * float(L) ** 3 / device.capacity


def max_L(device, precision):
    n = bytes_per_cell(precision)
    L = int(round((device.capacity / n) ** (1.0 / 3.0)))
    while n * L ** 3 > device.capacity:
        L -= 1
    while n * (L + 1) ** 3 <= device.capacity:
        L += 1
    return L


def scaling_sizes(L, workers, mode):
    """Weak: global L for each worker count.  Strong: per-worker L_eff."""
    if mode not in ("weak", "strong"):
        raise ValueError(f"unknown scaling mode {mode!r}")
    counts = range(1, workers + 1) if isinstance(workers, int) else workers
    out = []
    for w in counts:
        if w < 1:
            raise ValueError("worker counts must be >= 1")
        if mode == "weak":
            out.append(int(round(L * w ** (1.0 / 3.0))))
        else:
            out.append(int(round((L ** 3 / w) ** (1.0 / 3.0))))
    return out


@dataclass
class PerfReport:
    cells: int
    steps: int
    seconds: float
    mlups: float
    fraction_of_peak: float = None
    repetitions: tuple = ()

    CSV_FIELDS = ("cells", "steps", "seconds", "mlups", "fraction_of_peak")

    def csv_row(self):
        frac = "" if self.fraction_of_peak is None else "%.17g" % self.fraction_of_peak
        return [str(self.cells), str(self.steps), "%.17g" % self.seconds,
                "%.17g" % self.mlups, frac]


def mlups(cells, steps, seconds):
    return cells * steps / seconds / 1e6


def measure_mlups(runner, cells, warmup=1, steps=10, repetitions=3, device=None,
                  precision=64, clock=time.perf_counter):
    """Time ``runner(n)`` (advance n steps) and average over repetitions.

    The reported MLUPS is the mean of the per-repetition MLUPS values.
    """
    if steps < 1:
        raise ValueError("need at least one timed step")
    if warmup:
        runner(warmup)
    reps = []
    secs = []
    for _ in range(repetitions):
        t0 = clock()
        runner(steps)
        dt = clock() - t0
        secs.append(dt)
        reps.append(mlups(cells, steps, dt))
    mean = sum(reps) / len(reps)
    frac = None
    if device is not None:
        frac = mean / (peak_glups(device, precision) * 1e3)
    return PerfReport(cells, steps, sum(secs) / len(secs), mean, frac, tuple(reps))
