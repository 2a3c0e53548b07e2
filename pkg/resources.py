"""
CPU and memory sampling of the running process and its worker processes.
"""
import logging
import threading
import time
from dataclasses import dataclass

import numpy as np

try:
    import psutil
except ImportError:  # monitor degrades to wall-clock only
    psutil = None

logger = logging.getLogger(__name__)

SAMPLE_PERIOD = 0.5


@dataclass(frozen=True)
class ResourceSummary:
    avg_cpu_percent: float
    avg_memory_percent: float
    wall_clock: float
    samples: int
    available: bool = True

    def to_dict(self):
        return {'avg_cpu_percent': self.avg_cpu_percent, 'avg_memory_percent': self.avg_memory_percent,
                'wall_clock': self.wall_clock, 'samples': self.samples, 'available': self.available}


class ResourceMonitor(object):
    """
    Samples every `period` seconds on a daemon thread. CPU percent is relative to one core,
    so a process saturating two cores reports about 200.

        monitor = ResourceMonitor().start()
        ...
        summary = monitor.stop()
    """

    def __init__(self, period=SAMPLE_PERIOD):
        self.period = period
        self._processes = {}
        self._cpu = []
        self._memory = []
        self._stop = threading.Event()
        self._thread = None
        self._started = None
        self.available = psutil is not None

    def _tracked(self):
        root = psutil.Process()
        current = [root] + root.children(recursive=True)
        for process in current:
            if process.pid not in self._processes:
                try:
                    process.cpu_percent(None)  # first call only primes the counter
                except (psutil.NoSuchProcess, psutil.ZombieProcess):
                    continue
                self._processes[process.pid] = process
        alive = {process.pid for process in current}
        for pid in list(self._processes):
            if pid not in alive:
                del self._processes[pid]
        return list(self._processes.values())

    def _sample(self):
        cpu, memory = 0.0, 0.0
        for process in self._tracked():
            try:
                cpu += process.cpu_percent(None)
                memory += process.memory_percent()
            except (psutil.NoSuchProcess, psutil.ZombieProcess):
                continue
        self._cpu.append(cpu)
        self._memory.append(memory)

    def _run(self):
        while not self._stop.wait(self.period):
            try:
                self._sample()
            except psutil.AccessDenied:
                logger.warning("Resource sampling denied, reporting wall-clock time only")
                self.available = False
                return

    def start(self):
        self._started = time.perf_counter()
        if self.available:
            try:
                self._tracked()
            except psutil.AccessDenied:
                self.available = False
        if self.available:
            self._thread = threading.Thread(target=self._run, name='resource-monitor', daemon=True)
            self._thread.start()
        return self

    def stop(self):
        assert self._started is not None, "monitor was never started"
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        wall_clock = time.perf_counter() - self._started
        if not self.available or not self._cpu:
            return ResourceSummary(0.0, 0.0, wall_clock, 0, available=self.available and bool(self._cpu))
        return ResourceSummary(float(np.mean(self._cpu)), float(np.mean(self._memory)), wall_clock, len(self._cpu))

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.summary = self.stop()
        return False
